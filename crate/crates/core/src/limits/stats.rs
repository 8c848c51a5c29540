//! Sample statistics used by the experiments.

use statrs::statistics::{Data, OrderStatistics, Statistics};

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    match xs.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (xs[0], 0.0),
        n => (xs.mean(), (xs.variance() / n as f64).sqrt()),
    }
}

/// Unbiased sample variance with a standard error from the fourth central moment.
pub fn variance_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.mean();
    let var = xs.variance();
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    let biased = var * (n - 1) as f64 / n as f64;
    (var, ((m4 - biased * biased).max(0.0) / n as f64).sqrt())
}

/// Quantile `p` with an order-statistic standard error: half the spread of
/// the order statistics one binomial sd either side of `Np`.
pub fn quantile_stderr(xs: &[f64], p: f64) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut data = Data::new(xs.to_vec());
    let q = data.quantile(p);
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let lo = (n as f64 * p - sd).floor().clamp(1.0, n as f64) as usize;
    let hi = (n as f64 * p + sd).ceil().clamp(1.0, n as f64) as usize;
    let spread = data.order_statistic(hi) - data.order_statistic(lo);
    (q, 0.5 * spread)
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let cov = a.covariance(b);
    let d = (a.variance() * b.variance()).sqrt();
    if d == 0.0 {
        0.0
    } else {
        cov / d
    }
}

/// Least-squares slope of `y` on `x` (with intercept) and its standard error.
pub fn regression_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let (mx, my) = (x.mean(), y.mean());
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if n < 3 || sxx == 0.0 {
        return (0.0, f64::INFINITY);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (rss / (n - 2) as f64 / sxx).sqrt())
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2j²λ²)`, the Kolmogorov tail.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' small-sample correction.
fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov–Smirnov statistic and p-value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> (f64, f64) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    (d, ks_p_value(d, n))
}

/// Two-sample Kolmogorov–Smirnov statistic and p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    (d, ks_p_value(d, na * nb / (na + nb)))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Squared energy distance between two equally sized samples of vectors,
/// with a jackknife standard error.
///
/// All three mean distances skip the `i = j` pairs, so the statistic stays
/// unbiased when `xs[i]` and `ys[i]` are coupled.
pub fn energy_distance(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> (f64, f64) {
    let n = xs.len();
    assert_eq!(n, ys.len(), "energy distance needs paired samples");
    if n < 3 {
        return (f64::NAN, f64::NAN);
    }
    // Row sums of each pairwise-distance matrix, diagonal excluded.
    let mut cross = vec![0.0; n];
    let mut within_x = vec![0.0; n];
    let mut within_y = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = distance(&xs[i], &ys[j]) + distance(&xs[j], &ys[i]);
            cross[i] += c;
            cross[j] += c;
            let dx = distance(&xs[i], &xs[j]);
            within_x[i] += dx;
            within_x[j] += dx;
            let dy = distance(&ys[i], &ys[j]);
            within_y[i] += dy;
            within_y[j] += dy;
        }
    }
    let (sc, sx, sy): (f64, f64, f64) = (cross.iter().sum(), within_x.iter().sum(), within_y.iter().sum());
    // sc counts each unordered pair's two cross distances twice.
    let stat = |sc: f64, sx: f64, sy: f64, m: f64| (sc / 2.0 - sx / 2.0 - sy / 2.0) * 2.0 / (m * (m - 1.0));
    let full = stat(sc, sx, sy, n as f64);
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            stat(
                sc - 2.0 * cross[i],
                sx - 2.0 * within_x[i],
                sy - 2.0 * within_y[i],
                (n - 1) as f64,
            )
        })
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / n as f64;
    let var = (n - 1) as f64 / n as f64 * loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>();
    (full, var.sqrt())
}
