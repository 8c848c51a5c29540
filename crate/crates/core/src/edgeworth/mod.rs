//! First- and second-order Edgeworth corrections to the coarse-grid chain
//! density: the operators `F₁`, `F₂`, the time-space convolution `⊗`, the
//! terms `π₁`, `π₂` and the ratios `δ₁`, `δ₂`.

mod convolve;
mod kernel;
mod terms;

pub use convolve::{convolve_detailed, convolve_time_space, Convolution, ConvolutionKernel, ConvolutionQuad};
pub use kernel::{Applied, DensityKernel, Kernel, Operator, ZeroKernel};
pub use terms::{
    apply_f1, apply_f2, delta1, delta2, frozen_generator_term, generator_squared, pi1, pi1_closed_constant,
    pi1_closed_constant_hermite, pi2, ConstantModelTerms, EdgeworthContext, EdgeworthQuad, EvalMode, Pi2, TermValue,
    LOG_FLOOR,
};
