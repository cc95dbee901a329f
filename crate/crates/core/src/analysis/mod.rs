//! Statistical post-processing: beta mixtures, period extraction and
//! exponential fits.

pub mod beta;
pub mod em;
pub mod expfit;
pub mod period;

pub use beta::{beta_ln_pdf, beta_pdf, BetaComponent};
pub use em::{em_fit, MixtureFit};
pub use expfit::{exp_fit, ExpFit};
pub use period::{
    classify_and_extract_period, extract_period, qpf_theoretical_distribution, ClassificationReport,
    StateReport,
};
