//! Normal distribution functions and Gauss–Hermite quadrature.

mod hermite;
mod normal;

pub use hermite::GaussHermite;
pub use normal::{
    bvn_cdf, ln_norm_pdf, log_norm_cdf, log_norm_sf, norm_cdf, norm_pdf, norm_quantile,
    LN_SQRT_2PI,
};
