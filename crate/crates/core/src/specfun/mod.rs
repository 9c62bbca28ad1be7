//! Scalar special functions and quadrature primitives.

pub mod dd;
mod gamma;
mod quadrature;
mod series;

pub use gamma::{
    gamma, gamma_ratio, is_nonpositive_integer, ln_gamma, ln_gamma_signed, log_gamma, pochhammer, rgamma, sin_pi,
};
pub use quadrature::{gauss_legendre, integrate_adaptive, integrate_adaptive_floor, integrate_dyadic, integrate_dyadic_floor, integrate_graded, integrate_half_line, QuadratureRule};
pub use series::{bessel_j, gauss_2f1, hyp_0fm, hyp_0fm_with, hyp_1fm, SERIES_CAP, SERIES_TOL};
