//! Dense matrix kernels, norms and the seeded random stream shared by every
//! other module. No domain semantics live here.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{
    inf_norm, l21_norm, solve_linear, spectral_norm, spectral_norm_power, spectral_radius_bound,
    sym_eig, sym_sqrt, Spectrum, JACOBI_TOL, PIVOT_TOL, SYM_TOL,
};
pub use matrix::Matrix;
pub use rng::{RngStream, RNG_ALGORITHM};
