//! Numerical substrate: dense linear algebra, special functions, and the
//! reproducible random-stream contract the rest of the crate builds on.

pub mod linalg;
pub mod rng;
pub mod special;

pub use linalg::{
    cholesky, ensure_full_column_rank, gram_matrix, gram_solve, inf_norm, null_space_basis,
    random_gaussian_matrix, random_orthonormal_columns, spd_solve, CholeskyFactor,
};
pub use rng::RngStream;
pub use special::{erf, erfc, scaled_erfc, std_normal_cdf, std_normal_pdf};
