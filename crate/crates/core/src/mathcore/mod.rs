//! Dense linear algebra and statistics kernels shared by the other modules.

pub mod ball;
pub mod banded;
pub mod chi2;
pub mod linalg;
pub mod random;
pub mod serde_mat;

pub use ball::max_norm_affine_over_ball;
pub use banded::BandCholesky;
pub use chi2::{chi2_cdf, chi2_quantile, gaussian_backoff, normal_cdf};
pub use linalg::{
    block_diag, block_diag_repeat, hstack, kron, mat_pow, operator_norm, spectral_radius,
    sym_sqrt, unvec, vec, vstack_vectors, Matrix, SpdMatrix, Vector,
};
pub use random::{sample_gaussian, GaussianSampler, Rng};
