//! Numerical kernels shared by the rest of the crate.

mod fft;
mod linalg;
mod pca;
mod stats;
mod tensor;

pub use fft::{fft2, ifft2, ifft2_with_residue};
pub use linalg::{dot, norm, symmetric_eigen};
pub use pca::PcaModel;
pub use stats::{cosine_similarity, mean, population_variance};
pub use tensor::{Complex, Matrix, Spectrum, Tensor2D};
