//! Image containers, file I/O, and shared per-pixel primitives.

mod filter;
mod image;
mod io;
mod ssim;

pub use filter::{gaussian_filter, laplacian, sobel_magnitude};
pub use image::{GrayImage, SampleResult};
pub use io::{load_pfm, load_pfm_gray, load_pgm, save_pfm, save_pfm_gray, save_pgm, PfmPlanes};
pub use ssim::ssim;

pub(crate) use filter::{gaussian_taps_1d, laplacian_adjoint, separable_replicate};
pub(crate) use image::check_same_dims;
pub(crate) use ssim::ssim_with_grad;
