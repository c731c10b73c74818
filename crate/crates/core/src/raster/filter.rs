//! Fixed-kernel filtering: Laplacian, Sobel magnitude, Gaussian smoothing.
//!
//! All kernels are applied by correlation with replicate (clamp-to-edge)
//! padding. Adjoint variants scatter instead of gather; they are the exact
//! transposes needed for analytic energy gradients.

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// 4-neighbor Laplacian kernel.
const LAPLACIAN: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

/// Apply a 3x3 kernel with replicate padding.
pub(crate) fn conv3x3_replicate(img: &GrayImage, kernel: &[[f64; 3]; 3]) -> GrayImage {
    let (h, w) = img.dims();
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ky, row) in kernel.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    if k != 0.0 {
                        acc += k * img.get_clamped(
                            y as isize + ky as isize - 1,
                            x as isize + kx as isize - 1,
                        );
                    }
                }
            }
            out.set(y, x, acc);
        }
    }
    out
}

/// Adjoint of [`conv3x3_replicate`]: scatters each output-side value back
/// through the same clamped taps.
pub(crate) fn conv3x3_replicate_adjoint(img: &GrayImage, kernel: &[[f64; 3]; 3]) -> GrayImage {
    let (h, w) = img.dims();
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let g = img.get(y, x);
            if g == 0.0 {
                continue;
            }
            for (ky, row) in kernel.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    if k != 0.0 {
                        let yy = (y as isize + ky as isize - 1).clamp(0, h as isize - 1) as usize;
                        let xx = (x as isize + kx as isize - 1).clamp(0, w as isize - 1) as usize;
                        out.set(yy, xx, out.get(yy, xx) + k * g);
                    }
                }
            }
        }
    }
    out
}

/// 4-neighbor Laplacian with replicate padding; signed output.
pub fn laplacian(img: &GrayImage) -> GrayImage {
    conv3x3_replicate(img, &LAPLACIAN)
}

/// Adjoint of [`laplacian`] (not self-adjoint at the border because of the
/// replicate padding).
pub(crate) fn laplacian_adjoint(img: &GrayImage) -> GrayImage {
    conv3x3_replicate_adjoint(img, &LAPLACIAN)
}

/// Sobel gradient magnitude `sqrt(Gx^2 + Gy^2)` with replicate padding.
/// The two one-sided sums are formed before differencing so a constant
/// image responds with exact zeros.
pub fn sobel_magnitude(img: &GrayImage) -> GrayImage {
    let (h, w) = img.dims();
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let (yi, xi) = (y as isize, x as isize);
            let tl = img.get_clamped(yi - 1, xi - 1);
            let tc = img.get_clamped(yi - 1, xi);
            let tr = img.get_clamped(yi - 1, xi + 1);
            let ml = img.get_clamped(yi, xi - 1);
            let mr = img.get_clamped(yi, xi + 1);
            let bl = img.get_clamped(yi + 1, xi - 1);
            let bc = img.get_clamped(yi + 1, xi);
            let br = img.get_clamped(yi + 1, xi + 1);
            let gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
            let gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
            out.set(y, x, gx.hypot(gy));
        }
    }
    out
}

/// Unit-sum 1D Gaussian taps over offsets `-k..=k`.
pub(crate) fn gaussian_taps_1d(sigma: f64, k: usize) -> Vec<f64> {
    let mut taps: Vec<f64> = (-(k as isize)..=k as isize)
        .map(|o| (-((o * o) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    taps
}

fn pass_horizontal(img: &GrayImage, taps: &[f64]) -> GrayImage {
    let (h, w) = img.dims();
    let k = (taps.len() / 2) as isize;
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &t) in taps.iter().enumerate() {
                acc += t * img.get_clamped(y as isize, x as isize + i as isize - k);
            }
            out.set(y, x, acc);
        }
    }
    out
}

fn pass_vertical(img: &GrayImage, taps: &[f64]) -> GrayImage {
    let (h, w) = img.dims();
    let k = (taps.len() / 2) as isize;
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &t) in taps.iter().enumerate() {
                acc += t * img.get_clamped(y as isize + i as isize - k, x as isize);
            }
            out.set(y, x, acc);
        }
    }
    out
}

fn pass_horizontal_adjoint(img: &GrayImage, taps: &[f64]) -> GrayImage {
    let (h, w) = img.dims();
    let k = (taps.len() / 2) as isize;
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let g = img.get(y, x);
            for (i, &t) in taps.iter().enumerate() {
                let xx = (x as isize + i as isize - k).clamp(0, w as isize - 1) as usize;
                out.set(y, xx, out.get(y, xx) + t * g);
            }
        }
    }
    out
}

fn pass_vertical_adjoint(img: &GrayImage, taps: &[f64]) -> GrayImage {
    let (h, w) = img.dims();
    let k = (taps.len() / 2) as isize;
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let g = img.get(y, x);
            for (i, &t) in taps.iter().enumerate() {
                let yy = (y as isize + i as isize - k).clamp(0, h as isize - 1) as usize;
                out.set(yy, x, out.get(yy, x) + t * g);
            }
        }
    }
    out
}

/// Filter with the separable unit-sum taps (horizontal then vertical).
/// Because replicate padding clamps each axis independently, this equals
/// full 2D convolution with the outer-product kernel.
pub(crate) fn separable_replicate(img: &GrayImage, taps: &[f64]) -> GrayImage {
    pass_vertical(&pass_horizontal(img, taps), taps)
}

/// Adjoint of [`separable_replicate`].
pub(crate) fn separable_replicate_adjoint(img: &GrayImage, taps: &[f64]) -> GrayImage {
    pass_horizontal_adjoint(&pass_vertical_adjoint(img, taps), taps)
}

/// Gaussian smoothing with the unit-sum `(2k+1)x(2k+1)` kernel and replicate
/// padding. Mean-preserving on constant images by construction.
pub fn gaussian_filter(img: &GrayImage, sigma: f64, k: usize) -> Result<GrayImage> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidParameter(
            "gaussian half-width k must be >= 1".into(),
        ));
    }
    Ok(separable_replicate(img, &gaussian_taps_1d(sigma, k)))
}
