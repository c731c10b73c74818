//! Windowed structural similarity with an 11x11 Gaussian window
//! (sigma = 1.5) and the conventional stability constants for dynamic
//! range 1: C1 = 0.01^2, C2 = 0.03^2. Local statistics use replicate
//! padding, consistent with the rest of the crate's filtering.

use crate::error::Result;
use crate::raster::filter::{gaussian_taps_1d, separable_replicate, separable_replicate_adjoint};
use crate::raster::image::check_same_dims;
use crate::raster::GrayImage;

pub(crate) const SSIM_C1: f64 = 0.01 * 0.01;
pub(crate) const SSIM_C2: f64 = 0.03 * 0.03;
const WINDOW_SIGMA: f64 = 1.5;
const WINDOW_HALF: usize = 5;

fn window_taps() -> Vec<f64> {
    gaussian_taps_1d(WINDOW_SIGMA, WINDOW_HALF)
}

struct LocalStats {
    mu_a: GrayImage,
    mu_b: GrayImage,
    var_a: GrayImage,
    var_b: GrayImage,
    cov: GrayImage,
}

fn local_stats(a: &GrayImage, b: &GrayImage, taps: &[f64]) -> LocalStats {
    let mu_a = separable_replicate(a, taps);
    let mu_b = separable_replicate(b, taps);
    let aa = separable_replicate(&a.zip_map(a, |p, q| p * q).unwrap(), taps);
    let bb = separable_replicate(&b.zip_map(b, |p, q| p * q).unwrap(), taps);
    let ab = separable_replicate(&a.zip_map(b, |p, q| p * q).unwrap(), taps);
    let n = a.len();
    let mut var_a = GrayImage::new(a.height(), a.width());
    let mut var_b = var_a.clone();
    let mut cov = var_a.clone();
    for i in 0..n {
        var_a.data_mut()[i] = aa.data()[i] - mu_a.data()[i] * mu_a.data()[i];
        var_b.data_mut()[i] = bb.data()[i] - mu_b.data()[i] * mu_b.data()[i];
        cov.data_mut()[i] = ab.data()[i] - mu_a.data()[i] * mu_b.data()[i];
    }
    LocalStats {
        mu_a,
        mu_b,
        var_a,
        var_b,
        cov,
    }
}

/// Mean SSIM over all pixels; result lies in `[-1, 1]`.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_same_dims("ssim", a, b)?;
    let taps = window_taps();
    let s = local_stats(a, b, &taps);
    let mut total = 0.0;
    for i in 0..a.len() {
        let (mu_a, mu_b) = (s.mu_a.data()[i], s.mu_b.data()[i]);
        let a1 = 2.0 * mu_a * mu_b + SSIM_C1;
        let a2 = 2.0 * s.cov.data()[i] + SSIM_C2;
        let b1 = mu_a * mu_a + mu_b * mu_b + SSIM_C1;
        let b2 = s.var_a.data()[i] + s.var_b.data()[i] + SSIM_C2;
        total += (a1 * a2) / (b1 * b2);
    }
    Ok(total / a.len() as f64)
}

/// Mean SSIM together with its analytic gradient with respect to the first
/// image. Used by the fusion energy solver.
pub(crate) fn ssim_with_grad(f: &GrayImage, v: &GrayImage) -> Result<(f64, GrayImage)> {
    check_same_dims("ssim", f, v)?;
    let taps = window_taps();
    let s = local_stats(f, v, &taps);
    let n = f.len();
    let nf = n as f64;

    let mut total = 0.0;
    // Per-pixel derivatives of the SSIM map with respect to the local
    // statistics (mu_f, cov, var_f).
    let mut d_mu = GrayImage::new(f.height(), f.width());
    let mut d_cov = d_mu.clone();
    let mut d_var = d_mu.clone();
    for i in 0..n {
        let (mu_f, mu_v) = (s.mu_a.data()[i], s.mu_b.data()[i]);
        let a1 = 2.0 * mu_f * mu_v + SSIM_C1;
        let a2 = 2.0 * s.cov.data()[i] + SSIM_C2;
        let b1 = mu_f * mu_f + mu_v * mu_v + SSIM_C1;
        let b2 = s.var_a.data()[i] + s.var_b.data()[i] + SSIM_C2;
        total += (a1 * a2) / (b1 * b2);
        d_mu.data_mut()[i] = 2.0 * mu_v * a2 / (b1 * b2) - 2.0 * mu_f * a1 * a2 / (b1 * b1 * b2);
        d_cov.data_mut()[i] = 2.0 * a1 / (b1 * b2);
        d_var.data_mut()[i] = -a1 * a2 / (b1 * b2 * b2);
    }

    // Chain rule through mu_f = W f, cov = W(fv) - mu_f mu_v and
    // var_f = W(f^2) - mu_f^2, where W is the replicate-padded window:
    //   dSSIM/df = W^T(d_mu - mu_v d_cov - 2 mu_f d_var)
    //            + v . W^T(d_cov) + 2 f . W^T(d_var),  all over N.
    let mut combined = GrayImage::new(f.height(), f.width());
    for i in 0..n {
        combined.data_mut()[i] = d_mu.data()[i]
            - s.mu_b.data()[i] * d_cov.data()[i]
            - 2.0 * s.mu_a.data()[i] * d_var.data()[i];
    }
    let t0 = separable_replicate_adjoint(&combined, &taps);
    let t1 = separable_replicate_adjoint(&d_cov, &taps);
    let t2 = separable_replicate_adjoint(&d_var, &taps);

    let mut grad = GrayImage::new(f.height(), f.width());
    for i in 0..n {
        grad.data_mut()[i] =
            (t0.data()[i] + v.data()[i] * t1.data()[i] + 2.0 * f.data()[i] * t2.data()[i]) / nf;
    }
    Ok((total / nf, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        GrayImage::from_vec(h, w, (0..h * w).map(|_| next()).collect()).unwrap()
    }

    #[test]
    fn ssim_self_is_one() {
        let img = noise_image(16, 16, 7);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_constant_pair_penalizes_luminance_only() {
        let a = GrayImage::constant(8, 8, 0.3);
        let b = GrayImage::constant(8, 8, 0.7);
        let s = ssim(&a, &b).unwrap();
        assert!(s < 1.0 && s > 0.0, "got {s}");
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = noise_image(12, 12, 1);
        let b = noise_image(12, 12, 2);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn ssim_rejects_dimension_mismatch() {
        let a = GrayImage::constant(4, 4, 0.1);
        let b = GrayImage::constant(4, 5, 0.1);
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn ssim_gradient_matches_finite_differences() {
        let f = noise_image(8, 8, 11);
        let v = noise_image(8, 8, 12);
        let (_, grad) = ssim_with_grad(&f, &v).unwrap();
        let h = 1e-6;
        for &i in &[0usize, 7, 27, 35, 56, 63] {
            let mut fp = f.clone();
            fp.data_mut()[i] += h;
            let mut fm = f.clone();
            fm.data_mut()[i] -= h;
            let fd = (ssim(&fp, &v).unwrap() - ssim(&fm, &v).unwrap()) / (2.0 * h);
            let g = grad.data()[i];
            assert!(
                (fd - g).abs() <= 1e-6 * (1.0 + fd.abs().max(g.abs())),
                "pixel {i}: analytic {g} vs fd {fd}"
            );
        }
    }
}
