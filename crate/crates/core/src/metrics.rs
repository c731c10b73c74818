//! Registration metrics (NCC, MNCC, MSE, MMSE) and fusion-quality metrics
//! (EI, SF, Qcv, FMIw, CE).
//!
//! The fusion metrics follow the standard definitions with two variations,
//! labelled in reports: FMIw uses Sobel gradient-magnitude features rather
//! than wavelet features, and Qcv uses a Gaussian low-pass in place of a
//! contrast-sensitivity filter. EI, SF and Qcv are reported on the 8-bit
//! scale (x255 and x255^2) so magnitudes are commensurate with the usual
//! literature ranges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ReconMask;
use crate::raster::{gaussian_filter, sobel_magnitude, GrayImage};

/// Named scalar results for one image pair or fusion triple.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    /// Identifiers of the images the metrics were computed on.
    pub images: Vec<String>,
    /// Fraction of pixels in the mask, present when masked metrics were used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_fraction: Option<f64>,
    pub values: BTreeMap<String, f64>,
}

/// Mean and sample standard deviation of one metric across a batch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Aggregate per-metric mean and std over a batch of reports. Metrics
/// missing from some items aggregate over the items that carry them.
pub fn aggregate_reports(reports: &[MetricsReport]) -> BTreeMap<String, Aggregate> {
    let mut samples: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (k, &v) in &r.values {
            samples.entry(k).or_default().push(v);
        }
    }
    samples
        .into_iter()
        .map(|(k, vs)| {
            let n = vs.len();
            let mean = vs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (k.to_string(), Aggregate { mean, std, count: n })
        })
        .collect()
}

fn check_dims(context: &'static str, a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            context,
            a: a.dims(),
            b: b.dims(),
        });
    }
    Ok(())
}

fn check_mask_dims(context: &'static str, a: &GrayImage, mask: &ReconMask) -> Result<()> {
    if a.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            context,
            a: a.dims(),
            b: mask.dims(),
        });
    }
    Ok(())
}

/// Pearson correlation restricted to `mask = 1` pixels (`None` means all).
fn masked_pearson(x: &GrayImage, y: &GrayImage, mask: Option<&ReconMask>) -> Result<f64> {
    let select = |i: usize| mask.map_or(true, |m| m.bits()[i] == 1);
    let n: usize = (0..x.len()).filter(|&i| select(i)).count();
    if n < 2 {
        return Err(Error::DegenerateMask {
            selected: n,
            required: 2,
        });
    }
    let nf = n as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in 0..x.len() {
        if select(i) {
            sx += x.data()[i];
            sy += y.data()[i];
        }
    }
    let (mx, my) = (sx / nf, sy / nf);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        if select(i) {
            let dx = x.data()[i] - mx;
            let dy = y.data()[i] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance(if sxx == 0.0 {
            "first image"
        } else {
            "second image"
        }));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Pearson correlation over all pixels, in `[-1, 1]`.
pub fn ncc(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    check_dims("ncc", x, y)?;
    masked_pearson(x, y, None)
}

/// Pearson correlation with sums and means restricted to `mask = 1`.
pub fn mncc(x: &GrayImage, y: &GrayImage, mask: &ReconMask) -> Result<f64> {
    check_dims("mncc", x, y)?;
    check_mask_dims("mncc", x, mask)?;
    masked_pearson(x, y, Some(mask))
}

/// Mean squared intensity difference over all pixels.
pub fn mse(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    check_dims("mse", x, y)?;
    let sum: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / x.len() as f64)
}

/// Mean squared difference over `mask = 1` pixels.
pub fn mmse(x: &GrayImage, y: &GrayImage, mask: &ReconMask) -> Result<f64> {
    check_dims("mmse", x, y)?;
    check_mask_dims("mmse", x, mask)?;
    let n = mask.count_ones();
    if n == 0 {
        return Err(Error::DegenerateMask {
            selected: 0,
            required: 1,
        });
    }
    let mut sum = 0.0;
    for i in 0..x.len() {
        if mask.bits()[i] == 1 {
            let d = x.data()[i] - y.data()[i];
            sum += d * d;
        }
    }
    Ok(sum / n as f64)
}

/// Edge intensity: mean Sobel gradient magnitude on the 8-bit scale.
pub fn edge_intensity(f: &GrayImage) -> f64 {
    sobel_magnitude(f).mean() * 255.0
}

/// Spatial frequency `sqrt(RF^2 + CF^2)` on the 8-bit scale, where RF/CF
/// are the root-mean-square horizontal/vertical first differences.
pub fn spatial_frequency(f: &GrayImage) -> Result<f64> {
    let (h, w) = f.dims();
    if h < 2 || w < 2 {
        return Err(Error::InvalidParameter(
            "spatial_frequency requires at least 2x2".into(),
        ));
    }
    let mut row_sum = 0.0;
    for y in 0..h {
        for x in 1..w {
            let d = f.get(y, x) - f.get(y, x - 1);
            row_sum += d * d;
        }
    }
    let rf2 = row_sum / (h * (w - 1)) as f64;
    let mut col_sum = 0.0;
    for y in 1..h {
        for x in 0..w {
            let d = f.get(y, x) - f.get(y - 1, x);
            col_sum += d * d;
        }
    }
    let cf2 = col_sum / ((h - 1) * w) as f64;
    Ok((rf2 + cf2).sqrt() * 255.0)
}

const HIST_BINS: usize = 256;
const KL_EPS: f64 = 1e-12;

fn intensity_histogram(img: &GrayImage) -> [f64; HIST_BINS] {
    let mut h = [0.0; HIST_BINS];
    for &v in img.data() {
        let bin = ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        h[bin] += 1.0;
    }
    let n = img.len() as f64;
    for b in h.iter_mut() {
        *b /= n;
    }
    h
}

/// KL divergence D(p || q) in bits, with zero bins of q floored at epsilon.
fn kl_divergence_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(KL_EPS)).log2())
        .sum()
}

/// Cross entropy of the fused image against both sources: the mean of
/// D(h_v || h_f) and D(h_r || h_f) over 256-bin intensity histograms.
pub fn cross_entropy(v: &GrayImage, r: &GrayImage, f: &GrayImage) -> Result<f64> {
    check_dims("cross_entropy", v, f)?;
    check_dims("cross_entropy", r, f)?;
    let hf = intensity_histogram(f);
    let dv = kl_divergence_bits(&intensity_histogram(v), &hf);
    let dr = kl_divergence_bits(&intensity_histogram(r), &hf);
    Ok((dv + dr) / 2.0)
}

const FMI_BINS: usize = 64;

/// Bin a feature raster into `FMI_BINS` levels by its own maximum.
/// Returns None when the raster is constant (degenerate feature).
fn feature_bins(feat: &GrayImage) -> Option<Vec<usize>> {
    let max = feat.data().iter().cloned().fold(f64::MIN, f64::max);
    let min = feat.data().iter().cloned().fold(f64::MAX, f64::min);
    if max - min <= 0.0 {
        return None;
    }
    Some(
        feat.data()
            .iter()
            .map(|&v| ((((v - min) / (max - min)) * FMI_BINS as f64) as usize).min(FMI_BINS - 1))
            .collect(),
    )
}

fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

/// Normalized mutual information `2 I(A;B) / (H(A) + H(B))` of two binned
/// feature rasters.
fn normalized_mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0.0; FMI_BINS * FMI_BINS];
    let mut pa = [0.0; FMI_BINS];
    let mut pb = [0.0; FMI_BINS];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * FMI_BINS + j] += 1.0;
        pa[i] += 1.0;
        pb[j] += 1.0;
    }
    for v in joint.iter_mut() {
        *v /= n;
    }
    for v in pa.iter_mut() {
        *v /= n;
    }
    for v in pb.iter_mut() {
        *v /= n;
    }
    let ha = entropy_bits(&pa);
    let hb = entropy_bits(&pb);
    if ha + hb == 0.0 {
        return 0.0;
    }
    let hab = entropy_bits(&joint);
    let mi = ha + hb - hab;
    2.0 * mi / (ha + hb)
}

/// Feature mutual information between each source and the fused image,
/// averaged; features are Sobel gradient magnitudes binned to 64 levels.
/// Constant-feature degenerate cases evaluate to 0.
pub fn fmi_w(v: &GrayImage, r: &GrayImage, f: &GrayImage) -> Result<f64> {
    check_dims("fmi_w", v, f)?;
    check_dims("fmi_w", r, f)?;
    let bf = match feature_bins(&sobel_magnitude(f)) {
        Some(b) => b,
        None => return Ok(0.0),
    };
    let score = |src: &GrayImage| -> f64 {
        match feature_bins(&sobel_magnitude(src)) {
            Some(bs) => normalized_mi(&bs, &bf),
            None => 0.0,
        }
    };
    Ok((score(v) + score(r)) / 2.0)
}

const QCV_SIGMA: f64 = 2.0;
const QCV_K: usize = 4;

/// Local-quality metric: saliency-weighted block MSE of the low-passed
/// difference between the fused image and each source, on the 8-bit^2
/// scale. Blocks tile the image; trailing partial blocks are included.
pub fn q_cv(v: &GrayImage, r: &GrayImage, f: &GrayImage, window: usize) -> Result<f64> {
    check_dims("q_cv", v, f)?;
    check_dims("q_cv", r, f)?;
    if window < 4 {
        return Err(Error::InvalidParameter(format!(
            "q_cv window must be >= 4, got {window}"
        )));
    }
    let (h, w) = f.dims();
    let sal_v = sobel_magnitude(v);
    let sal_r = sobel_magnitude(r);
    let diff_v = gaussian_filter(&v.zip_map(f, |a, b| a - b)?, QCV_SIGMA, QCV_K)?;
    let diff_r = gaussian_filter(&r.zip_map(f, |a, b| a - b)?, QCV_SIGMA, QCV_K)?;

    let mut num = 0.0;
    let mut den = 0.0;
    let mut by = 0;
    while by < h {
        let bh = window.min(h - by);
        let mut bx = 0;
        while bx < w {
            let bw = window.min(w - bx);
            let (mut lam_v, mut lam_r, mut dv, mut dr) = (0.0, 0.0, 0.0, 0.0);
            for y in by..by + bh {
                for x in bx..bx + bw {
                    let sv = sal_v.get(y, x);
                    let sr = sal_r.get(y, x);
                    lam_v += sv * sv;
                    lam_r += sr * sr;
                    dv += diff_v.get(y, x) * diff_v.get(y, x);
                    dr += diff_r.get(y, x) * diff_r.get(y, x);
                }
            }
            let area = (bh * bw) as f64;
            num += lam_v * (dv / area) + lam_r * (dr / area);
            den += lam_v + lam_r;
            bx += window;
        }
        by += window;
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den * 255.0 * 255.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut state = seed.wrapping_mul(0x2545F4914F6CDD1D) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        GrayImage::from_vec(h, w, (0..h * w).map(|_| next()).collect()).unwrap()
    }

    #[test]
    fn ncc_self_and_affine_rescale() {
        let x = noise(5, 5, 1);
        assert!((ncc(&x, &x).unwrap() - 1.0).abs() <= 1e-12);
        let pos = x.map(|v| 2.0 * v + 0.1);
        assert!((ncc(&x, &pos).unwrap() - 1.0).abs() <= 1e-12);
        let neg = x.map(|v| -0.5 * v + 0.3);
        assert!((ncc(&x, &neg).unwrap() + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ncc_rejects_constant_input() {
        let c = GrayImage::constant(4, 4, 0.5);
        let x = noise(4, 4, 2);
        assert!(matches!(ncc(&c, &x), Err(Error::ZeroVariance(_))));
        assert!(matches!(ncc(&c, &c), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn mncc_equals_ncc_with_full_mask() {
        let x = noise(6, 6, 3);
        let y = noise(6, 6, 4);
        let full = ReconMask::ones(6, 6);
        assert!((mncc(&x, &y, &full).unwrap() - ncc(&x, &y).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn mncc_constant_masked_region_errors() {
        let mut x = GrayImage::constant(4, 4, 0.5);
        // Variation only outside the mask.
        x.set(3, 3, 0.9);
        let y = noise(4, 4, 5);
        let mut bits = vec![1u8; 16];
        bits[15] = 0;
        let mask = ReconMask::from_bits(4, 4, bits).unwrap();
        assert!(matches!(mncc(&x, &y, &mask), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn mncc_ignores_unmasked_pixels() {
        let x = noise(4, 4, 6);
        let y = noise(4, 4, 7);
        let mut bits = vec![1u8; 16];
        bits[0] = 0;
        bits[9] = 0;
        let mask = ReconMask::from_bits(4, 4, bits).unwrap();
        let before = mncc(&x, &y, &mask).unwrap();
        let mut y2 = y.clone();
        y2.data_mut()[0] = 0.999;
        y2.data_mut()[9] = 0.001;
        let after = mncc(&x, &y2, &mask).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn mse_basics() {
        let x = noise(3, 3, 8);
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        let zero = GrayImage::constant(3, 3, 0.0);
        let one = GrayImage::constant(3, 3, 1.0);
        assert_eq!(mse(&zero, &one).unwrap(), 1.0);
    }

    #[test]
    fn mmse_matches_mse_on_full_mask() {
        let x = noise(4, 4, 9);
        let y = noise(4, 4, 10);
        let full = ReconMask::ones(4, 4);
        assert_eq!(mmse(&x, &y, &full).unwrap(), mse(&x, &y).unwrap());
    }

    #[test]
    fn edge_intensity_zero_for_constant_and_grows_with_edges() {
        let c = GrayImage::constant(8, 8, 0.4);
        assert_eq!(edge_intensity(&c), 0.0);
        let mut stepped = c.clone();
        for y in 0..8 {
            for x in 4..8 {
                stepped.set(y, x, 0.9);
            }
        }
        assert!(edge_intensity(&stepped) > 0.0);
    }

    #[test]
    fn spatial_frequency_checkerboard() {
        let img = GrayImage::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let sf = spatial_frequency(&img).unwrap();
        assert!((sf - std::f64::consts::SQRT_2 * 255.0).abs() < 1e-9);
        assert_eq!(
            spatial_frequency(&GrayImage::constant(3, 3, 0.2)).unwrap(),
            0.0
        );
        assert!(spatial_frequency(&GrayImage::constant(1, 5, 0.2)).is_err());
    }

    #[test]
    fn cross_entropy_identical_triple_is_zero() {
        let x = noise(8, 8, 11);
        assert!(cross_entropy(&x, &x, &x).unwrap().abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_nonnegative() {
        for seed in 0..5 {
            let v = noise(8, 8, 20 + seed);
            let r = noise(8, 8, 40 + seed);
            let f = noise(8, 8, 60 + seed);
            assert!(cross_entropy(&v, &r, &f).unwrap() >= 0.0);
        }
    }

    #[test]
    fn kl_hand_example() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        let d = kl_divergence_bits(&p, &q);
        let expected = 0.5 * 2.0f64.log2() + 0.5 * (2.0f64 / 3.0).log2();
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 0.2075).abs() < 1e-4);
    }

    #[test]
    fn fmi_identical_images_score_one() {
        let x = noise(16, 16, 12);
        assert!((fmi_w(&x, &x, &x).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fmi_degenerate_features_score_zero() {
        let c = GrayImage::constant(8, 8, 0.5);
        let x = noise(8, 8, 13);
        assert_eq!(fmi_w(&x, &x, &c).unwrap(), 0.0);
    }

    #[test]
    fn qcv_zero_for_identical_triple_and_symmetric() {
        let x = noise(16, 16, 14);
        assert_eq!(q_cv(&x, &x, &x, 8).unwrap(), 0.0);
        let v = noise(16, 16, 15);
        let r = noise(16, 16, 16);
        let f = noise(16, 16, 17);
        let a = q_cv(&v, &r, &f, 8).unwrap();
        let b = q_cv(&r, &v, &f, 8).unwrap();
        assert!(a >= 0.0);
        assert!((a - b).abs() < 1e-9);
        assert!(q_cv(&v, &r, &f, 3).is_err());
    }

    #[test]
    fn aggregate_mean_std() {
        let mk = |v: f64| {
            let mut r = MetricsReport::default();
            r.values.insert("ncc".into(), v);
            r
        };
        let agg = aggregate_reports(&[mk(0.5), mk(0.7), mk(0.9)]);
        let a = &agg["ncc"];
        assert!((a.mean - 0.7).abs() < 1e-12);
        assert!((a.std - 0.2).abs() < 1e-12);
        assert_eq!(a.count, 3);
    }
}
