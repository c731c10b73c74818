//! Brute-force reference implementations and synthetic data generators for
//! the test suites (feature `testkit`). Everything here recomputes results
//! from first principles, independent of the production code paths it
//! checks: direct nested-loop convolutions, per-window statistics,
//! homogeneous 3x3 matrix algebra, and forward point mapping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{AffineParams, DeformationField};
use crate::mask::ReconMask;
use crate::raster::GrayImage;

// ---------------------------------------------------------------------------
// Synthetic images
// ---------------------------------------------------------------------------

/// Uniform noise image in [0, 1].
pub fn noise_image(h: usize, w: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_vec(h, w, (0..h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Smooth blob-structured image normalized to span [0, 1]: Gaussian-filtered
/// noise, the stand-in for natural-image content in recovery harnesses.
pub fn smooth_image(h: usize, w: usize, seed: u64) -> GrayImage {
    let noise = noise_image(h, w, seed);
    let smooth = crate::raster::gaussian_filter(&noise, 4.0, 8).unwrap();
    let min = smooth.data().iter().cloned().fold(f64::MAX, f64::min);
    let max = smooth.data().iter().cloned().fold(f64::MIN, f64::max);
    smooth.map(|v| (v - min) / (max - min))
}

// ---------------------------------------------------------------------------
// Convolution oracles
// ---------------------------------------------------------------------------

/// Direct 2D correlation with an arbitrary odd kernel and replicate padding.
pub fn conv2d_replicate_oracle(img: &GrayImage, kernel: &[Vec<f64>]) -> GrayImage {
    let kh = kernel.len();
    let kw = kernel[0].len();
    assert!(kh % 2 == 1 && kw % 2 == 1);
    let (h, w) = img.dims();
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ky, row) in kernel.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    let yy = (y as isize + ky as isize - (kh / 2) as isize)
                        .clamp(0, h as isize - 1) as usize;
                    let xx = (x as isize + kx as isize - (kw / 2) as isize)
                        .clamp(0, w as isize - 1) as usize;
                    acc += k * img.get(yy, xx);
                }
            }
            out.set(y, x, acc);
        }
    }
    out
}

pub fn laplacian_kernel() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 1.0, 0.0],
        vec![1.0, -4.0, 1.0],
        vec![0.0, 1.0, 0.0],
    ]
}

pub fn sobel_x_kernel() -> Vec<Vec<f64>> {
    vec![
        vec![-1.0, 0.0, 1.0],
        vec![-2.0, 0.0, 2.0],
        vec![-1.0, 0.0, 1.0],
    ]
}

pub fn sobel_y_kernel() -> Vec<Vec<f64>> {
    vec![
        vec![-1.0, -2.0, -1.0],
        vec![0.0, 0.0, 0.0],
        vec![1.0, 2.0, 1.0],
    ]
}

/// Sobel magnitude recomputed from the two direct correlations.
pub fn sobel_magnitude_oracle(img: &GrayImage) -> GrayImage {
    let gx = conv2d_replicate_oracle(img, &sobel_x_kernel());
    let gy = conv2d_replicate_oracle(img, &sobel_y_kernel());
    let mut out = GrayImage::new(img.height(), img.width());
    for i in 0..out.len() {
        out.data_mut()[i] = (gx.data()[i] * gx.data()[i] + gy.data()[i] * gy.data()[i]).sqrt();
    }
    out
}

/// Unit-sum 2D Gaussian kernel evaluated directly from the density formula.
pub fn gaussian_kernel_oracle(sigma: f64, k: usize) -> Vec<Vec<f64>> {
    let n = 2 * k + 1;
    let mut kernel = vec![vec![0.0; n]; n];
    let mut sum = 0.0;
    for (y, row) in kernel.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            let dy = y as f64 - k as f64;
            let dx = x as f64 - k as f64;
            *v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            sum += *v;
        }
    }
    for row in kernel.iter_mut() {
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    kernel
}

// ---------------------------------------------------------------------------
// SSIM oracle
// ---------------------------------------------------------------------------

/// Mean SSIM recomputed per pixel from explicit 11x11 windowed statistics
/// with clamped coordinates and Gaussian weights (sigma 1.5).
pub fn ssim_oracle(a: &GrayImage, b: &GrayImage) -> f64 {
    assert_eq!(a.dims(), b.dims());
    let k = 5isize;
    let sigma = 1.5f64;
    let mut w1d = Vec::new();
    for o in -k..=k {
        w1d.push((-((o * o) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let s: f64 = w1d.iter().sum();
    for v in w1d.iter_mut() {
        *v /= s;
    }

    let (h, w) = a.dims();
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;
    let mut total = 0.0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut mu_a, mut mu_b) = (0.0, 0.0);
            let mut weights_vals = Vec::with_capacity(121);
            for dy in -k..=k {
                for dx in -k..=k {
                    let weight = w1d[(dy + k) as usize] * w1d[(dx + k) as usize];
                    let yy = (y + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                    let (va, vb) = (a.get(yy, xx), b.get(yy, xx));
                    mu_a += weight * va;
                    mu_b += weight * vb;
                    weights_vals.push((weight, va, vb));
                }
            }
            let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
            for (weight, va, vb) in weights_vals {
                var_a += weight * (va - mu_a) * (va - mu_a);
                var_b += weight * (vb - mu_b) * (vb - mu_b);
                cov += weight * (va - mu_a) * (vb - mu_b);
            }
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    total / (h * w) as f64
}

// ---------------------------------------------------------------------------
// Homogeneous-matrix affine oracle
// ---------------------------------------------------------------------------

/// Row-major 3x3 homogeneous matrix.
pub type Mat3 = [[f64; 3]; 3];

pub fn affine_to_mat3(t: &AffineParams) -> Mat3 {
    [
        [t.a, t.b, t.dx],
        [t.c, t.d, t.dy],
        [0.0, 0.0, 1.0],
    ]
}

pub fn mat3_mul(p: &Mat3, q: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| p[i][k] * q[k][j]).sum();
        }
    }
    out
}

pub fn mat3_inverse_affine(m: &Mat3) -> Mat3 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let ia = m[1][1] / det;
    let ib = -m[0][1] / det;
    let ic = -m[1][0] / det;
    let id = m[0][0] / det;
    [
        [ia, ib, -(ia * m[0][2] + ib * m[1][2])],
        [ic, id, -(ic * m[0][2] + id * m[1][2])],
        [0.0, 0.0, 1.0],
    ]
}

/// Map a 2D point through a homogeneous affine matrix.
pub fn mat3_apply(m: &Mat3, x: f64, y: f64) -> (f64, f64) {
    (
        m[0][0] * x + m[0][1] * y + m[0][2],
        m[1][0] * x + m[1][1] * y + m[1][2],
    )
}

// ---------------------------------------------------------------------------
// Warp oracle
// ---------------------------------------------------------------------------

/// Independent bilinear lookup with zero-filled out-of-bounds taps.
pub fn bilinear_oracle(img: &GrayImage, x: f64, y: f64) -> f64 {
    let (h, w) = img.dims();
    let x0 = x.floor() as isize;
    let y0 = y.floor() as isize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |yy: isize, xx: isize| -> f64 {
        if yy >= 0 && (yy as usize) < h && xx >= 0 && (xx as usize) < w {
            img.get(yy as usize, xx as usize)
        } else {
            0.0
        }
    };
    at(y0, x0) * (1.0 - fx) * (1.0 - fy)
        + at(y0, x0 + 1) * fx * (1.0 - fy)
        + at(y0 + 1, x0) * (1.0 - fx) * fy
        + at(y0 + 1, x0 + 1) * fx * fy
}

/// Dense affine warp recomputed per pixel from the normalized-coordinate
/// mapping written out longhand.
pub fn apply_affine_oracle(img: &GrayImage, theta: &AffineParams) -> GrayImage {
    let (h, w) = img.dims();
    let mut out = GrayImage::new(h, w);
    let to_norm = |v: f64, n: usize| 2.0 * v / (n - 1) as f64 - 1.0;
    let to_px = |v: f64, n: usize| (v + 1.0) * (n - 1) as f64 / 2.0;
    for y in 0..h {
        for x in 0..w {
            let xn = to_norm(x as f64, w);
            let yn = to_norm(y as f64, h);
            let un = theta.a * xn + theta.b * yn + theta.dx;
            let vn = theta.c * xn + theta.d * yn + theta.dy;
            out.set(y, x, bilinear_oracle(img, to_px(un, w), to_px(vn, h)));
        }
    }
    out
}

/// Dense deformation warp recomputed per pixel.
pub fn apply_deformation_oracle(img: &GrayImage, phi: &DeformationField) -> GrayImage {
    let (h, w) = img.dims();
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            out.set(
                y,
                x,
                bilinear_oracle(img, x as f64 + phi.dx()[i], y as f64 + phi.dy()[i]),
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Mask coverage oracle
// ---------------------------------------------------------------------------

/// Coverage oracle for the reconstructible mask: propagates boolean support
/// through the same four point-mapped stages the mask round trip performs
/// (forward: affine then elastic; back: negated field then inverse affine),
/// marking a pixel covered when any nonzero-weight tap of its sample
/// location is covered. This is the set-valued positivity calculus of the
/// round trip, computed without any interpolation arithmetic or
/// thresholding, and validates the `> 0` mask rule.
pub fn coverage_mask_oracle(
    size: (usize, usize),
    theta: &AffineParams,
    phi: &DeformationField,
) -> ReconMask {
    let (h, w) = size;
    let to_norm = |v: f64, n: usize| 2.0 * v / (n - 1) as f64 - 1.0;
    let to_px = |v: f64, n: usize| (v + 1.0) * (n - 1) as f64 / 2.0;
    let map_px = |m: &Mat3, x: f64, y: f64| -> (f64, f64) {
        let (un, vn) = mat3_apply(m, to_norm(x, w), to_norm(y, h));
        (to_px(un, w), to_px(vn, h))
    };

    // True iff any bilinear tap of (x, y) with nonzero weight lands on a
    // supported in-bounds pixel.
    let sample_support = |support: &[bool], x: f64, y: f64| -> bool {
        let x0 = x.floor();
        let y0 = y.floor();
        let xs: &[isize] = if x - x0 > 0.0 {
            &[0, 1]
        } else {
            &[0]
        };
        let ys: &[isize] = if y - y0 > 0.0 { &[0, 1] } else { &[0] };
        for &dy in ys {
            for &dx in xs {
                let (yy, xx) = (y0 as isize + dy, x0 as isize + dx);
                if yy >= 0
                    && (yy as usize) < h
                    && xx >= 0
                    && (xx as usize) < w
                    && support[yy as usize * w + xx as usize]
                {
                    return true;
                }
            }
        }
        false
    };

    let fwd = affine_to_mat3(theta);
    let back = mat3_inverse_affine(&fwd);
    let all = vec![true; h * w];

    let mut stage = vec![false; h * w];
    // Affine forward: ones sampled at theta(p).
    for y in 0..h {
        for x in 0..w {
            let (u, v) = map_px(&fwd, x as f64, y as f64);
            stage[y * w + x] = sample_support(&all, u, v);
        }
    }
    // Elastic forward: sampled at p + phi(p).
    let mut next = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            next[i] = sample_support(&stage, x as f64 + phi.dx()[i], y as f64 + phi.dy()[i]);
        }
    }
    // Elastic backward: sampled at p - phi(p).
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            stage[i] = sample_support(&next, x as f64 - phi.dx()[i], y as f64 - phi.dy()[i]);
        }
    }
    // Affine backward: sampled at theta^-1(p).
    let mut bits = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = map_px(&back, x as f64, y as f64);
            bits[y * w + x] = u8::from(sample_support(&stage, u, v));
        }
    }
    ReconMask::from_bits(h, w, bits).unwrap()
}

// ---------------------------------------------------------------------------
// Metric oracles (plain nested-loop sums)
// ---------------------------------------------------------------------------

pub fn ncc_oracle(x: &GrayImage, y: &GrayImage, mask: Option<&ReconMask>) -> f64 {
    let keep: Vec<usize> = (0..x.len())
        .filter(|&i| mask.map_or(true, |m| m.bits()[i] == 1))
        .collect();
    let n = keep.len() as f64;
    let mx = keep.iter().map(|&i| x.data()[i]).sum::<f64>() / n;
    let my = keep.iter().map(|&i| y.data()[i]).sum::<f64>() / n;
    let num: f64 = keep
        .iter()
        .map(|&i| (x.data()[i] - mx) * (y.data()[i] - my))
        .sum();
    let dx: f64 = keep.iter().map(|&i| (x.data()[i] - mx).powi(2)).sum();
    let dy: f64 = keep.iter().map(|&i| (y.data()[i] - my).powi(2)).sum();
    num / (dx.sqrt() * dy.sqrt())
}

pub fn mse_oracle(x: &GrayImage, y: &GrayImage, mask: Option<&ReconMask>) -> f64 {
    let keep: Vec<usize> = (0..x.len())
        .filter(|&i| mask.map_or(true, |m| m.bits()[i] == 1))
        .collect();
    keep.iter()
        .map(|&i| (x.data()[i] - y.data()[i]).powi(2))
        .sum::<f64>()
        / keep.len() as f64
}

pub fn edge_intensity_oracle(f: &GrayImage) -> f64 {
    let mag = sobel_magnitude_oracle(f);
    mag.data().iter().sum::<f64>() / mag.len() as f64 * 255.0
}

pub fn spatial_frequency_oracle(f: &GrayImage) -> f64 {
    let (h, w) = f.dims();
    let mut rf = 0.0;
    for y in 0..h {
        for x in 1..w {
            rf += (f.get(y, x) - f.get(y, x - 1)).powi(2);
        }
    }
    let mut cf = 0.0;
    for y in 1..h {
        for x in 0..w {
            cf += (f.get(y, x) - f.get(y - 1, x)).powi(2);
        }
    }
    (rf / (h * (w - 1)) as f64 + cf / ((h - 1) * w) as f64).sqrt() * 255.0
}

pub fn cross_entropy_oracle(v: &GrayImage, r: &GrayImage, f: &GrayImage) -> f64 {
    let hist = |img: &GrayImage| -> Vec<f64> {
        let mut h = vec![0.0; 256];
        for &p in img.data() {
            h[((p.clamp(0.0, 1.0) * 256.0) as usize).min(255)] += 1.0;
        }
        h.iter().map(|c| c / img.len() as f64).collect()
    };
    let kl = |p: &[f64], q: &[f64]| -> f64 {
        p.iter()
            .zip(q)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &qi)| pi * (pi / qi.max(1e-12)).log2())
            .sum()
    };
    let hf = hist(f);
    (kl(&hist(v), &hf) + kl(&hist(r), &hf)) / 2.0
}

pub fn fmi_w_oracle(v: &GrayImage, r: &GrayImage, f: &GrayImage) -> f64 {
    let bins = |img: &GrayImage| -> Option<Vec<usize>> {
        let feat = sobel_magnitude_oracle(img);
        let max = feat.data().iter().cloned().fold(f64::MIN, f64::max);
        let min = feat.data().iter().cloned().fold(f64::MAX, f64::min);
        if max - min <= 0.0 {
            return None;
        }
        Some(
            feat.data()
                .iter()
                .map(|&g| ((((g - min) / (max - min)) * 64.0) as usize).min(63))
                .collect(),
        )
    };
    let entropy = |p: &[f64]| -> f64 {
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
    };
    let nmi = |a: &[usize], b: &[usize]| -> f64 {
        let n = a.len() as f64;
        let mut joint = vec![0.0; 64 * 64];
        let mut pa = vec![0.0; 64];
        let mut pb = vec![0.0; 64];
        for (&i, &j) in a.iter().zip(b) {
            joint[i * 64 + j] += 1.0 / n;
            pa[i] += 1.0 / n;
            pb[j] += 1.0 / n;
        }
        let (ha, hb) = (entropy(&pa), entropy(&pb));
        if ha + hb == 0.0 {
            return 0.0;
        }
        2.0 * (ha + hb - entropy(&joint)) / (ha + hb)
    };
    let bf = match bins(f) {
        Some(b) => b,
        None => return 0.0,
    };
    let score = |src: &GrayImage| bins(src).map_or(0.0, |bs| nmi(&bs, &bf));
    (score(v) + score(r)) / 2.0
}

/// Single-block Qcv evaluation (image no larger than the window), written
/// out directly from the definition.
pub fn q_cv_single_block_oracle(v: &GrayImage, r: &GrayImage, f: &GrayImage) -> f64 {
    let sal_v = sobel_magnitude_oracle(v);
    let sal_r = sobel_magnitude_oracle(r);
    let lam = |s: &GrayImage| s.data().iter().map(|&x| x * x).sum::<f64>();
    let gk = gaussian_kernel_oracle(2.0, 4);
    let dv = conv2d_replicate_oracle(&v.zip_map(f, |a, b| a - b).unwrap(), &gk);
    let dr = conv2d_replicate_oracle(&r.zip_map(f, |a, b| a - b).unwrap(), &gk);
    let msd = |d: &GrayImage| d.data().iter().map(|&x| x * x).sum::<f64>() / d.len() as f64;
    let (lv, lr) = (lam(&sal_v), lam(&sal_r));
    if lv + lr == 0.0 {
        return 0.0;
    }
    (lv * msd(&dv) + lr * msd(&dr)) / (lv + lr) * 255.0 * 255.0
}

/// Pointwise fusion-target evaluation straight from the selection rule.
pub fn target_gradient_oracle(v: &GrayImage, r: &GrayImage, gamma: f64) -> GrayImage {
    let lv = conv2d_replicate_oracle(v, &laplacian_kernel());
    let lr = conv2d_replicate_oracle(r, &laplacian_kernel());
    let mut out = GrayImage::new(v.height(), v.width());
    for i in 0..out.len() {
        let (gv, gr) = (lv.data()[i], lr.data()[i]);
        let w = if gv.abs() > gr.abs() {
            1.0
        } else if gv.abs() == gr.abs() {
            1.0 // ties go to the first source
        } else {
            0.0
        };
        let enhance = |g: f64| if g == 0.0 { 0.0 } else { g.signum() * g.abs().powf(gamma) };
        out.data_mut()[i] = w * enhance(gv) + (1.0 - w) * enhance(gr);
    }
    out
}

/// Recovered draw parameters from a generated affine (rotation-shear-scale
/// decomposition plus translation extraction).
pub struct AffineDecomposition {
    pub rotation_deg: f64,
    pub shear_deg: f64,
    pub scale: f64,
    pub translate_px_x: f64,
    pub translate_px_y: f64,
}

/// Decompose `theta = R . Sh . Sc . T`: the first linear column carries
/// rotation and scale, the column dot product carries shear, and the
/// translation is pulled back through the linear part.
pub fn decompose_affine(theta: &AffineParams, size: (usize, usize)) -> AffineDecomposition {
    let col0 = (theta.a, theta.c);
    let scale = (col0.0 * col0.0 + col0.1 * col0.1).sqrt();
    let rotation = col0.1.atan2(col0.0);
    let dot = theta.a * theta.b + theta.c * theta.d;
    let shear = (dot / (scale * scale)).atan();
    // theta translation = A * t_norm, with A the linear part.
    let det = theta.a * theta.d - theta.b * theta.c;
    let tnx = (theta.d * theta.dx - theta.b * theta.dy) / det;
    let tny = (-theta.c * theta.dx + theta.a * theta.dy) / det;
    let (h, w) = size;
    AffineDecomposition {
        rotation_deg: rotation.to_degrees(),
        shear_deg: shear.to_degrees(),
        scale,
        translate_px_x: tnx * (w - 1) as f64 / 2.0,
        translate_px_y: tny * (h - 1) as f64 / 2.0,
    }
}
