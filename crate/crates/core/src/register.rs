//! Coarse affine and fine deformable registration by direct optimization
//! of the masked correlation objectives.
//!
//! The affine stage runs a derivative-free simplex search over the six
//! parameters, coarse-to-fine over an area-averaged pyramid (the normalized
//! parameterization makes one theta valid at every level). The deformable
//! stage runs line-searched gradient descent on the displacement field with
//! a Gaussian-smoothed update, a diffusion-like regularization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionConfig};
use crate::geometry::{
    apply_affine, apply_deformation, invert_affine, invert_deformation, AffineParams,
    DeformationField,
};
use crate::mask::{compute_mask, ReconMask};
use crate::metrics::mncc;
use crate::raster::{gaussian_taps_1d, laplacian, separable_replicate, GrayImage};

/// Which mask the objectives are evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// No masking: every pixel participates.
    #[default]
    Ones,
    /// Caller supplies a mask computed from known ground-truth transforms.
    GroundTruth,
    /// Recompute the mask from the current transform estimates each stage.
    Estimated,
}

/// Correlation objective flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// Maximize MNCC (same-polarity modalities).
    #[default]
    Signed,
    /// Maximize MNCC^2, so anticorrelated structure registers too.
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegisterConfig {
    /// Pyramid depth for the affine stage (factor-2 downsampling).
    pub pyramid_levels: usize,
    /// Weight of the correlation term when the fusion-guidance term is on.
    pub epsilon: f64,
    /// Add the fusion-guidance loss to the deformable objective. Each
    /// evaluation costs a fusion solve, so this is a refinement pass.
    pub use_mg: bool,
    /// Simplex evaluation budget per pyramid level.
    pub affine_max_evals: usize,
    pub deform_iters: usize,
    /// Largest per-pixel displacement change per accepted iteration.
    pub deform_step: f64,
    /// Sigma of the Gaussian applied to each field update.
    pub deform_smooth_sigma: f64,
    pub mask_mode: MaskMode,
    pub correlation_mode: CorrelationMode,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        RegisterConfig {
            pyramid_levels: 3,
            epsilon: 1.0,
            use_mg: false,
            affine_max_evals: 2000,
            deform_iters: 200,
            deform_step: 0.25,
            deform_smooth_sigma: 2.0,
            mask_mode: MaskMode::Ones,
            correlation_mode: CorrelationMode::Signed,
        }
    }
}

impl RegisterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidParameter("pyramid_levels must be >= 1".into()));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidParameter("epsilon must be >= 0".into()));
        }
        if self.affine_max_evals < 1 {
            return Err(Error::InvalidParameter("affine_max_evals must be >= 1".into()));
        }
        if !(self.deform_step > 0.0) {
            return Err(Error::InvalidParameter("deform_step must be positive".into()));
        }
        if !(self.deform_smooth_sigma > 0.0) {
            return Err(Error::InvalidParameter(
                "deform_smooth_sigma must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub theta_hat: AffineParams,
    pub phi_hat: DeformationField,
    /// `apply_deformation(apply_affine(moving, theta_hat), phi_hat)`.
    pub registered: GrayImage,
    /// Best objective after each simplex iteration at the finest level.
    pub affine_trace: Vec<f64>,
    /// Objective after each accepted deformable step.
    pub deform_trace: Vec<f64>,
    /// Signed masked correlation of the registered result.
    pub final_mncc: f64,
}

/// Negated masked correlation, the coarse-registration loss.
pub fn loss_mncc(reference: &GrayImage, warped: &GrayImage, mask: &ReconMask) -> Result<f64> {
    Ok(-mncc(reference, warped, mask)?)
}

/// Fusion-guidance loss: masked RMS distance between the Laplacians of the
/// fused (reference, warped) and fused (reference, true-aligned) images.
/// The fusion operator is the energy-minimizing solver.
pub fn loss_mg(
    x: &GrayImage,
    y_warped: &GrayImage,
    y_true: &GrayImage,
    mask: &ReconMask,
    gamma: f64,
) -> Result<f64> {
    let cfg = FusionConfig {
        gamma,
        ..FusionConfig::default()
    };
    let fused_true = laplacian(&fuse(x, y_true, &cfg)?.fused);
    masked_lap_rms(x, y_warped, &fused_true, mask, &cfg)
}

fn masked_lap_rms(
    x: &GrayImage,
    y_warped: &GrayImage,
    fused_true_lap: &GrayImage,
    mask: &ReconMask,
    cfg: &FusionConfig,
) -> Result<f64> {
    if x.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            context: "loss_mg",
            a: x.dims(),
            b: mask.dims(),
        });
    }
    let fused_warped = laplacian(&fuse(x, y_warped, cfg)?.fused);
    let n = x.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let d = (fused_warped.data()[i] - fused_true_lap.data()[i])
                * f64::from(mask.bits()[i]);
            d * d
        })
        .sum();
    Ok((sum / n as f64).sqrt())
}

/// Mean distance, in pixels, between where two affines map the four image
/// corners. Used to score recovered transforms against ground truth.
pub fn mean_corner_epe(a: &AffineParams, b: &AffineParams, size: (usize, usize)) -> f64 {
    let (h, w) = size;
    let corners = [
        (0.0, 0.0),
        ((w - 1) as f64, 0.0),
        (0.0, (h - 1) as f64),
        ((w - 1) as f64, (h - 1) as f64),
    ];
    corners
        .iter()
        .map(|&(x, y)| {
            let (ax, ay) = a.map_pixel(x, y, size);
            let (bx, by) = b.map_pixel(x, y, size);
            (ax - bx).hypot(ay - by)
        })
        .sum::<f64>()
        / 4.0
}

// ---------------------------------------------------------------------------
// Pyramid construction
// ---------------------------------------------------------------------------

/// 2x area-average downsampling; trailing odd row/column is dropped.
fn downsample_half(img: &GrayImage) -> GrayImage {
    let (h, w) = img.dims();
    let (nh, nw) = (h / 2, w / 2);
    let mut out = GrayImage::new(nh, nw);
    for y in 0..nh {
        for x in 0..nw {
            let s = img.get(2 * y, 2 * x)
                + img.get(2 * y, 2 * x + 1)
                + img.get(2 * y + 1, 2 * x)
                + img.get(2 * y + 1, 2 * x + 1);
            out.set(y, x, s / 4.0);
        }
    }
    out
}

/// Mask downsampling by strict AND of each 2x2 block: a coarse pixel is
/// reconstructible only if all its children are.
fn downsample_mask_half(mask: &ReconMask) -> ReconMask {
    let (h, w) = mask.dims();
    let (nh, nw) = (h / 2, w / 2);
    let mut bits = vec![0u8; nh * nw];
    for y in 0..nh {
        for (x, bit) in bits[y * nw..(y + 1) * nw].iter_mut().enumerate() {
            let all = mask.is_set(2 * y, 2 * x)
                && mask.is_set(2 * y, 2 * x + 1)
                && mask.is_set(2 * y + 1, 2 * x)
                && mask.is_set(2 * y + 1, 2 * x + 1);
            *bit = u8::from(all);
        }
    }
    ReconMask::from_bits(nh, nw, bits).expect("downsampled mask shape")
}

const MIN_PYRAMID_DIM: usize = 16;

// ---------------------------------------------------------------------------
// Simplex search
// ---------------------------------------------------------------------------

const NM_DIM: usize = 6;
const NM_REFLECT: f64 = 1.0;
const NM_EXPAND: f64 = 2.0;
const NM_CONTRACT: f64 = 0.5;
const NM_SHRINK: f64 = 0.5;

struct SimplexOutcome {
    best: [f64; NM_DIM],
    best_loss: f64,
    /// Best loss after each simplex iteration.
    trace: Vec<f64>,
}

/// Nelder-Mead over the six affine parameters with periodic restarts around
/// the incumbent. Infeasible candidates must evaluate to +inf.
fn nelder_mead(
    mut objective: impl FnMut(&[f64; NM_DIM]) -> f64,
    start: [f64; NM_DIM],
    initial_radius: f64,
    max_evals: usize,
) -> SimplexOutcome {
    let mut evals = 0usize;
    let mut eval = |p: &[f64; NM_DIM], evals: &mut usize| -> f64 {
        *evals += 1;
        objective(p)
    };

    let mut global_best = start;
    let mut global_best_loss = eval(&start, &mut evals);
    let mut trace = vec![global_best_loss];
    let mut radius = initial_radius;

    while evals < max_evals {
        // Fresh simplex around the incumbent.
        let mut vertices: Vec<([f64; NM_DIM], f64)> = Vec::with_capacity(NM_DIM + 1);
        vertices.push((global_best, global_best_loss));
        for i in 0..NM_DIM {
            if evals >= max_evals {
                break;
            }
            let mut p = global_best;
            p[i] += radius;
            let l = eval(&p, &mut evals);
            vertices.push((p, l));
        }
        if vertices.len() < NM_DIM + 1 {
            break;
        }

        loop {
            if evals >= max_evals {
                break;
            }
            vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
            if vertices[0].1 < global_best_loss {
                global_best = vertices[0].0;
                global_best_loss = vertices[0].1;
            }
            trace.push(global_best_loss);

            let spread = vertices[NM_DIM].1 - vertices[0].1;
            if spread.abs() < 1e-12 * (vertices[0].1.abs() + 1e-12) || !spread.is_finite() {
                break;
            }

            let mut centroid = [0.0; NM_DIM];
            for v in vertices.iter().take(NM_DIM) {
                for (c, &x) in centroid.iter_mut().zip(&v.0) {
                    *c += x;
                }
            }
            for c in centroid.iter_mut() {
                *c /= NM_DIM as f64;
            }
            let worst = vertices[NM_DIM];

            let walk = |t: f64| {
                let mut p = [0.0; NM_DIM];
                for i in 0..NM_DIM {
                    p[i] = centroid[i] + t * (centroid[i] - worst.0[i]);
                }
                p
            };

            let reflected = walk(NM_REFLECT);
            let fr = eval(&reflected, &mut evals);
            if fr < vertices[0].1 {
                let expanded = walk(NM_EXPAND);
                let fe = eval(&expanded, &mut evals);
                vertices[NM_DIM] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < vertices[NM_DIM - 1].1 {
                vertices[NM_DIM] = (reflected, fr);
                continue;
            }
            // Contract toward the better of the worst vertex and reflection.
            let contracted = if fr < worst.1 {
                walk(NM_CONTRACT)
            } else {
                walk(-NM_CONTRACT)
            };
            let fc = eval(&contracted, &mut evals);
            if fc < worst.1.min(fr) {
                vertices[NM_DIM] = (contracted, fc);
                continue;
            }
            // Shrink toward the best vertex.
            let anchor = vertices[0].0;
            for v in vertices.iter_mut().skip(1) {
                for (x, &a) in v.0.iter_mut().zip(&anchor) {
                    *x = a + NM_SHRINK * (*x - a);
                }
                v.1 = eval(&v.0, &mut evals);
                if evals >= max_evals {
                    break;
                }
            }
        }
        radius *= 0.25;
        if radius < 1e-6 {
            break;
        }
    }

    SimplexOutcome {
        best: global_best,
        best_loss: global_best_loss,
        trace,
    }
}

fn theta_from(p: &[f64; NM_DIM]) -> AffineParams {
    AffineParams {
        a: p[0],
        b: p[1],
        c: p[2],
        d: p[3],
        dx: p[4],
        dy: p[5],
    }
}

fn theta_to(theta: &AffineParams) -> [f64; NM_DIM] {
    [theta.a, theta.b, theta.c, theta.d, theta.dx, theta.dy]
}

fn correlation_loss(value: f64, mode: CorrelationMode) -> f64 {
    match mode {
        CorrelationMode::Signed => -value,
        CorrelationMode::Magnitude => -(value * value),
    }
}

const NM_INITIAL_RADIUS: f64 = 0.1;

/// Recover the affine transform aligning `moving` to `reference` by simplex
/// minimization of the masked correlation loss, coarse-to-fine. `mask` is
/// evaluated at full resolution and AND-downsampled per level; `None` means
/// all ones.
pub fn register_affine(
    reference: &GrayImage,
    moving: &GrayImage,
    cfg: &RegisterConfig,
    mask: Option<&ReconMask>,
) -> Result<(AffineParams, Vec<f64>)> {
    cfg.validate()?;
    if reference.dims() != moving.dims() {
        return Err(Error::DimensionMismatch {
            context: "register_affine",
            a: reference.dims(),
            b: moving.dims(),
        });
    }

    // Build pyramids; level 0 is full resolution.
    let full_mask = mask.cloned().unwrap_or_else(|| {
        ReconMask::ones(reference.height(), reference.width())
    });
    if full_mask.dims() != reference.dims() {
        return Err(Error::DimensionMismatch {
            context: "register_affine mask",
            a: reference.dims(),
            b: full_mask.dims(),
        });
    }
    let mut refs = vec![reference.clone()];
    let mut movs = vec![moving.clone()];
    let mut masks = vec![full_mask];
    for _ in 1..cfg.pyramid_levels {
        let prev = refs.last().unwrap();
        if prev.height() / 2 < MIN_PYRAMID_DIM || prev.width() / 2 < MIN_PYRAMID_DIM {
            break;
        }
        refs.push(downsample_half(prev));
        movs.push(downsample_half(movs.last().unwrap()));
        masks.push(downsample_mask_half(masks.last().unwrap()));
    }

    let mut theta = AffineParams::identity();
    let mut finest_trace = Vec::new();
    for level in (0..refs.len()).rev() {
        let (r, m, msk) = (&refs[level], &movs[level], &masks[level]);
        // The search is meaningless on a flat reference; surface it early.
        mncc(r, r, msk).map_err(|e| match e {
            Error::ZeroVariance(_) => Error::ZeroVariance("reference"),
            other => other,
        })?;

        let objective = |p: &[f64; NM_DIM]| -> f64 {
            let cand = theta_from(p);
            if cand.validate().is_err() {
                return f64::INFINITY;
            }
            let warped = match apply_affine(m, &cand) {
                Ok(w) => w,
                Err(_) => return f64::INFINITY,
            };
            match mncc(r, &warped, msk) {
                Ok(v) => correlation_loss(v, cfg.correlation_mode),
                Err(_) => f64::INFINITY,
            }
        };
        let outcome = nelder_mead(
            objective,
            theta_to(&theta),
            NM_INITIAL_RADIUS,
            cfg.affine_max_evals,
        );
        if !outcome.best_loss.is_finite() {
            return Err(Error::ZeroVariance("warped moving image"));
        }
        theta = theta_from(&outcome.best);
        if level == 0 {
            finest_trace = outcome.trace;
        }
    }
    theta.validate()?;
    Ok((theta, finest_trace))
}

/// Gradient of the correlation loss with respect to the warped image, over
/// the masked pixels. Returns `None` when the correlation is degenerate.
fn correlation_grad_wrt_warped(
    reference: &GrayImage,
    warped: &GrayImage,
    mask: &ReconMask,
    mode: CorrelationMode,
) -> Option<(f64, GrayImage)> {
    let n = mask.count_ones();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in 0..reference.len() {
        if mask.bits()[i] == 1 {
            sx += reference.data()[i];
            sy += warped.data()[i];
        }
    }
    let (mx, my) = (sx / nf, sy / nf);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..reference.len() {
        if mask.bits()[i] == 1 {
            let dx = reference.data()[i] - mx;
            let dy = warped.data()[i] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let (ssx, ssy) = (sxx.sqrt(), syy.sqrt());
    let ncc = sxy / (ssx * ssy);
    // d ncc / d y_p = (ref~_p - ncc * (sx/sy) * y~_p) / (sx * sy); the loss
    // gradient then follows the chain rule for the selected mode.
    let outer = match mode {
        CorrelationMode::Signed => -1.0,
        CorrelationMode::Magnitude => -2.0 * ncc,
    };
    let mut grad = GrayImage::new(reference.height(), reference.width());
    for i in 0..reference.len() {
        if mask.bits()[i] == 1 {
            let dxv = reference.data()[i] - mx;
            let dyv = warped.data()[i] - my;
            let d_ncc = (dxv - ncc * (ssx / ssy) * dyv) / (ssx * ssy);
            grad.data_mut()[i] = outer * d_ncc;
        }
    }
    Some((ncc, grad))
}

/// Central-difference spatial gradient images (x and y) with replicate ends.
fn spatial_gradients(img: &GrayImage) -> (GrayImage, GrayImage) {
    let (h, w) = img.dims();
    let mut gx = GrayImage::new(h, w);
    let mut gy = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let xp = img.get_clamped(y as isize, x as isize + 1);
            let xm = img.get_clamped(y as isize, x as isize - 1);
            let yp = img.get_clamped(y as isize + 1, x as isize);
            let ym = img.get_clamped(y as isize - 1, x as isize);
            gx.set(y, x, (xp - xm) / 2.0);
            gy.set(y, x, (yp - ym) / 2.0);
        }
    }
    (gx, gy)
}

const DEFORM_MIN_STEP: f64 = 1e-6;
/// Iteration budget for fusion solves inside the guidance loss; guidance is
/// a refinement signal, so a short solve suffices.
const MG_FUSE_ITERS: usize = 60;

/// Recover a deformation field aligning `moving_affined` to `reference` by
/// smoothed gradient descent on the masked correlation loss (plus the
/// fusion-guidance term when configured, which requires the true aligned
/// moving image `mg_target`).
pub fn register_deformable(
    reference: &GrayImage,
    moving_affined: &GrayImage,
    cfg: &RegisterConfig,
    mask: Option<&ReconMask>,
    mg_target: Option<&GrayImage>,
) -> Result<(DeformationField, Vec<f64>)> {
    cfg.validate()?;
    if reference.dims() != moving_affined.dims() {
        return Err(Error::DimensionMismatch {
            context: "register_deformable",
            a: reference.dims(),
            b: moving_affined.dims(),
        });
    }
    let (h, w) = reference.dims();
    let owned_mask;
    let mask = match mask {
        Some(m) => {
            if m.dims() != reference.dims() {
                return Err(Error::DimensionMismatch {
                    context: "register_deformable mask",
                    a: reference.dims(),
                    b: m.dims(),
                });
            }
            m
        }
        None => {
            owned_mask = ReconMask::ones(h, w);
            &owned_mask
        }
    };

    let mg = match (cfg.use_mg, mg_target) {
        (false, _) => None,
        (true, None) => {
            return Err(Error::InvalidParameter(
                "use_mg requires the true aligned moving image".into(),
            ))
        }
        (true, Some(y_true)) => {
            let fcfg = FusionConfig {
                max_iters: MG_FUSE_ITERS,
                ..FusionConfig::default()
            };
            let fused_true_lap = laplacian(&fuse(reference, y_true, &fcfg)?.fused);
            Some((fused_true_lap, fcfg))
        }
    };

    let evaluate = |warped: &GrayImage| -> Result<f64> {
        let corr = mncc(reference, warped, mask)?;
        let mut loss = cfg.epsilon * correlation_loss(corr, cfg.correlation_mode);
        if let Some((fused_true_lap, fcfg)) = &mg {
            loss += masked_lap_rms(reference, warped, fused_true_lap, mask, fcfg)?;
        }
        Ok(loss)
    };

    let mut phi = DeformationField::zero(h, w);
    let mut warped = moving_affined.clone();
    let mut loss = evaluate(&warped)?;
    let mut trace = vec![loss];

    if cfg.deform_iters == 0 {
        return Ok((phi, trace));
    }

    let (grad_x_img, grad_y_img) = spatial_gradients(moving_affined);
    let smooth_k = (3.0 * cfg.deform_smooth_sigma).ceil().max(1.0) as usize;
    let taps = gaussian_taps_1d(cfg.deform_smooth_sigma, smooth_k);
    let mut step = cfg.deform_step;

    for _ in 0..cfg.deform_iters {
        let (_, g_loss) = match correlation_grad_wrt_warped(
            reference,
            &warped,
            mask,
            cfg.correlation_mode,
        ) {
            Some(v) => v,
            None => break,
        };

        // Chain through the sampling: force = dL/dwarped * moving gradient
        // at the current sample location.
        let mut fx = GrayImage::new(h, w);
        let mut fy = GrayImage::new(h, w);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let g = g_loss.data()[i] * cfg.epsilon;
                if g == 0.0 {
                    continue;
                }
                let (dx, dy) = phi.at(y, x);
                let sx = x as f64 + dx;
                let sy = y as f64 + dy;
                fx.data_mut()[i] = g * grad_x_img.sample_raw(sx, sy).value;
                fy.data_mut()[i] = g * grad_y_img.sample_raw(sx, sy).value;
            }
        }
        let fx = separable_replicate(&fx, &taps);
        let fy = separable_replicate(&fy, &taps);
        let peak = fx
            .data()
            .iter()
            .chain(fy.data())
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        if peak == 0.0 {
            break;
        }

        let mut accepted = false;
        while step >= DEFORM_MIN_STEP {
            let scale = step / peak;
            let mut cand = phi.clone();
            for i in 0..h * w {
                cand.dx_mut()[i] -= scale * fx.data()[i];
                cand.dy_mut()[i] -= scale * fy.data()[i];
            }
            let cand_warped = apply_deformation(moving_affined, &cand)?;
            let cand_loss = evaluate(&cand_warped)?;
            if cand_loss < loss {
                phi = cand;
                warped = cand_warped;
                loss = cand_loss;
                trace.push(loss);
                step = (step * 1.3).min(cfg.deform_step);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((phi, trace))
}

/// Estimated reconstructible mask from current registration estimates: the
/// estimates describe the backward warp, so their inverses act as the
/// forward misalignment handed to the mask round trip.
fn estimated_mask(
    size: (usize, usize),
    theta_hat: &AffineParams,
    phi_hat: &DeformationField,
) -> Result<ReconMask> {
    compute_mask(
        size,
        &invert_affine(theta_hat)?,
        &invert_deformation(phi_hat),
        0.0,
    )
}

/// Full pipeline: affine stage, resample, deformable stage, resample, and
/// the final masked correlation. `gt_mask` is required for
/// [`MaskMode::GroundTruth`]; `mg_target` is required when `use_mg` is set.
pub fn register(
    reference: &GrayImage,
    moving: &GrayImage,
    cfg: &RegisterConfig,
    gt_mask: Option<&ReconMask>,
    mg_target: Option<&GrayImage>,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    let dims = reference.dims();
    let resolve = |estimated: Result<ReconMask>| -> Result<ReconMask> {
        match cfg.mask_mode {
            MaskMode::Ones => Ok(ReconMask::ones(dims.0, dims.1)),
            MaskMode::GroundTruth => gt_mask.cloned().ok_or_else(|| {
                Error::InvalidParameter("mask_mode=ground_truth requires a mask".into())
            }),
            MaskMode::Estimated => estimated,
        }
    };

    let affine_mask = resolve(estimated_mask(
        dims,
        &AffineParams::identity(),
        &DeformationField::zero(dims.0, dims.1),
    ))?;
    let (theta_hat, affine_trace) =
        register_affine(reference, moving, cfg, Some(&affine_mask))?;
    let moving_affined = apply_affine(moving, &theta_hat)?;

    let deform_mask = resolve(estimated_mask(
        dims,
        &theta_hat,
        &DeformationField::zero(dims.0, dims.1),
    ))?;
    let (phi_hat, deform_trace) =
        register_deformable(reference, &moving_affined, cfg, Some(&deform_mask), mg_target)?;
    let registered = apply_deformation(&moving_affined, &phi_hat)?;

    let final_mask = resolve(estimated_mask(dims, &theta_hat, &phi_hat))?;
    let final_mncc = mncc(reference, &registered, &final_mask)?;

    Ok(RegistrationResult {
        theta_hat,
        phi_hat,
        registered,
        affine_trace,
        deform_trace,
        final_mncc,
    })
}
