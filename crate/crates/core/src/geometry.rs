//! Affine transforms, deformation fields, their inverses and composition,
//! and warp application by inverse-mapped grid resampling.
//!
//! Affine parameters act in normalized coordinates: the image domain
//! `[0, W-1] x [0, H-1]` maps to `[-1, 1]^2` with the origin at the image
//! center (spatial-transformer convention), so rotation and scale pivot on
//! the center. Deformation fields stay in pixel units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_pfm, save_pfm, GrayImage, PfmPlanes};

const MIN_AFFINE_DET: f64 = 1e-8;

/// Six-parameter affine map `p -> [[a, b], [c, d]] p + (dx, dy)` over
/// normalized coordinates. Warping samples the input at the mapped output
/// coordinate (inverse-warp convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub dx: f64,
    pub dy: f64,
}

impl AffineParams {
    pub fn identity() -> Self {
        AffineParams {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
            dx: 0.0,
            dy: 0.0,
        }
    }

    /// Counterclockwise rotation (in the x-right, y-down raster frame this
    /// appears clockwise on screen).
    pub fn rotation(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        AffineParams {
            a: c,
            b: -s,
            c: s,
            d: c,
            dx: 0.0,
            dy: 0.0,
        }
    }

    /// Horizontal shear by the given angle.
    pub fn shear_x(radians: f64) -> Self {
        AffineParams {
            a: 1.0,
            b: radians.tan(),
            c: 0.0,
            d: 1.0,
            dx: 0.0,
            dy: 0.0,
        }
    }

    /// Isotropic scaling of the sampling coordinates.
    pub fn scaling(factor: f64) -> Self {
        AffineParams {
            a: factor,
            b: 0.0,
            c: 0.0,
            d: factor,
            dx: 0.0,
            dy: 0.0,
        }
    }

    /// Translation given in normalized units.
    pub fn translation_norm(dx: f64, dy: f64) -> Self {
        AffineParams {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
            dx,
            dy,
        }
    }

    /// Translation of the sampling grid by whole-image pixels: a positive
    /// `tx` samples `tx` pixels to the right, matching a deformation field
    /// with constant `dx = tx`.
    pub fn translation_px(tx: f64, ty: f64, size: (usize, usize)) -> Self {
        let (h, w) = size;
        Self::translation_norm(px_span_to_norm(tx, w), px_span_to_norm(ty, h))
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Checks finiteness and invertibility.
    pub fn validate(&self) -> Result<()> {
        let vals = [self.a, self.b, self.c, self.d, self.dx, self.dy];
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("affine parameters"));
        }
        let det = self.det();
        if det.abs() < MIN_AFFINE_DET {
            return Err(Error::SingularAffine { det });
        }
        Ok(())
    }

    /// Map a normalized coordinate through the transform.
    #[inline]
    pub fn map_normalized(&self, xn: f64, yn: f64) -> (f64, f64) {
        (
            self.a * xn + self.b * yn + self.dx,
            self.c * xn + self.d * yn + self.dy,
        )
    }

    /// Map a pixel coordinate through the transform for a raster of the
    /// given `(height, width)`. Works in centered pixel space so the
    /// identity maps every coordinate to itself bit-for-bit.
    pub fn map_pixel(&self, x: f64, y: f64, size: (usize, usize)) -> (f64, f64) {
        let p = PixelMap::new(self, size);
        p.map(x, y)
    }
}

/// The affine transform rewritten as a pixel-coordinate map for one raster
/// size: `u = a (x-cx) + b (y-cy) sx/sy + dx sx + cx` and symmetrically for
/// `v`. Algebraically identical to normalizing, mapping, and denormalizing,
/// but exact for the identity transform.
pub(crate) struct PixelMap {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    tx: f64,
    ty: f64,
    cx: f64,
    cy: f64,
}

impl PixelMap {
    pub(crate) fn new(theta: &AffineParams, size: (usize, usize)) -> Self {
        let (h, w) = size;
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let sx = if w > 1 { cx } else { 1.0 };
        let sy = if h > 1 { cy } else { 1.0 };
        PixelMap {
            a: theta.a,
            b: theta.b * sx / sy,
            c: theta.c * sy / sx,
            d: theta.d,
            tx: theta.dx * sx,
            ty: theta.dy * sy,
            cx,
            cy,
        }
    }

    #[inline]
    pub(crate) fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let xc = x - self.cx;
        let yc = y - self.cy;
        (
            self.a * xc + self.b * yc + self.tx + self.cx,
            self.c * xc + self.d * yc + self.ty + self.cy,
        )
    }
}

/// Convert a pixel displacement to a normalized-coordinate displacement.
#[inline]
pub(crate) fn px_span_to_norm(t_px: f64, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * t_px / (n - 1) as f64
    }
}

/// Inverse transform: inverse linear part applied to the negated translation.
pub fn invert_affine(theta: &AffineParams) -> Result<AffineParams> {
    theta.validate()?;
    let det = theta.det();
    let (ia, ib, ic, id) = (theta.d / det, -theta.b / det, -theta.c / det, theta.a / det);
    Ok(AffineParams {
        a: ia,
        b: ib,
        c: ic,
        d: id,
        dx: ia * -theta.dx + ib * -theta.dy,
        dy: ic * -theta.dx + id * -theta.dy,
    })
}

/// Composition in coordinate-mapping order: the result maps `p` to
/// `second(first(p))`.
pub fn compose_affine(first: &AffineParams, second: &AffineParams) -> AffineParams {
    AffineParams {
        a: second.a * first.a + second.b * first.c,
        b: second.a * first.b + second.b * first.d,
        c: second.c * first.a + second.d * first.c,
        d: second.c * first.b + second.d * first.d,
        dx: second.a * first.dx + second.b * first.dy + second.dx,
        dy: second.c * first.dx + second.d * first.dy + second.dy,
    }
}

/// Resample an image through an affine transform. Each output pixel is the
/// bilinear sample of the input at its mapped coordinate; unsupported taps
/// read as zero.
pub fn apply_affine(img: &GrayImage, theta: &AffineParams) -> Result<GrayImage> {
    theta.validate()?;
    let (h, w) = img.dims();
    let map = PixelMap::new(theta, (h, w));
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = map.map(x as f64, y as f64);
            out.set(y, x, img.sample_raw(u, v).value);
        }
    }
    Ok(out)
}

/// Per-pixel displacement rasters `(dx, dy)` in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    height: usize,
    width: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DeformationField {
    /// All-zero field (the identity deformation).
    pub fn zero(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "field dimensions must be >= 1");
        DeformationField {
            height,
            width,
            dx: vec![0.0; height * width],
            dy: vec![0.0; height * width],
        }
    }

    pub fn from_components(
        height: usize,
        width: usize,
        dx: Vec<f64>,
        dy: Vec<f64>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        if dx.len() != height * width || dy.len() != height * width {
            return Err(Error::InvalidParameter(
                "displacement buffer length does not match dimensions".into(),
            ));
        }
        if !dx.iter().chain(dy.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("deformation field"));
        }
        Ok(DeformationField {
            height,
            width,
            dx,
            dy,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub(crate) fn dx_mut(&mut self) -> &mut [f64] {
        &mut self.dx
    }

    pub(crate) fn dy_mut(&mut self) -> &mut [f64] {
        &mut self.dy
    }

    /// Displacement at an integer pixel.
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    /// Root-mean-square displacement magnitude.
    pub fn rms(&self) -> f64 {
        let sum: f64 = self
            .dx
            .iter()
            .zip(&self.dy)
            .map(|(&a, &b)| a * a + b * b)
            .sum();
        (sum / self.dx.len() as f64).sqrt()
    }

    /// Store as a 3-channel PFM (`R = dx`, `G = dy`, `B = 0`).
    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        save_pfm(
            &PfmPlanes {
                height: self.height,
                width: self.width,
                planes: vec![self.dx.clone(), self.dy.clone(), vec![0.0; self.dx.len()]],
            },
            path,
        )
    }

    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Self> {
        let planes = load_pfm(path)?;
        if planes.planes.len() != 3 {
            return Err(Error::MalformedHeader {
                format: "pfm",
                reason: "deformation field requires 3-channel PF".into(),
            });
        }
        let mut it = planes.planes.into_iter();
        Self::from_components(planes.height, planes.width, it.next().unwrap(), it.next().unwrap())
    }
}

/// The field inverse as the paper defines it: componentwise negation.
/// Exact for spatially constant fields, first-order otherwise; round-trip
/// error for smooth fields is measured by the test harness rather than
/// corrected here.
pub fn invert_deformation(phi: &DeformationField) -> DeformationField {
    DeformationField {
        height: phi.height,
        width: phi.width,
        dx: phi.dx.iter().map(|v| -v).collect(),
        dy: phi.dy.iter().map(|v| -v).collect(),
    }
}

/// Resample an image through a deformation field:
/// `out(x, y) = img(x + dx[y,x], y + dy[y,x])` with zero-fill taps.
pub fn apply_deformation(img: &GrayImage, phi: &DeformationField) -> Result<GrayImage> {
    if img.dims() != phi.dims() {
        return Err(Error::DimensionMismatch {
            context: "apply_deformation",
            a: img.dims(),
            b: phi.dims(),
        });
    }
    let (h, w) = img.dims();
    let mut out = GrayImage::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = phi.at(y, x);
            let s = img.sample_raw(x as f64 + dx, y as f64 + dy);
            out.set(y, x, s.value);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> GrayImage {
        let mut img = GrayImage::new(h, w);
        for y in 0..h {
            for x in 0..w {
                img.set(y, x, (x + y * w) as f64 / (h * w) as f64);
            }
        }
        img
    }

    fn assert_affine_close(a: &AffineParams, b: &AffineParams, tol: f64) {
        for (p, q) in [
            (a.a, b.a),
            (a.b, b.b),
            (a.c, b.c),
            (a.d, b.d),
            (a.dx, b.dx),
            (a.dy, b.dy),
        ] {
            assert!((p - q).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn invert_identity_and_translation() {
        let id = AffineParams::identity();
        assert_affine_close(&invert_affine(&id).unwrap(), &id, 0.0);

        let t = AffineParams::translation_norm(0.1, -0.05);
        let ti = invert_affine(&t).unwrap();
        assert_affine_close(&ti, &AffineParams::translation_norm(-0.1, 0.05), 1e-15);
    }

    #[test]
    fn invert_rejects_singular() {
        let theta = AffineParams {
            a: 1.0,
            b: 2.0,
            c: 0.5,
            d: 2.0,
            dx: 0.0,
            dy: 0.0,
        };
        assert!(invert_affine(&theta).is_ok());
        let singular = AffineParams {
            a: 1.0,
            b: 2.0,
            c: 0.5,
            d: 1.0 + 1e-12,
            dx: 0.0,
            dy: 0.0,
        };
        assert!(matches!(
            invert_affine(&singular),
            Err(Error::SingularAffine { .. })
        ));
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let theta = compose_affine(
            &AffineParams::rotation(10f64.to_radians()),
            &AffineParams::translation_norm(0.2, -0.1),
        );
        assert_affine_close(&compose_affine(&theta, &AffineParams::identity()), &theta, 0.0);

        let inv = invert_affine(&theta).unwrap();
        assert_affine_close(
            &compose_affine(&theta, &inv),
            &AffineParams::identity(),
            1e-12,
        );
    }

    #[test]
    fn compose_translations_cancel() {
        let fwd = AffineParams::translation_norm(0.3, 0.4);
        let back = AffineParams::translation_norm(-0.3, -0.4);
        assert_affine_close(&compose_affine(&fwd, &back), &AffineParams::identity(), 0.0);
    }

    #[test]
    fn apply_identity_is_bit_exact() {
        let img = ramp(9, 7);
        let out = apply_affine(&img, &AffineParams::identity()).unwrap();
        assert_eq!(out, img);
        let out = apply_deformation(&img, &DeformationField::zero(9, 7)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn integer_translation_is_exact_shift_with_zero_fill() {
        let img = ramp(5, 6);
        // Sampling shift of -1 column: output column j shows input column j-1.
        let theta = AffineParams::translation_px(-1.0, 0.0, img.dims());
        let out = apply_affine(&img, &theta).unwrap();
        for y in 0..5 {
            assert_eq!(out.get(y, 0), 0.0);
            for x in 1..6 {
                assert!((out.get(y, x) - img.get(y, x - 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_field_matches_affine_translation() {
        let img = ramp(8, 8);
        let phi = DeformationField::from_components(8, 8, vec![1.0; 64], vec![0.0; 64]).unwrap();
        let by_field = apply_deformation(&img, &phi).unwrap();
        let by_affine =
            apply_affine(&img, &AffineParams::translation_px(1.0, 0.0, img.dims())).unwrap();
        for (a, b) in by_field.data().iter().zip(by_affine.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn invert_deformation_negates() {
        let phi =
            DeformationField::from_components(2, 2, vec![2.0; 4], vec![-0.5; 4]).unwrap();
        let inv = invert_deformation(&phi);
        assert!(inv.dx().iter().all(|&v| v == -2.0));
        assert!(inv.dy().iter().all(|&v| v == 0.5));
        let zero = DeformationField::zero(2, 2);
        assert_eq!(invert_deformation(&zero), zero);
    }

    #[test]
    fn field_constructor_validates() {
        assert!(DeformationField::from_components(2, 2, vec![0.0; 3], vec![0.0; 4]).is_err());
        assert!(
            DeformationField::from_components(2, 2, vec![f64::NAN; 4], vec![0.0; 4]).is_err()
        );
    }

    #[test]
    fn warp_is_linear_in_intensity() {
        let img = ramp(6, 6);
        let theta = compose_affine(
            &AffineParams::rotation(0.2),
            &AffineParams::translation_norm(0.1, 0.05),
        );
        let scaled = img.map(|v| 3.5 * v);
        let a = apply_affine(&scaled, &theta).unwrap();
        let b = apply_affine(&img, &theta).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - 3.5 * q).abs() <= 1e-12);
        }
    }
}
