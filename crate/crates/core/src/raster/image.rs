//! Single-channel float raster and bilinear sampling.

use crate::error::{Error, Result};

/// A single-channel image stored row-major as `f64`.
///
/// Loaded images hold intensities in `[0, 1]`; intermediate buffers (filter
/// responses, differences) may carry any finite value. Saving as 8-bit
/// clamps back to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// Result of one bilinear lookup.
///
/// `inside` is true iff the sample point lies in the image domain
/// `[0, W-1] x [0, H-1]`, i.e. every tap with nonzero weight is a real
/// pixel. When false, out-of-bounds taps contributed 0 to `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleResult {
    pub value: f64,
    pub inside: bool,
}

impl GrayImage {
    /// Zero-filled image. Panics on zero dimensions; use [`GrayImage::from_vec`]
    /// for data-driven construction.
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "image dimensions must be >= 1");
        GrayImage {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    /// Constant-valued image.
    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        let mut img = Self::new(height, width);
        img.data.fill(value);
        img
    }

    /// Wrap a row-major buffer. Errors on empty dimensions, length mismatch,
    /// or non-finite entries.
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        if data.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "buffer length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("image buffer"));
        }
        Ok(GrayImage {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel read with replicate (clamp-to-edge) semantics for signed indices.
    #[inline]
    pub(crate) fn get_clamped(&self, y: isize, x: isize) -> f64 {
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Elementwise map into a new image.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-size images.
    pub fn zip_map(&self, other: &GrayImage, f: impl Fn(f64, f64) -> f64) -> Result<GrayImage> {
        check_same_dims("zip_map", self, other)?;
        Ok(GrayImage {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear lookup at a continuous coordinate (`x` = column, `y` = row).
    ///
    /// Integer coordinates address pixel centers, so sampling exactly at a
    /// pixel returns its stored value bit-for-bit. Taps falling outside the
    /// raster contribute 0.
    pub fn bilinear_sample(&self, x: f64, y: f64) -> Result<SampleResult> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("sample coordinates"));
        }
        Ok(self.sample_raw(x, y))
    }

    /// Infallible sampler for internal warp loops; callers guarantee finite
    /// coordinates (field and transform invariants enforce this upstream).
    #[inline]
    pub(crate) fn sample_raw(&self, x: f64, y: f64) -> SampleResult {
        let x0f = x.floor();
        let y0f = y.floor();
        let fx = x - x0f;
        let fy = y - y0f;
        let x0 = x0f as isize;
        let y0 = y0f as isize;

        let w = self.width as isize;
        let h = self.height as isize;
        let tap = |yy: isize, xx: isize| -> f64 {
            if yy >= 0 && yy < h && xx >= 0 && xx < w {
                self.data[yy as usize * self.width + xx as usize]
            } else {
                0.0
            }
        };

        let v00 = tap(y0, x0);
        let v01 = tap(y0, x0 + 1);
        let v10 = tap(y0 + 1, x0);
        let v11 = tap(y0 + 1, x0 + 1);

        let top = v00 * (1.0 - fx) + v01 * fx;
        let bottom = v10 * (1.0 - fx) + v11 * fx;
        let value = top * (1.0 - fy) + bottom * fy;

        let inside = x >= 0.0
            && x <= (self.width - 1) as f64
            && y >= 0.0
            && y <= (self.height - 1) as f64;

        SampleResult { value, inside }
    }
}

pub(crate) fn check_same_dims(
    context: &'static str,
    a: &GrayImage,
    b: &GrayImage,
) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            context,
            a: a.dims(),
            b: b.dims(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_validates_shape_and_values() {
        assert!(GrayImage::from_vec(0, 3, vec![]).is_err());
        assert!(GrayImage::from_vec(1, 3, vec![0.0, 1.0]).is_err());
        assert!(GrayImage::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
        let img = GrayImage::from_vec(2, 2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        assert_eq!(img.get(1, 0), 0.5);
    }

    #[test]
    fn bilinear_integer_coordinate_is_exact() {
        let img = GrayImage::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let s = img.bilinear_sample(1.0, 1.0).unwrap();
        assert_eq!(s.value, 0.4);
        assert!(s.inside);
    }

    #[test]
    fn bilinear_midpoint_interpolates() {
        let img = GrayImage::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let s = img.bilinear_sample(0.5, 0.0).unwrap();
        assert_eq!(s.value, 0.5);
        assert!(s.inside);
    }

    #[test]
    fn bilinear_out_of_bounds_is_zero_and_outside() {
        let img = GrayImage::constant(3, 3, 1.0);
        let s = img.bilinear_sample(-5.0, 1.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(!s.inside);
        // Partially supported point: value is the in-bounds fraction.
        let s = img.bilinear_sample(-0.25, 0.0).unwrap();
        assert!((s.value - 0.75).abs() < 1e-15);
        assert!(!s.inside);
    }

    #[test]
    fn bilinear_rejects_non_finite() {
        let img = GrayImage::constant(2, 2, 0.0);
        assert!(img.bilinear_sample(f64::NAN, 0.0).is_err());
        assert!(img.bilinear_sample(0.0, f64::INFINITY).is_err());
    }
}
