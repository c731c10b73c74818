//! Reconstructible-area masks.
//!
//! A reference pixel is reconstructible when its content survives the
//! forward warp into the moving frame and the backward warp home. The mask
//! is computed by round-tripping an all-ones raster through both warps and
//! thresholding what returns.

use crate::error::{Error, Result};
use crate::geometry::{
    apply_affine, apply_deformation, invert_affine, invert_deformation, AffineParams,
    DeformationField,
};
use crate::raster::GrayImage;

/// Binary raster marking reconstructible pixels (1) at the reference
/// image's resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconMask {
    height: usize,
    width: usize,
    bits: Vec<u8>,
}

impl ReconMask {
    pub fn ones(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "mask dimensions must be >= 1");
        ReconMask {
            height,
            width,
            bits: vec![1; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        if bits.len() != height * width {
            return Err(Error::InvalidParameter(
                "mask buffer length does not match dimensions".into(),
            ));
        }
        if !bits.iter().all(|&b| b <= 1) {
            return Err(Error::InvalidParameter("mask values must be 0 or 1".into()));
        }
        Ok(ReconMask {
            height,
            width,
            bits,
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

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn is_set(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Render as a 0.0/1.0 float raster (for saving as 0/255 PGM).
    pub fn to_image(&self) -> GrayImage {
        let mut img = GrayImage::new(self.height, self.width);
        for (o, &b) in img.data_mut().iter_mut().zip(&self.bits) {
            *o = f64::from(b);
        }
        img
    }

    /// Binarize a float raster at 0.5 (inverse of [`ReconMask::to_image`]
    /// for masks stored as 0/255 PGM).
    pub fn from_image(img: &GrayImage) -> Self {
        ReconMask {
            height: img.height(),
            width: img.width(),
            bits: img.data().iter().map(|&v| u8::from(v > 0.5)).collect(),
        }
    }
}

/// Round-trip an arbitrary initial raster through the forward warp
/// (affine, then elastic) and the backward warp (negated field, then
/// inverse affine), binarizing the result at `threshold`.
pub fn roundtrip_mask(
    initial: &GrayImage,
    theta: &AffineParams,
    phi: &DeformationField,
    threshold: f64,
) -> Result<ReconMask> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "mask threshold must lie in [0, 1), got {threshold}"
        )));
    }
    if initial.dims() != phi.dims() {
        return Err(Error::DimensionMismatch {
            context: "roundtrip_mask",
            a: initial.dims(),
            b: phi.dims(),
        });
    }
    let theta_inv = invert_affine(theta)?;
    let phi_inv = invert_deformation(phi);

    let forward = apply_deformation(&apply_affine(initial, theta)?, phi)?;
    let back = apply_affine(&apply_deformation(&forward, &phi_inv)?, &theta_inv)?;

    let bits = back.data().iter().map(|&v| u8::from(v > threshold)).collect();
    ReconMask::from_bits(initial.height(), initial.width(), bits)
}

/// Compute the reconstructible mask for a `(theta, phi)` misalignment at
/// the given `(height, width)`. The initial mask is all ones; `threshold`
/// 0 keeps any pixel with positive round-trip support.
pub fn compute_mask(
    size: (usize, usize),
    theta: &AffineParams,
    phi: &DeformationField,
    threshold: f64,
) -> Result<ReconMask> {
    let (h, w) = size;
    if h == 0 || w == 0 {
        return Err(Error::InvalidDimensions { height: h, width: w });
    }
    roundtrip_mask(&GrayImage::constant(h, w, 1.0), theta, phi, threshold)
}

/// Fraction of mask pixels set to 1.
pub fn mask_fraction(mask: &ReconMask) -> f64 {
    mask.count_ones() as f64 / (mask.height * mask.width) as f64
}
