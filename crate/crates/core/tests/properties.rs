//! Property tests for the structural invariants: sampling identities,
//! inverse round trips, warp linearity, masked-metric consistency, and
//! metric ranges.

use proptest::prelude::*;

use warpfuse::geometry::{apply_affine, compose_affine, invert_affine, AffineParams};
use warpfuse::mask::ReconMask;
use warpfuse::metrics;
use warpfuse::raster::{load_pgm, save_pgm, ssim, GrayImage};

fn image_strategy(max_dim: usize) -> impl Strategy<Value = GrayImage> {
    (2..=max_dim, 2..=max_dim).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f64..=1.0, h * w)
            .prop_map(move |data| GrayImage::from_vec(h, w, data).unwrap())
    })
}

/// Same-size image pair.
fn image_pair_strategy(max_dim: usize) -> impl Strategy<Value = (GrayImage, GrayImage)> {
    (2..=max_dim, 2..=max_dim).prop_flat_map(|(h, w)| {
        (
            prop::collection::vec(0.0f64..=1.0, h * w),
            prop::collection::vec(0.0f64..=1.0, h * w),
        )
            .prop_map(move |(a, b)| {
                (
                    GrayImage::from_vec(h, w, a).unwrap(),
                    GrayImage::from_vec(h, w, b).unwrap(),
                )
            })
    })
}

/// Same-size image triple.
fn image_triple_strategy(
    max_dim: usize,
) -> impl Strategy<Value = (GrayImage, GrayImage, GrayImage)> {
    (2..=max_dim, 2..=max_dim).prop_flat_map(|(h, w)| {
        (
            prop::collection::vec(0.0f64..=1.0, h * w),
            prop::collection::vec(0.0f64..=1.0, h * w),
            prop::collection::vec(0.0f64..=1.0, h * w),
        )
            .prop_map(move |(a, b, c)| {
                (
                    GrayImage::from_vec(h, w, a).unwrap(),
                    GrayImage::from_vec(h, w, b).unwrap(),
                    GrayImage::from_vec(h, w, c).unwrap(),
                )
            })
    })
}

fn affine_strategy() -> impl Strategy<Value = AffineParams> {
    (
        0.7f64..1.3,
        -0.3f64..0.3,
        -0.3f64..0.3,
        0.7f64..1.3,
        -0.4f64..0.4,
        -0.4f64..0.4,
    )
        .prop_map(|(a, b, c, d, dx, dy)| AffineParams { a, b, c, d, dx, dy })
        .prop_filter("invertible", |t| t.det().abs() >= 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bilinear_at_integer_coords_returns_stored_value(img in image_strategy(8), yq in 0usize..8, xq in 0usize..8) {
        let y = yq % img.height();
        let x = xq % img.width();
        let s = img.bilinear_sample(x as f64, y as f64).unwrap();
        prop_assert!(s.inside);
        prop_assert_eq!(s.value.to_bits(), img.get(y, x).to_bits());
    }

    #[test]
    fn pgm_round_trip_is_within_quantization(img in image_strategy(6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        save_pgm(&img, &path).unwrap();
        let back = load_pgm(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn invert_affine_is_an_involution(theta in affine_strategy()) {
        let twice = invert_affine(&invert_affine(&theta).unwrap()).unwrap();
        for (p, q) in [
            (twice.a, theta.a), (twice.b, theta.b), (twice.c, theta.c),
            (twice.d, theta.d), (twice.dx, theta.dx), (twice.dy, theta.dy),
        ] {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn compose_with_inverse_is_identity(theta in affine_strategy()) {
        let id = compose_affine(&theta, &invert_affine(&theta).unwrap());
        prop_assert!((id.a - 1.0).abs() <= 1e-12);
        prop_assert!(id.b.abs() <= 1e-12);
        prop_assert!(id.c.abs() <= 1e-12);
        prop_assert!((id.d - 1.0).abs() <= 1e-12);
        prop_assert!(id.dx.abs() <= 1e-12);
        prop_assert!(id.dy.abs() <= 1e-12);
    }

    #[test]
    fn warping_commutes_with_intensity_scaling(img in image_strategy(8), theta in affine_strategy(), alpha in 0.0f64..4.0) {
        let scaled_then_warped = apply_affine(&img.map(|v| alpha * v), &theta).unwrap();
        let warped_then_scaled = apply_affine(&img, &theta).unwrap().map(|v| alpha * v);
        for (p, q) in scaled_then_warped.data().iter().zip(warped_then_scaled.data()) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn ssim_symmetry((a, b) in image_pair_strategy(8)) {
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn mncc_with_full_mask_equals_ncc((a, b) in image_pair_strategy(6)) {
        let ones = ReconMask::ones(a.height(), a.width());
        match (metrics::ncc(&a, &b), metrics::mncc(&a, &b, &ones)) {
            (Ok(p), Ok(q)) => prop_assert!((p - q).abs() <= 1e-12),
            (Err(_), Err(_)) => {}
            (p, q) => prop_assert!(false, "inconsistent: {p:?} vs {q:?}"),
        }
    }

    #[test]
    fn mncc_invariant_to_positive_rescaling((a, b) in image_pair_strategy(6), gain in 0.1f64..5.0, bias in -0.5f64..0.5) {
        let ones = ReconMask::ones(a.height(), a.width());
        if let Ok(base) = metrics::mncc(&a, &b, &ones) {
            let rescaled = metrics::mncc(&a.map(|v| gain * v + bias), &b, &ones).unwrap();
            prop_assert!((base - rescaled).abs() <= 1e-12);
        }
    }

    #[test]
    fn masked_metrics_ignore_unmasked_pixels((a, b) in image_pair_strategy(5), poke in 0usize..25) {
        let (h, w) = a.dims();
        let mut bits = vec![1u8; h * w];
        let hole = poke % (h * w);
        bits[hole] = 0;
        let mask = ReconMask::from_bits(h, w, bits).unwrap();

        let mut b2 = b.clone();
        b2.data_mut()[hole] = 1.0 - b2.data()[hole];

        match (metrics::mncc(&a, &b, &mask), metrics::mncc(&a, &b2, &mask)) {
            (Ok(p), Ok(q)) => prop_assert_eq!(p.to_bits(), q.to_bits()),
            (Err(_), Err(_)) => {}
            (p, q) => prop_assert!(false, "inconsistent: {p:?} vs {q:?}"),
        }
        let p = metrics::mmse(&a, &b, &mask).unwrap();
        let q = metrics::mmse(&a, &b2, &mask).unwrap();
        prop_assert_eq!(p.to_bits(), q.to_bits());
    }

    #[test]
    fn metric_ranges_hold((v, r, f) in image_triple_strategy(6)) {
        prop_assert!(metrics::edge_intensity(&f) >= 0.0);
        prop_assert!(metrics::spatial_frequency(&f).unwrap() >= 0.0);
        prop_assert!(metrics::cross_entropy(&v, &r, &f).unwrap() >= 0.0);
        let fmi = metrics::fmi_w(&v, &r, &f).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fmi), "fmi {}", fmi);
        prop_assert!(metrics::q_cv(&v, &r, &f, 8).unwrap() >= 0.0);
        if let Ok(ncc) = metrics::ncc(&v, &r) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ncc));
        }
    }
}
