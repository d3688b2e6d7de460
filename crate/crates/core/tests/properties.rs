//! Algebraic properties of the tensor ops, masks and image codec.

use inpaint_core::data::{
    apply_mask, composite, decode_image, encode_image, Image, Mask, MaskFamily,
};
use inpaint_core::numerics::{randn, Rng, Tape, Tensor};
use proptest::prelude::*;

/// 3×3 convolution with zero bias.
fn conv(x: &Tensor, w: &Tensor, stride: usize) -> Tensor {
    let mut t = Tape::new();
    let b = t.constant(Tensor::zeros(&[w.shape()[0]]).unwrap());
    let (x, w) = (t.constant(x.clone()), t.constant(w.clone()));
    let y = t.conv2d(x, w, b, stride, 1).unwrap();
    t.value(y).clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn concat_then_slice_recovers_inputs(
        seed in any::<u64>(),
        n in 1usize..3, ca in 1usize..4, cb in 1usize..4, h in 1usize..6, w in 1usize..6,
    ) {
        let mut rng = Rng::new(seed);
        let a = randn(&mut rng, &[n, ca, h, w]).unwrap();
        let b = randn(&mut rng, &[n, cb, h, w]).unwrap();
        let mut t = Tape::new();
        let (va, vb) = (t.constant(a.clone()), t.constant(b.clone()));
        let cat = t.concat_channels(va, vb).unwrap();
        let ra = t.slice_channels(cat, 0, ca).unwrap();
        let rb = t.slice_channels(cat, ca, cb).unwrap();
        prop_assert_eq!(t.value(ra), &a);
        prop_assert_eq!(t.value(rb), &b);
    }

    #[test]
    fn conv_is_linear_in_its_input(
        seed in any::<u64>(),
        alpha in -2.0f32..2.0, beta in -2.0f32..2.0,
        cin in 1usize..4, cout in 1usize..4, size in 3usize..8, stride in 1usize..3,
    ) {
        let mut rng = Rng::new(seed);
        let x1 = randn(&mut rng, &[2, cin, size, size]).unwrap();
        let x2 = randn(&mut rng, &[2, cin, size, size]).unwrap();
        let w = randn(&mut rng, &[cout, cin, 3, 3]).unwrap().map(|v| v * 0.3);
        let mixed = x1.zip_map(&x2, |a, b| alpha * a + beta * b).unwrap();
        let lhs = conv(&mixed, &w, stride);
        let rhs = conv(&x1, &w, stride).zip_map(&conv(&x2, &w, stride), |a, b| alpha * a + beta * b).unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((l - r).abs() <= 1e-4, "{} vs {}", l, r);
        }
    }

    #[test]
    fn masks_are_binary_and_masking_is_idempotent(seed in any::<u64>(), family in 0usize..4, size in 8usize..24) {
        let mut rng = Rng::new(seed);
        let m = MaskFamily::ALL[family].sample(&mut rng, size, size).unwrap();
        prop_assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.0));
        let data: Vec<f32> = (0..3 * size * size).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let img = Image::new(3, size, size, data).unwrap();
        let once = apply_mask(&img, &m).unwrap();
        prop_assert_eq!(&apply_mask(&once, &m).unwrap(), &once);
        // Compositing anything into the holes leaves the masked image unchanged
        // outside them.
        let other = Image::filled(3, size, size, 0.5).unwrap();
        let mixed = composite(&other, &once, &m).unwrap();
        prop_assert_eq!(apply_mask(&mixed, &m).unwrap(), once);
    }

    #[test]
    fn codec_round_trip_stays_within_one_step(seed in any::<u64>(), gray in any::<bool>(), h in 1usize..9, w in 1usize..9) {
        let mut rng = Rng::new(seed);
        let c = if gray { 1 } else { 3 };
        let data: Vec<f32> = (0..c * h * w).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let img = Image::new(c, h, w, data).unwrap();
        let back = decode_image(&encode_image(&img)).unwrap();
        prop_assert_eq!((back.channels(), back.height(), back.width()), (c, h, w));
        for (a, b) in img.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1.0 / 127.5);
        }
        // Re-encoding a decoded image is exact.
        prop_assert_eq!(encode_image(&back), encode_image(&img));
    }
}

#[test]
fn mask_dims_must_match_the_image() {
    let img = Image::filled(1, 8, 8, 0.0).unwrap();
    assert!(apply_mask(&img, &Mask::ones(8, 9).unwrap()).is_err());
}
