use crate::data::{Image, Mask};
use crate::error::{Error, Result};

/// Reported for identical images, where the ratio is unbounded.
pub const PSNR_CAP_DB: f64 = 99.0;

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::shape(format!(
            "images are {}x{}x{} and {}x{}x{}",
            a.channels(),
            a.height(),
            a.width(),
            b.channels(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB, with pixels mapped to `[0, 1]`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = (f64::from(x) - f64::from(y)) / 2.0;
            d * d
        })
        .sum();
    let mse = sum / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean squared error over hole pixels (all channels), on the `[-1, 1]` scale.
pub fn masked_mse(a: &Image, b: &Image, mask: &Mask) -> Result<f64> {
    check_dims(a, b)?;
    if (a.height(), a.width()) != (mask.height(), mask.width()) {
        return Err(Error::shape("mask does not match the images"));
    }
    let holes = mask.hole_count();
    if holes == 0 {
        return Err(Error::EmptyMaskRegion);
    }
    let hw = mask.data().len();
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .enumerate()
        .filter(|(i, _)| mask.data()[i % hw] == 1.0)
        .map(|(_, (&x, &y))| (f64::from(x) - f64::from(y)).powi(2))
        .sum();
    Ok(sum / (holes * a.channels()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_mask_half, HalfSide};

    #[test]
    fn identical_images_hit_the_cap() {
        let a = Image::filled(3, 4, 4, 0.3).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn constant_offset_gives_20_db() {
        // 0.1 on the [0, 1] scale is 0.2 on [-1, 1].
        let a = Image::filled(1, 4, 4, 0.0).unwrap();
        let b = Image::filled(1, 4, 4, 0.2).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
    }

    #[test]
    fn masked_mse_cases() {
        let a = Image::filled(3, 8, 8, 1.0).unwrap();
        let b = Image::filled(3, 8, 8, 0.0).unwrap();
        let half = gen_mask_half(8, 8, HalfSide::Right).unwrap();
        assert_eq!(masked_mse(&a, &b, &half).unwrap(), 1.0);
        assert_eq!(masked_mse(&a, &a, &half).unwrap(), 0.0);
        let zeros = Mask::zeros(8, 8).unwrap();
        assert!(matches!(masked_mse(&a, &b, &zeros), Err(Error::EmptyMaskRegion)));
        assert!(psnr(&a, &Image::filled(3, 8, 4, 0.0).unwrap()).is_err());
    }
}
