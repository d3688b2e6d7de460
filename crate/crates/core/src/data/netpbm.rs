//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::path::Path;

use crate::data::{Image, Mask};
use crate::error::{Error, Result};
use crate::fsutil;

/// Byte to `[-1, 1]`.
pub fn byte_to_unit(v: u8) -> f32 {
    f32::from(v) / 127.5 - 1.0
}

/// `[-1, 1]` to byte, rounding to nearest.
pub fn unit_to_byte(x: f32) -> u8 {
    (x.clamp(-1.0, 1.0) * 127.5 + 127.5).round().clamp(0.0, 255.0) as u8
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(m) => {
            return Err(Error::Format(format!(
                "wrong magic {:?}, expected P5 or P6",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(Error::Format("file too short for a header".into())),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments between tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Format("header ended early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!("header field {} is not a number", i + 1)));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("header number out of range".into()))?;
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("zero image dimension".into()));
    }
    Ok(Header {
        channels,
        width: width as usize,
        height: height as usize,
        offset: pos,
    })
}

fn decode_bytes(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let h = parse_header(bytes)?;
    let n = h.channels * h.width * h.height;
    let payload = &bytes[h.offset..];
    if payload.len() < n {
        return Err(Error::Format(format!(
            "truncated payload: expected {n} bytes, found {}",
            payload.len()
        )));
    }
    Ok((h.channels, h.height, h.width, payload[..n].to_vec()))
}

/// Decodes P5/P6 bytes into channel-major pixels.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let (c, h, w, px) = decode_bytes(bytes)?;
    let mut data = vec![0.0; c * h * w];
    // Interleaved payload to planar storage.
    for (i, &b) in px.iter().enumerate() {
        let (pix, ch) = (i / c, i % c);
        data[ch * h * w + pix] = byte_to_unit(b);
    }
    Image::new(c, h, w, data)
}

pub fn encode_image(img: &Image) -> Vec<u8> {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let hw = h * w;
    out.reserve(c * hw);
    let d = img.data();
    for pix in 0..hw {
        for ch in 0..c {
            out.push(unit_to_byte(d[ch * hw + pix]));
        }
    }
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&fsutil::read(path.as_ref())?)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &encode_image(img))
}

/// Masks are P5 files holding only 0 (known) and 255 (hole).
pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let (c, h, w, px) = decode_bytes(bytes)?;
    if c != 1 {
        return Err(Error::Format("masks must be single-channel PGM (P5)".into()));
    }
    let data = px
        .iter()
        .map(|&b| match b {
            0 => Ok(0.0),
            255 => Ok(1.0),
            v => Err(Error::Format(format!("mask byte {v} is neither 0 nor 255"))),
        })
        .collect::<Result<Vec<f32>>>()?;
    Mask::new(h, w, data)
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.data().iter().map(|&v| if v == 1.0 { 255u8 } else { 0 }));
    out
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask(&fsutil::read(path.as_ref())?)
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &encode_mask(mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(byte_to_unit(0), -1.0);
        assert!((byte_to_unit(255) - 1.0).abs() <= 1.0 / 127.5);
        assert_eq!(unit_to_byte(-1.0), 0);
        assert_eq!(unit_to_byte(1.0), 255);
        assert_eq!(unit_to_byte(7.0), 255);
    }

    #[test]
    fn every_byte_survives_the_float_trip() {
        for v in 0..=255u8 {
            assert_eq!(unit_to_byte(byte_to_unit(v)), v);
        }
    }

    #[test]
    fn quantization_bound_brute_force() {
        // Every float that maps to byte b lies within half a step of b's value.
        let mut worst = 0.0f32;
        for i in 0..=20_000 {
            let x = -1.0 + 2.0 * i as f32 / 20_000.0;
            let back = byte_to_unit(unit_to_byte(x));
            worst = worst.max((back - x).abs());
        }
        assert!(worst <= 1.0 / 127.5, "{worst}");
    }

    #[test]
    fn ppm_layout_is_interleaved() {
        let img = Image::new(3, 1, 2, vec![-1.0, 1.0, -1.0, 1.0, -1.0, 1.0]).unwrap();
        let bytes = encode_image(&img);
        assert_eq!(&bytes[..11], b"P6\n2 1\n255\n");
        assert_eq!(&bytes[11..], &[0, 0, 0, 255, 255, 255]);
        assert_eq!(decode_image(&bytes).unwrap(), img);
    }

    #[test]
    fn header_comments_accepted() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        let img = decode_image(bytes).unwrap();
        assert_eq!(img.data(), &[-1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_files() {
        let e = decode_image(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").unwrap_err();
        assert_eq!(e.to_string(), "unsupported maxval 65535");
        assert!(matches!(decode_image(b"P3\n1 1\n255\n0 0 0"), Err(Error::Format(_))));
        let e = decode_image(b"P6\n2 2\n255\n\x00\x00").unwrap_err();
        assert!(e.to_string().contains("truncated"), "{e}");
        assert!(decode_image(b"P5\n2").is_err());
        assert!(decode_image(b"P5\nx 2 255\n").is_err());
        assert!(decode_image(b"").is_err());
    }

    #[test]
    fn mask_round_trip_and_strictness() {
        let m = Mask::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(decode_mask(&encode_mask(&m)).unwrap(), m);
        assert!(decode_mask(b"P5\n1 1\n255\n\x80").is_err());
        assert!(decode_mask(b"P6\n1 1\n255\n\x00\x00\x00").is_err());
    }
}
