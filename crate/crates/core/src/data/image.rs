use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Pixel grid with values in `[-1, 1]`, stored channel-major (`C, H, W`).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if !(channels == 1 || channels == 3) {
            return Err(Error::invalid(format!("images have 1 or 3 channels, got {channels}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::EmptyShape);
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "{channels}x{height}x{width} image needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [-1, 1]")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    /// Builds an image from a `[1, C, H, W]` or `[C, H, W]` tensor, clamping to `[-1, 1]`.
    pub fn from_tensor_clamped(t: &Tensor) -> Result<Self> {
        let (c, h, w) = match *t.shape() {
            [1, c, h, w] | [c, h, w] => (c, h, w),
            _ => {
                return Err(Error::shape(format!(
                    "expected a single [1,C,H,W] image tensor, got {:?}",
                    t.shape()
                )))
            }
        };
        Self::new(c, h, w, t.data().iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// `[1, C, H, W]` tensor view of the pixels.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![1, self.channels, self.height, self.width],
            self.data.clone(),
        )
        .expect("image dimensions are validated")
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }

    fn check_mask(&self, mask: &Mask) -> Result<()> {
        if (self.height, self.width) != (mask.height(), mask.width()) {
            return Err(Error::shape(format!(
                "image is {}x{} but mask is {}x{}",
                self.height,
                self.width,
                mask.height(),
                mask.width()
            )));
        }
        Ok(())
    }
}

/// Binary hole indicator: `1.0` marks a missing pixel, `0.0` a known one.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyShape);
        }
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} mask needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!("mask value {v} is not 0 or 1")));
        }
        // Normalize -0.0 so equal masks are also bitwise equal.
        let data = data.into_iter().map(|v| if v == 1.0 { 1.0 } else { 0.0 }).collect();
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(if f(y, x) { 1.0 } else { 0.0 });
            }
        }
        Self::new(height, width, data)
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![1.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_hole(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] == 1.0
    }

    pub fn hole_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1.0).count()
    }

    /// Fraction of pixels that are holes.
    pub fn coverage(&self) -> f64 {
        self.hole_count() as f64 / self.data.len() as f64
    }

    /// `[1, 1, H, W]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![1, 1, self.height, self.width], self.data.clone())
            .expect("mask dimensions are validated")
    }
}

/// Zeroes the hole pixels: `img ⊙ (1 − mask)`, with holes set to exactly `+0.0`.
pub fn apply_mask(img: &Image, mask: &Mask) -> Result<Image> {
    img.check_mask(mask)?;
    let hw = img.height * img.width;
    let data = img
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| if mask.data[i % hw] == 1.0 { 0.0 } else { v })
        .collect();
    Ok(Image { data, ..*img })
}

/// `generated ⊙ mask + known ⊙ (1 − mask)`, evaluated as a per-pixel select so
/// known pixels are copied bit-for-bit.
pub fn composite(generated: &Image, known: &Image, mask: &Mask) -> Result<Image> {
    if !generated.same_dims(known) {
        return Err(Error::shape("composite operands differ in size"));
    }
    known.check_mask(mask)?;
    let hw = known.height * known.width;
    let data = known
        .data
        .iter()
        .zip(&generated.data)
        .enumerate()
        .map(|(i, (&k, &g))| if mask.data[i % hw] == 1.0 { g } else { k })
        .collect();
    Ok(Image { data, ..*known })
}

/// Fills holes with the per-channel mean of the known pixels (0.0 when
/// nothing is known).
pub fn mean_fill(img: &Image, mask: &Mask) -> Result<Image> {
    img.check_mask(mask)?;
    let hw = img.height * img.width;
    let mut data = img.data.clone();
    for c in 0..img.channels {
        let plane = &mut data[c * hw..(c + 1) * hw];
        let (sum, n) = plane
            .iter()
            .zip(&mask.data)
            .filter(|(_, &m)| m == 0.0)
            .fold((0.0f64, 0usize), |(s, n), (&v, _)| (s + f64::from(v), n + 1));
        let fill = if n == 0 { 0.0 } else { (sum / n as f64) as f32 };
        for (v, &m) in plane.iter_mut().zip(&mask.data) {
            if m == 1.0 {
                *v = fill;
            }
        }
    }
    Ok(Image { data, ..*img })
}

const SEPARATOR: usize = 2;

/// Side-by-side `original | masked | result` strip with 2-pixel white separators.
pub fn montage(original: &Image, masked: &Image, result: &Image) -> Result<Image> {
    if !original.same_dims(masked) || !original.same_dims(result) {
        return Err(Error::shape("montage panels must share dimensions"));
    }
    let (c, h, w) = (original.channels, original.height, original.width);
    let total = 3 * w + 2 * SEPARATOR;
    let mut data = Vec::with_capacity(c * h * total);
    for ch in 0..c {
        for y in 0..h {
            for (i, panel) in [original, masked, result].into_iter().enumerate() {
                if i > 0 {
                    data.extend(std::iter::repeat(1.0).take(SEPARATOR));
                }
                let row = (ch * h + y) * w;
                data.extend_from_slice(&panel.data[row..row + w]);
            }
        }
    }
    Image::new(c, h, total, data)
}
