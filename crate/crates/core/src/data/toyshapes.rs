//! Synthetic "toyshapes" images: a linear colour gradient with one to three
//! flat rectangles or discs on top.
//!
//! Geometry is rasterized with integer arithmetic and colours are drawn on the
//! 8-bit grid, so datasets come out identical on every platform.

use crate::data::Image;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Palette {
    Rgb,
    Gray,
}

impl Palette {
    pub fn channels(self) -> usize {
        match self {
            Palette::Rgb => 3,
            Palette::Gray => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub count: usize,
    pub size: usize,
    pub seed: u64,
    pub min_shapes: usize,
    pub max_shapes: usize,
    pub palette: Palette,
}

impl DatasetSpec {
    pub fn new(count: usize, size: usize, seed: u64) -> Self {
        Self {
            count,
            size,
            seed,
            min_shapes: 1,
            max_shapes: 3,
            palette: Palette::Rgb,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("dataset needs at least one sample"));
        }
        if self.size < 8 {
            return Err(Error::invalid(format!("image size {} is below 8", self.size)));
        }
        if self.min_shapes > self.max_shapes {
            return Err(Error::invalid("min_shapes exceeds max_shapes"));
        }
        Ok(())
    }
}

fn random_colour(rng: &mut Rng, channels: usize) -> Vec<f32> {
    (0..channels)
        .map(|_| rng.below(256) as f32 / 127.5 - 1.0)
        .collect()
}

/// Renders sample `index` of the dataset described by `spec`.
pub fn toyshape(spec: &DatasetSpec, index: usize) -> Result<Image> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed).split_index(index as u64);
    let (c, s) = (spec.palette.channels(), spec.size);
    let si = s as i64;
    let hw = s * s;
    let mut data = vec![0.0f32; c * hw];

    // Background: colour a at the low end of the projection, b at the high end.
    let a = random_colour(&mut rng, c);
    let b = random_colour(&mut rng, c);
    let (dx, dy) = loop {
        let d = (rng.range_inclusive(-4, 4), rng.range_inclusive(-4, 4));
        if d != (0, 0) {
            break d;
        }
    };
    let corners = [(0, 0), (si - 1, 0), (0, si - 1), (si - 1, si - 1)];
    let proj: Vec<i64> = corners.iter().map(|&(x, y)| dx * x + dy * y).collect();
    let (lo, hi) = (*proj.iter().min().unwrap(), *proj.iter().max().unwrap());
    let span = (hi - lo) as f32;
    for y in 0..si {
        for x in 0..si {
            let t = (dx * x + dy * y - lo) as f32 / span;
            let p = (y * si + x) as usize;
            for ch in 0..c {
                data[ch * hw + p] = a[ch] + (b[ch] - a[ch]) * t;
            }
        }
    }

    let n_shapes = rng.range_inclusive(spec.min_shapes as i64, spec.max_shapes as i64);
    for _ in 0..n_shapes {
        let colour = random_colour(&mut rng, c);
        let inside: Box<dyn Fn(i64, i64) -> bool> = if rng.bernoulli(0.5) {
            let w = rng.range_inclusive((si / 8).max(2), si / 2);
            let h = rng.range_inclusive((si / 8).max(2), si / 2);
            let x0 = rng.range_inclusive(0, si - w);
            let y0 = rng.range_inclusive(0, si - h);
            Box::new(move |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
        } else {
            let r = rng.range_inclusive((si / 10).max(2), si / 4);
            let cx = rng.range_inclusive(r, si - 1 - r);
            let cy = rng.range_inclusive(r, si - 1 - r);
            Box::new(move |x, y| (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
        };
        for y in 0..si {
            for x in 0..si {
                if inside(x, y) {
                    let p = (y * si + x) as usize;
                    for ch in 0..c {
                        data[ch * hw + p] = colour[ch];
                    }
                }
            }
        }
    }

    for v in &mut data {
        *v = v.clamp(-1.0, 1.0);
    }
    Image::new(c, s, s, data)
}

pub fn gen_toyshapes(spec: &DatasetSpec) -> Result<Vec<Image>> {
    spec.validate()?;
    (0..spec.count).map(|i| toyshape(spec, i)).collect()
}
