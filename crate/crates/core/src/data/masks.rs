//! Hole generators. Every mask uses 1 for a missing pixel.

use std::fmt;
use std::str::FromStr;

use crate::data::Mask;
use crate::error::{Error, Result};
use crate::numerics::Rng;

fn check_dims(h: usize, w: usize) -> Result<()> {
    if h < 8 || w < 8 {
        return Err(Error::invalid(format!("mask dimensions {h}x{w} are below 8x8")));
    }
    Ok(())
}

/// Axis-aligned rectangle covering 10–50% of the image.
pub fn gen_mask_box(rng: &mut Rng, h: usize, w: usize) -> Result<Mask> {
    check_dims(h, w)?;
    let area = h * w;
    let (bh, bw) = loop {
        let bh = rng.range_inclusive(1, h as i64) as usize;
        let bw = rng.range_inclusive(1, w as i64) as usize;
        // 10 * covered in [area, 5 * area] <=> coverage in [0.1, 0.5]
        let c10 = 10 * bh * bw;
        if c10 >= area && c10 <= 5 * area {
            break (bh, bw);
        }
    };
    let y0 = rng.range_inclusive(0, (h - bh) as i64) as usize;
    let x0 = rng.range_inclusive(0, (w - bw) as i64) as usize;
    Mask::from_fn(h, w, |y, x| y >= y0 && y < y0 + bh && x >= x0 && x < x0 + bw)
}

const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Free-form brush strokes: 1–3 random walks, each stamping a disc of radius 1–3.
pub fn gen_mask_stroke(rng: &mut Rng, h: usize, w: usize) -> Result<Mask> {
    check_dims(h, w)?;
    let (hi, wi) = (h as i64, w as i64);
    let mut holes = vec![false; h * w];
    let strokes = rng.range_inclusive(1, 3);
    for _ in 0..strokes {
        let r = rng.range_inclusive(1, 3);
        let mut x = rng.range_inclusive(0, wi - 1);
        let mut y = rng.range_inclusive(0, hi - 1);
        let mut dir = rng.below(8) as usize;
        let steps = rng.range_inclusive(hi.max(wi) / 2, 2 * hi.max(wi));
        for _ in 0..steps {
            for sy in (y - r).max(0)..=(y + r).min(hi - 1) {
                for sx in (x - r).max(0)..=(x + r).min(wi - 1) {
                    if (sx - x).pow(2) + (sy - y).pow(2) <= r * r {
                        holes[(sy * wi + sx) as usize] = true;
                    }
                }
            }
            match rng.below(10) {
                0 | 1 => dir = (dir + 1) % 8,
                2 | 3 => dir = (dir + 7) % 8,
                _ => {}
            }
            let (mut ddx, mut ddy) = DIRS[dir];
            if x + ddx < 0 || x + ddx >= wi {
                ddx = -ddx;
            }
            if y + ddy < 0 || y + ddy >= hi {
                ddy = -ddy;
            }
            if (ddx, ddy) != DIRS[dir] {
                dir = DIRS.iter().position(|&d| d == (ddx, ddy)).unwrap();
            }
            x += ddx;
            y += ddy;
        }
    }
    Mask::from_fn(h, w, |y, x| holes[y * w + x])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfSide {
    Left,
    Right,
    Top,
    Bottom,
}

impl HalfSide {
    pub const ALL: [HalfSide; 4] = [HalfSide::Left, HalfSide::Right, HalfSide::Top, HalfSide::Bottom];
}

/// One half of the image is missing.
pub fn gen_mask_half(h: usize, w: usize, side: HalfSide) -> Result<Mask> {
    check_dims(h, w)?;
    Mask::from_fn(h, w, |y, x| match side {
        HalfSide::Left => x < w / 2,
        HalfSide::Right => x >= w - w / 2,
        HalfSide::Top => y < h / 2,
        HalfSide::Bottom => y >= h - h / 2,
    })
}

/// Each pixel is a hole independently with probability `p`.
pub fn gen_mask_bernoulli(rng: &mut Rng, h: usize, w: usize, p: f32) -> Result<Mask> {
    check_dims(h, w)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("bernoulli p = {p} is outside (0, 1)")));
    }
    let data = (0..h * w)
        .map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 })
        .collect();
    Mask::new(h, w, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaskFamily {
    Box,
    Stroke,
    Half,
    Bernoulli,
}

impl MaskFamily {
    pub const ALL: [MaskFamily; 4] = [
        MaskFamily::Box,
        MaskFamily::Stroke,
        MaskFamily::Half,
        MaskFamily::Bernoulli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MaskFamily::Box => "box",
            MaskFamily::Stroke => "stroke",
            MaskFamily::Half => "half",
            MaskFamily::Bernoulli => "bernoulli",
        }
    }

    /// Draws a mask of this family, randomizing the family's free parameters
    /// (the half's side, the Bernoulli rate in `[0.2, 0.6)`).
    pub fn sample(self, rng: &mut Rng, h: usize, w: usize) -> Result<Mask> {
        match self {
            MaskFamily::Box => gen_mask_box(rng, h, w),
            MaskFamily::Stroke => gen_mask_stroke(rng, h, w),
            MaskFamily::Half => gen_mask_half(h, w, HalfSide::ALL[rng.below(4) as usize]),
            MaskFamily::Bernoulli => {
                let p = rng.uniform_range(0.2, 0.6);
                gen_mask_bernoulli(rng, h, w, p)
            }
        }
    }

    /// Uniformly random family, then a mask from it.
    pub fn sample_any(rng: &mut Rng, h: usize, w: usize) -> Result<Mask> {
        let fam = Self::ALL[rng.below(4) as usize];
        fam.sample(rng, h, w)
    }
}

impl fmt::Display for MaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown mask family {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(m: &Mask) -> bool {
        m.data().iter().all(|&v| v.to_bits() == 0 || v == 1.0)
    }

    #[test]
    fn half_is_exactly_half() {
        for side in HalfSide::ALL {
            let m = gen_mask_half(32, 32, side).unwrap();
            assert_eq!(m.coverage(), 0.5);
        }
        let m = gen_mask_half(32, 32, HalfSide::Left).unwrap();
        assert!(m.is_hole(0, 0) && !m.is_hole(0, 16));
    }

    #[test]
    fn box_coverage_always_in_band() {
        let mut rng = Rng::new(1);
        for (h, w) in [(8, 8), (32, 32), (17, 40)] {
            for _ in 0..300 {
                let m = gen_mask_box(&mut rng, h, w).unwrap();
                let c = m.coverage();
                assert!((0.1..=0.5).contains(&c), "{c}");
                assert!(binary(&m));
            }
        }
    }

    #[test]
    fn bernoulli_coverage_concentrates() {
        let mut rng = Rng::new(2);
        for _ in 0..50 {
            let c = gen_mask_bernoulli(&mut rng, 64, 64, 0.3).unwrap().coverage();
            assert!((0.25..=0.35).contains(&c), "{c}");
        }
        assert!(gen_mask_bernoulli(&mut rng, 64, 64, 0.0).is_err());
        assert!(gen_mask_bernoulli(&mut rng, 64, 64, 1.0).is_err());
    }

    #[test]
    fn strokes_are_nonempty_and_binary() {
        let mut rng = Rng::new(3);
        for _ in 0..100 {
            let m = gen_mask_stroke(&mut rng, 32, 32).unwrap();
            assert!(m.hole_count() > 0);
            assert!(binary(&m));
        }
    }

    #[test]
    fn degenerate_dims_rejected() {
        let mut rng = Rng::new(0);
        assert!(gen_mask_box(&mut rng, 7, 32).is_err());
        assert!(gen_mask_stroke(&mut rng, 32, 4).is_err());
        assert!(gen_mask_half(0, 32, HalfSide::Top).is_err());
        assert!(gen_mask_bernoulli(&mut rng, 5, 5, 0.5).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in MaskFamily::ALL {
            assert_eq!(f.name().parse::<MaskFamily>().unwrap(), f);
        }
        assert!("blob".parse::<MaskFamily>().is_err());
    }
}
