//! im2col + GEMM convolution kernels.
//!
//! Each batch sample is lowered and multiplied on its own, so a sample's
//! output never depends on which other samples share its batch.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn new(x: &[usize], weight: &[usize], bias: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let [n, cin, h, w] = *x else {
            return Err(Error::shape(format!("conv2d input must be [N,C,H,W], got {x:?}")));
        };
        let [cout, wcin, kh, kw] = *weight else {
            return Err(Error::shape(format!(
                "conv2d weight must be [C_out,C_in,k,k], got {weight:?}"
            )));
        };
        if wcin != cin {
            return Err(Error::shape(format!(
                "conv2d C_in: input has {cin} channels, weight expects {wcin}"
            )));
        }
        if kh != kw {
            return Err(Error::shape(format!("conv2d kernel must be square, got {kh}x{kw}")));
        }
        if bias != [cout] {
            return Err(Error::shape(format!(
                "conv2d bias: expected [{cout}], got {bias:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d stride must be >= 1"));
        }
        let k = kh;
        if h + 2 * pad < k {
            return Err(Error::shape(format!(
                "conv2d H: kernel {k} exceeds padded height {}",
                h + 2 * pad
            )));
        }
        if w + 2 * pad < k {
            return Err(Error::shape(format!(
                "conv2d W: kernel {k} exceeds padded width {}",
                w + 2 * pad
            )));
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        Ok(Self {
            n,
            cin,
            h,
            w,
            cout,
            k,
            stride,
            pad,
            ho,
            wo,
        })
    }

    fn patch_len(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn out_pixels(&self) -> usize {
        self.ho * self.wo
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    pub fn out_shape(&self) -> Vec<usize> {
        vec![self.n, self.cout, self.ho, self.wo]
    }
}

/// `c[m,n] = beta * c + a · b` where `a` is `m×k` (or `k×m` if `ta`) and `b` is
/// `k×n` (or `n×k` if `tb`), all row-major and contiguous.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f32], ta: bool, b: &[f32], tb: bool, beta: f32, c: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices cover exactly the strided extents described above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Output columns `ox` whose input column `ox * stride + kj - pad` lies inside `0..w`.
#[inline]
fn valid_cols(g: &ConvGeom, kj: usize) -> (usize, usize) {
    let (s, pad) = (g.stride, g.pad);
    // smallest ox with ox*s + kj >= pad
    let lo = if kj >= pad { 0 } else { (pad - kj).div_ceil(s) };
    // largest ox with ox*s + kj - pad <= w - 1
    let hi = if g.w + pad < kj + 1 {
        0
    } else {
        ((g.w + pad - kj - 1) / s + 1).min(g.wo)
    };
    (lo.min(hi), hi)
}

fn im2col(x: &[f32], g: &ConvGeom, col: &mut [f32]) {
    let p = g.out_pixels();
    let k = g.k;
    for c in 0..g.cin {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut col[((c * k + ki) * k + kj) * p..][..p];
                let (lo, hi) = valid_cols(g, kj);
                for oy in 0..g.ho {
                    let dst = &mut row[oy * g.wo..(oy + 1) * g.wo];
                    let iy = oy * g.stride + ki;
                    if iy < g.pad || iy - g.pad >= g.h {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[(iy - g.pad) * g.w..(iy - g.pad + 1) * g.w];
                    dst[..lo].fill(0.0);
                    dst[hi..].fill(0.0);
                    if lo < hi {
                        let first = lo * g.stride + kj - g.pad;
                        if g.stride == 1 {
                            dst[lo..hi].copy_from_slice(&src[first..first + (hi - lo)]);
                        } else {
                            for (d, s) in dst[lo..hi].iter_mut().zip(src[first..].iter().step_by(g.stride)) {
                                *d = *s;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn col2im_add(col: &[f32], g: &ConvGeom, dx: &mut [f32]) {
    let p = g.out_pixels();
    let k = g.k;
    for c in 0..g.cin {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &col[((c * k + ki) * k + kj) * p..][..p];
                let (lo, hi) = valid_cols(g, kj);
                if lo >= hi {
                    continue;
                }
                let first = lo * g.stride + kj - g.pad;
                for oy in 0..g.ho {
                    let iy = oy * g.stride + ki;
                    if iy < g.pad || iy - g.pad >= g.h {
                        continue;
                    }
                    let dst = &mut plane[(iy - g.pad) * g.w..(iy - g.pad + 1) * g.w];
                    let src = &row[oy * g.wo + lo..oy * g.wo + hi];
                    if g.stride == 1 {
                        for (d, &s) in dst[first..first + src.len()].iter_mut().zip(src) {
                            *d += s;
                        }
                    } else {
                        for (d, &s) in dst[first..].iter_mut().step_by(g.stride).zip(src) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn forward(x: &[f32], weight: &[f32], bias: &[f32], g: &ConvGeom) -> Vec<f32> {
    let (kk, p) = (g.patch_len(), g.out_pixels());
    let in_len = g.cin * g.h * g.w;
    let out_len = g.cout * p;
    let mut out = vec![0.0; g.n * out_len];
    let mut col = if g.is_pointwise() { Vec::new() } else { vec![0.0; kk * p] };
    for s in 0..g.n {
        let xs = &x[s * in_len..(s + 1) * in_len];
        let os = &mut out[s * out_len..(s + 1) * out_len];
        let cols: &[f32] = if g.is_pointwise() {
            xs
        } else {
            im2col(xs, g, &mut col);
            &col
        };
        gemm(g.cout, kk, p, weight, false, cols, false, 0.0, os);
        for (co, &b) in bias.iter().enumerate() {
            for v in &mut os[co * p..(co + 1) * p] {
                *v += b;
            }
        }
    }
    out
}

pub(crate) struct ConvGrads {
    pub dx: Option<Vec<f32>>,
    pub dw: Option<Vec<f32>>,
    pub db: Option<Vec<f32>>,
}

pub(crate) fn backward(
    x: &[f32],
    weight: &[f32],
    dout: &[f32],
    g: &ConvGeom,
    need: (bool, bool, bool),
) -> ConvGrads {
    let (kk, p) = (g.patch_len(), g.out_pixels());
    let in_len = g.cin * g.h * g.w;
    let out_len = g.cout * p;
    let (need_x, need_w, need_b) = need;
    let mut dx = need_x.then(|| vec![0.0; g.n * in_len]);
    let mut dw = need_w.then(|| vec![0.0; weight.len()]);
    let mut db = need_b.then(|| vec![0.0; g.cout]);
    let mut col = vec![0.0; if g.is_pointwise() { 0 } else { kk * p }];
    let mut dcol = vec![0.0; if need_x { kk * p } else { 0 }];

    for s in 0..g.n {
        let ds = &dout[s * out_len..(s + 1) * out_len];
        if let Some(db) = &mut db {
            for (co, acc) in db.iter_mut().enumerate() {
                *acc += ds[co * p..(co + 1) * p].iter().sum::<f32>();
            }
        }
        if let Some(dw) = &mut dw {
            let xs = &x[s * in_len..(s + 1) * in_len];
            let cols: &[f32] = if g.is_pointwise() {
                xs
            } else {
                im2col(xs, g, &mut col);
                &col
            };
            gemm(g.cout, p, kk, ds, false, cols, true, 1.0, dw);
        }
        if let Some(dx) = &mut dx {
            let dxs = &mut dx[s * in_len..(s + 1) * in_len];
            if g.is_pointwise() {
                gemm(kk, g.cout, p, weight, true, ds, false, 1.0, dxs);
            } else {
                gemm(kk, g.cout, p, weight, true, ds, false, 0.0, &mut dcol);
                col2im_add(&dcol, g, dxs);
            }
        }
    }
    ConvGrads { dx, dw, db }
}
