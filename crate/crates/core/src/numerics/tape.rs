//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Forward operations append nodes holding their output value; [`Tape::backward`]
//! walks the nodes in reverse creation order, which is a valid topological order
//! since a node can only reference earlier nodes.

use crate::error::{Error, Result};
use crate::numerics::conv::{self, ConvGeom};
use crate::numerics::{ParamSet, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    Tanh(Var),
    Sigmoid(Var),
    LeakyRelu(Var, f32),
    Abs(Var),
    Softplus(Var),
    UpsampleNearest(Var, usize),
    ConcatChannels(Var, Var),
    SliceChannels(Var, usize),
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
    },
    Mean(Var),
    SumSquares(Var),
    MeanSpatial(Var),
    AddSpatial(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Vars for every tensor of a [`ParamSet`], in the set's order.
#[derive(Clone, Debug)]
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn var(&self, index: usize) -> Var {
        self.vars[index]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn check_finite(t: &Tensor, op: &'static str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

#[inline]
fn softplus(x: f32) -> f32 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool, name: &'static str) -> Result<Var> {
        check_finite(&value, name)?;
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant input; no gradient is tracked for it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    /// Records an input whose gradient will be reported by [`Tape::backward`].
    pub fn input(&mut self, t: Tensor) -> Var {
        self.leaf(t, true)
    }

    fn leaf(&mut self, mut t: Tensor, needs_grad: bool) -> Var {
        t.set_requires_grad(false);
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Copies every parameter onto the tape. With `trainable == false` the
    /// parameters act as constants (used to freeze one network while training
    /// another through it).
    pub fn bind(&mut self, params: &ParamSet, trainable: bool) -> Binding {
        let vars = params
            .iter()
            .map(|(_, t)| self.leaf(t.clone(), trainable))
            .collect();
        Binding { vars }
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(format!("{op}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, name: &'static str, f: impl Fn(f32, f32) -> f32) -> Result<Var> {
        self.same_shape(a, b, name)?;
        let out = self.value(a).zip_map(self.value(b), f)?;
        let ng = self.needs(a) || self.needs(b);
        self.push(out, op, ng, name)
    }

    fn unary(&mut self, a: Var, op: Op, name: &'static str, f: impl Fn(f32) -> f32) -> Result<Var> {
        let out = self.value(a).map(f);
        let ng = self.needs(a);
        self.push(out, op, ng, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Result<Var> {
        self.unary(a, Op::Scale(a, s), "scale", |x| x * s)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Tanh(a), "tanh", f32::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid(a), "sigmoid", sigmoid)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f32) -> Result<Var> {
        self.unary(a, Op::LeakyRelu(a, slope), "leaky_relu", |x| {
            if x > 0.0 {
                x
            } else {
                slope * x
            }
        })
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Abs(a), "abs", f32::abs)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Softplus(a), "softplus", softplus)
    }

    pub fn upsample_nearest(&mut self, a: Var, factor: usize) -> Result<Var> {
        if factor == 0 {
            return Err(Error::invalid("upsample factor must be >= 1"));
        }
        let (n, c, h, w) = self.value(a).dims4()?;
        let (ho, wo) = (h * factor, w * factor);
        let src = self.value(a).data();
        let mut out = vec![0.0; n * c * ho * wo];
        for p in 0..n * c {
            let s = &src[p * h * w..(p + 1) * h * w];
            let d = &mut out[p * ho * wo..(p + 1) * ho * wo];
            for y in 0..ho {
                let row = &s[(y / factor) * w..(y / factor + 1) * w];
                for (x, v) in d[y * wo..(y + 1) * wo].iter_mut().enumerate() {
                    *v = row[x / factor];
                }
            }
        }
        let t = Tensor::new(vec![n, c, ho, wo], out)?;
        let ng = self.needs(a);
        self.push(t, Op::UpsampleNearest(a, factor), ng, "upsample_nearest")
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ca, ha, wa) = self.value(a).dims4()?;
        let (nb, cb, hb, wb) = self.value(b).dims4()?;
        if na != nb {
            return Err(Error::shape(format!("concat_channels: batch {na} vs {nb}")));
        }
        if (ha, wa) != (hb, wb) {
            return Err(Error::shape(format!(
                "concat_channels: spatial {ha}x{wa} vs {hb}x{wb}"
            )));
        }
        let (pa, pb) = (ca * ha * wa, cb * hb * wb);
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(na * (pa + pb));
        for s in 0..na {
            out.extend_from_slice(&da[s * pa..(s + 1) * pa]);
            out.extend_from_slice(&db[s * pb..(s + 1) * pb]);
        }
        let t = Tensor::new(vec![na, ca + cb, ha, wa], out)?;
        let ng = self.needs(a) || self.needs(b);
        self.push(t, Op::ConcatChannels(a, b), ng, "concat_channels")
    }

    /// Channels `start..start + len` of a `[N,C,H,W]` value.
    pub fn slice_channels(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(a).dims4()?;
        if len == 0 || start + len > c {
            return Err(Error::shape(format!(
                "slice_channels: {start}..{} outside {c} channels",
                start + len
            )));
        }
        let hw = h * w;
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(n * len * hw);
        for s in 0..n {
            out.extend_from_slice(&src[(s * c + start) * hw..(s * c + start + len) * hw]);
        }
        let t = Tensor::new(vec![n, len, h, w], out)?;
        let ng = self.needs(a);
        self.push(t, Op::SliceChannels(a, start), ng, "slice_channels")
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let geom = ConvGeom::new(
            self.value(x).shape(),
            self.value(w).shape(),
            self.value(b).shape(),
            stride,
            pad,
        )?;
        let out = conv::forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &geom,
        );
        let t = Tensor::new(geom.out_shape(), out)?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(t, Op::Conv2d { x, w, b, geom }, ng, "conv2d")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let d = self.value(a).data();
        let m = (d.iter().map(|&v| f64::from(v)).sum::<f64>() / d.len() as f64) as f32;
        let ng = self.needs(a);
        self.push(Tensor::scalar(m), Op::Mean(a), ng, "mean")
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let s = self
            .value(a)
            .data()
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>() as f32;
        let ng = self.needs(a);
        self.push(Tensor::scalar(s), Op::SumSquares(a), ng, "sum_squares")
    }

    /// Spatial average: `[N,C,H,W] -> [N,C,1,1]`.
    pub fn mean_spatial(&mut self, a: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(a).dims4()?;
        let hw = h * w;
        let out = self
            .value(a)
            .data()
            .chunks_exact(hw)
            .map(|p| (p.iter().map(|&v| f64::from(v)).sum::<f64>() / hw as f64) as f32)
            .collect();
        let t = Tensor::new(vec![n, c, 1, 1], out)?;
        let ng = self.needs(a);
        self.push(t, Op::MeanSpatial(a), ng, "mean_spatial")
    }

    /// `x[n,c,:,:] + g[n,c]`: adds a `[N,C,1,1]` value at every spatial position.
    pub fn add_spatial(&mut self, x: Var, g: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if self.value(g).shape() != [n, c, 1, 1] {
            return Err(Error::shape(format!(
                "add_spatial: expected [{n},{c},1,1], got {:?}",
                self.value(g).shape()
            )));
        }
        let hw = h * w;
        let gv = self.value(g).data();
        let mut out = self.value(x).data().to_vec();
        for (p, plane) in out.chunks_exact_mut(hw).enumerate() {
            plane.iter_mut().for_each(|v| *v += gv[p]);
        }
        let t = Tensor::new(vec![n, c, h, w], out)?;
        let ng = self.needs(x) || self.needs(g);
        self.push(t, Op::AddSpatial(x, g), ng, "add_spatial")
    }

    /// Gradients of the scalar `loss` with respect to every value on the tape
    /// that was recorded with gradient tracking.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        // Only leaves keep a gradient; intermediate buffers were consumed above.
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let mut acc = |v: Var, f: &dyn Fn(&mut [f32])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let buf = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
            f(buf);
        };
        let y = node.value.data();
        match node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(a, &|d| d.iter_mut().zip(g).for_each(|(d, &g)| *d += g));
                acc(b, &|d| d.iter_mut().zip(g).for_each(|(d, &g)| *d += g));
            }
            Op::Sub(a, b) => {
                acc(a, &|d| d.iter_mut().zip(g).for_each(|(d, &g)| *d += g));
                acc(b, &|d| d.iter_mut().zip(g).for_each(|(d, &g)| *d -= g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                acc(a, &|d| {
                    for ((d, &g), &o) in d.iter_mut().zip(g).zip(vb) {
                        *d += g * o;
                    }
                });
                acc(b, &|d| {
                    for ((d, &g), &o) in d.iter_mut().zip(g).zip(va) {
                        *d += g * o;
                    }
                });
            }
            Op::Scale(a, s) => acc(a, &|d| d.iter_mut().zip(g).for_each(|(d, &g)| *d += g * s)),
            Op::Tanh(a) => acc(a, &|d| {
                for ((d, &g), &y) in d.iter_mut().zip(g).zip(y) {
                    *d += g * (1.0 - y * y);
                }
            }),
            Op::Sigmoid(a) => acc(a, &|d| {
                for ((d, &g), &y) in d.iter_mut().zip(g).zip(y) {
                    *d += g * y * (1.0 - y);
                }
            }),
            Op::LeakyRelu(a, slope) => {
                let x = self.value(a).data();
                acc(a, &|d| {
                    for ((d, &g), &x) in d.iter_mut().zip(g).zip(x) {
                        *d += if x > 0.0 { g } else { g * slope };
                    }
                })
            }
            Op::Abs(a) => {
                let x = self.value(a).data();
                acc(a, &|d| {
                    for ((d, &g), &x) in d.iter_mut().zip(g).zip(x) {
                        if x > 0.0 {
                            *d += g;
                        } else if x < 0.0 {
                            *d -= g;
                        }
                    }
                })
            }
            Op::Softplus(a) => {
                let x = self.value(a).data();
                acc(a, &|d| {
                    for ((d, &g), &x) in d.iter_mut().zip(g).zip(x) {
                        *d += g * sigmoid(x);
                    }
                })
            }
            Op::UpsampleNearest(a, f) => {
                let (n, c, h, w) = self.value(a).dims4().expect("recorded as 4-d");
                let (ho, wo) = (h * f, w * f);
                acc(a, &|d| {
                    for p in 0..n * c {
                        let gs = &g[p * ho * wo..(p + 1) * ho * wo];
                        let ds = &mut d[p * h * w..(p + 1) * h * w];
                        for y in 0..ho {
                            for x in 0..wo {
                                ds[(y / f) * w + x / f] += gs[y * wo + x];
                            }
                        }
                    }
                })
            }
            Op::ConcatChannels(a, b) => {
                let (n, _, _, _) = node.value.dims4().expect("recorded as 4-d");
                let pa = self.value(a).numel() / n;
                let pb = self.value(b).numel() / n;
                acc(a, &|d| {
                    for s in 0..n {
                        let src = &g[s * (pa + pb)..s * (pa + pb) + pa];
                        d[s * pa..(s + 1) * pa].iter_mut().zip(src).for_each(|(d, &g)| *d += g);
                    }
                });
                acc(b, &|d| {
                    for s in 0..n {
                        let src = &g[s * (pa + pb) + pa..(s + 1) * (pa + pb)];
                        d[s * pb..(s + 1) * pb].iter_mut().zip(src).for_each(|(d, &g)| *d += g);
                    }
                });
            }
            Op::SliceChannels(a, start) => {
                let (n, c, h, w) = self.value(a).dims4().expect("recorded as 4-d");
                let len = node.value.shape()[1];
                let hw = h * w;
                acc(a, &|d| {
                    for s in 0..n {
                        let dst = &mut d[(s * c + start) * hw..(s * c + start + len) * hw];
                        let src = &g[s * len * hw..(s + 1) * len * hw];
                        dst.iter_mut().zip(src).for_each(|(d, &g)| *d += g);
                    }
                });
            }
            Op::Conv2d { x, w, b, geom } => {
                let cg = conv::backward(
                    self.value(x).data(),
                    self.value(w).data(),
                    g,
                    &geom,
                    (self.needs(x), self.needs(w), self.needs(b)),
                );
                for (v, part) in [(x, cg.dx), (w, cg.dw), (b, cg.db)] {
                    if let Some(part) = part {
                        acc(v, &|d| d.iter_mut().zip(&part).for_each(|(d, &p)| *d += p));
                    }
                }
            }
            Op::Mean(a) => {
                let scale = g[0] / self.value(a).numel() as f32;
                acc(a, &|d| d.iter_mut().for_each(|d| *d += scale));
            }
            Op::SumSquares(a) => {
                let x = self.value(a).data();
                acc(a, &|d| {
                    for (d, &x) in d.iter_mut().zip(x) {
                        *d += 2.0 * x * g[0];
                    }
                })
            }
            Op::MeanSpatial(a) => {
                let (_, _, h, w) = self.value(a).dims4().expect("recorded as 4-d");
                let hw = h * w;
                let inv = 1.0 / hw as f32;
                acc(a, &|d| {
                    for (p, plane) in d.chunks_exact_mut(hw).enumerate() {
                        let gp = g[p] * inv;
                        plane.iter_mut().for_each(|d| *d += gp);
                    }
                })
            }
            Op::AddSpatial(x, gv) => {
                acc(x, &|d| d.iter_mut().zip(g).for_each(|(d, &g)| *d += g));
                let hw = node.value.numel() / self.value(gv).numel();
                acc(gv, &|d| {
                    for (d, plane) in d.iter_mut().zip(g.chunks_exact(hw)) {
                        *d += plane.iter().sum::<f32>();
                    }
                });
            }
        }
    }
}

/// Result of [`Tape::backward`]: one optional buffer per tape value.
pub struct Gradients {
    grads: Vec<Option<Vec<f32>>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` if `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&[f32]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradients of a bound parameter set into the parameters' own
    /// `grad` buffers. Parameters unreachable from the loss are left untouched.
    pub fn accumulate_into(&self, binding: &Binding, params: &mut ParamSet) -> Result<()> {
        if binding.vars.len() != params.len() {
            return Err(Error::shape(format!(
                "binding has {} vars, parameter set has {} tensors",
                binding.vars.len(),
                params.len()
            )));
        }
        for (i, &v) in binding.vars.iter().enumerate() {
            if let Some(g) = self.get(v) {
                let t = params.tensor_mut(i);
                if g.len() != t.numel() {
                    return Err(Error::shape("gradient/parameter size mismatch"));
                }
                t.accumulate_grad(g);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn sum_squares_gradient() {
        let mut params = ParamSet::new();
        params.push("p", t(&[2], &[1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let b = tape.bind(&params, true);
        let loss = tape.sum_squares(b.var(0)).unwrap();
        assert_eq!(tape.value(loss).item(), 5.0);
        let g = tape.backward(loss).unwrap();
        g.accumulate_into(&b, &mut params).unwrap();
        assert_eq!(params.tensor(0).grad().unwrap(), &[2.0, 4.0]);

        // A second backward without zeroing accumulates.
        let g = tape.backward(loss).unwrap();
        g.accumulate_into(&b, &mut params).unwrap();
        assert_eq!(params.tensor(0).grad().unwrap(), &[4.0, 8.0]);
        params.zero_grad();
        assert_eq!(params.tensor(0).grad().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn unreachable_parameter_keeps_zero_grad() {
        let mut params = ParamSet::new();
        params.push("used", t(&[2], &[1.0, 2.0])).unwrap();
        params.push("unused", t(&[3], &[1.0, 1.0, 1.0])).unwrap();
        let mut tape = Tape::new();
        let b = tape.bind(&params, true);
        let loss = tape.mean(b.var(0)).unwrap();
        tape.backward(loss).unwrap().accumulate_into(&b, &mut params).unwrap();
        assert_eq!(params.tensor(1).grad().unwrap(), &[0.0; 3]);
        assert_eq!(params.tensor(0).grad().unwrap(), &[0.5, 0.5]);
    }

    #[test]
    fn frozen_binding_gets_no_gradient() {
        let mut params = ParamSet::new();
        params.push("p", t(&[2], &[1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let b = tape.bind(&params, false);
        let loss = tape.sum_squares(b.var(0)).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!(g.get(b.var(0)).is_none());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2], &[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Shape(_))));
    }

    #[test]
    fn conv_hand_examples() {
        let mut tape = Tape::new();
        // Identity 1x1 kernel.
        let x = tape.constant(t(&[1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
        let w = tape.constant(t(&[1, 1, 1, 1], &[1.0]));
        let b = tape.constant(t(&[1], &[0.0]));
        let y = tape.conv2d(x, w, b, 1, 0).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());

        // Diagonal 2x2 kernel on [[1,2],[3,4]] -> 1 + 4.
        let x = tape.constant(t(&[1, 1, 2, 2], &[1., 2., 3., 4.]));
        let w = tape.constant(t(&[1, 1, 2, 2], &[1., 0., 0., 1.]));
        let y = tape.conv2d(x, w, b, 1, 0).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 1, 1]);
        assert_eq!(tape.value(y).data(), &[5.0]);
    }

    #[test]
    fn conv_channel_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 2, 4, 4]).unwrap());
        let w = tape.constant(Tensor::zeros(&[1, 3, 3, 3]).unwrap());
        let b = tape.constant(Tensor::zeros(&[1]).unwrap());
        let err = tape.conv2d(x, w, b, 1, 1).unwrap_err();
        assert!(err.to_string().contains("C_in"));
    }

    #[test]
    fn concat_shapes_and_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[1, 3, 8, 8]).unwrap());
        let b = tape.constant(Tensor::full(&[1, 3, 8, 8], 1.0).unwrap());
        let c = tape.concat_channels(a, b).unwrap();
        assert_eq!(tape.value(c).shape(), &[1, 6, 8, 8]);
        let d = tape.constant(Tensor::zeros(&[1, 3, 8, 7]).unwrap());
        assert!(tape.concat_channels(a, d).is_err());
    }

    #[test]
    fn elementwise_definitions() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[3], &[-1.0, 0.0, 2.0]));
        let y = tape.leaky_relu(x, 0.2).unwrap();
        assert_eq!(tape.value(y).data(), &[-0.2, 0.0, 2.0]);
        let big = tape.constant(t(&[4], &[-1e4, -3.0, 3.0, 1e4]));
        let th = tape.tanh(big).unwrap();
        assert!(tape.value(th).data().iter().all(|v| (-1.0..=1.0).contains(v)));
        let sp = tape.softplus(big).unwrap();
        let v = tape.value(sp).data();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[3], 1e4);
        let sg = tape.sigmoid(big).unwrap();
        assert_eq!(tape.value(sg).data()[0], 0.0);
        assert_eq!(tape.value(sg).data()[3], 1.0);
    }

    #[test]
    fn upsample_repeats_pixels() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 1, 1, 2], &[1.0, 2.0]));
        let y = tape.upsample_nearest(x, 2).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 2, 4]);
        assert_eq!(tape.value(y).data(), &[1., 1., 2., 2., 1., 1., 2., 2.]);
    }

    #[test]
    fn non_finite_results_are_errors() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1], &[f32::MAX]));
        let err = tape.scale(x, 10.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite("scale")));
    }
}
