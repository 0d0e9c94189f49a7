//! Define-by-run tape for reverse-mode differentiation.
//!
//! Every op appends a node holding its forward value. Nodes are stored in
//! creation order, so walking the tape backwards from the root visits each
//! node after all of its consumers. Gradients are only materialized for nodes
//! that transitively depend on a parameter.

use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Silu(Var),
    GroupMeanRows(Var, usize),
    GapTemporal(Var),
    ConcatVec(Var, Var),
    ConcatCols(Var, Var),
    Reshape(Var),
    Sum(Var),
    Mse(Var, Var),
    WeightedSum(Vec<(f64, Var)>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
    detached: Vec<Tensor>,
    replay: Vec<Tensor>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape whose `detach` calls return `values` in order instead of the
    /// live input values. Finite-difference checks use it to hold detached
    /// quantities fixed while parameters are perturbed.
    pub fn with_detached_replay(values: Vec<Tensor>) -> Self {
        Self {
            replay: values,
            ..Self::default()
        }
    }

    /// Values produced by `detach` so far, in call order.
    pub fn detached_values(&self) -> &[Tensor] {
        &self.detached
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf; receives a gradient on backward.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward root with respect to `v`.
    ///
    /// `None` for nodes that do not require gradients. A gradient-enabled node
    /// the root does not depend on reports zeros.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        let shape = node.value.shape().to_vec();
        Some(match &node.grad {
            Some(g) => Tensor::new(shape, g.clone()).expect("grad buffer matches value shape"),
            None => Tensor::zeros(&shape),
        })
    }

    /// Clears all gradients so that `backward` may run again.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    // ---- ops -------------------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(Error::dim(
                "matmul",
                format!(
                    "{:?} · {:?}: inner dimensions differ",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let t = Tensor::new(vec![m, n], out)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::MatMul(a, b), rg))
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2("add_row")?;
        if self.value(bias).shape() != [n] {
            return Err(Error::dim(
                "add_row",
                format!(
                    "bias {:?} does not match matrix {:?}",
                    self.value(bias).shape(),
                    [m, n]
                ),
            ));
        }
        let b = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_exact_mut(n) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let t = Tensor::new(vec![m, n], out)?;
        let rg = self.rg(&[x, bias]);
        Ok(self.push(t, Op::AddRow(x, bias), rg))
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(Error::dim(
                op,
                format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("add", a, b, |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    /// `scale · x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let t = self.value(x).map(|v| scale * v + shift);
        let rg = self.rg(&[x]);
        self.push(t, Op::Affine(x, scale), rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.affine(x, c, 0.0)
    }

    /// SiLU activation, `x · sigmoid(x)`.
    pub fn silu(&mut self, x: Var) -> Var {
        let t = self.value(x).map(|v| v * sigmoid(v));
        let rg = self.rg(&[x]);
        self.push(t, Op::Silu(x), rg)
    }

    /// Averages consecutive blocks of `group` rows: `[m×n] → [(m/group)×n]`.
    pub fn group_mean_rows(&mut self, x: Var, group: usize) -> Result<Var> {
        let (m, n) = self.value(x).dims2("group_mean_rows")?;
        if group == 0 || m % group != 0 {
            return Err(Error::dim(
                "group_mean_rows",
                format!("{m} rows cannot be split into groups of {group}"),
            ));
        }
        let out = group_means(self.value(x).data(), m / group, group, n);
        let t = Tensor::new(vec![m / group, n], out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, Op::GroupMeanRows(x, group), rg))
    }

    /// Global average pooling over the clip axis: `[K×d] → [d]`.
    pub fn gap_temporal(&mut self, x: Var) -> Result<Var> {
        let (k, d) = match self.value(x).shape() {
            &[k, d] => (k, d),
            s => {
                return Err(Error::dim(
                    "gap_temporal",
                    format!("expected K×d features, got {s:?}"),
                ))
            }
        };
        let out = group_means(self.value(x).data(), 1, k, d);
        let t = Tensor::new(vec![d], out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, Op::GapTemporal(x), rg))
    }

    /// `[a; b]` for two equal-length vectors.
    pub fn concat_vec(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 1 || tb.rank() != 1 || ta.numel() != tb.numel() {
            return Err(Error::dim(
                "concat_vec",
                format!(
                    "expected equal-length vectors, got {:?} and {:?}",
                    ta.shape(),
                    tb.shape()
                ),
            ));
        }
        let mut data = ta.data().to_vec();
        data.extend_from_slice(tb.data());
        let t = Tensor::vector(data);
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::ConcatVec(a, b), rg))
    }

    /// Row-wise concatenation `[m×p] ++ [m×q] → [m×(p+q)]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, p) = self.value(a).dims2("concat_cols")?;
        let (m2, q) = self.value(b).dims2("concat_cols")?;
        if m != m2 {
            return Err(Error::dim(
                "concat_cols",
                format!("row counts {m} and {m2} differ"),
            ));
        }
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            data.extend_from_slice(&da[i * p..(i + 1) * p]);
            data.extend_from_slice(&db[i * q..(i + 1) * q]);
        }
        let t = Tensor::new(vec![m, p + q], data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::ConcatCols(a, b), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Mean squared error `(1/B) Σ (pred − target)²` between equal-shaped tensors.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if !tp.same_shape(tt) {
            return Err(Error::dim(
                "mse",
                format!("{:?} vs {:?}", tp.shape(), tt.shape()),
            ));
        }
        let n = tp.numel() as f64;
        let s: f64 = tp
            .data()
            .iter()
            .zip(tt.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let rg = self.rg(&[pred, target]);
        Ok(self.push(Tensor::scalar(s / n), Op::Mse(pred, target), rg))
    }

    /// `Σ wᵢ · termᵢ` over scalar terms. An empty list yields a constant zero.
    pub fn weighted_sum(&mut self, terms: &[(f64, Var)]) -> Result<Var> {
        let mut s = 0.0;
        for &(w, v) in terms {
            let t = self.value(v);
            if !t.is_scalar() {
                return Err(Error::dim(
                    "weighted_sum",
                    format!("term has shape {:?}", t.shape()),
                ));
            }
            s += w * t.item();
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.1).collect();
        let rg = self.rg(&vars);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum(terms.to_vec()), rg))
    }

    /// Value-identical leaf that blocks gradient flow.
    pub fn detach(&mut self, x: Var) -> Var {
        let n = self.detached.len();
        let t = match self.replay.get(n) {
            Some(r) if r.same_shape(self.value(x)) => r.clone(),
            _ => self.value(x).clone(),
        };
        self.detached.push(t.clone());
        self.push(t, Op::Leaf, false)
    }

    // ---- reverse pass ----------------------------------------------------

    /// Populates gradients of `root` for every gradient-enabled ancestor.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if !self.nodes[root.0].value.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar root, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        if self.backward_done {
            return Err(Error::State(
                "backward already ran on this tape; call zero_grad first".into(),
            ));
        }
        self.backward_done = true;
        if !self.nodes[root.0].requires_grad {
            return Ok(());
        }
        self.nodes[root.0].grad = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(a).dims2("matmul")?;
                    let n = self.value(b).shape()[1];
                    if self.requires_grad(a) {
                        let mut da = vec![0.0; m * k];
                        matmul_bt_acc(&g, self.value(b).data(), &mut da, m, k, n);
                        self.accumulate(a, da);
                    }
                    if self.requires_grad(b) {
                        let mut db = vec![0.0; k * n];
                        matmul_at_acc(self.value(a).data(), &g, &mut db, m, k, n);
                        self.accumulate(b, db);
                    }
                }
                Op::AddRow(x, bias) => {
                    let n = self.value(bias).numel();
                    if self.requires_grad(bias) {
                        let mut db = vec![0.0; n];
                        for row in g.chunks_exact(n) {
                            for (d, &gv) in db.iter_mut().zip(row) {
                                *d += gv;
                            }
                        }
                        self.accumulate(bias, db);
                    }
                    self.accumulate(x, g.clone());
                }
                Op::Add(a, b) => {
                    self.accumulate(a, g.clone());
                    self.accumulate(b, g.clone());
                }
                Op::Sub(a, b) => {
                    self.accumulate(a, g.clone());
                    self.accumulate(b, g.iter().map(|v| -v).collect());
                }
                Op::Mul(a, b) => {
                    if self.requires_grad(a) {
                        let da = g
                            .iter()
                            .zip(self.value(b).data())
                            .map(|(x, y)| x * y)
                            .collect();
                        self.accumulate(a, da);
                    }
                    if self.requires_grad(b) {
                        let db = g
                            .iter()
                            .zip(self.value(a).data())
                            .map(|(x, y)| x * y)
                            .collect();
                        self.accumulate(b, db);
                    }
                }
                Op::Affine(x, scale) => {
                    self.accumulate(x, g.iter().map(|v| v * scale).collect());
                }
                Op::Silu(x) => {
                    let dx = g
                        .iter()
                        .zip(self.value(x).data())
                        .map(|(gv, &xv)| {
                            let s = sigmoid(xv);
                            gv * s * (1.0 + xv * (1.0 - s))
                        })
                        .collect();
                    self.accumulate(x, dx);
                }
                Op::GroupMeanRows(x, group) => {
                    let n = self.value(x).shape()[1];
                    self.accumulate(x, spread_group_grad(&g, group, n));
                }
                Op::GapTemporal(x) => {
                    let k = self.value(x).shape()[0];
                    let n = g.len();
                    self.accumulate(x, spread_group_grad(&g, k, n));
                }
                Op::ConcatVec(a, b) => {
                    let d = self.value(a).numel();
                    self.accumulate(a, g[..d].to_vec());
                    self.accumulate(b, g[d..].to_vec());
                }
                Op::ConcatCols(a, b) => {
                    let (m, p) = self.value(a).dims2("concat_cols")?;
                    let q = self.value(b).shape()[1];
                    if self.requires_grad(a) {
                        let da = (0..m)
                            .flat_map(|i| g[i * (p + q)..i * (p + q) + p].iter().copied())
                            .collect();
                        self.accumulate(a, da);
                    }
                    if self.requires_grad(b) {
                        let db = (0..m)
                            .flat_map(|i| g[i * (p + q) + p..(i + 1) * (p + q)].iter().copied())
                            .collect();
                        self.accumulate(b, db);
                    }
                }
                Op::Reshape(x) => self.accumulate(x, g.clone()),
                Op::Sum(x) => {
                    let n = self.value(x).numel();
                    self.accumulate(x, vec![g[0]; n]);
                }
                Op::Mse(p, t) => {
                    let n = self.value(p).numel() as f64;
                    let diff: Vec<f64> = self
                        .value(p)
                        .data()
                        .iter()
                        .zip(self.value(t).data())
                        .map(|(a, b)| 2.0 * (a - b) / n * g[0])
                        .collect();
                    if self.requires_grad(t) {
                        self.accumulate(t, diff.iter().map(|v| -v).collect());
                    }
                    self.accumulate(p, diff);
                }
                Op::WeightedSum(terms) => {
                    for (w, v) in terms {
                        self.accumulate(v, vec![w * g[0]]);
                    }
                }
            }
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, contrib: Vec<f64>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(buf) => {
                for (b, c) in buf.iter_mut().zip(contrib) {
                    *b += c;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn group_means(data: &[f64], groups: usize, group: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; groups * n];
    let inv = 1.0 / group as f64;
    for gi in 0..groups {
        let dst = &mut out[gi * n..(gi + 1) * n];
        for r in 0..group {
            let row = &data[(gi * group + r) * n..(gi * group + r + 1) * n];
            for (o, &v) in dst.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in dst.iter_mut() {
            *o *= inv;
        }
    }
    out
}

fn spread_group_grad(g: &[f64], group: usize, n: usize) -> Vec<f64> {
    let inv = 1.0 / group as f64;
    let groups = g.len() / n;
    let mut out = Vec::with_capacity(groups * group * n);
    for gi in 0..groups {
        let row = &g[gi * n..(gi + 1) * n];
        for _ in 0..group {
            out.extend(row.iter().map(|v| v * inv));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn matmul_identity_and_scalar() {
        let mut g = Graph::new();
        let i2 = g.constant(Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = g.constant(Tensor::from_rows(&[&[3.0, 4.0], &[5.0, 6.0]]));
        let c = g.matmul(i2, b).unwrap();
        assert_eq!(g.value(c).data(), &[3.0, 4.0, 5.0, 6.0]);

        let a = g.constant(Tensor::from_rows(&[&[2.0]]));
        let b = g.constant(Tensor::from_rows(&[&[3.0]]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[6.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3] · [2, 3]"), "{err}");
    }

    #[test]
    fn gap_temporal_examples() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_rows(&[&[7.0, 8.0]]));
        let y = g.gap_temporal(x).unwrap();
        assert_eq!(g.value(y).data(), &[7.0, 8.0]);
        let x = g.constant(Tensor::from_rows(&[&[1.0, 3.0], &[3.0, 5.0]]));
        let y = g.gap_temporal(x).unwrap();
        assert_eq!(g.value(y).data(), &[2.0, 4.0]);
        let v = g.constant(Tensor::vector(vec![1.0, 2.0]));
        assert!(g.gap_temporal(v).is_err());
    }

    #[test]
    fn gap_temporal_spreads_inverse_k() {
        let mut g = Graph::new();
        let x = g.param(Tensor::from_rows(&[
            &[1.0, 2.0],
            &[3.0, 4.0],
            &[5.0, 6.0],
            &[7.0, 8.0],
        ]));
        let y = g.gap_temporal(x).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert!(g.grad(x).unwrap().data().iter().all(|&v| close(v, 0.25)));
    }

    #[test]
    fn concat_vec_examples() {
        let mut g = Graph::new();
        let a = g.param(Tensor::vector(vec![1.0]));
        let b = g.param(Tensor::vector(vec![2.0]));
        let c = g.concat_vec(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0]);
        let s = g.sum(c);
        g.backward(s).unwrap();
        assert_eq!(g.grad(a).unwrap().data(), &[1.0]);
        assert_eq!(g.grad(b).unwrap().data(), &[1.0]);

        let z = g.constant(Tensor::vector(vec![0.0, 0.0]));
        let c = g.concat_vec(z, z).unwrap();
        assert_eq!(g.value(c).data(), &[0.0; 4]);

        let short = g.constant(Tensor::vector(vec![0.0]));
        assert!(g.concat_vec(z, short).is_err());
    }

    #[test]
    fn mse_examples() {
        let mut g = Graph::new();
        let p = g.constant(Tensor::vector(vec![1.0, 3.0]));
        let t = g.constant(Tensor::vector(vec![0.0, 0.0]));
        let l = g.mse(p, t).unwrap();
        assert_eq!(g.value(l).item(), 5.0);
        let l0 = g.mse(p, p).unwrap();
        assert_eq!(g.value(l0).item(), 0.0);
        let short = g.constant(Tensor::vector(vec![0.0]));
        assert!(matches!(g.mse(p, short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn backward_square_and_mse() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 6.0);

        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![2.0]));
        let z = g.constant(Tensor::vector(vec![0.0]));
        let l = g.mse(x, z).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_repeat() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert!(matches!(g.backward(s), Err(Error::State(_))));
        g.zero_grad();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn detach_is_bitwise_copy_and_cuts_gradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![0.1, -2.5e-300, f64::MIN_POSITIVE]));
        let d = g.detach(x);
        assert!(!g.requires_grad(d));
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(g.value(d)), bits(g.value(x)));

        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(1.7));
        let d = g.detach(x);
        let sq = g.mul(d, d).unwrap();
        g.backward(sq).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 0.0);
    }

    #[test]
    fn empty_weighted_sum_is_constant_zero() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(2.0));
        let t = g.weighted_sum(&[]).unwrap();
        assert_eq!(g.value(t).item(), 0.0);
        g.backward(t).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 0.0);
    }
}
