//! Reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] on a scalar node walks the record in reverse and
//! returns exact gradients for every parameter that was read.

use super::{Gradients, ParamId, ParamStore, Tensor};

/// Node handle on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    ParamRows(ParamId, Vec<usize>),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    ScaleBy(Var, Var),
    ScaleConst(Var, f64),
    Gelu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    MaxRows(Var, Vec<usize>),
    MeanRows(Var),
    CrossEntropy {
        logits: Var,
        target: Vec<f64>,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`].
pub struct Backward {
    pub params: Gradients,
    nodes: Vec<Option<Tensor>>,
}

impl Backward {
    /// Gradient with respect to any node, `None` if the loss does not
    /// depend on it.
    pub fn of(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].as_ref()
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.get(id).clone();
        self.push(value, Op::Param(id))
    }

    /// Rows of a parameter matrix, as for an embedding lookup.
    pub fn param_rows(&mut self, id: ParamId, rows: &[usize]) -> Var {
        let table = self.params.get(id);
        let mut out = Tensor::zeros(rows.len(), table.cols());
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(table.row(r));
        }
        self.push(out, Op::ParamRows(id, rows.to_vec()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// `a * b^T`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_bt(self.value(b));
        self.push(value, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        self.push(value, Op::Add(a, b))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows(), 1, "add_row expects a single row");
        assert_eq!(r.cols(), self.value(a).cols(), "add_row width mismatch");
        let mut value = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..value.rows() {
            for (x, b) in value.row_mut(i).iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.push(value, Op::AddRow(a, row))
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: Var, w: ParamId, b: ParamId) -> Var {
        let w = self.param(w);
        let b = self.param(b);
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    /// Multiplies `a` by the `1 x 1` node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Var {
        let sv = self.value(s);
        assert_eq!(sv.shape(), (1, 1), "scale_by expects a scalar");
        let k = sv.get(0, 0);
        let mut value = self.value(a).clone();
        value.scale_assign(k);
        self.push(value, Op::ScaleBy(a, s))
    }

    pub fn scale_const(&mut self, a: Var, k: f64) -> Var {
        let mut value = self.value(a).clone();
        value.scale_assign(k);
        self.push(value, Op::ScaleConst(a, k))
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for x in value.data_mut() {
            *x = gelu(*x);
        }
        self.push(value, Op::Gelu(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        self.push(value, Op::Softmax(a))
    }

    /// Row-wise layer normalization with affine `gamma`, `beta` (`1 x c`).
    pub fn layer_norm(&mut self, x: Var, gamma: ParamId, beta: ParamId, eps: f64) -> Var {
        let gamma = self.param(gamma);
        let beta = self.param(beta);
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let mut xhat = Tensor::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
        }
        let g = self.value(gamma).data().to_vec();
        let b = self.value(beta).data().to_vec();
        let mut value = xhat.clone();
        for r in 0..rows {
            for (c, o) in value.row_mut(r).iter_mut().enumerate() {
                *o = *o * g[c] + b[c];
            }
        }
        self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows(), rows, "concat_cols row mismatch");
                value.row_mut(r)[off..off + pv.cols()].copy_from_slice(pv.row(r));
                off += pv.cols();
            }
        }
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.cols(), cols, "concat_rows column mismatch");
            data.extend_from_slice(pv.data());
            rows += pv.rows();
        }
        self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        assert!(start + len <= av.cols());
        let mut value = Tensor::zeros(av.rows(), len);
        for r in 0..av.rows() {
            value.row_mut(r).copy_from_slice(&av.row(r)[start..start + len]);
        }
        self.push(value, Op::SliceCols(a, start))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let av = self.value(a);
        let mut value = Tensor::zeros(rows.len(), av.cols());
        for (i, &r) in rows.iter().enumerate() {
            value.row_mut(i).copy_from_slice(av.row(r));
        }
        self.push(value, Op::GatherRows(a, rows.to_vec()))
    }

    /// Column-wise maximum over rows, giving a `1 x c` node. Ties resolve
    /// to the lowest row.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        assert!(av.rows() > 0, "max over zero rows");
        let mut value = av.row(0).to_vec();
        let mut arg = vec![0; av.cols()];
        for r in 1..av.rows() {
            for (c, v) in av.row(r).iter().enumerate() {
                if *v > value[c] {
                    value[c] = *v;
                    arg[c] = r;
                }
            }
        }
        self.push(Tensor::row_vector(value), Op::MaxRows(a, arg))
    }

    /// Column-wise mean over rows.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        assert!(av.rows() > 0, "mean over zero rows");
        let mut value = vec![0.0; av.cols()];
        for r in 0..av.rows() {
            for (o, v) in value.iter_mut().zip(av.row(r)) {
                *o += v;
            }
        }
        let n = av.rows() as f64;
        for o in &mut value {
            *o /= n;
        }
        self.push(Tensor::row_vector(value), Op::MeanRows(a))
    }

    /// `-sum_i target_i * log softmax(logits)_i` for a `1 x m` logit row.
    pub fn cross_entropy(&mut self, logits: Var, target: &[f64]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows(), 1);
        assert_eq!(lv.cols(), target.len());
        let mut probs = lv.data().to_vec();
        softmax_in_place(&mut probs);
        let loss = cross_entropy_value(lv.data(), target);
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                target: target.to_vec(),
                probs,
            },
        )
    }

    /// Back-propagates from `root`, seeding its gradient with ones.
    pub fn backward(&self, root: Var) -> Backward {
        let seed = {
            let v = self.value(root);
            Tensor::filled(v.rows(), v.cols(), 1.0)
        };
        self.backward_with(root, seed)
    }

    pub fn backward_with(&self, root: Var, seed: Tensor) -> Backward {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut params = self.params.zero_grads();
        grads[root.0] = Some(seed);

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads, &mut params);
            grads[idx] = Some(g);
        }
        Backward { params, nodes: grads }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>], params: &mut Gradients) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Input => {}
            Op::Param(id) => params.get_mut(*id).add_assign(g),
            Op::ParamRows(id, rows) => {
                let pg = params.get_mut(*id);
                for (i, &r) in rows.iter().enumerate() {
                    for (a, b) in pg.row_mut(r).iter_mut().zip(g.row(i)) {
                        *a += b;
                    }
                }
            }
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.matmul_bt(self.value(*b)));
                accumulate(grads, *b, self.value(*a).matmul_at(g));
            }
            Op::MatMulBt(a, b) => {
                // out = a b^T: da = g b, db = g^T a
                accumulate(grads, *a, g.matmul(self.value(*b)));
                accumulate(grads, *b, g.matmul_at(self.value(*a)));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, row) => {
                accumulate(grads, *row, column_sums(g));
                accumulate(grads, *a, g.clone());
            }
            Op::ScaleBy(a, s) => {
                let k = self.value(*s).get(0, 0);
                let dot: f64 = g.data().iter().zip(self.value(*a).data()).map(|(x, y)| x * y).sum();
                accumulate(grads, *s, Tensor::scalar(dot));
                let mut ga = g.clone();
                ga.scale_assign(k);
                accumulate(grads, *a, ga);
            }
            Op::ScaleConst(a, k) => {
                let mut ga = g.clone();
                ga.scale_assign(*k);
                accumulate(grads, *a, ga);
            }
            Op::Gelu(a) => {
                let mut ga = g.clone();
                for (d, x) in ga.data_mut().iter_mut().zip(self.value(*a).data()) {
                    *d *= gelu_derivative(*x);
                }
                accumulate(grads, *a, ga);
            }
            Op::Softmax(a) => {
                let p = &node.value;
                let mut ga = g.clone();
                for r in 0..p.rows() {
                    let pr = p.row(r);
                    let dot: f64 = ga.row(r).iter().zip(pr).map(|(x, y)| x * y).sum();
                    for (d, pv) in ga.row_mut(r).iter_mut().zip(pr) {
                        *d = pv * (*d - dot);
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gamma).data();
                let (rows, cols) = xhat.shape();
                let mut dgamma = Tensor::zeros(1, cols);
                let mut dbeta = Tensor::zeros(1, cols);
                let mut dx = Tensor::zeros(rows, cols);
                let n = cols as f64;
                let mut dxhat = vec![0.0; cols];
                for r in 0..rows {
                    let gr = g.row(r);
                    let xr = xhat.row(r);
                    let mut sum_d = 0.0;
                    let mut sum_dx = 0.0;
                    for c in 0..cols {
                        dgamma.data_mut()[c] += gr[c] * xr[c];
                        dbeta.data_mut()[c] += gr[c];
                        dxhat[c] = gr[c] * gv[c];
                        sum_d += dxhat[c];
                        sum_dx += dxhat[c] * xr[c];
                    }
                    let is = inv_std[r];
                    for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                        *o = is / n * (n * dxhat[c] - sum_d - xr[c] * sum_dx);
                    }
                }
                accumulate(grads, *gamma, dgamma);
                accumulate(grads, *beta, dbeta);
                accumulate(grads, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    let mut gp = Tensor::zeros(g.rows(), pc);
                    for r in 0..g.rows() {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + pc]);
                    }
                    off += pc;
                    accumulate(grads, p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (pr, pc) = self.value(p).shape();
                    let gp = Tensor::from_vec(pr, pc, g.data()[off * pc..(off + pr) * pc].to_vec());
                    off += pr;
                    accumulate(grads, p, gp);
                }
            }
            Op::SliceCols(a, start) => {
                let (ar, ac) = self.value(*a).shape();
                let mut ga = Tensor::zeros(ar, ac);
                for r in 0..ar {
                    ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                accumulate(grads, *a, ga);
            }
            Op::GatherRows(a, rows) => {
                let (ar, ac) = self.value(*a).shape();
                let mut ga = Tensor::zeros(ar, ac);
                for (i, &r) in rows.iter().enumerate() {
                    for (d, s) in ga.row_mut(r).iter_mut().zip(g.row(i)) {
                        *d += s;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::MaxRows(a, arg) => {
                let (ar, ac) = self.value(*a).shape();
                let mut ga = Tensor::zeros(ar, ac);
                for (c, &r) in arg.iter().enumerate() {
                    ga.set(r, c, g.get(0, c));
                }
                accumulate(grads, *a, ga);
            }
            Op::MeanRows(a) => {
                let (ar, ac) = self.value(*a).shape();
                let mut ga = Tensor::zeros(ar, ac);
                let inv = 1.0 / ar as f64;
                for r in 0..ar {
                    for (d, s) in ga.row_mut(r).iter_mut().zip(g.row(0)) {
                        *d = s * inv;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::CrossEntropy { logits, target, probs } => {
                let k = g.get(0, 0);
                let total: f64 = target.iter().sum();
                let gl = probs.iter().zip(target).map(|(p, t)| k * (p * total - t)).collect();
                accumulate(grads, *logits, Tensor::row_vector(gl));
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut out = vec![0.0; g.cols()];
    for r in 0..g.rows() {
        for (o, v) in out.iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    Tensor::row_vector(out)
}

pub fn gelu(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub fn gelu_derivative(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `-sum_i t_i log softmax(z)_i`, computed with a stable log-sum-exp.
pub fn cross_entropy_value(logits: &[f64], target: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    target
        .iter()
        .zip(logits)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, z)| t * (lse - z))
        .sum()
}
