//! Minimal reverse-mode differentiation over dense row-major matrices.
//!
//! Only the operations the sparse graph transformer needs are provided. The
//! graph-shaped ones (gather, scatter-add, segment softmax) take explicit
//! row index lists so message passing never densifies the adjacency.

use serde::{Deserialize, Serialize};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`
    fn matmul_bt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols);
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    /// `selfᵀ · other`
    fn matmul_at(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, bv) in orow.iter_mut().zip(b) {
                    *o += av * bv;
                }
            }
        }
        out
    }

    fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn col_sums(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, v) in out.data.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Max,
    Min,
    Mean,
    Std,
}

const LAYER_NORM_EPS: f64 = 1e-5;
const STD_EPS: f64 = 1e-8;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    Concat(Vec<Var>),
    Broadcast(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    HeadDot(Var, Var, usize),
    SegmentSoftmax(Var, Vec<usize>),
    HeadScale(Var, Var),
    Pool(Var, Reduce, Vec<usize>),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        weight: f64,
        probs: Matrix,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Records a computation for later differentiation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((x.rows, x.cols), (y.rows, y.cols), "add shape mismatch");
        let mut v = x.clone();
        v.add_assign(y);
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let x = self.value(a);
        let b = self.value(bias);
        assert_eq!((b.rows, b.cols), (1, x.cols), "bias shape mismatch");
        let mut v = x.clone();
        for r in 0..v.rows {
            for (o, bv) in v.row_mut(r).iter_mut().zip(&b.data) {
                *o += bv;
            }
        }
        self.push(v, Op::AddRow(a, bias))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((x.rows, x.cols), (y.rows, y.cols), "mul shape mismatch");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let v = Matrix::from_vec(x.rows, x.cols, data);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let x = self.value(a);
        let v = Matrix::from_vec(x.rows, x.cols, x.data.iter().map(|p| p * s).collect());
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Matrix::from_vec(x.rows, x.cols, x.data.iter().map(|p| p.max(0.0)).collect());
        self.push(v, Op::Relu(a))
    }

    /// `out[r] = a[idx[r]]`
    pub fn gather(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let x = self.value(a);
        let mut v = Matrix::zeros(idx.len(), x.cols);
        for (r, &i) in idx.iter().enumerate() {
            v.row_mut(r).copy_from_slice(x.row(i));
        }
        self.push(v, Op::Gather(a, idx))
    }

    /// `out[idx[r]] += a[r]`, with `rows` output rows.
    pub fn scatter_add(&mut self, a: Var, idx: Vec<usize>, rows: usize) -> Var {
        let x = self.value(a);
        assert_eq!(idx.len(), x.rows);
        let mut v = Matrix::zeros(rows, x.cols);
        for (r, &i) in idx.iter().enumerate() {
            for (o, p) in v.row_mut(i).iter_mut().zip(x.row(r)) {
                *o += p;
            }
        }
        self.push(v, Op::ScatterAdd(a, idx))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let x = self.value(p);
            assert_eq!(x.rows, rows, "concat row mismatch");
            for r in 0..rows {
                v.data[r * cols + off..r * cols + off + x.cols].copy_from_slice(x.row(r));
            }
            off += x.cols;
        }
        self.push(v, Op::Concat(parts.to_vec()))
    }

    /// Repeats a `1 x c` row `rows` times.
    pub fn broadcast(&mut self, a: Var, rows: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.rows, 1);
        let mut v = Matrix::zeros(rows, x.cols);
        for r in 0..rows {
            v.row_mut(r).copy_from_slice(&x.data);
        }
        self.push(v, Op::Broadcast(a))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gamma), self.value(beta));
        let d = xv.cols;
        let mut xhat = Matrix::zeros(xv.rows, d);
        let mut inv_std = Vec::with_capacity(xv.rows);
        let mut out = Matrix::zeros(xv.rows, d);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for c in 0..d {
                let h = (row[c] - mean) * is;
                xhat.data[r * d + c] = h;
                out.data[r * d + c] = h * g.data[c] + b.data[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Per-head dot products: `out[e, h] = Σ_{d in head h} a[e, d] b[e, d]`.
    pub fn head_dot(&mut self, a: Var, b: Var, heads: usize) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((x.rows, x.cols), (y.rows, y.cols));
        let hd = x.cols / heads;
        let mut v = Matrix::zeros(x.rows, heads);
        for r in 0..x.rows {
            let (xr, yr) = (x.row(r), y.row(r));
            for h in 0..heads {
                v.data[r * heads + h] = (h * hd..(h + 1) * hd).map(|c| xr[c] * yr[c]).sum();
            }
        }
        self.push(v, Op::HeadDot(a, b, heads))
    }

    /// Softmax over rows sharing the same segment id, column by column.
    pub fn segment_softmax(&mut self, a: Var, segments: Vec<usize>, num_segments: usize) -> Var {
        let x = self.value(a);
        let c = x.cols;
        let mut maxes = vec![f64::NEG_INFINITY; num_segments * c];
        for (r, &s) in segments.iter().enumerate() {
            for k in 0..c {
                maxes[s * c + k] = maxes[s * c + k].max(x.get(r, k));
            }
        }
        let mut v = Matrix::zeros(x.rows, c);
        let mut sums = vec![0.0; num_segments * c];
        for (r, &s) in segments.iter().enumerate() {
            for k in 0..c {
                let e = (x.get(r, k) - maxes[s * c + k]).exp();
                v.data[r * c + k] = e;
                sums[s * c + k] += e;
            }
        }
        for (r, &s) in segments.iter().enumerate() {
            for k in 0..c {
                v.data[r * c + k] /= sums[s * c + k];
            }
        }
        self.push(v, Op::SegmentSoftmax(a, segments))
    }

    /// `out[e, d] = weights[e, head(d)] · values[e, d]`
    pub fn head_scale(&mut self, weights: Var, values: Var) -> Var {
        let (w, x) = (self.value(weights), self.value(values));
        assert_eq!(w.rows, x.rows);
        let heads = w.cols;
        let hd = x.cols / heads;
        let mut v = x.clone();
        for r in 0..x.rows {
            for d in 0..x.cols {
                v.data[r * x.cols + d] *= w.data[r * heads + d / hd];
            }
        }
        self.push(v, Op::HeadScale(weights, values))
    }

    /// Column-wise reduction to a `1 x c` row. Empty inputs reduce to zeros.
    pub fn pool(&mut self, a: Var, reduce: Reduce) -> Var {
        let x = self.value(a);
        let (n, c) = (x.rows, x.cols);
        let mut v = Matrix::zeros(1, c);
        let mut arg = vec![0usize; c];
        if n > 0 {
            for k in 0..c {
                let col = (0..n).map(|r| x.get(r, k));
                v.data[k] = match reduce {
                    Reduce::Max | Reduce::Min => {
                        let better = |cand: f64, best: f64| {
                            if reduce == Reduce::Max {
                                cand > best
                            } else {
                                cand < best
                            }
                        };
                        let mut best = x.get(0, k);
                        for r in 1..n {
                            if better(x.get(r, k), best) {
                                best = x.get(r, k);
                                arg[k] = r;
                            }
                        }
                        best
                    }
                    Reduce::Mean => col.sum::<f64>() / n as f64,
                    Reduce::Std => {
                        let mean = (0..n).map(|r| x.get(r, k)).sum::<f64>() / n as f64;
                        let var =
                            (0..n).map(|r| (x.get(r, k) - mean).powi(2)).sum::<f64>() / n as f64;
                        (var + STD_EPS).sqrt()
                    }
                };
            }
        }
        self.push(v, Op::Pool(a, reduce, arg))
    }

    /// `weight · Σ_r (logsumexp(logits_r) - logits_r[targets_r])` as a `1 x 1` value.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>, weight: f64) -> Var {
        let x = self.value(logits);
        assert_eq!(targets.len(), x.rows);
        let probs = softmax_rows(x);
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = x.row(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let v = Matrix::from_vec(1, 1, vec![weight * total]);
        self.push(
            v,
            Op::CrossEntropy {
                logits,
                targets,
                weight,
                probs,
            },
        )
    }

    /// Gradients of the `1 x 1` value `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients {
        let root_val = self.value(root);
        assert_eq!(
            (root_val.rows, root_val.cols),
            (1, 1),
            "backward needs a scalar root"
        );
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));

        fn acc(grads: &mut [Option<Matrix>], shape: &Matrix, v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => {
                    debug_assert_eq!((g.rows, g.cols), (shape.rows, shape.cols));
                    *slot = Some(g);
                }
            }
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, av, *a, g.matmul_bt(bv));
                    acc(&mut grads, bv, *b, av.matmul_at(&g));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, self.value(*a), *a, g.clone());
                    acc(&mut grads, self.value(*b), *b, g.clone());
                }
                Op::AddRow(a, bias) => {
                    acc(&mut grads, self.value(*bias), *bias, g.col_sums());
                    acc(&mut grads, self.value(*a), *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = g.data.iter().zip(&bv.data).map(|(p, q)| p * q).collect();
                    let gb = g.data.iter().zip(&av.data).map(|(p, q)| p * q).collect();
                    acc(&mut grads, av, *a, Matrix::from_vec(g.rows, g.cols, ga));
                    acc(&mut grads, bv, *b, Matrix::from_vec(g.rows, g.cols, gb));
                }
                Op::Scale(a, s) => {
                    let ga = g.data.iter().map(|p| p * s).collect();
                    acc(
                        &mut grads,
                        self.value(*a),
                        *a,
                        Matrix::from_vec(g.rows, g.cols, ga),
                    );
                }
                Op::Relu(a) => {
                    let ga = g
                        .data
                        .iter()
                        .zip(&node.value.data)
                        .map(|(p, o)| if *o > 0.0 { *p } else { 0.0 })
                        .collect();
                    acc(
                        &mut grads,
                        self.value(*a),
                        *a,
                        Matrix::from_vec(g.rows, g.cols, ga),
                    );
                }
                Op::Gather(a, ix) => {
                    let av = self.value(*a);
                    let mut ga = Matrix::zeros(av.rows, av.cols);
                    for (r, &i) in ix.iter().enumerate() {
                        for (o, p) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += p;
                        }
                    }
                    acc(&mut grads, av, *a, ga);
                }
                Op::ScatterAdd(a, ix) => {
                    let av = self.value(*a);
                    let mut ga = Matrix::zeros(av.rows, av.cols);
                    for (r, &i) in ix.iter().enumerate() {
                        ga.row_mut(r).copy_from_slice(g.row(i));
                    }
                    acc(&mut grads, av, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let pv = self.value(p);
                        let mut gp = Matrix::zeros(pv.rows, pv.cols);
                        for r in 0..pv.rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + pv.cols]);
                        }
                        off += pv.cols;
                        acc(&mut grads, pv, p, gp);
                    }
                }
                Op::Broadcast(a) => {
                    acc(&mut grads, self.value(*a), *a, g.col_sums());
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gamma);
                    let d = xhat.cols;
                    acc(&mut grads, self.value(*beta), *beta, g.col_sums());
                    let gx_hat = Matrix::from_vec(
                        g.rows,
                        d,
                        g.data.iter().zip(&xhat.data).map(|(p, h)| p * h).collect(),
                    );
                    acc(&mut grads, gv, *gamma, gx_hat.col_sums());
                    let mut gx = Matrix::zeros(g.rows, d);
                    for r in 0..g.rows {
                        let dh: Vec<f64> = (0..d).map(|c| g.get(r, c) * gv.data[c]).collect();
                        let sum_dh: f64 = dh.iter().sum();
                        let sum_dh_h: f64 = (0..d).map(|c| dh[c] * xhat.get(r, c)).sum();
                        for c in 0..d {
                            gx.data[r * d + c] = inv_std[r] / d as f64
                                * (d as f64 * dh[c] - sum_dh - xhat.get(r, c) * sum_dh_h);
                        }
                    }
                    acc(&mut grads, self.value(*x), *x, gx);
                }
                Op::HeadDot(a, b, heads) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let hd = av.cols / heads;
                    let mut ga = Matrix::zeros(av.rows, av.cols);
                    let mut gb = Matrix::zeros(av.rows, av.cols);
                    for r in 0..av.rows {
                        for c in 0..av.cols {
                            let gh = g.data[r * heads + c / hd];
                            ga.data[r * av.cols + c] = gh * bv.get(r, c);
                            gb.data[r * av.cols + c] = gh * av.get(r, c);
                        }
                    }
                    acc(&mut grads, av, *a, ga);
                    acc(&mut grads, bv, *b, gb);
                }
                Op::SegmentSoftmax(a, segs) => {
                    let out = &node.value;
                    let c = out.cols;
                    let nseg = segs.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dots = vec![0.0; nseg * c];
                    for (r, &s) in segs.iter().enumerate() {
                        for k in 0..c {
                            dots[s * c + k] += g.get(r, k) * out.get(r, k);
                        }
                    }
                    let mut ga = Matrix::zeros(out.rows, c);
                    for (r, &s) in segs.iter().enumerate() {
                        for k in 0..c {
                            ga.data[r * c + k] = out.get(r, k) * (g.get(r, k) - dots[s * c + k]);
                        }
                    }
                    acc(&mut grads, self.value(*a), *a, ga);
                }
                Op::HeadScale(w, x) => {
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let heads = wv.cols;
                    let hd = xv.cols / heads;
                    let mut gw = Matrix::zeros(wv.rows, heads);
                    let mut gx = Matrix::zeros(xv.rows, xv.cols);
                    for r in 0..xv.rows {
                        for d in 0..xv.cols {
                            let h = d / hd;
                            gw.data[r * heads + h] += g.get(r, d) * xv.get(r, d);
                            gx.data[r * xv.cols + d] = g.get(r, d) * wv.get(r, h);
                        }
                    }
                    acc(&mut grads, wv, *w, gw);
                    acc(&mut grads, xv, *x, gx);
                }
                Op::Pool(a, reduce, arg) => {
                    let av = self.value(*a);
                    let (n, c) = (av.rows, av.cols);
                    let mut ga = Matrix::zeros(n, c);
                    if n > 0 {
                        for k in 0..c {
                            let gk = g.data[k];
                            match reduce {
                                Reduce::Max | Reduce::Min => ga.data[arg[k] * c + k] += gk,
                                Reduce::Mean => {
                                    for r in 0..n {
                                        ga.data[r * c + k] += gk / n as f64;
                                    }
                                }
                                Reduce::Std => {
                                    let mean = (0..n).map(|r| av.get(r, k)).sum::<f64>() / n as f64;
                                    let sd = node.value.data[k];
                                    for r in 0..n {
                                        ga.data[r * c + k] +=
                                            gk * (av.get(r, k) - mean) / (n as f64 * sd);
                                    }
                                }
                            }
                        }
                    }
                    acc(&mut grads, av, *a, ga);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    weight,
                    probs,
                } => {
                    let s = g.data[0] * weight;
                    let mut gl = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        gl.data[r * gl.cols + t] -= 1.0;
                    }
                    gl.data.iter_mut().for_each(|v| *v *= s);
                    acc(&mut grads, self.value(*logits), *logits, gl);
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of `v`, or `None` when the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}

pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows, x.cols);
    for r in 0..x.rows {
        let row = x.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (o, v) in out.row_mut(r).iter_mut().zip(row) {
            *o = (v - m).exp();
            s += *o;
        }
        out.row_mut(r).iter_mut().for_each(|o| *o /= s);
    }
    out
}
