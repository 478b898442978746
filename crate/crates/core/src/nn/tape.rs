use ndarray::{s, Array2, Axis};

use super::{gelu, Gradients, Mat, ParamId, ParamStore};

const LAYER_NORM_EPS: f64 = 1e-5;
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Value {
    Owned(Mat),
    Param(ParamId),
}

enum Op {
    Leaf,
    Param(ParamId),
    Embed(ParamId, Vec<usize>),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    MaskedSoftmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    Row(Var, usize),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Mat,
    },
}

struct Node {
    value: Value,
    op: Op,
}

/// Records a forward computation so it can be differentiated.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(128),
        }
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        match &self.nodes[v.0].value {
            Value::Owned(m) => m,
            Value::Param(id) => self.params.get(*id),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    /// Constant or input; its gradient is available from [`Backward::grad`].
    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Gathers rows of an embedding table.
    pub fn embed(&mut self, table: ParamId, rows: &[usize]) -> Var {
        let t = self.params.get(table);
        let value = t.select(Axis(0), rows);
        self.push(value, Op::Embed(table, rows.to_vec()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(value, Op::MatMulNT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    /// `x · w + b`
    pub fn affine(&mut self, x: Var, w: ParamId, b: ParamId) -> Var {
        let w = self.param(w);
        let b = self.param(b);
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a) * s;
        self.push(value, Op::Scale(a, s))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| gelu(x).0);
        self.push(value, Op::Gelu(a))
    }

    /// Row-wise softmax over the columns where `keep` is true; the other
    /// columns get exactly zero weight.
    pub fn masked_softmax(&mut self, a: Var, keep: &[bool]) -> Var {
        let x = self.value(a);
        assert_eq!(x.ncols(), keep.len(), "mask width");
        assert!(keep.iter().any(|&k| k), "softmax over an empty mask");
        let mut out = Array2::zeros(x.raw_dim());
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            let max = row
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for ((d, &v), &k) in dst.iter_mut().zip(row.iter()).zip(keep) {
                if k {
                    *d = (v - max).exp();
                    sum += *d;
                }
            }
            dst.mapv_inplace(|d| d / sum);
        }
        self.push(out, Op::MaskedSoftmax(a))
    }

    /// Row-wise layer normalization with learned `1 × n` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: ParamId, beta: ParamId) -> Var {
        let gamma = self.param(gamma);
        let beta = self.param(beta);
        let xv = self.value(x);
        let n = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let value = &xhat * self.value(gamma) + self.value(beta);
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
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("column counts agree");
        self.push(value, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols(a, start))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Var {
        let value = self.value(a).slice(s![i..i + 1, ..]).to_owned();
        self.push(value, Op::Row(a, i))
    }

    /// Mean over rows of `-ln max(softmax(logits)[target], 1e-12)`, as a
    /// `1 × 1` value.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let z = self.value(logits);
        assert_eq!(z.nrows(), targets.len(), "one target per row");
        let mut probs = Array2::zeros(z.raw_dim());
        let mut total = 0.0;
        for ((row, mut p), &t) in z.rows().into_iter().zip(probs.rows_mut()).zip(targets) {
            let sm = super::softmax(row.as_slice().expect("standard layout"));
            total -= sm[t].max(PROB_FLOOR).ln();
            p.iter_mut().zip(sm).for_each(|(d, s)| *d = s);
        }
        let value = Array2::from_elem((1, 1), total / targets.len() as f64);
        self.push(
            value,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Backpropagates `seed` from `output`.
    pub fn backward_from(&self, output: Var, seed: Mat) -> Backward {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        let mut params = Gradients::new();

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Param(id) => params.add_dense(*id, &g),
                Op::Embed(id, rows) => {
                    for (r, gr) in rows.iter().zip(g.rows()) {
                        params.add_row(*id, *r, gr);
                    }
                }
                &Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(b).t());
                    let db = self.value(a).t().dot(&g);
                    acc(&mut grads, a, da);
                    acc(&mut grads, b, db);
                }
                &Op::MatMulNT(a, b) => {
                    let da = g.dot(self.value(b));
                    let db = g.t().dot(self.value(a));
                    acc(&mut grads, a, da);
                    acc(&mut grads, b, db);
                }
                &Op::Add(a, b) => {
                    acc(&mut grads, a, g.clone());
                    acc(&mut grads, b, g);
                }
                &Op::AddRow(a, row) => {
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, a, g);
                    acc(&mut grads, row, dr);
                }
                &Op::Scale(a, s) => acc(&mut grads, a, g * s),
                &Op::Gelu(a) => {
                    let mut d = self.value(a).mapv(|x| gelu(x).1);
                    d *= &g;
                    acc(&mut grads, a, d);
                }
                &Op::MaskedSoftmax(a) => {
                    let y = self.value(Var(i));
                    let mut d = Array2::zeros(y.raw_dim());
                    for ((yr, gr), mut dr) in y.rows().into_iter().zip(g.rows()).zip(d.rows_mut()) {
                        let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                        for ((d, &y), &g) in dr.iter_mut().zip(yr.iter()).zip(gr.iter()) {
                            *d = y * (g - dot);
                        }
                    }
                    acc(&mut grads, a, d);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gam = self.value(*gamma);
                    let dgamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * gam;
                    let n = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(xhat.raw_dim());
                    for (r, mut dxr) in dx.rows_mut().into_iter().enumerate() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let sum_dh = dh.sum();
                        let sum_dh_xh: f64 = dh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum();
                        for ((d, &dhv), &xhv) in dxr.iter_mut().zip(dh.iter()).zip(xh.iter()) {
                            *d = inv_std[r] / n * (n * dhv - sum_dh - xhv * sum_dh_xh);
                        }
                    }
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *gamma, dgamma);
                    acc(&mut grads, *beta, dbeta);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(p).nrows();
                        acc(&mut grads, p, g.slice(s![start..start + h, ..]).to_owned());
                        start += h;
                    }
                }
                &Op::SliceCols(a, start) => {
                    let mut d = Array2::zeros(self.value(a).raw_dim());
                    d.slice_mut(s![.., start..start + g.ncols()]).assign(&g);
                    acc(&mut grads, a, d);
                }
                &Op::Row(a, r) => {
                    let mut d = Array2::zeros(self.value(a).raw_dim());
                    d.slice_mut(s![r..r + 1, ..]).assign(&g);
                    acc(&mut grads, a, d);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let upstream = g[[0, 0]] / targets.len() as f64;
                    let mut d = probs.clone();
                    for (mut row, &t) in d.rows_mut().into_iter().zip(targets) {
                        if row[t] < PROB_FLOOR {
                            // Loss is clamped to a constant here.
                            row.fill(0.0);
                        } else {
                            row[t] -= 1.0;
                            row.mapv_inplace(|v| v * upstream);
                        }
                    }
                    acc(&mut grads, *logits, d);
                }
            }
        }
        Backward { params, grads }
    }

    /// Backpropagates from a `1 × 1` loss.
    pub fn backward(&self, loss: Var) -> Backward {
        self.backward_from(loss, Array2::ones((1, 1)))
    }
}

pub struct Backward {
    pub params: Gradients,
    grads: Vec<Option<Mat>>,
}

impl Backward {
    /// Gradient reaching an [`Tape::input`] leaf.
    pub fn grad(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }
}
