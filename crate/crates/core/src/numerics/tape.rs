use super::{gemm_acc, leaky_relu, log_sigmoid, log_sum_exp, sigmoid, softmax_in_place, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// `op(a) * op(b)` with optional transposes.
    MatMul {
        a: Var,
        b: Var,
        ta: bool,
        tb: bool,
    },
    /// Matrix plus a row vector broadcast over rows.
    AddRow {
        a: Var,
        row: Var,
    },
    /// Matrix times a row vector broadcast over rows.
    MulRow {
        a: Var,
        row: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    /// `scale * a + offset`
    Linear {
        a: Var,
        scale: f64,
    },
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu {
        a: Var,
        slope: f64,
    },
    LogSigmoid(Var),
    SoftmaxRows(Var),
    /// `-sqrt(|q_b - k_i|^2 + eps)` for every query row b and key row i.
    NegL2 {
        q: Var,
        k: Var,
    },
    /// Per-column standardization with batch statistics.
    BatchNorm {
        a: Var,
        inv_std: Vec<f64>,
    },
    /// Mean cross-entropy of row-wise softmax against integer labels.
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
    Mean(Var),
    /// Squared L2 norm of every row.
    RowSumSq(Var),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation so it can be differentiated in reverse.
///
/// Leaves created with [`Tape::param`] receive gradients; leaves created with
/// [`Tape::constant`] and everything computed only from constants do not.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

const NEG_L2_EPS: f64 = 1e-12;

fn mat_dims(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(Error::dim(op, "rank-2 tensor", format!("shape {:?}", t.shape())));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
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

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// `op(a) * op(b)`; `ta`/`tb` transpose the stored matrices.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var> {
        let (ar, ac) = mat_dims(self.value(a), "matmul")?;
        let (br, bc) = mat_dims(self.value(b), "matmul")?;
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (kb, n) = if tb { (bc, br) } else { (br, bc) };
        if k != kb {
            return Err(Error::dim("matmul", format!("inner dimension {k}"), kb));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(
            1.0,
            self.value(a).data(),
            (ar, ac),
            ta,
            self.value(b).data(),
            (br, bc),
            tb,
            &mut out,
        );
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(value, Op::MatMul { a, b, ta, tb }, &[a, b]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, false)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(a), &[a]))
    }

    fn row_broadcast(&mut self, a: Var, row: Var, op: &'static str, mul: bool) -> Result<Var> {
        let (r, c) = mat_dims(self.value(a), op)?;
        let rv = self.value(row);
        if rv.rank() != 1 || rv.len() != c {
            return Err(Error::dim(
                op,
                format!("row vector of length {c}"),
                format!("shape {:?}", rv.shape()),
            ));
        }
        let mut out = self.value(a).clone();
        let rv = self.value(row).data().to_vec();
        for i in 0..r {
            for (o, x) in out.row_mut(i).iter_mut().zip(&rv) {
                if mul {
                    *o *= x;
                } else {
                    *o += x;
                }
            }
        }
        let node = if mul {
            Op::MulRow { a, row }
        } else {
            Op::AddRow { a, row }
        };
        Ok(self.push(out, node, &[a, row]))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast(a, row, "add_row", false)
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast(a, row, "mul_row", true)
    }

    /// Batched `X W^T + b` (rows of `x` are samples); a rank-1 `x` yields a rank-1 result.
    pub fn affine(&mut self, w: Var, b: Var, x: Var) -> Result<Var> {
        let single = self.value(x).rank() == 1;
        let xm = if single {
            let n = self.value(x).len();
            self.reshape(x, vec![1, n])?
        } else {
            x
        };
        let (m, n) = mat_dims(self.value(w), "affine")?;
        if self.value(xm).cols() != n {
            return Err(Error::dim("affine", format!("input width {n}"), self.value(xm).cols()));
        }
        if self.value(b).rank() != 1 || self.value(b).len() != m {
            return Err(Error::dim(
                "affine",
                format!("bias of length {m}"),
                format!("{:?}", self.value(b).shape()),
            ));
        }
        let lin = self.matmul_t(xm, false, w, true)?;
        let out = self.add_row(lin, b)?;
        if single {
            self.reshape(out, vec![m])
        } else {
            Ok(out)
        }
    }

    fn zip_with(&mut self, a: Var, b: Var, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::dim(op, format!("{:?}", ta.shape()), format!("{:?}", tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with(a, b, "add", |x, y| x + y)?;
        Ok(self.push(v, Op::Add { a, b }, &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(v, Op::Sub { a, b }, &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(v, Op::Mul { a, b }, &[a, b]))
    }

    /// `scale * a + offset`
    pub fn linear(&mut self, a: Var, scale: f64, offset: f64) -> Var {
        let v = self.value(a).map(|x| scale * x + offset);
        self.push(v, Op::Linear { a, scale }, &[a])
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Var {
        self.linear(a, scale, 0.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(leaky_relu);
        self.push(
            v,
            Op::LeakyRelu {
                a,
                slope: super::LEAKY_SLOPE,
            },
            &[a],
        )
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(log_sigmoid);
        self.push(v, Op::LogSigmoid(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let mut v = self.value(a).clone();
        if v.rank() == 0 || v.cols() == 0 {
            return Err(Error::dim("softmax", "at least one entry", 0));
        }
        for i in 0..v.rows() {
            softmax_in_place(v.row_mut(i));
        }
        Ok(self.push(v, Op::SoftmaxRows(a), &[a]))
    }

    /// Negative Euclidean distance between every query row and every key row.
    pub fn neg_l2(&mut self, q: Var, k: Var) -> Result<Var> {
        let (b, hq) = mat_dims(self.value(q), "neg_l2")?;
        let (n, hk) = mat_dims(self.value(k), "neg_l2")?;
        if hq != hk {
            return Err(Error::dim("neg_l2", format!("key width {hk}"), hq));
        }
        let (qv, kv) = (self.value(q), self.value(k));
        let mut out = Vec::with_capacity(b * n);
        for bi in 0..b {
            let qr = qv.row(bi);
            for i in 0..n {
                let d2: f64 = qr.iter().zip(kv.row(i)).map(|(x, y)| (x - y) * (x - y)).sum();
                out.push(-(d2 + NEG_L2_EPS).sqrt());
            }
        }
        let value = Tensor::new(vec![b, n], out)?;
        Ok(self.push(value, Op::NegL2 { q, k }, &[q, k]))
    }

    /// Standardizes every column with the batch mean and biased variance.
    /// Returns the normalized output plus the batch mean and biased variance.
    pub fn batch_norm(&mut self, a: Var, eps: f64) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let (r, c) = mat_dims(self.value(a), "batch_norm")?;
        if r < 2 {
            return Err(Error::Config(format!(
                "batch normalization in train mode needs a batch of at least 2, got {r}"
            )));
        }
        let x = self.value(a);
        let mut mean = vec![0.0; c];
        for i in 0..r {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= r as f64;
        }
        let mut var = vec![0.0; c];
        for i in 0..r {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut var {
            *s /= r as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut out = x.clone();
        for i in 0..r {
            for ((o, m), s) in out.row_mut(i).iter_mut().zip(&mean).zip(&inv_std) {
                *o = (*o - m) * s;
            }
        }
        let node = self.push(out, Op::BatchNorm { a, inv_std }, &[a]);
        Ok((node, mean, var))
    }

    /// Mean over rows of `logsumexp(z) - z[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (r, k) = mat_dims(self.value(logits), "cross_entropy")?;
        if labels.len() != r {
            return Err(Error::dim("cross_entropy", format!("{r} labels"), labels.len()));
        }
        if r == 0 {
            return Err(Error::dim("cross_entropy", "non-empty batch", 0));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::Contract(format!("label {bad} out of range for {k} classes")));
        }
        let z = self.value(logits);
        let mut probs = z.data().to_vec();
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = z.row(i);
            total += log_sum_exp(row) - row[y];
            softmax_in_place(&mut probs[i * k..(i + 1) * k]);
        }
        let value = Tensor::scalar(total / r as f64);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::dim("mean", "non-empty tensor", 0));
        }
        let v = Tensor::scalar(self.value(a).data().iter().sum::<f64>() / n as f64);
        Ok(self.push(v, Op::Mean(a), &[a]))
    }

    pub fn row_sum_sq(&mut self, a: Var) -> Result<Var> {
        let (r, _) = mat_dims(self.value(a), "row_sum_sq")?;
        let t = self.value(a);
        let v = Tensor::vector((0..r).map(|i| t.row(i).iter().map(|x| x * x).sum()).collect());
        Ok(self.push(v, Op::RowSumSq(a), &[a]))
    }

    /// Reverse pass from a scalar output. Every parameter leaf gets a gradient,
    /// zero when it does not influence `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(Error::dim(
                "backward",
                "scalar output",
                format!("{:?}", self.value(output).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(self.value(output).shape(), 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| match (&node.op, node.requires_grad) {
                (Op::Leaf, true) => Some(g.unwrap_or_else(|| Tensor::zeros(node.value.shape()))),
                _ => g,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, delta: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ash = (av.shape()[0], av.shape()[1]);
                let bsh = (bv.shape()[0], bv.shape()[1]);
                let gsh = (g.shape()[0], g.shape()[1]);
                if self.requires_grad(*a) {
                    let mut da = vec![0.0; av.len()];
                    if *ta {
                        // dA = op(B) dC^T
                        gemm_acc(1.0, bv.data(), bsh, *tb, g.data(), gsh, true, &mut da);
                    } else {
                        // dA = dC op(B)^T
                        gemm_acc(1.0, g.data(), gsh, false, bv.data(), bsh, !*tb, &mut da);
                    }
                    acc(*a, Tensor::new(av.shape().to_vec(), da).expect("shape"));
                }
                if self.requires_grad(*b) {
                    let mut db = vec![0.0; bv.len()];
                    if *tb {
                        // dB = dC^T op(A)
                        gemm_acc(1.0, g.data(), gsh, true, av.data(), ash, *ta, &mut db);
                    } else {
                        // dB = op(A)^T dC
                        gemm_acc(1.0, av.data(), ash, !*ta, g.data(), gsh, false, &mut db);
                    }
                    acc(*b, Tensor::new(bv.shape().to_vec(), db).expect("shape"));
                }
            }
            Op::AddRow { a, row } => {
                acc(*a, g.clone());
                let mut dr = vec![0.0; g.cols()];
                for i in 0..g.rows() {
                    for (d, x) in dr.iter_mut().zip(g.row(i)) {
                        *d += x;
                    }
                }
                acc(*row, Tensor::vector(dr));
            }
            Op::MulRow { a, row } => {
                let (av, rv) = (self.value(*a), self.value(*row));
                let mut da = g.clone();
                let mut dr = vec![0.0; g.cols()];
                for i in 0..g.rows() {
                    for (j, d) in da.row_mut(i).iter_mut().enumerate() {
                        dr[j] += *d * av.row(i)[j];
                        *d *= rv.data()[j];
                    }
                }
                acc(*a, da);
                acc(*row, Tensor::vector(dr));
            }
            Op::Add { a, b } => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub { a, b } => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, elementwise(g, bv, |gi, bi| gi * bi));
                acc(*b, elementwise(g, av, |gi, ai| gi * ai));
            }
            Op::Linear { a, scale } => acc(*a, g.map(|x| x * scale)),
            Op::Sigmoid(a) => acc(*a, elementwise(g, y, |gi, yi| gi * yi * (1.0 - yi))),
            Op::Tanh(a) => acc(*a, elementwise(g, y, |gi, yi| gi * (1.0 - yi * yi))),
            Op::LeakyRelu { a, slope } => {
                let s = *slope;
                acc(
                    *a,
                    elementwise(g, self.value(*a), |gi, xi| if xi > 0.0 { gi } else { gi * s }),
                );
            }
            Op::LogSigmoid(a) => acc(*a, elementwise(g, self.value(*a), |gi, xi| gi * sigmoid(-xi))),
            Op::SoftmaxRows(a) => {
                let mut da = g.clone();
                for i in 0..y.rows() {
                    let yr = y.row(i);
                    let dot: f64 = g.row(i).iter().zip(yr).map(|(gi, yi)| gi * yi).sum();
                    for (d, yi) in da.row_mut(i).iter_mut().zip(yr) {
                        *d = yi * (*d - dot);
                    }
                }
                acc(*a, da);
            }
            Op::NegL2 { q, k } => {
                let (qv, kv) = (self.value(*q), self.value(*k));
                let (b, n) = (y.rows(), y.cols());
                let h = qv.cols();
                let mut dq = Tensor::zeros(qv.shape());
                let mut dk = Tensor::zeros(kv.shape());
                for bi in 0..b {
                    for i in 0..n {
                        // d(-r)/dq = -(q - k) / r
                        let coef = g.row(bi)[i] / y.row(bi)[i];
                        for j in 0..h {
                            let diff = qv.row(bi)[j] - kv.row(i)[j];
                            dq.row_mut(bi)[j] += coef * diff;
                            dk.row_mut(i)[j] -= coef * diff;
                        }
                    }
                }
                acc(*q, dq);
                acc(*k, dk);
            }
            Op::BatchNorm { a, inv_std } => {
                let (r, c) = (y.rows(), y.cols());
                let mut sum_g = vec![0.0; c];
                let mut sum_gy = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        sum_g[j] += g.row(i)[j];
                        sum_gy[j] += g.row(i)[j] * y.row(i)[j];
                    }
                }
                let mut da = Tensor::zeros(y.shape());
                let rf = r as f64;
                for i in 0..r {
                    for j in 0..c {
                        da.row_mut(i)[j] = inv_std[j] / rf * (rf * g.row(i)[j] - sum_g[j] - y.row(i)[j] * sum_gy[j]);
                    }
                }
                acc(*a, da);
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let k = self.value(*logits).cols();
                let scale = g.item() / labels.len() as f64;
                let mut d = probs.clone();
                for (i, &lbl) in labels.iter().enumerate() {
                    d[i * k + lbl] -= 1.0;
                }
                for v in &mut d {
                    *v *= scale;
                }
                acc(
                    *logits,
                    Tensor::new(self.value(*logits).shape().to_vec(), d).expect("shape"),
                );
            }
            Op::Sum(a) => acc(*a, Tensor::full(self.value(*a).shape(), g.item())),
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                acc(*a, Tensor::full(self.value(*a).shape(), g.item() / n));
            }
            Op::RowSumSq(a) => {
                let av = self.value(*a);
                let mut da = av.clone();
                for i in 0..av.rows() {
                    let gi = g.data()[i];
                    for v in da.row_mut(i) {
                        *v *= 2.0 * gi;
                    }
                }
                acc(*a, da);
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                acc(*a, g.clone().reshape(shape).expect("shape"));
            }
        }
    }
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape")
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of a parameter leaf.
    ///
    /// # Panics
    /// If `v` was not created with [`Tape::param`] on the differentiated tape.
    pub fn wrt(&self, v: Var) -> &Tensor {
        self.get(v).expect("variable is not a parameter of this tape")
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        self.grads[v.0]
            .take()
            .expect("variable is not a parameter of this tape")
    }
}
