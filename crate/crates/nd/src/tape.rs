use crate::error::{NdError, Result};
use crate::kernels;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Unary {
    Neg,
    Relu,
    Gelu,
    Tanh,
    Sigmoid,
    Exp,
    Ln,
    Softplus,
    Square,
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    /// `a[batch·m×k] · b[k×n]` when `batched == false`, otherwise one
    /// `[m×k]·[k×n]` product per leading batch index of both operands.
    MatMul {
        a: usize,
        b: usize,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
        batched: bool,
    },
    TransposeLast2 {
        a: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Sub {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    /// `b` repeated over the leading axes of `a`.
    AddBroadcast {
        a: usize,
        b: usize,
    },
    Scale {
        a: usize,
        c: f64,
    },
    AddScalar {
        a: usize,
    },
    Unary {
        a: usize,
        kind: Unary,
    },
    Clamp {
        a: usize,
        lo: f64,
        hi: f64,
    },
    Minimum {
        a: usize,
        b: usize,
    },
    SumAll {
        a: usize,
    },
    MeanAll {
        a: usize,
    },
    SumLast {
        a: usize,
        width: usize,
    },
    SoftmaxLast {
        a: usize,
        width: usize,
    },
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Reshape {
        a: usize,
    },
    Permute {
        a: usize,
        perm: Vec<usize>,
    },
    Narrow {
        a: usize,
        axis: usize,
        start: usize,
        len: usize,
    },
    Concat {
        inputs: Vec<usize>,
        axis: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) shape: Vec<usize>,
    pub(crate) value: Vec<f64>,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

/// Wengert list of the operations of one forward pass.
///
/// Nodes are appended in execution order, so every node's inputs precede it.
/// Leaf gradients persist across [`Tape::backward`] calls and accumulate;
/// intermediate adjoints are rebuilt on every call.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    leaf_grads: Vec<Option<Vec<f64>>>,
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

    /// Records a leaf holding a copy of `t`; it collects gradients iff
    /// `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    /// Records a leaf that never collects gradients.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.push(shape.to_vec(), t.into_data(), Op::Leaf, false))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Copies the value of `v` out as a standalone tensor.
    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(&n.shape, n.value.clone()).expect("tape nodes hold valid shapes")
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.leaf_grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn zero_grads(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if loss.0 >= self.nodes.len() {
            return Err(NdError::Contract("loss is not on this tape".into()));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NdError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        if self.leaf_grads.len() < self.nodes.len() {
            self.leaf_grads.resize(self.nodes.len(), None);
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                match &mut self.leaf_grads[i] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(g),
                }
                continue;
            }
            self.propagate(i, &g, &mut adj);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let node = &nodes[i];
        macro_rules! with_adj {
            ($j:expr, |$buf:ident| $body:block) => {
                if let Some($buf) = adjoint_of(adj, nodes, $j) {
                    $body
                }
            };
        }

        match &node.op {
            Op::Leaf => {}
            &Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                batched,
            } => {
                let av = &nodes[a].value;
                let bv = &nodes[b].value;
                if batched {
                    with_adj!(a, |da| {
                        for s in 0..batch {
                            kernels::matmul_nt_acc(
                                &g[s * m * n..(s + 1) * m * n],
                                &bv[s * k * n..(s + 1) * k * n],
                                &mut da[s * m * k..(s + 1) * m * k],
                                m,
                                k,
                                n,
                            );
                        }
                    });
                    with_adj!(b, |db| {
                        for s in 0..batch {
                            kernels::matmul_tn_acc(
                                &av[s * m * k..(s + 1) * m * k],
                                &g[s * m * n..(s + 1) * m * n],
                                &mut db[s * k * n..(s + 1) * k * n],
                                m,
                                k,
                                n,
                            );
                        }
                    });
                } else {
                    let rows = batch * m;
                    with_adj!(a, |da| {
                        kernels::matmul_nt_acc(g, bv, da, rows, k, n);
                    });
                    with_adj!(b, |db| {
                        kernels::matmul_tn_acc(av, g, db, rows, k, n);
                    });
                }
            }
            &Op::TransposeLast2 { a } => {
                let shape = &node.shape;
                let r = shape.len();
                let perm = transpose_perm(r);
                with_adj!(a, |da| {
                    let back = kernels::permute(g, shape, &perm);
                    add_into(da, &back);
                });
            }
            &Op::Add { a, b } => {
                with_adj!(a, |da| {
                    add_into(da, g);
                });
                with_adj!(b, |db| {
                    add_into(db, g);
                });
            }
            &Op::Sub { a, b } => {
                with_adj!(a, |da| {
                    add_into(da, g);
                });
                with_adj!(b, |db| {
                    db.iter_mut().zip(g).for_each(|(d, gv)| *d -= gv);
                });
            }
            &Op::Mul { a, b } => {
                let av = &nodes[a].value;
                let bv = &nodes[b].value;
                with_adj!(a, |da| {
                    for ((d, gv), bb) in da.iter_mut().zip(g).zip(bv) {
                        *d += gv * bb;
                    }
                });
                with_adj!(b, |db| {
                    for ((d, gv), aa) in db.iter_mut().zip(g).zip(av) {
                        *d += gv * aa;
                    }
                });
            }
            &Op::AddBroadcast { a, b } => {
                with_adj!(a, |da| {
                    add_into(da, g);
                });
                with_adj!(b, |db| {
                    let w = db.len();
                    for chunk in g.chunks(w) {
                        add_into(db, chunk);
                    }
                });
            }
            &Op::Scale { a, c } => {
                with_adj!(a, |da| {
                    da.iter_mut().zip(g).for_each(|(d, gv)| *d += c * gv);
                });
            }
            &Op::AddScalar { a } => {
                with_adj!(a, |da| {
                    add_into(da, g);
                });
            }
            &Op::Unary { a, kind } => {
                let x = &nodes[a].value;
                let y = &node.value;
                with_adj!(a, |da| {
                    for idx in 0..da.len() {
                        da[idx] += g[idx] * unary_derivative(kind, x[idx], y[idx]);
                    }
                });
            }
            &Op::Clamp { a, lo, hi } => {
                let x = &nodes[a].value;
                with_adj!(a, |da| {
                    for idx in 0..da.len() {
                        if x[idx] >= lo && x[idx] <= hi {
                            da[idx] += g[idx];
                        }
                    }
                });
            }
            &Op::Minimum { a, b } => {
                let av = &nodes[a].value;
                let bv = &nodes[b].value;
                with_adj!(a, |da| {
                    for idx in 0..da.len() {
                        if av[idx] <= bv[idx] {
                            da[idx] += g[idx];
                        }
                    }
                });
                with_adj!(b, |db| {
                    for idx in 0..db.len() {
                        if av[idx] > bv[idx] {
                            db[idx] += g[idx];
                        }
                    }
                });
            }
            &Op::SumAll { a } => {
                with_adj!(a, |da| {
                    da.iter_mut().for_each(|d| *d += g[0]);
                });
            }
            &Op::MeanAll { a } => {
                with_adj!(a, |da| {
                    let s = g[0] / da.len() as f64;
                    da.iter_mut().for_each(|d| *d += s);
                });
            }
            &Op::SumLast { a, width } => {
                with_adj!(a, |da| {
                    for (row, gv) in da.chunks_mut(width).zip(g) {
                        row.iter_mut().for_each(|d| *d += gv);
                    }
                });
            }
            &Op::SoftmaxLast { a, width } => {
                let y = &node.value;
                with_adj!(a, |da| {
                    for ((drow, grow), yrow) in da.chunks_mut(width).zip(g.chunks(width)).zip(y.chunks(width)) {
                        let inner = kernels::dot(grow, yrow);
                        for ((d, gv), yv) in drow.iter_mut().zip(grow).zip(yrow) {
                            *d += yv * (gv - inner);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let gv = &nodes[gain].value;
                let width = gv.len();
                with_adj!(gain, |dg| {
                    for (grow, hrow) in g.chunks(width).zip(xhat.chunks(width)) {
                        for ((d, gg), h) in dg.iter_mut().zip(grow).zip(hrow) {
                            *d += gg * h;
                        }
                    }
                });
                with_adj!(bias, |db| {
                    for grow in g.chunks(width) {
                        add_into(db, grow);
                    }
                });
                with_adj!(x, |dx| {
                    let inv_w = 1.0 / width as f64;
                    let mut dxhat = vec![0.0; width];
                    for (r, ((dxrow, grow), hrow)) in dx
                        .chunks_mut(width)
                        .zip(g.chunks(width))
                        .zip(xhat.chunks(width))
                        .enumerate()
                    {
                        for c in 0..width {
                            dxhat[c] = grow[c] * gv[c];
                        }
                        let sum_d: f64 = dxhat.iter().sum();
                        let sum_dh = kernels::dot(&dxhat, hrow);
                        let s = rstd[r];
                        for c in 0..width {
                            dxrow[c] += s * (dxhat[c] - inv_w * sum_d - hrow[c] * inv_w * sum_dh);
                        }
                    }
                });
            }
            &Op::Reshape { a } => {
                with_adj!(a, |da| {
                    add_into(da, g);
                });
            }
            Op::Permute { a, perm } => {
                let a = *a;
                let inv = kernels::inverse_perm(perm);
                with_adj!(a, |da| {
                    let back = kernels::permute(g, &node.shape, &inv);
                    add_into(da, &back);
                });
            }
            &Op::Narrow { a, axis, start, len } => {
                let in_shape = &nodes[a].shape;
                let outer: usize = in_shape[..axis].iter().product();
                let inner: usize = in_shape[axis + 1..].iter().product();
                let full = in_shape[axis];
                with_adj!(a, |da| {
                    for o in 0..outer {
                        let src = &g[o * len * inner..(o + 1) * len * inner];
                        let dst = &mut da[(o * full + start) * inner..(o * full + start + len) * inner];
                        add_into(dst, src);
                    }
                });
            }
            Op::Concat { inputs, axis } => {
                let axis = *axis;
                let out_shape = &node.shape;
                let outer: usize = out_shape[..axis].iter().product();
                let inner: usize = out_shape[axis + 1..].iter().product();
                let total = out_shape[axis];
                let mut offset = 0;
                for &j in inputs {
                    let len = nodes[j].shape[axis];
                    with_adj!(j, |dj| {
                        for o in 0..outer {
                            let src = &g[(o * total + offset) * inner..(o * total + offset + len) * inner];
                            add_into(&mut dj[o * len * inner..(o + 1) * len * inner], src);
                        }
                    });
                    offset += len;
                }
            }
        }
    }
}

/// Adjoint buffer of node `j`, allocated on first touch; `None` when `j`
/// does not need a gradient.
fn adjoint_of<'a>(adj: &'a mut [Option<Vec<f64>>], nodes: &[Node], j: usize) -> Option<&'a mut Vec<f64>> {
    if !nodes[j].requires_grad {
        return None;
    }
    Some(adj[j].get_or_insert_with(|| vec![0.0; nodes[j].value.len()]))
}

pub(crate) fn transpose_perm(rank: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..rank).collect();
    perm.swap(rank - 2, rank - 1);
    perm
}

#[inline]
fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub(crate) const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
pub(crate) const GELU_K: f64 = 0.044_715;

pub(crate) fn unary_forward(kind: Unary, x: f64) -> f64 {
    match kind {
        Unary::Neg => -x,
        Unary::Relu => x.max(0.0),
        Unary::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh()),
        Unary::Tanh => x.tanh(),
        Unary::Sigmoid => sigmoid(x),
        Unary::Exp => x.exp(),
        Unary::Ln => x.ln(),
        Unary::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        Unary::Square => x * x,
    }
}

fn unary_derivative(kind: Unary, x: f64, y: f64) -> f64 {
    match kind {
        Unary::Neg => -1.0,
        Unary::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Unary::Gelu => {
            let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
            0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
        }
        Unary::Tanh => 1.0 - y * y,
        Unary::Sigmoid => y * (1.0 - y),
        Unary::Exp => y,
        Unary::Ln => 1.0 / x,
        Unary::Softplus => sigmoid(x),
        Unary::Square => 2.0 * x,
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
