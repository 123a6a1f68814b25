//! Forward constructors for every differentiable operation.

use crate::error::{dim_err, Result};
use crate::kernels;
use crate::tape::{transpose_perm, unary_forward, Op, Tape, Unary, Var};

impl Tape {
    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.node(v).requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(dim_err(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    /// Matrix product.
    ///
    /// `a: [.., m, k]` with a rank-2 `b: [k, n]` multiplies every leading row
    /// block by the same `b`. With rank-3 operands `a: [B, m, k]`,
    /// `b: [B, k, n]` it is a batched product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.is_empty() || sb.len() < 2 {
            return Err(dim_err("matmul", format!("{sa:?} x {sb:?}")));
        }
        let k = *sa.last().unwrap();
        let (batched, batch, m, n) = if sb.len() == 2 {
            if sb[0] != k {
                return Err(dim_err("matmul", format!("{sa:?} x {sb:?}")));
            }
            let rows: usize = sa[..sa.len() - 1].iter().product();
            (false, rows, 1, sb[1])
        } else if sb.len() == 3 && sa.len() == 3 {
            if sa[0] != sb[0] || sb[1] != k {
                return Err(dim_err("matmul", format!("{sa:?} x {sb:?}")));
            }
            (true, sa[0], sa[1], sb[2])
        } else {
            return Err(dim_err("matmul", format!("{sa:?} x {sb:?}")));
        };
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; batch * m * n];
        if batched {
            for s in 0..batch {
                kernels::matmul_acc(
                    &av[s * m * k..(s + 1) * m * k],
                    &bv[s * k * n..(s + 1) * k * n],
                    &mut out[s * m * n..(s + 1) * m * n],
                    m,
                    k,
                    n,
                );
            }
        } else {
            kernels::matmul_acc(av, bv, &mut out, batch, k, n);
        }
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = n;
        let rg = self.rg(&[a, b]);
        Ok(self.push(
            shape,
            out,
            Op::MatMul {
                a: a.0,
                b: b.0,
                batch,
                m,
                k,
                n,
                batched,
            },
            rg,
        ))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if shape.len() < 2 {
            return Err(dim_err("transpose", format!("rank {} input", shape.len())));
        }
        let perm = transpose_perm(shape.len());
        let out = kernels::permute(self.value(a), &shape, &perm);
        let out_shape = perm.iter().map(|&p| shape[p]).collect();
        let rg = self.rg(&[a]);
        Ok(self.push(out_shape, out, Op::TransposeLast2 { a: a.0 }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add { a: a.0, b: b.0 }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Sub { a: a.0, b: b.0 }, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul { a: a.0, b: b.0 }, rg))
    }

    /// `a + b` where `b`'s shape equals the trailing axes of `a`; `b` is
    /// repeated over the leading axes (bias rows, position tables).
    pub fn add_broadcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(dim_err("add_broadcast", format!("{sa:?} + {sb:?}")));
        }
        let bv = self.value(b);
        let w = bv.len();
        let mut out = self.value(a).to_vec();
        for chunk in out.chunks_mut(w) {
            chunk.iter_mut().zip(bv).for_each(|(o, x)| *o += x);
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(sa.to_vec(), out, Op::AddBroadcast { a: a.0, b: b.0 }, rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::Scale { a: a.0, c }, rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x + c).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::AddScalar { a: a.0 }, rg)
    }

    fn unary(&mut self, a: Var, kind: Unary) -> Var {
        let out = self.value(a).iter().map(|&x| unary_forward(kind, x)).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::Unary { a: a.0, kind }, rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Neg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Relu)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Gelu)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Exp)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Ln)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Softplus)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Square)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(a).iter().map(|x| x.clamp(lo, hi)).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::Clamp { a: a.0, lo, hi }, rg)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("minimum", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| if x <= y { x } else { y })
            .collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Minimum { a: a.0, b: b.0 }, rg))
    }

    /// Sum of every element, as a `[1]` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        let rg = self.rg(&[a]);
        self.push(vec![1], vec![s], Op::SumAll { a: a.0 }, rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[a]);
        self.push(vec![1], vec![s], Op::MeanAll { a: a.0 }, rg)
    }

    /// Reduces the last axis; a rank-1 input yields shape `[1]`.
    pub fn sum_last(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let width = *shape.last().unwrap();
        let out: Vec<f64> = self.value(a).chunks(width).map(|r| r.iter().sum()).collect();
        let out_shape = if shape.len() == 1 {
            vec![1]
        } else {
            shape[..shape.len() - 1].to_vec()
        };
        let rg = self.rg(&[a]);
        self.push(out_shape, out, Op::SumLast { a: a.0, width }, rg)
    }

    /// Softmax over the last axis, stabilised by subtracting the row max.
    pub fn softmax(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let width = *shape.last().unwrap();
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(width) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        let rg = self.rg(&[a]);
        self.push(shape, out, Op::SoftmaxLast { a: a.0, width }, rg)
    }

    /// Normalises each last-axis row to zero mean and unit variance, then
    /// applies `gain` and `bias` (both of the row width).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let width = *shape.last().unwrap();
        if width == 0 {
            return Err(dim_err("layer_norm", "zero-width rows"));
        }
        if self.shape(gain) != [width] || self.shape(bias) != [width] {
            return Err(dim_err(
                "layer_norm",
                format!(
                    "rows of width {width} with gain {:?} and bias {:?}",
                    self.shape(gain),
                    self.shape(bias)
                ),
            ));
        }
        let xv = self.value(x);
        let gv = self.value(gain);
        let bv = self.value(bias);
        let rows = xv.len() / width;
        let mut out = vec![0.0; xv.len()];
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; rows];
        for r in 0..rows {
            let row = &xv[r * width..(r + 1) * width];
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
            let s = 1.0 / (var + eps).sqrt();
            rstd[r] = s;
            for c in 0..width {
                let h = (row[c] - mean) * s;
                xhat[r * width + c] = h;
                out[r * width + c] = h * gv[c] + bv[c];
            }
        }
        let rg = self.rg(&[x, gain, bias]);
        Ok(self.push(
            shape,
            out,
            Op::LayerNorm {
                x: x.0,
                gain: gain.0,
                bias: bias.0,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(a).len() || shape.contains(&0) {
            return Err(dim_err("reshape", format!("{:?} -> {shape:?}", self.shape(a))));
        }
        let out = self.value(a).to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(shape.to_vec(), out, Op::Reshape { a: a.0 }, rg))
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len()
            || perm
                .iter()
                .any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true))
        {
            return Err(dim_err("permute", format!("{perm:?} on shape {shape:?}")));
        }
        let out = kernels::permute(self.value(a), &shape, perm);
        let out_shape = perm.iter().map(|&p| shape[p]).collect();
        let rg = self.rg(&[a]);
        Ok(self.push(
            out_shape,
            out,
            Op::Permute {
                a: a.0,
                perm: perm.to_vec(),
            },
            rg,
        ))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(dim_err(
                "narrow",
                format!("[{start}, {}) on axis {axis} of {shape:?}", start + len),
            ));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let full = shape[axis];
        let src = self.value(a);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&src[(o * full + start) * inner..(o * full + start + len) * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let rg = self.rg(&[a]);
        Ok(self.push(
            out_shape,
            out,
            Op::Narrow {
                a: a.0,
                axis,
                start,
                len,
            },
            rg,
        ))
    }

    /// Joins tensors along `axis`; all other axes must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| dim_err("concat", "no inputs"))
            .map(|&v| self.shape(v).to_vec())?;
        if axis >= first.len() {
            return Err(dim_err("concat", format!("axis {axis} on shape {first:?}")));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible =
                s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(dim_err("concat", format!("{s:?} vs {first:?} along axis {axis}")));
            }
            total += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let len = self.shape(p)[axis];
                out.extend_from_slice(&self.value(p)[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let rg = self.rg(parts);
        Ok(self.push(
            shape,
            out,
            Op::Concat {
                inputs: parts.iter().map(|v| v.0).collect(),
                axis,
            },
            rg,
        ))
    }
}
