use super::kernels::{self, ConvGeom, GruCache, GruDims};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<E> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, E),
    MatMul(Var, Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Pad {
        input: Var,
        axis: usize,
        before: usize,
    },
    Reshape(Var),
    Permute {
        input: Var,
        perm: Vec<usize>,
    },
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<E>,
        probs: Vec<E>,
    },
    Conv {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    TConv {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    Gru {
        input: Var,
        h0: Option<Var>,
        w_ih: Var,
        w_hh: Var,
        b_ih: Var,
        b_hh: Var,
        dims: GruDims,
        cache: GruCache<E>,
    },
    InstanceNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        channels: usize,
        xhat: Vec<E>,
        inv_std: Vec<E>,
    },
}

#[derive(Debug)]
struct Node<E> {
    value: Tensor<E>,
    requires_grad: bool,
    op: Op<E>,
}

/// Records a computation in topological order for one backward pass.
#[derive(Debug)]
pub struct Tape<E = f32> {
    nodes: Vec<Node<E>>,
}

impl<E: Scalar> Default for Tape<E> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(msg: String) -> Error {
    Error::Shape(msg)
}

impl<E: Scalar> Tape<E> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<E>, op: Op<E>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A trainable leaf; its gradient is reported by `backward`.
    pub fn leaf(&mut self, value: Tensor<E>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad: true,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor<E>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad: false,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<E> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(format!(
                "{op}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(E, E) -> E) -> Tensor<E> {
        let (ta, tb) = (self.value(a), self.value(b));
        Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect(),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let v = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let v = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b), &[a, b]))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let v = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: E) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s), &[a])
    }

    /// `[m, k] x [k, n] -> [m, n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err(format!("matmul {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![E::zero(); m * n];
        kernels::matmul(&self.value(a).data, &self.value(b).data, m, k, n, &mut out);
        let v = Tensor {
            shape: vec![m, n],
            data: out,
        };
        Ok(self.push(v, Op::MatMul(a, b), &[a, b]))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| shape_err("concat of nothing".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(shape_err(format!("concat axis {axis} for rank {}", base.len())));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != base.len()
                || s.iter()
                    .zip(&base)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(shape_err(format!("concat {:?} with {base:?} on axis {axis}", s)));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape[axis] * inner;
                data.extend_from_slice(&t.data[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let v = Tensor { shape, data };
        Ok(self.push(
            v,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            inputs,
        ))
    }

    /// `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, input: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() || start + len > s[axis] || len == 0 {
            return Err(shape_err(format!(
                "slice [{start}, {}) on axis {axis} of {s:?}",
                start + len
            )));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let src = &self.value(input).data;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let off = (o * s[axis] + start) * inner;
            data.extend_from_slice(&src[off..off + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let v = Tensor { shape, data };
        Ok(self.push(v, Op::Slice { input, axis, start }, &[input]))
    }

    /// Zero padding along `axis`.
    pub fn pad(&mut self, input: Var, axis: usize, before: usize, after: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() {
            return Err(shape_err(format!("pad axis {axis} of {s:?}")));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let new_len = s[axis] + before + after;
        let src = &self.value(input).data;
        let mut data = vec![E::zero(); outer * new_len * inner];
        for o in 0..outer {
            let from = o * s[axis] * inner;
            let to = (o * new_len + before) * inner;
            data[to..to + s[axis] * inner].copy_from_slice(&src[from..from + s[axis] * inner]);
        }
        let mut shape = s;
        shape[axis] = new_len;
        let v = Tensor { shape, data };
        Ok(self.push(v, Op::Pad { input, axis, before }, &[input]))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(input).clone().reshape(shape)?;
        Ok(self.push(v, Op::Reshape(input), &[input]))
    }

    pub fn permute(&mut self, input: Var, perm: &[usize]) -> Result<Var> {
        let s = self.shape(input).to_vec();
        let mut seen = vec![false; s.len()];
        if perm.len() != s.len() || perm.iter().any(|&p| p >= s.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(shape_err(format!("permutation {perm:?} of {s:?}")));
        }
        let (shape, data) = kernels::permute(&self.value(input).data, &s, perm);
        let v = Tensor { shape, data };
        Ok(self.push(
            v,
            Op::Permute {
                input,
                perm: perm.to_vec(),
            },
            &[input],
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > E::zero() { x } else { E::zero() });
        self.push(v, Op::Relu(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(kernels::sigmoid);
        self.push(v, Op::Sigmoid(a), &[a])
    }

    /// Sum of all entries as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).numel();
        let s = self.sum(a);
        self.scale(s, E::one() / E::from_usize(n).unwrap())
    }

    /// Weighted mean over rows of `-logits[t, c_t] + log sum_m exp(logits[t, m])`.
    ///
    /// `logits: [T, N]`; rows with zero weight are ignored.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[E]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != targets.len() || weights.len() != targets.len() {
            return Err(shape_err(format!(
                "cross entropy logits {s:?} with {} targets, {} weights",
                targets.len(),
                weights.len()
            )));
        }
        let (rows, classes) = (s[0], s[1]);
        if let Some(&bad) = targets.iter().find(|&&c| c >= classes) {
            return Err(Error::Index(format!("class {bad} of {classes}")));
        }
        let total_w: E = weights.iter().copied().sum();
        if total_w <= E::zero() {
            return Err(Error::Contract("cross entropy over zero weighted frames".into()));
        }
        let x = &self.value(logits).data;
        let mut probs = vec![E::zero(); rows * classes];
        let mut loss = E::zero();
        for t in 0..rows {
            let row = &x[t * classes..][..classes];
            let max = row.iter().copied().fold(E::neg_infinity(), E::max);
            let sum_exp: E = row.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + sum_exp.ln();
            for m in 0..classes {
                probs[t * classes + m] = (row[m] - max).exp() / sum_exp;
            }
            loss += weights[t] * (lse - row[targets[t]]);
        }
        let v = Tensor::scalar(loss / total_w);
        Ok(self.push(
            v,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                weights: weights.iter().map(|&w| w / total_w).collect(),
                probs,
            },
            &[logits],
        ))
    }

    fn conv_geom(
        &self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
        transposed: bool,
    ) -> Result<ConvGeom> {
        let xs = self.shape(input);
        let ws = self.shape(weight);
        if xs.len() != 3 || ws.len() != 3 || stride == 0 {
            return Err(shape_err(format!("conv input {xs:?}, weight {ws:?}")));
        }
        let (batch, channels, len) = (xs[0], xs[1], xs[2]);
        let kernel = ws[2];
        let (c_in, c_out) = (ws[1], ws[0]);
        // a transposed op consumes what the underlying conv would produce
        let expected_in = if transposed { c_out } else { c_in };
        if channels != expected_in {
            return Err(shape_err(format!(
                "conv expects {expected_in} input channels, got {channels}"
            )));
        }
        let out_channels = if transposed { c_in } else { c_out };
        if let Some(b) = bias {
            if self.shape(b) != [out_channels] {
                return Err(shape_err(format!(
                    "bias {:?} for {out_channels} channels",
                    self.shape(b)
                )));
            }
        }
        if transposed {
            let full = (len - 1) * stride + kernel;
            if full <= 2 * padding {
                return Err(shape_err(format!("transposed conv output empty for length {len}")));
            }
            Ok(ConvGeom {
                batch,
                c_in,
                c_out,
                kernel,
                stride,
                padding,
                len_in: full - 2 * padding,
                len_out: len,
            })
        } else {
            if kernel > len + 2 * padding {
                return Err(shape_err(format!(
                    "kernel {kernel} longer than padded length {}",
                    len + 2 * padding
                )));
            }
            Ok(ConvGeom {
                batch,
                c_in,
                c_out,
                kernel,
                stride,
                padding,
                len_in: len,
                len_out: (len + 2 * padding - kernel) / stride + 1,
            })
        }
    }

    fn add_bias(data: &mut [E], bias: &[E], batch: usize, len: usize) {
        let channels = bias.len();
        for b in 0..batch {
            for (c, &bv) in bias.iter().enumerate() {
                for v in &mut data[(b * channels + c) * len..][..len] {
                    *v += bv;
                }
            }
        }
    }

    /// Cross-correlation over `[B, C_in, L]` with weight `[C_out, C_in, K]`.
    pub fn conv1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let geom = self.conv_geom(input, weight, bias, stride, padding, false)?;
        let mut out = vec![E::zero(); geom.batch * geom.c_out * geom.len_out];
        kernels::conv_forward(
            &self.value(input).data,
            &self.value(weight).data,
            &geom,
            &mut out,
        );
        if let Some(b) = bias {
            Self::add_bias(&mut out, &self.value(b).data, geom.batch, geom.len_out);
        }
        let v = Tensor {
            shape: vec![geom.batch, geom.c_out, geom.len_out],
            data: out,
        };
        let inputs: Vec<Var> = [Some(input), Some(weight), bias].into_iter().flatten().collect();
        Ok(self.push(
            v,
            Op::Conv {
                input,
                weight,
                bias,
                geom,
            },
            &inputs,
        ))
    }

    /// Transposed convolution over `[B, C_in, L]` with weight `[C_in, C_out, K]`;
    /// output length `(L - 1) * stride - 2 * padding + K`.
    pub fn tconv1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let geom = self.conv_geom(input, weight, bias, stride, padding, true)?;
        let mut out = vec![E::zero(); geom.batch * geom.c_in * geom.len_in];
        kernels::conv_backward_data(
            &self.value(input).data,
            &self.value(weight).data,
            &geom,
            &mut out,
        );
        if let Some(b) = bias {
            Self::add_bias(&mut out, &self.value(b).data, geom.batch, geom.len_in);
        }
        let v = Tensor {
            shape: vec![geom.batch, geom.c_in, geom.len_in],
            data: out,
        };
        let inputs: Vec<Var> = [Some(input), Some(weight), bias].into_iter().flatten().collect();
        Ok(self.push(
            v,
            Op::TConv {
                input,
                weight,
                bias,
                geom,
            },
            &inputs,
        ))
    }

    /// GRU over `input: [B, T, C]`; weights `[3H, C]`, `[3H, H]`, biases `[3H]`,
    /// gate rows ordered update, reset, candidate. Returns all states `[B, T, H]`.
    pub fn gru(
        &mut self,
        input: Var,
        h0: Option<Var>,
        w_ih: Var,
        w_hh: Var,
        b_ih: Var,
        b_hh: Var,
    ) -> Result<Var> {
        let xs = self.shape(input).to_vec();
        let wi = self.shape(w_ih).to_vec();
        let wh = self.shape(w_hh).to_vec();
        if xs.len() != 3 || wi.len() != 2 || wh.len() != 2 || wi[0] % 3 != 0 {
            return Err(shape_err(format!("gru input {xs:?}, w_ih {wi:?}, w_hh {wh:?}")));
        }
        let hidden = wi[0] / 3;
        let dims = GruDims {
            batch: xs[0],
            steps: xs[1],
            input: xs[2],
            hidden,
        };
        if wi[1] != dims.input
            || wh != [3 * hidden, hidden]
            || self.shape(b_ih) != [3 * hidden]
            || self.shape(b_hh) != [3 * hidden]
        {
            return Err(shape_err(format!(
                "gru parameters inconsistent with input {} hidden {hidden}",
                dims.input
            )));
        }
        if let Some(h) = h0 {
            if self.shape(h) != [dims.batch, hidden] {
                return Err(shape_err(format!("gru state {:?}", self.shape(h))));
            }
        }
        let (out, cache) = kernels::gru_forward(
            &self.value(input).data,
            h0.map(|h| self.value(h).data.as_slice()),
            &self.value(w_ih).data,
            &self.value(w_hh).data,
            &self.value(b_ih).data,
            &self.value(b_hh).data,
            dims,
        );
        let v = Tensor {
            shape: vec![dims.batch, dims.steps, hidden],
            data: out,
        };
        let inputs: Vec<Var> = [Some(input), h0, Some(w_ih), Some(w_hh), Some(b_ih), Some(b_hh)]
            .into_iter()
            .flatten()
            .collect();
        Ok(self.push(
            v,
            Op::Gru {
                input,
                h0,
                w_ih,
                w_hh,
                b_ih,
                b_hh,
                dims,
                cache,
            },
            &inputs,
        ))
    }

    /// Per-instance, per-channel normalization over the last axis of `[B, C, L]`.
    pub fn instance_norm(&mut self, input: Var, gamma: Var, beta: Var, eps: E) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if s.len() != 3 {
            return Err(shape_err(format!("instance norm expects [B, C, L], got {s:?}")));
        }
        if s[2] < 2 {
            return Err(Error::Degenerate(format!(
                "instance norm over {} frame(s)",
                s[2]
            )));
        }
        let channels = s[1];
        if self.shape(gamma) != [channels] || self.shape(beta) != [channels] {
            return Err(shape_err(format!("instance norm affine for {channels} channels")));
        }
        let (y, xhat, inv_std) = kernels::instance_norm_forward(
            &self.value(input).data,
            &self.value(gamma).data,
            &self.value(beta).data,
            channels,
            s[2],
            eps,
        );
        let v = Tensor { shape: s, data: y };
        Ok(self.push(
            v,
            Op::InstanceNorm {
                input,
                gamma,
                beta,
                channels,
                xhat,
                inv_std,
            },
            &[input, gamma, beta],
        ))
    }

    /// Reverse sweep from a one-element `loss`; consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients<E>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward from non-scalar of shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<E>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut seed = self.value(loss).clone();
        seed.data[0] = E::one();
        grads[loss.0] = Some(seed);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let leaves = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(n, g)| match n.op {
                Op::Leaf if n.requires_grad => g,
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: leaves })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<E>>], v: Var, g: Tensor<E>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn like(&self, v: Var, data: Vec<E>) -> Tensor<E> {
        Tensor {
            shape: self.shape(v).to_vec(),
            data,
        }
    }

    fn propagate(&self, node: &Node<E>, g: &Tensor<E>, grads: &mut [Option<Tensor<E>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.value(*a).data, &self.value(*b).data);
                let ga = g.data.iter().zip(vb).map(|(&d, &y)| d * y).collect();
                let gb = g.data.iter().zip(va).map(|(&d, &x)| d * x).collect();
                self.accumulate(grads, *a, self.like(*a, ga));
                self.accumulate(grads, *b, self.like(*b, gb));
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.map(|x| x * *s)),
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let mut ga = vec![E::zero(); m * k];
                kernels::matmul_nt(&g.data, &self.value(*b).data, m, n, k, &mut ga);
                let mut gb = vec![E::zero(); k * n];
                kernels::matmul_tn(&self.value(*a).data, &g.data, m, k, n, &mut gb);
                self.accumulate(grads, *a, self.like(*a, ga));
                self.accumulate(grads, *b, self.like(*b, gb));
            }
            Op::Concat { inputs, axis } => {
                let shape = &g.shape;
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let mut offset = 0;
                for &v in inputs {
                    let len = self.shape(v)[*axis];
                    let mut data = Vec::with_capacity(outer * len * inner);
                    for o in 0..outer {
                        let from = (o * shape[*axis] + offset) * inner;
                        data.extend_from_slice(&g.data[from..from + len * inner]);
                    }
                    offset += len;
                    self.accumulate(grads, v, self.like(v, data));
                }
            }
            Op::Slice { input, axis, start } => {
                let s = self.shape(*input);
                let outer: usize = s[..*axis].iter().product();
                let inner: usize = s[axis + 1..].iter().product();
                let len = g.shape[*axis];
                let mut data = vec![E::zero(); s.iter().product()];
                for o in 0..outer {
                    let to = (o * s[*axis] + start) * inner;
                    let from = o * len * inner;
                    data[to..to + len * inner].copy_from_slice(&g.data[from..from + len * inner]);
                }
                self.accumulate(grads, *input, self.like(*input, data));
            }
            Op::Pad {
                input,
                axis,
                before,
            } => {
                let s = self.shape(*input);
                let outer: usize = s[..*axis].iter().product();
                let inner: usize = s[axis + 1..].iter().product();
                let padded = g.shape[*axis];
                let mut data = Vec::with_capacity(s.iter().product());
                for o in 0..outer {
                    let from = (o * padded + before) * inner;
                    data.extend_from_slice(&g.data[from..from + s[*axis] * inner]);
                }
                self.accumulate(grads, *input, self.like(*input, data));
            }
            Op::Reshape(a) => self.accumulate(grads, *a, self.like(*a, g.data.clone())),
            Op::Permute { input, perm } => {
                let (_, data) = kernels::permute(&g.data, &g.shape, &kernels::inverse_perm(perm));
                self.accumulate(grads, *input, self.like(*input, data));
            }
            Op::Relu(a) => {
                let x = &self.value(*a).data;
                let d = g
                    .data
                    .iter()
                    .zip(x)
                    .map(|(&d, &x)| if x > E::zero() { d } else { E::zero() })
                    .collect();
                self.accumulate(grads, *a, self.like(*a, d));
            }
            Op::Tanh(a) => {
                let d = g
                    .data
                    .iter()
                    .zip(&node.value.data)
                    .map(|(&d, &y)| d * (E::one() - y * y))
                    .collect();
                self.accumulate(grads, *a, self.like(*a, d));
            }
            Op::Sigmoid(a) => {
                let d = g
                    .data
                    .iter()
                    .zip(&node.value.data)
                    .map(|(&d, &y)| d * y * (E::one() - y))
                    .collect();
                self.accumulate(grads, *a, self.like(*a, d));
            }
            Op::Sum(a) => {
                let n = self.value(*a).numel();
                self.accumulate(grads, *a, self.like(*a, vec![g.data[0]; n]));
            }
            Op::CrossEntropy {
                logits,
                targets,
                weights,
                probs,
            } => {
                let classes = self.shape(*logits)[1];
                let mut d = probs.clone();
                for (t, (&c, &w)) in targets.iter().zip(weights).enumerate() {
                    d[t * classes + c] -= E::one();
                    for v in &mut d[t * classes..(t + 1) * classes] {
                        *v *= w * g.data[0];
                    }
                }
                self.accumulate(grads, *logits, self.like(*logits, d));
            }
            Op::Conv {
                input,
                weight,
                bias,
                geom,
            } => {
                let mut gx = vec![E::zero(); self.value(*input).numel()];
                kernels::conv_backward_data(&g.data, &self.value(*weight).data, geom, &mut gx);
                let mut gw = vec![E::zero(); self.value(*weight).numel()];
                kernels::conv_backward_weight(&g.data, &self.value(*input).data, geom, &mut gw);
                self.accumulate(grads, *input, self.like(*input, gx));
                self.accumulate(grads, *weight, self.like(*weight, gw));
                if let Some(b) = bias {
                    let gb = bias_grad(&g.data, geom.batch, geom.c_out, geom.len_out);
                    self.accumulate(grads, *b, self.like(*b, gb));
                }
            }
            Op::TConv {
                input,
                weight,
                bias,
                geom,
            } => {
                // adjoint pair: the forward was conv_backward_data
                let mut gx = vec![E::zero(); self.value(*input).numel()];
                kernels::conv_forward(&g.data, &self.value(*weight).data, geom, &mut gx);
                let mut gw = vec![E::zero(); self.value(*weight).numel()];
                kernels::conv_backward_weight(&self.value(*input).data, &g.data, geom, &mut gw);
                self.accumulate(grads, *input, self.like(*input, gx));
                self.accumulate(grads, *weight, self.like(*weight, gw));
                if let Some(b) = bias {
                    let gb = bias_grad(&g.data, geom.batch, geom.c_in, geom.len_in);
                    self.accumulate(grads, *b, self.like(*b, gb));
                }
            }
            Op::Gru {
                input,
                h0,
                w_ih,
                w_hh,
                b_ih,
                b_hh,
                dims,
                cache,
            } => {
                let gg = kernels::gru_backward(
                    &g.data,
                    &self.value(*input).data,
                    &self.value(*w_ih).data,
                    &self.value(*w_hh).data,
                    cache,
                    *dims,
                );
                self.accumulate(grads, *input, self.like(*input, gg.x));
                if let Some(h) = h0 {
                    self.accumulate(grads, *h, self.like(*h, gg.h0));
                }
                self.accumulate(grads, *w_ih, self.like(*w_ih, gg.w_ih));
                self.accumulate(grads, *w_hh, self.like(*w_hh, gg.w_hh));
                self.accumulate(grads, *b_ih, self.like(*b_ih, gg.b_ih));
                self.accumulate(grads, *b_hh, self.like(*b_hh, gg.b_hh));
            }
            Op::InstanceNorm {
                input,
                gamma,
                beta,
                channels,
                xhat,
                inv_std,
            } => {
                let len = *self.shape(*input).last().unwrap();
                let (gx, ggam, gbet) = kernels::instance_norm_backward(
                    &g.data,
                    xhat,
                    inv_std,
                    &self.value(*gamma).data,
                    *channels,
                    len,
                );
                self.accumulate(grads, *input, self.like(*input, gx));
                self.accumulate(grads, *gamma, self.like(*gamma, ggam));
                self.accumulate(grads, *beta, self.like(*beta, gbet));
            }
        }
    }
}

fn bias_grad<E: Scalar>(g: &[E], batch: usize, channels: usize, len: usize) -> Vec<E> {
    let mut out = vec![E::zero(); channels];
    for b in 0..batch {
        for (c, o) in out.iter_mut().enumerate() {
            *o += g[(b * channels + c) * len..][..len].iter().copied().sum::<E>();
        }
    }
    out
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<E = f32> {
    grads: Vec<Option<Tensor<E>>>,
}

impl<E: Scalar> Gradients<E> {
    /// Gradient of a trainable leaf; `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor<E>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<E>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2, 2], &[1.0, -2.0, 3.0, 4.0]));
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn square_gradient_is_twice_input() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], &[1.0, -2.0, 0.5]));
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn relu_gates_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[-1.0, 2.0]));
        let r = tape.relu(x);
        let s = tape.sum(r);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn uniform_logits_give_log_class_count() {
        let mut tape = Tape::<f64>::new();
        let l = tape.constant(Tensor::zeros(&[3, 41]));
        let ce = tape.cross_entropy(l, &[0, 5, 40], &[1.0; 3]).unwrap();
        assert!((tape.value(ce).item() - 41f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_guards() {
        let mut tape = Tape::<f64>::new();
        let l = tape.constant(Tensor::zeros(&[2, 4]));
        assert!(matches!(tape.cross_entropy(l, &[0, 4], &[1.0, 1.0]), Err(Error::Index(_))));
        assert!(matches!(tape.cross_entropy(l, &[0, 1], &[0.0, 0.0]), Err(Error::Contract(_))));
        assert!(matches!(tape.cross_entropy(l, &[0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_entropy_is_stable_for_large_logits() {
        let mut tape = Tape::<f32>::new();
        let l = tape.constant(Tensor::new(&[1, 3], vec![1000.0, 0.0, -1000.0]).unwrap());
        let ce = tape.cross_entropy(l, &[0], &[1.0]).unwrap();
        assert!(tape.value(ce).item().abs() < 1e-6);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(&[2]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::zeros(&[2]));
        let b = tape.leaf(Tensor::zeros(&[3]));
        assert!(matches!(tape.add(a, b), Err(Error::Shape(_))));
        let m = tape.leaf(Tensor::zeros(&[2, 3]));
        assert!(matches!(tape.matmul(m, m), Err(Error::Shape(_))));
    }

    #[test]
    fn conv_output_lengths() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[1, 2, 8]));
        let w = tape.constant(Tensor::zeros(&[3, 2, 3]));
        let y = tape.conv1d(x, w, None, 2, 1).unwrap();
        assert_eq!(tape.shape(y), &[1, 3, 4]);

        let x = tape.constant(Tensor::zeros(&[1, 2, 4]));
        let w = tape.constant(Tensor::zeros(&[2, 5, 4]));
        let y = tape.tconv1d(x, w, None, 2, 1).unwrap();
        assert_eq!(tape.shape(y), &[1, 5, 8]);
    }

    #[test]
    fn identity_kernel_conv_is_identity() {
        let mut tape = Tape::<f64>::new();
        let data: Vec<f64> = (0..10).map(|v| v as f64 * 0.5).collect();
        let x = tape.constant(t(&[1, 2, 5], &data));
        let w = tape.constant(t(&[2, 2, 1], &[1.0, 0.0, 0.0, 1.0]));
        let y = tape.conv1d(x, w, None, 1, 0).unwrap();
        assert_eq!(tape.value(y).data(), &data[..]);
    }

    #[test]
    fn zero_input_tconv_is_zero() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[2, 3, 4]));
        let w = tape.constant(Tensor::full(&[3, 2, 4], 0.7));
        let y = tape.tconv1d(x, w, None, 2, 1).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn instance_norm_standardizes() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(t(&[1, 2, 4], &[1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0]));
        let gamma = tape.constant(t(&[2], &[1.0, 1.0]));
        let beta = tape.constant(t(&[2], &[0.0, 0.3]));
        let y = tape.instance_norm(x, gamma, beta, 1e-5).unwrap();
        let v = tape.value(y).data();
        let mean: f64 = v[..4].iter().sum::<f64>() / 4.0;
        let var: f64 = v[..4].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
        // constant channel collapses onto beta
        assert!(v[4..].iter().all(|&x| (x - 0.3).abs() < 1e-12));

        let short = tape.constant(Tensor::zeros(&[1, 2, 1]));
        assert!(matches!(
            tape.instance_norm(short, gamma, beta, 1e-5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn zero_gru_stays_zero() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[2, 5, 3]));
        let wi = tape.leaf(Tensor::zeros(&[6, 3]));
        let wh = tape.leaf(Tensor::zeros(&[6, 2]));
        let bi = tape.leaf(Tensor::zeros(&[6]));
        let bh = tape.leaf(Tensor::zeros(&[6]));
        let y = tape.gru(x, None, wi, wh, bi, bh).unwrap();
        assert_eq!(tape.shape(y), &[2, 5, 2]);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn concat_slice_pad_shapes() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(t(&[2, 1], &[1.0, 2.0]));
        let b = tape.leaf(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let s = tape.slice(c, 1, 1, 2).unwrap();
        assert_eq!(tape.value(s).data(), &[3.0, 4.0, 5.0, 6.0]);
        let p = tape.pad(a, 0, 1, 2).unwrap();
        assert_eq!(tape.value(p).data(), &[0.0, 1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        let k = tape.constant(t(&[2], &[3.0, 4.0]));
        let y = tape.mul(x, k).unwrap();
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[3.0, 4.0]);
        assert!(g.get(k).is_none());
    }
}
