//! Raw loops behind the differentiable ops. Every output element is
//! accumulated in a fixed order, so results are bit-reproducible.

use super::{strides, Scalar};

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Length of the convolution input (the transposed conv output).
    pub len_in: usize,
    /// Length of the convolution output (the transposed conv input).
    pub len_out: usize,
}

impl ConvGeom {
    /// Output positions `l` for which `l * stride + k - padding` falls inside the input.
    fn valid_range(&self, k: usize) -> (usize, usize) {
        let (s, p) = (self.stride as isize, self.padding as isize);
        let k = k as isize;
        let lo = if p - k > 0 { (p - k + s - 1) / s } else { 0 };
        let hi = (self.len_in as isize - 1 + p - k).div_euclid(s) + 1;
        let hi = hi.clamp(0, self.len_out as isize);
        (lo.min(hi) as usize, hi as usize)
    }
}

/// Unfolds `x: [B, C_in, L_in]` into `[C_in * K, B * L_out]` columns, zero
/// where a tap falls into the padding.
fn im2col<E: Scalar>(x: &[E], g: &ConvGeom) -> Vec<E> {
    let n = g.batch * g.len_out;
    let mut col = vec![E::zero(); g.c_in * g.kernel * n];
    for ci in 0..g.c_in {
        for k in 0..g.kernel {
            let (l0, l1) = g.valid_range(k);
            let dst_row = &mut col[(ci * g.kernel + k) * n..][..n];
            for b in 0..g.batch {
                let xrow = &x[(b * g.c_in + ci) * g.len_in..][..g.len_in];
                let dst = &mut dst_row[b * g.len_out..][..g.len_out];
                for l in l0..l1 {
                    dst[l] = xrow[l * g.stride + k - g.padding];
                }
            }
        }
    }
    col
}

/// `[B, C, L]` to channel-major `[C, B * L]`.
fn to_channel_major<E: Scalar>(y: &[E], batch: usize, channels: usize, len: usize) -> Vec<E> {
    let mut out = vec![E::zero(); y.len()];
    for b in 0..batch {
        for c in 0..channels {
            out[(c * batch + b) * len..][..len].copy_from_slice(&y[(b * channels + c) * len..][..len]);
        }
    }
    out
}

/// y[b, co, l] += sum_{ci, k} w[co, ci, k] * x[b, ci, l*s + k - p]
pub(crate) fn conv_forward<E: Scalar>(x: &[E], w: &[E], g: &ConvGeom, y: &mut [E]) {
    let n = g.batch * g.len_out;
    let col = im2col(x, g);
    let mut out = vec![E::zero(); g.c_out * n];
    matmul(w, &col, g.c_out, g.c_in * g.kernel, n, &mut out);
    for co in 0..g.c_out {
        for b in 0..g.batch {
            let src = &out[co * n + b * g.len_out..][..g.len_out];
            let dst = &mut y[(b * g.c_out + co) * g.len_out..][..g.len_out];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += v;
            }
        }
    }
}

/// gx[b, ci, j] += sum_{co, k} w[co, ci, k] * gy[b, co, l], j = l*s + k - p
pub(crate) fn conv_backward_data<E: Scalar>(gy: &[E], w: &[E], g: &ConvGeom, gx: &mut [E]) {
    let n = g.batch * g.len_out;
    let gy_cm = to_channel_major(gy, g.batch, g.c_out, g.len_out);
    let mut gcol = vec![E::zero(); g.c_in * g.kernel * n];
    matmul_tn(w, &gy_cm, g.c_out, g.c_in * g.kernel, n, &mut gcol);
    for ci in 0..g.c_in {
        for k in 0..g.kernel {
            let (l0, l1) = g.valid_range(k);
            let src_row = &gcol[(ci * g.kernel + k) * n..][..n];
            for b in 0..g.batch {
                let gxrow = &mut gx[(b * g.c_in + ci) * g.len_in..][..g.len_in];
                let src = &src_row[b * g.len_out..][..g.len_out];
                for l in l0..l1 {
                    gxrow[l * g.stride + k - g.padding] += src[l];
                }
            }
        }
    }
}

/// gw[co, ci, k] += sum_{b, l} gy[b, co, l] * x[b, ci, l*s + k - p]
pub(crate) fn conv_backward_weight<E: Scalar>(gy: &[E], x: &[E], g: &ConvGeom, gw: &mut [E]) {
    let n = g.batch * g.len_out;
    let col = im2col(x, g);
    let gy_cm = to_channel_major(gy, g.batch, g.c_out, g.len_out);
    matmul_nt(&gy_cm, &col, g.c_out, n, g.c_in * g.kernel, gw);
}

pub(crate) fn matmul<E: Scalar>(a: &[E], b: &[E], m: usize, k: usize, n: usize, out: &mut [E]) {
    for i in 0..m {
        let orow = &mut out[i * n..][..n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..][..n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
}

/// out = a^T b, a: [k, m], b: [k, n]
pub(crate) fn matmul_tn<E: Scalar>(a: &[E], b: &[E], k: usize, m: usize, n: usize, out: &mut [E]) {
    for p in 0..k {
        let brow = &b[p * n..][..n];
        for i in 0..m {
            let av = a[p * m + i];
            let orow = &mut out[i * n..][..n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
}

/// Dot product with eight interleaved partial sums, combined in a fixed order.
pub(crate) fn dot<E: Scalar>(a: &[E], b: &[E]) -> E {
    let mut lanes = [E::zero(); 8];
    let chunks = a.len() / 8;
    for (ca, cb) in a.chunks_exact(8).zip(b.chunks_exact(8)) {
        for i in 0..8 {
            lanes[i] += ca[i] * cb[i];
        }
    }
    let mut acc = E::zero();
    for (&x, &y) in a[chunks * 8..].iter().zip(&b[chunks * 8..]) {
        acc += x * y;
    }
    let pairs = [lanes[0] + lanes[4], lanes[1] + lanes[5], lanes[2] + lanes[6], lanes[3] + lanes[7]];
    acc + (pairs[0] + pairs[2]) + (pairs[1] + pairs[3])
}

/// out = a b^T, a: [m, k], b: [n, k]
pub(crate) fn matmul_nt<E: Scalar>(a: &[E], b: &[E], m: usize, k: usize, n: usize, out: &mut [E]) {
    for i in 0..m {
        let arow = &a[i * k..][..k];
        for j in 0..n {
            out[i * n + j] += dot(arow, &b[j * k..][..k]);
        }
    }
}

pub(crate) fn permute<E: Scalar>(x: &[E], shape: &[usize], perm: &[usize]) -> (Vec<usize>, Vec<E>) {
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let in_strides = strides(shape);
    // stride in the input for each output axis
    let src: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let rank = out_shape.len();
    if n == 0 || rank == 0 {
        out.extend_from_slice(x);
        return (out_shape, out);
    }
    let inner = out_shape[rank - 1];
    let inner_stride = src[rank - 1];
    let mut idx = vec![0usize; rank - 1];
    let mut offset = 0usize;
    for _ in 0..n / inner {
        if inner_stride == 1 {
            out.extend_from_slice(&x[offset..offset + inner]);
        } else {
            out.extend(x[offset..].iter().step_by(inner_stride).take(inner).copied());
        }
        for ax in (0..rank - 1).rev() {
            idx[ax] += 1;
            offset += src[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            offset -= src[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    (out_shape, out)
}

pub(crate) fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub(crate) fn sigmoid<E: Scalar>(x: E) -> E {
    if x >= E::zero() {
        E::one() / (E::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (E::one() + e)
    }
}

/// Per-step activations the GRU backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct GruCache<E> {
    /// [B, T, H] each
    pub z: Vec<E>,
    pub r: Vec<E>,
    pub n: Vec<E>,
    pub hn: Vec<E>,
    /// hidden state entering each step, [B, T, H]
    pub h_prev: Vec<E>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GruDims {
    pub batch: usize,
    pub steps: usize,
    pub input: usize,
    pub hidden: usize,
}

/// GRU over `x: [B, T, C]` with gate rows ordered (update, reset, candidate).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_forward<E: Scalar>(
    x: &[E],
    h0: Option<&[E]>,
    w_ih: &[E],
    w_hh: &[E],
    b_ih: &[E],
    b_hh: &[E],
    d: GruDims,
) -> (Vec<E>, GruCache<E>) {
    let GruDims {
        batch,
        steps,
        input,
        hidden: h,
    } = d;
    let total = batch * steps * h;
    let mut out = vec![E::zero(); total];
    let mut cache = GruCache {
        z: vec![E::zero(); total],
        r: vec![E::zero(); total],
        n: vec![E::zero(); total],
        hn: vec![E::zero(); total],
        h_prev: vec![E::zero(); total],
    };
    let mut gi = vec![E::zero(); 3 * h];
    let mut gh = vec![E::zero(); 3 * h];
    let mut state = vec![E::zero(); h];
    for b in 0..batch {
        match h0 {
            Some(h0) => state.copy_from_slice(&h0[b * h..(b + 1) * h]),
            None => state.iter_mut().for_each(|s| *s = E::zero()),
        }
        for t in 0..steps {
            let xt = &x[(b * steps + t) * input..][..input];
            gi.copy_from_slice(b_ih);
            gh.copy_from_slice(b_hh);
            for row in 0..3 * h {
                let wi = &w_ih[row * input..][..input];
                let mut acc = E::zero();
                for c in 0..input {
                    acc += wi[c] * xt[c];
                }
                gi[row] += acc;
                let wh = &w_hh[row * h..][..h];
                let mut acc = E::zero();
                for j in 0..h {
                    acc += wh[j] * state[j];
                }
                gh[row] += acc;
            }
            let base = (b * steps + t) * h;
            for j in 0..h {
                let z = sigmoid(gi[j] + gh[j]);
                let r = sigmoid(gi[h + j] + gh[h + j]);
                let n = (gi[2 * h + j] + r * gh[2 * h + j]).tanh();
                cache.z[base + j] = z;
                cache.r[base + j] = r;
                cache.n[base + j] = n;
                cache.hn[base + j] = gh[2 * h + j];
                cache.h_prev[base + j] = state[j];
                let next = (E::one() - z) * n + z * state[j];
                out[base + j] = next;
            }
            state.copy_from_slice(&out[base..base + h]);
        }
    }
    (out, cache)
}

pub(crate) struct GruGrads<E> {
    pub x: Vec<E>,
    pub h0: Vec<E>,
    pub w_ih: Vec<E>,
    pub w_hh: Vec<E>,
    pub b_ih: Vec<E>,
    pub b_hh: Vec<E>,
}

/// Backpropagation through time for [`gru_forward`].
pub(crate) fn gru_backward<E: Scalar>(
    gout: &[E],
    x: &[E],
    w_ih: &[E],
    w_hh: &[E],
    cache: &GruCache<E>,
    d: GruDims,
) -> GruGrads<E> {
    let GruDims {
        batch,
        steps,
        input,
        hidden: h,
    } = d;
    let mut g = GruGrads {
        x: vec![E::zero(); x.len()],
        h0: vec![E::zero(); batch * h],
        w_ih: vec![E::zero(); w_ih.len()],
        w_hh: vec![E::zero(); w_hh.len()],
        b_ih: vec![E::zero(); 3 * h],
        b_hh: vec![E::zero(); 3 * h],
    };
    let mut dh = vec![E::zero(); h];
    let mut dgi = vec![E::zero(); 3 * h];
    let mut dgh = vec![E::zero(); 3 * h];
    let mut dh_prev = vec![E::zero(); h];
    for b in 0..batch {
        dh.iter_mut().for_each(|v| *v = E::zero());
        for t in (0..steps).rev() {
            let base = (b * steps + t) * h;
            for j in 0..h {
                dh[j] += gout[base + j];
            }
            for j in 0..h {
                let (z, r, n) = (cache.z[base + j], cache.r[base + j], cache.n[base + j]);
                let hp = cache.h_prev[base + j];
                let dz = dh[j] * (hp - n);
                let dn = dh[j] * (E::one() - z);
                dh_prev[j] = dh[j] * z;
                let dan = dn * (E::one() - n * n);
                let dr = dan * cache.hn[base + j];
                let dar = dr * r * (E::one() - r);
                let daz = dz * z * (E::one() - z);
                dgi[j] = daz;
                dgi[h + j] = dar;
                dgi[2 * h + j] = dan;
                dgh[j] = daz;
                dgh[h + j] = dar;
                dgh[2 * h + j] = dan * r;
            }
            let xt = &x[(b * steps + t) * input..][..input];
            let gxt = &mut g.x[(b * steps + t) * input..][..input];
            let hp = &cache.h_prev[base..base + h];
            for row in 0..3 * h {
                let (di, dhh) = (dgi[row], dgh[row]);
                g.b_ih[row] += di;
                g.b_hh[row] += dhh;
                let wi = &w_ih[row * input..][..input];
                let gwi = &mut g.w_ih[row * input..][..input];
                for c in 0..input {
                    gwi[c] += di * xt[c];
                    gxt[c] += wi[c] * di;
                }
                let wh = &w_hh[row * h..][..h];
                let gwh = &mut g.w_hh[row * h..][..h];
                for j in 0..h {
                    gwh[j] += dhh * hp[j];
                    dh_prev[j] += wh[j] * dhh;
                }
            }
            dh.copy_from_slice(&dh_prev);
        }
        g.h0[b * h..(b + 1) * h].copy_from_slice(&dh);
    }
    g
}

/// Normalizes each `[b, c, :]` row; returns (y, xhat, inv_std per row).
pub(crate) fn instance_norm_forward<E: Scalar>(
    x: &[E],
    gamma: &[E],
    beta: &[E],
    channels: usize,
    len: usize,
    eps: E,
) -> (Vec<E>, Vec<E>, Vec<E>) {
    let rows = x.len() / len;
    let n = E::from_usize(len).unwrap();
    let mut y = vec![E::zero(); x.len()];
    let mut xhat = vec![E::zero(); x.len()];
    let mut inv_std = vec![E::zero(); rows];
    for row in 0..rows {
        let c = row % channels;
        let xs = &x[row * len..][..len];
        let mean = xs.iter().copied().sum::<E>() / n;
        let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<E>() / n;
        let is = E::one() / (var + eps).sqrt();
        inv_std[row] = is;
        for i in 0..len {
            let xh = (xs[i] - mean) * is;
            xhat[row * len + i] = xh;
            y[row * len + i] = gamma[c] * xh + beta[c];
        }
    }
    (y, xhat, inv_std)
}

/// Returns (gx, ggamma, gbeta).
pub(crate) fn instance_norm_backward<E: Scalar>(
    gy: &[E],
    xhat: &[E],
    inv_std: &[E],
    gamma: &[E],
    channels: usize,
    len: usize,
) -> (Vec<E>, Vec<E>, Vec<E>) {
    let rows = gy.len() / len;
    let n = E::from_usize(len).unwrap();
    let mut gx = vec![E::zero(); gy.len()];
    let mut gg = vec![E::zero(); channels];
    let mut gb = vec![E::zero(); channels];
    for row in 0..rows {
        let c = row % channels;
        let g = &gy[row * len..][..len];
        let xh = &xhat[row * len..][..len];
        let mut sum_d = E::zero();
        let mut sum_dx = E::zero();
        for i in 0..len {
            gg[c] += g[i] * xh[i];
            gb[c] += g[i];
            let d = g[i] * gamma[c];
            sum_d += d;
            sum_dx += d * xh[i];
        }
        let scale = inv_std[row] / n;
        for i in 0..len {
            let d = g[i] * gamma[c];
            gx[row * len + i] = scale * (n * d - sum_d - xh[i] * sum_dx);
        }
    }
    (gx, gg, gb)
}
