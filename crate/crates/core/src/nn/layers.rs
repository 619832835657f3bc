use rand::Rng;

use super::params::{Bound, ParamId, ParamSet};
use crate::error::Result;
use crate::tensor::{Scalar, Tape, Tensor, Var};

pub const IN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    weight: ParamId,
    bias: ParamId,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = c_in * kernel;
        let weight = params.add_uniform(format!("{name}.weight"), &[c_out, c_in, kernel], fan_in, rng);
        let bias = params.add_uniform(format!("{name}.bias"), &[c_out], fan_in, rng);
        Conv1d {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
            weight,
            bias,
        }
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    /// `[N, C_in, L] -> [N, C_out, L']`
    pub fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Var> {
        tape.conv1d(x, p.var(self.weight), Some(p.var(self.bias)), self.stride, self.padding)
    }
}

#[derive(Debug, Clone)]
pub struct TConv1d {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    weight: ParamId,
    bias: ParamId,
}

impl TConv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = c_out * kernel;
        let weight = params.add_uniform(format!("{name}.weight"), &[c_in, c_out, kernel], fan_in, rng);
        let bias = params.add_uniform(format!("{name}.bias"), &[c_out], fan_in, rng);
        TConv1d {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
            weight,
            bias,
        }
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    pub fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Var> {
        tape.tconv1d(x, p.var(self.weight), Some(p.var(self.bias)), self.stride, self.padding)
    }
}

#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub channels: usize,
    gamma: ParamId,
    beta: ParamId,
}

impl InstanceNorm {
    pub fn new(params: &mut ParamSet, name: &str, channels: usize) -> Self {
        let gamma = params.add(format!("{name}.gamma"), Tensor::full(&[channels], 1.0));
        let beta = params.add(format!("{name}.beta"), Tensor::zeros(&[channels]));
        InstanceNorm {
            channels,
            gamma,
            beta,
        }
    }

    /// Normalizes `[N, C, L]` over `L`.
    pub fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Var> {
        tape.instance_norm(x, p.var(self.gamma), p.var(self.beta), E::of(IN_EPS))
    }
}

#[derive(Debug, Clone)]
pub struct Gru {
    pub input: usize,
    pub hidden: usize,
    w_ih: ParamId,
    w_hh: ParamId,
    b_ih: ParamId,
    b_hh: ParamId,
}

impl Gru {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let h3 = 3 * hidden;
        Gru {
            input,
            hidden,
            w_ih: params.add_uniform(format!("{name}.w_ih"), &[h3, input], hidden, rng),
            w_hh: params.add_uniform(format!("{name}.w_hh"), &[h3, hidden], hidden, rng),
            b_ih: params.add_uniform(format!("{name}.b_ih"), &[h3], hidden, rng),
            b_hh: params.add_uniform(format!("{name}.b_hh"), &[h3], hidden, rng),
        }
    }

    pub fn param_ids(&self) -> [ParamId; 4] {
        [self.w_ih, self.w_hh, self.b_ih, self.b_hh]
    }

    /// `[N, T, C] -> [N, T, H]` from a zero initial state.
    pub fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Var> {
        tape.gru(
            x,
            None,
            p.var(self.w_ih),
            p.var(self.w_hh),
            p.var(self.b_ih),
            p.var(self.b_hh),
        )
    }
}
