use rand::Rng;

use super::layers::{Conv1d, Gru, InstanceNorm, TConv1d};
use super::params::{Bound, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tape, Var};

/// Axes of a `[B, C, F, T]` activation.
pub const CHANNEL_AXIS: usize = 1;
pub const FREQ_AXIS: usize = 2;
pub const TIME_AXIS: usize = 3;

const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PADDING: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Frequency,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::Time => TIME_AXIS,
            Axis::Frequency => FREQ_AXIS,
        }
    }
}

/// `[B, C, F, T]` to `[N, C, L]` with `L` the chosen axis and the other spatial
/// axis folded into the batch.
pub fn fold<E: Scalar>(tape: &mut Tape<E>, x: Var, axis: Axis) -> Result<Var> {
    let s = tape.shape(x).to_vec();
    if s.len() != 4 {
        return Err(Error::Shape(format!("expected [B, C, F, T], got {s:?}")));
    }
    let (b, c, f, t) = (s[0], s[1], s[2], s[3]);
    match axis {
        Axis::Frequency => {
            let p = tape.permute(x, &[0, 3, 1, 2])?;
            tape.reshape(p, &[b * t, c, f])
        }
        Axis::Time => {
            let p = tape.permute(x, &[0, 2, 1, 3])?;
            tape.reshape(p, &[b * f, c, t])
        }
    }
}

/// Inverse of [`fold`]; `other` is the extent of the folded spatial axis.
pub fn unfold<E: Scalar>(
    tape: &mut Tape<E>,
    y: Var,
    axis: Axis,
    batch: usize,
    other: usize,
) -> Result<Var> {
    let s = tape.shape(y).to_vec();
    let (c, l) = (s[1], s[2]);
    let r = tape.reshape(y, &[batch, other, c, l])?;
    match axis {
        Axis::Frequency => tape.permute(r, &[0, 2, 3, 1]),
        Axis::Time => tape.permute(r, &[0, 2, 1, 3]),
    }
}

fn other_extent(shape: &[usize], axis: Axis) -> usize {
    match axis {
        Axis::Frequency => shape[TIME_AXIS],
        Axis::Time => shape[FREQ_AXIS],
    }
}

/// Stride-2 convolution along one axis followed by ReLU; halves that axis
/// (rounding up).
#[derive(Debug, Clone)]
pub struct DownBlock {
    pub axis: Axis,
    conv: Conv1d,
    norm: Option<InstanceNorm>,
}

impl DownBlock {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        axis: Axis,
        c_in: usize,
        c_out: usize,
        pre_norm: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let norm = pre_norm.then(|| InstanceNorm::new(params, &format!("{name}.norm"), c_in));
        let conv = Conv1d::new(params, &format!("{name}.conv"), c_in, c_out, KERNEL, STRIDE, PADDING, rng);
        DownBlock { axis, conv, norm }
    }

    pub fn c_out(&self) -> usize {
        self.conv.c_out
    }

    pub fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Var> {
        let s = tape.shape(x).to_vec();
        if s.len() != 4 || s[CHANNEL_AXIS] != self.conv.c_in {
            return Err(Error::Shape(format!(
                "down block expects [B, {}, F, T], got {s:?}",
                self.conv.c_in
            )));
        }
        let len = s[self.axis.index()];
        if len < 2 {
            return Err(Error::Shape(format!("cannot downsample an extent of {len}")));
        }
        let mut h = fold(tape, x, self.axis)?;
        if len % 2 == 1 {
            h = tape.pad(h, 2, 0, 1)?;
        }
        if let Some(n) = &self.norm {
            h = n.forward(tape, p, h)?;
        }
        let y = self.conv.forward(tape, p, h)?;
        let y = unfold(tape, y, self.axis, s[0], other_extent(&s, self.axis))?;
        Ok(tape.relu(y))
    }
}

/// Stride-2 transposed convolution along one axis, ReLU, then an optional skip
/// concatenated on channels.
#[derive(Debug, Clone)]
pub struct UpBlock {
    pub axis: Axis,
    tconv: TConv1d,
    norm: Option<InstanceNorm>,
}

impl UpBlock {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        axis: Axis,
        c_in: usize,
        c_out: usize,
        pre_norm: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let norm = pre_norm.then(|| InstanceNorm::new(params, &format!("{name}.norm"), c_in));
        let tconv = TConv1d::new(params, &format!("{name}.tconv"), c_in, c_out, KERNEL, STRIDE, PADDING, rng);
        UpBlock { axis, tconv, norm }
    }

    pub fn c_out(&self) -> usize {
        self.tconv.c_out
    }

    /// Transposed convolution and ReLU, without the skip.
    pub fn upsample<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Var> {
        let s = tape.shape(x).to_vec();
        if s.len() != 4 || s[CHANNEL_AXIS] != self.tconv.c_in {
            return Err(Error::Shape(format!(
                "up block expects [B, {}, F, T], got {s:?}",
                self.tconv.c_in
            )));
        }
        let mut h = fold(tape, x, self.axis)?;
        if let Some(n) = &self.norm {
            h = n.forward(tape, p, h)?;
        }
        let y = self.tconv.forward(tape, p, h)?;
        let y = unfold(tape, y, self.axis, s[0], other_extent(&s, self.axis))?;
        Ok(tape.relu(y))
    }

    pub fn forward<E: Scalar>(
        &self,
        tape: &mut Tape<E>,
        p: &Bound,
        x: Var,
        skip: Option<Var>,
    ) -> Result<Var> {
        let y = self.upsample(tape, p, x)?;
        match skip {
            Some(skip) => attach_skip(tape, y, skip, self.axis),
            None => Ok(y),
        }
    }
}

/// Concatenates `skip` onto `y` along channels. The skip must match `y` up to
/// one extra trailing entry of `y` along `axis`, which is cropped.
pub fn attach_skip<E: Scalar>(tape: &mut Tape<E>, y: Var, skip: Var, axis: Axis) -> Result<Var> {
    let ax = axis.index();
    let (ys, ss) = (tape.shape(y).to_vec(), tape.shape(skip).to_vec());
    let spatial_ok = ys.len() == 4
        && ss.len() == 4
        && ss[0] == ys[0]
        && (0..4).all(|i| i == CHANNEL_AXIS || i == ax || ss[i] == ys[i]);
    if !spatial_ok || !(ys[ax] == ss[ax] || ys[ax] == ss[ax] + 1) {
        return Err(Error::Shape(format!("skip {ss:?} does not fit upsampled {ys:?}")));
    }
    let y = if ys[ax] != ss[ax] {
        tape.slice(y, ax, 0, ss[ax])?
    } else {
        y
    };
    tape.concat(&[y, skip], CHANNEL_AXIS)
}

/// Optional instance norm then a GRU along time, applied per frequency row.
#[derive(Debug, Clone)]
pub struct NormGru {
    norm: Option<InstanceNorm>,
    gru: Gru,
}

impl NormGru {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        channels: usize,
        hidden: usize,
        use_norm: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let norm = use_norm.then(|| InstanceNorm::new(params, &format!("{name}.norm"), channels));
        let gru = Gru::new(params, &format!("{name}.gru"), channels, hidden, rng);
        NormGru { norm, gru }
    }

    pub fn hidden(&self) -> usize {
        self.gru.hidden
    }

    /// `[B, C, F, T] -> [B, H, F, T]`
    pub fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Var> {
        let s = tape.shape(x).to_vec();
        if s.len() != 4 || s[CHANNEL_AXIS] != self.gru.input {
            return Err(Error::Shape(format!(
                "norm-gru block expects [B, {}, F, T], got {s:?}",
                self.gru.input
            )));
        }
        let mut h = fold(tape, x, Axis::Time)?;
        if let Some(n) = &self.norm {
            h = n.forward(tape, p, h)?;
        }
        let seq = tape.permute(h, &[0, 2, 1])?;
        let out = self.gru.forward(tape, p, seq)?;
        let out = tape.permute(out, &[0, 2, 1])?;
        unfold(tape, out, Axis::Time, s[0], s[FREQ_AXIS])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn input(tape: &mut Tape<f32>, shape: &[usize]) -> Var {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|i| ((i * 37 % 11) as f32 - 5.0) * 0.1).collect();
        tape.constant(Tensor::new(shape, data).unwrap())
    }

    #[test]
    fn fold_unfold_round_trip() {
        let mut tape = Tape::<f32>::new();
        let x = input(&mut tape, &[2, 3, 4, 5]);
        for axis in [Axis::Time, Axis::Frequency] {
            let f = fold(&mut tape, x, axis).unwrap();
            let u = unfold(&mut tape, f, axis, 2, if axis == Axis::Time { 4 } else { 5 }).unwrap();
            assert_eq!(tape.value(u), tape.value(x));
        }
    }

    #[test]
    fn frequency_down_block_halves_512() {
        let mut params = ParamSet::new();
        let block = DownBlock::new(&mut params, "d", Axis::Frequency, 1, 2, false, &mut rng());
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let x = input(&mut tape, &[1, 1, 512, 3]);
        let y = block.forward(&mut tape, &p, x).unwrap();
        assert_eq!(tape.shape(y), &[1, 2, 256, 3]);
    }

    #[test]
    fn three_time_down_blocks_divide_by_eight() {
        let mut params = ParamSet::new();
        let blocks: Vec<_> = (0..3)
            .map(|i| DownBlock::new(&mut params, &format!("d{i}"), Axis::Time, 2, 2, false, &mut rng()))
            .collect();
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let mut x = input(&mut tape, &[1, 2, 3, 40]);
        for b in &blocks {
            x = b.forward(&mut tape, &p, x).unwrap();
        }
        assert_eq!(tape.shape(x), &[1, 2, 3, 5]);
    }

    #[test]
    fn odd_extent_rounds_up() {
        let mut params = ParamSet::new();
        let block = DownBlock::new(&mut params, "d", Axis::Time, 1, 1, false, &mut rng());
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let x = input(&mut tape, &[1, 1, 2, 7]);
        let y = block.forward(&mut tape, &p, x).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, 2, 4]);
        let x = input(&mut tape, &[1, 1, 2, 1]);
        assert!(matches!(block.forward(&mut tape, &p, x), Err(Error::Shape(_))));
    }

    #[test]
    fn up_block_doubles_and_concatenates() {
        let mut params = ParamSet::new();
        let up = UpBlock::new(&mut params, "u", Axis::Time, 3, 2, false, &mut rng());
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let x = input(&mut tape, &[1, 3, 2, 4]);
        let y = up.forward(&mut tape, &p, x, None).unwrap();
        assert_eq!(tape.shape(y), &[1, 2, 2, 8]);
        let skip = input(&mut tape, &[1, 5, 2, 8]);
        let y = up.forward(&mut tape, &p, x, Some(skip)).unwrap();
        assert_eq!(tape.shape(y), &[1, 7, 2, 8]);
        // an odd skip crops the upsampled extent by one
        let skip = input(&mut tape, &[1, 5, 2, 7]);
        let y = up.forward(&mut tape, &p, x, Some(skip)).unwrap();
        assert_eq!(tape.shape(y), &[1, 7, 2, 7]);
        let skip = input(&mut tape, &[1, 5, 2, 6]);
        assert!(matches!(up.forward(&mut tape, &p, x, Some(skip)), Err(Error::Shape(_))));
    }

    #[test]
    fn down_then_up_restores_extent() {
        for len in [4usize, 5, 8, 13, 40] {
            let mut params = ParamSet::new();
            let down = DownBlock::new(&mut params, "d", Axis::Frequency, 1, 2, true, &mut rng());
            let up = UpBlock::new(&mut params, "u", Axis::Frequency, 2, 1, true, &mut rng());
            let mut tape = Tape::new();
            let p = params.bind(&mut tape);
            let x = input(&mut tape, &[2, 1, len, 3]);
            let h = down.forward(&mut tape, &p, x).unwrap();
            assert_eq!(tape.shape(h)[2], len.div_ceil(2));
            let y = up.forward(&mut tape, &p, h, Some(x)).unwrap();
            assert_eq!(tape.shape(y), &[2, 2, len, 3]);
        }
    }

    #[test]
    fn constant_input_through_norm_gru_with_zero_weights_is_zero() {
        let mut params = ParamSet::new();
        let block = NormGru::new(&mut params, "g", 3, 4, true, &mut rng());
        for v in params.values_mut() {
            if v.shape().len() == 2 || v.shape() == [12] {
                *v = Tensor::zeros(v.shape());
            }
        }
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let x = tape.constant(Tensor::full(&[1, 3, 2, 6], 0.7));
        let y = block.forward(&mut tape, &p, x).unwrap();
        assert_eq!(tape.shape(y), &[1, 4, 2, 6]);
        assert!(tape.value(y).data().iter().all(|v: &f32| v.abs() < 1e-6));
    }

    #[test]
    fn blocks_are_deterministic() {
        let mut params = ParamSet::new();
        let block = NormGru::new(&mut params, "g", 2, 3, true, &mut rng());
        let run = || {
            let mut tape = Tape::<f32>::new();
            let p = params.bind(&mut tape);
            let x = input(&mut tape, &[2, 2, 3, 5]);
            let y = block.forward(&mut tape, &p, x).unwrap();
            tape.value(y).clone()
        };
        assert_eq!(run(), run());
    }
}
