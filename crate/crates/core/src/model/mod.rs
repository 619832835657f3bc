//! The speech encoder, contour encoder, skip-connected decoder and phoneme
//! decoder, plus the variant switches used for ablations.

mod variant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{
    attach_skip, Axis, Bound, Conv1d, DownBlock, Gru, NormGru, ParamSet, TConv1d, UpBlock,
    FREQ_AXIS,
};
use crate::prep::{ContourImage, LogMagSpectrogram};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::{Scalar, Tape, Tensor, Var};

pub use variant::{Variant, VariantFlags, MTL_LAMBDA};

/// 39 CMU phones plus silence and inhalation.
pub const N_PHONES: usize = 41;
pub const N_BINS: usize = 513;
/// Time and frequency extents are handled in multiples of this.
pub const DOWNSAMPLING: usize = 8;

/// Initial bias of the output layer.
pub const OUTPUT_BIAS_INIT: f32 = 0.1;
const OUTPUT_WEIGHT_SCALE: f32 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Channel widths of the three encoder stages.
    pub widths: [usize; 3],
    pub dp_hidden: usize,
    pub n_bins: usize,
    pub n_phones: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn full(variant: Variant) -> Self {
        ModelConfig {
            variant,
            widths: [32, 64, 128],
            dp_hidden: 64,
            n_bins: N_BINS,
            n_phones: N_PHONES,
            seed: 0,
        }
    }

    /// Narrow plan for quick experiments.
    pub fn small(variant: Variant) -> Self {
        ModelConfig {
            widths: [4, 8, 16],
            dp_hidden: 16,
            ..Self::full(variant)
        }
    }

    /// Plan sized for the synthetic toy corpus.
    pub fn toy(variant: Variant) -> Self {
        ModelConfig {
            widths: [8, 16, 32],
            dp_hidden: 32,
            ..Self::full(variant)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn padded_bins(&self) -> usize {
        self.n_bins.div_ceil(DOWNSAMPLING) * DOWNSAMPLING
    }

    fn validate(&self) -> Result<()> {
        if self.widths.contains(&0) || self.dp_hidden == 0 || self.n_phones == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if self.n_bins < 2 * DOWNSAMPLING {
            return Err(Error::Config(format!("{} bins is too few", self.n_bins)));
        }
        Ok(())
    }
}

/// Six alternating frequency/time down-sampling blocks.
#[derive(Debug, Clone)]
struct Encoder {
    blocks: Vec<DownBlock>,
}

impl Encoder {
    fn new(params: &mut ParamSet, name: &str, widths: [usize; 3], pre_norm: bool, rng: &mut ChaCha8Rng) -> Self {
        let mut blocks = Vec::with_capacity(6);
        let mut c_in = 1;
        for (i, &w) in widths.iter().enumerate() {
            blocks.push(DownBlock::new(params, &format!("{name}.f{i}"), Axis::Frequency, c_in, w, pre_norm, rng));
            blocks.push(DownBlock::new(params, &format!("{name}.t{i}"), Axis::Time, w, w, pre_norm, rng));
            c_in = w;
        }
        Encoder { blocks }
    }

    /// Returns every block's output; the last is the code.
    fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, x: Var) -> Result<Vec<Var>> {
        let mut outs = Vec::with_capacity(self.blocks.len());
        let mut h = x;
        for b in &self.blocks {
            h = b.forward(tape, p, h)?;
            outs.push(h);
        }
        Ok(outs)
    }
}

#[derive(Debug, Clone)]
struct Decoder {
    bottleneck: NormGru,
    /// Time, frequency, time, frequency, time, frequency.
    ups: Vec<UpBlock>,
    mid: NormGru,
    use_skips: bool,
}

impl Decoder {
    fn new(params: &mut ParamSet, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let f = cfg.variant.flags();
        let [w1, w2, w3] = cfg.widths;
        let pre = f.all_norm;
        let latent = if f.use_contour { 2 * w3 } else { w3 };
        let bottleneck = NormGru::new(params, "dec.bottleneck", latent, w3, f.use_in, rng);
        let with_skip = |c: usize| if f.use_skips { 2 * c } else { c };
        let u1 = UpBlock::new(params, "dec.u1", Axis::Time, w3, w3, pre, rng);
        let u2 = UpBlock::new(params, "dec.u2", Axis::Frequency, with_skip(w3), w2, pre, rng);
        let mid = NormGru::new(params, "dec.mid", with_skip(w2), w2, f.use_in, rng);
        let u3 = UpBlock::new(params, "dec.u3", Axis::Time, w2, w2, pre, rng);
        let u4 = UpBlock::new(params, "dec.u4", Axis::Frequency, with_skip(w2), w1, pre, rng);
        let u5 = UpBlock::new(params, "dec.u5", Axis::Time, with_skip(w1), w1, pre, rng);
        let u6 = UpBlock::new(params, "dec.u6", Axis::Frequency, with_skip(w1), 1, pre, rng);
        Decoder {
            bottleneck,
            ups: vec![u1, u2, u3, u4, u5, u6],
            mid,
            use_skips: f.use_skips,
        }
    }

    /// Returns the output `[B, 1, F, T]` and the penultimate frequency block's
    /// activation (before its skip).
    fn forward<E: Scalar>(
        &self,
        tape: &mut Tape<E>,
        p: &Bound,
        latent: Var,
        skips: &[Var],
    ) -> Result<(Var, Var)> {
        // skips[i] is the output of encoder block i
        let skip = |i: usize| if self.use_skips { Some(skips[i]) } else { None };
        let h = self.bottleneck.forward(tape, p, latent)?;
        let h = self.ups[0].forward(tape, p, h, skip(4))?;
        let h = self.ups[1].forward(tape, p, h, skip(3))?;
        let h = self.mid.forward(tape, p, h)?;
        let h = self.ups[2].forward(tape, p, h, skip(2))?;
        let tap = self.ups[3].upsample(tape, p, h)?;
        let h = match skip(1) {
            Some(s) => attach_skip(tape, tap, s, Axis::Frequency)?,
            None => tap,
        };
        let h = self.ups[4].forward(tape, p, h, skip(0))?;
        let out = self.ups[5].forward(tape, p, h, None)?;
        Ok((out, tap))
    }
}

/// Transposed conv over time, GRU, then a 1x1 conv to phone logits.
#[derive(Debug, Clone)]
struct PhonemeDecoder {
    tconv: TConv1d,
    gru: Gru,
    out: Conv1d,
}

impl PhonemeDecoder {
    fn new(params: &mut ParamSet, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let tap_channels = cfg.widths[0] * cfg.padded_bins() / 2;
        let h = cfg.dp_hidden;
        PhonemeDecoder {
            tconv: TConv1d::new(params, "dp.tconv", tap_channels, h, 4, 2, 1, rng),
            gru: Gru::new(params, "dp.gru", h, h, rng),
            out: Conv1d::new(params, "dp.out", h, cfg.n_phones, 1, 1, 0, rng),
        }
    }

    /// `[B, C, F/2, T/2] -> [B * T, N]`
    fn forward<E: Scalar>(&self, tape: &mut Tape<E>, p: &Bound, tap: Var) -> Result<Var> {
        let s = tape.shape(tap).to_vec();
        let (b, t) = (s[0], s[3]);
        let flat = tape.reshape(tap, &[b, s[1] * s[2], t])?;
        let h = self.tconv.forward(tape, p, flat)?;
        let seq = tape.permute(h, &[0, 2, 1])?;
        let g = self.gru.forward(tape, p, seq)?;
        let g = tape.permute(g, &[0, 2, 1])?;
        let logits = self.out.forward(tape, p, g)?;
        let out_t = tape.shape(logits)[2];
        let rows = tape.permute(logits, &[0, 2, 1])?;
        tape.reshape(rows, &[b * out_t, self.out.c_out])
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `[B, F, T]`, non-negative.
    pub prediction: Var,
    /// `[B * T, N]` phone logits, batch-major.
    pub logits: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct StsModel {
    config: ModelConfig,
    params: ParamSet,
    speech_encoder: Encoder,
    contour_encoder: Option<Encoder>,
    decoder: Decoder,
    phoneme_decoder: Option<PhonemeDecoder>,
}

impl StsModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let flags = config.variant.flags();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let speech_encoder = Encoder::new(&mut params, "e1", config.widths, flags.all_norm, &mut rng);
        let contour_encoder = flags
            .use_contour
            .then(|| Encoder::new(&mut params, "e2", config.widths, flags.all_norm, &mut rng));
        let decoder = Decoder::new(&mut params, &config, &mut rng);
        let phoneme_decoder = flags
            .use_dp
            .then(|| PhonemeDecoder::new(&mut params, &config, &mut rng));
        let mut model = StsModel {
            config,
            params,
            speech_encoder,
            contour_encoder,
            decoder,
            phoneme_decoder,
        };
        model.shrink_output_layer();
        Ok(model)
    }

    /// Starts every output unit on the active side of the final ReLU: small
    /// weights and a positive bias, so no output is dead at initialisation.
    fn shrink_output_layer(&mut self) {
        let ids: Vec<_> = self.output_layer_ids().collect();
        for id in ids {
            let is_bias = self.params.name(id).ends_with(".bias");
            let t = self.params.get_mut(id);
            if is_bias {
                *t = Tensor::full(t.shape(), OUTPUT_BIAS_INIT);
            } else {
                *t = t.map(|w| w * OUTPUT_WEIGHT_SCALE);
            }
        }
    }

    fn output_layer_ids(&self) -> impl Iterator<Item = crate::nn::ParamId> + '_ {
        self.params
            .ids()
            .filter(|&id| self.params.name(id).starts_with("dec.u6.tconv"))
    }

    /// Builds a variant by name with the full channel plan.
    pub fn build_variant(name: &str) -> Result<Self> {
        Self::new(ModelConfig::full(name.parse()?))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn flags(&self) -> VariantFlags {
        self.config.variant.flags()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Zeroes the last decoder layer so that every prediction is zero.
    pub fn zero_output_layer(&mut self) {
        let last: Vec<_> = self.output_layer_ids().collect();
        for id in last {
            let t = self.params.get_mut(id);
            *t = Tensor::zeros(t.shape());
        }
    }

    /// `x`, `c`: `[B, F, T]` with `T` a multiple of 8. The contour must be given
    /// exactly when the variant uses it.
    pub fn forward<E: Scalar>(
        &self,
        tape: &mut Tape<E>,
        p: &Bound,
        x: Var,
        c: Option<Var>,
    ) -> Result<ForwardOutput> {
        let s = tape.shape(x).to_vec();
        if s.len() != 3 || s[1] != self.config.n_bins {
            return Err(Error::Shape(format!(
                "expected [B, {}, T] input, got {s:?}",
                self.config.n_bins
            )));
        }
        let (b, t) = (s[0], s[2]);
        if t == 0 || t % DOWNSAMPLING != 0 {
            return Err(Error::Shape(format!("frame count {t} is not a multiple of {DOWNSAMPLING}")));
        }
        let pad = self.config.padded_bins() - self.config.n_bins;
        let lift = |tape: &mut Tape<E>, v: Var| -> Result<Var> {
            let r = tape.reshape(v, &[b, 1, s[1], t])?;
            tape.pad(r, FREQ_AXIS, 0, pad)
        };

        let x4 = lift(tape, x)?;
        let speech = self.speech_encoder.forward(tape, p, x4)?;
        let code = *speech.last().expect("encoder has blocks");
        let latent = match (&self.contour_encoder, c) {
            (Some(enc), Some(c)) => {
                if tape.shape(c) != s.as_slice() {
                    return Err(Error::Shape(format!(
                        "contour {:?} does not match input {s:?}",
                        tape.shape(c)
                    )));
                }
                let c4 = lift(tape, c)?;
                let contour_code = *enc.forward(tape, p, c4)?.last().expect("encoder has blocks");
                tape.concat(&[code, contour_code], 1)?
            }
            (None, None) => code,
            (Some(_), None) => {
                return Err(Error::Contract(format!(
                    "variant {} needs a contour input",
                    self.variant()
                )))
            }
            (None, Some(_)) => {
                return Err(Error::Contract(format!(
                    "variant {} takes no contour input",
                    self.variant()
                )))
            }
        };
        let (out, tap) = self.decoder.forward(tape, p, latent, &speech)?;
        let out = tape.slice(out, FREQ_AXIS, 0, self.config.n_bins)?;
        let prediction = tape.reshape(out, &[b, self.config.n_bins, t])?;
        let logits = match &self.phoneme_decoder {
            Some(dp) => Some(dp.forward(tape, p, tap)?),
            None => None,
        };
        Ok(ForwardOutput { prediction, logits })
    }

    /// Smallest padded frame count the network accepts for `frames` frames.
    pub fn padded_frames(&self, frames: usize) -> usize {
        // instance norm at the bottleneck needs at least two latent frames
        let min = if self.flags().use_in || self.flags().all_norm {
            2 * DOWNSAMPLING
        } else {
            DOWNSAMPLING
        };
        (frames.div_ceil(DOWNSAMPLING).max(1) * DOWNSAMPLING).max(min)
    }

    /// Single-utterance inference: zero-pads time, runs the network in 32-bit
    /// and crops back to the input length.
    pub fn predict_log_mag(
        &self,
        x: &LogMagSpectrogram,
        c: Option<&ContourImage>,
    ) -> Result<LogMagSpectrogram> {
        let t = x.n_frames;
        let tp = self.padded_frames(t);
        let f = x.n_bins;
        let to_tensor = |values: &[f32]| -> Result<Tensor<f32>> {
            let mut data = vec![0.0f32; f * tp];
            for row in 0..f {
                data[row * tp..row * tp + t].copy_from_slice(&values[row * t..(row + 1) * t]);
            }
            Tensor::new(&[1, f, tp], data)
        };
        let mut tape = Tape::<f32>::new();
        let p = self.params.bind(&mut tape);
        let xv = tape.constant(to_tensor(&x.values)?);
        let cv = match c {
            Some(c) => {
                if c.n_bins != f || c.n_frames() != t {
                    return Err(Error::Shape(format!(
                        "contour image {}x{} vs spectrogram {f}x{t}",
                        c.n_bins,
                        c.n_frames()
                    )));
                }
                Some(tape.constant(to_tensor(&c.to_dense())?))
            }
            None => None,
        };
        let out = self.forward(&mut tape, &p, xv, cv)?;
        let y = tape.value(out.prediction).data();
        let mut values = vec![0.0f32; f * t];
        for row in 0..f {
            values[row * t..(row + 1) * t].copy_from_slice(&y[row * tp..row * tp + t]);
        }
        Ok(LogMagSpectrogram {
            n_bins: f,
            n_frames: t,
            values,
            frame_hop: x.frame_hop,
        })
    }

    pub fn header(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let w = c.widths;
        vec![
            ("variant".into(), c.variant.name().into()),
            ("widths".into(), format!("{},{},{}", w[0], w[1], w[2])),
            ("dp_hidden".into(), c.dp_hidden.to_string()),
            ("n_bins".into(), c.n_bins.to_string()),
            ("n_phones".into(), c.n_phones.to_string()),
            ("seed".into(), c.seed.to_string()),
            // width of the decoder activation the phoneme decoder reads
            ("phoneme_tap_channels".into(), w[0].to_string()),
        ]
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.header.extend(self.header());
        self.params.to_checkpoint(&mut ck);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let num = |key: &str| -> Result<usize> {
            ck.header_value(key)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("header `{key}` is not a number")))
        };
        let widths: Vec<usize> = ck
            .header_value("widths")?
            .split(',')
            .map(|w| w.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Checkpoint("bad `widths` header".into()))?;
        let widths: [usize; 3] = widths
            .try_into()
            .map_err(|_| Error::Checkpoint("`widths` needs three entries".into()))?;
        let config = ModelConfig {
            variant: ck
                .header_value("variant")?
                .parse()
                .map_err(|e| Error::Checkpoint(format!("{e}")))?,
            widths,
            dp_hidden: num("dp_hidden")?,
            n_bins: num("n_bins")?,
            n_phones: num("n_phones")?,
            seed: num("seed")? as u64,
        };
        let mut model = StsModel::new(config)?;
        model.params.load_checkpoint(ck)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests;
