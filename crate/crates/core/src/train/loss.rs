use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Tape handles of the objective and its two terms.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub mse: Var,
    pub ce: Option<Var>,
}

/// Spectrogram MSE plus `lambda` times frame-level phoneme cross-entropy.
///
/// `prediction` and `target` are `[B, F, T]`; `mask` and `phones` are
/// `[B * T]`. Each sample's squared error is averaged over its valid
/// `F x T` entries (summed when `sum_mse` is set) and its cross-entropy
/// over its valid frames; both are then averaged over the samples that
/// have any valid frame.
#[allow(clippy::too_many_arguments)]
pub fn mtl_loss<E: Scalar>(
    tape: &mut Tape<E>,
    prediction: Var,
    target: Var,
    logits: Option<Var>,
    phones: &[usize],
    mask: &[f32],
    lambda: f64,
    sum_mse: bool,
) -> Result<LossVars> {
    let shape = tape.shape(prediction).to_vec();
    if shape.len() != 3 || tape.shape(target) != shape.as_slice() {
        return Err(Error::Shape(format!(
            "prediction {shape:?} and target {:?} must be equal [B, F, T]",
            tape.shape(target)
        )));
    }
    let (b, f, t) = (shape[0], shape[1], shape[2]);
    if mask.len() != b * t {
        return Err(Error::Shape(format!("mask has {} entries, expected {}", mask.len(), b * t)));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!("loss weight {lambda} must be finite and >= 0")));
    }
    let valid: Vec<f64> = mask
        .chunks(t)
        .map(|m| m.iter().map(|&v| v as f64).sum())
        .collect();
    let used = valid.iter().filter(|&&n| n > 0.0).count();
    if used == 0 {
        return Err(Error::Contract("no valid frames in the batch".into()));
    }
    let mut weights = vec![E::zero(); b * f * t];
    for bi in 0..b {
        if valid[bi] == 0.0 {
            continue;
        }
        let norm = if sum_mse { used as f64 } else { used as f64 * f as f64 * valid[bi] };
        for row in 0..f {
            let base = (bi * f + row) * t;
            for ti in 0..t {
                weights[base + ti] = E::of(mask[bi * t + ti] as f64 / norm);
            }
        }
    }
    let w = tape.constant(Tensor::new(&shape, weights)?);
    let diff = tape.sub(prediction, target)?;
    let sq = tape.mul(diff, diff)?;
    let weighted = tape.mul(sq, w)?;
    let mse = tape.sum(weighted);

    let ce = match logits {
        Some(l) => {
            if phones.len() != b * t {
                return Err(Error::Shape(format!(
                    "{} phone targets for {} frames",
                    phones.len(),
                    b * t
                )));
            }
            let frame_weights: Vec<E> = (0..b * t)
                .map(|i| {
                    let n = valid[i / t];
                    if n > 0.0 {
                        E::of(mask[i] as f64 / n)
                    } else {
                        E::zero()
                    }
                })
                .collect();
            Some(tape.cross_entropy(l, phones, &frame_weights)?)
        }
        None => None,
    };
    let total = match ce {
        Some(ce) if lambda > 0.0 => {
            let scaled = tape.scale(ce, E::of(lambda));
            tape.add(mse, scaled)?
        }
        _ => mse,
    };
    Ok(LossVars { total, mse, ce })
}
