use super::*;
use crate::tensor::Tape;

fn inputs(tape: &mut Tape<f32>, b: usize, t: usize) -> (Var, Var) {
    let n = b * N_BINS * t;
    let x: Vec<f32> = (0..n).map(|i| ((i * 7919 % 101) as f32) / 50.0).collect();
    let mut c = vec![0.0f32; n];
    for bi in 0..b {
        for ti in 0..t {
            c[(bi * N_BINS + 14 + ti % 5) * t + ti] = 1.0;
        }
    }
    (
        tape.constant(Tensor::new(&[b, N_BINS, t], x).unwrap()),
        tape.constant(Tensor::new(&[b, N_BINS, t], c).unwrap()),
    )
}

fn run(model: &StsModel, b: usize, t: usize) -> (Tensor<f32>, Option<Tensor<f32>>) {
    let mut tape = Tape::new();
    let p = model.params().bind(&mut tape);
    let (x, c) = inputs(&mut tape, b, t);
    let c = model.flags().use_contour.then_some(c);
    let out = model.forward(&mut tape, &p, x, c).unwrap();
    (
        tape.value(out.prediction).clone(),
        out.logits.map(|l| tape.value(l).clone()),
    )
}

#[test]
fn output_matches_input_shape_and_is_non_negative() {
    for v in Variant::ALL {
        let model = StsModel::new(ModelConfig::small(v)).unwrap();
        let (y, logits) = run(&model, 2, 32);
        assert_eq!(y.shape(), &[2, N_BINS, 32], "{v}");
        assert!(y.data().iter().all(|&x| x >= 0.0 && x.is_finite()));
        assert_eq!(logits.is_some(), v == Variant::PMtl);
    }
}

#[test]
fn full_width_plan_handles_128_frames() {
    let model = StsModel::new(ModelConfig::full(Variant::PMse)).unwrap();
    let (y, _) = run(&model, 1, 128);
    assert_eq!(y.shape(), &[1, N_BINS, 128]);
}

#[test]
fn logits_have_one_row_per_frame() {
    let model = StsModel::new(ModelConfig::small(Variant::PMtl)).unwrap();
    let (_, logits) = run(&model, 2, 24);
    assert_eq!(logits.unwrap().shape(), &[2 * 24, N_PHONES]);
}

#[test]
fn zeroed_output_layer_predicts_zero() {
    let mut model = StsModel::new(ModelConfig::small(Variant::PMse)).unwrap();
    model.zero_output_layer();
    let (y, _) = run(&model, 1, 16);
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn zeroed_phoneme_head_gives_uniform_cross_entropy() {
    let mut model = StsModel::new(ModelConfig::small(Variant::PMtl)).unwrap();
    let ids: Vec<_> = model
        .params()
        .ids()
        .filter(|&id| model.params().name(id).starts_with("dp.out"))
        .collect();
    for id in ids {
        let t = model.params_mut().get_mut(id);
        *t = Tensor::zeros(t.shape());
    }
    let mut tape = Tape::<f64>::new();
    let p = model.params().bind(&mut tape);
    let x = tape.constant(Tensor::full(&[1, N_BINS, 16], 0.5));
    let c = tape.constant(Tensor::zeros(&[1, N_BINS, 16]));
    let out = model.forward(&mut tape, &p, x, Some(c)).unwrap();
    let targets: Vec<usize> = (0..16).map(|i| i % N_PHONES).collect();
    let ce = tape.cross_entropy(out.logits.unwrap(), &targets, &[1.0; 16]).unwrap();
    assert!((tape.value(ce).item() - (N_PHONES as f64).ln()).abs() < 1e-12);
}

#[test]
fn phone_loss_reaches_the_shared_decoder() {
    let model = StsModel::new(ModelConfig::small(Variant::PMtl)).unwrap();
    let mut tape = Tape::<f64>::new();
    let p = model.params().bind(&mut tape);
    let x = tape.constant(Tensor::full(&[1, N_BINS, 16], 0.5).map(|v| v));
    let mut cdata = vec![0.0; N_BINS * 16];
    for t in 0..16 {
        cdata[(20 + t) * 16 + t] = 1.0;
    }
    let c = tape.constant(Tensor::new(&[1, N_BINS, 16], cdata).unwrap());
    let out = model.forward(&mut tape, &p, x, Some(c)).unwrap();
    let targets: Vec<usize> = (0..16).map(|i| i % 3).collect();
    let ce = tape.cross_entropy(out.logits.unwrap(), &targets, &[1.0; 16]).unwrap();
    let grads = tape.backward(ce).unwrap();
    let trunk_norm: f64 = model
        .params()
        .ids()
        .filter(|&id| model.params().name(id).starts_with("dec.u1"))
        .filter_map(|id| grads.get(p.var(id)))
        .map(|g| g.dot(g))
        .sum();
    assert!(trunk_norm > 0.0);
    // the final frequency block does not feed the phone head
    let head_free = model
        .params()
        .ids()
        .filter(|&id| model.params().name(id).starts_with("dec.u6"))
        .all(|id| grads.get(p.var(id)).is_none_or(|g| g.dot(g) == 0.0));
    assert!(head_free);
}

#[test]
fn ablation_removes_parameters() {
    let count = |v| StsModel::new(ModelConfig::small(v)).unwrap().params().count();
    assert!(count(Variant::B2) < count(Variant::PMse));
    assert!(count(Variant::B1) < count(Variant::PMse));
    assert!(count(Variant::PMse) < count(Variant::PMtl));
    assert!(count(Variant::PMse) < count(Variant::AllNorm));
}

#[test]
fn encoders_share_an_architecture() {
    let model = StsModel::new(ModelConfig::small(Variant::PMse)).unwrap();
    let shapes = |prefix: &str| -> Vec<(String, Vec<usize>)> {
        model
            .params()
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(n, t)| (n[prefix.len()..].to_string(), t.shape().to_vec()))
            .collect()
    };
    assert!(!shapes("e1.").is_empty());
    assert_eq!(shapes("e1."), shapes("e2."));
}

#[test]
fn contour_contract_is_enforced() {
    let b1 = StsModel::new(ModelConfig::small(Variant::B1)).unwrap();
    let full = StsModel::new(ModelConfig::small(Variant::PMse)).unwrap();
    let mut tape = Tape::<f32>::new();
    let p1 = b1.params().bind(&mut tape);
    let p2 = full.params().bind(&mut tape);
    let (x, c) = inputs(&mut tape, 1, 16);
    assert!(matches!(b1.forward(&mut tape, &p1, x, Some(c)), Err(Error::Contract(_))));
    assert!(matches!(full.forward(&mut tape, &p2, x, None), Err(Error::Contract(_))));
}

#[test]
fn frame_count_must_be_aligned() {
    let model = StsModel::new(ModelConfig::small(Variant::B2)).unwrap();
    let mut tape = Tape::<f32>::new();
    let p = model.params().bind(&mut tape);
    let x = tape.constant(Tensor::zeros(&[1, N_BINS, 12]));
    assert!(matches!(model.forward(&mut tape, &p, x, None), Err(Error::Shape(_))));
    let x = tape.constant(Tensor::zeros(&[1, 100, 16]));
    assert!(matches!(model.forward(&mut tape, &p, x, None), Err(Error::Shape(_))));
}

#[test]
fn unknown_variant_is_a_config_error() {
    assert!(matches!(StsModel::build_variant("B7"), Err(Error::Config(_))));
    assert_eq!(StsModel::build_variant("P-MTL").unwrap().variant(), Variant::PMtl);
}

#[test]
fn forward_is_deterministic_and_seeded() {
    let a = StsModel::new(ModelConfig::small(Variant::PMtl).with_seed(5)).unwrap();
    let b = StsModel::new(ModelConfig::small(Variant::PMtl).with_seed(5)).unwrap();
    assert_eq!(run(&a, 1, 16), run(&b, 1, 16));
    let c = StsModel::new(ModelConfig::small(Variant::PMtl).with_seed(6)).unwrap();
    assert_ne!(a.params(), c.params());
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let model = StsModel::new(ModelConfig::small(Variant::PMtl).with_seed(9)).unwrap();
    let bytes = model.to_checkpoint().to_bytes();
    let back = StsModel::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
    assert_eq!(back.config(), model.config());
    assert_eq!(run(&back, 1, 16), run(&model, 1, 16));
    assert_eq!(
        back.to_checkpoint().header_value("phoneme_tap_channels").unwrap(),
        "4"
    );

    let other = StsModel::new(ModelConfig::small(Variant::PMse)).unwrap();
    let mut ck = other.to_checkpoint();
    ck.header.insert("variant".into(), "P-MTL".into());
    assert!(matches!(StsModel::from_checkpoint(&ck), Err(Error::Checkpoint(_))));
}

#[test]
fn single_utterance_inference_crops_to_input_length() {
    let model = StsModel::new(ModelConfig::small(Variant::PMse)).unwrap();
    let x = LogMagSpectrogram {
        n_bins: N_BINS,
        n_frames: 21,
        values: vec![0.3; N_BINS * 21],
        frame_hop: 0.016,
    };
    let c = ContourImage {
        n_bins: N_BINS,
        bins: vec![Some(20); 21],
    };
    let y = model.predict_log_mag(&x, Some(&c)).unwrap();
    assert_eq!((y.n_bins, y.n_frames), (N_BINS, 21));
    assert_eq!(model.padded_frames(21), 24);
    assert_eq!(model.padded_frames(5), 16);
}

/// Padded frames beyond the input influence the unpadded region through the
/// convolution receptive fields and the instance-norm statistics, so pad
/// content is not transparent. This pins that behavior down.
#[test]
fn pad_content_leaks_into_the_unpadded_region() {
    let model = StsModel::new(ModelConfig::small(Variant::PMse)).unwrap();
    let (t, tp) = (20usize, 24usize);
    let base: Vec<f32> = (0..N_BINS * t).map(|i| ((i * 31 % 17) as f32) / 10.0).collect();
    let build = |reflect: bool| {
        let mut data = vec![0.0f32; N_BINS * tp];
        for f in 0..N_BINS {
            for k in 0..tp {
                let src = if k < t {
                    Some(k)
                } else if reflect {
                    Some(2 * (t - 1) - k)
                } else {
                    None
                };
                if let Some(s) = src {
                    data[f * tp + k] = base[f * t + s];
                }
            }
        }
        Tensor::new(&[1, N_BINS, tp], data).unwrap()
    };
    let eval = |x: Tensor<f32>| {
        let mut tape = Tape::new();
        let p = model.params().bind(&mut tape);
        let xv = tape.constant(x);
        let cv = tape.constant(Tensor::zeros(&[1, N_BINS, tp]));
        let out = model.forward(&mut tape, &p, xv, Some(cv)).unwrap();
        tape.value(out.prediction).clone()
    };
    let (a, b) = (eval(build(false)), eval(build(true)));
    let mut leak = 0.0f32;
    for f in 0..N_BINS {
        for k in 0..t {
            leak = leak.max((a.data()[f * tp + k] - b.data()[f * tp + k]).abs());
        }
    }
    assert!(leak > 1e-5, "expected leakage, got {leak}");
}
