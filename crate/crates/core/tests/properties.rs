mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::segments::{WordLayout, SEGMENT_PAUSE};
use speech2sing::data::toy::toy_samples;
use speech2sing::data::{
    make_batch, plan_samples, word_runs, Alignment, FeatureItem, SampleConfig,
};
use speech2sing::eval::{yin_f0, YinConfig};
use speech2sing::model::{ModelConfig, StsModel, Variant};
use speech2sing::prep::{
    pitch_shift, rasterize_contour, remove_silent_frames, time_stretch, LogMagSpectrogram,
    MelodyContour,
};
use speech2sing::signal::{resample, Waveform};
use speech2sing::train::batch_loss;

fn noise(rng: &mut ChaCha8Rng, len: usize, amp: f32) -> Vec<f32> {
    (0..len).map(|_| rng.gen_range(-amp..amp)).collect()
}

fn tone(freq: f64, len: usize) -> Waveform {
    Waveform::new(
        (0..len)
            .map(|i| (0.4 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()) as f32)
            .collect(),
        16000,
    )
}

fn median_f0(w: &Waveform) -> f64 {
    let c = yin_f0(w, &YinConfig::default());
    let mut v: Vec<f64> = c.f0.iter().filter(|&&f| f > 0.0).map(|&f| f as f64).collect();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn random_item(rng: &mut ChaCha8Rng, frames: usize) -> FeatureItem {
    let spec = |rng: &mut ChaCha8Rng| LogMagSpectrogram {
        n_bins: 513,
        n_frames: frames,
        values: (0..513 * frames).map(|_| rng.gen_range(0.0..3.0)).collect(),
        frame_hop: 0.016,
    };
    let contour = MelodyContour::new(
        (0..frames)
            .map(|_| if rng.gen_bool(0.7) { rng.gen_range(100.0..800.0) } else { 0.0 })
            .collect(),
    );
    FeatureItem {
        x: spec(rng),
        c: rasterize_contour(&contour, 513, 1024, 16000).unwrap(),
        y: spec(rng),
        phones: (0..frames).map(|_| rng.gen_range(0..41)).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn word_run_count_matches_closed_form(n in 0usize..40) {
        let closed: usize = (3..=n).map(|k| n - k + 1).sum();
        prop_assert_eq!(word_runs(n, 3).len(), closed);
    }

    #[test]
    fn planned_samples_match_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = WordLayout::random(&mut rng, 14);
        let sung = layout.annotation(&mut rng);
        let read = layout.annotation(&mut rng);
        let cfg = SampleConfig { segment_pause: SEGMENT_PAUSE, ..SampleConfig::default() };
        let got: std::collections::BTreeSet<_> =
            plan_samples(&read, &sung, &cfg).unwrap().into_iter().map(|p| p.words).collect();
        prop_assert_eq!(got, layout.brute_force_runs(cfg.min_words));
    }

    #[test]
    fn resampling_is_linear(seed in any::<u64>(), gain in -4.0f32..4.0, to in prop_oneof![Just(8000u32), Just(22050), Just(44100)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Waveform::new(noise(&mut rng, 2000, 0.2), 16000);
        let scaled = Waveform::new(x.samples.iter().map(|v| v * gain).collect(), 16000);
        let a = resample(&x, to);
        let b = resample(&scaled, to);
        for (p, q) in a.samples.iter().zip(&b.samples) {
            prop_assert!((p * gain - q).abs() < 1e-6);
        }
    }

    #[test]
    fn silence_removal_is_idempotent(seed in any::<u64>(), gaps in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        for _ in 0..gaps {
            let len = rng.gen_range(3000..9000);
            x.extend(noise(&mut rng, len, 0.3));
            x.extend(vec![0.0; rng.gen_range(0..6000)]);
        }
        let once = remove_silent_frames(&Waveform::new(x, 16000)).unwrap();
        let twice = remove_silent_frames(&once).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn batch_masks_count_real_frames(seed in any::<u64>(), lens in proptest::collection::vec(1usize..40, 1..4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items: Vec<FeatureItem> = lens.iter().map(|&t| random_item(&mut rng, t)).collect();
        let batch = make_batch(&items, None).unwrap();
        prop_assert_eq!(batch.frames % 8, 0);
        prop_assert!(batch.frames >= *lens.iter().max().unwrap());
        for (b, &t) in lens.iter().enumerate() {
            let row = &batch.mask[b * batch.frames..(b + 1) * batch.frames];
            prop_assert_eq!(row.iter().sum::<f32>() as usize, t);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn stretch_there_and_back_keeps_duration(rate in 0.5f64..2.0) {
        let w = tone(220.0, 16000);
        let there = time_stretch(&w, rate).unwrap();
        let back = time_stretch(&there, 1.0 / rate).unwrap();
        prop_assert!((back.len() as f64 - w.len() as f64).abs() <= 2.0 * 256.0);
    }

    #[test]
    fn pitch_shift_scales_detected_f0(semitones in -12.0f64..12.0) {
        let w = tone(200.0, 16000);
        let ratio = median_f0(&pitch_shift(&w, semitones).unwrap()) / median_f0(&w);
        prop_assert!((ratio / 2f64.powf(semitones / 12.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn inference_keeps_the_input_shape(frames in 1usize..70, seed in 0u64..4) {
        let model = StsModel::new(ModelConfig::small(Variant::PMse).with_seed(seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let item = random_item(&mut rng, frames);
        let y = model.predict_log_mag(&item.x, Some(&item.c)).unwrap();
        prop_assert_eq!((y.n_bins, y.n_frames), (513, frames));
        prop_assert!(y.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn reported_total_is_mse_plus_weighted_ce(lambda in 0.0f64..2.0) {
        let samples = toy_samples(1);
        let items: Vec<FeatureItem> = samples[..2]
            .iter()
            .map(|s| FeatureItem::from_sample(s, Alignment::Uniform, 0.0).unwrap())
            .collect();
        let batch = make_batch(&items, None).unwrap();
        let model = StsModel::new(ModelConfig::small(Variant::PMtl).with_seed(2)).unwrap();
        let r = batch_loss(&model, &batch, lambda, false).unwrap();
        prop_assert!((r.total - (r.mse + lambda * r.ce)).abs() < 1e-6 * r.total.max(1.0));
    }
}
