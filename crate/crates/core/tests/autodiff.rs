mod common;

use common::suites;
use speech2sing::tensor::{Tape, Tensor};

const CASES: usize = 20;
const TOL: f64 = 1e-4;

#[test]
fn conv1d_matches_finite_differences() {
    let e = suites::conv1d(CASES, 1);
    assert!(e < TOL, "worst relative error {e:e}");
}

#[test]
fn tconv1d_matches_finite_differences() {
    let e = suites::tconv1d(CASES, 2);
    assert!(e < TOL, "worst relative error {e:e}");
}

#[test]
fn gru_matches_finite_differences() {
    let e = suites::gru(CASES, 3);
    assert!(e < TOL, "worst relative error {e:e}");
}

#[test]
fn instance_norm_matches_finite_differences() {
    let e = suites::instance_norm(CASES, 4);
    assert!(e < TOL, "worst relative error {e:e}");
}

#[test]
fn activations_match_finite_differences() {
    let e = suites::activations(CASES, 5);
    assert!(e < TOL, "worst relative error {e:e}");
}

#[test]
fn losses_match_finite_differences() {
    let e = suites::losses(CASES, 6);
    assert!(e < TOL, "worst relative error {e:e}");
}

#[test]
fn structural_ops_match_finite_differences() {
    let e = suites::structural(CASES, 7);
    assert!(e < TOL, "worst relative error {e:e}");
}

#[test]
fn gru_bptt_on_five_steps_three_units() {
    let mut r = common::rng(11);
    let inputs = vec![
        common::random_tensor(&mut r, &[1, 5, 2], 1.0),
        common::random_tensor(&mut r, &[9, 2], 0.8),
        common::random_tensor(&mut r, &[9, 3], 0.8),
        common::random_tensor(&mut r, &[9], 0.5),
        common::random_tensor(&mut r, &[9], 0.5),
    ];
    let e = common::gradcheck(&inputs, |tape, v| {
        let y = tape.gru(v[0], None, v[1], v[2], v[3], v[4]).unwrap();
        common::project(tape, y, &mut common::rng(12))
    });
    assert!(e < TOL, "worst relative error {e:e}");
}

/// <conv(x), y> = <x, tconv(y)> with the same weight.
#[test]
fn tconv_is_the_adjoint_of_conv() {
    let mut r = common::rng(21);
    let mut checked = 0;
    while checked < 20 {
        use rand::Rng;
        let (cin, cout, k): (usize, usize, usize) = (r.gen_range(1..4), r.gen_range(1..4), r.gen_range(1..5));
        let stride: usize = r.gen_range(1..3);
        let padding = r.gen_range(0..k);
        // lengths where the strided conv covers the whole padded input
        let steps = r.gen_range(1..6);
        let len = (steps * stride + k).saturating_sub(2 * padding).max(1);
        if len + 2 * padding < k || (len + 2 * padding - k) % stride != 0 {
            continue;
        }
        let x = common::random_tensor(&mut r, &[2, cin, len], 1.0);
        let w = common::random_tensor(&mut r, &[cout, cin, k], 1.0);
        let mut tape = Tape::<f64>::new();
        let (xv, wv) = (tape.constant(x.clone()), tape.constant(w));
        let cx = tape.conv1d(xv, wv, None, stride, padding).unwrap();
        let y = common::random_tensor(&mut r, tape.shape(cx), 1.0);
        let lhs = tape.value(cx).dot(&y);
        let yv = tape.constant(y);
        let ty = tape.tconv1d(yv, wv, None, stride, padding).unwrap();
        assert_eq!(tape.shape(ty), x.shape());
        let rhs = tape.value(ty).dot(&x);
        assert!((lhs - rhs).abs() < 1e-5 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        checked += 1;
    }
}

/// conv -> instance norm -> GRU -> masked squared error in both precisions.
#[test]
fn composite_graph_in_both_precisions() {
    fn build<E: speech2sing::tensor::Scalar>(
        tape: &mut Tape<E>,
        v: &[speech2sing::tensor::Var],
        target: &Tensor<E>,
    ) -> speech2sing::tensor::Var {
        let c = tape.conv1d(v[0], v[1], Some(v[2]), 1, 1).unwrap();
        let n = tape.instance_norm(c, v[3], v[4], E::of(1e-5)).unwrap();
        let seq = tape.permute(n, &[0, 2, 1]).unwrap();
        let h = tape.gru(seq, None, v[5], v[6], v[7], v[8]).unwrap();
        let t = tape.constant(target.clone());
        let d = tape.sub(h, t).unwrap();
        let sq = tape.mul(d, d).unwrap();
        tape.mean(sq)
    }
    let mut r = common::rng(31);
    let inputs = vec![
        common::random_tensor(&mut r, &[2, 2, 6], 1.0),
        common::random_tensor(&mut r, &[3, 2, 3], 0.7),
        common::random_tensor(&mut r, &[3], 0.3),
        common::random_tensor(&mut r, &[3], 1.0),
        common::random_tensor(&mut r, &[3], 0.5),
        common::random_tensor(&mut r, &[6, 3], 0.8),
        common::random_tensor(&mut r, &[6, 2], 0.8),
        common::random_tensor(&mut r, &[6], 0.3),
        common::random_tensor(&mut r, &[6], 0.3),
    ];
    let target = common::random_tensor(&mut r, &[2, 6, 2], 0.5);
    let e64 = common::gradcheck(&inputs, |tape, v| build(tape, v, &target));
    assert!(e64 < 1e-5, "64-bit relative error {e64:e}");

    // 32-bit analytic gradient against the 64-bit finite differences
    let mut tape = Tape::<f32>::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.cast())).collect();
    let loss = build(&mut tape, &vars, &target.cast());
    let g32 = tape.backward(loss).unwrap();
    let mut tape = Tape::<f64>::new();
    let vars64: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &vars64, &target);
    let g64 = tape.backward(loss).unwrap();
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (a, b) in vars.iter().zip(&vars64) {
        for (x, y) in g32.get(*a).unwrap().data().iter().zip(g64.get(*b).unwrap().data()) {
            num += (*x as f64 - y).powi(2);
            den += y.powi(2);
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel < 1e-3, "32-bit relative error {rel:e}");
}
