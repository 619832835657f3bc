#![allow(dead_code)]

pub mod segments;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech2sing::tensor::{Tape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape, data).unwrap()
}

/// Values bounded away from zero, for ops with a kink there.
pub fn kink_free_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Projects an arbitrary output onto a fixed random direction so that every
/// output entry contributes to a scalar loss.
pub fn project(tape: &mut Tape<f64>, y: Var, rng: &mut ChaCha8Rng) -> Var {
    let shape = tape.shape(y).to_vec();
    let r = random_tensor(rng, &shape, 1.0);
    let r = tape.constant(r);
    let p = tape.mul(y, r).unwrap();
    tape.sum(p)
}

/// Largest element-wise relative error between the tape's gradient and central
/// finite differences, over all `inputs`.
///
/// `build` records the loss given leaf handles for the inputs (in order).
pub fn gradcheck<F>(inputs: &[Tensor<f64>], build: F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let eval = |values: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.value(loss).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut values = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        for j in 0..inputs[i].numel() {
            let orig = values[i].data()[j];
            values[i].data_mut()[j] = orig + eps;
            let plus = eval(&values);
            values[i].data_mut()[j] = orig - eps;
            let minus = eval(&values);
            values[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[j];
            // entries that are exactly zero analytically only see rounding noise
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            let e = (a - numeric).abs() / denom;
            if std::env::var("GRADCHECK_DEBUG").is_ok() && e > 1e-6 {
                eprintln!("input {i} entry {j}: analytic {a:e} numeric {numeric:e}");
            }
            worst = worst.max(e);
        }
    }
    worst
}

/// Per-op gradient-check suites over random shapes. Each returns the worst
/// relative error seen across `cases` shapes.
pub mod suites {
    use super::*;

    pub fn conv1d(cases: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let b = r.gen_range(1..3);
            let cin = r.gen_range(1..4);
            let cout = r.gen_range(1..4);
            let k = r.gen_range(1..5);
            let stride = r.gen_range(1..3);
            let padding = r.gen_range(0..k);
            let len = r.gen_range(k.max(2)..10);
            let with_bias = r.gen_bool(0.5);
            let mut inputs = vec![
                random_tensor(&mut r, &[b, cin, len], 1.0),
                random_tensor(&mut r, &[cout, cin, k], 1.0),
            ];
            if with_bias {
                inputs.push(random_tensor(&mut r, &[cout], 1.0));
            }
            let proj_seed = r.gen();
            worst = worst.max(gradcheck(&inputs, |tape, v| {
                let y = tape
                    .conv1d(v[0], v[1], v.get(2).copied(), stride, padding)
                    .unwrap();
                project(tape, y, &mut super::rng(proj_seed))
            }));
        }
        worst
    }

    pub fn tconv1d(cases: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let b = r.gen_range(1..3);
            let cin = r.gen_range(1..4);
            let cout = r.gen_range(1..4);
            let k = r.gen_range(1..5);
            let stride = r.gen_range(1..3);
            let len = r.gen_range(1..7);
            // output length must stay positive
            let max_pad = ((len - 1) * stride + k - 1) / 2;
            let padding = r.gen_range(0..=max_pad.min(2));
            let with_bias = r.gen_bool(0.5);
            let mut inputs = vec![
                random_tensor(&mut r, &[b, cin, len], 1.0),
                random_tensor(&mut r, &[cin, cout, k], 1.0),
            ];
            if with_bias {
                inputs.push(random_tensor(&mut r, &[cout], 1.0));
            }
            let proj_seed = r.gen();
            worst = worst.max(gradcheck(&inputs, |tape, v| {
                let y = tape
                    .tconv1d(v[0], v[1], v.get(2).copied(), stride, padding)
                    .unwrap();
                project(tape, y, &mut super::rng(proj_seed))
            }));
        }
        worst
    }

    pub fn gru(cases: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let b = r.gen_range(1..3);
            let t = r.gen_range(1..6);
            let c = r.gen_range(1..4);
            let h = r.gen_range(1..4);
            let with_state = r.gen_bool(0.5);
            let mut inputs = vec![
                random_tensor(&mut r, &[b, t, c], 1.0),
                random_tensor(&mut r, &[3 * h, c], 0.8),
                random_tensor(&mut r, &[3 * h, h], 0.8),
                random_tensor(&mut r, &[3 * h], 0.5),
                random_tensor(&mut r, &[3 * h], 0.5),
            ];
            if with_state {
                inputs.push(random_tensor(&mut r, &[b, h], 0.5));
            }
            let proj_seed = r.gen();
            worst = worst.max(gradcheck(&inputs, |tape, v| {
                let y = tape
                    .gru(v[0], v.get(5).copied(), v[1], v[2], v[3], v[4])
                    .unwrap();
                project(tape, y, &mut super::rng(proj_seed))
            }));
        }
        worst
    }

    pub fn instance_norm(cases: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let b = r.gen_range(1..3);
            let c = r.gen_range(1..4);
            let l = r.gen_range(2..8);
            let inputs = vec![
                random_tensor(&mut r, &[b, c, l], 1.0),
                random_tensor(&mut r, &[c], 1.5),
                random_tensor(&mut r, &[c], 1.0),
            ];
            let proj_seed = r.gen();
            worst = worst.max(gradcheck(&inputs, |tape, v| {
                let y = tape.instance_norm(v[0], v[1], v[2], 1e-5).unwrap();
                project(tape, y, &mut super::rng(proj_seed))
            }));
        }
        worst
    }

    pub fn activations(cases: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let shape = [r.gen_range(1..4), r.gen_range(1..6)];
            let inputs = vec![kink_free_tensor(&mut r, &shape)];
            for which in 0..3 {
                let proj_seed = r.gen();
                worst = worst.max(gradcheck(&inputs, |tape, v| {
                    let y = match which {
                        0 => tape.relu(v[0]),
                        1 => tape.tanh(v[0]),
                        _ => tape.sigmoid(v[0]),
                    };
                    project(tape, y, &mut super::rng(proj_seed))
                }));
            }
        }
        worst
    }

    pub fn losses(cases: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let rows = r.gen_range(1..6);
            let classes = r.gen_range(2..8);
            let targets: Vec<usize> = (0..rows).map(|_| r.gen_range(0..classes)).collect();
            let mut weights: Vec<f64> = (0..rows)
                .map(|_| if r.gen_bool(0.7) { 1.0 } else { 0.0 })
                .collect();
            weights[0] = 1.0;
            let logits = vec![random_tensor(&mut r, &[rows, classes], 3.0)];
            worst = worst.max(gradcheck(&logits, |tape, v| {
                tape.cross_entropy(v[0], &targets, &weights).unwrap()
            }));

            // masked squared error
            let shape = [r.gen_range(1..3), r.gen_range(1..5), r.gen_range(1..5)];
            let pair = vec![
                random_tensor(&mut r, &shape, 1.0),
                random_tensor(&mut r, &shape, 1.0),
            ];
            let mask = random_tensor(&mut r, &shape, 1.0).map(|x| if x > 0.0 { 0.5 } else { 0.0 });
            worst = worst.max(gradcheck(&pair, |tape, v| {
                let d = tape.sub(v[0], v[1]).unwrap();
                let m = tape.constant(mask.clone());
                let dm = tape.mul(d, m).unwrap();
                let sq = tape.mul(dm, dm).unwrap();
                tape.mean(sq)
            }));
        }
        worst
    }

    /// matmul, concat, slice, pad, permute and reshape.
    pub fn structural(cases: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let (m, k, n) = (r.gen_range(1..5), r.gen_range(1..5), r.gen_range(1..5));
            let inputs = vec![
                random_tensor(&mut r, &[m, k], 1.0),
                random_tensor(&mut r, &[k, n], 1.0),
            ];
            let extra = r.gen_range(1..4);
            let mut inputs = inputs;
            inputs.push(random_tensor(&mut r, &[m, extra], 1.0));
            let proj_seed = r.gen();
            let pad = (r.gen_range(0..3), r.gen_range(0..3));
            worst = worst.max(gradcheck(&inputs, |tape, v| {
                let p = tape.matmul(v[0], v[1]).unwrap();
                let c = tape.concat(&[p, v[2]], 1).unwrap();
                let width = tape.shape(c)[1];
                let s = tape.slice(c, 1, width / 3, width - width / 3).unwrap();
                let padded = tape.pad(s, 0, pad.0, pad.1).unwrap();
                let t = tape.permute(padded, &[1, 0]).unwrap();
                let len = tape.value(t).numel();
                let flat = tape.reshape(t, &[len]).unwrap();
                let sq = tape.mul(flat, flat).unwrap();
                let sc = tape.scale(sq, 0.5);
                let total = tape.add(sc, flat).unwrap();
                project(tape, total, &mut super::rng(proj_seed))
            }));
        }
        worst
    }
}
