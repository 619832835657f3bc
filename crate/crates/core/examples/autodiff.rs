//! Reverse-mode gradients on the tape, checked against central differences.
//!
//! `cargo run --example autodiff`

use speech2sing::tensor::{Tape, Tensor, Var};

fn loss(tape: &mut Tape<f64>, x: Var, w: Var, b: Var) -> Var {
    let y = tape.conv1d(x, w, Some(b), 1, 1).unwrap();
    let y = tape.tanh(y);
    let y = tape.mul(y, y).unwrap();
    tape.mean(y)
}

fn main() -> speech2sing::Result<()> {
    let x = Tensor::new(&[1, 2, 6], (0..12).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let w = Tensor::new(&[3, 2, 3], (0..18).map(|i| (i as f64 * 0.11).cos() * 0.5).collect())?;
    let b = Tensor::new(&[3], vec![0.1, -0.2, 0.05])?;

    let mut tape = Tape::new();
    let (xv, wv, bv) = (tape.leaf(x.clone()), tape.leaf(w.clone()), tape.leaf(b.clone()));
    let out = loss(&mut tape, xv, wv, bv);
    println!("loss {:.6}", tape.value(out).item());
    let grads = tape.backward(out)?;
    let analytic = grads.get(wv).unwrap().data().to_vec();

    let eval = |w: &Tensor<f64>| {
        let mut t = Tape::new();
        let (a, c, d) = (t.leaf(x.clone()), t.leaf(w.clone()), t.leaf(b.clone()));
        let l = loss(&mut t, a, c, d);
        t.value(l).item()
    };
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..w.numel() {
        let (mut up, mut down) = (w.clone(), w.clone());
        up.data_mut()[i] += eps;
        down.data_mut()[i] -= eps;
        let numeric = (eval(&up) - eval(&down)) / (2.0 * eps);
        worst = worst.max((numeric - analytic[i]).abs());
    }
    println!("{} weight gradients, worst abs deviation {worst:.2e}", w.numel());
    Ok(())
}
