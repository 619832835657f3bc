//! Cut aligned training samples from a pair of phone annotations.
//!
//! `cargo run --example training_samples`

use speech2sing::data::{plan_samples, word_runs, PhoneAnnotation, PhonemeDict, SampleConfig};

const READ: &str = "\
0.00 0.30 sil
0.30 0.40 n
0.40 0.55 ow
0.55 0.62 sil
0.62 0.70 m
0.70 0.90 ay
0.90 1.00 t
1.00 1.30 sil
1.30 1.45 s
1.45 1.70 iy
1.70 2.00 sil
";

const SUNG: &str = "\
0.00 0.20 sil
0.20 0.30 n
0.30 0.90 ow
0.90 0.95 sil
0.95 1.05 m
1.05 1.60 ay
1.60 1.70 t
1.70 1.74 sil
1.74 1.90 s
1.90 2.60 iy
2.60 2.90 sil
";

fn main() -> speech2sing::Result<()> {
    let dict = PhonemeDict::new();
    let read = PhoneAnnotation::parse(READ, "read.txt", &dict)?;
    let sung = PhoneAnnotation::parse(SUNG, "sung.txt", &dict)?;
    let cfg = SampleConfig {
        min_words: 2,
        ..SampleConfig::default()
    };
    println!("runs of >= 2 words within 3 words: {:?}", word_runs(3, 2));
    for plan in plan_samples(&read, &sung, &cfg)? {
        println!(
            "words {:?}: speech {:.2}-{:.2} s, singing {:.2}-{:.2} s",
            plan.words, plan.speech_span.0, plan.speech_span.1, plan.sing_span.0, plan.sing_span.1
        );
    }
    Ok(())
}
