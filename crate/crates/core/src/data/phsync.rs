use super::annotation::PhoneAnnotation;
use super::samples::HOP;
use crate::error::{Error, Result};
use crate::prep::stretch_by_map;
use crate::signal::Waveform;

/// Piecewise-linear map from output time to input time through `(out, in)`
/// anchors sorted by output time. Coincident output anchors jump to the later
/// input time.
fn interpolate(anchors: &[(f64, f64)], t: f64) -> f64 {
    let i = anchors.partition_point(|&(o, _)| o <= t);
    if i == 0 {
        return anchors[0].1;
    }
    if i == anchors.len() {
        return anchors[i - 1].1;
    }
    let (o0, i0) = anchors[i - 1];
    let (o1, i1) = anchors[i];
    if o1 - o0 <= f64::EPSILON {
        return i1;
    }
    i0 + (t - o0) / (o1 - o0) * (i1 - i0)
}

/// Stretches every spoken phone to its sung duration. Pauses only present in
/// the speech collapse to (nearly) nothing. The output spans the singing
/// annotation.
pub fn phsync_stretch(
    speech: &Waveform,
    speech_ann: &PhoneAnnotation,
    sing_ann: &PhoneAnnotation,
) -> Result<Waveform> {
    let spoken = speech_ann.spoken();
    let sung = sing_ann.spoken();
    let names = |v: &[super::annotation::PhoneInterval]| v.iter().map(|p| p.phone).collect::<Vec<_>>();
    if names(&spoken) != names(&sung) {
        return Err(Error::Alignment(format!(
            "speech has {} phones, singing {}; sequences differ",
            spoken.len(),
            sung.len()
        )));
    }
    if spoken.is_empty() {
        return Err(Error::Alignment("no phones to align".into()));
    }
    let sr = speech.sample_rate as f64;
    let speech_end = speech.len() as f64 / sr;
    let sing_end = sing_ann.end();

    let mut anchors = vec![(0.0, 0.0)];
    for (sp, sg) in spoken.iter().zip(&sung) {
        anchors.push((sg.start, sp.start.min(speech_end)));
        anchors.push((sg.end, sp.end.min(speech_end)));
    }
    anchors.push((sing_end, speech_end));
    // keep input time monotone
    for k in 1..anchors.len() {
        anchors[k].1 = anchors[k].1.max(anchors[k - 1].1);
    }

    let out_len = (sing_end * sr).round() as usize;
    if out_len == 0 {
        return Err(Error::Alignment("singing annotation is empty".into()));
    }
    let frame_secs = HOP as f64 / sr;
    stretch_by_map(speech, out_len, |t| {
        interpolate(&anchors, t * frame_secs) / frame_secs
    })
}

#[cfg(test)]
mod tests {
    use super::super::annotation::PhoneInterval;
    use super::super::dict::PhonemeDict;
    use super::*;

    #[test]
    fn interpolation_handles_jumps() {
        let a = [(0.0, 0.0), (1.0, 2.0), (1.0, 3.0), (2.0, 4.0)];
        assert_eq!(interpolate(&a, 0.5), 1.0);
        assert_eq!(interpolate(&a, 1.0), 3.0);
        assert_eq!(interpolate(&a, 1.5), 3.5);
        assert_eq!(interpolate(&a, 9.0), 4.0);
    }

    #[test]
    fn mismatched_phones_fail() {
        let w = Waveform::new(vec![0.1; 16000], 16000);
        let a = PhoneAnnotation::new(vec![PhoneInterval { start: 0.0, end: 0.5, phone: 0 }]).unwrap();
        let b = PhoneAnnotation::new(vec![PhoneInterval { start: 0.0, end: 0.5, phone: 1 }]).unwrap();
        assert!(matches!(phsync_stretch(&w, &a, &b), Err(Error::Alignment(_))));
        let only_pause = PhoneAnnotation::new(vec![PhoneInterval {
            start: 0.0,
            end: 0.5,
            phone: PhonemeDict::SIL,
        }])
        .unwrap();
        assert!(matches!(
            phsync_stretch(&w, &only_pause, &only_pause),
            Err(Error::Alignment(_))
        ));
    }
}
