use std::io::BufReader;

use swapcal::domain::HypothesisClass;
use swapcal::forecaster::run_online;
use swapcal::harness::{generate_stream, AdversaryKind, AdversarySpec};
use swapcal::io::{read_transcript, write_transcript, TranscriptHeader};
use swapcal::metrics::{psreg, smcal};
use swapcal::{Forecaster32, Forecaster64, Transcript64};

fn logistic(seed: u64) -> AdversarySpec {
    AdversarySpec::new(AdversaryKind::default(), seed)
}

#[test]
fn transcript_file_round_trip_preserves_metrics() {
    let stream = generate_stream::<f64>(&logistic(8), 500, 3).unwrap();
    let tr: Transcript64 = run_online(&mut Forecaster64::new(4, 3, 8).unwrap(), stream).unwrap();
    let header = TranscriptHeader {
        n: 4,
        d: 3,
        t: 500,
        seed: 8,
        scale: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.jsonl");
    write_transcript(&mut std::fs::File::create(&file).unwrap(), &header, &tr, None).unwrap();
    let (back_header, back) = read_transcript::<f64, _>(BufReader::new(std::fs::File::open(&file).unwrap())).unwrap();
    assert_eq!(back_header, header);
    assert_eq!(back, tr);
    let ball = HypothesisClass::ball(1.0);
    assert_eq!(smcal(&tr, &ball, 2).unwrap().value, smcal(&back, &ball, 2).unwrap().value);
}

#[test]
fn single_precision_tracks_double_precision() {
    let s64 = generate_stream::<f64>(&logistic(2), 400, 2).unwrap();
    let s32 = generate_stream::<f32>(&logistic(2), 400, 2).unwrap();
    let t64 = run_online(&mut Forecaster64::new(3, 2, 2).unwrap(), s64).unwrap();
    let t32 = run_online(&mut Forecaster32::new(3, 2, 2).unwrap(), s32).unwrap();
    let total = |d: &[f64]| d.iter().sum::<f64>();
    let mut gap: f64 = 0.0;
    for (a, b) in t64.steps().iter().zip(t32.steps()) {
        assert_eq!(a.outcome, b.outcome);
        let b: Vec<f64> = b.cond_dist.iter().map(|&v| v as f64).collect();
        gap = gap.max(a.cond_dist.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        assert!((total(&b) - 1.0).abs() < 1e-5);
    }
    assert!(gap < 1e-3, "conditional distributions differ by {gap}");
    let r64 = psreg(&t64, &HypothesisClass::ball(4.0)).unwrap().value;
    let r32 = psreg(&t32, &HypothesisClass::ball(4.0f32)).unwrap().value;
    assert!((r64 - r32).abs() <= 1e-3 * r64.abs().max(1.0), "{r64} vs {r32}");
}
