//! Builds a dataset from JSON-lines utterances (token embeddings plus
//! frame-level acoustic and visual features), writes it in the binary
//! split format and reads it back.
//!
//!     cargo run --example import_jsonl

use std::fmt::Write as _;

use bimha::config::Task;
use bimha::data::read_jsonl;
use bimha::Dataset;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("utterances.jsonl");
    let mut text = String::new();
    for i in 0..20 {
        let x = i as f32 / 10.0;
        let tokens: Vec<Vec<f32>> = (0..3 + i % 4).map(|k| vec![x, k as f32, -x]).collect();
        let acoustic_frames = vec![vec![x, 1.0], vec![x + 0.2, 0.0]];
        let label = (x - 1.0).clamp(-1.0, 1.0);
        writeln!(
            text,
            r#"{{"id": "u{i}", "text": {tokens:?}, "acoustic_frames": {acoustic_frames:?}, "visual": [{x}, 0.5, 0.25, 1.0], "label": {label}}}"#
        )
        .unwrap();
    }
    std::fs::write(&jsonl, text).unwrap();

    let samples = read_jsonl(&jsonl).unwrap();
    println!(
        "read {} utterances; first acoustic vector (frame mean) {:?}",
        samples.len(),
        samples[0].acoustic
    );

    let data = Dataset::from_samples("toy", &samples, Task::Regression, (-1.0, 1.0), 3.0).unwrap();
    let manifest = data.save(&dir.path().join("toy")).unwrap();
    println!(
        "{} train / {} valid / {} test, text length {} (d_t={}, d_a={}, d_v={})",
        data.train.len(),
        data.valid.len(),
        data.test.len(),
        data.train.seq_len,
        data.manifest.d_t,
        data.manifest.d_a,
        data.manifest.d_v
    );
    assert_eq!(Dataset::load(&manifest).unwrap(), data);
    println!("{}", std::fs::read_to_string(&manifest).unwrap());
}
