//! Generate a planted-signal dataset, train one model, evaluate it and
//! reload it from disk.
//!
//!     cargo run --release --example quickstart

use bimha::data::{gen_synthetic, SynthMode, SynthSpec};
use bimha::train::{evaluate, train, TrainOptions};
use bimha::{BimhaModel, ModelConfig, Precision, Scheme};

fn main() {
    let data = gen_synthetic(&SynthSpec::new(512, SynthMode::Av, 7)).unwrap();
    println!(
        "{}: {} / {} / {} samples, text padded to {} tokens",
        data.manifest.name,
        data.train.len(),
        data.valid.len(),
        data.test.len(),
        data.train.seq_len
    );

    let config = ModelConfig {
        d_t: 8,
        d_a: 6,
        d_v: 8,
        thid: 16,
        tout: 8,
        ahid: 16,
        vhid: 16,
        fdim: 16,
        heads: 2,
        bs: 32,
        lr: 0.003,
        tdrp: 0.0,
        adrp: 0.0,
        vdrp: 0.0,
        fdrp: 0.0,
        wgd: 0.0,
        patience: 30,
        precision: Precision::F32,
        ..ModelConfig::default()
    };
    let model = BimhaModel::<f32>::new(&config).unwrap();
    println!("{} parameters", model.param_count());

    let (model, report) = train(model, &data, &TrainOptions::default()).unwrap();
    println!(
        "stopped after {} epochs, best validation L1 {:.4} at epoch {}",
        report.epochs.len(),
        report.best_valid_loss,
        report.best_epoch
    );
    print!("{}", report.test);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bmhm");
    model.save(&path).unwrap();
    let reloaded = BimhaModel::<f32>::load(&path).unwrap();
    let again = evaluate(&reloaded, &data.test, Scheme::Sims, 256).unwrap();
    assert_eq!(again, report.test);
    println!("reloaded model reproduces the test report");
}
