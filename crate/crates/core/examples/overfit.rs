//! Drives the training loss on 32 samples towards zero: the smallest
//! check that every stage can fit a planted cross-modal signal.
//!
//!     cargo run --release --example overfit

use bimha::config::Task;
use bimha::data::{compute_target_length, gen_samples, SynthMode, SynthSpec};
use bimha::train::{eval_loss, train, TrainOptions};
use bimha::{BimhaModel, Dataset, DatasetFeatures, ModelConfig, Precision};

fn main() {
    let samples = gen_samples(&SynthSpec::new(32, SynthMode::Av, 11)).unwrap();
    let lengths: Vec<usize> = samples.iter().map(|s| s.text_len()).collect();
    let seq_len = compute_target_length(&lengths, 3.0).unwrap();
    let all = DatasetFeatures::from_samples(&samples, seq_len, (8, 6, 8)).unwrap();
    // the same 32 samples serve as train, valid and test
    let mut data =
        Dataset::from_samples("overfit", &samples, Task::Regression, (-1.0, 1.0), 3.0).unwrap();
    data.train = all.clone();
    data.valid = all.clone();
    data.test = all;

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
        max_epochs: 500,
        patience: 500,
        precision: Precision::F32,
        ..ModelConfig::default()
    };
    let (model, report) = train(
        BimhaModel::<f32>::new(&config).unwrap(),
        &data,
        &TrainOptions::default(),
    )
    .unwrap();
    for log in report
        .epochs
        .iter()
        .filter(|e| e.epoch == 1 || e.epoch % 50 == 0)
    {
        println!("epoch {:>3}  train L1 {:.4}", log.epoch, log.valid_loss);
    }
    println!(
        "best train L1 {:.5}",
        eval_loss(&model, &data.train, 64).unwrap()
    );
}
