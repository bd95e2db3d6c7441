//! Five training runs with consecutive seeds on the planted audio-visual
//! task, reporting per-run and averaged test metrics.
//!
//!     cargo run --release --example multi_seed_benchmark [key=value ...]
//!
//! Any model key can be overridden, e.g. `fdim=32 heads=4`.

use std::time::Instant;

use bimha::cli::summary_line;
use bimha::data::{gen_synthetic, SynthMode, SynthSpec};
use bimha::train::{multi_run, TrainOptions};
use bimha::{ModelConfig, Precision};

fn main() {
    let data = gen_synthetic(&SynthSpec::new(512, SynthMode::Av, 7)).unwrap();
    let mut config = ModelConfig {
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
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').expect("arguments are key=value");
        config.set(key, value).unwrap();
    }

    let start = Instant::now();
    let result = multi_run::<f32>(&config, &data, 5, &TrainOptions::default()).unwrap();
    for run in &result.runs {
        println!(
            "seed {}  epochs {:>3}  best {:>3}  {}",
            run.seed,
            run.epochs.len(),
            run.best_epoch,
            summary_line(&run.test)
        );
    }
    println!("mean     {}", summary_line(&result.mean));
    println!("{:.1} s", start.elapsed().as_secs_f64());
}
