//! Unimodal, bimodal and hybrid target modes and the two-token bimodal
//! variants on the same synthetic data, with a few epochs each.
//!
//!     cargo run --release --example ablation_modes

use bimha::cli::summary_line;
use bimha::data::{gen_synthetic, SynthMode, SynthSpec};
use bimha::train::{train, TrainOptions};
use bimha::{BimhaModel, ModelConfig, Precision};

fn main() {
    let data = gen_synthetic(&SynthSpec::new(256, SynthMode::Av, 3)).unwrap();
    let variants = ["a,v,t", "av,at,vt", "vt,a", "av,at", "av,vt", "at,vt"];
    for tokens in variants {
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
            max_epochs: 60,
            precision: Precision::F32,
            ..ModelConfig::default()
        };
        config.set("tokens", tokens).unwrap();
        let model = BimhaModel::<f32>::new(&config).unwrap();
        let params = model.param_count();
        let (_, report) = train(model, &data, &TrainOptions::default()).unwrap();
        println!(
            "{:<3} {:<9} {:>6} params  {}",
            format!("{:?}", config.target_mode),
            tokens,
            params,
            summary_line(&report.test)
        );
    }
}
