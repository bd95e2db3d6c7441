//! Trains on the planted audio-visual task, then inspects which bimodal
//! feature the attention favours and writes the CSV export.
//!
//!     cargo run --release --example attention_export [out_dir]

use std::path::PathBuf;

use bimha::cli::{cmd_export_attention, cmd_gen_synth, cmd_train, CliConfigFile};

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bimha-attention"));
    let data = out.join("data");
    let run = out.join("run");
    let mut stdout = std::io::stdout();

    cmd_gen_synth(512, "av", 7, &data, &mut stdout).unwrap();
    let config = CliConfigFile::parse(
        "thid = 16\ntout = 8\nahid = 16\nvhid = 16\nfdim = 16\nheads = 2\nbs = 32\nlr = 0.003\n\
         tdrp = 0\nadrp = 0\nvdrp = 0\nfdrp = 0\nwgd = 0\npatience = 30\n",
        None,
    )
    .unwrap();
    let config = CliConfigFile {
        data: Some(data.clone()),
        out: Some(run.clone()),
        ..config
    };
    cmd_train(&config, false, &mut std::io::sink()).unwrap();
    cmd_export_attention(&run.join("model.bmhm"), &data, &out, "test", &mut stdout).unwrap();

    let summary = std::fs::read_to_string(out.join("attention_summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header = lines.next().unwrap();
    let mut totals = [0.0; 3];
    let mut rows = 0.0;
    for line in lines {
        for (t, v) in totals.iter_mut().zip(line.split(',').skip(1)) {
            *t += v.parse::<f64>().unwrap();
        }
        rows += 1.0;
    }
    println!("{header}");
    println!(
        "mean,{:.4},{:.4},{:.4}",
        totals[0] / rows,
        totals[1] / rows,
        totals[2] / rows
    );
    for line in summary.lines().skip(1).take(5) {
        println!("{line}");
    }
}
