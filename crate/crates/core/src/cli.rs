//! The `bimha` command line: synthetic data generation, training,
//! evaluation, attention export and gradient checking.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_flat, ModelConfig, Precision};
use crate::data::{gen_synthetic, Dataset, DatasetFeatures, SynthMode, SynthSpec};
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradcheckOptions};
use crate::metrics::{MetricReport, Scheme};
use crate::model::{peek_config, BimhaModel};
use crate::tensor::Scalar;
use crate::train::{evaluate, multi_run, TrainOptions};

#[derive(Debug, Parser)]
#[command(
    name = "bimha",
    version,
    about = "Bimodal multi-head attention for multimodal sentiment analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset with a planted cross-modal signal.
    GenSynth {
        #[arg(long, default_value_t = 512)]
        n: usize,
        /// av, at, vt, trimodal or noise
        #[arg(long, default_value = "av")]
        mode: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one or more runs and report test metrics.
    Train {
        /// Flat key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// sims, mosi, mosi-aligned, mosei, mosei-aligned, iemocap-<emotion>
        #[arg(long)]
        preset: Option<String>,
        /// Dataset directory or manifest file.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// Override one config key, e.g. `--set fdim=16`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Print per-epoch losses to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Score a trained model on a dataset split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// sims, mosi or binary; chosen from the dataset when omitted.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Where to write the JSON report; defaults to `eval.json` next to
        /// the model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-sample attention weights as CSV.
    ExportAttention {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Finite-difference check of every gradient on a tiny model.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Output goes to `out`, diagnostics to
/// `err`.
pub fn main_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenSynth {
            n,
            mode,
            seed,
            out: dir,
        } => cmd_gen_synth(n, &mode, seed, &dir, out),
        Command::Train {
            config,
            preset,
            data,
            out: dir,
            runs,
            sets,
            verbose,
        } => {
            let mut file = match &config {
                Some(path) => CliConfigFile::load(path)?,
                None => CliConfigFile::default(),
            };
            if let Some(p) = preset {
                file.apply_preset(&p)?;
            }
            for s in &sets {
                let (k, v) = s
                    .split_once('=')
                    .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
                file.set(k.trim(), v.trim(), None)?;
            }
            if data.is_some() {
                file.data = data;
            }
            if dir.is_some() {
                file.out = dir;
            }
            if runs.is_some() {
                file.runs = runs;
            }
            cmd_train(&file, verbose, out).map(|_| ())
        }
        Command::Eval {
            model,
            data,
            scheme,
            split,
            out: json,
        } => {
            let scheme = scheme.map(|s| s.parse()).transpose()?;
            cmd_eval(&model, &data, scheme, &split, json.as_deref(), out).map(|_| ())
        }
        Command::ExportAttention {
            model,
            data,
            out: dir,
            split,
        } => cmd_export_attention(&model, &data, &dir, &split, out),
        Command::Gradcheck { seed, corrupt } => cmd_gradcheck(seed, corrupt, out),
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Accepts a dataset directory or its manifest file.
pub fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("manifest.json")
    } else {
        data.to_path_buf()
    }
}

pub fn cmd_gen_synth(
    n: usize,
    mode: &str,
    seed: u64,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let mode: SynthMode = mode.parse()?;
    let ds = gen_synthetic(&SynthSpec::new(n, mode, seed))?;
    let manifest = ds.save(dir)?;
    writeln!(
        out,
        "wrote {} samples ({} train / {} valid / {} test, L = {}) to {}",
        n,
        ds.train.len(),
        ds.valid.len(),
        ds.test.len(),
        ds.train.seq_len,
        manifest.display()
    )
    .map_err(io_out)
}

/// A flat `key=value` training config: every model key plus `data`,
/// `out`, `scheme`, `runs` and `preset`.
#[derive(Debug, Clone, Default)]
pub struct CliConfigFile {
    pub model: ModelConfig,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scheme: Option<Scheme>,
    pub runs: Option<usize>,
    /// Whether `d_t`, `d_a`, `d_v` were given explicitly; otherwise they
    /// are taken from the dataset.
    pub dims_set: bool,
}

impl CliConfigFile {
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let pairs = parse_flat(text)?;
        let mut file = Self::default();
        // a preset is the base every other key overrides, wherever it appears
        if let Some((_, name)) = pairs.iter().find(|(k, _)| k == "preset") {
            file.apply_preset(name)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            file.set(k, v, base)?;
        }
        Ok(file)
    }

    /// Relative `data` and `out` paths are resolved against the directory
    /// of the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        self.model = ModelConfig::preset(name)?;
        self.dims_set = false;
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        match key {
            "data" => self.data = Some(path(value)),
            "out" => self.out = Some(path(value)),
            "scheme" => self.scheme = Some(value.parse()?),
            "runs" => {
                self.runs = Some(
                    value
                        .parse()
                        .map_err(|_| Error::config("runs", format!("cannot parse `{value}`")))?,
                )
            }
            "preset" => self.apply_preset(value)?,
            k if ModelConfig::is_model_key(k) => {
                self.model.set(k, value)?;
                if matches!(k, "d_t" | "d_a" | "d_v") {
                    self.dims_set = true;
                }
            }
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }
}

/// Trains per the config file and writes models, JSON reports and a
/// metric table to its `out` directory. Returns the mean test report.
pub fn cmd_train(file: &CliConfigFile, verbose: bool, out: &mut dyn Write) -> Result<MetricReport> {
    let data_path = file.data.as_deref().ok_or_else(|| {
        Error::Usage("no dataset given (use --data or `data =` in the config)".into())
    })?;
    let dir = file.out.as_deref().ok_or_else(|| {
        Error::Usage("no output directory given (use --out or `out =` in the config)".into())
    })?;
    let data = Dataset::load(&manifest_path(data_path))?;
    let mut config = file.model.clone();
    let m = &data.manifest;
    if file.dims_set {
        if (config.d_t, config.d_a, config.d_v) != (m.d_t, m.d_a, m.d_v) {
            return Err(Error::dim(
                "data",
                format!(
                    "config dims (d_t={}, d_a={}, d_v={}) differ from dataset (d_t={}, d_a={}, d_v={})",
                    config.d_t, config.d_a, config.d_v, m.d_t, m.d_a, m.d_v
                ),
            ));
        }
    } else {
        (config.d_t, config.d_a, config.d_v) = (m.d_t, m.d_a, m.d_v);
    }
    if config.task != m.task {
        return Err(Error::config(
            "task",
            format!("config says {:?}, dataset says {:?}", config.task, m.task),
        ));
    }
    config.validate()?;
    let opts = TrainOptions {
        scheme: file.scheme,
        verbose,
        ..TrainOptions::default()
    };
    let runs = file.runs.unwrap_or(1);
    create_dir(dir)?;
    match config.precision {
        Precision::F32 => train_runs::<f32>(&config, &data, runs, &opts, dir, out),
        Precision::F64 => train_runs::<f64>(&config, &data, runs, &opts, dir, out),
    }
}

fn train_runs<T: Scalar>(
    config: &ModelConfig,
    data: &Dataset,
    runs: usize,
    opts: &TrainOptions,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<MetricReport> {
    let result = multi_run::<T>(config, data, runs, opts)?;
    write_file(&dir.join("config.txt"), &config.to_flat())?;
    if runs == 1 {
        result.models[0].save(&dir.join("model.bmhm"))?;
        write_file(&dir.join("report.json"), &result.runs[0].to_json())?;
    } else {
        for (i, (model, report)) in result.models.iter().zip(&result.runs).enumerate() {
            let run_dir = dir.join(format!("run{i}"));
            create_dir(&run_dir)?;
            model.save(&run_dir.join("model.bmhm"))?;
            write_file(&run_dir.join("report.json"), &report.to_json())?;
        }
        write_file(&dir.join("mean.json"), &result.mean.to_json())?;
    }
    let mut table = String::new();
    for r in &result.runs {
        let _ = writeln!(
            table,
            "seed {:<6} epochs {:<4} best {:<4} valid {:.5}  test {:.5}",
            r.seed,
            r.epochs.len(),
            r.best_epoch,
            r.best_valid_loss,
            r.test_loss
        );
    }
    if runs > 1 {
        let _ = writeln!(
            table,
            "mean over {runs} runs: {}",
            summary_line(&result.mean)
        );
    }
    table.push_str(&result.mean.to_table());
    write_file(&dir.join("metrics.txt"), &table)?;
    out.write_all(table.as_bytes()).map_err(io_out)?;
    Ok(result.mean)
}

/// One-line rendering of the present fields of a report.
pub fn summary_line(r: &MetricReport) -> String {
    r.fields()
        .iter()
        .filter_map(|(k, v)| v.map(|v| format!("{k}={v:.4}")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn pick_split<'a>(data: &'a Dataset, split: &str) -> Result<&'a DatasetFeatures> {
    match split {
        "train" => Ok(&data.train),
        "valid" => Ok(&data.valid),
        "test" => Ok(&data.test),
        other => Err(Error::Usage(format!(
            "unknown split `{other}` (expected train, valid or test)"
        ))),
    }
}

/// Scores a saved model, prints the table and writes the JSON report.
pub fn cmd_eval(
    model: &Path,
    data: &Path,
    scheme: Option<Scheme>,
    split: &str,
    json: Option<&Path>,
    out: &mut dyn Write,
) -> Result<MetricReport> {
    let ds = Dataset::load(&manifest_path(data))?;
    let features = pick_split(&ds, split)?;
    let scheme = scheme.unwrap_or_else(|| Scheme::for_manifest(&ds.manifest));
    let chunk = TrainOptions::default().eval_chunk;
    let report = match peek_config(model)?.precision {
        Precision::F32 => evaluate(&BimhaModel::<f32>::load(model)?, features, scheme, chunk)?,
        Precision::F64 => evaluate(&BimhaModel::<f64>::load(model)?, features, scheme, chunk)?,
    };
    let json_path = json
        .map(Path::to_path_buf)
        .unwrap_or_else(|| model.with_file_name("eval.json"));
    write_file(&json_path, &report.to_json())?;
    out.write_all(report.to_table().as_bytes())
        .map_err(io_out)?;
    Ok(report)
}

/// Writes `attention.csv` (one row per sample, head and query) and
/// `attention_summary.csv` (mean weight each key receives per sample).
pub fn cmd_export_attention(
    model: &Path,
    data: &Path,
    dir: &Path,
    split: &str,
    out: &mut dyn Write,
) -> Result<()> {
    let ds = Dataset::load(&manifest_path(data))?;
    let features = pick_split(&ds, split)?;
    let chunk = TrainOptions::default().eval_chunk;
    let record = match peek_config(model)?.precision {
        Precision::F32 => {
            BimhaModel::<f32>::load(model)?
                .predict_features(features, chunk)?
                .attention
        }
        Precision::F64 => {
            BimhaModel::<f64>::load(model)?
                .predict_features(features, chunk)?
                .attention
        }
    };
    let names: Vec<&str> = record.tokens.iter().map(|t| t.name()).collect();
    let mut full = String::from("sample_id,head,query");
    let mut summary = String::from("sample_id");
    for n in &names {
        let _ = write!(full, ",key_{n}");
        let _ = write!(summary, ",{n}");
    }
    full.push('\n');
    summary.push('\n');
    for s in 0..record.samples {
        for h in 0..record.heads {
            for (q, qn) in names.iter().enumerate() {
                let _ = write!(full, "{s},{h},{qn}");
                for w in record.row(s, h, q) {
                    let _ = write!(full, ",{w}");
                }
                full.push('\n');
            }
        }
        let _ = write!(summary, "{s}");
        for w in record.key_summary(s) {
            let _ = write!(summary, ",{w}");
        }
        summary.push('\n');
    }
    create_dir(dir)?;
    write_file(&dir.join("attention.csv"), &full)?;
    write_file(&dir.join("attention_summary.csv"), &summary)?;
    writeln!(
        out,
        "wrote {} attention rows for {} samples to {} (max normalization error {:.2e})",
        record.samples * record.heads * names.len(),
        record.samples,
        dir.display(),
        record.max_normalization_error()
    )
    .map_err(io_out)
}

pub fn cmd_gradcheck(seed: u64, corrupt: Option<String>, out: &mut dyn Write) -> Result<()> {
    let opts = GradcheckOptions {
        corrupt,
        ..GradcheckOptions::default()
    };
    let r = gradcheck::run(seed, &opts)?;
    writeln!(
        out,
        "checked {} parameters: max relative error {:.3e} at {} (analytic {:.6e}, numeric {:.6e})",
        r.checked, r.max_rel_error, r.worst, r.analytic, r.numeric
    )
    .map_err(io_out)?;
    if r.passed() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "gradient check failed at {}: relative error {:.3e} >= {:e}",
            r.worst, r.max_rel_error, r.tolerance
        )))
    }
}
