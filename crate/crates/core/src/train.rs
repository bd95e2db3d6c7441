//! Optimization: L1 or cross-entropy loss, Adam with decoupled weight
//! decay, validation-loss early stopping and multi-seed runs.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, Task};
use crate::data::{Batch, Dataset, DatasetFeatures};
use crate::error::{Error, Result};
use crate::metrics::{binary_report, full_report, MetricReport, Scheme};
use crate::model::BimhaModel;
use crate::params::ParamStore;
use crate::tensor::{Scalar, Tensor, Var};

/// Mean L1 for regression, mean cross-entropy of the softmaxed logits for
/// classification.
pub fn loss<'t, T: Scalar>(pred: Var<'t, T>, batch: &Batch<T>, task: Task) -> Result<Var<'t, T>> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::Data("loss of an empty batch".into()));
    }
    let shape = pred.shape();
    if shape != [b, task.outputs()] {
        return Err(Error::dim(
            "loss",
            format!("prediction {shape:?} for {b} samples"),
        ));
    }
    let tape = pred.tape();
    match task {
        Task::Regression => {
            let target = Tensor::from_f64(&[b, 1], &batch.label_reg)?;
            Ok(pred.sub(tape.constant(target))?.abs().mean())
        }
        Task::BinaryClassification => {
            let mut onehot = vec![0.0; b * 2];
            for (i, c) in batch.label_cls.iter().enumerate() {
                match c {
                    Some(c @ (0 | 1)) => onehot[i * 2 + *c as usize] = 1.0,
                    _ => {
                        return Err(Error::Data(format!(
                            "sample {i} in batch has no class label 0 or 1"
                        )))
                    }
                }
            }
            let onehot = tape.constant(Tensor::from_f64(&[b, 2], &onehot)?);
            let picked = pred.log_softmax(1)?.mul(onehot)?.sum();
            Ok(picked.scale(T::from_f64_lossy(-1.0 / b as f64)))
        }
    }
}

/// Adam moments for every parameter of a store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

impl<T: Scalar> AdamState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        let zeros: Vec<_> = store
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam step. Weight decay is decoupled: each
/// parameter first shrinks by `lr · wgd · p`, then takes the Adam delta.
pub fn adam_step<T: Scalar>(
    store: &mut ParamStore<T>,
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
    wgd: f64,
) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(Error::dim(
            "optimizer",
            format!(
                "{} gradients and {} moments for {} parameters",
                grads.len(),
                state.m.len(),
                store.len()
            ),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c = |x: f64| T::from_f64_lossy(x);
    let (b1, b2, eps) = (c(BETA1), c(BETA2), c(EPSILON));
    let one = T::one();
    let correct1 = one - b1.powi(t);
    let correct2 = one - b2.powi(t);
    let lr_t = c(lr);
    let decay = c(lr * wgd);
    for (k, p) in store.tensors_mut().iter_mut().enumerate() {
        let g = &grads[k];
        if g.shape() != p.shape() {
            return Err(Error::dim(
                "optimizer",
                format!("gradient {:?} for parameter {:?}", g.shape(), p.shape()),
            ));
        }
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        for (i, (pi, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] / correct1;
            let v_hat = v[i] / correct2;
            *pi = *pi - decay * *pi;
            *pi = *pi - lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Knobs that do not belong to the model configuration.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Binning for the final test report; chosen from the manifest when
    /// `None`.
    pub scheme: Option<Scheme>,
    /// Samples per evaluation-mode forward pass.
    pub eval_chunk: usize,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            scheme: None,
            eval_chunk: 256,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

/// Progress of one training run.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub epoch: usize,
    pub best_valid_loss: f64,
    pub best_epoch: usize,
    pub epochs_since_improvement: usize,
    pub adam: AdamState<T>,
    pub rng: ChaCha8Rng,
}

/// Outcome of one training run. `wall_time_secs` is not serialized so that
/// reports of identical runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub test_loss: f64,
    pub test: MetricReport,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Mean loss over a split in evaluation mode, summed in sample order.
pub fn eval_loss<T: Scalar>(
    model: &BimhaModel<T>,
    features: &DatasetFeatures,
    chunk: usize,
) -> Result<f64> {
    let idx = features.all_indices();
    let mut total = 0.0;
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    for part in idx.chunks(chunk.max(1)) {
        let batch = features.batch::<T>(part);
        let tape = crate::tensor::Tape::new();
        let params = model.store.bind(&tape);
        let fwd = model.forward(&tape, &params, &batch, false, &mut rng)?;
        let l = loss(fwd.prediction, &batch, model.config.task)?
            .value()
            .item()
            .to_f64_lossy();
        total += l * part.len() as f64;
    }
    if idx.is_empty() {
        return Err(Error::Data("loss of an empty split".into()));
    }
    Ok(total / idx.len() as f64)
}

/// Scores a split with the given binning.
pub fn evaluate<T: Scalar>(
    model: &BimhaModel<T>,
    features: &DatasetFeatures,
    scheme: Scheme,
    chunk: usize,
) -> Result<MetricReport> {
    let pred = model.predict_features(features, chunk)?;
    match model.config.task {
        Task::Regression => {
            let labels: Vec<f64> = features.label_reg.iter().map(|&y| y as f64).collect();
            full_report(&pred.values(), &labels, scheme)
        }
        Task::BinaryClassification => {
            let truth = features
                .label_cls
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    c.ok_or_else(|| Error::Data(format!("sample {i} has no class label")))
                })
                .collect::<Result<Vec<_>>>()?;
            binary_report(&pred.classes(), &truth)
        }
    }
}

/// Trains `model` on `data.train`, early-stopping on `data.valid`, and
/// returns the best snapshot with its report on `data.test`.
pub fn train<T: Scalar>(
    mut model: BimhaModel<T>,
    data: &Dataset,
    opts: &TrainOptions,
) -> Result<(BimhaModel<T>, RunReport)> {
    let start = Instant::now();
    let cfg = model.config.clone();
    cfg.validate()?;
    for (name, split) in [
        ("train", &data.train),
        ("valid", &data.valid),
        ("test", &data.test),
    ] {
        if split.is_empty() {
            return Err(Error::Data(format!("{name} split is empty")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut state = TrainState {
        epoch: 0,
        best_valid_loss: f64::INFINITY,
        best_epoch: 0,
        epochs_since_improvement: 0,
        adam: AdamState::new(&model.store),
        rng,
    };
    let mut best = model.store.clone();
    let mut epochs = Vec::new();
    let mut order = data.train.all_indices();

    while state.epoch < cfg.max_epochs {
        state.epoch += 1;
        order.shuffle(&mut state.rng);
        let mut total = 0.0;
        for (b, part) in order.chunks(cfg.bs).enumerate() {
            let batch = data.train.batch::<T>(part);
            let tape = crate::tensor::Tape::new();
            let params = model.store.bind(&tape);
            let fwd = model.forward(&tape, &params, &batch, true, &mut state.rng)?;
            let l = loss(fwd.prediction, &batch, cfg.task)?;
            let value = l.value().item().to_f64_lossy();
            if !value.is_finite() {
                return Err(Error::Numerical(format!(
                    "training diverged: loss {value} at epoch {}, batch {b}",
                    state.epoch
                )));
            }
            total += value * part.len() as f64;
            let grads = tape.backward(l)?;
            let grads: Vec<_> = params
                .vars()
                .iter()
                .map(|&v| grads.get_or_zeros(v))
                .collect();
            adam_step(&mut model.store, &grads, &mut state.adam, cfg.lr, cfg.wgd)?;
        }
        let train_loss = total / order.len() as f64;
        let valid_loss = eval_loss(&model, &data.valid, opts.eval_chunk)?;
        if !valid_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training diverged: validation loss {valid_loss} at epoch {}",
                state.epoch
            )));
        }
        if opts.verbose {
            eprintln!(
                "epoch {:>4}  train {train_loss:.5}  valid {valid_loss:.5}",
                state.epoch
            );
        }
        epochs.push(EpochLog {
            epoch: state.epoch,
            train_loss,
            valid_loss,
        });
        if valid_loss < state.best_valid_loss {
            state.best_valid_loss = valid_loss;
            state.best_epoch = state.epoch;
            state.epochs_since_improvement = 0;
            best = model.store.clone();
        } else {
            state.epochs_since_improvement += 1;
            if state.epochs_since_improvement > cfg.patience {
                break;
            }
        }
    }

    model.store = best;
    let scheme = opts
        .scheme
        .unwrap_or_else(|| Scheme::for_manifest(&data.manifest));
    let test = evaluate(&model, &data.test, scheme, opts.eval_chunk)?;
    let test_loss = eval_loss(&model, &data.test, opts.eval_chunk)?;
    let report = RunReport {
        seed: cfg.seed,
        epochs,
        best_epoch: state.best_epoch,
        best_valid_loss: state.best_valid_loss,
        test_loss,
        test,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Results of `k` runs with consecutive seeds.
#[derive(Debug, Clone)]
pub struct MultiRun<T> {
    pub mean: MetricReport,
    pub runs: Vec<RunReport>,
    pub models: Vec<BimhaModel<T>>,
}

/// Trains with seeds `seed..seed + k` and averages the test metrics.
pub fn multi_run<T: Scalar>(
    config: &ModelConfig,
    data: &Dataset,
    k: usize,
    opts: &TrainOptions,
) -> Result<MultiRun<T>> {
    if k == 0 {
        return Err(Error::Usage("number of runs must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(k);
    let mut models = Vec::with_capacity(k);
    for i in 0..k {
        let seed = config.seed + i as u64;
        let cfg = ModelConfig {
            seed,
            ..config.clone()
        };
        let (model, report) = BimhaModel::new(&cfg)
            .and_then(|m| train(m, data, opts))
            .map_err(|e| match e {
                Error::Numerical(msg) => Error::Numerical(format!("run with seed {seed}: {msg}")),
                other => other,
            })?;
        runs.push(report);
        models.push(model);
    }
    let reports: Vec<_> = runs.iter().map(|r| r.test.clone()).collect();
    Ok(MultiRun {
        mean: MetricReport::average(&reports)?,
        runs,
        models,
    })
}
