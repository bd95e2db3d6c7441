//! End-to-end finite-difference check of the tape gradients.
//!
//! Every scalar parameter of a double-precision model is perturbed by
//! `±h` and the central difference of the training loss is compared with
//! the analytic gradient. Relative error is
//! `|a − n| / max(|a|, |n|, floor)`; the floor keeps gradients that are
//! zero up to rounding from dominating the maximum.
//!
//! Freshly built models have zero biases, which puts some ReLU inputs
//! exactly on the hinge where the loss has no derivative. [`run`] therefore
//! draws biases at random before checking.

use rand::rngs::mock::StepRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelConfig, Precision};
use crate::data::{gen_synthetic, Batch, SynthMode, SynthSpec};
use crate::error::{Error, Result};
use crate::model::BimhaModel;
use crate::tensor::{Tape, Tensor};
use crate::train::loss;

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub step: f64,
    pub floor: f64,
    pub tolerance: f64,
    /// Test hook: adds `0.01` to the analytic gradient of the first element
    /// of the named parameter.
    pub corrupt: Option<String>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            tolerance: 1e-4,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `name[index]` of the worst element.
    pub worst: String,
    pub analytic: f64,
    pub numeric: f64,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn loss_value(model: &BimhaModel<f64>, batch: &Batch<f64>) -> Result<f64> {
    let tape = Tape::new();
    let params = model.store.bind(&tape);
    let fwd = model.forward(&tape, &params, batch, false, &mut StepRng::new(0, 0))?;
    Ok(loss(fwd.prediction, batch, model.config.task)?
        .value()
        .item())
}

/// Compares analytic and numeric gradients for every parameter element.
pub fn check_model(
    model: &BimhaModel<f64>,
    batch: &Batch<f64>,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let tape = Tape::new();
    let params = model.store.bind(&tape);
    let fwd = model.forward(&tape, &params, batch, false, &mut StepRng::new(0, 0))?;
    let grads = tape.backward(loss(fwd.prediction, batch, model.config.task)?)?;
    let mut analytic: Vec<Tensor<f64>> = params
        .vars()
        .iter()
        .map(|&v| grads.get_or_zeros(v))
        .collect();
    if let Some(name) = &opts.corrupt {
        let id = model
            .store
            .find(name)
            .ok_or_else(|| Error::Usage(format!("no parameter named `{name}`")))?;
        analytic[id.index()].data_mut()[0] += 0.01;
    }

    let mut probe = model.clone();
    let mut report = GradcheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        tolerance: opts.tolerance,
    };
    for id in model.store.ids().collect::<Vec<_>>() {
        for i in 0..model.store.get(id).len() {
            let original = model.store.get(id).data()[i];
            probe.store.get_mut(id).data_mut()[i] = original + opts.step;
            let up = loss_value(&probe, batch)?;
            probe.store.get_mut(id).data_mut()[i] = original - opts.step;
            let down = loss_value(&probe, batch)?;
            probe.store.get_mut(id).data_mut()[i] = original;

            let numeric = (up - down) / (2.0 * opts.step);
            let a = analytic[id.index()].data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            if !rel.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient at {}[{i}]",
                    model.store.name(id)
                )));
            }
            if rel > report.max_rel_error || report.worst.is_empty() {
                report.max_rel_error = rel;
                report.worst = format!("{}[{i}]", model.store.name(id));
                report.analytic = a;
                report.numeric = numeric;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// The small double-precision configuration used by [`run`].
pub fn tiny_config(seed: u64) -> ModelConfig {
    ModelConfig {
        d_t: 4,
        d_a: 3,
        d_v: 4,
        thid: 3,
        tout: 3,
        ahid: 3,
        vhid: 3,
        fdim: 4,
        heads: 2,
        seed,
        precision: Precision::F64,
        ..ModelConfig::default()
    }
}

/// Builds a tiny model and a 4-sample batch from `seed` and checks them.
pub fn run(seed: u64, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let config = tiny_config(seed);
    let spec = SynthSpec {
        d_t: config.d_t,
        d_a: config.d_a,
        d_v: config.d_v,
        max_len: 5,
        lambda: 0.0,
        ..SynthSpec::new(20, SynthMode::Av, seed)
    };
    let data = gen_synthetic(&spec)?;
    let mut model = BimhaModel::<f64>::new(&config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    for t in model
        .store
        .tensors_mut()
        .iter_mut()
        .filter(|t| t.rank() == 1)
    {
        t.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-0.2..0.2));
    }
    check_model(&model, &data.train.batch(&[0, 1, 2, 3]), opts)
}
