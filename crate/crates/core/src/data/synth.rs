//! Synthetic datasets with a planted cross-modal signal.
//!
//! Every modality is driven by a low-rank latent factor: the acoustic and
//! visual vectors are noisy linear images of `z_a` and `z_v`, and each text
//! token is a noisy linear image of `z_t`. The label is a bilinear form of
//! the latents of the planted pair (or a trilinear form for `trimodal`),
//! scaled to a standard deviation of about 0.5, plus a little noise, and
//! clipped to `[-1, 1]`. In `noise` mode the label is uniform on `[-1, 1]`
//! and independent of every feature.
//!
//! Randomness comes from a `ChaCha8Rng` seeded with the integer seed, so a
//! given spec always produces the same bytes.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, UtteranceSample};
use crate::config::Task;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthMode {
    Av,
    At,
    Vt,
    Trimodal,
    Noise,
}

impl SynthMode {
    pub fn name(self) -> &'static str {
        match self {
            SynthMode::Av => "av",
            SynthMode::At => "at",
            SynthMode::Vt => "vt",
            SynthMode::Trimodal => "trimodal",
            SynthMode::Noise => "noise",
        }
    }
}

impl FromStr for SynthMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "av" => Ok(SynthMode::Av),
            "at" => Ok(SynthMode::At),
            "vt" => Ok(SynthMode::Vt),
            "trimodal" => Ok(SynthMode::Trimodal),
            "noise" => Ok(SynthMode::Noise),
            other => Err(Error::Usage(format!(
                "unknown planted mode `{other}` (expected av, at, vt, trimodal or noise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    pub seed: u64,
    pub mode: SynthMode,
    pub lambda: f64,
    pub latent: usize,
    /// Inclusive range of raw token-sequence lengths.
    pub min_len: usize,
    pub max_len: usize,
    pub label_noise: f64,
}

impl SynthSpec {
    pub fn new(n: usize, mode: SynthMode, seed: u64) -> Self {
        Self {
            n,
            d_t: 8,
            d_a: 6,
            d_v: 8,
            seed,
            mode,
            lambda: 3.0,
            latent: 2,
            min_len: 3,
            max_len: 10,
            label_noise: 0.03,
        }
    }
}

/// Train/valid/test sizes in the proportion 6:2:2 (train and valid rounded
/// down, remainder to test).
pub fn split_6_2_2(n: usize) -> (usize, usize, usize) {
    let train = n * 6 / 10;
    let valid = n * 2 / 10;
    (train, valid, n - train - valid)
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Vec<f64> {
    (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect()
}

/// `z · load` for a latent row `z [r]` and loading matrix `[r × d]`.
fn project(z: &[f64], load: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (k, &zk) in z.iter().enumerate() {
        for (o, &l) in out.iter_mut().zip(&load[k * d..(k + 1) * d]) {
            *o += zk * l;
        }
    }
    out
}

fn bilinear(x: &[f64], m: &[f64], y: &[f64]) -> f64 {
    let r = y.len();
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            xi * y
                .iter()
                .enumerate()
                .map(|(j, &yj)| m[i * r + j] * yj)
                .sum::<f64>()
        })
        .sum()
}

/// Generates raw variable-length utterances.
pub fn gen_samples(spec: &SynthSpec) -> Result<Vec<UtteranceSample>> {
    if spec.n == 0 {
        return Err(Error::Usage("synthetic dataset needs n >= 1".into()));
    }
    if spec.min_len == 0 || spec.min_len > spec.max_len || spec.latent == 0 {
        return Err(Error::Usage(
            "invalid synthetic length or latent settings".into(),
        ));
    }
    let r = spec.latent;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inv = 1.0 / (r as f64).sqrt();
    let load_t = normal_matrix(&mut rng, r, spec.d_t, inv);
    let load_a = normal_matrix(&mut rng, r, spec.d_a, inv);
    let load_v = normal_matrix(&mut rng, r, spec.d_v, inv);
    let m = normal_matrix(&mut rng, r, r, 1.0);
    let m_norm = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);

    let mut out = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let z_t = normal_matrix(&mut rng, 1, r, 1.0);
        let z_a = normal_matrix(&mut rng, 1, r, 1.0);
        let z_v = normal_matrix(&mut rng, 1, r, 1.0);
        let len = rng.gen_range(spec.min_len..=spec.max_len);

        let base_t = project(&z_t, &load_t, spec.d_t);
        let mut text = Vec::with_capacity(len * spec.d_t);
        for _ in 0..len {
            text.extend(
                base_t
                    .iter()
                    .map(|&b| (b + 0.3 * rng.sample::<f64, _>(StandardNormal)) as f32),
            );
        }
        let noisy = |base: Vec<f64>, rng: &mut ChaCha8Rng| -> Vec<f32> {
            base.into_iter()
                .map(|b| (b + 0.1 * rng.sample::<f64, _>(StandardNormal)) as f32)
                .collect()
        };
        let acoustic = noisy(project(&z_a, &load_a, spec.d_a), &mut rng);
        let visual = noisy(project(&z_v, &load_v, spec.d_v), &mut rng);

        let score = match spec.mode {
            SynthMode::Av => Some(bilinear(&z_a, &m, &z_v) / m_norm),
            SynthMode::At => Some(bilinear(&z_a, &m, &z_t) / m_norm),
            SynthMode::Vt => Some(bilinear(&z_v, &m, &z_t) / m_norm),
            SynthMode::Trimodal => {
                Some((0..r).map(|k| z_a[k] * z_v[k] * z_t[k]).sum::<f64>() * inv)
            }
            SynthMode::Noise => None,
        };
        let eps: f64 = rng.sample(StandardNormal);
        let label = match score {
            Some(s) => (0.5 * s + spec.label_noise * eps).clamp(-1.0, 1.0),
            None => rng.gen_range(-1.0..=1.0),
        };
        out.push(UtteranceSample {
            id: format!("syn{i:05}"),
            text_seq: Tensor::new(vec![len, spec.d_t], text)?,
            acoustic,
            visual,
            label_reg: label as f32,
            label_cls: Some(u32::from(label >= 0.0)),
        });
    }
    Ok(out)
}

/// Generates a dataset split 6:2:2 in generation order, padded to the
/// length computed from the training split.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    let samples = gen_samples(spec)?;
    let name = format!("synthetic-{}", spec.mode.name());
    Dataset::from_samples(&name, &samples, Task::Regression, (-1.0, 1.0), spec.lambda)
}
