//! Evaluation metrics and label binnings.
//!
//! Accuracies and F1 scores are reported as percentages. Rounding is half
//! away from zero everywhere (`f64::round`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Task;
use crate::data::DatasetManifest;
use crate::error::{Error, Result};

/// Which label binnings apply to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Labels on `[-1, 1]`: two, three and five classes.
    Sims,
    /// Labels on `[-3, 3]`: two, three, five and seven classes.
    Mosi,
    /// Class labels scored from arg-max logits.
    Binary,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Sims => "sims",
            Scheme::Mosi => "mosi",
            Scheme::Binary => "binary",
        }
    }

    /// Picks a scheme from the task and label range of a dataset.
    pub fn for_manifest(m: &DatasetManifest) -> Self {
        match m.task {
            Task::BinaryClassification => Scheme::Binary,
            Task::Regression if m.label_lo >= -1.0 && m.label_hi <= 1.0 => Scheme::Sims,
            Task::Regression => Scheme::Mosi,
        }
    }

    /// Value range the binnings assume; values outside are clamped.
    pub fn range(self) -> (f64, f64) {
        match self {
            Scheme::Sims | Scheme::Binary => (-1.0, 1.0),
            Scheme::Mosi => (-3.0, 3.0),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sims" => Ok(Scheme::Sims),
            "mosi" | "mosei" => Ok(Scheme::Mosi),
            "binary" | "iemocap" => Ok(Scheme::Binary),
            other => Err(Error::Usage(format!(
                "unknown scheme `{other}` (expected sims, mosi or binary)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Half-width of the neutral class for three-class accuracy on `[-1, 1]`
/// labels.
pub const SIMS_NEUTRAL_BAND: f64 = 0.1;

/// Class names of the five-class `[-1, 1]` binning, in index order.
pub const SIMS5_CLASSES: [&str; 5] = [
    "negative",
    "weakly negative",
    "neutral",
    "weakly positive",
    "positive",
];

/// Five-class `[-1, 1]` binning: the class of the nearest annotation grid
/// value (multiples of 0.2).
pub fn sims5(x: f64) -> usize {
    let step = (x.clamp(-1.0, 1.0) * 5.0).round() as i64;
    match step {
        i64::MIN..=-4 => 0,
        -3..=-1 => 1,
        0 => 2,
        1..=3 => 3,
        _ => 4,
    }
}

/// Negative, neutral, positive with a neutral band `|x| <= band`.
pub fn sign3(x: f64, band: f64) -> usize {
    if x < -band {
        0
    } else if x <= band {
        1
    } else {
        2
    }
}

/// Rounds after clamping to `[-k, k]` and shifts to `0..=2k`.
pub fn rounded_class(x: f64, k: u32) -> usize {
    let k = f64::from(k);
    (x.clamp(-k, k).round() + k) as usize
}

/// The two ways to reduce continuous sentiment to two classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `< 0` versus `>= 0`, every sample counted.
    NegNonNeg,
    /// `< 0` versus `> 0`, samples whose label is exactly zero excluded.
    NegPos,
}

fn check_lengths(preds: &[f64], labels: &[f64]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Metric("no samples to score".into()));
    }
    Ok(())
}

/// Fraction of equal class indices.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Support-weighted mean of per-class F1 over the classes present in
/// `truth`. A class with no predicted and no true members scores 0.
pub fn weighted_f1(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let n = truth.len() as f64;
    let mut total = 0.0;
    for c in 0..classes {
        let tp = pred
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == c && t == c)
            .count() as f64;
        let pred_c = pred.iter().filter(|&&p| p == c).count() as f64;
        let true_c = truth.iter().filter(|&&t| t == c).count() as f64;
        if true_c == 0.0 {
            continue;
        }
        let f1 = if pred_c + true_c == 0.0 {
            0.0
        } else {
            2.0 * tp / (pred_c + true_c)
        };
        total += true_c / n * f1;
    }
    total
}

/// Two-class accuracy and weighted F1, both as fractions.
pub fn acc2_f1(preds: &[f64], labels: &[f64], convention: Convention) -> Result<(f64, f64)> {
    check_lengths(preds, labels)?;
    let (p, t): (Vec<usize>, Vec<usize>) = match convention {
        Convention::NegNonNeg => preds
            .iter()
            .zip(labels)
            .map(|(&p, &y)| (usize::from(p >= 0.0), usize::from(y >= 0.0)))
            .unzip(),
        Convention::NegPos => preds
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y != 0.0)
            .map(|(&p, &y)| (usize::from(p > 0.0), usize::from(y > 0.0)))
            .unzip(),
    };
    if t.is_empty() {
        return Err(Error::Metric(
            "every label is zero; negative/positive accuracy is undefined".into(),
        ));
    }
    Ok((accuracy(&p, &t), weighted_f1(&p, &t, 2)))
}

pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(preds, labels)?;
    Ok(preds
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y).abs())
        .sum::<f64>()
        / preds.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(preds, labels)?;
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(preds) || constant(labels) {
        return Err(Error::Metric(
            "correlation is undefined for zero-variance input".into(),
        ));
    }
    let n = preds.len() as f64;
    let mp = preds.iter().sum::<f64>() / n;
    let my = labels.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, y) in preds.iter().zip(labels) {
        let (dp, dy) = (p - mp, y - my);
        sxy += dp * dy;
        sxx += dp * dp;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Metric(
            "correlation is undefined for zero-variance input".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Every metric that applies to a scheme. Inapplicable fields are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scheme: Scheme,
    pub samples: usize,
    /// Two-class accuracy, `< 0` versus `>= 0`.
    pub acc2: Option<f64>,
    /// Two-class accuracy with zero labels excluded.
    pub acc2_nonzero: Option<f64>,
    pub acc3: Option<f64>,
    pub acc5: Option<f64>,
    pub acc7: Option<f64>,
    pub f1: Option<f64>,
    pub f1_nonzero: Option<f64>,
    pub mae: Option<f64>,
    pub corr: Option<f64>,
    /// Why a metric that applies to the scheme could not be computed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    /// Predictions and labels outside the scheme's range, clamped before
    /// binning.
    pub clamped: usize,
}

impl MetricReport {
    fn empty(scheme: Scheme, samples: usize) -> Self {
        Self {
            scheme,
            samples,
            acc2: None,
            acc2_nonzero: None,
            acc3: None,
            acc5: None,
            acc7: None,
            f1: None,
            f1_nonzero: None,
            mae: None,
            corr: None,
            errors: Vec::new(),
            clamped: 0,
        }
    }

    /// Named fields in display order.
    pub fn fields(&self) -> [(&'static str, Option<f64>); 9] {
        [
            ("acc2", self.acc2),
            ("acc2_nonzero", self.acc2_nonzero),
            ("acc3", self.acc3),
            ("acc5", self.acc5),
            ("acc7", self.acc7),
            ("f1", self.f1),
            ("f1_nonzero", self.f1_nonzero),
            ("mae", self.mae),
            ("corr", self.corr),
        ]
    }

    fn fields_mut(&mut self) -> [&mut Option<f64>; 9] {
        [
            &mut self.acc2,
            &mut self.acc2_nonzero,
            &mut self.acc3,
            &mut self.acc5,
            &mut self.acc7,
            &mut self.f1,
            &mut self.f1_nonzero,
            &mut self.mae,
            &mut self.corr,
        ]
    }

    /// Arithmetic mean of every field. A field missing from any run is
    /// missing from the mean.
    pub fn average(reports: &[MetricReport]) -> Result<MetricReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Metric("cannot average zero reports".into()))?;
        let mut out = MetricReport::empty(first.scheme, first.samples);
        let k = reports.len() as f64;
        for (i, slot) in out.fields_mut().into_iter().enumerate() {
            let values: Option<Vec<f64>> = reports.iter().map(|r| r.fields()[i].1).collect();
            *slot = values.map(|v| v.iter().sum::<f64>() / k);
        }
        for (run, r) in reports.iter().enumerate() {
            out.errors
                .extend(r.errors.iter().map(|e| format!("run {run}: {e}")));
        }
        out.clamped = reports.iter().map(|r| r.clamped).sum();
        Ok(out)
    }

    /// Aligned two-column table.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<14}{}\n{:<14}{}\n",
            "scheme", self.scheme, "samples", self.samples
        );
        for (name, v) in self.fields() {
            let shown = match v {
                Some(v) if name == "mae" || name == "corr" => format!("{v:.4}"),
                Some(v) => format!("{v:.2}"),
                None => "n/a".to_string(),
            };
            s.push_str(&format!("{name:<14}{shown:>8}\n"));
        }
        if self.clamped > 0 {
            s.push_str(&format!("{:<14}{:>8}\n", "clamped", self.clamped));
        }
        for e in &self.errors {
            s.push_str(&format!("warning: {e}\n"));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// Scores continuous predictions. Metric failures such as an undefined
/// correlation leave that field empty and are listed in `errors`.
pub fn full_report(preds: &[f64], labels: &[f64], scheme: Scheme) -> Result<MetricReport> {
    check_lengths(preds, labels)?;
    if scheme == Scheme::Binary {
        let p: Vec<u32> = preds.iter().map(|&v| u32::from(v >= 0.0)).collect();
        let t: Vec<u32> = labels.iter().map(|&v| u32::from(v >= 0.0)).collect();
        return binary_report(&p, &t);
    }
    let mut r = MetricReport::empty(scheme, preds.len());
    let (lo, hi) = scheme.range();
    r.clamped = preds
        .iter()
        .chain(labels)
        .filter(|&&v| v < lo || v > hi)
        .count();
    if r.clamped > 0 {
        r.errors.push(format!(
            "{} values outside [{lo}, {hi}] clamped before binning",
            r.clamped
        ));
    }

    let (acc, f1) = acc2_f1(preds, labels, Convention::NegNonNeg)?;
    r.acc2 = Some(100.0 * acc);
    r.f1 = Some(100.0 * f1);
    match acc2_f1(preds, labels, Convention::NegPos) {
        Ok((acc, f1)) => {
            r.acc2_nonzero = Some(100.0 * acc);
            r.f1_nonzero = Some(100.0 * f1);
        }
        Err(e) => r.errors.push(e.to_string()),
    }

    let classes = |f: &dyn Fn(f64) -> usize| -> (Vec<usize>, Vec<usize>) {
        (
            preds.iter().map(|&v| f(v)).collect(),
            labels.iter().map(|&v| f(v)).collect(),
        )
    };
    let pct = |(p, t): (Vec<usize>, Vec<usize>)| Some(100.0 * accuracy(&p, &t));
    match scheme {
        Scheme::Sims => {
            r.acc3 = pct(classes(&|v| sign3(v.clamp(-1.0, 1.0), SIMS_NEUTRAL_BAND)));
            r.acc5 = pct(classes(&sims5));
        }
        Scheme::Mosi => {
            r.acc3 = pct(classes(&|v| rounded_class(v, 1)));
            r.acc5 = pct(classes(&|v| rounded_class(v, 2)));
            r.acc7 = pct(classes(&|v| rounded_class(v, 3)));
        }
        Scheme::Binary => unreachable!(),
    }

    r.mae = Some(mae(preds, labels)?);
    match pearson(preds, labels) {
        Ok(c) => r.corr = Some(c),
        Err(e) => r.errors.push(e.to_string()),
    }
    Ok(r)
}

/// Scores predicted classes against true classes.
pub fn binary_report(pred: &[u32], truth: &[u32]) -> Result<MetricReport> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Metric(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let p: Vec<usize> = pred.iter().map(|&c| c as usize).collect();
    let t: Vec<usize> = truth.iter().map(|&c| c as usize).collect();
    let classes = p.iter().chain(&t).max().map_or(0, |m| m + 1);
    let mut r = MetricReport::empty(Scheme::Binary, pred.len());
    r.acc2 = Some(100.0 * accuracy(&p, &t));
    r.f1 = Some(100.0 * weighted_f1(&p, &t, classes));
    Ok(r)
}
