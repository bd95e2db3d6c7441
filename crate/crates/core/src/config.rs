//! Model hyperparameters, named presets and the flat `key = value` config
//! format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    BinaryClassification,
}

impl Task {
    pub fn outputs(self) -> usize {
        match self {
            Task::Regression => 1,
            Task::BinaryClassification => 2,
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "binary-classification" | "classification" => Ok(Task::BinaryClassification),
            other => Err(Error::config("task", format!("unknown task `{other}`"))),
        }
    }
}

/// One attention token fed to the inter-bimodal stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    T,
    A,
    V,
    Av,
    At,
    Vt,
}

impl TokenKind {
    pub const BIMODAL: [TokenKind; 3] = [TokenKind::Av, TokenKind::At, TokenKind::Vt];

    pub fn is_bimodal(self) -> bool {
        matches!(self, TokenKind::Av | TokenKind::At | TokenKind::Vt)
    }

    pub fn name(self) -> &'static str {
        match self {
            TokenKind::T => "t",
            TokenKind::A => "a",
            TokenKind::V => "v",
            TokenKind::Av => "av",
            TokenKind::At => "at",
            TokenKind::Vt => "vt",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TokenKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "t" => TokenKind::T,
            "a" => TokenKind::A,
            "v" => TokenKind::V,
            "av" => TokenKind::Av,
            "at" => TokenKind::At,
            "vt" => TokenKind::Vt,
            other => return Err(Error::config("tokens", format!("unknown token `{other}`"))),
        })
    }
}

/// Which kind of features the attention stage attends over: unimodal (UM),
/// bimodal (BM) or a mix of both (HM).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    #[serde(rename = "UM")]
    Unimodal,
    #[serde(rename = "BM")]
    Bimodal,
    #[serde(rename = "HM")]
    Hybrid,
}

impl TargetMode {
    pub fn of_tokens(tokens: &[TokenKind]) -> Self {
        let bi = tokens.iter().filter(|t| t.is_bimodal()).count();
        if bi == tokens.len() {
            TargetMode::Bimodal
        } else if bi == 0 {
            TargetMode::Unimodal
        } else {
            TargetMode::Hybrid
        }
    }

    pub fn default_tokens(self) -> Vec<TokenKind> {
        match self {
            TargetMode::Unimodal => vec![TokenKind::A, TokenKind::V, TokenKind::T],
            TargetMode::Bimodal => TokenKind::BIMODAL.to_vec(),
            TargetMode::Hybrid => vec![TokenKind::Vt, TokenKind::A],
        }
    }
}

impl FromStr for TargetMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "UM" => Ok(TargetMode::Unimodal),
            "BM" => Ok(TargetMode::Bimodal),
            "HM" => Ok(TargetMode::Hybrid),
            other => Err(Error::config(
                "target_mode",
                format!("unknown mode `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::config(
                "shared_activation",
                format!("unknown activation `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "single" => Ok(Precision::F32),
            "f64" | "double" => Ok(Precision::F64),
            other => Err(Error::config(
                "precision",
                format!("unknown precision `{other}`"),
            )),
        }
    }
}

/// Every hyperparameter of the network and its training run.
///
/// Field names follow the conventional short names (`lr`, `bs`, `tdrp`,
/// ...). The attention width `d_m` always equals `fdim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lr: f64,
    pub bs: usize,
    pub tdrp: f64,
    pub adrp: f64,
    pub vdrp: f64,
    pub thid: usize,
    pub ahid: usize,
    pub vhid: usize,
    pub tout: usize,
    pub fdrp: f64,
    pub fdim: usize,
    pub heads: usize,
    pub wgd: f64,
    pub target_mode: TargetMode,
    pub tokens: Vec<TokenKind>,
    pub task: Task,
    pub seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    pub shared_activation: Activation,
    pub precision: Precision,
}

impl Default for ModelConfig {
    /// The CH-SIMS column of the published hyperparameter table.
    fn default() -> Self {
        Self {
            lr: 0.002,
            bs: 128,
            tdrp: 0.0,
            adrp: 0.0,
            vdrp: 0.0,
            thid: 128,
            ahid: 16,
            vhid: 128,
            tout: 64,
            fdrp: 0.2,
            fdim: 128,
            heads: 6,
            wgd: 0.0,
            target_mode: TargetMode::Bimodal,
            tokens: TokenKind::BIMODAL.to_vec(),
            task: Task::Regression,
            seed: 1,
            max_epochs: 200,
            patience: 20,
            d_t: 768,
            d_a: 33,
            d_v: 709,
            shared_activation: Activation::Relu,
            precision: Precision::F32,
        }
    }
}

/// Names accepted by [`ModelConfig::preset`].
pub const PRESETS: &[&str] = &[
    "sims",
    "mosi",
    "mosi-aligned",
    "mosei",
    "mosei-aligned",
    "iemocap-happy",
    "iemocap-sad",
    "iemocap-angry",
    "iemocap-neutral",
];

impl ModelConfig {
    /// Hyperparameter table column by name. `mosi`/`mosei` use the
    /// unaligned-data values, `*-aligned` the aligned ones.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        // lr, bs, tdrp, adrp, vdrp, thid, ahid, vhid, tout, fdrp, fdim, heads, wgd
        type Row = (
            f64,
            usize,
            f64,
            f64,
            f64,
            usize,
            usize,
            usize,
            usize,
            f64,
            usize,
            usize,
            f64,
        );
        let row: Row = match name {
            "sims" => (
                0.002, 128, 0.0, 0.0, 0.0, 128, 16, 128, 64, 0.2, 128, 6, 0.0,
            ),
            "mosi" => (0.002, 128, 0.2, 0.2, 0.2, 64, 16, 8, 128, 0.1, 32, 4, 0.0),
            "mosi-aligned" => (0.002, 64, 0.0, 0.0, 0.0, 64, 64, 64, 128, 0.2, 64, 4, 0.0),
            "mosei" => (0.001, 128, 0.1, 0.1, 0.1, 64, 32, 32, 64, 0.2, 64, 8, 0.001),
            "mosei-aligned" => (0.001, 64, 0.0, 0.1, 0.2, 64, 64, 64, 64, 0.2, 32, 8, 0.0),
            "iemocap-happy" => (0.001, 128, 0.0, 0.3, 0.1, 64, 8, 16, 128, 0.15, 64, 4, 0.0),
            "iemocap-sad" => (
                0.002, 64, 0.5, 0.15, 0.5, 256, 32, 4, 32, 0.5, 128, 6, 0.001,
            ),
            "iemocap-angry" => (0.002, 64, 0.5, 0.2, 0.2, 64, 8, 8, 32, 0.1, 128, 6, 0.001),
            "iemocap-neutral" => (
                0.0003, 32, 0.15, 0.2, 0.0, 128, 16, 4, 64, 0.2, 128, 8, 0.001,
            ),
            other => {
                return Err(Error::config(
                    "preset",
                    format!(
                        "unknown preset `{other}` (expected one of {})",
                        PRESETS.join(", ")
                    ),
                ))
            }
        };
        let (lr, bs, tdrp, adrp, vdrp, thid, ahid, vhid, tout, fdrp, fdim, heads, wgd) = row;
        let task = if name.starts_with("iemocap") {
            Task::BinaryClassification
        } else {
            Task::Regression
        };
        Ok(Self {
            lr,
            bs,
            tdrp,
            adrp,
            vdrp,
            thid,
            ahid,
            vhid,
            tout,
            fdrp,
            fdim,
            heads,
            wgd,
            task,
            ..base
        })
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
        }
        match key {
            "lr" => self.lr = parse(key, value)?,
            "bs" => self.bs = parse(key, value)?,
            "tdrp" => self.tdrp = parse(key, value)?,
            "adrp" => self.adrp = parse(key, value)?,
            "vdrp" => self.vdrp = parse(key, value)?,
            "thid" => self.thid = parse(key, value)?,
            "ahid" => self.ahid = parse(key, value)?,
            "vhid" => self.vhid = parse(key, value)?,
            "tout" => self.tout = parse(key, value)?,
            "fdrp" => self.fdrp = parse(key, value)?,
            "fdim" => self.fdim = parse(key, value)?,
            "heads" => self.heads = parse(key, value)?,
            "wgd" => self.wgd = parse(key, value)?,
            "target_mode" => {
                let mode: TargetMode = value.trim().parse()?;
                if TargetMode::of_tokens(&self.tokens) != mode {
                    self.tokens = mode.default_tokens();
                }
                self.target_mode = mode;
            }
            "tokens" => {
                self.tokens = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
                self.target_mode = TargetMode::of_tokens(&self.tokens);
            }
            "task" => self.task = value.trim().parse()?,
            "seed" => self.seed = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "d_t" => self.d_t = parse(key, value)?,
            "d_a" => self.d_a = parse(key, value)?,
            "d_v" => self.d_v = parse(key, value)?,
            "shared_activation" => self.shared_activation = value.trim().parse()?,
            "precision" => self.precision = value.trim().parse()?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    pub fn is_model_key(key: &str) -> bool {
        const KEYS: &[&str] = &[
            "lr",
            "bs",
            "tdrp",
            "adrp",
            "vdrp",
            "thid",
            "ahid",
            "vhid",
            "tout",
            "fdrp",
            "fdim",
            "heads",
            "wgd",
            "target_mode",
            "tokens",
            "task",
            "seed",
            "max_epochs",
            "patience",
            "d_t",
            "d_a",
            "d_v",
            "shared_activation",
            "precision",
        ];
        KEYS.contains(&key)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bs", self.bs),
            ("thid", self.thid),
            ("ahid", self.ahid),
            ("vhid", self.vhid),
            ("tout", self.tout),
            ("fdim", self.fdim),
            ("heads", self.heads),
            ("d_t", self.d_t),
            ("d_a", self.d_a),
            ("d_v", self.d_v),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        for (key, rate) in [
            ("tdrp", self.tdrp),
            ("adrp", self.adrp),
            ("vdrp", self.vdrp),
            ("fdrp", self.fdrp),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::config(key, format!("dropout {rate} outside [0, 1)")));
            }
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be finite and non-negative"));
        }
        if !(self.wgd >= 0.0 && self.wgd.is_finite()) {
            return Err(Error::config("wgd", "must be finite and non-negative"));
        }
        if self.tokens.len() < 2 {
            return Err(Error::config("tokens", "attention needs at least 2 tokens"));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if self.tokens[..i].contains(t) {
                return Err(Error::config("tokens", format!("duplicate token `{t}`")));
            }
        }
        if TargetMode::of_tokens(&self.tokens) != self.target_mode {
            return Err(Error::config(
                "target_mode",
                format!(
                    "{:?} does not match tokens {:?}",
                    self.target_mode, self.tokens
                ),
            ));
        }
        Ok(())
    }

    /// Attention projection width; equal to `fdim` so the residual merge is
    /// well-formed.
    pub fn d_model(&self) -> usize {
        self.fdim
    }

    /// Width of the unimodal embedding feeding a token or pair.
    pub fn unimodal_dim(&self, token: TokenKind) -> usize {
        match token {
            TokenKind::T => self.tout,
            TokenKind::A => self.ahid,
            TokenKind::V => self.vhid,
            TokenKind::Av => self.ahid * self.vhid,
            TokenKind::At => self.ahid * self.tout,
            TokenKind::Vt => self.vhid * self.tout,
        }
    }

    /// Renders the config in the flat `key = value` format.
    pub fn to_flat(&self) -> String {
        let tokens: Vec<&str> = self.tokens.iter().map(|t| t.name()).collect();
        let mode = match self.target_mode {
            TargetMode::Unimodal => "UM",
            TargetMode::Bimodal => "BM",
            TargetMode::Hybrid => "HM",
        };
        let task = match self.task {
            Task::Regression => "regression",
            Task::BinaryClassification => "binary-classification",
        };
        let act = match self.shared_activation {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        };
        let precision = match self.precision {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        };
        format!(
            "lr = {}\nbs = {}\ntdrp = {}\nadrp = {}\nvdrp = {}\nthid = {}\nahid = {}\nvhid = {}\n\
             tout = {}\nfdrp = {}\nfdim = {}\nheads = {}\nwgd = {}\ntarget_mode = {mode}\n\
             tokens = {}\ntask = {task}\nseed = {}\nmax_epochs = {}\npatience = {}\nd_t = {}\n\
             d_a = {}\nd_v = {}\nshared_activation = {act}\nprecision = {precision}\n",
            self.lr,
            self.bs,
            self.tdrp,
            self.adrp,
            self.vdrp,
            self.thid,
            self.ahid,
            self.vhid,
            self.tout,
            self.fdrp,
            self.fdim,
            self.heads,
            self.wgd,
            tokens.join(","),
            self.seed,
            self.max_epochs,
            self.patience,
            self.d_t,
            self.d_a,
            self.d_v,
        )
    }
}

/// Parses a flat UTF-8 `key = value` document. `#` starts a comment;
/// blank lines are skipped. Returns pairs in file order.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sims_preset_matches_table_column() {
        let c = ModelConfig::preset("sims").unwrap();
        assert_eq!(c.lr, 0.002);
        assert_eq!(c.bs, 128);
        assert_eq!(c.heads, 6);
        assert_eq!(c.fdim, 128);
        assert_eq!((c.ahid, c.vhid, c.tout), (16, 128, 64));
        c.validate().unwrap();
    }

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            ModelConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ModelConfig::preset("nope").is_err());
        assert_eq!(
            ModelConfig::preset("iemocap-neutral").unwrap().task,
            Task::BinaryClassification
        );
    }

    #[test]
    fn flat_round_trip() {
        let mut c = ModelConfig::preset("mosei").unwrap();
        c.tokens = vec![TokenKind::At, TokenKind::Vt];
        let mut back = ModelConfig::default();
        for (k, v) in parse_flat(&c.to_flat()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn flat_parser_comments_and_errors() {
        let pairs = parse_flat("# header\n lr = 0.5 # inline\n\nheads=2\n").unwrap();
        assert_eq!(
            pairs,
            vec![("lr".into(), "0.5".into()), ("heads".into(), "2".into())]
        );
        assert!(parse_flat("nonsense line").is_err());
        let mut c = ModelConfig::default();
        assert!(matches!(c.set("bogus", "1"), Err(Error::Config { key, .. }) if key == "bogus"));
        assert!(c.set("fdim", "abc").is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = ModelConfig::default();
        c.fdrp = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "fdrp"));
        let mut c = ModelConfig::default();
        c.tokens = vec![TokenKind::Av];
        c.target_mode = TargetMode::Bimodal;
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "tokens"));
    }

    #[test]
    fn target_mode_follows_tokens() {
        let mut c = ModelConfig::default();
        c.set("tokens", "vt,a").unwrap();
        assert_eq!(c.target_mode, TargetMode::Hybrid);
        c.set("target_mode", "UM").unwrap();
        assert_eq!(c.tokens, vec![TokenKind::A, TokenKind::V, TokenKind::T]);
        c.validate().unwrap();
    }
}
