//! Inter-bimodal interaction: multi-head attention where each fused
//! feature queries the stack of all fused features.
//!
//! The stacked features `D` are treated as a sequence of tokens. Per head
//! `i`, keys and values are `W_D1^i H_j` and `W_D2^i H_j` for every token
//! `j`, and each token `s` queries with `W_Q^i H_s`. The query and output
//! projections are shared by every query stream. Outputs keep the input
//! width (`d_m = d`) so they can be added back onto `D`.

use rand::Rng;

use crate::config::{ModelConfig, TokenKind};
use crate::error::{Error, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::{Scalar, Tape, Var};

/// Generic multi-head attention over token matrices.
///
/// `q` is `[q × d]`, `x` and `y` are `[k × d]`; each head is a
/// `(W_Q, W_X, W_Y)` triple of `[d × d_m]` projections and `w_o` is
/// `[heads·d_m × d_out]`. Returns the `[q × d_out]` output and each head's
/// `[q × k]` attention weights.
pub fn mha<'t, T: Scalar>(
    q: Var<'t, T>,
    x: Var<'t, T>,
    y: Var<'t, T>,
    heads: &[(Var<'t, T>, Var<'t, T>, Var<'t, T>)],
    w_o: Var<'t, T>,
) -> Result<(Var<'t, T>, Vec<Var<'t, T>>)> {
    let tape = q.tape();
    if x.shape()[0] != y.shape()[0] {
        return Err(Error::dim(
            "mha",
            format!(
                "keys {:?} and values {:?} differ in token count",
                x.shape(),
                y.shape()
            ),
        ));
    }
    let mut outs = Vec::with_capacity(heads.len());
    let mut weights = Vec::with_capacity(heads.len());
    for &(wq, wx, wy) in heads {
        let dm = wq.shape()[1];
        let qh = q.matmul(wq)?;
        let xh = x.matmul(wx)?;
        let yh = y.matmul(wy)?;
        let scores = qh
            .matmul(xh.transpose()?)?
            .scale(T::from_f64_lossy(1.0 / (dm as f64).sqrt()));
        let alpha = scores.softmax(1)?;
        outs.push(alpha.matmul(yh)?);
        weights.push(alpha);
    }
    let cat = tape.concat(&outs, 1)?;
    Ok((cat.matmul(w_o)?, weights))
}

/// Output of [`Bmha::forward`] for a batch.
pub struct BmhaOutput<'t, T> {
    /// One `[B × d]` output per query token.
    pub outputs: Vec<Var<'t, T>>,
    /// `weights[head][query]` is the `[B × tokens]` softmax for that query.
    pub weights: Vec<Vec<Var<'t, T>>>,
}

#[derive(Debug, Clone)]
pub struct Bmha {
    pub heads: usize,
    pub dim: usize,
    pub w_q: Vec<ParamId>,
    pub w_key: Vec<ParamId>,
    pub w_value: Vec<ParamId>,
    pub w_o: ParamId,
}

impl Bmha {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        config: &ModelConfig,
        rng: &mut R,
    ) -> Self {
        let (d, dm) = (config.fdim, config.d_model());
        let (mut w_q, mut w_key, mut w_value) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..config.heads {
            w_q.push(store.add_weight(format!("ibi.w_q{i}"), d, dm, rng));
            w_key.push(store.add_weight(format!("ibi.w_d1_{i}"), d, dm, rng));
            w_value.push(store.add_weight(format!("ibi.w_d2_{i}"), d, dm, rng));
        }
        Self {
            heads: config.heads,
            dim: d,
            w_q,
            w_key,
            w_value,
            w_o: store.add_weight("ibi.w_o", config.heads * dm, dm, rng),
        }
    }

    /// Attention of every token over all tokens, batched over rows.
    pub fn forward<'t, T: Scalar>(
        &self,
        params: &Bound<'t, T>,
        tokens: &[Var<'t, T>],
    ) -> Result<BmhaOutput<'t, T>> {
        if tokens.len() < 2 {
            return Err(Error::dim(
                "ibi",
                format!("need at least 2 tokens, got {}", tokens.len()),
            ));
        }
        let tape = tokens[0].tape();
        let batch = tokens[0].shape()[0];
        for t in tokens {
            if t.shape() != [batch, self.dim] {
                return Err(Error::dim(
                    "ibi",
                    format!(
                        "token shape {:?}, expected [{batch}, {}]",
                        t.shape(),
                        self.dim
                    ),
                ));
            }
        }
        let dm = params.get(self.w_o).shape()[1];
        if dm != self.dim {
            return Err(Error::dim(
                "ibi",
                format!("d_m = {dm} must equal d = {}", self.dim),
            ));
        }
        let inv_sqrt = T::from_f64_lossy(1.0 / (dm as f64).sqrt());
        let n = tokens.len();
        let mut per_query: Vec<Vec<Var<'t, T>>> = vec![Vec::with_capacity(self.heads); n];
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (wq, wk, wv) = (
                params.get(self.w_q[h]),
                params.get(self.w_key[h]),
                params.get(self.w_value[h]),
            );
            let keys = tokens
                .iter()
                .map(|t| t.matmul(wk))
                .collect::<Result<Vec<_>, _>>()?;
            let values = tokens
                .iter()
                .map(|t| t.matmul(wv))
                .collect::<Result<Vec<_>, _>>()?;
            let mut head_weights = Vec::with_capacity(n);
            for (s, tok) in tokens.iter().enumerate() {
                let q = tok.matmul(wq)?;
                let cols = keys
                    .iter()
                    .map(|k| q.mul(*k)?.sum_axis(1)?.reshape(&[batch, 1]))
                    .collect::<Result<Vec<_>, _>>()?;
                let alpha = tape.concat(&cols, 1)?.scale(inv_sqrt).softmax(1)?;
                let mut mixed = None;
                for (j, v) in values.iter().enumerate() {
                    let w = alpha.slice(1, j, 1)?.reshape(&[batch])?;
                    let term = v.scale_rows(w)?;
                    mixed = Some(match mixed {
                        None => term,
                        Some(acc) => term.add(acc)?,
                    });
                }
                per_query[s].push(mixed.expect("at least two tokens"));
                head_weights.push(alpha);
            }
            weights.push(head_weights);
        }
        let w_o = params.get(self.w_o);
        let outputs = per_query
            .iter()
            .map(|heads| Ok(tape.concat(heads, 1)?.matmul(w_o)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(BmhaOutput { outputs, weights })
    }
}

/// `concat(outputs) + D`, where `D` is the concatenation of the tokens.
pub fn residual_merge<'t, T: Scalar>(
    tape: &'t Tape<T>,
    outputs: &[Var<'t, T>],
    tokens: &[Var<'t, T>],
) -> Result<Var<'t, T>> {
    let merged = tape.concat(outputs, 1)?;
    let d = tape.concat(tokens, 1)?;
    if merged.shape() != d.shape() {
        return Err(Error::dim(
            "residual",
            format!(
                "attention outputs {:?} vs stacked features {:?}",
                merged.shape(),
                d.shape()
            ),
        ));
    }
    Ok(merged.add(d)?)
}

/// Attention weights of a set of samples, indexed
/// `[sample][head][query][key]` over the configured tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub tokens: Vec<TokenKind>,
    pub heads: usize,
    pub samples: usize,
    weights: Vec<f64>,
}

impl AttentionRecord {
    pub fn from_output<T: Scalar>(tokens: &[TokenKind], out: &BmhaOutput<'_, T>) -> Self {
        let heads = out.weights.len();
        let n = tokens.len();
        let samples = out
            .weights
            .first()
            .and_then(|h| h.first())
            .map_or(0, |w| w.shape()[0]);
        let mut weights = vec![0.0; samples * heads * n * n];
        for (h, per_head) in out.weights.iter().enumerate() {
            for (q, alpha) in per_head.iter().enumerate() {
                let v = alpha.value();
                for s in 0..samples {
                    for k in 0..n {
                        weights[((s * heads + h) * n + q) * n + k] =
                            v.data()[s * n + k].to_f64_lossy();
                    }
                }
            }
        }
        Self {
            tokens: tokens.to_vec(),
            heads,
            samples,
            weights,
        }
    }

    pub fn get(&self, sample: usize, head: usize, query: usize, key: usize) -> f64 {
        let n = self.tokens.len();
        self.weights[((sample * self.heads + head) * n + query) * n + key]
    }

    /// Key weights for one `(sample, head, query)`.
    pub fn row(&self, sample: usize, head: usize, query: usize) -> &[f64] {
        let n = self.tokens.len();
        let start = ((sample * self.heads + head) * n + query) * n;
        &self.weights[start..start + n]
    }

    /// Mean weight received by each key, over all queries and heads.
    pub fn key_summary(&self, sample: usize) -> Vec<f64> {
        let n = self.tokens.len();
        let mut out = vec![0.0; n];
        for h in 0..self.heads {
            for q in 0..n {
                for (o, w) in out.iter_mut().zip(self.row(sample, h, q)) {
                    *o += w;
                }
            }
        }
        let denom = (self.heads * n) as f64;
        out.iter_mut().for_each(|v| *v /= denom);
        out
    }

    /// Largest deviation from 1 of any row sum.
    pub fn max_normalization_error(&self) -> f64 {
        self.weights
            .chunks(self.tokens.len())
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Appends another record over the same tokens and heads.
    pub fn extend(&mut self, other: AttentionRecord) {
        debug_assert_eq!(self.tokens, other.tokens);
        debug_assert_eq!(self.heads, other.heads);
        self.samples += other.samples;
        self.weights.extend(other.weights);
    }
}
