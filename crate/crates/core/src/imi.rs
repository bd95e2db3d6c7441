//! Inter-modal interaction: pairwise outer products, a private ReLU
//! projection per pair and one projection shared by all pairs.
//!
//! Outer products are flattened row-major with the first modality of the
//! pair as the row index, so `Z_av[i * d_v + j] = a[i] * v[j]`.

use rand::Rng;

use crate::config::{Activation, ModelConfig, TokenKind};
use crate::error::{Error, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::{Scalar, Var};

/// Flattened pairwise outer products of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BimodalOuter<T> {
    pub av: Vec<T>,
    pub at: Vec<T>,
    pub vt: Vec<T>,
}

fn flat_outer<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter()
        .flat_map(|&p| y.iter().map(move |&q| p * q))
        .collect()
}

/// Outer products of one sample's unimodal embeddings.
pub fn bimodal_outer<T: Scalar>(t: &[T], a: &[T], v: &[T]) -> BimodalOuter<T> {
    BimodalOuter {
        av: flat_outer(a, v),
        at: flat_outer(a, t),
        vt: flat_outer(v, t),
    }
}

/// Unimodal embeddings of a batch, each `[B × dim]`.
#[derive(Debug, Clone, Copy)]
pub struct Unimodal<'t, T> {
    pub t: Var<'t, T>,
    pub a: Var<'t, T>,
    pub v: Var<'t, T>,
}

impl<'t, T: Scalar> Unimodal<'t, T> {
    /// Input to a token's private projection: the flattened pair product
    /// for bimodal tokens, the embedding itself for unimodal ones.
    pub fn source(&self, token: TokenKind) -> Result<Var<'t, T>> {
        Ok(match token {
            TokenKind::Av => self.a.row_outer(self.v)?,
            TokenKind::At => self.a.row_outer(self.t)?,
            TokenKind::Vt => self.v.row_outer(self.t)?,
            TokenKind::T => self.t,
            TokenKind::A => self.a,
            TokenKind::V => self.v,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Imi {
    pub tokens: Vec<TokenKind>,
    /// Private `(weight, bias)` per token, aligned with `tokens`.
    pub private: Vec<(ParamId, ParamId)>,
    pub shared_w: ParamId,
    pub shared_b: ParamId,
    pub shared_activation: Activation,
    pub dim: usize,
}

impl Imi {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        config: &ModelConfig,
        rng: &mut R,
    ) -> Self {
        let d = config.fdim;
        let private = config
            .tokens
            .iter()
            .map(|&tok| {
                (
                    store.add_weight(format!("imi.w_{tok}"), config.unimodal_dim(tok), d, rng),
                    store.add_bias(format!("imi.b_{tok}"), d),
                )
            })
            .collect();
        Self {
            tokens: config.tokens.clone(),
            private,
            shared_w: store.add_weight("imi.theta", d, d, rng),
            shared_b: store.add_bias("imi.b_theta", d),
            shared_activation: config.shared_activation,
            dim: d,
        }
    }

    /// `ReLU(z W_s + b_s)` for the token at position `k`.
    pub fn private_project<'t, T: Scalar>(
        &self,
        params: &Bound<'t, T>,
        k: usize,
        z: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let (w, b) = self.private[k];
        let expected = params.get(w).shape()[0];
        let shape = z.shape();
        if shape.len() != 2 || shape[1] != expected {
            return Err(Error::dim(
                "imi",
                format!(
                    "token `{}` input {shape:?}, expected [B, {expected}]",
                    self.tokens[k]
                ),
            ));
        }
        Ok(z.matmul(params.get(w))?.add_bias(params.get(b))?.relu())
    }

    /// The shared projection `act(z θ + b_θ)`; one θ serves every token.
    pub fn shared_project<'t, T: Scalar>(
        &self,
        params: &Bound<'t, T>,
        z: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let out = z
            .matmul(params.get(self.shared_w))?
            .add_bias(params.get(self.shared_b))?;
        Ok(match self.shared_activation {
            Activation::Relu => out.relu(),
            Activation::Linear => out,
        })
    }

    /// One `[B × d]` feature per configured token.
    pub fn forward<'t, T: Scalar>(
        &self,
        params: &Bound<'t, T>,
        emb: &Unimodal<'t, T>,
    ) -> Result<Vec<Var<'t, T>>> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(k, &tok)| {
                let z = emb.source(tok)?;
                let zbar = self.private_project(params, k, z)?;
                self.shared_project(params, zbar)
            })
            .collect()
    }
}
