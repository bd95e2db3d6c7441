//! Unimodal representation learning: an LSTM sentence encoder for text and
//! three-layer DNNs for the acoustic and visual vectors.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Single-layer unidirectional LSTM whose final hidden state is projected
/// to `out` units with ReLU.
///
/// Gate columns of the fused weight matrices are ordered input, forget,
/// cell, output. Padding rows are consumed like any other step.
#[derive(Debug, Clone)]
pub struct LstmEncoder {
    pub input: usize,
    pub hidden: usize,
    pub out: usize,
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

impl LstmEncoder {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
        out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            input,
            hidden,
            out,
            w_ih: store.add_weight(format!("{prefix}.w_ih"), input, 4 * hidden, rng),
            w_hh: store.add_weight(format!("{prefix}.w_hh"), hidden, 4 * hidden, rng),
            bias: store.add_bias(format!("{prefix}.bias"), 4 * hidden),
            w_out: store.add_weight(format!("{prefix}.w_out"), hidden, out, rng),
            b_out: store.add_bias(format!("{prefix}.b_out"), out),
        }
    }

    /// Runs over `steps` (each `[B × input]`) and returns `[B × out]`.
    /// Dropout applies to the final hidden state only.
    pub fn forward<'t, T: Scalar, R: Rng + ?Sized>(
        &self,
        params: &Bound<'t, T>,
        steps: &[Var<'t, T>],
        dropout: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var<'t, T>> {
        let first = steps
            .first()
            .ok_or_else(|| Error::dim("text encoder", "sequence length must be at least 1"))?;
        let tape = first.tape();
        let batch = first.shape()[0];
        let h_dim = self.hidden;
        let (w_ih, w_hh, bias) = (
            params.get(self.w_ih),
            params.get(self.w_hh),
            params.get(self.bias),
        );
        let mut h = tape.constant(Tensor::zeros(&[batch, h_dim]));
        let mut c = tape.constant(Tensor::zeros(&[batch, h_dim]));
        for x in steps {
            let shape = x.shape();
            if shape != [batch, self.input] {
                return Err(Error::dim(
                    "text encoder",
                    format!("step shape {shape:?}, expected [{batch}, {}]", self.input),
                ));
            }
            let gates = x.matmul(w_ih)?.add(h.matmul(w_hh)?)?.add_bias(bias)?;
            let i = gates.slice(1, 0, h_dim)?.sigmoid();
            let f = gates.slice(1, h_dim, h_dim)?.sigmoid();
            let g = gates.slice(1, 2 * h_dim, h_dim)?.tanh();
            let o = gates.slice(1, 3 * h_dim, h_dim)?.sigmoid();
            c = f.mul(c)?.add(i.mul(g)?)?;
            h = o.mul(c.tanh())?;
        }
        let h = h.dropout(dropout, training, rng)?;
        Ok(h.matmul(params.get(self.w_out))?
            .add_bias(params.get(self.b_out))?
            .relu())
    }

    /// Evaluation-mode encoding of a single `[L × input]` sequence.
    pub fn encode<T: Scalar>(&self, store: &ParamStore<T>, seq: &Tensor<T>) -> Result<Tensor<T>> {
        if seq.rank() != 2 || seq.shape()[1] != self.input {
            return Err(Error::dim(
                "text encoder",
                format!(
                    "sequence shape {:?}, expected [L, {}]",
                    seq.shape(),
                    self.input
                ),
            ));
        }
        let tape = Tape::new();
        let params = store.bind(&tape);
        let steps: Vec<_> = seq
            .data()
            .chunks(self.input)
            .map(|row| {
                tape.constant(Tensor::new(vec![1, self.input], row.to_vec()).expect("sized"))
            })
            .collect();
        let out = self.forward(
            &params,
            &steps,
            0.0,
            false,
            &mut rand::rngs::mock::StepRng::new(0, 0),
        )?;
        Ok(out.value().reshape(&[self.out])?)
    }
}

/// Three affine layers of equal width, each followed by ReLU and dropout.
#[derive(Debug, Clone)]
pub struct DnnEncoder {
    pub input: usize,
    pub hidden: usize,
    pub layers: [(ParamId, ParamId); 3],
}

impl DnnEncoder {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let mut layer = |k: usize, fan_in: usize| {
            (
                store.add_weight(format!("{prefix}.w{k}"), fan_in, hidden, rng),
                store.add_bias(format!("{prefix}.b{k}"), hidden),
            )
        };
        let layers = [layer(1, input), layer(2, hidden), layer(3, hidden)];
        Self {
            input,
            hidden,
            layers,
        }
    }

    pub fn forward<'t, T: Scalar, R: Rng + ?Sized>(
        &self,
        params: &Bound<'t, T>,
        x: Var<'t, T>,
        stage: &'static str,
        dropout: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var<'t, T>> {
        let shape = x.shape();
        if shape.len() != 2 || shape[1] != self.input {
            return Err(Error::dim(
                stage,
                format!("input shape {shape:?}, expected [B, {}]", self.input),
            ));
        }
        let mut h = x;
        for &(w, b) in &self.layers {
            h = h
                .matmul(params.get(w))?
                .add_bias(params.get(b))?
                .relu()
                .dropout(dropout, training, rng)?;
        }
        Ok(h)
    }

    /// Evaluation-mode encoding of one input vector.
    pub fn encode<T: Scalar>(&self, store: &ParamStore<T>, x: &[T]) -> Result<Tensor<T>> {
        let tape = Tape::new();
        let params = store.bind(&tape);
        let input = tape.constant(Tensor::new(vec![1, x.len()], x.to_vec())?);
        let out = self.forward(
            &params,
            input,
            "dnn encoder",
            0.0,
            false,
            &mut rand::rngs::mock::StepRng::new(0, 0),
        )?;
        Ok(out.value().reshape(&[self.hidden])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn zero_all(store: &mut ParamStore<f64>) {
        for t in store.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn zero_lstm_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let enc = LstmEncoder::new(&mut store, "lstm", 3, 4, 2, &mut rng);
        zero_all(&mut store);
        let out = enc.encode(&store, &Tensor::zeros(&[5, 3])).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn single_step_matches_hand_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::<f64>::new();
        let (d, h, o) = (3, 2, 2);
        let enc = LstmEncoder::new(&mut store, "lstm", d, h, o, &mut rng);
        store
            .get_mut(enc.bias)
            .data_mut()
            .copy_from_slice(&[0.1, -0.2, 0.3, 0.05, 0.0, 0.2, -0.1, 0.4]);
        let x = [0.5, -1.0, 2.0];
        let out = enc
            .encode(&store, &Tensor::from_f64(&[1, d], &x).unwrap())
            .unwrap();

        // one cell step from a zero state: gates = x W_ih + b
        let w = store.get(enc.w_ih);
        let b = store.get(enc.bias);
        let gate =
            |k: usize| -> f64 { (0..d).map(|p| x[p] * w.at(p, k)).sum::<f64>() + b.data()[k] };
        let mut hidden = vec![0.0; h];
        for j in 0..h {
            let i = sigmoid(gate(j));
            let g = gate(2 * h + j).tanh();
            let og = sigmoid(gate(3 * h + j));
            let c = i * g;
            hidden[j] = og * c.tanh();
        }
        let wo = store.get(enc.w_out);
        for k in 0..o {
            let z: f64 = (0..h).map(|j| hidden[j] * wo.at(j, k)).sum();
            assert!((out.data()[k] - z.max(0.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn lstm_consumes_exactly_the_given_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::<f64>::new();
        let enc = LstmEncoder::new(&mut store, "lstm", 2, 3, 3, &mut rng);
        let seq = Tensor::from_f64(&[3, 2], &[1., 2., 3., 4., 5., 6.]).unwrap();
        let a = enc.encode(&store, &seq).unwrap();
        assert_eq!(a, enc.encode(&store, &seq).unwrap());
        let longer = Tensor::from_f64(&[4, 2], &[1., 2., 3., 4., 5., 6., 9., 9.]).unwrap();
        let trimmed = crate::data::pad_truncate(&longer, 3).unwrap();
        assert_eq!(a, enc.encode(&store, &trimmed).unwrap());
        assert!(enc.encode(&store, &Tensor::zeros(&[3, 5])).is_err());
    }

    #[test]
    fn dnn_identity_chain_and_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f64>::new();
        let enc = DnnEncoder::new(&mut store, "audio", 1, 1, &mut rng);
        for &(w, _) in &enc.layers {
            store.get_mut(w).data_mut()[0] = 1.0;
        }
        assert_eq!(enc.encode(&store, &[2.0]).unwrap().data(), &[2.0]);
        zero_all(&mut store);
        assert_eq!(enc.encode(&store, &[5.0]).unwrap().data(), &[0.0]);
        assert!(enc.encode(&store, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dnn_matches_reference_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut store = ParamStore::<f64>::new();
        let enc = DnnEncoder::new(&mut store, "video", 5, 4, &mut rng);
        for &(_, b) in &enc.layers {
            store
                .get_mut(b)
                .data_mut()
                .iter_mut()
                .enumerate()
                .for_each(|(i, v)| *v = 0.1 * i as f64 - 0.1);
        }
        let x = [0.3, -1.2, 0.8, 2.0, -0.4];
        let got = enc.encode(&store, &x).unwrap();
        let mut h = x.to_vec();
        for &(w, b) in &enc.layers {
            let (w, b) = (store.get(w), store.get(b));
            h = (0..4)
                .map(|k| {
                    let z: f64 = h
                        .iter()
                        .enumerate()
                        .map(|(p, &v)| v * w.at(p, k))
                        .sum::<f64>()
                        + b.data()[k];
                    z.max(0.0)
                })
                .collect();
        }
        assert_eq!(got.len(), 4);
        for (g, e) in got.data().iter().zip(&h) {
            assert!((g - e).abs() < 1e-12);
        }
    }
}
