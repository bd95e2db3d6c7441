//! The full network: encoders, inter-modal fusion, bimodal attention,
//! residual merge and the prediction DNN, plus its file format.
//!
//! Model file layout (little endian):
//!
//! ```text
//! "BMHM" | u32 version = 1 | u64 n | n bytes of config JSON | u32 tensors
//! per tensor, in parameter order:
//!     u32 name_len | name | u32 rank | rank × u32 dims | values
//! ```
//!
//! Values are `f32` unless the embedded config says `"precision": "f64"`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelConfig, Task};
use crate::data::{Batch, DatasetFeatures};
use crate::encoders::{DnnEncoder, LstmEncoder};
use crate::error::{Error, Result};
use crate::ibi::{residual_merge, AttentionRecord, Bmha, BmhaOutput};
use crate::imi::{Imi, Unimodal};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Three affine layers `[k·d → fdim → fdim → out]`, ReLU and dropout after
/// the two hidden layers.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub layers: [(ParamId, ParamId); 3],
}

impl Predictor {
    fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        input: usize,
        hidden: usize,
        out: usize,
        rng: &mut R,
    ) -> Self {
        let mut layer = |k: usize, fan_in: usize, fan_out: usize| {
            (
                store.add_weight(format!("pred.w{k}"), fan_in, fan_out, rng),
                store.add_bias(format!("pred.b{k}"), fan_out),
            )
        };
        Self {
            layers: [
                layer(1, input, hidden),
                layer(2, hidden, hidden),
                layer(3, hidden, out),
            ],
        }
    }

    pub fn forward<'t, T: Scalar, R: Rng + ?Sized>(
        &self,
        params: &Bound<'t, T>,
        x: Var<'t, T>,
        dropout: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var<'t, T>> {
        let mut h = x;
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            h = h.matmul(params.get(w))?.add_bias(params.get(b))?;
            if k < 2 {
                h = h.relu().dropout(dropout, training, rng)?;
            }
        }
        Ok(h)
    }
}

/// Intermediate results of one forward pass.
pub struct Forward<'t, T> {
    /// `[B × outputs]`: one value per sample for regression, class logits
    /// for classification.
    pub prediction: Var<'t, T>,
    pub unimodal: Unimodal<'t, T>,
    /// Inter-modal features, one `[B × d]` per configured token.
    pub tokens: Vec<Var<'t, T>>,
    pub attention: BmhaOutput<'t, T>,
    /// Residual merge of attention outputs and stacked tokens.
    pub merged: Var<'t, T>,
}

/// Evaluation-mode output for a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub task: Task,
    /// `[N × outputs]`
    pub outputs: Tensor<T>,
    pub attention: AttentionRecord,
}

impl<T: Scalar> Prediction<T> {
    /// Regression values, one per sample.
    pub fn values(&self) -> Vec<f64> {
        let cols = self.outputs.shape()[1];
        self.outputs
            .data()
            .iter()
            .step_by(cols)
            .map(|v| v.to_f64_lossy())
            .collect()
    }

    /// Arg-max class per sample.
    pub fn classes(&self) -> Vec<u32> {
        let cols = self.outputs.shape()[1];
        self.outputs
            .data()
            .chunks(cols)
            .map(|row| {
                let mut best = 0;
                for (i, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = i;
                    }
                }
                best as u32
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BimhaModel<T> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub text: LstmEncoder,
    pub audio: DnnEncoder,
    pub video: DnnEncoder,
    pub imi: Imi,
    pub ibi: Bmha,
    pub predictor: Predictor,
}

impl<T: Scalar> BimhaModel<T> {
    /// Builds a freshly initialized model: Glorot-uniform weights, zero
    /// biases, seeded from `config.seed`.
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let text = LstmEncoder::new(
            &mut store,
            "text",
            config.d_t,
            config.thid,
            config.tout,
            &mut rng,
        );
        let audio = DnnEncoder::new(&mut store, "audio", config.d_a, config.ahid, &mut rng);
        let video = DnnEncoder::new(&mut store, "video", config.d_v, config.vhid, &mut rng);
        let imi = Imi::new(&mut store, config, &mut rng);
        let ibi = Bmha::new(&mut store, config, &mut rng);
        let predictor = Predictor::new(
            &mut store,
            config.tokens.len() * config.fdim,
            config.fdim,
            config.task.outputs(),
            &mut rng,
        );
        Ok(Self {
            config: config.clone(),
            store,
            text,
            audio,
            video,
            imi,
            ibi,
            predictor,
        })
    }

    /// Exact number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    fn check_batch(&self, batch: &Batch<T>) -> Result<()> {
        let c = &self.config;
        let (ts, a, v) = (
            batch.text.shape(),
            batch.acoustic.shape(),
            batch.visual.shape(),
        );
        if batch.is_empty() {
            return Err(Error::dim("input", "empty batch"));
        }
        if ts[2] != c.d_t || ts[1] == 0 {
            return Err(Error::dim(
                "text encoder",
                format!("text {ts:?}, model expects d_t = {}", c.d_t),
            ));
        }
        if a[1] != c.d_a {
            return Err(Error::dim(
                "audio encoder",
                format!("acoustic {a:?}, model expects d_a = {}", c.d_a),
            ));
        }
        if v[1] != c.d_v {
            return Err(Error::dim(
                "video encoder",
                format!("visual {v:?}, model expects d_v = {}", c.d_v),
            ));
        }
        Ok(())
    }

    /// Records a full forward pass on `tape`.
    pub fn forward<'t, R: Rng + ?Sized>(
        &self,
        tape: &'t Tape<T>,
        params: &Bound<'t, T>,
        batch: &Batch<T>,
        training: bool,
        rng: &mut R,
    ) -> Result<Forward<'t, T>> {
        self.check_batch(batch)?;
        let c = &self.config;
        let steps: Vec<_> = (0..batch.seq_len())
            .map(|s| tape.constant(batch.text_step(s)))
            .collect();
        let unimodal = Unimodal {
            t: self.text.forward(params, &steps, c.tdrp, training, rng)?,
            a: self.audio.forward(
                params,
                tape.constant(batch.acoustic.clone()),
                "audio encoder",
                c.adrp,
                training,
                rng,
            )?,
            v: self.video.forward(
                params,
                tape.constant(batch.visual.clone()),
                "video encoder",
                c.vdrp,
                training,
                rng,
            )?,
        };
        let tokens = self.imi.forward(params, &unimodal)?;
        let attention = self.ibi.forward(params, &tokens)?;
        let merged = residual_merge(tape, &attention.outputs, &tokens)?;
        let prediction = self
            .predictor
            .forward(params, merged, c.fdrp, training, rng)?;
        Ok(Forward {
            prediction,
            unimodal,
            tokens,
            attention,
            merged,
        })
    }

    /// Evaluation-mode prediction for one batch.
    pub fn predict(&self, batch: &Batch<T>) -> Result<Prediction<T>> {
        let tape = Tape::new();
        let params = self.store.bind(&tape);
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let fwd = self.forward(&tape, &params, batch, false, &mut rng)?;
        let outputs = (*fwd.prediction.value()).clone();
        if !outputs.all_finite() {
            return Err(Error::Numerical(
                "forward produced a non-finite prediction".into(),
            ));
        }
        Ok(Prediction {
            task: self.config.task,
            outputs,
            attention: AttentionRecord::from_output(&self.config.tokens, &fwd.attention),
        })
    }

    /// Evaluation-mode prediction for a whole split, `chunk` samples at a
    /// time. Rows do not interact, so the result does not depend on `chunk`.
    pub fn predict_features(
        &self,
        features: &DatasetFeatures,
        chunk: usize,
    ) -> Result<Prediction<T>> {
        let idx = features.all_indices();
        let mut outputs = Vec::new();
        let mut record: Option<AttentionRecord> = None;
        for part in idx.chunks(chunk.max(1)) {
            let p = self.predict(&features.batch(part))?;
            outputs.extend_from_slice(p.outputs.data());
            match &mut record {
                Some(r) => r.extend(p.attention),
                None => record = Some(p.attention),
            }
        }
        let cols = self.config.task.outputs();
        let record =
            record.ok_or_else(|| Error::Data("cannot predict on an empty split".into()))?;
        Ok(Prediction {
            task: self.config.task,
            outputs: Tensor::new(vec![features.len(), cols], outputs)?,
            attention: record,
        })
    }

    /// Writes the model file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        let json = serde_json::to_vec(&self.config).expect("config serializes");
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        buf.extend_from_slice(&(self.store.len() as u32).to_le_bytes());
        for (name, t) in self.store.iter() {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                v.write_le(&mut buf);
            }
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Reads a model file whose precision matches `T`.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader {
            bytes: &bytes,
            pos: 0,
            path,
        };
        let config = read_header(&mut r)?;
        if config.precision_name() != T::NAME {
            return Err(Error::config(
                "precision",
                format!(
                    "model file stores {}, requested {}",
                    config.precision_name(),
                    T::NAME
                ),
            ));
        }
        let mut model =
            Self::new(&config).map_err(|e| Error::format(path, format!("embedded config: {e}")))?;
        let count = r.u32()? as usize;
        if count != model.store.len() {
            return Err(r.corrupt(format!(
                "{count} tensors stored, architecture has {}",
                model.store.len()
            )));
        }
        for id in model.store.ids().collect::<Vec<_>>() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| r.corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            if name != model.store.name(id) {
                return Err(r.corrupt(format!(
                    "expected tensor `{}`, found `{name}`",
                    model.store.name(id)
                )));
            }
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if shape != model.store.get(id).shape() {
                return Err(r.corrupt(format!("tensor `{name}` has shape {shape:?}")));
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n * T::BYTES)?;
            let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
            *model.store.get_mut(id) = Tensor::new(shape, data)?;
        }
        if r.pos != bytes.len() {
            return Err(r.corrupt("trailing bytes after the last tensor".into()));
        }
        Ok(model)
    }

    /// Loads a model and checks that its architecture matches `expected`.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Self> {
        let model = Self::load(path)?;
        check_architecture(&model.config, expected)?;
        Ok(model)
    }
}

const MODEL_MAGIC: &[u8; 4] = b"BMHM";
const MODEL_VERSION: u32 = 1;

impl ModelConfig {
    fn precision_name(&self) -> &'static str {
        match self.precision {
            crate::config::Precision::F32 => "f32",
            crate::config::Precision::F64 => "f64",
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, detail: String) -> Error {
        Error::format(self.path, format!("corrupt model file: {detail}"))
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .bytes
            .get(self.pos..self.pos.saturating_add(n))
            .ok_or_else(|| self.corrupt(format!("truncated at byte {}", self.pos)))?;
        self.pos += n;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_header(r: &mut Reader<'_>) -> Result<ModelConfig> {
    if r.take(4)? != MODEL_MAGIC {
        return Err(r.corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::format(
            r.path,
            format!("unsupported model version {version} (expected {MODEL_VERSION})"),
        ));
    }
    let len = r.u64()? as usize;
    let json = r.take(len)?;
    serde_json::from_slice(json).map_err(|e| r.corrupt(format!("embedded config: {e}")))
}

/// Reads only the embedded config of a model file.
pub fn peek_config(path: &Path) -> Result<ModelConfig> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_header(&mut Reader {
        bytes: &bytes,
        pos: 0,
        path,
    })
}

/// Fails with the first architectural field on which two configs differ.
pub fn check_architecture(found: &ModelConfig, expected: &ModelConfig) -> Result<()> {
    let fields: [(&str, String, String); 12] = [
        ("d_t", found.d_t.to_string(), expected.d_t.to_string()),
        ("d_a", found.d_a.to_string(), expected.d_a.to_string()),
        ("d_v", found.d_v.to_string(), expected.d_v.to_string()),
        ("thid", found.thid.to_string(), expected.thid.to_string()),
        ("ahid", found.ahid.to_string(), expected.ahid.to_string()),
        ("vhid", found.vhid.to_string(), expected.vhid.to_string()),
        ("tout", found.tout.to_string(), expected.tout.to_string()),
        ("fdim", found.fdim.to_string(), expected.fdim.to_string()),
        ("heads", found.heads.to_string(), expected.heads.to_string()),
        (
            "tokens",
            format!("{:?}", found.tokens),
            format!("{:?}", expected.tokens),
        ),
        (
            "task",
            format!("{:?}", found.task),
            format!("{:?}", expected.task),
        ),
        (
            "shared_activation",
            format!("{:?}", found.shared_activation),
            format!("{:?}", expected.shared_activation),
        ),
    ];
    for (key, f, e) in fields {
        if f != e {
            return Err(Error::config(
                key,
                format!("model file has {f}, expected {e}"),
            ));
        }
    }
    Ok(())
}
