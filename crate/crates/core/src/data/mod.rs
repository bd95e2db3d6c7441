//! Feature ingestion: length normalization, frame averaging, batching,
//! the on-disk dataset format and the synthetic generator.

mod format;
mod jsonl;
mod synth;

pub use format::{load_split, save_split, Dataset, DatasetManifest, SplitPaths};
pub use jsonl::{read_jsonl, RawUtterance};
pub use synth::{gen_samples, gen_synthetic, split_6_2_2, SynthMode, SynthSpec};

use crate::config::Task;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// One utterance before length normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceSample {
    pub id: String,
    /// Token embeddings `[len × d_t]`, `len ≥ 1`.
    pub text_seq: Tensor<f32>,
    pub acoustic: Vec<f32>,
    pub visual: Vec<f32>,
    pub label_reg: f32,
    pub label_cls: Option<u32>,
}

impl UtteranceSample {
    pub fn text_len(&self) -> usize {
        self.text_seq.shape()[0]
    }
}

/// Target sequence length: `round(mean + lambda * std)` over the given
/// lengths, with the population standard deviation, rounded half up and
/// clamped to at least 1.
pub fn compute_target_length(lengths: &[usize], lambda: f64) -> Result<usize> {
    if lengths.is_empty() {
        return Err(Error::Data(
            "cannot compute a target length from no sequences".into(),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Data(format!(
            "length multiplier {lambda} must be finite and >= 0"
        )));
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
    let var = lengths
        .iter()
        .map(|&l| (l as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let target = (mean + lambda * var.sqrt() + 0.5).floor();
    Ok((target as usize).max(1))
}

/// Zero-pads at the end or keeps the first `target` rows.
pub fn pad_truncate<T: Scalar>(seq: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    if target < 1 {
        return Err(Error::Data("target length must be at least 1".into()));
    }
    if seq.rank() != 2 || seq.shape()[0] == 0 {
        return Err(Error::Data(format!(
            "sequence must be a non-empty [len × d] matrix, got {:?}",
            seq.shape()
        )));
    }
    let (len, d) = (seq.shape()[0], seq.shape()[1]);
    let keep = len.min(target);
    let mut data = Vec::with_capacity(target * d);
    data.extend_from_slice(&seq.data()[..keep * d]);
    data.resize(target * d, T::zero());
    Ok(Tensor::new(vec![target, d], data)?)
}

/// Mean over the frame axis of a `[k × d]` matrix.
pub fn average_frames<T: Scalar>(frames: &Tensor<T>) -> Result<Tensor<T>> {
    if frames.rank() != 2 || frames.shape()[0] == 0 {
        return Err(Error::Data(format!(
            "frame averaging needs at least one frame, got shape {:?}",
            frames.shape()
        )));
    }
    let (k, d) = (frames.shape()[0], frames.shape()[1]);
    let mut sum = vec![T::zero(); d];
    for row in frames.data().chunks(d) {
        for (s, &v) in sum.iter_mut().zip(row) {
            *s = *s + v;
        }
    }
    let kk = T::from_usize(k).unwrap();
    Ok(Tensor::vector(sum.into_iter().map(|s| s / kk).collect()))
}

/// Length-normalized features of one split. Samples are identified by
/// their position in the split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFeatures {
    pub seq_len: usize,
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    /// `[N × L × d_t]`
    pub text: Vec<f32>,
    /// `[N × d_a]`
    pub acoustic: Vec<f32>,
    /// `[N × d_v]`
    pub visual: Vec<f32>,
    pub label_reg: Vec<f32>,
    pub label_cls: Vec<Option<u32>>,
}

impl DatasetFeatures {
    /// Pads/truncates every sample to `seq_len` and stacks them.
    pub fn from_samples(
        samples: &[UtteranceSample],
        seq_len: usize,
        dims: (usize, usize, usize),
    ) -> Result<Self> {
        let (d_t, d_a, d_v) = dims;
        let n = samples.len();
        let mut out = Self {
            seq_len,
            d_t,
            d_a,
            d_v,
            text: Vec::with_capacity(n * seq_len * d_t),
            acoustic: Vec::with_capacity(n * d_a),
            visual: Vec::with_capacity(n * d_v),
            label_reg: Vec::with_capacity(n),
            label_cls: Vec::with_capacity(n),
        };
        for s in samples {
            let field_err = |field: &str, want: usize, got: usize| {
                Error::dim(
                    "data",
                    format!("sample `{}`: {field} is {got}, expected {want}", s.id),
                )
            };
            if s.text_seq.rank() != 2 || s.text_seq.shape()[1] != d_t {
                return Err(field_err(
                    "d_t",
                    d_t,
                    *s.text_seq.shape().last().unwrap_or(&0),
                ));
            }
            if s.acoustic.len() != d_a {
                return Err(field_err("d_a", d_a, s.acoustic.len()));
            }
            if s.visual.len() != d_v {
                return Err(field_err("d_v", d_v, s.visual.len()));
            }
            out.text
                .extend(pad_truncate(&s.text_seq, seq_len)?.into_data());
            out.acoustic.extend_from_slice(&s.acoustic);
            out.visual.extend_from_slice(&s.visual);
            out.label_reg.push(s.label_reg);
            out.label_cls.push(s.label_cls);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.label_reg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label_reg.is_empty()
    }

    /// Text block `[L × d_t]` of sample `i`.
    pub fn text_of(&self, i: usize) -> &[f32] {
        let block = self.seq_len * self.d_t;
        &self.text[i * block..(i + 1) * block]
    }

    pub fn acoustic_of(&self, i: usize) -> &[f32] {
        &self.acoustic[i * self.d_a..(i + 1) * self.d_a]
    }

    pub fn visual_of(&self, i: usize) -> &[f32] {
        &self.visual[i * self.d_v..(i + 1) * self.d_v]
    }

    /// Copies the given samples, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self {
            seq_len: self.seq_len,
            d_t: self.d_t,
            d_a: self.d_a,
            d_v: self.d_v,
            text: Vec::new(),
            acoustic: Vec::new(),
            visual: Vec::new(),
            label_reg: Vec::new(),
            label_cls: Vec::new(),
        };
        for &i in indices {
            out.text.extend_from_slice(self.text_of(i));
            out.acoustic.extend_from_slice(self.acoustic_of(i));
            out.visual.extend_from_slice(self.visual_of(i));
            out.label_reg.push(self.label_reg[i]);
            out.label_cls.push(self.label_cls[i]);
        }
        out
    }

    /// Gathers the given samples into model-ready tensors.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Batch<T> {
        let b = indices.len();
        let conv =
            |v: &[f32]| -> Vec<T> { v.iter().map(|&x| T::from_f64_lossy(x as f64)).collect() };
        let mut text = Vec::with_capacity(b * self.seq_len * self.d_t);
        let mut acoustic = Vec::with_capacity(b * self.d_a);
        let mut visual = Vec::with_capacity(b * self.d_v);
        for &i in indices {
            text.extend(conv(self.text_of(i)));
            acoustic.extend(conv(self.acoustic_of(i)));
            visual.extend(conv(self.visual_of(i)));
        }
        Batch {
            text: Tensor::new(vec![b, self.seq_len, self.d_t], text).expect("sized"),
            acoustic: Tensor::new(vec![b, self.d_a], acoustic).expect("sized"),
            visual: Tensor::new(vec![b, self.d_v], visual).expect("sized"),
            label_reg: indices.iter().map(|&i| self.label_reg[i] as f64).collect(),
            label_cls: indices.iter().map(|&i| self.label_cls[i]).collect(),
        }
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    /// Checks labels against a declared range and task.
    pub fn check_labels(&self, lo: f64, hi: f64, task: Task) -> Result<()> {
        for i in 0..self.len() {
            let y = self.label_reg[i] as f64;
            if !(lo..=hi).contains(&y) {
                return Err(Error::Data(format!(
                    "sample {i}: label {y} outside declared range [{lo}, {hi}]"
                )));
            }
            if task == Task::BinaryClassification && !matches!(self.label_cls[i], Some(0 | 1)) {
                return Err(Error::Data(format!(
                    "sample {i}: binary task needs a class label 0 or 1"
                )));
            }
        }
        Ok(())
    }
}

/// Model input for a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    /// `[B × L × d_t]`
    pub text: Tensor<T>,
    /// `[B × d_a]`
    pub acoustic: Tensor<T>,
    /// `[B × d_v]`
    pub visual: Tensor<T>,
    pub label_reg: Vec<f64>,
    pub label_cls: Vec<Option<u32>>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.label_reg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label_reg.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.text.shape()[1]
    }

    /// Time step `s` of every sequence, `[B × d_t]`.
    pub fn text_step(&self, s: usize) -> Tensor<T> {
        let (b, l, d) = (
            self.text.shape()[0],
            self.text.shape()[1],
            self.text.shape()[2],
        );
        let mut data = Vec::with_capacity(b * d);
        for r in 0..b {
            let off = (r * l + s) * d;
            data.extend_from_slice(&self.text.data()[off..off + d]);
        }
        Tensor::new(vec![b, d], data).expect("sized")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn target_length_examples() {
        assert_eq!(compute_target_length(&[5, 5, 5], 3.0).unwrap(), 5);
        // mean 4, population std sqrt(8/3) = 1.63299; 4 + 3 * 1.63299 = 8.899
        assert_eq!(compute_target_length(&[2, 4, 6], 3.0).unwrap(), 9);
        assert_eq!(compute_target_length(&[1, 3], 0.0).unwrap(), 2);
        assert!(compute_target_length(&[], 1.0).is_err());
        // half rounds up: mean 2.5
        assert_eq!(compute_target_length(&[2, 3], 0.0).unwrap(), 3);
    }

    fn seq(len: usize, d: usize) -> Tensor<f32> {
        Tensor::new(vec![len, d], (0..len * d).map(|v| v as f32 + 1.0).collect()).unwrap()
    }

    #[test]
    fn padding_appends_zero_rows() {
        let p = pad_truncate(&seq(3, 2), 5).unwrap();
        assert_eq!(p.shape(), &[5, 2]);
        assert_eq!(&p.data()[..6], seq(3, 2).data());
        assert!(p.data()[6..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncation_keeps_first_rows() {
        let s = seq(7, 2);
        let p = pad_truncate(&s, 5).unwrap();
        assert_eq!(p.data(), &s.data()[..10]);
        assert_eq!(pad_truncate(&seq(5, 2), 5).unwrap(), seq(5, 2));
        assert!(pad_truncate(&seq(5, 2), 0).is_err());
    }

    #[test]
    fn frame_average() {
        let one = Tensor::<f64>::from_f64(&[1, 3], &[1., 2., 3.]).unwrap();
        assert_eq!(average_frames(&one).unwrap().data(), &[1., 2., 3.]);
        let two = Tensor::<f64>::from_f64(&[2, 2], &[1., 2., 3., 4.]).unwrap();
        assert_eq!(average_frames(&two).unwrap().data(), &[2., 3.]);
        assert!(average_frames(&Tensor::<f64>::zeros(&[0, 3])).is_err());
    }

    #[test]
    fn frame_average_matches_loop_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<f64> = (0..60).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let frames = Tensor::<f64>::from_f64(&[10, 6], &vals).unwrap();
        let got = average_frames(&frames).unwrap();
        for j in 0..6 {
            let mut s = 0.0;
            for i in 0..10 {
                s += vals[i * 6 + j];
            }
            assert!((got.data()[j] - s / 10.0).abs() < 1e-14);
        }
    }

    #[test]
    fn from_samples_rejects_wrong_dims() {
        let s = UtteranceSample {
            id: "u1".into(),
            text_seq: seq(2, 3),
            acoustic: vec![0.0; 32],
            visual: vec![0.0; 4],
            label_reg: 0.0,
            label_cls: None,
        };
        let err = DatasetFeatures::from_samples(&[s], 4, (3, 33, 4)).unwrap_err();
        assert!(err.to_string().contains("d_a"), "{err}");
    }

    #[test]
    fn batch_text_step_picks_rows() {
        let s = |id: &str, base: f32| UtteranceSample {
            id: id.into(),
            text_seq: Tensor::new(vec![2, 2], vec![base, base + 1., base + 2., base + 3.]).unwrap(),
            acoustic: vec![base],
            visual: vec![base],
            label_reg: 0.0,
            label_cls: None,
        };
        let f = DatasetFeatures::from_samples(&[s("a", 0.), s("b", 10.)], 2, (2, 1, 1)).unwrap();
        let b = f.batch::<f64>(&[1, 0]);
        assert_eq!(b.text_step(1).data(), &[12., 13., 2., 3.]);
        assert_eq!(b.acoustic.data(), &[10., 0.]);
    }

    proptest! {
        #[test]
        fn target_length_monotone_in_lambda(
            lengths in proptest::collection::vec(1usize..50, 1..20),
            l1 in 0.0f64..5.0,
            dl in 0.0f64..5.0,
        ) {
            let a = compute_target_length(&lengths, l1).unwrap();
            let b = compute_target_length(&lengths, l1 + dl).unwrap();
            prop_assert!(a <= b);
            prop_assert!(a >= 1);
        }

        #[test]
        fn pad_truncate_preserves_retained_rows(len in 1usize..12, d in 1usize..4, target in 1usize..12) {
            let s = seq(len, d);
            let p = pad_truncate(&s, target).unwrap();
            prop_assert_eq!(p.shape(), &[target, d][..]);
            let keep = len.min(target) * d;
            prop_assert_eq!(&p.data()[..keep], &s.data()[..keep]);
            prop_assert!(p.data()[keep..].iter().all(|&v| v == 0.0));
        }
    }
}
