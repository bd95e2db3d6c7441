//! Dataset manifest (JSON) and split files (little-endian binary).
//!
//! Split file layout:
//!
//! ```text
//! "BMHD" | u32 version = 1 | u64 N | u32 L | u32 d_t | u32 d_a | u32 d_v
//! per sample: f32 label_reg | i32 label_cls (-1 if absent)
//!             | L*d_t f32 text | d_a f32 acoustic | d_v f32 visual
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{compute_target_length, split_6_2_2, DatasetFeatures, UtteranceSample};
use crate::config::Task;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BMHD";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 * 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    pub label_lo: f64,
    pub label_hi: f64,
    pub task: Task,
    /// Length multiplier used to pick the padded sequence length.
    pub lambda: f64,
    /// Split files, relative to the manifest's directory unless absolute.
    pub splits: SplitPaths,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if !(self.label_lo < self.label_hi) {
            return Err(Error::Data(format!(
                "manifest `{}`: label_lo {} must be below label_hi {}",
                self.name, self.label_lo, self.label_hi
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Data(format!(
                "manifest `{}`: lambda must be >= 0",
                self.name
            )));
        }
        if self.d_t == 0 || self.d_a == 0 || self.d_v == 0 {
            return Err(Error::Data(format!(
                "manifest `{}`: feature dims must be positive",
                self.name
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::format(path, format!("invalid manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

pub fn save_split(path: &Path, f: &DatasetFeatures) -> Result<()> {
    let per_sample = 8 + 4 * (f.seq_len * f.d_t + f.d_a + f.d_v);
    let mut buf = Vec::with_capacity(HEADER_LEN + f.len() * per_sample);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(f.len() as u64).to_le_bytes());
    for v in [f.seq_len, f.d_t, f.d_a, f.d_v] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for i in 0..f.len() {
        buf.extend_from_slice(&f.label_reg[i].to_le_bytes());
        let cls = f.label_cls[i].map_or(-1i32, |c| c as i32);
        buf.extend_from_slice(&cls.to_le_bytes());
        for v in f
            .text_of(i)
            .iter()
            .chain(f.acoustic_of(i))
            .chain(f.visual_of(i))
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let out = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn i32(&mut self) -> Option<i32> {
        self.take(4)
            .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize, out: &mut Vec<f32>) -> Option<()> {
        let raw = self.take(n * 4)?;
        out.extend(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
        );
        Some(())
    }
}

/// Reads a split file. When `expect` is given, the stored feature dims must
/// match the manifest's.
pub fn load_split(path: &Path, expect: Option<&DatasetManifest>) -> Result<DatasetFeatures> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    let corrupt = |what: &str| Error::format(path, format!("corrupt header: {what}"));
    if bytes.len() < HEADER_LEN {
        return Err(corrupt("file shorter than the header"));
    }
    if cur.take(4) != Some(MAGIC.as_slice()) {
        return Err(corrupt("bad magic"));
    }
    let version = cur.u32().unwrap();
    if version != VERSION {
        return Err(Error::format(
            path,
            format!("unsupported split version {version} (expected {VERSION})"),
        ));
    }
    let n = cur.u64().unwrap() as usize;
    let [l, d_t, d_a, d_v] = [0; 4].map(|_| cur.u32().unwrap() as usize);
    if let Some(m) = expect {
        for (field, want, got) in [
            ("d_t", m.d_t, d_t),
            ("d_a", m.d_a, d_a),
            ("d_v", m.d_v, d_v),
        ] {
            if want != got {
                return Err(Error::dim(
                    "load_split",
                    format!(
                        "{}: manifest declares {field}={want} but file stores {got}",
                        path.display()
                    ),
                ));
            }
        }
    }
    let per_sample = 8 + 4 * (l * d_t + d_a + d_v);
    let expected_len = n
        .checked_mul(per_sample)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| corrupt("sample count overflows"))?;
    if bytes.len() != expected_len {
        return Err(corrupt(&format!(
            "header promises {n} samples ({expected_len} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    let mut f = DatasetFeatures {
        seq_len: l,
        d_t,
        d_a,
        d_v,
        text: Vec::with_capacity(n * l * d_t),
        acoustic: Vec::with_capacity(n * d_a),
        visual: Vec::with_capacity(n * d_v),
        label_reg: Vec::with_capacity(n),
        label_cls: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let mut label = Vec::with_capacity(1);
        cur.f32s(1, &mut label)
            .ok_or_else(|| corrupt("truncated sample"))?;
        let c = cur.i32().ok_or_else(|| corrupt("truncated sample"))?;
        f.label_reg.push(label[0]);
        f.label_cls.push(u32::try_from(c).ok());
        cur.f32s(l * d_t, &mut f.text)
            .ok_or_else(|| corrupt("truncated sample"))?;
        cur.f32s(d_a, &mut f.acoustic)
            .ok_or_else(|| corrupt("truncated sample"))?;
        cur.f32s(d_v, &mut f.visual)
            .ok_or_else(|| corrupt("truncated sample"))?;
    }
    Ok(f)
}

/// A manifest with its three loaded splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub train: DatasetFeatures,
    pub valid: DatasetFeatures,
    pub test: DatasetFeatures,
}

impl Dataset {
    /// Loads and validates a manifest and all of its splits.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let load = |p: &Path| -> Result<DatasetFeatures> {
            let full = base.join(p);
            let f = load_split(&full, Some(&manifest))?;
            f.check_labels(manifest.label_lo, manifest.label_hi, manifest.task)?;
            Ok(f)
        };
        let train = load(&manifest.splits.train)?;
        let valid = load(&manifest.splits.valid)?;
        let test = load(&manifest.splits.test)?;
        if train.is_empty() || valid.is_empty() || test.is_empty() {
            return Err(Error::Data(format!(
                "dataset `{}` has an empty split",
                manifest.name
            )));
        }
        Ok(Self {
            manifest,
            train,
            valid,
            test,
        })
    }

    /// Splits samples 6:2:2 in their given order and pads or truncates
    /// every split to the length computed from the training split. All
    /// samples must share the feature dims of the first one.
    pub fn from_samples(
        name: &str,
        samples: &[UtteranceSample],
        task: Task,
        labels: (f64, f64),
        lambda: f64,
    ) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Data("no samples".into()))?;
        let (n_train, n_valid, n_test) = split_6_2_2(samples.len());
        if n_train == 0 || n_valid == 0 || n_test == 0 {
            return Err(Error::Data(format!(
                "{} samples are too few for a 6:2:2 split with non-empty parts",
                samples.len()
            )));
        }
        let dims = (
            *first.text_seq.shape().last().unwrap_or(&0),
            first.acoustic.len(),
            first.visual.len(),
        );
        let (train, rest) = samples.split_at(n_train);
        let (valid, test) = rest.split_at(n_valid);
        let lengths: Vec<usize> = train.iter().map(UtteranceSample::text_len).collect();
        let seq_len = compute_target_length(&lengths, lambda)?;
        let manifest = DatasetManifest {
            name: name.to_string(),
            d_t: dims.0,
            d_a: dims.1,
            d_v: dims.2,
            label_lo: labels.0,
            label_hi: labels.1,
            task,
            lambda,
            splits: SplitPaths {
                train: "train.bmhd".into(),
                valid: "valid.bmhd".into(),
                test: "test.bmhd".into(),
            },
        };
        manifest.validate()?;
        let ds = Self {
            train: DatasetFeatures::from_samples(train, seq_len, dims)?,
            valid: DatasetFeatures::from_samples(valid, seq_len, dims)?,
            test: DatasetFeatures::from_samples(test, seq_len, dims)?,
            manifest,
        };
        for split in [&ds.train, &ds.valid, &ds.test] {
            split.check_labels(labels.0, labels.1, task)?;
        }
        Ok(ds)
    }

    /// Writes `manifest.json` and the three split files into `dir`.
    /// Returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_split(&dir.join(&self.manifest.splits.train), &self.train)?;
        save_split(&dir.join(&self.manifest.splits.valid), &self.valid)?;
        save_split(&dir.join(&self.manifest.splits.test), &self.test)?;
        let path = dir.join("manifest.json");
        self.manifest.save(&path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(n: usize) -> DatasetFeatures {
        let (l, d_t, d_a, d_v) = (3, 2, 4, 5);
        let val = |i: usize| ((i * 7919) % 101) as f32 / 17.0 - 3.0;
        DatasetFeatures {
            seq_len: l,
            d_t,
            d_a,
            d_v,
            text: (0..n * l * d_t).map(val).collect(),
            acoustic: (0..n * d_a).map(|i| val(i + 3)).collect(),
            visual: (0..n * d_v).map(|i| val(i + 5)).collect(),
            label_reg: (0..n).map(|i| (i as f32 / n as f32) - 0.5).collect(),
            label_cls: (0..n)
                .map(|i| if i % 3 == 0 { None } else { Some(i as u32 % 2) })
                .collect(),
        }
    }

    fn manifest(d_a: usize) -> DatasetManifest {
        DatasetManifest {
            name: "t".into(),
            d_t: 2,
            d_a,
            d_v: 5,
            label_lo: -1.0,
            label_hi: 1.0,
            task: Task::Regression,
            lambda: 3.0,
            splits: SplitPaths {
                train: "train.bmhd".into(),
                valid: "valid.bmhd".into(),
                test: "test.bmhd".into(),
            },
        }
    }

    #[test]
    fn split_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bmhd");
        let f = features(6);
        save_split(&p, &f).unwrap();
        assert_eq!(load_split(&p, Some(&manifest(4))).unwrap(), f);
    }

    #[test]
    fn dim_mismatch_names_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bmhd");
        save_split(&p, &features(2)).unwrap();
        let err = load_split(&p, Some(&manifest(33))).unwrap_err();
        assert!(matches!(err, Error::Dim { .. }));
        assert!(err.to_string().contains("d_a=33"), "{err}");
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bmhd");
        save_split(&p, &features(4)).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_split(&p, None).unwrap_err();
        assert!(err.to_string().contains("corrupt header"), "{err}");
        fs::write(&p, &bytes[..10]).unwrap();
        assert!(matches!(load_split(&p, None), Err(Error::Format { .. })));
    }

    #[test]
    fn wrong_version_and_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bmhd");
        save_split(&p, &features(1)).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes[4] = 2;
        fs::write(&p, &bytes).unwrap();
        assert!(load_split(&p, None)
            .unwrap_err()
            .to_string()
            .contains("version"));
        bytes[0] = b'X';
        fs::write(&p, &bytes).unwrap();
        assert!(load_split(&p, None)
            .unwrap_err()
            .to_string()
            .contains("magic"));
    }

    #[test]
    fn dataset_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset {
            manifest: manifest(4),
            train: features(5),
            valid: features(2),
            test: features(3),
        };
        let path = ds.save(dir.path()).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), ds);
        fs::remove_file(dir.path().join("valid.bmhd")).unwrap();
        let err = Dataset::load(&path).unwrap_err();
        assert!(err.to_string().contains("valid.bmhd"), "{err}");
    }

    #[test]
    fn labels_outside_range_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut train = features(3);
        train.label_reg[1] = 1.5;
        let ds = Dataset {
            manifest: manifest(4),
            train,
            valid: features(2),
            test: features(2),
        };
        let path = ds.save(dir.path()).unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Data(_))));
    }
}
