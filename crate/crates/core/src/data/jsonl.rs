//! JSON-lines ingestion of precomputed per-utterance features.
//!
//! Each line is one object:
//!
//! ```json
//! {"id": "v1_3", "text": [[...], ...], "acoustic": [...],
//!  "visual_frames": [[...], ...], "label": -0.4, "label_cls": 0}
//! ```
//!
//! `acoustic`/`visual` give a per-utterance vector directly; the
//! `*_frames` variants give frame-level features that are averaged.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{average_frames, UtteranceSample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawUtterance {
    pub id: String,
    pub text: Vec<Vec<f32>>,
    #[serde(default)]
    pub acoustic: Option<Vec<f32>>,
    #[serde(default)]
    pub acoustic_frames: Option<Vec<Vec<f32>>>,
    #[serde(default)]
    pub visual: Option<Vec<f32>>,
    #[serde(default)]
    pub visual_frames: Option<Vec<Vec<f32>>>,
    pub label: f32,
    #[serde(default)]
    pub label_cls: Option<u32>,
}

fn utterance_vector(
    id: &str,
    what: &str,
    vec: Option<Vec<f32>>,
    frames: Option<Vec<Vec<f32>>>,
) -> Result<Vec<f32>> {
    match (vec, frames) {
        (Some(v), None) => Ok(v),
        (None, Some(rows)) => {
            let t = Tensor::from_rows(&rows)
                .map_err(|e| Error::Data(format!("utterance `{id}` {what} frames: {e}")))?;
            Ok(average_frames(&t)?.into_data())
        }
        _ => Err(Error::Data(format!(
            "utterance `{id}` needs exactly one of `{what}` or `{what}_frames`"
        ))),
    }
}

impl RawUtterance {
    pub fn into_sample(self) -> Result<UtteranceSample> {
        if self.text.is_empty() {
            return Err(Error::Data(format!(
                "utterance `{}` has an empty token sequence",
                self.id
            )));
        }
        let text_seq = Tensor::from_rows(&self.text)
            .map_err(|e| Error::Data(format!("utterance `{}` text: {e}", self.id)))?;
        let acoustic = utterance_vector(&self.id, "acoustic", self.acoustic, self.acoustic_frames)?;
        let visual = utterance_vector(&self.id, "visual", self.visual, self.visual_frames)?;
        Ok(UtteranceSample {
            id: self.id,
            text_seq,
            acoustic,
            visual,
            label_reg: self.label,
            label_cls: self.label_cls,
        })
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<UtteranceSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let raw: RawUtterance = serde_json::from_str(line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            raw.into_sample()
        })
        .collect()
}
