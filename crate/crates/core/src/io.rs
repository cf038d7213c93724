//! On-disk formats.
//!
//! # Dataset directory
//!
//! * `data.csv`: header `label,domain_id,p_0,...,p_{L-1}`, then one sample per
//!   row, PRI values in microseconds with 6 significant digits (`0` is padding).
//! * `meta.json`: [`DatasetMeta`] (scenario, seed, sequence length, roster).
//!
//! # Checkpoint file
//!
//! All integers little-endian.
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `PRIDGCK\0`                         |
//! | 8      | 4    | format version (`u32`, currently 1)       |
//! | 12     | 4    | manifest length `n` in bytes (`u32`)      |
//! | 16     | n    | manifest, UTF-8 JSON ([`CheckpointManifest`]) |
//! | 16 + n | ...  | tensors in manifest order, row-major `f32`|
//!
//! The manifest lists every layer (section + kind) and every tensor (name +
//! shape), so a reader in any language can walk the buffer without the
//! original training config.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DgModel, ModelConfig};
use crate::nn::{LayerKind, Module, Sequential};
use crate::sim::{Dataset, PriSequence, Roster, ScenarioParams};

pub const DATA_FILE: &str = "data.csv";
pub const META_FILE: &str = "meta.json";
pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Sidecar describing a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub scenario: ScenarioParams,
    pub seed: u64,
    pub seq_len: usize,
    pub n_samples: usize,
    pub roster_version: String,
    pub roster: Roster,
}

/// `v` with 6 significant digits, no exponent.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let rounded: f64 = format!("{v:.decimals$}").parse().unwrap_or(v);
    // rounding can carry into a new digit (999999.5 -> 1000000)
    let magnitude = rounded.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(DATA_FILE))?;
    let mut header = vec!["label".to_string(), "domain_id".to_string()];
    header.extend((0..ds.seq_len).map(|i| format!("p_{i}")));
    w.write_record(&header)?;
    for s in &ds.samples {
        let mut row = vec![s.label.to_string(), s.domain_id.to_string()];
        row.extend(s.pris.iter().map(|&p| format_sig6(p)));
        w.write_record(&row)?;
    }
    w.flush()?;
    let meta = DatasetMeta {
        format_version: DATASET_FORMAT_VERSION,
        scenario: ds.scenario,
        seed: ds.seed,
        seq_len: ds.seq_len,
        n_samples: ds.len(),
        roster_version: ds.roster.version.clone(),
        roster: ds.roster.clone(),
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported dataset format version {}",
            meta.format_version
        )));
    }
    meta.roster.validate()?;
    let mut r = csv::Reader::from_path(dir.join(DATA_FILE))?;
    let mut samples = Vec::with_capacity(meta.n_samples);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Parse(format!("{DATA_FILE} row {}: {what}", line + 1));
        if rec.len() != meta.seq_len + 2 {
            return Err(bad(&format!("expected {} fields, got {}", meta.seq_len + 2, rec.len())));
        }
        let label = rec[0].parse().map_err(|_| bad("label"))?;
        let domain_id = rec[1].parse().map_err(|_| bad("domain_id"))?;
        let pris = rec
            .iter()
            .skip(2)
            .map(|f| f.parse::<f64>().map_err(|_| bad("PRI value")))
            .collect::<Result<Vec<_>>>()?;
        samples.push(PriSequence::new(pris, label, domain_id));
    }
    if samples.len() != meta.n_samples {
        return Err(Error::Parse(format!(
            "{DATA_FILE} has {} rows, meta says {}",
            samples.len(),
            meta.n_samples
        )));
    }
    let ds = Dataset {
        samples,
        scenario: meta.scenario,
        seed: meta.seed,
        seq_len: meta.seq_len,
        roster: meta.roster,
    };
    ds.validate()?;
    Ok(ds)
}

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"PRIDGCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    /// `features`, `label_head` or `domain_head`.
    pub section: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Training context stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub alpha: f64,
    pub beta: f64,
    pub k_generators: usize,
    pub epoch: usize,
    pub seed: u64,
    /// Seed of the training dataset.
    #[serde(default)]
    pub data_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub model: ModelConfig,
    pub training: TrainingInfo,
    pub layers: Vec<LayerEntry>,
    pub tensors: Vec<TensorEntry>,
}

fn sections(model: &DgModel<f32>) -> [(&'static str, &Sequential<f32>); 3] {
    [
        ("features", &model.features),
        ("label_head", &model.label_head),
        ("domain_head", &model.domain_head),
    ]
}

pub fn manifest_for(model: &DgModel<f32>, training: TrainingInfo) -> CheckpointManifest {
    let mut layers = Vec::new();
    let mut tensors = Vec::new();
    for (section, seq) in sections(model) {
        for (i, layer) in seq.layers.iter().enumerate() {
            layers.push(LayerEntry {
                section: section.into(),
                kind: layer.kind(),
            });
            for (p, name) in layer.params().iter().zip(["weight", "bias"]) {
                tensors.push(TensorEntry {
                    name: format!("{section}.{i}.{name}"),
                    shape: p.shape().to_vec(),
                });
            }
        }
    }
    CheckpointManifest {
        model: model.config.clone(),
        training,
        layers,
        tensors,
    }
}

pub fn checkpoint_bytes(model: &DgModel<f32>, training: TrainingInfo) -> Result<Vec<u8>> {
    let manifest = serde_json::to_vec(&manifest_for(model, training))?;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest);
    for p in model.params() {
        for v in &p.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_checkpoint(path: impl AsRef<Path>, model: &DgModel<f32>, training: TrainingInfo) -> Result<()> {
    let bytes = checkpoint_bytes(model, training)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<(DgModel<f32>, CheckpointManifest)> {
    let bad = |m: String| Error::Checkpoint(m);
    if bytes.len() < 16 || bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + n)
        .ok_or_else(|| bad("truncated manifest".into()))?;
    let manifest: CheckpointManifest = serde_json::from_slice(body)?;
    let mut model = DgModel::<f32>::new(manifest.model.clone(), 0)?;
    let expected = manifest_for(&model, manifest.training.clone());
    if expected.layers != manifest.layers || expected.tensors != manifest.tensors {
        return Err(bad("layer manifest does not match the model configuration".into()));
    }
    let mut at = 16 + n;
    for p in model.params_mut() {
        let len = p.len() * 4;
        let chunk = bytes
            .get(at..at + len)
            .ok_or_else(|| bad("truncated weight buffer".into()))?;
        for (v, b) in p.data.iter_mut().zip(chunk.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap());
        }
        at += len;
    }
    if at != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - at)));
    }
    Ok((model, manifest))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(DgModel<f32>, CheckpointManifest)> {
    parse_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::make_dataset;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(1000.0), "1000");
        assert_eq!(format_sig6(1234.56789), "1234.57");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(999.9996), "1000");
        assert_eq!(format_sig6(12345678.0), "12345678");
        assert_eq!(format_sig6(0.00123456789), "0.00123457");
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = make_dataset(&Roster::default_roster(), ScenarioParams::P3, 3, 16, 4).unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.scenario, ds.scenario);
        assert_eq!(back.roster, ds.roster);
        for (a, b) in ds.samples.iter().zip(&back.samples) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.pris.iter().zip(&b.pris) {
                assert!((x - y).abs() <= 5e-6 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
        let header = fs::read_to_string(dir.path().join(DATA_FILE)).unwrap();
        assert!(header.starts_with("label,domain_id,p_0,p_1,"));
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let cfg = ModelConfig {
            seq_len: 64,
            channels: [2, 3, 3, 2],
            kernel: 3,
            hidden: [6, 5],
            ..ModelConfig::default()
        };
        let model = DgModel::<f32>::new(cfg, 3).unwrap();
        let info = TrainingInfo {
            alpha: 1.0,
            beta: 0.1,
            k_generators: 3,
            epoch: 2,
            seed: 9,
            data_seed: Some(4),
        };
        let bytes = checkpoint_bytes(&model, info.clone()).unwrap();
        let (back, manifest) = parse_checkpoint(&bytes).unwrap();
        assert_eq!(manifest.training, info);
        for (a, b) in model.params().iter().zip(back.params()) {
            assert_eq!(a.data, b.data);
        }
        assert!(parse_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(parse_checkpoint(&bad).is_err());
        let mut bad = bytes;
        bad[8] = 7;
        assert!(parse_checkpoint(&bad).is_err());
    }
}
