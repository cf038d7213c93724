//! Training loop and few-shot fine-tuning.
//!
//! Each epoch re-samples the generator bank, rebuilds the augmented set, and
//! walks a seeded permutation of the source set. A minibatch holds `b/2`
//! source sequences followed by their `b/2` augmented counterparts from one
//! generator (round-robin over steps). With no generators the batch is `b`
//! source sequences and training is plain cross-entropy.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{build_augmented_set, AugmentedSet, GeneratorBank, GeneratorRanges};
use crate::error::{invalid, Error, Result};
use crate::io::{write_checkpoint, TrainingInfo};
use crate::model::{compute_loss, DgModel, ModelConfig};
use crate::nn::{Sgd, Tensor};
use crate::seed::{derive_seed, rng, stream};
use crate::sim::{Dataset, PriSequence, Roster};

/// Layer widths of the network; the rest of [`ModelConfig`] comes from the
/// roster and the training config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub channels: [usize; 4],
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
    pub hidden: [usize; 2],
}

impl Default for ArchConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            channels: m.channels,
            kernel: m.kernel,
            stride: m.stride,
            pool: m.pool,
            hidden: m.hidden,
        }
    }
}

/// Learning-rate shape over all training steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from `lr` down to 0.
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Even; half source, half augmented when generators are active.
    pub batch_size: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub momentum: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Fraction of all steps over which beta ramps linearly from 0.
    pub beta_warmup_frac: f64,
    /// Same for alpha.
    pub alpha_warmup_frac: f64,
    pub k_generators: usize,
    pub seq_len: usize,
    pub seed: u64,
    /// Two domain classes (source / synthetic) instead of `K + 1`.
    pub binary_domain: bool,
    pub ranges: GeneratorRanges,
    pub arch: ArchConfig,
    pub fewshot_epochs: usize,
    pub fewshot_lr_factor: f64,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            lr: 0.03,
            lr_schedule: LrSchedule::Cosine,
            momentum: 0.9,
            alpha: 0.01,
            beta: 0.01,
            beta_warmup_frac: 0.2,
            alpha_warmup_frac: 0.2,
            k_generators: 3,
            seq_len: 128,
            seed: 0,
            binary_domain: false,
            ranges: GeneratorRanges::default(),
            arch: ArchConfig::default(),
            fewshot_epochs: 3,
            fewshot_lr_factor: 0.1,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    /// The plain-classifier configuration: no alignment, no reversal, no generators.
    pub fn erm(mut self) -> Self {
        self.alpha = 0.0;
        self.beta = 0.0;
        self.k_generators = 0;
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = toml::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be >= 1"));
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(invalid(format!("batch_size must be even and >= 2, got {}", self.batch_size)));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must be in [0, 1)"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(invalid("alpha and beta must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.beta_warmup_frac) || !(0.0..=1.0).contains(&self.alpha_warmup_frac) {
            return Err(invalid("warm-up fractions must be in [0, 1]"));
        }
        if !(self.fewshot_lr_factor > 0.0) {
            return Err(invalid("fewshot_lr_factor must be > 0"));
        }
        if self.k_generators > 0 {
            self.ranges.validate()?;
        }
        Ok(())
    }

    pub fn n_domains(&self) -> usize {
        if self.binary_domain {
            2
        } else {
            self.k_generators + 1
        }
    }

    pub fn model_config(&self, roster: &Roster) -> ModelConfig {
        ModelConfig {
            seq_len: self.seq_len,
            channels: self.arch.channels,
            kernel: self.arch.kernel,
            stride: self.arch.stride,
            pool: self.arch.pool,
            hidden: self.arch.hidden,
            n_classes: roster.len(),
            n_domains: self.n_domains(),
            scale: roster.scale(),
        }
    }

    /// Reversal strength at global step `step` of `total`.
    pub fn beta_at(&self, step: usize, total: usize) -> f64 {
        ramp(self.beta, self.beta_warmup_frac, step, total)
    }

    /// Learning rate at global step `step` of `total`.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Cosine => 0.5 * self.lr * (1.0 + (std::f64::consts::PI * step as f64 / total.max(1) as f64).cos()),
        }
    }

    /// Alignment weight at global step `step` of `total`.
    pub fn alpha_at(&self, step: usize, total: usize) -> f64 {
        ramp(self.alpha, self.alpha_warmup_frac, step, total)
    }

    fn domain_label(&self, generator_id: usize) -> usize {
        if self.binary_domain {
            generator_id.min(1)
        } else {
            generator_id
        }
    }
}

fn ramp(value: f64, frac: f64, step: usize, total: usize) -> f64 {
    let warm = frac * total as f64;
    if warm <= 0.0 {
        value
    } else {
        value * (step as f64 / warm).min(1.0)
    }
}

/// One minibatch, ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Tensor<f32>,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
    /// `(source row, augmented row)`.
    pub pairs: Vec<(usize, usize)>,
    /// Source-set index of every source row.
    pub source_index: Vec<usize>,
}

/// Seeded permutation of `0..n` for one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(derive_seed(seed, stream::SHUFFLE, epoch as u64)));
    order
}

/// Source rows drawn per step.
pub fn source_per_step(batch_size: usize, augmented: bool) -> usize {
    if augmented {
        batch_size / 2
    } else {
        batch_size
    }
}

pub fn steps_per_epoch(n_source: usize, batch_size: usize, augmented: bool) -> usize {
    n_source.div_ceil(source_per_step(batch_size, augmented))
}

/// Minibatch `step` of `epoch`. The last batch of an epoch may be short.
pub fn make_minibatch(
    s: &Dataset,
    s_plus: Option<&AugmentedSet>,
    b: usize,
    seed: u64,
    epoch: usize,
    step: usize,
) -> Result<Batch> {
    make_minibatch_with(s, s_plus, b, seed, epoch, step, s.roster.scale(), |id| id)
}

#[allow(clippy::too_many_arguments)]
fn make_minibatch_with(
    s: &Dataset,
    s_plus: Option<&AugmentedSet>,
    b: usize,
    seed: u64,
    epoch: usize,
    step: usize,
    scale: f64,
    domain_label: impl Fn(usize) -> usize,
) -> Result<Batch> {
    let per_step = source_per_step(b, s_plus.is_some());
    if per_step == 0 || per_step > s.len() {
        return Err(invalid(format!(
            "batch needs {per_step} source samples per step but the source set has {}",
            s.len()
        )));
    }
    if let Some(aug) = s_plus {
        if aug.n_source != s.len() || aug.n_generators() == 0 {
            return Err(invalid("augmented set is not paired with this source set"));
        }
    }
    let order = epoch_order(s.len(), seed, epoch);
    let start = step * per_step;
    if start >= s.len() {
        return Err(invalid(format!("step {step} is past the end of the epoch")));
    }
    let source_index: Vec<usize> = order[start..(start + per_step).min(s.len())].to_vec();
    let mut rows: Vec<&PriSequence> = source_index.iter().map(|&i| &s.samples[i]).collect();
    let mut domains = vec![0; rows.len()];
    let mut pairs = Vec::new();
    if let Some(aug) = s_plus {
        let slot = step % aug.n_generators();
        let half = rows.len();
        for (k, &i) in source_index.iter().enumerate() {
            let j = aug.pair_of(slot, i);
            debug_assert_eq!(aug.source_index[j], i);
            rows.push(&aug.data.samples[j]);
            domains.push(domain_label(aug.generator_ids[slot]));
            pairs.push((k, half + k));
        }
    }
    let labels = rows.iter().map(|r| r.label).collect();
    let x = crate::model::encode_batch(&rows, s.seq_len, scale)?;
    Ok(Batch {
        x,
        labels,
        domains,
        pairs,
        source_index,
    })
}

/// Per-epoch averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub label_ce: f64,
    pub align: f64,
    pub domain_ce: f64,
    pub total: f64,
    /// Alignment weight at the end of the epoch.
    pub alpha: f64,
    /// Reversal strength at the end of the epoch.
    pub beta: f64,
    pub train_acc: f64,
    pub domain_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
}

impl TrainStats {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

/// Fresh model sized for `roster` and `cfg`.
pub fn init_model(roster: &Roster, cfg: &TrainConfig) -> Result<DgModel<f32>> {
    DgModel::new(cfg.model_config(roster), cfg.seed)
}

fn accuracy(pred: &[usize], truth: &[usize]) -> (usize, usize) {
    (pred.iter().zip(truth).filter(|(a, b)| a == b).count(), truth.len())
}

/// Trains `model` on `s` (plus per-epoch augmented sets when
/// `cfg.k_generators > 0`).
pub fn train(model: &mut DgModel<f32>, s: &Dataset, cfg: &TrainConfig) -> Result<TrainStats> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(Error::Empty("source dataset"));
    }
    s.validate()?;
    if s.seq_len != model.config.seq_len {
        return Err(invalid(format!(
            "dataset seq_len {} != model seq_len {}",
            s.seq_len, model.config.seq_len
        )));
    }
    if model.config.n_domains != cfg.n_domains() {
        return Err(invalid(format!(
            "model has {} domain classes, config implies {}",
            model.config.n_domains,
            cfg.n_domains()
        )));
    }
    let augmented = cfg.k_generators > 0;
    let steps = steps_per_epoch(s.len(), cfg.batch_size, augmented);
    let total_steps = steps * cfg.epochs;
    let mut opt = Sgd::<f32>::new(cfg.lr, cfg.momentum)?;
    let mut stats = TrainStats::default();
    if let Some(dir) = &cfg.checkpoint_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("train_config.toml"), cfg.to_toml()?)?;
        let _ = fs::remove_file(dir.join("train.log"));
    }

    for epoch in 0..cfg.epochs {
        let (bank, s_plus) = if augmented {
            let bank = GeneratorBank::sample(
                &cfg.ranges,
                cfg.k_generators,
                derive_seed(cfg.seed, stream::BANK, epoch as u64),
            )?;
            let s_plus = build_augmented_set(s, &bank, derive_seed(cfg.seed, stream::AUGMENT, epoch as u64))?;
            (Some(bank), Some(s_plus))
        } else {
            (None, None)
        };
        let mut sums = [0.0f64; 4];
        let (mut correct, mut seen, mut d_correct, mut d_seen) = (0, 0, 0, 0);
        let (mut alpha_eff, mut beta_eff) = (0.0, 0.0);
        for step in 0..steps {
            let batch = make_minibatch_with(
                s,
                s_plus.as_ref(),
                cfg.batch_size,
                cfg.seed,
                epoch,
                step,
                model.config.scale,
                |id| cfg.domain_label(id),
            )?;
            beta_eff = cfg.beta_at(epoch * steps + step, total_steps);
            alpha_eff = cfg.alpha_at(epoch * steps + step, total_steps);
            opt.set_lr(cfg.lr_at(epoch * steps + step, total_steps));
            model.zero_grad();
            let out = model.forward(&batch.x, beta_eff)?;
            let (terms, grads) = compute_loss(&out, &batch.pairs, &batch.labels, &batch.domains, alpha_eff, beta_eff)?;
            if !terms.is_finite() {
                let err = Error::NonFiniteLoss {
                    epoch,
                    step,
                    terms: format!("{terms:?}"),
                };
                if let Some(dir) = &cfg.checkpoint_dir {
                    let _ = fs::write(dir.join("failure.txt"), err.to_string());
                }
                return Err(err);
            }
            model.backward(&grads)?;
            opt.step(&mut model.params_mut())?;

            for (acc, v) in sums.iter_mut().zip([terms.label_ce, terms.align, terms.domain_ce, terms.total]) {
                *acc += v;
            }
            let (c, n) = accuracy(&out.y_hat.argmax_rows(), &batch.labels);
            correct += c;
            seen += n;
            let (c, n) = accuracy(&out.z_hat.argmax_rows(), &batch.domains);
            d_correct += c;
            d_seen += n;
        }
        let n = steps as f64;
        let rec = EpochStats {
            epoch,
            label_ce: sums[0] / n,
            align: sums[1] / n,
            domain_ce: sums[2] / n,
            total: sums[3] / n,
            alpha: alpha_eff,
            beta: beta_eff,
            train_acc: correct as f64 / seen as f64,
            domain_acc: d_correct as f64 / d_seen as f64,
        };
        if let Some(dir) = &cfg.checkpoint_dir {
            write_checkpoint(dir.join("model.ckpt"), model, training_info(cfg, epoch, Some(s.seed)))?;
            if let Some(bank) = &bank {
                bank.save(dir.join("bank.json"))?;
            }
            let mut log = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join("train.log"))?;
            writeln!(log, "{}", serde_json::to_string(&rec)?)?;
        }
        stats.epochs.push(rec);
    }
    Ok(stats)
}

pub fn training_info(cfg: &TrainConfig, epoch: usize, data_seed: Option<u64>) -> TrainingInfo {
    TrainingInfo {
        alpha: cfg.alpha,
        beta: cfg.beta,
        k_generators: cfg.k_generators,
        epoch,
        seed: cfg.seed,
        data_seed,
    }
}

/// Indices of `n` samples per class from `target`, chosen by a seeded shuffle.
pub fn fewshot_select(target: &Dataset, n: usize, seed: u64) -> Result<Vec<usize>> {
    let order = epoch_order(target.len(), derive_seed(seed, stream::FEWSHOT, 0), 0);
    let mut taken = vec![0; target.roster.len()];
    let mut chosen = Vec::with_capacity(n * taken.len());
    for i in order {
        let y = target.samples[i].label;
        if taken[y] < n {
            taken[y] += 1;
            chosen.push(i);
        }
    }
    if let Some(c) = taken.iter().position(|&t| t < n) {
        return Err(invalid(format!(
            "target set has only {} samples of class {c}, {n} requested",
            taken[c]
        )));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Continues training with `n` labeled target samples per class.
///
/// With a source set, every step pairs `b/2` source rows with `b/2` target
/// rows (the target pool is cycled) and an epoch is one pass over the source
/// set. Without one, a step is `b` target rows and an epoch is one pass over
/// the pool. Runs `fewshot_epochs` epochs at `lr * fewshot_lr_factor` on the
/// label loss only. `n == 0` returns the model unchanged.
pub fn fewshot_finetune(
    model: &DgModel<f32>,
    source: Option<&Dataset>,
    target: &Dataset,
    n: usize,
    cfg: &TrainConfig,
) -> Result<DgModel<f32>> {
    cfg.validate()?;
    let mut tuned = model.clone();
    if n == 0 {
        return Ok(tuned);
    }
    let pool = fewshot_select(target, n, cfg.seed)?;
    let (per_step, steps) = match source {
        Some(src) => {
            let half = cfg.batch_size / 2;
            if half > src.len() {
                return Err(invalid("batch larger than the source set"));
            }
            (half, src.len().div_ceil(half))
        }
        None => (0, pool.len().div_ceil(cfg.batch_size)),
    };
    let target_per_step = cfg.batch_size - per_step;
    let mut opt = Sgd::<f32>::new(cfg.lr * cfg.fewshot_lr_factor, cfg.momentum)?;
    let seed = derive_seed(cfg.seed, stream::FEWSHOT, n as u64);
    let mut cursor = 0;
    let mut target_order = Vec::new();
    for epoch in 0..cfg.fewshot_epochs {
        let mut rows: Vec<&PriSequence> = Vec::with_capacity(cfg.batch_size);
        let order = source.map(|src| epoch_order(src.len(), seed, epoch));
        for step in 0..steps {
            rows.clear();
            if let (Some(src), Some(order)) = (source, &order) {
                let idx = &order[step * per_step..((step + 1) * per_step).min(src.len())];
                rows.extend(idx.iter().map(|&i| &src.samples[i]));
            }
            for _ in 0..target_per_step {
                if cursor == target_order.len() {
                    target_order = pool.clone();
                    target_order.shuffle(&mut rng(derive_seed(seed, stream::SHUFFLE, (epoch * steps + step) as u64)));
                    cursor = 0;
                }
                rows.push(&target.samples[target_order[cursor]]);
                cursor += 1;
            }
            let labels: Vec<usize> = rows.iter().map(|r| r.label).collect();
            let domains = vec![0; rows.len()];
            let x = tuned.encode(&rows)?;
            tuned.zero_grad();
            let out = tuned.forward(&x, 0.0)?;
            let (terms, grads) = compute_loss(&out, &[], &labels, &domains, 0.0, 0.0)?;
            if !terms.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    terms: format!("{terms:?}"),
                });
            }
            tuned.backward(&grads)?;
            opt.step(&mut tuned.params_mut())?;
        }
    }
    Ok(tuned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{cross_entropy_labels, Module};
    use crate::sim::{make_dataset, ScenarioParams};

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 8,
            seq_len: 64,
            arch: ArchConfig {
                channels: [2, 4, 4, 4],
                kernel: 3,
                hidden: [8, 8],
                ..ArchConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    fn tiny_data() -> Dataset {
        make_dataset(&Roster::default_roster(), ScenarioParams::P_TRAIN, 3, 64, 1).unwrap()
    }

    #[test]
    fn batch_pairs_and_domains() {
        let s = tiny_data();
        let bank = GeneratorBank::sample(&GeneratorRanges::default(), 3, 0).unwrap();
        let aug = build_augmented_set(&s, &bank, 0).unwrap();
        let b = make_minibatch(&s, Some(&aug), 8, 5, 0, 1).unwrap();
        assert_eq!(b.labels.len(), 8);
        assert_eq!(b.pairs, vec![(0, 4), (1, 5), (2, 6), (3, 7)]);
        assert_eq!(&b.domains[..4], &[0, 0, 0, 0]);
        assert!(b.domains[4..].iter().all(|&d| d == 2));
        for &(i, j) in &b.pairs {
            assert_eq!(b.labels[i], b.labels[j]);
        }
        assert_eq!(b, make_minibatch(&s, Some(&aug), 8, 5, 0, 1).unwrap());
        assert!(make_minibatch(&s, Some(&aug), 62, 5, 0, 0).is_err());
    }

    #[test]
    fn an_epoch_covers_every_source_sample_once() {
        let s = tiny_data();
        let steps = steps_per_epoch(s.len(), 8, true);
        let bank = GeneratorBank::sample(&GeneratorRanges::default(), 3, 0).unwrap();
        let aug = build_augmented_set(&s, &bank, 0).unwrap();
        let mut seen: Vec<usize> = (0..steps)
            .flat_map(|k| make_minibatch(&s, Some(&aug), 8, 3, 2, k).unwrap().source_index)
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..s.len()).collect::<Vec<_>>());
    }

    #[test]
    fn beta_warmup_is_linear() {
        let cfg = TrainConfig {
            beta: 0.1,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.beta_at(0, 100), 0.0);
        assert!((cfg.beta_at(10, 100) - 0.05).abs() < 1e-12);
        assert_eq!(cfg.beta_at(50, 100), 0.1);
    }

    #[test]
    fn zero_lr_leaves_weights_unchanged() {
        let s = tiny_data();
        let cfg = TrainConfig {
            epochs: 1,
            lr: 0.0,
            ..tiny_cfg()
        };
        let mut m = init_model(&s.roster, &cfg).unwrap();
        let before = m.clone();
        train(&mut m, &s, &cfg).unwrap();
        for (a, b) in before.params().iter().zip(m.params()) {
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn training_is_deterministic_and_logs_consistent_totals() {
        let s = tiny_data();
        let cfg = tiny_cfg();
        let mut a = init_model(&s.roster, &cfg).unwrap();
        let mut b = init_model(&s.roster, &cfg).unwrap();
        let sa = train(&mut a, &s, &cfg).unwrap();
        let sb = train(&mut b, &s, &cfg).unwrap();
        assert_eq!(sa, sb);
        for (x, y) in a.params().iter().zip(b.params()) {
            assert_eq!(x.data, y.data);
        }
        for e in &sa.epochs {
            assert!((0.0..=1.0).contains(&e.train_acc));
            assert!((0.0..=1.0).contains(&e.domain_acc));
        }
    }

    #[test]
    fn erm_config_matches_plain_cross_entropy_training() {
        let s = tiny_data();
        let cfg = tiny_cfg().erm();
        let mut dg = init_model(&s.roster, &cfg).unwrap();
        let mut plain = dg.clone();
        train(&mut dg, &s, &cfg).unwrap();

        let mut opt = Sgd::<f32>::new(cfg.lr, cfg.momentum).unwrap();
        let steps = steps_per_epoch(s.len(), cfg.batch_size, false);
        for epoch in 0..cfg.epochs {
            for step in 0..steps {
                let b = make_minibatch(&s, None, cfg.batch_size, cfg.seed, epoch, step).unwrap();
                opt.set_lr(cfg.lr_at(epoch * steps + step, cfg.epochs * steps));
                for p in plain.features.params_mut().into_iter().chain(plain.label_head.params_mut()) {
                    p.zero_grad();
                }
                let h = plain.features.forward(&b.x).unwrap();
                let shape = h.shape().to_vec();
                let h = h.reshape(vec![shape[0], shape[1] * shape[2]]).unwrap();
                let logits = plain.label_head.forward(&h).unwrap();
                let (_, g) = cross_entropy_labels(&logits, &b.labels).unwrap();
                let dh = plain.label_head.backward(&g).unwrap().reshape(shape).unwrap();
                plain.features.backward(&dh).unwrap();
                let mut params: Vec<_> = plain.features.params_mut();
                params.extend(plain.label_head.params_mut());
                opt.step(&mut params).unwrap();
            }
        }
        let dg_params: Vec<_> = dg.features.params().into_iter().chain(dg.label_head.params()).collect();
        let plain_params: Vec<_> = plain.features.params().into_iter().chain(plain.label_head.params()).collect();
        for (a, b) in dg_params.iter().zip(plain_params) {
            let bits_a: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn checkpoints_and_log_written() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny_data();
        let cfg = TrainConfig {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..tiny_cfg()
        };
        let mut m = init_model(&s.roster, &cfg).unwrap();
        train(&mut m, &s, &cfg).unwrap();
        let log = fs::read_to_string(dir.path().join("train.log")).unwrap();
        assert_eq!(log.lines().count(), 2);
        let (back, manifest) = crate::io::read_checkpoint(dir.path().join("model.ckpt")).unwrap();
        assert_eq!(manifest.training.epoch, 1);
        assert_eq!(back.params()[0].data, m.params()[0].data);
        assert!(GeneratorBank::load(dir.path().join("bank.json")).is_ok());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let s = tiny_data();
        let cfg = tiny_cfg();
        let mut m = init_model(&s.roster, &cfg).unwrap();
        m.label_head.params_mut().last_mut().unwrap().data[0] = f32::NAN;
        assert!(matches!(train(&mut m, &s, &cfg), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn fewshot_zero_is_identity_and_selection_is_balanced() {
        let s = tiny_data();
        let target = make_dataset(&s.roster, ScenarioParams::P4, 4, 64, 9).unwrap();
        let cfg = tiny_cfg();
        let m = init_model(&s.roster, &cfg).unwrap();
        let same = fewshot_finetune(&m, Some(&s), &target, 0, &cfg).unwrap();
        for (a, b) in m.params().iter().zip(same.params()) {
            assert_eq!(a.data, b.data);
        }
        let pick = fewshot_select(&target, 2, 0).unwrap();
        assert_eq!(pick.len(), 20);
        let mut counts = vec![0; 10];
        pick.iter().for_each(|&i| counts[target.samples[i].label] += 1);
        assert_eq!(counts, vec![2; 10]);
        assert!(fewshot_select(&target, 5, 0).is_err());
        let a = fewshot_finetune(&m, Some(&s), &target, 2, &cfg).unwrap();
        let b = fewshot_finetune(&m, Some(&s), &target, 2, &cfg).unwrap();
        assert_eq!(a.params()[0].data, b.params()[0].data);
        assert_ne!(a.params()[0].data, m.params()[0].data);
        let c = fewshot_finetune(&m, None, &target, 2, &cfg).unwrap();
        assert_ne!(c.params()[0].data, a.params()[0].data);
    }

    #[test]
    fn config_validation_and_toml() {
        assert!(TrainConfig { batch_size: 7, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        let cfg = tiny_cfg();
        let back: TrainConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let partial: TrainConfig = toml::from_str("epochs = 5\nalpha = 0.5").unwrap();
        assert_eq!(partial.epochs, 5);
        assert_eq!(partial.batch_size, 64);
    }
}
