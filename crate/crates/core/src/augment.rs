//! Noise generators: label-preserving PRI augmentations that move a sequence
//! from its recorded environment into a simulated one.
//!
//! Only three sub-operations exist. Each acts on the pulse stream, never on
//! PRI values as such, so the emitter's PRI parameters survive:
//!
//! * `DropPulses` removes a pulse, fusing its two neighbouring intervals.
//! * `AddPulses` inserts spurious pulses, splitting one interval into parts.
//! * `GaussianNoise` applies relative measurement error.
//!
//! Fused and split spans conserve elapsed time exactly (left-to-right sum).

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, rng, stream};
use crate::sim::{insert_points, multiplicative_noise, Dataset, PriSequence};

/// Kind of a sub-operation, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubOpKind {
    DropPulses,
    AddPulses,
    GaussianNoise,
}

impl SubOpKind {
    pub const ALL: [SubOpKind; 3] = [
        SubOpKind::DropPulses,
        SubOpKind::AddPulses,
        SubOpKind::GaussianNoise,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SubOp {
    /// Each interior pulse is removed with probability `prob`.
    DropPulses { prob: f64 },
    /// `Poisson(rate)` spurious pulses per interval.
    AddPulses { rate: f64 },
    /// Relative Gaussian error with standard deviation `sigma`.
    GaussianNoise { sigma: f64 },
}

impl SubOp {
    pub fn kind(&self) -> SubOpKind {
        match self {
            SubOp::DropPulses { .. } => SubOpKind::DropPulses,
            SubOp::AddPulses { .. } => SubOpKind::AddPulses,
            SubOp::GaussianNoise { .. } => SubOpKind::GaussianNoise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SubOp::DropPulses { prob } if !(0.0..1.0).contains(&prob) => {
                Err(invalid(format!("drop prob must be in [0, 1), got {prob}")))
            }
            SubOp::AddPulses { rate } if !(rate >= 0.0 && rate.is_finite()) => {
                Err(invalid(format!("add rate must be >= 0, got {rate}")))
            }
            SubOp::GaussianNoise { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(invalid(format!("noise sigma must be >= 0, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    fn apply<R: Rng>(&self, pris: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        Ok(match *self {
            SubOp::DropPulses { prob } => fuse_intervals(pris, prob, rng),
            SubOp::AddPulses { rate } => split_intervals(pris, rate, rng)?,
            SubOp::GaussianNoise { sigma } => {
                if sigma == 0.0 {
                    pris.to_vec()
                } else {
                    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
                    pris.iter()
                        .map(|&p| multiplicative_noise(p, &normal, rng))
                        .collect()
                }
            }
        })
    }
}

/// Removes each pulse between two intervals with probability `prob`; the two
/// intervals fuse into their sum.
pub fn fuse_intervals<R: Rng>(pris: &[f64], prob: f64, rng: &mut R) -> Vec<f64> {
    let Some((&first, rest)) = pris.split_first() else {
        return Vec::new();
    };
    if prob == 0.0 {
        return pris.to_vec();
    }
    let mut out = Vec::with_capacity(pris.len());
    let mut acc = first;
    for &p in rest {
        if rng.random::<f64>() < prob {
            acc += p;
        } else {
            out.push(acc);
            acc = p;
        }
    }
    out.push(acc);
    out
}

/// Inserts `Poisson(rate)` pulses uniformly inside every interval. The parts
/// of a split interval sum (left to right) to exactly the original value.
pub fn split_intervals<R: Rng>(pris: &[f64], rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    if rate == 0.0 {
        return Ok(pris.to_vec());
    }
    let poisson = Poisson::new(rate).map_err(|e| invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(pris.len() * 2);
    let mut cuts = Vec::new();
    for &p in pris {
        let k = poisson.sample(rng) as usize;
        if k == 0 {
            out.push(p);
            continue;
        }
        loop {
            insert_points(0.0, p, k, rng, &mut cuts);
            if let Some(parts) = exact_parts(p, &cuts) {
                out.extend(parts);
                break;
            }
        }
    }
    Ok(out)
}

/// Parts between consecutive cuts, or `None` if rounding breaks exact
/// conservation (the caller redraws).
fn exact_parts(total: f64, cuts: &[f64]) -> Option<Vec<f64>> {
    let mut parts = Vec::with_capacity(cuts.len() + 1);
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &c in cuts {
        let part = c - prev;
        if part <= 0.0 {
            return None;
        }
        parts.push(part);
        acc += part;
        prev = c;
    }
    let last = total - acc;
    if last <= 0.0 || acc + last != total {
        return None;
    }
    parts.push(last);
    Some(parts)
}

/// A fixed configuration of sub-operations tagged with a domain id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGenerator {
    pub id: usize,
    pub ops: Vec<SubOp>,
    pub seed: u64,
}

impl NoiseGenerator {
    pub fn new(id: usize, ops: Vec<SubOp>, seed: u64) -> Result<Self> {
        let g = Self { id, ops, seed };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ops.is_empty() {
            return Err(invalid(format!("generator {} has no sub-operations", self.id)));
        }
        self.ops.iter().try_for_each(SubOp::validate)
    }
}

/// Inclusive `[lo, hi]` sampling ranges; `None` disables the sub-operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRanges {
    pub drop_prob: Option<[f64; 2]>,
    pub add_rate: Option<[f64; 2]>,
    pub noise_sigma: Option<[f64; 2]>,
}

impl Default for GeneratorRanges {
    fn default() -> Self {
        Self {
            drop_prob: Some([0.05, 0.5]),
            add_rate: Some([0.1, 0.8]),
            noise_sigma: Some([0.01, 0.1]),
        }
    }
}

impl GeneratorRanges {
    fn range(&self, kind: SubOpKind) -> Option<[f64; 2]> {
        match kind {
            SubOpKind::DropPulses => self.drop_prob,
            SubOpKind::AddPulses => self.add_rate,
            SubOpKind::GaussianNoise => self.noise_sigma,
        }
    }

    pub fn enabled(&self) -> Vec<SubOpKind> {
        SubOpKind::ALL
            .into_iter()
            .filter(|&k| self.range(k).is_some())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled().is_empty() {
            return Err(Error::Empty("generator range config"));
        }
        for kind in self.enabled() {
            let [lo, hi] = self.range(kind).unwrap();
            if !(lo <= hi) {
                return Err(invalid(format!("{kind:?} range [{lo}, {hi}] is inverted")));
            }
            let probe = |v| make_op(kind, v).validate();
            probe(lo)?;
            probe(hi)?;
        }
        Ok(())
    }
}

fn make_op(kind: SubOpKind, v: f64) -> SubOp {
    match kind {
        SubOpKind::DropPulses => SubOp::DropPulses { prob: v },
        SubOpKind::AddPulses => SubOp::AddPulses { rate: v },
        SubOpKind::GaussianNoise => SubOp::GaussianNoise { sigma: v },
    }
}

/// Random non-empty subset of the enabled sub-operations, parameters uniform
/// in their ranges.
pub fn sample_generator(ranges: &GeneratorRanges, id: usize, seed: u64) -> Result<NoiseGenerator> {
    sample_generator_with_focus(ranges, id, None, seed)
}

/// Like [`sample_generator`], but `focus` (when enabled) is always included.
pub fn sample_generator_with_focus(
    ranges: &GeneratorRanges,
    id: usize,
    focus: Option<SubOpKind>,
    seed: u64,
) -> Result<NoiseGenerator> {
    ranges.validate()?;
    let mut rng = rng(seed);
    let enabled = ranges.enabled();
    let mut chosen: Vec<SubOpKind> = enabled
        .iter()
        .copied()
        .filter(|&k| Some(k) == focus || rng.random_bool(0.5))
        .collect();
    if chosen.is_empty() {
        chosen.push(enabled[rng.random_range(0..enabled.len())]);
    }
    let ops = chosen
        .into_iter()
        .map(|kind| {
            let [lo, hi] = ranges.range(kind).unwrap();
            let v = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            make_op(kind, v)
        })
        .collect();
    NoiseGenerator::new(id, ops, derive_seed(seed, stream::AUGMENT, id as u64))
}

/// Applies `g` to `x`: label kept, domain set to `g.id`, length unchanged.
///
/// A result shorter than the input's signal is continued cyclically from its
/// own start up to the input's signal length, so drops never introduce
/// padding that the input did not have; a longer one is truncated.
pub fn apply_generator(g: &NoiseGenerator, x: &PriSequence, seed: u64) -> Result<PriSequence> {
    g.validate()?;
    let mut rng = rng(derive_seed(g.seed, stream::AUGMENT, seed));
    let mut pris = x.signal().to_vec();
    for op in &g.ops {
        pris = op.apply(&pris, &mut rng)?;
    }
    let target = x.valid_len();
    if !pris.is_empty() {
        let mut i = 0;
        while pris.len() < target {
            pris.push(pris[i]);
            i += 1;
        }
    }
    pris.truncate(target);
    Ok(PriSequence::new(pris, x.label, g.id).fit_len(x.len()))
}

/// The set of generators active for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorBank {
    pub generators: Vec<NoiseGenerator>,
}

impl GeneratorBank {
    pub fn new(generators: Vec<NoiseGenerator>) -> Result<Self> {
        let bank = Self { generators };
        bank.validate()?;
        Ok(bank)
    }

    pub fn empty() -> Self {
        Self {
            generators: Vec::new(),
        }
    }

    /// Ids must be distinct and non-zero (0 is the source domain).
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for g in &self.generators {
            g.validate()?;
            if g.id == 0 {
                return Err(invalid("generator id 0 is reserved for the source domain"));
            }
            if !seen.insert(g.id) {
                return Err(invalid(format!("duplicate generator id {}", g.id)));
            }
        }
        Ok(())
    }

    /// `k` generators with ids `1..=k`; generator `i` always carries
    /// sub-operation family `i mod 3` (drops, additions, value noise).
    pub fn sample(ranges: &GeneratorRanges, k: usize, seed: u64) -> Result<Self> {
        let enabled = ranges.enabled();
        let generators = (0..k)
            .map(|i| {
                let focus = SubOpKind::ALL[i % 3];
                let focus = enabled.contains(&focus).then_some(focus);
                sample_generator_with_focus(
                    ranges,
                    i + 1,
                    focus,
                    derive_seed(seed, stream::BANK, i as u64),
                )
            })
            .collect::<Result<_>>()?;
        Self::new(generators)
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bank: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        bank.validate()?;
        Ok(bank)
    }
}

/// `S+`: every source sample passed through every generator.
///
/// Layout is generator-major: sample `slot * n_source + i` came from source
/// sample `i` through `bank.generators[slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSet {
    pub data: Dataset,
    pub source_index: Vec<usize>,
    pub n_source: usize,
    pub generator_ids: Vec<usize>,
}

impl AugmentedSet {
    /// Index in `data` of source sample `i` as augmented by generator `slot`.
    pub fn pair_of(&self, slot: usize, i: usize) -> usize {
        slot * self.n_source + i
    }

    pub fn n_generators(&self) -> usize {
        self.generator_ids.len()
    }
}

pub fn build_augmented_set(s: &Dataset, bank: &GeneratorBank, seed: u64) -> Result<AugmentedSet> {
    if s.is_empty() {
        return Err(Error::Empty("source dataset"));
    }
    if bank.is_empty() {
        return Err(Error::Empty("generator bank"));
    }
    bank.validate()?;
    let n = s.len();
    let mut samples = Vec::with_capacity(n * bank.len());
    let mut source_index = Vec::with_capacity(n * bank.len());
    for g in &bank.generators {
        let g_seed = derive_seed(seed, stream::AUGMENT, g.id as u64);
        for (i, x) in s.samples.iter().enumerate() {
            samples.push(apply_generator(g, x, derive_seed(g_seed, stream::SAMPLE, i as u64))?);
            source_index.push(i);
        }
    }
    Ok(AugmentedSet {
        data: Dataset {
            samples,
            scenario: s.scenario,
            seed,
            seq_len: s.seq_len,
            roster: s.roster.clone(),
        },
        source_index,
        n_source: n,
        generator_ids: bank.generators.iter().map(|g| g.id).collect(),
    })
}
