//! Pulse-train simulation.
//!
//! Clean time-of-arrival (TOA) streams are generated for six PRI modulation
//! laws and then corrupted the way a receiver in a contested environment sees
//! them: pulses go missing, spurious pulses appear, and every interval picks up
//! relative measurement error. The PRI sequence is the first-order difference
//! of the TOA stream.
//!
//! All generation functions are pure in `(inputs, seed)`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, rng, stream};

/// Pulse window used for missing-pulse bookkeeping on aperiodic laws.
pub const APERIODIC_WINDOW: usize = 16;

/// The six PRI modulation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModulationKind {
    Constant,
    Jittered,
    Sliding,
    Wobulated,
    Staggered,
    DwellSwitch,
}

impl ModulationKind {
    pub const ALL: [ModulationKind; 6] = [
        ModulationKind::Constant,
        ModulationKind::Jittered,
        ModulationKind::Sliding,
        ModulationKind::Wobulated,
        ModulationKind::DwellSwitch,
        ModulationKind::Staggered,
    ];

    /// Short column code used in reports.
    pub fn code(self) -> &'static str {
        match self {
            ModulationKind::Constant => "CST",
            ModulationKind::Jittered => "JIT",
            ModulationKind::Sliding => "SLD",
            ModulationKind::Wobulated => "WOB",
            ModulationKind::Staggered => "STG",
            ModulationKind::DwellSwitch => "D&S",
        }
    }
}

/// Modulation law plus its parameters. PRI values are microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Modulation {
    Constant { pri: f64 },
    /// `pri * (1 + u)`, `u ~ U(-jitter, +jitter)`.
    Jittered { pri: f64, jitter: f64 },
    /// Linear sweep from `start` to `end` over `steps` pulses, then reset.
    Sliding { start: f64, end: f64, steps: usize },
    /// `pri * (1 + amplitude * sin(2 pi k / period))`.
    Wobulated { pri: f64, amplitude: f64, period: usize },
    /// Cyclic repetition of `levels`.
    Staggered { levels: Vec<f64> },
    /// Hold `levels[i]` for `dwell[i]` pulses, then switch to the next level.
    DwellSwitch { levels: Vec<f64>, dwell: Vec<usize> },
}

impl Modulation {
    pub fn kind(&self) -> ModulationKind {
        match self {
            Modulation::Constant { .. } => ModulationKind::Constant,
            Modulation::Jittered { .. } => ModulationKind::Jittered,
            Modulation::Sliding { .. } => ModulationKind::Sliding,
            Modulation::Wobulated { .. } => ModulationKind::Wobulated,
            Modulation::Staggered { .. } => ModulationKind::Staggered,
            Modulation::DwellSwitch { .. } => ModulationKind::DwellSwitch,
        }
    }
}

/// One radar emitter of the roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    /// Class label.
    pub id: usize,
    pub name: String,
    pub modulation: Modulation,
}

impl EmitterSpec {
    pub fn new(id: usize, name: impl Into<String>, modulation: Modulation) -> Self {
        Self {
            id,
            name: name.into(),
            modulation,
        }
    }

    pub fn kind(&self) -> ModulationKind {
        self.modulation.kind()
    }

    fn reject(&self, reason: impl Into<String>) -> Error {
        Error::InvalidEmitter {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match &self.modulation {
            Modulation::Constant { pri } => {
                if !positive(*pri) {
                    return Err(self.reject(format!("pri must be > 0, got {pri}")));
                }
            }
            Modulation::Jittered { pri, jitter } => {
                if !positive(*pri) {
                    return Err(self.reject(format!("pri must be > 0, got {pri}")));
                }
                if !(0.0..1.0).contains(jitter) {
                    return Err(self.reject(format!("jitter must be in [0, 1), got {jitter}")));
                }
            }
            Modulation::Sliding { start, end, steps } => {
                if !positive(*start) || !positive(*end) {
                    return Err(self.reject("sliding bounds must be > 0"));
                }
                if *steps < 2 {
                    return Err(self.reject("sliding sweep needs at least 2 steps"));
                }
            }
            Modulation::Wobulated {
                pri,
                amplitude,
                period,
            } => {
                if !positive(*pri) {
                    return Err(self.reject(format!("pri must be > 0, got {pri}")));
                }
                if !(0.0..1.0).contains(amplitude) {
                    return Err(self.reject("wobble amplitude must be in [0, 1)"));
                }
                if *period == 0 {
                    return Err(self.reject("wobble period must be >= 1"));
                }
            }
            Modulation::Staggered { levels } => {
                if levels.is_empty() {
                    return Err(self.reject("stagger level list is empty"));
                }
                if levels.iter().any(|&v| !positive(v)) {
                    return Err(self.reject("stagger levels must be > 0"));
                }
            }
            Modulation::DwellSwitch { levels, dwell } => {
                if levels.is_empty() {
                    return Err(self.reject("dwell level list is empty"));
                }
                if levels.len() != dwell.len() {
                    return Err(self.reject("dwell levels and counts differ in length"));
                }
                if levels.iter().any(|&v| !positive(v)) {
                    return Err(self.reject("dwell levels must be > 0"));
                }
                if dwell.iter().any(|&d| d == 0) {
                    return Err(self.reject("dwell counts must be >= 1"));
                }
            }
        }
        Ok(())
    }

    /// Nominal PRI of the emitter.
    pub fn base_pri(&self) -> f64 {
        match &self.modulation {
            Modulation::Constant { pri }
            | Modulation::Jittered { pri, .. }
            | Modulation::Wobulated { pri, .. } => *pri,
            Modulation::Sliding { start, .. } => *start,
            Modulation::Staggered { levels } | Modulation::DwellSwitch { levels, .. } => levels[0],
        }
    }

    /// Average PRI over one modulation cycle.
    pub fn mean_pri(&self) -> f64 {
        match &self.modulation {
            Modulation::Constant { pri }
            | Modulation::Jittered { pri, .. }
            | Modulation::Wobulated { pri, .. } => *pri,
            Modulation::Sliding { start, end, .. } => 0.5 * (start + end),
            Modulation::Staggered { levels } | Modulation::DwellSwitch { levels, .. } => {
                levels.iter().sum::<f64>() / levels.len() as f64
            }
        }
    }

    /// Largest PRI the law can emit.
    pub fn max_pri(&self) -> f64 {
        match &self.modulation {
            Modulation::Constant { pri } => *pri,
            Modulation::Jittered { pri, jitter } => pri * (1.0 + jitter),
            Modulation::Wobulated { pri, amplitude, .. } => pri * (1.0 + amplitude),
            Modulation::Sliding { start, end, .. } => start.max(*end),
            Modulation::Staggered { levels } | Modulation::DwellSwitch { levels, .. } => {
                levels.iter().copied().fold(f64::MIN, f64::max)
            }
        }
    }

    /// Pulses per modulation cycle; the "period" of missing-pulse bookkeeping.
    pub fn cycle_len(&self) -> usize {
        match &self.modulation {
            Modulation::Constant { .. } | Modulation::Jittered { .. } => APERIODIC_WINDOW,
            Modulation::Sliding { steps, .. } => *steps,
            Modulation::Wobulated { period, .. } => *period,
            Modulation::Staggered { levels } => levels.len(),
            Modulation::DwellSwitch { dwell, .. } => dwell.iter().sum(),
        }
    }

    /// PRI of the `k`-th interval of the clean train.
    fn pri_at<R: Rng>(&self, k: usize, rng: &mut R) -> f64 {
        match &self.modulation {
            Modulation::Constant { pri } => *pri,
            Modulation::Jittered { pri, jitter } => {
                if *jitter == 0.0 {
                    *pri
                } else {
                    pri * (1.0 + rng.random_range(-jitter..*jitter))
                }
            }
            Modulation::Sliding { start, end, steps } => {
                let pos = (k % steps) as f64 / (*steps - 1) as f64;
                start + (end - start) * pos
            }
            Modulation::Wobulated {
                pri,
                amplitude,
                period,
            } => pri * (1.0 + amplitude * (2.0 * PI * k as f64 / *period as f64).sin()),
            Modulation::Staggered { levels } => levels[k % levels.len()],
            Modulation::DwellSwitch { levels, dwell } => {
                let mut r = k % dwell.iter().sum::<usize>();
                for (level, &count) in levels.iter().zip(dwell) {
                    if r < count {
                        return *level;
                    }
                    r -= count;
                }
                unreachable!("cycle position exceeds dwell total")
            }
        }
    }
}

/// Ordered emitter list with a version tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub version: String,
    pub emitters: Vec<EmitterSpec>,
}

const DEFAULT_ROSTER: &str = include_str!("../config/roster-v1.toml");

impl Roster {
    /// The shipped 10-emitter roster (`config/roster-v1.toml`).
    pub fn default_roster() -> Self {
        Self::from_toml(DEFAULT_ROSTER).expect("bundled roster is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let roster: Roster = toml::from_str(text)?;
        roster.validate()?;
        Ok(roster)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Ids must be `0..len` in order; every spec must be valid.
    pub fn validate(&self) -> Result<()> {
        if self.emitters.is_empty() {
            return Err(Error::Empty("roster"));
        }
        for (i, e) in self.emitters.iter().enumerate() {
            if e.id != i {
                return Err(invalid(format!(
                    "roster ids must be 0..n in order; `{}` has id {} at position {i}",
                    e.name, e.id
                )));
            }
            e.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.emitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emitters.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&EmitterSpec> {
        self.emitters.get(id)
    }

    /// Largest PRI any emitter can produce.
    pub fn max_pri(&self) -> f64 {
        self.emitters.iter().map(EmitterSpec::max_pri).fold(0.0, f64::max)
    }

    /// Input normalization constant: the mean of the emitters' mean PRIs.
    pub fn scale(&self) -> f64 {
        if self.emitters.is_empty() {
            return 1.0;
        }
        self.emitters.iter().map(EmitterSpec::mean_pri).sum::<f64>() / self.emitters.len() as f64
    }
}

/// Ordered pulse arrival times in microseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaSequence {
    toas: Vec<f64>,
}

impl ToaSequence {
    /// Rejects sequences that are shorter than 2, negative, or not strictly increasing.
    pub fn new(toas: Vec<f64>) -> Result<Self> {
        if toas.len() < 2 {
            return Err(invalid(format!(
                "TOA sequence needs at least 2 pulses, got {}",
                toas.len()
            )));
        }
        if toas[0] < 0.0 || !toas[0].is_finite() {
            return Err(invalid("TOAs must be finite and non-negative"));
        }
        if let Some(k) = toas.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(invalid(format!("TOAs not strictly increasing at index {}", k + 1)));
        }
        Ok(Self { toas })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.toas
    }

    pub fn len(&self) -> usize {
        self.toas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.toas
    }
}

/// A PRI sequence with its class label and domain tag.
///
/// Values are positive intervals in microseconds. A fixed-length sequence may
/// end in a run of zeros, which is padding and not part of the signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriSequence {
    pub pris: Vec<f64>,
    pub label: usize,
    pub domain_id: usize,
}

impl PriSequence {
    pub fn new(pris: Vec<f64>, label: usize, domain_id: usize) -> Self {
        Self {
            pris,
            label,
            domain_id,
        }
    }

    /// Number of leading (non-padding) intervals.
    pub fn valid_len(&self) -> usize {
        self.pris.iter().position(|&p| p <= 0.0).unwrap_or(self.pris.len())
    }

    pub fn signal(&self) -> &[f64] {
        &self.pris[..self.valid_len()]
    }

    pub fn len(&self) -> usize {
        self.pris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pris.is_empty()
    }

    /// Truncate or zero-pad to exactly `len` values.
    pub fn fit_len(mut self, len: usize) -> Self {
        self.pris.resize(len, 0.0);
        self
    }
}

/// Error-ratio triple of one environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Relative measurement error (std of the multiplicative Gaussian).
    pub rho_r: f64,
    /// Missing-pulse probability.
    pub rho_m: f64,
    /// Spurious-to-pulse ratio.
    pub rho_n: f64,
}

impl ScenarioParams {
    pub const P_TRAIN: ScenarioParams = ScenarioParams::new_unchecked(0.05, 0.2, 0.4);
    pub const P1: ScenarioParams = ScenarioParams::new_unchecked(0.02, 0.05, 0.2);
    pub const P2: ScenarioParams = ScenarioParams::new_unchecked(0.05, 0.2, 0.4);
    pub const P3: ScenarioParams = ScenarioParams::new_unchecked(0.05, 0.3, 0.6);
    pub const P4: ScenarioParams = ScenarioParams::new_unchecked(0.1, 0.5, 0.8);
    pub const CLEAN: ScenarioParams = ScenarioParams::new_unchecked(0.0, 0.0, 0.0);

    const fn new_unchecked(rho_r: f64, rho_m: f64, rho_n: f64) -> Self {
        Self { rho_r, rho_m, rho_n }
    }

    pub fn new(rho_r: f64, rho_m: f64, rho_n: f64) -> Result<Self> {
        let s = Self { rho_r, rho_m, rho_n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_r >= 0.0 && self.rho_r.is_finite()) {
            return Err(invalid(format!("rho_r must be >= 0, got {}", self.rho_r)));
        }
        if !(0.0..1.0).contains(&self.rho_m) {
            return Err(invalid(format!("rho_m must be in [0, 1), got {}", self.rho_m)));
        }
        if !(self.rho_n >= 0.0 && self.rho_n.is_finite()) {
            return Err(invalid(format!("rho_n must be >= 0, got {}", self.rho_n)));
        }
        Ok(())
    }

    /// Named preset: `train`, `p1`..`p4`, or `clean`.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "train" | "p_train" => Some(Self::P_TRAIN),
            "p1" => Some(Self::P1),
            "p2" => Some(Self::P2),
            "p3" => Some(Self::P3),
            "p4" => Some(Self::P4),
            "clean" => Some(Self::CLEAN),
            _ => None,
        }
    }

    /// Mean spurious pulses inserted per gap.
    pub fn spurious_rate(&self) -> f64 {
        self.rho_n * (1.0 - self.rho_m)
    }
}

/// Per-period missing-pulse counts (`a_i` dropped, `b_i` kept).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorruptionStats {
    pub dropped_per_period: Vec<u64>,
    pub kept_per_period: Vec<u64>,
    pub spurious_added: u64,
}

impl CorruptionStats {
    pub fn missing_ratio(&self) -> Result<f64> {
        missing_ratio(self)
    }
}

/// `sum(a_i) / sum(a_i + b_i)`.
pub fn missing_ratio(stats: &CorruptionStats) -> Result<f64> {
    if stats.dropped_per_period.len() != stats.kept_per_period.len() {
        return Err(invalid("dropped/kept period lists differ in length"));
    }
    let dropped: u64 = stats.dropped_per_period.iter().sum();
    let kept: u64 = stats.kept_per_period.iter().sum();
    if dropped + kept == 0 {
        return Err(invalid("missing ratio undefined: no pulses recorded"));
    }
    Ok(dropped as f64 / (dropped + kept) as f64)
}

/// Clean pulse train starting at the first interval of the modulation cycle.
pub fn gen_clean_toa(spec: &EmitterSpec, n_pulses: usize, seed: u64) -> Result<ToaSequence> {
    gen_clean_toa_with_phase(spec, n_pulses, 0, seed)
}

/// Clean pulse train whose first interval is cycle position `phase`.
pub fn gen_clean_toa_with_phase(
    spec: &EmitterSpec,
    n_pulses: usize,
    phase: usize,
    seed: u64,
) -> Result<ToaSequence> {
    spec.validate()?;
    if n_pulses < 2 {
        return Err(invalid(format!("n_pulses must be >= 2, got {n_pulses}")));
    }
    let mut rng = rng(seed);
    let mut toas = Vec::with_capacity(n_pulses);
    let mut t = 0.0;
    toas.push(t);
    for k in 0..n_pulses - 1 {
        t += spec.pri_at(phase + k, &mut rng);
        toas.push(t);
    }
    ToaSequence::new(toas)
}

/// First-order difference of the TOA stream.
pub fn toa_to_pri(toa: &ToaSequence) -> PriSequence {
    let pris = toa.as_slice().windows(2).map(|w| w[1] - w[0]).collect();
    PriSequence::new(pris, 0, 0)
}

/// Drops each interior pulse independently with probability `rho_m`.
///
/// The first and last pulses are kept so the window stays anchored. Pulses are
/// grouped into consecutive periods of `period` pulses for the `a_i`/`b_i`
/// bookkeeping.
pub fn drop_pulses(
    toa: &ToaSequence,
    rho_m: f64,
    period: usize,
    seed: u64,
) -> Result<(ToaSequence, CorruptionStats)> {
    if !(0.0..1.0).contains(&rho_m) {
        return Err(invalid(format!("rho_m must be in [0, 1), got {rho_m}")));
    }
    if period == 0 {
        return Err(invalid("bookkeeping period must be >= 1"));
    }
    let src = toa.as_slice();
    let n = src.len();
    let n_periods = n.div_ceil(period);
    let mut stats = CorruptionStats {
        dropped_per_period: vec![0; n_periods],
        kept_per_period: vec![0; n_periods],
        spurious_added: 0,
    };
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    for (k, &t) in src.iter().enumerate() {
        let anchor = k == 0 || k == n - 1;
        let drop = !anchor && rho_m > 0.0 && rng.random::<f64>() < rho_m;
        if drop {
            stats.dropped_per_period[k / period] += 1;
        } else {
            stats.kept_per_period[k / period] += 1;
            out.push(t);
        }
    }
    Ok((ToaSequence::new(out)?, stats))
}

/// Inserts `k ~ Poisson(rho_n * (1 - rho_m))` spurious pulses into every gap,
/// uniformly positioned strictly inside the gap.
pub fn add_spurious(toa: &ToaSequence, rho_n: f64, rho_m: f64, seed: u64) -> Result<ToaSequence> {
    if !(rho_n >= 0.0 && rho_n.is_finite()) {
        return Err(invalid(format!("rho_n must be >= 0, got {rho_n}")));
    }
    if !(0.0..1.0).contains(&rho_m) {
        return Err(invalid(format!("rho_m must be in [0, 1), got {rho_m}")));
    }
    let rate = rho_n * (1.0 - rho_m);
    if rate == 0.0 {
        return Ok(toa.clone());
    }
    let poisson = Poisson::new(rate).map_err(|e| invalid(e.to_string()))?;
    let mut rng = rng(seed);
    let src = toa.as_slice();
    let mut out = Vec::with_capacity(src.len() * 2);
    let mut inside = Vec::new();
    for w in src.windows(2) {
        out.push(w[0]);
        let k = poisson.sample(&mut rng) as usize;
        insert_points(w[0], w[1], k, &mut rng, &mut inside);
        out.extend_from_slice(&inside);
    }
    out.push(src[src.len() - 1]);
    ToaSequence::new(out)
}

/// `k` distinct sorted points strictly inside `(lo, hi)`, written to `buf`.
pub(crate) fn insert_points<R: Rng>(lo: f64, hi: f64, k: usize, rng: &mut R, buf: &mut Vec<f64>) {
    buf.clear();
    if k == 0 {
        return;
    }
    let mut set = BTreeSet::new();
    while set.len() < k {
        let t = lo + (hi - lo) * rng.random::<f64>();
        if t > lo && t < hi {
            set.insert(t.to_bits());
        }
    }
    // positive finite doubles order the same as their bit patterns
    buf.extend(set.into_iter().map(f64::from_bits));
}

/// Multiplies each interval by `1 + eps`, `eps ~ N(0, rho_r^2)`, redrawing
/// any draw that would make the interval non-positive. Padding is untouched.
pub fn add_measurement_error(pri: &PriSequence, rho_r: f64, seed: u64) -> Result<PriSequence> {
    if !(rho_r >= 0.0 && rho_r.is_finite()) {
        return Err(invalid(format!("rho_r must be >= 0, got {rho_r}")));
    }
    if rho_r == 0.0 {
        return Ok(pri.clone());
    }
    let normal = Normal::new(0.0, rho_r).map_err(|e| invalid(e.to_string()))?;
    let mut rng = rng(seed);
    let mut out = pri.clone();
    let n = out.valid_len();
    for p in &mut out.pris[..n] {
        *p = multiplicative_noise(*p, &normal, &mut rng);
    }
    Ok(out)
}

pub(crate) fn multiplicative_noise<R: Rng>(p: f64, normal: &Normal<f64>, rng: &mut R) -> f64 {
    loop {
        let v = p * (1.0 + normal.sample(rng));
        if v > 0.0 {
            return v;
        }
    }
}

/// Labeled set of fixed-length PRI sequences from one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<PriSequence>,
    pub scenario: ScenarioParams,
    pub seed: u64,
    pub seq_len: usize,
    pub roster: Roster,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count per roster class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.roster.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Labels inside the roster; class counts within one of each other.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.samples.iter().find(|s| s.label >= self.roster.len()) {
            return Err(invalid(format!("label {} outside roster", s.label)));
        }
        let counts = self.class_counts();
        let lo = counts.iter().min().copied().unwrap_or(0);
        let hi = counts.iter().max().copied().unwrap_or(0);
        if hi - lo > 1 {
            return Err(invalid(format!("classes unbalanced: {counts:?}")));
        }
        Ok(())
    }
}

/// Generates `n_per_class` corrupted sequences for every roster emitter.
///
/// Per sample: clean train at a random cycle phase, then
/// drop → spurious → difference → measurement error, then fit to `seq_len`.
/// Sample `j` of class `c` draws from `derive_seed(seed, c, j)` only.
pub fn make_dataset(
    roster: &Roster,
    scenario: ScenarioParams,
    n_per_class: usize,
    seq_len: usize,
    seed: u64,
) -> Result<Dataset> {
    if roster.is_empty() {
        return Err(Error::Empty("roster"));
    }
    roster.validate()?;
    scenario.validate()?;
    if n_per_class == 0 {
        return Err(invalid("n_per_class must be >= 1"));
    }
    if seq_len < 8 {
        return Err(invalid(format!("seq_len must be >= 8, got {seq_len}")));
    }
    // enough clean pulses that drops rarely leave fewer than seq_len intervals
    let n_clean = ((1.5 * (seq_len + 1) as f64) / (1.0 - scenario.rho_m)).ceil() as usize + 2;
    let mut samples = Vec::with_capacity(roster.len() * n_per_class);
    for spec in &roster.emitters {
        let class_seed = derive_seed(seed, stream::SAMPLE, spec.id as u64);
        for j in 0..n_per_class {
            let s = derive_seed(class_seed, stream::SAMPLE, j as u64);
            let phase = rng(derive_seed(s, 0, 0)).random_range(0..spec.cycle_len());
            let clean = gen_clean_toa_with_phase(spec, n_clean, phase, derive_seed(s, 1, 0))?;
            let (kept, _) = drop_pulses(&clean, scenario.rho_m, spec.cycle_len(), derive_seed(s, 2, 0))?;
            let observed = add_spurious(&kept, scenario.rho_n, scenario.rho_m, derive_seed(s, 3, 0))?;
            let mut pri = toa_to_pri(&observed);
            pri.pris.truncate(seq_len);
            let mut noisy = add_measurement_error(&pri, scenario.rho_r, derive_seed(s, 4, 0))?;
            noisy.label = spec.id;
            noisy.domain_id = 0;
            samples.push(noisy.fit_len(seq_len));
        }
    }
    Ok(Dataset {
        samples,
        scenario,
        seed,
        seq_len,
        roster: roster.clone(),
    })
}
