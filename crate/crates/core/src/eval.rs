//! Accuracy metrics, the P1–P4 evaluation suite, and report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::model::DgModel;
use crate::seed::{derive_seed, stream};
use crate::sim::{make_dataset, Dataset, ModulationKind, PriSequence, Roster, ScenarioParams};
use crate::train::{fewshot_finetune, TrainConfig};

pub const RESULTS_FORMAT_VERSION: u32 = 1;

/// Rows classified per forward pass.
const EVAL_CHUNK: usize = 256;

/// Anything that maps sequences to class ids.
pub trait Classifier {
    fn classify(&self, batch: &[&PriSequence]) -> Result<Vec<usize>>;
}

impl Classifier for DgModel<f32> {
    fn classify(&self, batch: &[&PriSequence]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(EVAL_CHUNK) {
            out.extend(self.predict(&self.encode(chunk)?)?);
        }
        Ok(out)
    }
}

/// Wraps a per-sample closure.
pub struct FnClassifier<F>(pub F);

impl<F: Fn(&PriSequence) -> usize> Classifier for FnClassifier<F> {
    fn classify(&self, batch: &[&PriSequence]) -> Result<Vec<usize>> {
        Ok(batch.iter().map(|s| (self.0)(s)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub overall_acc: f64,
    pub per_scenario: BTreeMap<String, f64>,
    /// Keyed by modulation code (`CST`, `JIT`, ...).
    pub per_modulation: BTreeMap<String, f64>,
    pub per_emitter: BTreeMap<usize, f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Short name of a preset triple, `custom` otherwise.
pub fn scenario_name(s: &ScenarioParams) -> &'static str {
    [
        ("p1", ScenarioParams::P1),
        ("p2", ScenarioParams::P2),
        ("p3", ScenarioParams::P3),
        ("p4", ScenarioParams::P4),
        ("clean", ScenarioParams::CLEAN),
    ]
    .into_iter()
    .find(|(_, p)| p == s)
    .map_or("custom", |(n, _)| n)
}

/// Metrics from a confusion matrix over `roster` classes.
pub fn metrics_from_confusion(confusion: Vec<Vec<u64>>, roster: &Roster, scenario: &str) -> Result<Metrics> {
    let n = roster.len();
    if confusion.len() != n || confusion.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("confusion must be {n}x{n}")));
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::Empty("evaluation set"));
    }
    let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
    let overall_acc = trace as f64 / total as f64;
    let mut per_emitter = BTreeMap::new();
    let mut by_kind: BTreeMap<ModulationKind, (u64, u64)> = BTreeMap::new();
    for spec in &roster.emitters {
        let row = &confusion[spec.id];
        let count: u64 = row.iter().sum();
        if count == 0 {
            continue;
        }
        let hit = row[spec.id];
        per_emitter.insert(spec.id, hit as f64 / count as f64);
        let e = by_kind.entry(spec.kind()).or_default();
        e.0 += hit;
        e.1 += count;
    }
    let per_modulation = by_kind
        .into_iter()
        .map(|(k, (hit, count))| (k.code().to_string(), hit as f64 / count as f64))
        .collect();
    Ok(Metrics {
        overall_acc,
        per_scenario: BTreeMap::from([(scenario.to_string(), overall_acc)]),
        per_modulation,
        per_emitter,
        confusion,
    })
}

/// Accuracy of `model` on `ds`.
pub fn eval_accuracy(model: &impl Classifier, ds: &Dataset) -> Result<Metrics> {
    if ds.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let rows: Vec<&PriSequence> = ds.samples.iter().collect();
    let pred = model.classify(&rows)?;
    let n = ds.roster.len();
    let mut confusion = vec![vec![0u64; n]; n];
    for (s, &p) in ds.samples.iter().zip(&pred) {
        if p >= n {
            return Err(invalid(format!("prediction {p} outside roster")));
        }
        confusion[s.label][p] += 1;
    }
    metrics_from_confusion(confusion, &ds.roster, scenario_name(&ds.scenario))
}

/// Unweighted mean of several metrics; confusions are summed.
pub fn average_metrics(all: &[Metrics]) -> Result<Metrics> {
    let first = all.first().ok_or(Error::Empty("metrics"))?;
    let k = all.len() as f64;
    let mean_map = |get: &dyn Fn(&Metrics) -> &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for m in all {
            for (key, v) in get(m) {
                let e = acc.entry(key.clone()).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(key, (s, c))| (key, s / c as f64)).collect()
    };
    let mut per_emitter: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for m in all {
        for (&id, v) in &m.per_emitter {
            let e = per_emitter.entry(id).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    let mut confusion = vec![vec![0u64; first.confusion.len()]; first.confusion.len()];
    for m in all {
        if m.confusion.len() != confusion.len() {
            return Err(invalid("metrics over different rosters"));
        }
        for (dst, src) in confusion.iter_mut().zip(&m.confusion) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    Ok(Metrics {
        overall_acc: all.iter().map(|m| m.overall_acc).sum::<f64>() / k,
        per_scenario: mean_map(&|m| &m.per_scenario),
        per_modulation: mean_map(&|m| &m.per_modulation),
        per_emitter: per_emitter.into_iter().map(|(id, (s, c))| (id, s / c as f64)).collect(),
        confusion,
    })
}

pub const SUITE_PRESETS: [&str; 4] = ["p1", "p2", "p3", "p4"];

/// Seed of the test set for `preset`; fixed per preset name so that a subset
/// of presets sees the same data as the full suite.
pub fn test_seed(seed: u64, preset: &str) -> u64 {
    let idx = SUITE_PRESETS
        .iter()
        .position(|p| p.eq_ignore_ascii_case(preset))
        .map_or_else(|| 1000 + preset.bytes().map(u64::from).sum::<u64>(), |i| i as u64);
    derive_seed(seed, stream::TEST_SET, idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetResult {
    pub name: String,
    pub scenario: ScenarioParams,
    pub test_seed: u64,
    pub n_per_class: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterInfo {
    pub id: usize,
    pub name: String,
    pub modulation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResults {
    pub presets: Vec<PresetResult>,
    /// Unweighted mean over `presets`.
    pub avg: Metrics,
    pub emitters: Vec<EmitterInfo>,
}

impl SuiteResults {
    pub fn get(&self, name: &str) -> Option<&Metrics> {
        self.presets.iter().find(|p| p.name == name).map(|p| &p.metrics)
    }
}

/// Evaluates on freshly generated test sets, one per named preset.
pub fn eval_suite(
    model: &impl Classifier,
    presets: &[&str],
    roster: &Roster,
    n_per_class: usize,
    seq_len: usize,
    seed: u64,
) -> Result<SuiteResults> {
    if presets.is_empty() {
        return Err(Error::Empty("preset list"));
    }
    let mut out = Vec::with_capacity(presets.len());
    for &name in presets {
        let scenario = ScenarioParams::preset(name).ok_or_else(|| invalid(format!("unknown preset {name:?}")))?;
        let name = name.to_ascii_lowercase();
        let test_seed = test_seed(seed, &name);
        let ds = make_dataset(roster, scenario, n_per_class, seq_len, test_seed)?;
        let mut metrics = eval_accuracy(model, &ds)?;
        metrics.per_scenario = BTreeMap::from([(name.clone(), metrics.overall_acc)]);
        out.push(PresetResult {
            name,
            scenario,
            test_seed,
            n_per_class,
            metrics,
        });
    }
    let avg = average_metrics(&out.iter().map(|p| p.metrics.clone()).collect::<Vec<_>>())?;
    Ok(SuiteResults {
        presets: out,
        avg,
        emitters: roster
            .emitters
            .iter()
            .map(|e| EmitterInfo {
                id: e.id,
                name: e.name.clone(),
                modulation: e.kind().code().to_string(),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotPoint {
    pub scenario: String,
    pub n: usize,
    pub accuracy: f64,
}

/// Accuracy on `test` after fine-tuning with `n` labeled samples per class
/// from `pool`, for every `n` in `ns`.
pub fn fewshot_curve(
    model: &DgModel<f32>,
    source: Option<&Dataset>,
    pool: &Dataset,
    test: &Dataset,
    ns: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<FewShotPoint>> {
    if pool.seed == test.seed {
        return Err(invalid("few-shot pool and test set share a seed"));
    }
    ns.iter()
        .map(|&n| {
            let tuned = fewshot_finetune(model, source, pool, n, cfg)?;
            Ok(FewShotPoint {
                scenario: scenario_name(&test.scenario).to_string(),
                n,
                accuracy: eval_accuracy(&tuned, test)?.overall_acc,
            })
        })
        .collect()
}

/// Everything one evaluated run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub format_version: u32,
    /// Free-form run name, e.g. `dg` or `erm`.
    pub label: String,
    pub config_hash: String,
    pub seed: u64,
    /// Seed of the training data; never equal to any test seed.
    pub train_data_seed: Option<u64>,
    pub suite: SuiteResults,
    #[serde(default)]
    pub fewshot: Vec<FewShotPoint>,
}

impl Results {
    pub fn new(label: &str, config_hash: String, seed: u64, train_data_seed: Option<u64>, suite: SuiteResults) -> Result<Self> {
        if let Some(t) = train_data_seed {
            if suite.presets.iter().any(|p| p.test_seed == t) {
                return Err(invalid("a test set reuses the training data seed"));
            }
        }
        Ok(Self {
            format_version: RESULTS_FORMAT_VERSION,
            label: label.to_string(),
            config_hash,
            seed,
            train_data_seed,
            suite,
            fewshot: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format_version != RESULTS_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported results version {}", r.format_version)));
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// First 16 hex digits of the SHA-256 of `parts`, joined by newlines.
pub fn config_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

fn md_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    for r in rows {
        s += &format!("| {} |\n", r.join(" | "));
    }
    s
}

/// Preset used for the per-modulation and per-emitter tables.
fn focus(suite: &SuiteResults) -> &PresetResult {
    suite
        .presets
        .iter()
        .find(|p| p.name == "p4")
        .unwrap_or_else(|| suite.presets.last().expect("suite is never empty"))
}

fn mean_results(group: &[&Results]) -> Result<(Vec<String>, Metrics, Metrics)> {
    let names: Vec<String> = group[0].suite.presets.iter().map(|p| p.name.clone()).collect();
    let avg = average_metrics(&group.iter().map(|r| r.suite.avg.clone()).collect::<Vec<_>>())?;
    let focus_name = focus(&group[0].suite).name.clone();
    let foc = average_metrics(
        &group
            .iter()
            .filter_map(|r| r.suite.get(&focus_name).cloned())
            .collect::<Vec<_>>(),
    )?;
    Ok((names, avg, foc))
}

/// Markdown tables for one or more runs. Runs sharing a label also get a
/// mean row.
pub fn render_markdown(runs: &[Results]) -> Result<String> {
    let first = runs.first().ok_or(Error::Empty("results"))?;
    let names: Vec<String> = first.suite.presets.iter().map(|p| p.name.to_uppercase()).collect();
    let focus_name = focus(&first.suite).name.to_uppercase();
    let mods: Vec<String> = ModulationKind::ALL.iter().map(|k| k.code().to_string()).collect();
    let staggered: Vec<&EmitterInfo> = first.suite.emitters.iter().filter(|e| e.modulation == "STG").collect();

    let mut groups: Vec<(String, Vec<&Results>)> = Vec::new();
    for r in runs {
        match groups.iter_mut().find(|(l, _)| *l == r.label) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.label.clone(), vec![r])),
        }
    }

    let row_t1 = |name: String, per: &BTreeMap<String, f64>, avg: f64| {
        let mut row = vec![name];
        row.extend(names.iter().map(|n| per.get(&n.to_lowercase()).map_or("-".into(), |&v| pct(v))));
        row.push(pct(avg));
        row
    };
    let row_t2 = |name: String, m: &Metrics| {
        let mut row = vec![name];
        row.extend(mods.iter().map(|k| m.per_modulation.get(k).map_or("-".into(), |&v| pct(v))));
        row
    };
    let row_t3 = |name: String, m: &Metrics| {
        let mut row = vec![name];
        row.extend(staggered.iter().map(|e| m.per_emitter.get(&e.id).map_or("-".into(), |&v| pct(v))));
        row
    };

    let (mut t1, mut t2, mut t3) = (Vec::new(), Vec::new(), Vec::new());
    for (label, group) in &groups {
        for r in group {
            let name = format!("{} (seed {})", r.label, r.seed);
            t1.push(row_t1(name.clone(), &r.suite.avg.per_scenario, r.suite.avg.overall_acc));
            let foc = &focus(&r.suite).metrics;
            t2.push(row_t2(name.clone(), foc));
            t3.push(row_t3(name, foc));
        }
        if group.len() > 1 {
            let (_, avg, foc) = mean_results(group)?;
            let name = format!("{label} (mean of {})", group.len());
            t1.push(row_t1(name.clone(), &avg.per_scenario, avg.overall_acc));
            t2.push(row_t2(name.clone(), &foc));
            t3.push(row_t3(name, &foc));
        }
    }

    let mut out = String::from("# Evaluation report\n\n");
    for r in runs {
        out += &format!(
            "- `{}` seed {} config `{}` test seeds {}\n",
            r.label,
            r.seed,
            r.config_hash,
            r.suite
                .presets
                .iter()
                .map(|p| format!("{}={}", p.name, p.test_seed))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    let mut h1 = vec!["Run".to_string()];
    h1.extend(names.iter().cloned());
    h1.push("Avg.".into());
    out += "\n## Accuracy per environment (%)\n\n";
    out += &md_table(&h1, &t1);
    let mut h2 = vec!["Run".to_string()];
    h2.extend(mods.iter().cloned());
    out += &format!("\n## Accuracy per PRI modulation on {focus_name} (%)\n\n");
    out += &md_table(&h2, &t2);
    if !staggered.is_empty() {
        let mut h3 = vec!["Run".to_string()];
        h3.extend(staggered.iter().map(|e| e.name.clone()));
        out += &format!("\n## Accuracy per staggered emitter on {focus_name} (%)\n\n");
        out += &md_table(&h3, &t3);
    }
    let curves: Vec<&Results> = runs.iter().filter(|r| !r.fewshot.is_empty()).collect();
    if !curves.is_empty() {
        out += "\n## Few-shot fine-tuning (%)\n\n";
        let rows: Vec<Vec<String>> = curves
            .iter()
            .flat_map(|r| {
                r.fewshot.iter().map(|p| {
                    vec![
                        r.label.clone(),
                        r.seed.to_string(),
                        p.scenario.to_uppercase(),
                        p.n.to_string(),
                        pct(p.accuracy),
                    ]
                })
            })
            .collect();
        let h = ["Run", "Seed", "Target", "n per class", "Accuracy"].map(String::from);
        out += &md_table(&h, &rows);
    }
    Ok(out)
}

/// Plot data for the few-shot curves.
pub fn fewshot_csv(runs: &[Results]) -> String {
    let mut s = String::from("label,seed,scenario,n,accuracy\n");
    for r in runs {
        for p in &r.fewshot {
            s += &format!("{},{},{},{},{}\n", r.label, r.seed, p.scenario, p.n, p.accuracy);
        }
    }
    s
}

/// Writes `report.md`, and `fewshot.csv` when any run has curve data.
/// Returns the written paths.
pub fn make_report(runs: &[Results], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = vec![dir.join("report.md")];
    fs::write(&written[0], render_markdown(runs)?)?;
    let csv = dir.join("fewshot.csv");
    if runs.iter().any(|r| !r.fewshot.is_empty()) {
        fs::write(&csv, fewshot_csv(runs))?;
        written.push(csv);
    } else if csv.exists() {
        fs::remove_file(&csv)?;
    }
    Ok(written)
}

/// Every `results*.json` in `dir` and its immediate subdirectories, sorted by
/// path. A run without curve data picks up a `fewshot.json` lying next to it.
pub fn collect_results(dir: impl AsRef<Path>) -> Result<Vec<Results>> {
    let mut paths = Vec::new();
    let is_results = |p: &Path| {
        p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("results") && n.ends_with(".json"))
    };
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            for inner in fs::read_dir(&p)? {
                let q = inner?.path();
                if is_results(&q) {
                    paths.push(q);
                }
            }
        } else if is_results(&p) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Empty("results files"));
    }
    paths
        .iter()
        .map(|p| {
            let mut r = Results::load(p)?;
            let curve = p.with_file_name("fewshot.json");
            if r.fewshot.is_empty() && curve.exists() {
                r.fewshot = serde_json::from_str(&fs::read_to_string(curve)?)?;
            }
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_set() -> Dataset {
        make_dataset(&Roster::default_roster(), ScenarioParams::P3, 6, 64, 77).unwrap()
    }

    #[test]
    fn oracle_predictor_is_perfect() {
        let ds = test_set();
        let oracle = FnClassifier(|s: &PriSequence| s.label);
        let m = eval_accuracy(&oracle, &ds).unwrap();
        assert_eq!(m.overall_acc, 1.0);
        for (i, row) in m.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c, if i == j { 6 } else { 0 });
            }
        }
        assert_eq!(m.per_scenario["p3"], 1.0);
    }

    #[test]
    fn constant_predictor_scores_one_tenth() {
        let ds = test_set();
        let m = eval_accuracy(&FnClassifier(|_: &PriSequence| 3), &ds).unwrap();
        assert_eq!(m.overall_acc, 0.1);
        assert_eq!(m.per_emitter[&3], 1.0);
        assert_eq!(m.per_modulation["STG"], 0.0);
    }

    #[test]
    fn confusion_consistency() {
        let ds = test_set();
        let m = eval_accuracy(&FnClassifier(|s: &PriSequence| (s.label + s.pris[0] as usize) % 10), &ds).unwrap();
        let total: u64 = m.confusion.iter().flatten().sum();
        let trace: u64 = (0..10).map(|i| m.confusion[i][i]).sum();
        assert_eq!(m.overall_acc, trace as f64 / total as f64);
        for (row, count) in m.confusion.iter().zip(ds.class_counts()) {
            assert_eq!(row.iter().sum::<u64>(), count as u64);
        }
        let stg: Vec<usize> = ds.roster.emitters.iter().filter(|e| e.kind() == ModulationKind::Staggered).map(|e| e.id).collect();
        let mean = stg.iter().map(|id| m.per_emitter[id]).sum::<f64>() / stg.len() as f64;
        assert!((m.per_modulation["STG"] - mean).abs() < 1e-12);
    }

    #[test]
    fn empty_set_rejected() {
        let mut ds = test_set();
        ds.samples.clear();
        assert!(matches!(eval_accuracy(&FnClassifier(|_: &PriSequence| 0), &ds), Err(Error::Empty(_))));
    }

    fn suite() -> SuiteResults {
        let oracle = FnClassifier(|s: &PriSequence| if s.label == 0 { 1 } else { s.label });
        eval_suite(&oracle, &SUITE_PRESETS, &Roster::default_roster(), 2, 32, 5).unwrap()
    }

    #[test]
    fn suite_shape() {
        let s = suite();
        assert_eq!(s.presets.len(), 4);
        assert_eq!(s.avg.per_scenario.len(), 4);
        let mods: Vec<&str> = s.avg.per_modulation.keys().map(String::as_str).collect();
        let mut want = vec!["CST", "JIT", "SLD", "WOB", "D&S", "STG"];
        want.sort_unstable();
        assert_eq!(mods, want);
        let stg: Vec<&str> = s.emitters.iter().filter(|e| e.modulation == "STG").map(|e| e.name.as_str()).collect();
        assert_eq!(stg, ["STG1", "STG2", "STG3", "STG4", "STG5"]);
        let mean = s.presets.iter().map(|p| p.metrics.overall_acc).sum::<f64>() / 4.0;
        assert!((s.avg.overall_acc - mean).abs() < 1e-12);
        assert_eq!(s.avg.per_emitter[&0], 0.0);
    }

    #[test]
    fn results_round_trip_and_report() {
        let mut r = Results::new("dg", config_hash(&["a", "b"]), 5, Some(5), suite()).unwrap();
        assert_eq!(Results::parse(&r.to_json().unwrap()).unwrap(), r);
        let dir = tempfile::tempdir().unwrap();
        let files = make_report(std::slice::from_ref(&r), dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let md = fs::read_to_string(&files[0]).unwrap();
        assert!(md.contains(&r.config_hash));
        assert!(md.contains("STG5"));
        assert!(!md.contains("Few-shot"));

        r.fewshot = vec![FewShotPoint { scenario: "p4".into(), n: 0, accuracy: 0.1 / 3.0 }];
        assert_eq!(Results::parse(&r.to_json().unwrap()).unwrap(), r);
        let files = make_report(&[r.clone(), r.clone()], dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert!(fs::read_to_string(&files[0]).unwrap().contains("mean of 2"));
        r.save(dir.path().join("results.json")).unwrap();
        assert_eq!(collect_results(dir.path()).unwrap(), vec![r]);
    }

    #[test]
    fn test_seed_collision_rejected() {
        let s = suite();
        let clash = s.presets[0].test_seed;
        assert!(Results::new("dg", String::new(), 5, Some(clash), s).is_err());
    }

    #[test]
    fn config_hash_is_stable() {
        assert_eq!(config_hash(&["x"]), config_hash(&["x"]));
        assert_ne!(config_hash(&["x"]), config_hash(&["y"]));
        assert_eq!(config_hash(&["x"]).len(), 16);
    }
}
