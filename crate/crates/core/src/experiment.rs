//! The comparison experiment: a domain-generalizing model against a plain
//! classifier, trained on the same data, over several seeds.

use std::fs;
use std::path::{Path, PathBuf};

use crate::eval::{config_hash, eval_accuracy, eval_suite, fewshot_curve, make_report, test_seed, Results, SUITE_PRESETS};
use crate::io::write_checkpoint;
use crate::model::DgModel;
use crate::seed::{derive_seed, stream};
use crate::sim::{make_dataset, Dataset, Roster, ScenarioParams};
use crate::train::{init_model, train, training_info, TrainConfig, TrainStats};
use crate::{error::invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Training samples per emitter.
    pub n_per_class: usize,
    pub test_n_per_class: usize,
    pub dg: TrainConfig,
    pub erm: TrainConfig,
    pub presets: Vec<String>,
    /// Scenario of the few-shot pool and test set.
    pub fewshot_scenario: String,
    pub fewshot_ns: Vec<usize>,
    pub fewshot_pool_per_class: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            n_per_class: 500,
            test_n_per_class: 200,
            dg: TrainConfig::default(),
            erm: TrainConfig::default().erm(),
            presets: SUITE_PRESETS.iter().map(|s| s.to_string()).collect(),
            fewshot_scenario: "p4".into(),
            fewshot_ns: vec![0, 1, 5, 10, 20],
            fewshot_pool_per_class: 20,
        }
    }
}

/// Both models of one seed, evaluated.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub dg: Results,
    pub erm: Results,
    pub dg_stats: TrainStats,
    pub erm_stats: TrainStats,
    /// Accuracy of the domain-generalizing model on its own training set.
    pub dg_train_acc: f64,
}

fn train_and_eval(
    label: &str,
    base: &TrainConfig,
    cfg: &ExperimentConfig,
    roster: &Roster,
    s: &Dataset,
    seed: u64,
    dir: Option<&Path>,
) -> Result<(DgModel<f32>, TrainStats, Results, TrainConfig)> {
    let mut tcfg = base.clone();
    tcfg.seed = seed;
    tcfg.seq_len = s.seq_len;
    tcfg.checkpoint_dir = None;
    let mut model = init_model(roster, &tcfg)?;
    let stats = train(&mut model, s, &tcfg)?;
    let presets: Vec<&str> = cfg.presets.iter().map(String::as_str).collect();
    let suite = eval_suite(&model, &presets, roster, cfg.test_n_per_class, s.seq_len, seed)?;
    let hash = config_hash(&[
        &tcfg.to_toml()?,
        &serde_json::to_string(roster)?,
        &format!("{} {}", cfg.n_per_class, cfg.test_n_per_class),
    ]);
    let results = Results::new(label, hash, seed, Some(s.seed), suite)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        write_checkpoint(dir.join("model.ckpt"), &model, training_info(&tcfg, tcfg.epochs, Some(s.seed)))?;
        fs::write(dir.join("train_config.toml"), tcfg.to_toml()?)?;
    }
    Ok((model, stats, results, tcfg))
}

/// Trains and evaluates both models for one seed. The few-shot curve is
/// recorded on the domain-generalizing run. With `out`, checkpoints and
/// results files go under `out/seed{seed}/`.
pub fn run_seed(cfg: &ExperimentConfig, roster: &Roster, seed: u64, out: Option<&Path>) -> Result<SeedRun> {
    let seq_len = cfg.dg.seq_len;
    let s = make_dataset(roster, ScenarioParams::P_TRAIN, cfg.n_per_class, seq_len, seed)?;
    let seed_dir = out.map(|o| o.join(format!("seed{seed}")));
    let sub = |label: &str| seed_dir.as_ref().map(|d| d.join(label));

    let (dg_model, dg_stats, mut dg, dg_cfg) = train_and_eval("dg", &cfg.dg, cfg, roster, &s, seed, sub("dg").as_deref())?;
    let (_, erm_stats, erm, _) = train_and_eval("erm", &cfg.erm, cfg, roster, &s, seed, sub("erm").as_deref())?;

    if !cfg.fewshot_ns.is_empty() {
        let name = cfg.fewshot_scenario.to_ascii_lowercase();
        let scenario = ScenarioParams::preset(&name).ok_or_else(|| invalid(format!("unknown preset {name:?}")))?;
        let test = make_dataset(roster, scenario, cfg.test_n_per_class, seq_len, test_seed(seed, &name))?;
        let pool_seed = derive_seed(seed, stream::FEWSHOT, u64::MAX);
        let pool = make_dataset(roster, scenario, cfg.fewshot_pool_per_class, seq_len, pool_seed)?;
        dg.fewshot = fewshot_curve(&dg_model, Some(&s), &pool, &test, &cfg.fewshot_ns, &dg_cfg)?;
    }

    let dg_train_acc = eval_accuracy(&dg_model, &s)?.overall_acc;
    if let Some(dir) = &seed_dir {
        dg.save(dir.join("results_dg.json"))?;
        erm.save(dir.join("results_erm.json"))?;
    }
    Ok(SeedRun {
        seed,
        dg,
        erm,
        dg_stats,
        erm_stats,
        dg_train_acc,
    })
}

/// Runs every seed and, with `out`, writes the report next to the per-seed
/// directories. Returns the runs and the report files written.
pub fn run_experiment(cfg: &ExperimentConfig, roster: &Roster, out: Option<&Path>) -> Result<(Vec<SeedRun>, Vec<PathBuf>)> {
    if cfg.seeds.is_empty() {
        return Err(invalid("no seeds"));
    }
    let runs = cfg
        .seeds
        .iter()
        .map(|&seed| run_seed(cfg, roster, seed, out))
        .collect::<Result<Vec<_>>>()?;
    let files = match out {
        Some(dir) => {
            let all: Vec<Results> = runs.iter().flat_map(|r| [r.dg.clone(), r.erm.clone()]).collect();
            make_report(&all, dir)?
        }
        None => Vec::new(),
    };
    Ok((runs, files))
}

/// Mean of `f` over runs.
pub fn mean_over<F: Fn(&SeedRun) -> f64>(runs: &[SeedRun], f: F) -> f64 {
    runs.iter().map(f).sum::<f64>() / runs.len().max(1) as f64
}
