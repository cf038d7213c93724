use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pri_dg::eval::{
    collect_results, config_hash, eval_accuracy, eval_suite, make_report, scenario_name, test_seed,
    FewShotPoint, Results,
};
use pri_dg::io::{read_checkpoint, read_dataset, write_checkpoint, write_dataset};
use pri_dg::sim::{make_dataset, Roster, ScenarioParams};
use pri_dg::train::{fewshot_finetune, init_model, train, TrainConfig};
use pri_dg::Result;

#[derive(Parser)]
#[command(name = "pri-dg", version, about = "Radar PRI simulation and domain-generalizing emitter recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Train,
    P1,
    P2,
    P3,
    P4,
    Custom,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labeled dataset.
    GenData {
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long)]
        rho_r: Option<f64>,
        #[arg(long)]
        rho_m: Option<f64>,
        #[arg(long)]
        rho_n: Option<f64>,
        #[arg(long, default_value_t = 500)]
        n_per_class: usize,
        #[arg(long, default_value_t = 128)]
        seq_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emitter roster (TOML); the built-in roster by default.
        #[arg(long)]
        roster: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes checkpoint, generator bank and log to OUT.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Training config (TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune with a few labeled target samples per class and record the
    /// target accuracy for every count.
    Fewshot {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Pool of labeled target samples.
        #[arg(long)]
        target: PathBuf,
        /// Source data mixed into every batch.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
        n: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Test-set size per class, generated in the target's scenario.
        #[arg(long, default_value_t = 200)]
        test_n_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on freshly generated preset test sets.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "p1,p2,p3,p4")]
        presets: Vec<String>,
        #[arg(long, default_value_t = 200)]
        n_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run name recorded in the results file.
        #[arg(long, default_value = "model")]
        label: String,
        #[arg(long)]
        roster: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render tables from every results file under IN.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_roster(path: &Option<PathBuf>) -> Result<Roster> {
    match path {
        Some(p) => Roster::load(p),
        None => Ok(Roster::default_roster()),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            scenario,
            rho_r,
            rho_m,
            rho_n,
            n_per_class,
            seq_len,
            seed,
            roster,
            out,
        } => {
            let params = match scenario {
                Scenario::Train => ScenarioParams::P_TRAIN,
                Scenario::P1 => ScenarioParams::P1,
                Scenario::P2 => ScenarioParams::P2,
                Scenario::P3 => ScenarioParams::P3,
                Scenario::P4 => ScenarioParams::P4,
                Scenario::Custom => ScenarioParams::new(rho_r.unwrap_or(0.0), rho_m.unwrap_or(0.0), rho_n.unwrap_or(0.0))?,
            };
            let ds = make_dataset(&load_roster(&roster)?, params, n_per_class, seq_len, seed)?;
            write_dataset(&out, &ds)?;
            println!("wrote {} samples to {}", ds.len(), out.display());
        }
        Command::Train { data, config, out } => {
            let s = read_dataset(&data)?;
            let mut cfg = load_config(&config)?;
            cfg.seq_len = s.seq_len;
            cfg.checkpoint_dir = Some(out.clone());
            let mut model = init_model(&s.roster, &cfg)?;
            let stats = train(&mut model, &s, &cfg)?;
            if let Some(last) = stats.last() {
                println!(
                    "epoch {}: label_ce {:.4} align {:.4} domain_ce {:.4} train_acc {:.4}",
                    last.epoch, last.label_ce, last.align, last.domain_ce, last.train_acc
                );
            }
            println!("checkpoint in {}", out.join("model.ckpt").display());
        }
        Command::Fewshot {
            checkpoint,
            target,
            source,
            n,
            config,
            test_n_per_class,
            seed,
            out,
        } => {
            let (model, manifest) = read_checkpoint(&checkpoint)?;
            let pool = read_dataset(&target)?;
            let source = source.map(read_dataset).transpose()?;
            let cfg = load_config(&config)?;
            let name = scenario_name(&pool.scenario);
            let mut test_seed = test_seed(seed, name);
            if test_seed == pool.seed {
                test_seed = test_seed.wrapping_add(1);
            }
            let test = make_dataset(&pool.roster, pool.scenario, test_n_per_class, pool.seq_len, test_seed)?;
            fs::create_dir_all(&out)?;
            let mut points = Vec::new();
            for &k in std::iter::once(&0).chain(n.iter().filter(|&&k| k > 0)) {
                let tuned = fewshot_finetune(&model, source.as_ref(), &pool, k, &cfg)?;
                let accuracy = eval_accuracy(&tuned, &test)?.overall_acc;
                println!("n = {k:>3}: accuracy {accuracy:.4}");
                if k > 0 {
                    write_checkpoint(out.join(format!("fewshot_n{k}.ckpt")), &tuned, manifest.training.clone())?;
                }
                points.push(FewShotPoint {
                    scenario: name.to_string(),
                    n: k,
                    accuracy,
                });
            }
            fs::write(out.join("fewshot.json"), serde_json::to_string_pretty(&points)?)?;
            let mut csv = String::from("scenario,n,accuracy\n");
            for p in &points {
                csv += &format!("{},{},{}\n", p.scenario, p.n, p.accuracy);
            }
            fs::write(out.join("fewshot.csv"), csv)?;
        }
        Command::Eval {
            checkpoint,
            presets,
            n_per_class,
            seed,
            label,
            roster,
            out,
        } => {
            let (model, manifest) = read_checkpoint(&checkpoint)?;
            let roster = load_roster(&roster)?;
            let names: Vec<&str> = presets.iter().map(String::as_str).collect();
            let suite = eval_suite(&model, &names, &roster, n_per_class, model.config.seq_len, seed)?;
            let hash = config_hash(&[&serde_json::to_string(&manifest)?]);
            let results = Results::new(&label, hash, seed, manifest.training.data_seed, suite)?;
            fs::create_dir_all(&out)?;
            results.save(out.join("results.json"))?;
            for p in &results.suite.presets {
                println!("{}: {:.4}", p.name, p.metrics.overall_acc);
            }
            println!("avg: {:.4}", results.suite.avg.overall_acc);
        }
        Command::Report { input, out } => {
            let runs = collect_results(&input)?;
            for path in make_report(&runs, &out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
