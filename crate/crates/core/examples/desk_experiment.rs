//! DG against a plain classifier over several seeds, with the few-shot curve
//! and the report tables.
//!
//! cargo run --release --example desk_experiment -- [OUT_DIR] [SEEDS]
//!
//! SEEDS is a comma list, `0,1,2` by default. Takes a few minutes per seed.

use std::path::PathBuf;
use std::time::Instant;

use pri_dg::experiment::{mean_over, run_experiment, ExperimentConfig};
use pri_dg::sim::Roster;

fn main() -> pri_dg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/desk_experiment".into()));
    let mut cfg = ExperimentConfig::default();
    if let Some(seeds) = args.next() {
        cfg.seeds = seeds.split(',').map(|s| s.trim().parse().expect("seed")).collect();
    }
    let t = Instant::now();
    let (runs, files) = run_experiment(&cfg, &Roster::default_roster(), Some(&out))?;
    for r in &runs {
        print!("seed {}:", r.seed);
        for p in &r.dg.suite.presets {
            let erm = r.erm.suite.get(&p.name).map_or(f64::NAN, |m| m.overall_acc);
            print!("  {} dg {:.3} erm {:.3}", p.name, p.metrics.overall_acc, erm);
        }
        println!();
        for f in &r.dg.fewshot {
            println!("  few-shot {} n={:>2}: {:.3}", f.scenario, f.n, f.accuracy);
        }
    }
    for name in &cfg.presets {
        let dg = mean_over(&runs, |r| r.dg.suite.get(name).map_or(f64::NAN, |m| m.overall_acc));
        let erm = mean_over(&runs, |r| r.erm.suite.get(name).map_or(f64::NAN, |m| m.overall_acc));
        println!("mean {name}: dg {dg:.3} erm {erm:.3} gap {:+.1} points", 100.0 * (dg - erm));
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    println!("elapsed {:.0?}", t.elapsed());
    Ok(())
}
