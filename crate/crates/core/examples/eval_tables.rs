//! Trains a quick model and an ERM baseline, evaluates both on P1-P4 and
//! prints the markdown tables.

use pri_dg::eval::{config_hash, eval_suite, render_markdown, Results, SUITE_PRESETS};
use pri_dg::sim::{make_dataset, Roster, ScenarioParams};
use pri_dg::train::{init_model, train, TrainConfig};

fn main() -> pri_dg::Result<()> {
    let roster = Roster::default_roster();
    let seed = 4;
    let s = make_dataset(&roster, ScenarioParams::P_TRAIN, 150, 128, seed)?;
    let dg = TrainConfig {
        epochs: 15,
        seed,
        ..TrainConfig::default()
    };
    let mut runs = Vec::new();
    for (label, cfg) in [("dg", dg.clone()), ("erm", dg.erm())] {
        let mut model = init_model(&roster, &cfg)?;
        train(&mut model, &s, &cfg)?;
        let suite = eval_suite(&model, &SUITE_PRESETS, &roster, 50, 128, seed)?;
        let hash = config_hash(&[&cfg.to_toml()?]);
        runs.push(Results::new(label, hash, seed, Some(s.seed), suite)?);
    }
    print!("{}", render_markdown(&runs)?);
    Ok(())
}
