//! Fine-tunes a trained model with a few labeled P4 samples per class and
//! prints accuracy against the number of samples.

use pri_dg::eval::{eval_accuracy, fewshot_curve, test_seed};
use pri_dg::sim::{make_dataset, Roster, ScenarioParams};
use pri_dg::train::{init_model, train, TrainConfig};

fn main() -> pri_dg::Result<()> {
    let roster = Roster::default_roster();
    let s = make_dataset(&roster, ScenarioParams::P_TRAIN, 150, 128, 2)?;
    let cfg = TrainConfig {
        epochs: 15,
        seed: 2,
        ..TrainConfig::default()
    };
    let mut model = init_model(&roster, &cfg)?;
    train(&mut model, &s, &cfg)?;

    let pool = make_dataset(&roster, ScenarioParams::P4, 20, 128, 90)?;
    let test = make_dataset(&roster, ScenarioParams::P4, 50, 128, test_seed(2, "p4"))?;
    println!("source-only P4 accuracy {:.3}", eval_accuracy(&model, &test)?.overall_acc);
    for p in fewshot_curve(&model, Some(&s), &pool, &test, &[0, 1, 5, 10, 20], &cfg)? {
        println!("n = {:>2}: {:.3}", p.n, p.accuracy);
    }
    Ok(())
}
