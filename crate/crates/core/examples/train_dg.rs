//! Trains a small domain-generalizing model and prints the loss terms per
//! epoch. Checkpoint, bank and log land in OUT_DIR.
//!
//! cargo run --release --example train_dg -- [OUT_DIR] [EPOCHS]

use pri_dg::io::read_checkpoint;
use pri_dg::sim::{make_dataset, Roster, ScenarioParams};
use pri_dg::train::{init_model, train, TrainConfig};

fn main() -> pri_dg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "target/train_dg".into());
    let epochs = args.next().map_or(12, |e| e.parse().expect("epochs"));
    let roster = Roster::default_roster();
    let s = make_dataset(&roster, ScenarioParams::P_TRAIN, 100, 128, 1)?;
    let cfg = TrainConfig {
        epochs,
        checkpoint_dir: Some(out.clone().into()),
        ..TrainConfig::default()
    };
    let mut model = init_model(&roster, &cfg)?;
    let stats = train(&mut model, &s, &cfg)?;
    println!("epoch  label_ce   align  domain_ce  alpha   beta  train_acc  domain_acc");
    for e in &stats.epochs {
        println!(
            "{:>5} {:>9.4} {:>7.4} {:>10.4} {:>6.3} {:>6.3} {:>10.3} {:>11.3}",
            e.epoch, e.label_ce, e.align, e.domain_ce, e.alpha, e.beta, e.train_acc, e.domain_acc
        );
    }
    let (_, manifest) = read_checkpoint(format!("{out}/model.ckpt"))?;
    println!("checkpoint: {} layers, epoch {}", manifest.layers.len(), manifest.training.epoch);
    Ok(())
}
