//! Samples a generator bank and shows what each generator does to one
//! recorded sequence.

use pri_dg::augment::{apply_generator, build_augmented_set, GeneratorBank, GeneratorRanges};
use pri_dg::sim::{make_dataset, Roster, ScenarioParams};

fn main() -> pri_dg::Result<()> {
    let roster = Roster::default_roster();
    let s = make_dataset(&roster, ScenarioParams::P_TRAIN, 4, 48, 11)?;
    let bank = GeneratorBank::sample(&GeneratorRanges::default(), 3, 5)?;
    let x = &s.samples[4 * 5];
    let show = |p: &[f64]| p.iter().take(10).map(|v| format!("{v:.0}")).collect::<Vec<_>>().join(" ");

    println!("source  label {} domain {}: {}", x.label, x.domain_id, show(x.signal()));
    for g in &bank.generators {
        let y = apply_generator(g, x, 0)?;
        println!("G{}      label {} domain {}: {}", g.id, y.label, y.domain_id, show(y.signal()));
        println!("        ops {:?}", g.ops);
    }

    let plus = build_augmented_set(&s, &bank, 1)?;
    println!("augmented set: {} source rows, {} generators", s.len(), plus.n_generators());
    Ok(())
}
