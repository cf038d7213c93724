//! Simulates the preset environments, checks the corruption statistics on a
//! long pulse train and writes one dataset to disk.
//!
//! cargo run --release --example simulate_scenes -- [OUT_DIR]

use pri_dg::io::{read_dataset, write_dataset};
use pri_dg::sim::{add_spurious, drop_pulses, gen_clean_toa, make_dataset, Roster, ScenarioParams};

fn main() -> pri_dg::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/simulate_scenes".into());
    let roster = Roster::default_roster();
    let cst = &roster.emitters[0];
    let toa = gen_clean_toa(cst, 100_000, 1)?;
    let n_gaps = toa.len() - 1;

    println!("{:<6} {:>6} {:>6} {:>6}   {:>9} {:>13}", "scene", "rho_r", "rho_m", "rho_n", "missing", "spurious/gap");
    for name in ["train", "p1", "p2", "p3", "p4"] {
        let p = ScenarioParams::preset(name).unwrap();
        let (kept, stats) = drop_pulses(&toa, p.rho_m, 16, 2)?;
        let noisy = add_spurious(&kept, p.rho_n, p.rho_m, 3)?;
        let spurious = (noisy.len() - kept.len()) as f64 / (kept.len() - 1) as f64;
        println!(
            "{name:<6} {:>6.2} {:>6.2} {:>6.2}   {:>9.4} {:>13.4}   (target {:.4})",
            p.rho_r,
            p.rho_m,
            p.rho_n,
            stats.missing_ratio()?,
            spurious,
            p.spurious_rate()
        );
    }
    println!("({n_gaps} clean gaps per scene)");

    let ds = make_dataset(&roster, ScenarioParams::P4, 5, 32, 7)?;
    for s in ds.samples.iter().step_by(5).take(4) {
        let head: Vec<String> = s.signal().iter().take(8).map(|p| format!("{p:.0}")).collect();
        println!("{:<5} {}", roster.emitters[s.label].name, head.join(" "));
    }
    write_dataset(&out, &ds)?;
    let back = read_dataset(&out)?;
    println!("wrote {} samples to {out}, read back {}", ds.len(), back.len());
    Ok(())
}
