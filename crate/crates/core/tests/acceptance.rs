//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary so the verdict lines always reach the test log.
//! Criteria 1-6 are the property suite; 7-11 share one three-seed run of the
//! comparison experiment, whose report is kept under the cargo target tmpdir.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use pri_dg::augment::{apply_generator, fuse_intervals, sample_generator, split_intervals, GeneratorRanges};
use pri_dg::experiment::{mean_over, run_experiment, ExperimentConfig, SeedRun};
use pri_dg::model::{encode_batch, grad_check_domain_path, DgModel, DomainPath, LabelPath, ModelConfig};
use pri_dg::nn::gradcheck::grad_check;
use pri_dg::nn::{cross_entropy_labels, Conv1d, Layer, Linear, MaxPool1d, Module, Relu, Sequential, Sgd, Softmax, Tensor};
use pri_dg::seed::rng;
use pri_dg::sim::{add_spurious, drop_pulses, gen_clean_toa, make_dataset, PriSequence, Roster, ScenarioParams};
use pri_dg::train::{epoch_order, init_model, train, TrainConfig};
use rand::Rng;

const LAYER_TOL: f64 = 1e-4;
const STACK_TOL: f64 = 1e-3;
const FD_EPS: f64 = 1e-5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn random_tensor<R: Rng>(shape: Vec<usize>, r: &mut R) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn randomize_biases<R: Rng>(m: &mut DgModel<f64>, r: &mut R) {
    for p in m.params_mut() {
        if p.shape().len() == 1 {
            p.data.iter_mut().for_each(|v| *v = r.random_range(-0.2..0.2));
        }
    }
}

fn small_model_config<R: Rng>(r: &mut R) -> ModelConfig {
    ModelConfig {
        seq_len: r.random_range(48..80),
        channels: [r.random_range(1..4), r.random_range(2..4), r.random_range(2..4), r.random_range(1..3)],
        kernel: 3,
        stride: 1,
        pool: 2,
        hidden: [r.random_range(3..8), r.random_range(3..6)],
        n_classes: r.random_range(2..6),
        n_domains: r.random_range(2..5),
        scale: 1.0,
    }
}

fn c1_gradient_fidelity() -> Verdict {
    let (mut layer_worst, mut stack_worst) = (0.0f64, 0.0f64);
    for case in 0..50u64 {
        let mut r = rng(1000 + case);
        let b = r.random_range(1..4);
        let in_ch = r.random_range(1..4);
        let len = r.random_range(8..24);
        let kernel = r.random_range(1..5);
        let stride = r.random_range(1..3);
        let conv_in = random_tensor(vec![b, in_ch, len], &mut r);
        let n_in = r.random_range(2..10);
        let flat = random_tensor(vec![b, n_in], &mut r);
        let mut conv = Layer::Conv1d(Conv1d::<f64>::new(in_ch, r.random_range(1..4), kernel, stride, &mut r).unwrap());
        let mut lin = Layer::Linear(Linear::<f64>::new(n_in, r.random_range(1..6), &mut r).unwrap());
        let mut pool = Layer::<f64>::MaxPool1d(MaxPool1d::new(r.random_range(1..4)).unwrap());
        let mut relu = Layer::<f64>::Relu(Relu::new());
        let mut soft = Layer::<f64>::Softmax(Softmax::new());
        for (m, x) in [
            (&mut conv, &conv_in),
            (&mut lin, &flat),
            (&mut pool, &conv_in),
            (&mut relu, &flat),
            (&mut soft, &flat),
        ] {
            layer_worst = layer_worst.max(grad_check(m, x, FD_EPS, case).unwrap());
        }

        let cfg = small_model_config(&mut r);
        let mut model = DgModel::<f64>::new(cfg.clone(), case).unwrap();
        randomize_biases(&mut model, &mut r);
        let x = random_tensor(vec![r.random_range(1..4), 1, cfg.seq_len], &mut r);
        stack_worst = stack_worst.max(grad_check(&mut LabelPath(&mut model), &x, FD_EPS, case).unwrap());
        let lambda = r.random_range(0.1..1.5);
        stack_worst = stack_worst.max(grad_check_domain_path(&mut model, &x, lambda, FD_EPS, case).unwrap());
    }
    verdict(
        layer_worst < LAYER_TOL && stack_worst < STACK_TOL,
        format!("50 cases, worst layer rel err {layer_worst:.1e} (< {LAYER_TOL:.0e}), worst stack {stack_worst:.1e} (< {STACK_TOL:.0e})"),
    )
}

fn feature_grads(model: &mut DgModel<f32>, x: &Tensor<f32>, domains: &[usize]) -> Vec<Vec<f32>> {
    let mut path = DomainPath { model, lambda: 1.0 };
    let z = path.forward(x).unwrap();
    let (_, dz) = cross_entropy_labels(&z, domains).unwrap();
    path.zero_grad();
    path.backward(&dz).unwrap();
    path.model.features.params().iter().map(|p| p.grad.clone().unwrap()).collect()
}

fn c2_grl_identity() -> Verdict {
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    let mut nonzero = 0usize;
    for case in 0..20u64 {
        let mut r = rng(2000 + case);
        let cfg = ModelConfig {
            seq_len: 64,
            ..small_model_config(&mut r)
        };
        let mut model = DgModel::<f32>::new(cfg.clone(), case).unwrap();
        let b = r.random_range(2..6);
        let x = random_tensor(vec![b, 1, cfg.seq_len], &mut r).cast::<f32>();
        let domains: Vec<usize> = (0..b).map(|_| r.random_range(0..cfg.n_domains)).collect();
        model.grl.enabled = true;
        let reversed = feature_grads(&mut model, &x, &domains);
        model.grl.enabled = false;
        let plain = feature_grads(&mut model, &x, &domains);
        for (a, p) in reversed.iter().flatten().zip(plain.iter().flatten()) {
            compared += 1;
            nonzero += usize::from(*p != 0.0);
            // +0 == -0
            if *a != -*p {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0 && nonzero > 0,
        format!("20 models, {compared} feature-gradient elements ({nonzero} non-zero), {mismatches} not exact negations"),
    )
}

fn c3_simulator_statistics() -> Verdict {
    let roster = Roster::default_roster();
    let toa = gen_clean_toa(&roster.emitters[0], 100_000, 31).unwrap();
    let mut worst = (0.0f64, 0.0f64);
    let mut lines = Vec::new();
    for (i, name) in ["p1", "p2", "p3", "p4"].into_iter().enumerate() {
        let p = ScenarioParams::preset(name).unwrap();
        let (kept, stats) = drop_pulses(&toa, p.rho_m, 16, 40 + i as u64).unwrap();
        let noisy = add_spurious(&kept, p.rho_n, p.rho_m, 50 + i as u64).unwrap();
        let miss = stats.missing_ratio().unwrap();
        let spur = (noisy.len() - kept.len()) as f64 / (kept.len() - 1) as f64;
        let (dm, ds) = ((miss - p.rho_m).abs(), (spur - p.rho_n * (1.0 - p.rho_m)).abs());
        worst = (worst.0.max(dm), worst.1.max(ds));
        lines.push(format!("{name} miss {miss:.4} spur {spur:.4}"));
    }
    verdict(
        worst.0 < 0.01 && worst.1 < 0.01,
        format!("N=1e5; {}; max dev {:.4}/{:.4} (< 0.01)", lines.join(", "), worst.0, worst.1),
    )
}

/// Output intervals are left-to-right sums of consecutive input runs that
/// partition the input.
fn fused_spans_exact(input: &[f64], output: &[f64]) -> bool {
    let mut i = 0;
    for &o in output {
        let Some(&first) = input.get(i) else { return false };
        let mut acc = first;
        i += 1;
        while acc != o {
            match input.get(i) {
                Some(&p) if acc < o => {
                    acc += p;
                    i += 1;
                }
                _ => return false,
            }
        }
    }
    i == input.len()
}

fn c4_semantic_preservation() -> Verdict {
    let roster = Roster::default_roster();
    let ds = make_dataset(&roster, ScenarioParams::P_TRAIN, 20, 64, 77).unwrap();
    let ranges = GeneratorRanges::default();
    let (mut span_fail, mut label_fail) = (0usize, 0usize);
    let n = 10_000u64;
    for k in 0..n {
        let mut r = rng(4000 + k);
        let x = &ds.samples[r.random_range(0..ds.len())];
        let pris = x.signal();
        if r.random_bool(0.5) {
            let out = fuse_intervals(pris, r.random_range(0.0..0.9), &mut r);
            span_fail += usize::from(!fused_spans_exact(pris, &out));
        } else {
            let out = split_intervals(pris, r.random_range(0.0..2.0), &mut r).unwrap();
            span_fail += usize::from(!fused_spans_exact(&out, pris));
        }
        let g = sample_generator(&ranges, 1 + (k % 5) as usize, 9000 + k).unwrap();
        let y: PriSequence = apply_generator(&g, x, k).unwrap();
        label_fail += usize::from(y.label != x.label || y.len() != x.len() || y.domain_id != g.id);
    }
    verdict(
        span_fail == 0 && label_fail == 0,
        format!("{n} applications: {span_fail} span violations, {label_fail} label/length changes"),
    )
}

fn c5_erm_reduction() -> Verdict {
    let roster = Roster::default_roster();
    let s = make_dataset(&roster, ScenarioParams::P_TRAIN, 6, 128, 5).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        seed: 8,
        ..TrainConfig::default()
    }
    .erm();
    let mut dg = init_model(&roster, &cfg).unwrap();
    let init = dg.clone();
    train(&mut dg, &s, &cfg).unwrap();

    // independent plain classifier: same initial weights, same batches
    let mut net = Sequential::new(
        init.features
            .layers
            .iter()
            .chain(&init.label_head.layers)
            .cloned()
            .collect::<Vec<Layer<f32>>>(),
    );
    let n_feature_layers = init.features.layers.len();
    let mut opt = Sgd::<f32>::new(cfg.lr, cfg.momentum).unwrap();
    let steps = s.len().div_ceil(cfg.batch_size);
    let total = cfg.epochs * steps;
    let d = init.feature_dim();
    for epoch in 0..cfg.epochs {
        let order = epoch_order(s.len(), cfg.seed, epoch);
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let rows: Vec<&PriSequence> = idx.iter().map(|&i| &s.samples[i]).collect();
            let labels: Vec<usize> = rows.iter().map(|r| r.label).collect();
            let x = encode_batch::<f32>(&rows, s.seq_len, init.config.scale).unwrap();
            opt.set_lr(cfg.lr_at(epoch * steps + step, total));
            net.zero_grad();
            let mut h = x;
            let mut feat_shape = Vec::new();
            for (li, layer) in net.layers.iter_mut().enumerate() {
                if li == n_feature_layers {
                    feat_shape = h.shape().to_vec();
                    h = h.reshape(vec![rows.len(), d]).unwrap();
                }
                h = layer.forward(&h).unwrap();
            }
            let (_, mut g) = cross_entropy_labels(&h, &labels).unwrap();
            for li in (0..net.layers.len()).rev() {
                if li + 1 == n_feature_layers {
                    g = g.reshape(feat_shape.clone()).unwrap();
                }
                g = net.layers[li].backward(&g).unwrap();
            }
            let mut params = net.params_mut();
            opt.step(&mut params).unwrap();
        }
    }
    let ours: Vec<u32> = dg
        .features
        .params()
        .into_iter()
        .chain(dg.label_head.params())
        .flat_map(|p| p.data.iter().map(|v| v.to_bits()))
        .collect();
    let plain: Vec<u32> = net.params().into_iter().flat_map(|p| p.data.iter().map(|v| v.to_bits())).collect();
    let moved = ours != init.params().iter().take(ours.len()).flat_map(|p| p.data.iter().map(|v| v.to_bits())).collect::<Vec<_>>();
    verdict(
        ours == plain && moved,
        format!("{} parameters after {} steps, bit-identical: {}", ours.len(), total, ours == plain),
    )
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_pri-dg")).args(args).output().unwrap();
    assert!(out.status.success(), "pri-dg {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &Path) -> (Vec<u8>, Vec<u8>) {
    let p = |s: &str| dir.join(s).to_str().unwrap().to_string();
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("train.toml"), "epochs = 2\nbatch_size = 16\nseed = 3\n").unwrap();
    run_cli(&["gen-data", "--scenario", "train", "--n-per-class", "8", "--seed", "3", "--out", &p("data")]);
    run_cli(&["train", "--data", &p("data"), "--config", &p("train.toml"), "--out", &p("run")]);
    run_cli(&[
        "eval", "--checkpoint", &p("run/model.ckpt"), "--n-per-class", "10", "--seed", "3", "--out", &p("eval"),
    ]);
    (fs::read(dir.join("eval/results.json")).unwrap(), fs::read(dir.join("run/model.ckpt")).unwrap())
}

fn c6_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let (r1, c1) = pipeline(&tmp.path().join("a"));
    let (r2, c2) = pipeline(&tmp.path().join("b"));
    verdict(
        r1 == r2 && c1 == c2,
        format!(
            "gen-data, train, eval twice with seed 3: results.json identical {}, checkpoint identical {}",
            r1 == r2,
            c1 == c2
        ),
    )
}

struct Experiment {
    runs: Vec<SeedRun>,
    report: String,
    dir: PathBuf,
    seconds: f64,
}

static EXPERIMENT: OnceLock<Experiment> = OnceLock::new();

fn experiment() -> &'static Experiment {
    EXPERIMENT.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_experiment");
        let _ = fs::remove_dir_all(&dir);
        let t = Instant::now();
        let (runs, _) = run_experiment(&ExperimentConfig::default(), &Roster::default_roster(), Some(&dir)).unwrap();
        let seconds = t.elapsed().as_secs_f64();
        let report = fs::read_to_string(dir.join("report.md")).unwrap();
        Experiment {
            runs,
            report,
            dir,
            seconds,
        }
    })
}

fn acc(r: &pri_dg::eval::Results, preset: &str) -> f64 {
    r.suite.get(preset).map_or(f64::NAN, |m| m.overall_acc)
}

fn dg_mean(preset: &str) -> f64 {
    mean_over(&experiment().runs, |r| acc(&r.dg, preset))
}

fn erm_mean(preset: &str) -> f64 {
    mean_over(&experiment().runs, |r| acc(&r.erm, preset))
}

fn c7_in_distribution() -> Verdict {
    let p2 = dg_mean("p2");
    verdict(p2 >= 0.88, format!("3-seed DG accuracy on P2 {p2:.4} (>= 0.88)"))
}

fn c8_gap_closure() -> Verdict {
    let g4 = 100.0 * (dg_mean("p4") - erm_mean("p4"));
    let g3 = 100.0 * (dg_mean("p3") - erm_mean("p3"));
    verdict(
        g4 >= 8.0 && g3 >= 4.0,
        format!(
            "P4 DG {:.4} vs ERM {:.4} gap {g4:+.1} pts (>= 8); P3 DG {:.4} vs ERM {:.4} gap {g3:+.1} pts (>= 4)",
            dg_mean("p4"),
            erm_mean("p4"),
            dg_mean("p3"),
            erm_mean("p3")
        ),
    )
}

fn c9_ordering() -> Verdict {
    let (p1, p3, p4) = (dg_mean("p1"), dg_mean("p3"), dg_mean("p4"));
    verdict(p1 >= p3 && p3 >= p4, format!("DG P1 {p1:.4} >= P3 {p3:.4} >= P4 {p4:.4}"))
}

fn c10_fewshot() -> Verdict {
    let runs = &experiment().runs;
    let at = |n: usize| mean_over(runs, |r| r.dg.fewshot.iter().find(|p| p.n == n).map_or(f64::NAN, |p| p.accuracy));
    let curve: Vec<String> = [0, 1, 5, 10, 20].iter().map(|&n| format!("n={n} {:.4}", at(n))).collect();
    let gain = 100.0 * (at(20) - at(0));
    verdict(gain >= 3.0, format!("P4 {}; n=20 vs n=0 {gain:+.1} pts (>= 3)", curve.join(", ")))
}

fn c11_granular_tables() -> Verdict {
    let exp = experiment();
    let has_t2 = exp.report.contains("Accuracy per PRI modulation on P4");
    let has_t3 = exp.report.contains("Accuracy per staggered emitter on P4");
    let roster = Roster::default_roster();
    let stg: Vec<(String, f64)> = roster
        .emitters
        .iter()
        .filter(|e| e.name.starts_with("STG"))
        .map(|e| {
            let v = mean_over(&exp.runs, |r| {
                r.dg.suite.presets.iter().find(|p| p.name == "p4").and_then(|p| p.metrics.per_emitter.get(&e.id)).copied().unwrap_or(f64::NAN)
            });
            (e.name.clone(), v)
        })
        .collect();
    let above = stg.len() == 5 && stg.iter().all(|(_, v)| *v > 0.1);
    verdict(
        has_t2 && has_t3 && above,
        format!(
            "modulation table {has_t2}, staggered table {has_t3}; P4 {} (> 0.1); report {}",
            stg.iter().map(|(n, v)| format!("{n} {v:.3}")).collect::<Vec<_>>().join(" "),
            exp.dir.join("report.md").display()
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let property: [Criterion; 6] = [
        ("gradient fidelity", c1_gradient_fidelity),
        ("GRL identity", c2_grl_identity),
        ("simulator statistics", c3_simulator_statistics),
        ("semantic preservation", c4_semantic_preservation),
        ("ERM reduction", c5_erm_reduction),
        ("determinism", c6_determinism),
    ];
    let desk: [Criterion; 5] = [
        ("in-distribution", c7_in_distribution),
        ("generalization gap closure", c8_gap_closure),
        ("ordering", c9_ordering),
        ("few-shot trend", c10_fewshot),
        ("granular tables", c11_granular_tables),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    let t = Instant::now();
    for (i, (name, f)) in property.iter().chain(desk.iter()).enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        if id == 7 {
            println!("property suite: {:.1}s (budget 120s)", t.elapsed().as_secs_f64());
        }
        let v = f();
        failed += usize::from(!v.pass);
        println!("{} C{id} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if let Some(exp) = EXPERIMENT.get() {
        println!("3-seed experiment: {:.0}s (budget 1800s)", exp.seconds);
        let train_acc = mean_over(&exp.runs, |r| r.dg_train_acc);
        println!("DG accuracy on its training set: {train_acc:.4} (sanity bar 0.95)");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
