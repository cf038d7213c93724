//! Finite-difference checks of every layer and of both network paths.

use pri_dg::model::{grad_check_domain_path, DgModel, LabelPath, ModelConfig};
use pri_dg::nn::gradcheck::grad_check;
use pri_dg::nn::{Conv1d, Layer, Linear, MaxPool1d, Relu, Softmax, Tensor};
use pri_dg::seed::rng;
use rand::Rng;

fn input(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> pri_dg::Result<()> {
    let mut r = rng(0);
    let eps = 1e-5;
    let conv_in = input(vec![2, 2, 20], 1);
    let flat_in = input(vec![3, 7], 2);
    let checks = [
        ("conv1d", grad_check(&mut Conv1d::<f64>::new(2, 3, 3, 1, &mut r)?, &conv_in, eps, 3)?),
        ("conv1d stride 2", grad_check(&mut Conv1d::<f64>::new(2, 2, 3, 2, &mut r)?, &conv_in, eps, 4)?),
        ("linear", grad_check(&mut Linear::<f64>::new(7, 4, &mut r)?, &flat_in, eps, 5)?),
        ("maxpool", grad_check(&mut Layer::<f64>::MaxPool1d(MaxPool1d::new(2)?), &conv_in, eps, 6)?),
        ("relu", grad_check(&mut Layer::<f64>::Relu(Relu::new()), &flat_in, eps, 7)?),
        ("softmax", grad_check(&mut Layer::<f64>::Softmax(Softmax::new()), &flat_in, eps, 8)?),
    ];
    for (name, err) in checks {
        println!("{name:<16} max rel err {err:.2e}");
    }

    let cfg = ModelConfig {
        seq_len: 64,
        channels: [2, 3, 3, 2],
        kernel: 3,
        stride: 1,
        pool: 2,
        hidden: [6, 5],
        n_classes: 4,
        n_domains: 3,
        scale: 1.0,
    };
    let mut model = DgModel::<f64>::new(cfg, 9)?;
    for p in model.params_mut() {
        if p.shape().len() == 1 {
            p.data.iter_mut().for_each(|v| *v = r.random_range(-0.2..0.2));
        }
    }
    let x = input(vec![2, 1, 64], 10);
    println!("{:<16} max rel err {:.2e}", "F then C", grad_check(&mut LabelPath(&mut model), &x, eps, 11)?);
    for lambda in [1.0, 0.3] {
        let err = grad_check_domain_path(&mut model, &x, lambda, eps, 12)?;
        println!("{:<16} max rel err {err:.2e}", format!("F, GRL({lambda}), D"));
    }
    Ok(())
}
