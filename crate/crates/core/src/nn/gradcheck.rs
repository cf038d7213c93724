//! Central finite-difference verification of hand-written gradients.
//!
//! The probe loss is `L = sum(r * f(x))` with fixed dyadic weights `r`, so
//! `dL/df = r` and the comparison covers every output. Both routes run in
//! `f64`.

use rand::Rng;

use super::{Module, Tensor};
use crate::error::Result;
use crate::seed::rng;

/// Gradients smaller than this are compared in absolute terms.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
    (analytic - numeric).abs() / scale
}

fn probe_loss(out: &Tensor<f64>, r: &[f64]) -> f64 {
    out.data.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Worst relative error between backward and central differences over every
/// parameter element and every input element of `module`.
pub fn grad_check<M: Module<f64>>(module: &mut M, input: &Tensor<f64>, epsilon: f64, seed: u64) -> Result<f64> {
    let mut rng = rng(seed);
    let out = module.forward(input)?;
    // multiples of 1/16 in [-1, 1], never zero
    let r: Vec<f64> = (0..out.len())
        .map(|_| {
            let k = rng.random_range(1..=16) as f64 / 16.0;
            if rng.random_bool(0.5) {
                k
            } else {
                -k
            }
        })
        .collect();
    let upstream = Tensor::new(out.shape().to_vec(), r.clone())?;
    module.zero_grad();
    let dx = module.backward(&upstream)?;
    let analytic_params: Vec<Vec<f64>> = module
        .params()
        .iter()
        .map(|p| p.grad.clone().unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();

    let mut worst: f64 = 0.0;
    let n_params = analytic_params.len();
    for pi in 0..n_params {
        for j in 0..analytic_params[pi].len() {
            let orig = module.params()[pi].data[j];
            module.params_mut()[pi].data[j] = orig + epsilon;
            let up = probe_loss(&module.forward(input)?, &r);
            module.params_mut()[pi].data[j] = orig - epsilon;
            let down = probe_loss(&module.forward(input)?, &r);
            module.params_mut()[pi].data[j] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic_params[pi][j], numeric));
        }
    }
    let mut x = input.clone();
    for j in 0..x.len() {
        let orig = x.data[j];
        x.data[j] = orig + epsilon;
        let up = probe_loss(&module.forward(&x)?, &r);
        x.data[j] = orig - epsilon;
        let down = probe_loss(&module.forward(&x)?, &r);
        x.data[j] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(dx.data[j], numeric));
    }
    // leave the module with a context matching `input`
    module.forward(input)?;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerKind, Scalar, Sequential};

    struct Identity;

    impl<T: Scalar> Module<T> for Identity {
        fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
            Ok(input.clone())
        }
        fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
            Ok(upstream.clone())
        }
        fn params(&self) -> Vec<&Tensor<T>> {
            Vec::new()
        }
        fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
            Vec::new()
        }
    }

    #[test]
    fn identity_fragment_is_exact() {
        let x = Tensor::new(vec![2, 3], vec![0.5, -0.25, 1.0, 2.0, -3.0, 0.125]).unwrap();
        assert_eq!(grad_check(&mut Identity, &x, 1.0 / 1024.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        struct Doubler;
        impl Module<f64> for Doubler {
            fn forward(&mut self, input: &Tensor<f64>) -> Result<Tensor<f64>> {
                Ok(input.clone())
            }
            fn backward(&mut self, upstream: &Tensor<f64>) -> Result<Tensor<f64>> {
                let mut g = upstream.clone();
                g.data.iter_mut().for_each(|v| *v *= 2.0);
                Ok(g)
            }
            fn params(&self) -> Vec<&Tensor<f64>> {
                Vec::new()
            }
            fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
                Vec::new()
            }
        }
        let x = Tensor::new(vec![1, 2], vec![0.3, 0.4]).unwrap();
        assert!(grad_check(&mut Doubler, &x, 1e-3, 0).unwrap() > 0.4);
    }

    #[test]
    fn small_stack_passes() {
        let kinds = [
            LayerKind::Conv1d { in_ch: 1, out_ch: 2, kernel: 3, stride: 1 },
            LayerKind::MaxPool1d { window: 2 },
            LayerKind::Relu,
            LayerKind::Linear { input: 12, output: 3 },
            LayerKind::Softmax,
        ];
        let mut net = Sequential::<f64>::build(&kinds, &mut rng(5)).unwrap();
        let mut r = rng(6);
        let data: Vec<f64> = (0..28).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = Tensor::new(vec![2, 1, 14], data).unwrap();
        let err = grad_check(&mut net, &x, 1e-5, 1).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
