use super::{Scalar, Tensor};
use crate::error::{invalid, Error, Result};

/// SGD with momentum: `v <- mu v + g; w <- w - lr v`.
#[derive(Debug, Clone)]
pub struct Sgd<T: Scalar = f32> {
    pub lr: T,
    pub momentum: T,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(invalid(format!("learning rate must be >= 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(invalid(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(Self {
            lr: T::of_f64(lr),
            momentum: T::of_f64(momentum),
            velocity: Vec::new(),
        })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = T::of_f64(lr);
    }

    /// Updates every tensor that has a gradient. Nothing is modified if any
    /// gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        for (i, p) in params.iter().enumerate() {
            if let Some(g) = &p.grad {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteGradient(i));
                }
            }
        }
        if self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            let Some(g) = &p.grad else { continue };
            for ((w, vel), &gv) in p.data.iter_mut().zip(v.iter_mut()).zip(g) {
                *vel = self.momentum * *vel + gv;
                *w -= self.lr * *vel;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(w: f32, g: f32) -> Tensor<f32> {
        let mut t = Tensor::new(vec![1], vec![w]).unwrap();
        t.grad = Some(vec![g]);
        t
    }

    #[test]
    fn plain_step() {
        let mut p = param(1.0, 2.0);
        Sgd::new(0.1, 0.0).unwrap().step(&mut [&mut p]).unwrap();
        assert!((p.data[0] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn zero_lr_is_noop() {
        let mut p = param(0.37, -5.0);
        let mut opt = Sgd::new(0.0, 0.9).unwrap();
        for _ in 0..3 {
            opt.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.data[0], 0.37);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = param(0.0, 1.0);
        let mut opt = Sgd::new(1.0, 0.5).unwrap();
        opt.step(&mut [&mut p]).unwrap();
        opt.step(&mut [&mut p]).unwrap();
        // v1 = 1, v2 = 1.5
        assert_eq!(p.data[0], -2.5);
    }

    #[test]
    fn non_finite_gradient_is_a_fault() {
        let mut a = param(1.0, 1.0);
        let mut b = param(1.0, f32::NAN);
        let err = Sgd::new(0.1, 0.9).unwrap().step(&mut [&mut a, &mut b]);
        assert!(matches!(err, Err(Error::NonFiniteGradient(1))));
        assert_eq!(a.data[0], 1.0);
    }
}
