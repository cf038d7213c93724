//! The recognition model: a convolutional feature extractor shared by a label
//! classifier and a domain classifier, with gradient reversal in front of the
//! domain classifier, and the composite training loss
//!
//! ```text
//! total = label_ce + alpha * align - beta * domain_ce
//! ```
//!
//! `align` is the mean squared distance between the features of a source
//! sequence and its augmented counterpart. The domain classifier itself
//! minimizes `domain_ce`; the feature extractor receives `-beta` times that
//! gradient through the reversal layer, which is exactly the gradient of the
//! `-beta * domain_ce` term.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::gradcheck::relative_error;
use crate::nn::{
    cross_entropy_labels, softmax_rows, LayerKind, Module, Scalar, Sequential, Tensor,
};
use crate::seed::{derive_seed, rng, stream};
use crate::sim::PriSequence;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub seq_len: usize,
    /// Output channels of the four conv blocks.
    pub channels: [usize; 4],
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
    /// Widths of the two hidden layers of the label classifier.
    pub hidden: [usize; 2],
    pub n_classes: usize,
    /// Domain classes: source plus one per generator.
    pub n_domains: usize,
    /// Input values are PRIs divided by this.
    pub scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seq_len: 128,
            channels: [16, 32, 64, 64],
            kernel: 5,
            stride: 1,
            pool: 2,
            hidden: [128, 64],
            n_classes: 10,
            n_domains: 4,
            scale: 1000.0,
        }
    }
}

impl ModelConfig {
    /// `(channels, length)` after the conv stack.
    pub fn feature_shape(&self) -> Result<(usize, usize)> {
        let mut len = self.seq_len;
        for (i, _) in self.channels.iter().enumerate() {
            if len < self.kernel {
                return Err(invalid(format!(
                    "seq_len {} too short: conv block {i} sees length {len} < kernel {}",
                    self.seq_len, self.kernel
                )));
            }
            len = ((len - self.kernel) / self.stride + 1) / self.pool;
            if len == 0 {
                return Err(invalid(format!(
                    "seq_len {} too short: pooling in block {i} leaves nothing",
                    self.seq_len
                )));
            }
        }
        Ok((self.channels[3], len))
    }

    pub fn feature_dim(&self) -> Result<usize> {
        let (c, l) = self.feature_shape()?;
        Ok(c * l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.contains(&0) || self.hidden.contains(&0) {
            return Err(invalid("layer widths must be >= 1"));
        }
        if self.kernel == 0 || self.stride == 0 || self.pool == 0 {
            return Err(invalid("kernel, stride and pool must be >= 1"));
        }
        if self.n_classes < 2 || self.n_domains == 0 {
            return Err(invalid("need >= 2 classes and >= 1 domain"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid("scale must be > 0"));
        }
        self.feature_shape().map(|_| ())
    }

    pub fn feature_layers(&self) -> Vec<LayerKind> {
        let mut kinds = Vec::new();
        let mut in_ch = 1;
        for &out_ch in &self.channels {
            kinds.push(LayerKind::Conv1d {
                in_ch,
                out_ch,
                kernel: self.kernel,
                stride: self.stride,
            });
            kinds.push(LayerKind::MaxPool1d { window: self.pool });
            kinds.push(LayerKind::Relu);
            in_ch = out_ch;
        }
        kinds
    }

    pub fn label_layers(&self) -> Result<Vec<LayerKind>> {
        let d = self.feature_dim()?;
        let [h1, h2] = self.hidden;
        Ok(vec![
            LayerKind::Linear { input: d, output: h1 },
            LayerKind::Relu,
            LayerKind::Linear { input: h1, output: h2 },
            LayerKind::Relu,
            LayerKind::Linear {
                input: h2,
                output: self.n_classes,
            },
        ])
    }

    /// Logit layer only; the softmax is applied by [`domain_probs`] and,
    /// implicitly, by the cross-entropy.
    pub fn domain_layers(&self) -> Result<Vec<LayerKind>> {
        Ok(vec![LayerKind::Linear {
            input: self.feature_dim()?,
            output: self.n_domains,
        }])
    }
}

/// Identity forward; backward multiplies the upstream gradient by `-lambda`.
///
/// With `enabled == false` the backward pass is a plain identity, which gives
/// the unreversed reference gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReverse {
    pub lambda: f64,
    pub enabled: bool,
}

impl Default for GradReverse {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            enabled: true,
        }
    }
}

impl GradReverse {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("reversal strength must be >= 0, got {lambda}")));
        }
        Ok(Self {
            lambda,
            enabled: true,
        })
    }

    pub fn forward<T: Scalar>(&self, h: &Tensor<T>) -> Tensor<T> {
        let mut out = h.clone();
        out.grad = None;
        out
    }

    pub fn backward<T: Scalar>(&self, upstream: &Tensor<T>) -> Tensor<T> {
        let mut g = upstream.clone();
        if self.enabled {
            let factor = T::of_f64(-self.lambda);
            g.data.iter_mut().for_each(|v| *v = *v * factor);
        }
        g
    }
}

/// Shorthand for the reversal as a free function.
pub fn grad_reverse<T: Scalar>(h: &Tensor<T>, lambda: f64) -> Result<Tensor<T>> {
    Ok(GradReverse::new(lambda)?.forward(h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutputs<T: Scalar = f32> {
    /// Features `(B, d)`.
    pub h: Tensor<T>,
    /// Class logits `(B, n_classes)`.
    pub y_hat: Tensor<T>,
    /// Domain logits `(B, n_domains)`.
    pub z_hat: Tensor<T>,
}

/// The three terms of the training objective and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub label_ce: f64,
    pub align: f64,
    pub domain_ce: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LossTerms {
    pub fn new(label_ce: f64, align: f64, domain_ce: f64, alpha: f64, beta: f64) -> Self {
        Self {
            label_ce,
            align,
            domain_ce,
            total: label_ce + alpha * align - beta * domain_ce,
            alpha,
            beta,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.label_ce, self.align, self.domain_ce, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Upstream gradients produced by [`compute_loss`].
#[derive(Debug, Clone)]
pub struct LossGrads<T: Scalar = f32> {
    pub d_y_hat: Tensor<T>,
    /// Gradient of `domain_ce` w.r.t. the domain logits (what D descends).
    pub d_z_hat: Tensor<T>,
    /// Gradient of `alpha * align` w.r.t. the features; `None` when `alpha == 0`
    /// or there are no pairs.
    pub d_h_align: Option<Tensor<T>>,
}

/// Loss terms for a batch whose rows `(i, j)` in `pairs` are a source
/// sequence and its augmented counterpart.
pub fn compute_loss<T: Scalar>(
    outputs: &ModelOutputs<T>,
    pairs: &[(usize, usize)],
    labels: &[usize],
    domains: &[usize],
    alpha: f64,
    beta: f64,
) -> Result<(LossTerms, LossGrads<T>)> {
    let b = outputs.h.batch();
    if outputs.y_hat.batch() != b || outputs.z_hat.batch() != b || labels.len() != b || domains.len() != b {
        return Err(invalid(format!(
            "batch sizes disagree: h {b}, y_hat {}, z_hat {}, labels {}, domains {}",
            outputs.y_hat.batch(),
            outputs.z_hat.batch(),
            labels.len(),
            domains.len()
        )));
    }
    if alpha > 0.0 && pairs.is_empty() {
        return Err(invalid("alignment weight is set but the batch has no pairs"));
    }
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= b || j >= b || i == j) {
        return Err(invalid(format!("invalid pair ({i}, {j}) for batch of {b}")));
    }
    let (label_ce, d_y_hat) = cross_entropy_labels(&outputs.y_hat, labels)?;
    let (domain_ce, d_z_hat) = cross_entropy_labels(&outputs.z_hat, domains)?;

    let d = outputs.h.row_len();
    let mut align = 0.0;
    for &(i, j) in pairs {
        align += outputs
            .h
            .row(i)
            .iter()
            .zip(outputs.h.row(j))
            .map(|(&a, &c)| (a - c).as_f64().powi(2))
            .sum::<f64>();
    }
    if !pairs.is_empty() {
        align /= pairs.len() as f64;
    }
    let d_h_align = (alpha != 0.0 && !pairs.is_empty()).then(|| {
        let mut g = vec![T::zero(); b * d];
        let coef = T::of_f64(2.0 * alpha / pairs.len() as f64);
        for &(i, j) in pairs {
            for k in 0..d {
                let diff = coef * (outputs.h.data[i * d + k] - outputs.h.data[j * d + k]);
                g[i * d + k] += diff;
                g[j * d + k] -= diff;
            }
        }
        Tensor::new(outputs.h.shape().to_vec(), g).expect("feature shape")
    });

    Ok((
        LossTerms::new(label_ce.as_f64(), align, domain_ce.as_f64(), alpha, beta),
        LossGrads {
            d_y_hat,
            d_z_hat,
            d_h_align,
        },
    ))
}

/// Feature extractor, label classifier, reversal layer and domain classifier.
#[derive(Debug, Clone)]
pub struct DgModel<T: Scalar = f32> {
    pub config: ModelConfig,
    pub features: Sequential<T>,
    pub label_head: Sequential<T>,
    pub domain_head: Sequential<T>,
    pub grl: GradReverse,
}

impl<T: Scalar> DgModel<T> {
    /// Fresh model; weights drawn in the order features, label head, domain head.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng(derive_seed(seed, stream::INIT, 0));
        let features = Sequential::build(&config.feature_layers(), &mut r)?;
        let label_head = Sequential::build(&config.label_layers()?, &mut r)?;
        let domain_head = Sequential::build(&config.domain_layers()?, &mut r)?;
        Ok(Self {
            config,
            features,
            label_head,
            domain_head,
            grl: GradReverse::default(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim().expect("validated at construction")
    }

    /// Same weights in another scalar type.
    pub fn cast<U: Scalar>(&self) -> DgModel<U> {
        DgModel {
            config: self.config.clone(),
            features: self.features.cast(),
            label_head: self.label_head.cast(),
            domain_head: self.domain_head.cast(),
            grl: self.grl,
        }
    }

    /// `(B, 1, seq_len)` input tensor of normalized PRI values.
    pub fn encode(&self, batch: &[&PriSequence]) -> Result<Tensor<T>> {
        encode_batch(batch, self.config.seq_len, self.config.scale)
    }

    pub fn extract_features(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.len() != 3 || s[1] != 1 || s[2] != self.config.seq_len {
            return Err(Error::Shape {
                op: "extract_features",
                expected: vec![x.batch(), 1, self.config.seq_len],
                actual: s.to_vec(),
            });
        }
        let h = self.features.forward(x)?;
        let b = h.batch();
        h.reshape(vec![b, self.feature_dim()])
    }

    pub fn classify_labels(&mut self, h: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_features(h)?;
        self.label_head.forward(h)
    }

    /// Domain logits of `GRL(h)`.
    pub fn classify_domain(&mut self, h: &Tensor<T>, lambda: f64) -> Result<Tensor<T>> {
        self.check_features(h)?;
        self.grl = GradReverse {
            lambda: GradReverse::new(lambda)?.lambda,
            enabled: self.grl.enabled,
        };
        let reversed = self.grl.forward(h);
        self.domain_head.forward(&reversed)
    }

    fn check_features(&self, h: &Tensor<T>) -> Result<()> {
        if h.shape().len() != 2 || h.row_len() != self.feature_dim() {
            return Err(Error::Shape {
                op: "classifier input",
                expected: vec![h.batch(), self.feature_dim()],
                actual: h.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor<T>, lambda: f64) -> Result<ModelOutputs<T>> {
        let h = self.extract_features(x)?;
        let y_hat = self.classify_labels(&h)?;
        let z_hat = self.classify_domain(&h, lambda)?;
        Ok(ModelOutputs { h, y_hat, z_hat })
    }

    /// Backpropagates the loss gradients into every parameter.
    ///
    /// The domain path contributes to the feature gradient only when the
    /// reversal strength is non-zero, so `beta == 0` leaves the feature and
    /// label parameters on exactly the plain-classifier trajectory.
    pub fn backward(&mut self, grads: &LossGrads<T>) -> Result<()> {
        let mut dh = self.label_head.backward(&grads.d_y_hat)?;
        let dz = self.domain_head.backward(&grads.d_z_hat)?;
        if self.grl.lambda != 0.0 || !self.grl.enabled {
            add_into(&mut dh, &self.grl.backward(&dz));
        }
        if let Some(da) = &grads.d_h_align {
            add_into(&mut dh, da);
        }
        let shape = self.features_output_shape(dh.batch())?;
        self.features.backward(&dh.reshape(shape)?)?;
        Ok(())
    }

    fn features_output_shape(&self, b: usize) -> Result<Vec<usize>> {
        let (c, l) = self.config.feature_shape()?;
        Ok(vec![b, c, l])
    }

    pub fn zero_grad(&mut self) {
        self.features.zero_grad();
        self.label_head.zero_grad();
        self.domain_head.zero_grad();
    }

    /// Feature, label-head, then domain-head parameters.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.features.params_mut();
        p.extend(self.label_head.params_mut());
        p.extend(self.domain_head.params_mut());
        p
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.features.params();
        p.extend(self.label_head.params());
        p.extend(self.domain_head.params());
        p
    }

    /// Class predictions without touching any saved state.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        let mut fresh = self.cast::<T>();
        let h = fresh.extract_features(x)?;
        Ok(fresh.classify_labels(&h)?.argmax_rows())
    }
}

fn add_into<T: Scalar>(dst: &mut Tensor<T>, src: &Tensor<T>) {
    for (d, &s) in dst.data.iter_mut().zip(&src.data) {
        *d += s;
    }
}

/// Softmax over domain logits.
pub fn domain_probs<T: Scalar>(z_hat: &Tensor<T>) -> Tensor<T> {
    softmax_rows(z_hat)
}

/// Stacks sequences into a `(B, 1, seq_len)` tensor, mapping each PRI to `p / scale - 1`.
pub fn encode_batch<T: Scalar>(batch: &[&PriSequence], seq_len: usize, scale: f64) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(batch.len() * seq_len);
    for s in batch {
        if s.len() != seq_len {
            return Err(Error::Shape {
                op: "encode_batch",
                expected: vec![seq_len],
                actual: vec![s.len()],
            });
        }
        data.extend(s.pris.iter().map(|&p| T::of_f64(p / scale - 1.0)));
    }
    Tensor::new(vec![batch.len(), 1, seq_len], data)
}

/// `C(F(x))` as a single module, for gradient checking.
pub struct LabelPath<'a, T: Scalar>(pub &'a mut DgModel<T>);

impl<T: Scalar> Module<T> for LabelPath<'_, T> {
    fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.0.extract_features(input)?;
        self.0.classify_labels(&h)
    }

    fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let dh = self.0.label_head.backward(upstream)?;
        let shape = self.0.features_output_shape(dh.batch())?;
        self.0.features.backward(&dh.reshape(shape)?)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.0.features.params();
        p.extend(self.0.label_head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.0.features.params_mut();
        p.extend(self.0.label_head.params_mut());
        p
    }
}

/// `D(GRL(F(x)))` as a single module.
pub struct DomainPath<'a, T: Scalar> {
    pub model: &'a mut DgModel<T>,
    pub lambda: f64,
}

impl<T: Scalar> Module<T> for DomainPath<'_, T> {
    fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.model.extract_features(input)?;
        self.model.classify_domain(&h, self.lambda)
    }

    fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let dz = self.model.domain_head.backward(upstream)?;
        let dh = self.model.grl.backward(&dz);
        let shape = self.model.features_output_shape(dh.batch())?;
        self.model.features.backward(&dh.reshape(shape)?)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.model.features.params();
        p.extend(self.model.domain_head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.model.features.params_mut();
        p.extend(self.model.domain_head.params_mut());
        p
    }
}

/// Finite-difference check of the domain path with reversal `lambda`.
///
/// The numeric derivative of the forward pass is the unreversed gradient, so
/// feature-extractor parameters and the input are compared against
/// `-lambda` times it while domain-head parameters are compared as is.
pub fn grad_check_domain_path(model: &mut DgModel<f64>, x: &Tensor<f64>, lambda: f64, epsilon: f64, seed: u64) -> Result<f64> {
    let n_feature_params = model.features.params().len();
    let mut path = DomainPath { model, lambda };
    let out = path.forward(x)?;
    let mut r = rng(seed);
    let weights: Vec<f64> = (0..out.len())
        .map(|_| rand::Rng::random_range(&mut r, -1.0..1.0))
        .collect();
    let probe = |t: &Tensor<f64>| -> f64 { t.data.iter().zip(&weights).map(|(a, b)| a * b).sum() };
    path.zero_grad();
    let dx = path.backward(&Tensor::new(out.shape().to_vec(), weights.clone())?)?;
    let analytic: Vec<Vec<f64>> = path
        .params()
        .iter()
        .map(|p| p.grad.clone().unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();
    let mut worst: f64 = 0.0;
    for (pi, grads) in analytic.iter().enumerate() {
        let factor = if pi < n_feature_params { -lambda } else { 1.0 };
        for (j, &a) in grads.iter().enumerate() {
            let orig = path.params()[pi].data[j];
            path.params_mut()[pi].data[j] = orig + epsilon;
            let up = probe(&path.forward(x)?);
            path.params_mut()[pi].data[j] = orig - epsilon;
            let down = probe(&path.forward(x)?);
            path.params_mut()[pi].data[j] = orig;
            worst = worst.max(relative_error(a, factor * (up - down) / (2.0 * epsilon)));
        }
    }
    let mut xp = x.clone();
    for j in 0..xp.len() {
        let orig = xp.data[j];
        xp.data[j] = orig + epsilon;
        let up = probe(&path.forward(&xp)?);
        xp.data[j] = orig - epsilon;
        let down = probe(&path.forward(&xp)?);
        xp.data[j] = orig;
        worst = worst.max(relative_error(dx.data[j], -lambda * (up - down) / (2.0 * epsilon)));
    }
    Ok(worst)
}
