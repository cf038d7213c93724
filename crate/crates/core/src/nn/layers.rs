use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{expect_shape, gemm, Module, Scalar, Tensor, View};
use crate::error::{invalid, Error, Result};

/// Layer description, as recorded in checkpoint manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
    },
    Linear {
        input: usize,
        output: usize,
    },
    MaxPool1d {
        window: usize,
    },
    Relu,
    Softmax,
}

fn kaiming_uniform<T: Scalar, R: Rng>(n: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| T::of_f64(rng.random_range(-bound..=bound)))
        .collect()
}

/// Valid 1-D cross-correlation over `(B, in_ch, L)` inputs.
#[derive(Debug, Clone)]
pub struct Conv1d<T: Scalar = f32> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `(out_ch, in_ch, kernel)`
    pub weight: Tensor<T>,
    /// `(out_ch)`
    pub bias: Tensor<T>,
    /// Input shape and its unfolded columns.
    input: Option<(Vec<usize>, Vec<T>)>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng>(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, rng: &mut R) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 {
            return Err(invalid("conv1d dimensions must be >= 1"));
        }
        let w = kaiming_uniform(out_ch * in_ch * kernel, in_ch * kernel, rng);
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            weight: Tensor::new(vec![out_ch, in_ch, kernel], w)?,
            bias: Tensor::zeros(vec![out_ch]),
            input: None,
        })
    }

    pub fn output_len(&self, len: usize) -> Option<usize> {
        (len >= self.kernel).then(|| (len - self.kernel) / self.stride + 1)
    }
}

impl<T: Scalar> Conv1d<T> {
    /// Unfolds `(B, in_ch, L)` into `(in_ch * kernel, B * lout)`.
    fn im2col(&self, input: &Tensor<T>, lout: usize) -> Vec<T> {
        let (b, len) = (input.shape()[0], input.shape()[2]);
        let (k, s, cols) = (self.kernel, self.stride, b * lout);
        let mut col = vec![T::zero(); self.in_ch * k * cols];
        for bi in 0..b {
            for i in 0..self.in_ch {
                let xrow = &input.data[(bi * self.in_ch + i) * len..][..len];
                for kk in 0..k {
                    let dst = &mut col[(i * k + kk) * cols + bi * lout..][..lout];
                    for (t, d) in dst.iter_mut().enumerate() {
                        *d = xrow[t * s + kk];
                    }
                }
            }
        }
        col
    }
}

impl<T: Scalar> Module<T> for Conv1d<T> {
    fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = input.shape();
        if shape.len() != 3 || shape[1] != self.in_ch || shape[2] < self.kernel {
            return Err(Error::Shape {
                op: "conv1d",
                expected: vec![shape.first().copied().unwrap_or(0), self.in_ch, self.kernel.max(shape.get(2).copied().unwrap_or(0))],
                actual: shape.to_vec(),
            });
        }
        let b = shape[0];
        let lout = self.output_len(shape[2]).unwrap();
        let rows = self.in_ch * self.kernel;
        let cols = b * lout;
        let col = self.im2col(input, lout);
        let mut y = vec![T::zero(); self.out_ch * cols];
        gemm(
            View::dense(&self.weight.data, self.out_ch, rows),
            View::dense(&col, rows, cols),
            T::zero(),
            &mut y,
        );
        let mut out = vec![T::zero(); b * self.out_ch * lout];
        for o in 0..self.out_ch {
            let bias = self.bias.data[o];
            for bi in 0..b {
                let src = &y[o * cols + bi * lout..][..lout];
                let dst = &mut out[(bi * self.out_ch + o) * lout..][..lout];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = v + bias;
                }
            }
        }
        self.input = Some((shape.to_vec(), col));
        Tensor::new(vec![b, self.out_ch, lout], out)
    }

    fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, col) = self.input.as_ref().ok_or(Error::NoContext("conv1d"))?;
        let (b, len) = (shape[0], shape[2]);
        let lout = self.output_len(len).unwrap();
        expect_shape("conv1d backward", &[b, self.out_ch, lout], upstream.shape())?;
        let (k, s) = (self.kernel, self.stride);
        let rows = self.in_ch * k;
        let cols = b * lout;
        let mut g = vec![T::zero(); self.out_ch * cols];
        let mut db = vec![T::zero(); self.out_ch];
        for o in 0..self.out_ch {
            for bi in 0..b {
                let src = &upstream.data[(bi * self.out_ch + o) * lout..][..lout];
                g[o * cols + bi * lout..][..lout].copy_from_slice(src);
                db[o] += src.iter().copied().sum::<T>();
            }
        }
        let mut dw = vec![T::zero(); self.weight.len()];
        gemm(View::dense(&g, self.out_ch, cols), View::dense(col, rows, cols).t(), T::zero(), &mut dw);
        let mut dcol = vec![T::zero(); rows * cols];
        gemm(
            View::dense(&self.weight.data, self.out_ch, rows).t(),
            View::dense(&g, self.out_ch, cols),
            T::zero(),
            &mut dcol,
        );
        let mut dx = vec![T::zero(); b * self.in_ch * len];
        for bi in 0..b {
            for i in 0..self.in_ch {
                let dxrow = &mut dx[(bi * self.in_ch + i) * len..][..len];
                for kk in 0..k {
                    let src = &dcol[(i * k + kk) * cols + bi * lout..][..lout];
                    for (t, &v) in src.iter().enumerate() {
                        dxrow[t * s + kk] += v;
                    }
                }
            }
        }
        accumulate(self.weight.grad_mut(), &dw);
        accumulate(self.bias.grad_mut(), &db);
        Tensor::new(shape.clone(), dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

fn accumulate<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Affine map `y = W x + b` on `(B, ...)` inputs; trailing dims are flattened.
#[derive(Debug, Clone)]
pub struct Linear<T: Scalar = f32> {
    pub input_dim: usize,
    pub output_dim: usize,
    /// `(output, input)`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng>(input_dim: usize, output_dim: usize, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(invalid("linear dimensions must be >= 1"));
        }
        Ok(Self {
            input_dim,
            output_dim,
            weight: Tensor::new(
                vec![output_dim, input_dim],
                kaiming_uniform(output_dim * input_dim, input_dim, rng),
            )?,
            bias: Tensor::zeros(vec![output_dim]),
            input: None,
        })
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        if input.shape().len() < 2 || input.row_len() != self.input_dim {
            return Err(Error::Shape {
                op: "linear",
                expected: vec![input.batch(), self.input_dim],
                actual: input.shape().to_vec(),
            });
        }
        let b = input.batch();
        let mut out: Vec<T> = (0..b).flat_map(|_| self.bias.data.iter().copied()).collect();
        gemm(
            View::dense(&input.data, b, self.input_dim),
            View::dense(&self.weight.data, self.output_dim, self.input_dim).t(),
            T::one(),
            &mut out,
        );
        self.input = Some(input.clone());
        Tensor::new(vec![b, self.output_dim], out)
    }

    fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.input.as_ref().ok_or(Error::NoContext("linear"))?;
        let b = input.batch();
        expect_shape("linear backward", &[b, self.output_dim], upstream.shape())?;
        let (n, m) = (self.input_dim, self.output_dim);
        let g = View::dense(&upstream.data, b, m);
        let mut dx = vec![T::zero(); input.len()];
        gemm(g, View::dense(&self.weight.data, m, n), T::zero(), &mut dx);
        let mut dw = vec![T::zero(); self.weight.len()];
        gemm(g.t(), View::dense(&input.data, b, n), T::zero(), &mut dw);
        let mut db = vec![T::zero(); m];
        for row in upstream.data.chunks(m) {
            for (d, &v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        accumulate(self.weight.grad_mut(), &dw);
        accumulate(self.bias.grad_mut(), &db);
        Tensor::new(input.shape().to_vec(), dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Non-overlapping windowed max over the last axis of `(B, C, L)`; output
/// length `L / window` (floor). Gradient goes to the first maximum.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub window: usize,
    argmax: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(invalid("pool window must be >= 1"));
        }
        Ok(Self {
            window,
            argmax: None,
        })
    }

    pub fn output_len(&self, len: usize) -> usize {
        len / self.window
    }

    fn forward_t<T: Scalar>(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = input.shape();
        if shape.len() != 3 || shape[2] < self.window {
            return Err(Error::Shape {
                op: "maxpool1d",
                expected: vec![shape.first().copied().unwrap_or(0), shape.get(1).copied().unwrap_or(0), self.window],
                actual: shape.to_vec(),
            });
        }
        let (rows, len) = (shape[0] * shape[1], shape[2]);
        let lout = self.output_len(len);
        let mut out = Vec::with_capacity(rows * lout);
        let mut idx = Vec::with_capacity(rows * lout);
        for r in 0..rows {
            let x = &input.data[r * len..(r + 1) * len];
            for t in 0..lout {
                let start = t * self.window;
                let mut best = start;
                for j in start + 1..start + self.window {
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                out.push(x[best]);
                idx.push(r * len + best);
            }
        }
        self.argmax = Some((idx, shape.to_vec()));
        Tensor::new(vec![shape[0], shape[1], lout], out)
    }

    fn backward_t<T: Scalar>(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let (idx, shape) = self.argmax.as_ref().ok_or(Error::NoContext("maxpool1d"))?;
        expect_shape(
            "maxpool1d backward",
            &[shape[0], shape[1], self.output_len(shape[2])],
            upstream.shape(),
        )?;
        let mut dx = vec![T::zero(); shape.iter().product()];
        for (&i, &g) in idx.iter().zip(&upstream.data) {
            dx[i] += g;
        }
        Tensor::new(shape.clone(), dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<(Vec<bool>, Vec<usize>)>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    fn forward_t<T: Scalar>(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mask: Vec<bool> = input.data.iter().map(|&v| v > T::zero()).collect();
        let out = input
            .data
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { T::zero() })
            .collect();
        self.mask = Some((mask, input.shape().to_vec()));
        Tensor::new(input.shape().to_vec(), out)
    }

    fn backward_t<T: Scalar>(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let (mask, shape) = self.mask.as_ref().ok_or(Error::NoContext("relu"))?;
        expect_shape("relu backward", shape, upstream.shape())?;
        let dx = upstream
            .data
            .iter()
            .zip(mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Tensor::new(shape.clone(), dx)
    }
}

/// Row-wise softmax over `(B, C)`.
#[derive(Debug, Clone, Default)]
pub struct Softmax {
    output: Option<(Vec<f64>, Vec<usize>)>,
}

impl Softmax {
    pub fn new() -> Self {
        Self::default()
    }

    fn forward_t<T: Scalar>(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        if input.shape().len() != 2 {
            return Err(Error::Shape {
                op: "softmax",
                expected: vec![input.batch(), input.row_len()],
                actual: input.shape().to_vec(),
            });
        }
        let y = super::softmax_rows(input);
        self.output = Some((y.data.iter().map(|v| v.as_f64()).collect(), input.shape().to_vec()));
        Ok(y)
    }

    fn backward_t<T: Scalar>(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, shape) = self.output.as_ref().ok_or(Error::NoContext("softmax"))?;
        expect_shape("softmax backward", shape, upstream.shape())?;
        let c = shape[1];
        let mut dx = Vec::with_capacity(y.len());
        for b in 0..shape[0] {
            let yr = &y[b * c..(b + 1) * c];
            let gr = &upstream.data[b * c..(b + 1) * c];
            let dot: f64 = yr.iter().zip(gr).map(|(&p, &g)| p * g.as_f64()).sum();
            dx.extend(
                yr.iter()
                    .zip(gr)
                    .map(|(&p, &g)| T::of_f64(p * (g.as_f64() - dot))),
            );
        }
        Tensor::new(shape.clone(), dx)
    }
}

/// Any layer of the fixed set.
#[derive(Debug, Clone)]
pub enum Layer<T: Scalar = f32> {
    Conv1d(Conv1d<T>),
    Linear(Linear<T>),
    MaxPool1d(MaxPool1d),
    Relu(Relu),
    Softmax(Softmax),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv1d(c) => LayerKind::Conv1d {
                in_ch: c.in_ch,
                out_ch: c.out_ch,
                kernel: c.kernel,
                stride: c.stride,
            },
            Layer::Linear(l) => LayerKind::Linear {
                input: l.input_dim,
                output: l.output_dim,
            },
            Layer::MaxPool1d(p) => LayerKind::MaxPool1d { window: p.window },
            Layer::Relu(_) => LayerKind::Relu,
            Layer::Softmax(_) => LayerKind::Softmax,
        }
    }

    /// Fresh layer of the given kind (Kaiming-uniform weights, zero bias).
    pub fn build<R: Rng>(kind: LayerKind, rng: &mut R) -> Result<Self> {
        Ok(match kind {
            LayerKind::Conv1d {
                in_ch,
                out_ch,
                kernel,
                stride,
            } => Layer::Conv1d(Conv1d::new(in_ch, out_ch, kernel, stride, rng)?),
            LayerKind::Linear { input, output } => Layer::Linear(Linear::new(input, output, rng)?),
            LayerKind::MaxPool1d { window } => Layer::MaxPool1d(MaxPool1d::new(window)?),
            LayerKind::Relu => Layer::Relu(Relu::new()),
            LayerKind::Softmax => Layer::Softmax(Softmax::new()),
        })
    }

    /// Converts parameters to another scalar type; saved contexts are dropped.
    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv1d(c) => Layer::Conv1d(Conv1d {
                in_ch: c.in_ch,
                out_ch: c.out_ch,
                kernel: c.kernel,
                stride: c.stride,
                weight: c.weight.cast(),
                bias: c.bias.cast(),
                input: None,
            }),
            Layer::Linear(l) => Layer::Linear(Linear {
                input_dim: l.input_dim,
                output_dim: l.output_dim,
                weight: l.weight.cast(),
                bias: l.bias.cast(),
                input: None,
            }),
            Layer::MaxPool1d(p) => Layer::MaxPool1d(MaxPool1d::new(p.window).unwrap()),
            Layer::Relu(_) => Layer::Relu(Relu::new()),
            Layer::Softmax(_) => Layer::Softmax(Softmax::new()),
        }
    }
}

impl<T: Scalar> Module<T> for Layer<T> {
    fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv1d(l) => l.forward(input),
            Layer::Linear(l) => l.forward(input),
            Layer::MaxPool1d(l) => l.forward_t(input),
            Layer::Relu(l) => l.forward_t(input),
            Layer::Softmax(l) => l.forward_t(input),
        }
    }

    fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv1d(l) => l.backward(upstream),
            Layer::Linear(l) => l.backward(upstream),
            Layer::MaxPool1d(l) => l.backward_t(upstream),
            Layer::Relu(l) => l.backward_t(upstream),
            Layer::Softmax(l) => l.backward_t(upstream),
        }
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv1d(l) => l.params(),
            Layer::Linear(l) => l.params(),
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv1d(l) => l.params_mut(),
            Layer::Linear(l) => l.params_mut(),
            _ => Vec::new(),
        }
    }
}

/// Layers applied in order.
#[derive(Debug, Clone)]
pub struct Sequential<T: Scalar = f32> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn build<R: Rng>(kinds: &[LayerKind], rng: &mut R) -> Result<Self> {
        Ok(Self::new(
            kinds
                .iter()
                .map(|&k| Layer::build(k, rng))
                .collect::<Result<_>>()?,
        ))
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        Sequential::new(self.layers.iter().map(Layer::cast).collect())
    }
}

impl<T: Scalar> Module<T> for Sequential<T> {
    fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = upstream.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    fn t(shape: Vec<usize>, data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, data).unwrap()
    }

    #[test]
    fn conv_definition() {
        let mut c = Conv1d::<f64>::new(1, 1, 3, 1, &mut rng(0)).unwrap();
        c.weight.data = vec![1.0, 0.0, -1.0];
        let y = c.forward(&t(vec![1, 1, 4], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data, vec![-2.0, -2.0]);
        assert_eq!(y.shape(), &[1, 1, 2]);
    }

    #[test]
    fn conv_stride_and_shape_errors() {
        let mut c = Conv1d::<f64>::new(2, 3, 3, 2, &mut rng(0)).unwrap();
        let y = c.forward(&Tensor::zeros(vec![4, 2, 10])).unwrap();
        assert_eq!(y.shape(), &[4, 3, 4]);
        let err = c.forward(&Tensor::zeros(vec![4, 3, 10])).unwrap_err();
        assert!(err.to_string().contains("conv1d"), "{err}");
        assert!(c.forward(&Tensor::zeros(vec![4, 2, 2])).is_err());
    }

    #[test]
    fn relu_forward_backward() {
        let mut r = Relu::new();
        let y = r.forward_t(&t(vec![1, 3], &[-1.0, 0.0, 2.0])).unwrap();
        assert_eq!(y.data, vec![0.0, 0.0, 2.0]);
        let mut r = Relu::new();
        r.forward_t(&t(vec![1, 2], &[-1.0, 2.0])).unwrap();
        let g = r.backward_t(&t(vec![1, 2], &[1.0, 1.0])).unwrap();
        assert_eq!(g.data, vec![0.0, 1.0]);
    }

    #[test]
    fn softmax_symmetric() {
        let mut s = Softmax::new();
        let y = s.forward_t(&t(vec![1, 2], &[0.0, 0.0])).unwrap();
        assert_eq!(y.data, vec![0.5, 0.5]);
    }

    #[test]
    fn linear_input_grad_is_transpose_product() {
        let mut l = Linear::<f64>::new(2, 3, &mut rng(1)).unwrap();
        l.weight.data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        l.forward(&t(vec![1, 2], &[0.3, -0.7])).unwrap();
        let g = l.backward(&t(vec![1, 3], &[1.0, -1.0, 2.0])).unwrap();
        // W^T g = [1 - 3 + 10, 2 - 4 + 12]
        assert_eq!(g.data, vec![8.0, 10.0]);
    }

    #[test]
    fn maxpool_routes_to_first_max() {
        let mut p = MaxPool1d::new(2).unwrap();
        let y = p.forward_t(&t(vec![1, 1, 5], &[3.0, 3.0, 1.0, 4.0, 9.0])).unwrap();
        assert_eq!(y.data, vec![3.0, 4.0]);
        let g = p.backward_t(&t(vec![1, 1, 2], &[1.0, 2.0])).unwrap();
        assert_eq!(g.data, vec![1.0, 0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn backward_without_forward_errors() {
        let mut l = Linear::<f64>::new(2, 2, &mut rng(0)).unwrap();
        assert!(matches!(
            l.backward(&Tensor::zeros(vec![1, 2])),
            Err(Error::NoContext("linear"))
        ));
        let mut p = MaxPool1d::new(2).unwrap();
        assert!(p.backward_t::<f64>(&Tensor::zeros(vec![1, 1, 1])).is_err());
    }

    #[test]
    fn kaiming_bounds() {
        let c = Conv1d::<f32>::new(4, 8, 5, 1, &mut rng(3)).unwrap();
        let bound = (6.0f32 / 20.0).sqrt();
        assert!(c.weight.data.iter().all(|w| w.abs() <= bound));
        assert!(c.bias.data.iter().all(|&b| b == 0.0));
    }
}
