//! Three-layer ReLU decoder `h(z) = W3 relu(W2 relu(W1 z + b1) + b2) + b3`
//! with unit-covariance Gaussian output, its gradients and an Adam optimizer.
//!
//! Parameters live in one flat buffer (`W1, b1, W2, b2, W3, b3`, matrices
//! row-major) so that optimizer state and gradients share the layout.
//! The ReLU derivative at exactly zero is taken as zero.

use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::math::{axpy, dot, LN_2PI};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecoderError {
    #[error("{what}: expected length {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("decoder dimensions must all be positive")]
    ZeroDimension,
    #[error("gradient requires at least one sample")]
    NoSamples,
    #[error("non-finite gradient entry at flat index {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite parameter at flat index {index}")]
    NonFiniteParameter { index: usize },
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
}

/// Layer widths `d -> h1 -> h2 -> n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecoderShape {
    pub latent_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub output_dim: usize,
}

impl DecoderShape {
    pub fn new(latent_dim: usize, hidden1: usize, hidden2: usize, output_dim: usize) -> Self {
        Self {
            latent_dim,
            hidden1,
            hidden2,
            output_dim,
        }
    }

    /// Total number of weights and biases.
    pub fn n_params(&self) -> usize {
        let DecoderShape {
            latent_dim: d,
            hidden1: h1,
            hidden2: h2,
            output_dim: n,
        } = *self;
        h1 * d + h1 + h2 * h1 + h2 + n * h2 + n
    }

    fn validate(&self) -> Result<(), DecoderError> {
        if self.latent_dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 || self.output_dim == 0 {
            return Err(DecoderError::ZeroDimension);
        }
        Ok(())
    }

    /// `(start, len)` of each block in the flat buffer, in the order
    /// `W1, b1, W2, b2, W3, b3`.
    fn blocks(&self) -> [(usize, usize); 6] {
        let sizes = [
            self.hidden1 * self.latent_dim,
            self.hidden1,
            self.hidden2 * self.hidden1,
            self.hidden2,
            self.output_dim * self.hidden2,
            self.output_dim,
        ];
        let mut out = [(0, 0); 6];
        let mut start = 0;
        for (slot, len) in out.iter_mut().zip(sizes) {
            *slot = (start, len);
            start += len;
        }
        out
    }
}

/// Weights and biases of the decoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    shape: DecoderShape,
    data: Vec<f64>,
}

macro_rules! block_accessors {
    ($($name:ident, $name_mut:ident, $idx:expr;)*) => {
        $(
            pub fn $name(&self) -> &[f64] {
                let (s, l) = self.shape.blocks()[$idx];
                &self.data[s..s + l]
            }

            pub fn $name_mut(&mut self) -> &mut [f64] {
                let (s, l) = self.shape.blocks()[$idx];
                &mut self.data[s..s + l]
            }
        )*
    };
}

impl DecoderParams {
    pub fn zeros(shape: DecoderShape) -> Result<Self, DecoderError> {
        shape.validate()?;
        Ok(Self {
            shape,
            data: alloc::vec![0.0; shape.n_params()],
        })
    }

    /// Weights uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init<R: Rng + ?Sized>(shape: DecoderShape, rng: &mut R) -> Result<Self, DecoderError> {
        let mut params = Self::zeros(shape)?;
        let fans = [shape.latent_dim, shape.hidden1, shape.hidden2];
        for (block, fan_in) in [0usize, 2, 4].into_iter().zip(fans) {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let (s, l) = shape.blocks()[block];
            for w in &mut params.data[s..s + l] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    /// Assembles parameters from row-major blocks.
    pub fn from_parts(
        shape: DecoderShape,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
        w3: &[f64],
        b3: &[f64],
    ) -> Result<Self, DecoderError> {
        shape.validate()?;
        let names = ["W1", "b1", "W2", "b2", "W3", "b3"];
        let parts = [w1, b1, w2, b2, w3, b3];
        let mut data = Vec::with_capacity(shape.n_params());
        for ((part, name), (_, len)) in parts.iter().zip(names).zip(shape.blocks()) {
            if part.len() != len {
                return Err(DecoderError::ShapeMismatch {
                    what: name,
                    expected: len,
                    found: part.len(),
                });
            }
            data.extend_from_slice(part);
        }
        Self::from_flat(shape, data)
    }

    pub fn from_flat(shape: DecoderShape, data: Vec<f64>) -> Result<Self, DecoderError> {
        shape.validate()?;
        if data.len() != shape.n_params() {
            return Err(DecoderError::ShapeMismatch {
                what: "flat parameter buffer",
                expected: shape.n_params(),
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(DecoderError::NonFiniteParameter { index });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> DecoderShape {
        self.shape
    }

    pub fn n_params(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    block_accessors! {
        w1, w1_mut, 0;
        b1, b1_mut, 1;
        w2, w2_mut, 2;
        b2, b2_mut, 3;
        w3, w3_mut, 4;
        b3, b3_mut, 5;
    }

    fn check_len(&self, what: &'static str, v: &[f64], expected: usize) -> Result<(), DecoderError> {
        if v.len() != expected {
            return Err(DecoderError::ShapeMismatch {
                what,
                expected,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Decoder mean `h(z)`.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>, DecoderError> {
        self.check_len("latent vector", z, self.shape.latent_dim)?;
        let mut ws = Workspace::new(self.shape);
        self.forward_into(z, &mut ws);
        Ok(ws.out)
    }

    /// Jacobian `dh/dz` as an `n x d` row-major matrix.
    pub fn jacobian(&self, z: &[f64]) -> Result<Vec<f64>, DecoderError> {
        self.check_len("latent vector", z, self.shape.latent_dim)?;
        let DecoderShape {
            latent_dim: d,
            hidden1: h1,
            hidden2: h2,
            output_dim: n,
        } = self.shape;
        let mut ws = Workspace::new(self.shape);
        self.forward_into(z, &mut ws);
        // M1 = diag(mask1) W1 (h1 x d), M2 = diag(mask2) W2 M1 (h2 x d)
        let mut m1 = alloc::vec![0.0; h1 * d];
        for j in 0..h1 {
            if ws.h1[j] > 0.0 {
                m1[j * d..(j + 1) * d].copy_from_slice(&self.w1()[j * d..(j + 1) * d]);
            }
        }
        let mut m2 = alloc::vec![0.0; h2 * d];
        for j in 0..h2 {
            if ws.h2[j] > 0.0 {
                let row = &self.w2()[j * h1..(j + 1) * h1];
                for (k, &w) in row.iter().enumerate() {
                    axpy(w, &m1[k * d..(k + 1) * d], &mut m2[j * d..(j + 1) * d]);
                }
            }
        }
        let mut jac = alloc::vec![0.0; n * d];
        for o in 0..n {
            let row = &self.w3()[o * h2..(o + 1) * h2];
            for (k, &w) in row.iter().enumerate() {
                axpy(w, &m2[k * d..(k + 1) * d], &mut jac[o * d..(o + 1) * d]);
            }
        }
        Ok(jac)
    }

    /// `grad_z ln N(y; h(z), I) = J(z)^T (y - h(z))`.
    pub fn grad_z(&self, z: &[f64], y: &[f64]) -> Result<Vec<f64>, DecoderError> {
        self.check_len("latent vector", z, self.shape.latent_dim)?;
        self.check_len("observation", y, self.shape.output_dim)?;
        let mut ws = Workspace::new(self.shape);
        let mut out = alloc::vec![0.0; self.shape.latent_dim];
        self.grad_z_into(z, y, &mut ws, &mut out);
        Ok(out)
    }

    /// Gradient of `-(1/S) sum_u ln N(y_u; h(z_u), I)` with respect to every
    /// weight and bias.
    pub fn grad_params(&self, samples: &[(&[f64], &[f64])]) -> Result<DecoderParams, DecoderError> {
        if samples.is_empty() {
            return Err(DecoderError::NoSamples);
        }
        let mut grad = DecoderParams::zeros(self.shape)?;
        let mut ws = Workspace::new(self.shape);
        let weight = 1.0 / samples.len() as f64;
        for (z, y) in samples {
            self.check_len("latent vector", z, self.shape.latent_dim)?;
            self.check_len("observation", y, self.shape.output_dim)?;
            self.accumulate_neg_loglik_grad(z, y, weight, &mut ws, &mut grad);
        }
        Ok(grad)
    }

    pub(crate) fn forward_into(&self, z: &[f64], ws: &mut Workspace) {
        let DecoderShape {
            latent_dim: d,
            hidden1: h1,
            hidden2: h2,
            ..
        } = self.shape;
        let (w1, b1, w2, b2, w3, b3) = (self.w1(), self.b1(), self.w2(), self.b2(), self.w3(), self.b3());
        for (j, a) in ws.h1.iter_mut().enumerate() {
            let pre = b1[j] + dot(&w1[j * d..(j + 1) * d], z);
            *a = if pre > 0.0 { pre } else { 0.0 };
        }
        for (j, a) in ws.h2.iter_mut().enumerate() {
            let pre = b2[j] + dot(&w2[j * h1..(j + 1) * h1], &ws.h1);
            *a = if pre > 0.0 { pre } else { 0.0 };
        }
        for ((o, w_row), b) in ws.out.iter_mut().zip(w3.chunks_exact(h2)).zip(b3) {
            *o = b + dot(w_row, &ws.h2);
        }
    }

    /// Backpropagates an output-space vector `r` (stored in `ws.resid`) to
    /// the hidden layers, filling `ws.delta2` and `ws.delta1`.
    fn backprop_hidden(&self, ws: &mut Workspace) {
        let h1 = self.shape.hidden1;
        let h2 = self.shape.hidden2;
        ws.delta2.fill(0.0);
        for (r, w_row) in ws.resid.iter().zip(self.w3().chunks_exact(h2)) {
            axpy(*r, w_row, &mut ws.delta2);
        }
        for (dl, a) in ws.delta2.iter_mut().zip(&ws.h2) {
            if *a <= 0.0 {
                *dl = 0.0;
            }
        }
        ws.delta1.fill(0.0);
        for (dl, w_row) in ws.delta2.iter().zip(self.w2().chunks_exact(h1)) {
            if *dl != 0.0 {
                axpy(*dl, w_row, &mut ws.delta1);
            }
        }
        for (dl, a) in ws.delta1.iter_mut().zip(&ws.h1) {
            if *a <= 0.0 {
                *dl = 0.0;
            }
        }
    }

    /// Writes `J^T (y - h(z))` into `out` and returns `ln N(y; h(z), I)`.
    pub(crate) fn grad_z_into(&self, z: &[f64], y: &[f64], ws: &mut Workspace, out: &mut [f64]) -> f64 {
        self.forward_into(z, ws);
        let mut ss = 0.0;
        for ((r, yo), o) in ws.resid.iter_mut().zip(y).zip(&ws.out) {
            *r = yo - o;
            ss += *r * *r;
        }
        self.backprop_hidden(ws);
        let d = self.shape.latent_dim;
        out.fill(0.0);
        for (dl, w_row) in ws.delta1.iter().zip(self.w1().chunks_exact(d)) {
            if *dl != 0.0 {
                axpy(*dl, w_row, out);
            }
        }
        -0.5 * (y.len() as f64) * LN_2PI - 0.5 * ss
    }

    /// Adds `weight * grad(-ln N(y; h(z), I))` into `grad`; returns the
    /// log-likelihood at `z`.
    pub(crate) fn accumulate_neg_loglik_grad(
        &self,
        z: &[f64],
        y: &[f64],
        weight: f64,
        ws: &mut Workspace,
        grad: &mut DecoderParams,
    ) -> f64 {
        let DecoderShape {
            latent_dim: d,
            hidden1: h1,
            hidden2: h2,
            ..
        } = self.shape;
        self.forward_into(z, ws);
        let mut ss = 0.0;
        for ((r, yo), o) in ws.resid.iter_mut().zip(y).zip(&ws.out) {
            // derivative of 0.5 * ||y - h||^2 with respect to h
            *r = o - yo;
            ss += *r * *r;
        }
        self.backprop_hidden(ws);

        let [bw1, bb1, bw2, bb2, bw3, bb3] = self.shape.blocks();
        let g = &mut grad.data;
        axpy(weight, &ws.resid, &mut g[bb3.0..bb3.0 + bb3.1]);
        for (r, g_row) in ws.resid.iter().zip(g[bw3.0..bw3.0 + bw3.1].chunks_exact_mut(h2)) {
            axpy(weight * r, &ws.h2, g_row);
        }
        axpy(weight, &ws.delta2, &mut g[bb2.0..bb2.0 + bb2.1]);
        for (dl, g_row) in ws.delta2.iter().zip(g[bw2.0..bw2.0 + bw2.1].chunks_exact_mut(h1)) {
            if *dl != 0.0 {
                axpy(weight * dl, &ws.h1, g_row);
            }
        }
        axpy(weight, &ws.delta1, &mut g[bb1.0..bb1.0 + bb1.1]);
        for (dl, g_row) in ws.delta1.iter().zip(g[bw1.0..bw1.0 + bw1.1].chunks_exact_mut(d)) {
            if *dl != 0.0 {
                axpy(weight * dl, z, g_row);
            }
        }
        -0.5 * (y.len() as f64) * LN_2PI - 0.5 * ss
    }
}

/// Scratch buffers for one forward/backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub(crate) out: Vec<f64>,
    resid: Vec<f64>,
    delta1: Vec<f64>,
    delta2: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(shape: DecoderShape) -> Self {
        Self {
            h1: alloc::vec![0.0; shape.hidden1],
            h2: alloc::vec![0.0; shape.hidden2],
            out: alloc::vec![0.0; shape.output_dim],
            resid: alloc::vec![0.0; shape.output_dim],
            delta1: alloc::vec![0.0; shape.hidden1],
            delta2: alloc::vec![0.0; shape.hidden2],
        }
    }
}

/// Log density of `N(mean, I)` at `y`.
pub fn gaussian_loglik(y: &[f64], mean: &[f64]) -> Result<f64, DecoderError> {
    if y.len() != mean.len() {
        return Err(DecoderError::ShapeMismatch {
            what: "mean vector",
            expected: y.len(),
            found: mean.len(),
        });
    }
    let ss: f64 = y.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(-0.5 * y.len() as f64 * LN_2PI - 0.5 * ss)
}

/// First and second moment accumulators for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shape: DecoderShape) -> Self {
        let n = shape.n_params();
        Self {
            m: alloc::vec![0.0; n],
            v: alloc::vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    /// Restores a saved optimizer state.
    pub fn from_parts(m: Vec<f64>, v: Vec<f64>, step: u64) -> Result<Self, DecoderError> {
        if m.len() != v.len() {
            return Err(DecoderError::ShapeMismatch {
                what: "second moment",
                expected: m.len(),
                found: v.len(),
            });
        }
        Ok(Self {
            m,
            v,
            step,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        })
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut DecoderParams,
    state: &mut AdamState,
    grad: &DecoderParams,
    lr: f64,
) -> Result<(), DecoderError> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(DecoderError::InvalidLearningRate(lr));
    }
    if grad.shape != params.shape {
        return Err(DecoderError::ShapeMismatch {
            what: "gradient",
            expected: params.n_params(),
            found: grad.n_params(),
        });
    }
    if state.m.len() != params.n_params() {
        return Err(DecoderError::ShapeMismatch {
            what: "adam state",
            expected: params.n_params(),
            found: state.m.len(),
        });
    }
    if let Some(index) = grad.data.iter().position(|g| !g.is_finite()) {
        return Err(DecoderError::NonFiniteGradient { index });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(state.beta1, t as f64);
    let c2 = 1.0 - libm::pow(state.beta2, t as f64);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((p, g), m), v) in params
        .data
        .iter_mut()
        .zip(&grad.data)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
    }
    Ok(())
}
