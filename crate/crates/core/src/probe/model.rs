use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::attention::softmax;
use super::matrix::{dot, Matrix, TokenMatrix};

/// Hidden-layer nonlinearity of the probe MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    /// tanh approximation of GELU.
    Gelu,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let inner = GELU_C * (x + 0.044715 * x * x * x);
                let t = inner.tanh();
                let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
            }
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Gelu => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Gelu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeShape {
    pub dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub activation: Activation,
}

/// Learnable probe parameters. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub activation: Activation,
    /// Learnable query, length `D`.
    pub query: Vec<f64>,
    /// `D x D`, tokens are row vectors: `K = Z w_key`.
    pub w_key: Matrix,
    /// `D x D`, `V = Z w_value`.
    pub w_value: Matrix,
    /// `D x D_h`.
    pub w_mlp1: Matrix,
    pub b_mlp1: Vec<f64>,
    /// `D_h x D`.
    pub w_mlp2: Matrix,
    pub b_mlp2: Vec<f64>,
    /// `D x C`.
    pub w_cls: Matrix,
    pub b_cls: Vec<f64>,
}

impl ProbeParams {
    pub fn zeros(shape: ProbeShape) -> Self {
        let ProbeShape {
            dim: d,
            hidden: h,
            classes: c,
            activation,
        } = shape;
        Self {
            activation,
            query: vec![0.0; d],
            w_key: Matrix::zeros(d, d),
            w_value: Matrix::zeros(d, d),
            w_mlp1: Matrix::zeros(d, h),
            b_mlp1: vec![0.0; h],
            w_mlp2: Matrix::zeros(h, d),
            b_mlp2: vec![0.0; d],
            w_cls: Matrix::zeros(d, c),
            b_cls: vec![0.0; c],
        }
    }

    /// Weights uniform in `(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn init(shape: ProbeShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(shape);
        let mut fill = |values: &mut [f64], fan_in: usize| {
            let a = 1.0 / (fan_in.max(1) as f64).sqrt();
            for v in values {
                *v = rng.gen_range(-a..a);
            }
        };
        fill(&mut p.query, shape.dim);
        fill(p.w_key.as_mut_slice(), shape.dim);
        fill(p.w_value.as_mut_slice(), shape.dim);
        fill(p.w_mlp1.as_mut_slice(), shape.dim);
        fill(p.w_mlp2.as_mut_slice(), shape.hidden);
        fill(p.w_cls.as_mut_slice(), shape.dim);
        p
    }

    pub fn shape(&self) -> ProbeShape {
        ProbeShape {
            dim: self.query.len(),
            hidden: self.b_mlp1.len(),
            classes: self.b_cls.len(),
            activation: self.activation,
        }
    }

    pub fn dim(&self) -> usize {
        self.query.len()
    }

    pub fn n_classes(&self) -> usize {
        self.b_cls.len()
    }

    /// Parameter tensors in checkpoint order.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 9] {
        [
            ("query", &self.query),
            ("w_key", self.w_key.as_slice()),
            ("w_value", self.w_value.as_slice()),
            ("w_mlp1", self.w_mlp1.as_slice()),
            ("b_mlp1", &self.b_mlp1),
            ("w_mlp2", self.w_mlp2.as_slice()),
            ("b_mlp2", &self.b_mlp2),
            ("w_cls", self.w_cls.as_slice()),
            ("b_cls", &self.b_cls),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            &mut self.query,
            self.w_key.as_mut_slice(),
            self.w_value.as_mut_slice(),
            self.w_mlp1.as_mut_slice(),
            &mut self.b_mlp1,
            self.w_mlp2.as_mut_slice(),
            &mut self.b_mlp2,
            self.w_cls.as_mut_slice(),
            &mut self.b_cls,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha * other`, elementwise.
    pub fn axpy(&mut self, alpha: f64, other: &ProbeParams) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    fn check_tokens(&self, tokens: &TokenMatrix) -> Result<()> {
        if tokens.cols() != self.dim() {
            return Err(Error::domain(format!(
                "tokens have {} dims, probe expects {}",
                tokens.cols(),
                self.dim()
            )));
        }
        if tokens.rows() == 0 {
            return Err(Error::domain("empty token matrix"));
        }
        if !tokens.is_finite() {
            return Err(Error::domain("non-finite token embedding"));
        }
        Ok(())
    }

    /// Roadside half of the probe: attention pooling to one `D` vector.
    ///
    /// Scores use `Z (W_k q)` and the pooled vector `(a^T Z) W_v`, which equal
    /// `softmax(q K^T / sqrt(D)) V` without materializing `K` or `V`.
    pub fn pool(&self, tokens: &TokenMatrix) -> Result<Pooling> {
        self.check_tokens(tokens)?;
        let key_query = self.w_key.mul_vec(&self.query);
        let scale = (self.dim() as f64).sqrt();
        let scores: Vec<f64> = tokens
            .iter_rows()
            .map(|z| dot(z, &key_query) / scale)
            .collect();
        let weights = softmax(&scores);
        let token_mean = tokens.vec_mul(&weights);
        let pooled = self.w_value.vec_mul(&token_mean);
        Ok(Pooling {
            weights,
            token_mean,
            pooled,
        })
    }

    /// Vehicle half: MLP and linear head applied to a pooled vector.
    pub fn decode(&self, pooled: &[f64]) -> Result<Decoding> {
        if pooled.len() != self.dim() {
            return Err(Error::domain(format!(
                "pooled vector has {} dims, probe expects {}",
                pooled.len(),
                self.dim()
            )));
        }
        let mut pre = self.w_mlp1.vec_mul(pooled);
        for (u, b) in pre.iter_mut().zip(&self.b_mlp1) {
            *u += b;
        }
        let hidden: Vec<f64> = pre.iter().map(|&u| self.activation.apply(u)).collect();
        let mut mlp_out = self.w_mlp2.vec_mul(&hidden);
        for (m, b) in mlp_out.iter_mut().zip(&self.b_mlp2) {
            *m += b;
        }
        let mut logits = self.w_cls.vec_mul(&mlp_out);
        for (l, b) in logits.iter_mut().zip(&self.b_cls) {
            *l += b;
        }
        let probs = softmax(&logits);
        Ok(Decoding {
            pre,
            hidden,
            mlp_out,
            logits,
            probs,
        })
    }
}

/// Intermediate values of [`ProbeParams::pool`].
#[derive(Debug, Clone)]
pub struct Pooling {
    pub weights: Vec<f64>,
    /// `a^T Z`, the attention-weighted token average before the value projection.
    pub token_mean: Vec<f64>,
    pub pooled: Vec<f64>,
}

/// Intermediate values of [`ProbeParams::decode`].
#[derive(Debug, Clone)]
pub struct Decoding {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    mlp_out: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutput {
    pub pooled: Vec<f64>,
    pub attn_weights: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn probe_forward(params: &ProbeParams, tokens: &TokenMatrix) -> Result<ProbeOutput> {
    let pool = params.pool(tokens)?;
    let dec = params.decode(&pool.pooled)?;
    Ok(ProbeOutput {
        pooled: pool.pooled,
        attn_weights: pool.weights,
        logits: dec.logits,
        probs: dec.probs,
    })
}

/// Cross-entropy loss and its exact gradient with respect to every parameter.
pub fn probe_backward(
    params: &ProbeParams,
    tokens: &TokenMatrix,
    label: usize,
) -> Result<(f64, ProbeParams)> {
    if label >= params.n_classes() {
        return Err(Error::domain(format!(
            "label {label} out of range for {} classes",
            params.n_classes()
        )));
    }
    let pool = params.pool(tokens)?;
    let dec = params.decode(&pool.pooled)?;
    let loss = -dec.probs[label].max(f64::MIN_POSITIVE).ln();

    let mut g = ProbeParams::zeros(params.shape());

    let mut d_logits = dec.probs.clone();
    d_logits[label] -= 1.0;

    g.w_cls.add_outer(1.0, &dec.mlp_out, &d_logits);
    g.b_cls.copy_from_slice(&d_logits);
    let d_mlp_out = params.w_cls.mul_vec(&d_logits);

    g.w_mlp2.add_outer(1.0, &dec.hidden, &d_mlp_out);
    g.b_mlp2.copy_from_slice(&d_mlp_out);
    let d_hidden = params.w_mlp2.mul_vec(&d_mlp_out);
    let d_pre: Vec<f64> = d_hidden
        .iter()
        .zip(&dec.pre)
        .map(|(dh, &u)| dh * params.activation.derivative(u))
        .collect();

    g.w_mlp1.add_outer(1.0, &pool.pooled, &d_pre);
    g.b_mlp1.copy_from_slice(&d_pre);
    let d_pooled = params.w_mlp1.mul_vec(&d_pre);

    // pooled = (a^T Z) W_v
    g.w_value.add_outer(1.0, &pool.token_mean, &d_pooled);
    let d_token_mean = params.w_value.mul_vec(&d_pooled);

    // token_mean = sum_i a_i z_i, a = softmax(s)
    let d_weights: Vec<f64> = tokens.iter_rows().map(|z| dot(z, &d_token_mean)).collect();
    let mean_d = dot(&pool.weights, &d_weights);
    let d_scores: Vec<f64> = pool
        .weights
        .iter()
        .zip(&d_weights)
        .map(|(a, da)| a * (da - mean_d))
        .collect();

    // s_i = z_i (W_k q) / sqrt(D)
    let scale = (params.dim() as f64).sqrt();
    let mut d_key_query = tokens.vec_mul(&d_scores);
    for v in &mut d_key_query {
        *v /= scale;
    }
    g.w_key.add_outer(1.0, &d_key_query, &params.query);
    g.query = params.w_key.vec_mul(&d_key_query);

    Ok((loss, g))
}

/// Predicted class (lowest index wins ties) and probabilities.
pub fn classify(params: &ProbeParams, tokens: &TokenMatrix) -> Result<(usize, Vec<f64>)> {
    let out = probe_forward(params, tokens)?;
    Ok((argmax(&out.probs), out.probs))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
