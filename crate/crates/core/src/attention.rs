//! Small single-head self-attention encoder used to check mask semantics.
//!
//! Each layer computes `Y = X + softmax(Q K^T / sqrt(d) + B) V` where `B` is
//! `-1e9` at disallowed positions of the mask and untouched elsewhere, so an
//! all-ones mask leaves the computation bit-identical to the unmasked one.

use ndarray::{Array1, Array2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskgen::{AttentionMask, LayerStrategy};

pub const MASK_BIAS: f64 = -1e9;
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    pub layers: usize,
    pub model_dim: usize,
    pub layer_strategy: LayerStrategy,
    pub seed: u64,
    /// Multiply the normalized attention by the mask instead of biasing the
    /// logits. Rows no longer sum to one.
    #[serde(default)]
    pub post_softmax_hadamard: bool,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        ToyEncoderConfig {
            layers: 2,
            model_dim: 8,
            layer_strategy: LayerStrategy::All,
            seed: 0,
            post_softmax_hadamard: false,
        }
    }
}

impl ToyEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        if self.model_dim < 2 {
            return Err(Error::Config("model_dim must be at least 2".into()));
        }
        Ok(())
    }
}

/// Which layers get the mask.
pub fn strategy_schedule(layers: usize, strategy: LayerStrategy) -> Vec<bool> {
    (0..layers)
        .map(|l| match strategy {
            LayerStrategy::All => true,
            LayerStrategy::Alternate => l % 2 == 0,
        })
        .collect()
}

#[derive(Clone, Debug)]
struct LayerWeights {
    wq: Array2<f64>,
    wk: Array2<f64>,
    wv: Array2<f64>,
}

/// Realized attention per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    pub attention: Vec<Array2<f64>>,
    pub mask_applied: Vec<bool>,
}

#[derive(Serialize)]
struct TraceLayer {
    layer: usize,
    mask_applied: bool,
    n: usize,
    weights: Vec<f64>,
}

impl AttentionTrace {
    /// JSON with one entry per layer; `weights` is the dense matrix, row-major.
    pub fn to_json(&self) -> String {
        let layers: Vec<TraceLayer> = self
            .attention
            .iter()
            .zip(&self.mask_applied)
            .enumerate()
            .map(|(layer, (a, &mask_applied))| TraceLayer {
                layer,
                mask_applied,
                n: a.nrows(),
                weights: a.iter().copied().collect(),
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "layers": layers }))
            .expect("trace serializes")
    }
}

// everything the backward pass needs from one layer
struct LayerCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    p: Array2<f64>,
    keep: Option<Array2<f64>>,
}

#[derive(Clone, Debug)]
pub struct ToyEncoder {
    cfg: ToyEncoderConfig,
    weights: Vec<LayerWeights>,
}

impl ToyEncoder {
    pub fn new(cfg: &ToyEncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.model_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let scale = 1.0 / (d as f64).sqrt();
        let dist = Uniform::new_inclusive(-scale, scale);
        let mut draw = || Array2::from_shape_fn((d, d), |_| dist.sample(&mut rng));
        let weights = (0..cfg.layers)
            .map(|_| LayerWeights {
                wq: draw(),
                wk: draw(),
                wv: draw(),
            })
            .collect();
        Ok(ToyEncoder {
            cfg: cfg.clone(),
            weights,
        })
    }

    pub fn config(&self) -> &ToyEncoderConfig {
        &self.cfg
    }

    fn check(&self, inputs: &Array2<f64>, mask: Option<&AttentionMask>) -> Result<()> {
        if inputs.ncols() != self.cfg.model_dim {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} columns, model_dim is {}",
                inputs.ncols(),
                self.cfg.model_dim
            )));
        }
        if let Some(m) = mask {
            if m.n() != inputs.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "mask is {}x{} but there are {} inputs",
                    m.n(),
                    m.n(),
                    inputs.nrows()
                )));
            }
        }
        Ok(())
    }

    fn run(
        &self,
        inputs: &Array2<f64>,
        mask: Option<&AttentionMask>,
    ) -> (Array2<f64>, AttentionTrace, Vec<LayerCache>) {
        let n = inputs.nrows();
        let keep =
            mask.map(|m| Array2::from_shape_fn((n, n), |(i, j)| f64::from(m.allowed(i, j) as u8)));
        let schedule = match mask {
            Some(_) => strategy_schedule(self.cfg.layers, self.cfg.layer_strategy),
            None => vec![false; self.cfg.layers],
        };
        let inv_sqrt_d = 1.0 / (self.cfg.model_dim as f64).sqrt();
        let mut x = inputs.clone();
        let mut trace = AttentionTrace {
            attention: Vec::with_capacity(self.cfg.layers),
            mask_applied: schedule.clone(),
        };
        let mut caches = Vec::with_capacity(self.cfg.layers);
        for (w, &masked) in self.weights.iter().zip(&schedule) {
            let q = x.dot(&w.wq);
            let k = x.dot(&w.wk);
            let v = x.dot(&w.wv);
            let mut s = q.dot(&k.t()) * inv_sqrt_d;
            let layer_keep = if masked { keep.clone() } else { None };
            if let (Some(kp), false) = (&layer_keep, self.cfg.post_softmax_hadamard) {
                s.zip_mut_with(kp, |sij, &allowed| {
                    if allowed == 0.0 {
                        *sij += MASK_BIAS;
                    }
                });
            }
            let mut p = softmax_rows(&s);
            if let (Some(kp), true) = (&layer_keep, self.cfg.post_softmax_hadamard) {
                p *= kp;
            }
            let y = &x + &p.dot(&v);
            trace.attention.push(p.clone());
            caches.push(LayerCache {
                x,
                q,
                k,
                v,
                p,
                keep: layer_keep.filter(|_| self.cfg.post_softmax_hadamard),
            });
            x = y;
        }
        (x, trace, caches)
    }

    pub fn forward(
        &self,
        inputs: &Array2<f64>,
        mask: Option<&AttentionMask>,
    ) -> Result<(Array2<f64>, AttentionTrace)> {
        self.check(inputs, mask)?;
        let (y, trace, _) = self.run(inputs, mask);
        Ok((y, trace))
    }

    /// Gradient of `sum(outputs)` with respect to the inputs.
    pub fn input_gradient(
        &self,
        inputs: &Array2<f64>,
        mask: Option<&AttentionMask>,
    ) -> Result<Array2<f64>> {
        self.check(inputs, mask)?;
        let (y, _, caches) = self.run(inputs, mask);
        let inv_sqrt_d = 1.0 / (self.cfg.model_dim as f64).sqrt();
        let mut dy = Array2::<f64>::ones(y.raw_dim());
        for (cache, w) in caches.iter().zip(&self.weights).rev() {
            // Y = X + P V
            let mut dp = dy.dot(&cache.v.t());
            let dv = cache.p.t().dot(&dy);
            // for the Hadamard variant, the stored P is already multiplied by
            // the mask; recover softmax output rows for the Jacobian
            let p_soft = match &cache.keep {
                Some(kp) => {
                    dp *= kp;
                    let s = cache.q.dot(&cache.k.t()) * inv_sqrt_d;
                    softmax_rows(&s)
                }
                None => cache.p.clone(),
            };
            let row_dot: Array1<f64> = (&dp * &p_soft).sum_axis(Axis(1));
            let ds = &p_soft * &(&dp - &row_dot.insert_axis(Axis(1)));
            let dq = ds.dot(&cache.k) * inv_sqrt_d;
            let dk = ds.t().dot(&cache.q) * inv_sqrt_d;
            let dx = &dy + &dq.dot(&w.wq.t()) + &dk.dot(&w.wk.t()) + &dv.dot(&w.wv.t());
            debug_assert_eq!(dx.raw_dim(), cache.x.raw_dim());
            dy = dx;
        }
        Ok(dy)
    }

    /// Central finite-difference gradient of `sum(outputs)`.
    pub fn numeric_gradient(
        &self,
        inputs: &Array2<f64>,
        mask: Option<&AttentionMask>,
        h: f64,
    ) -> Result<Array2<f64>> {
        self.check(inputs, mask)?;
        let loss = |x: &Array2<f64>| self.run(x, mask).0.sum();
        let mut grad = Array2::zeros(inputs.raw_dim());
        let mut x = inputs.clone();
        for idx in 0..inputs.len() {
            let (i, j) = (idx / inputs.ncols(), idx % inputs.ncols());
            let orig = x[(i, j)];
            x[(i, j)] = orig + h;
            let plus = loss(&x);
            x[(i, j)] = orig - h;
            let minus = loss(&x);
            x[(i, j)] = orig;
            grad[(i, j)] = (plus - minus) / (2.0 * h);
        }
        Ok(grad)
    }
}

fn softmax_rows(s: &Array2<f64>) -> Array2<f64> {
    let mut p = s.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        assert!(total > 0.0, "attention row has no allowed position");
        row /= total;
    }
    p
}

/// Runs one forward pass with a freshly initialized encoder.
pub fn forward(
    inputs: &Array2<f64>,
    mask: &AttentionMask,
    cfg: &ToyEncoderConfig,
) -> Result<(Array2<f64>, AttentionTrace)> {
    ToyEncoder::new(cfg)?.forward(inputs, Some(mask))
}

/// Max elementwise relative error between the analytic and the
/// finite-difference gradient of `sum(outputs)`.
pub fn grad_check(
    inputs: &Array2<f64>,
    mask: &AttentionMask,
    cfg: &ToyEncoderConfig,
) -> Result<f64> {
    let enc = ToyEncoder::new(cfg)?;
    let analytic = enc.input_gradient(inputs, Some(mask))?;
    let numeric = enc.numeric_gradient(inputs, Some(mask), FD_STEP)?;
    Ok(max_relative_error(&analytic, &numeric))
}

pub fn max_relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Deterministic inputs in `[-1, 1]`.
pub fn random_inputs(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    Array2::from_shape_fn((n, d), |_| dist.sample(&mut rng))
}
