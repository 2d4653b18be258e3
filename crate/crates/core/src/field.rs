//! Sensed data field and the DCT sparsification pipeline.

use std::cell::RefCell;

use rand::Rng;
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deployment::Node;
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("signal must have at least one entry")]
    Empty,
    #[error("signal entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("truncation alpha must lie in (0, 1] (got {0})")]
    Alpha(f64),
    #[error("noise half-width must be non-negative and finite (got {0})")]
    NoiseHalfwidth(f64),
    #[error("bump width must be positive (got {0})")]
    BumpWidth(f64),
}

/// Ordered samples, one per node in ascending node id order (or per
/// coefficient when in the DCT domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalVector(Vec<f64>);

impl SignalVector {
    pub fn new(values: Vec<f64>) -> Result<Self, FieldError> {
        if values.is_empty() {
            return Err(FieldError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(FieldError::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

impl AsRef<[f64]> for SignalVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// DCT-domain coefficients with an explicit support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoefficients {
    pub coefficients: Vec<f64>,
    /// Ascending indices of the nonzero entries.
    pub support: Vec<usize>,
}

impl SparseCoefficients {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn to_signal(&self) -> SignalVector {
        SignalVector(self.coefficients.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: (f64, f64),
    pub width: f64,
    pub amplitude: f64,
}

impl GaussianBump {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        self.amplitude * (-(dx * dx + dy * dy) / (2.0 * self.width * self.width)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    #[serde(default)]
    pub base_level: f64,
    /// Smooth structure on top of the flat base. Empty by default: the
    /// reference experiments sense a flat field with additive noise.
    #[serde(default)]
    pub bumps: Vec<GaussianBump>,
    #[serde(default)]
    pub noise_halfwidth: f64,
    #[serde(default = "default_alpha")]
    pub truncation_alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.01
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            base_level: 0.0,
            bumps: Vec::new(),
            noise_halfwidth: 0.0,
            truncation_alpha: default_alpha(),
            seed: 0,
        }
    }
}

impl FieldConfig {
    pub fn flat(base_level: f64) -> Self {
        Self {
            base_level,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.noise_halfwidth.is_finite() && self.noise_halfwidth >= 0.0) {
            return Err(FieldError::NoiseHalfwidth(self.noise_halfwidth));
        }
        check_alpha(self.truncation_alpha)?;
        if let Some(b) = self
            .bumps
            .iter()
            .find(|b| b.width.is_nan() || b.width <= 0.0)
        {
            return Err(FieldError::BumpWidth(b.width));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<(), FieldError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(FieldError::Alpha(alpha))
    }
}

/// Samples the field at every node, ordered by ascending node id.
pub fn sample_field(config: &FieldConfig, nodes: &[Node]) -> Result<SignalVector, FieldError> {
    config.validate()?;
    let mut ordered: Vec<&Node> = nodes.iter().collect();
    ordered.sort_by_key(|n| n.id);
    let mut rng = seed::rng(seed::derive(config.seed, &[seed::TAG_NOISE]));
    let w = config.noise_halfwidth;
    let values = ordered
        .iter()
        .map(|node| {
            let smooth: f64 = config.bumps.iter().map(|b| b.eval(node.x, node.y)).sum();
            let noise = if w > 0.0 {
                rng.random_range(-w..=w)
            } else {
                0.0
            };
            config.base_level + smooth + noise
        })
        .collect();
    SignalVector::new(values)
}

thread_local! {
    // the planner caches plans by length
    static PLANNER: RefCell<DctPlanner<f64>> = RefCell::new(DctPlanner::new());
}

fn with_plan<R>(len: usize, f: impl FnOnce(&dyn TransformType2And3<f64>) -> R) -> R {
    let plan = PLANNER.with(|cell| cell.borrow_mut().plan_dct2(len));
    f(plan.as_ref())
}

/// Orthonormal DCT-II.
///
/// Coefficients whose magnitude is at the level of floating-point roundoff
/// relative to the input norm are flushed to exactly zero, so a constant
/// input yields a single nonzero (DC) coefficient.
pub fn dct_forward(x: &SignalVector) -> SignalVector {
    let len = x.len();
    if len == 0 {
        return SignalVector(Vec::new());
    }
    let mut buf = dct_forward_unflushed(&x.0);
    let flush = roundoff_floor(x.norm(), len);
    for c in buf.iter_mut() {
        if c.abs() <= flush {
            *c = 0.0;
        }
    }
    SignalVector(buf)
}

pub(crate) fn dct_forward_unflushed(x: &[f64]) -> Vec<f64> {
    let len = x.len();
    let mut buf = x.to_vec();
    with_plan(len, |plan| plan.process_dct2(&mut buf));
    buf[0] *= (1.0 / len as f64).sqrt();
    let ac = (2.0 / len as f64).sqrt();
    for c in buf.iter_mut().skip(1) {
        *c *= ac;
    }
    buf
}

/// Inverse of [`dct_forward`] (orthonormal DCT-III).
pub fn dct_inverse(c: &SignalVector) -> SignalVector {
    let len = c.len();
    if len == 0 {
        return SignalVector(Vec::new());
    }
    let mut buf = c.0.clone();
    // the unnormalized DCT-III halves the first term
    buf[0] *= 2.0 * (1.0 / len as f64).sqrt();
    let ac = (2.0 / len as f64).sqrt();
    for v in buf.iter_mut().skip(1) {
        *v *= ac;
    }
    with_plan(len, |plan| plan.process_dct3(&mut buf));
    SignalVector(buf)
}

fn roundoff_floor(norm: f64, len: usize) -> f64 {
    8.0 * f64::EPSILON * norm * (len as f64).sqrt()
}

/// Number of coefficients kept for a truncation fraction: `ceil(alpha * len)`.
pub fn kept_count(alpha: f64, len: usize) -> usize {
    // guard against 0.01 * 1000 landing a hair above 10
    ((alpha * len as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Keeps the `ceil(alpha * len)` largest-magnitude coefficients (ties go to
/// the lower index) and zeroes the rest.
pub fn truncate(c: &SignalVector, alpha: f64) -> Result<SparseCoefficients, FieldError> {
    check_alpha(alpha)?;
    Ok(truncate_to(c, kept_count(alpha, c.len())))
}

/// Keeps the `k` largest-magnitude coefficients.
pub fn truncate_to(c: &SignalVector, k: usize) -> SparseCoefficients {
    truncate_in_band(c, k, c.len())
}

/// Keeps the `k` largest-magnitude coefficients among indices `0..band`;
/// everything outside the band is zeroed.
pub fn truncate_in_band(c: &SignalVector, k: usize, band: usize) -> SparseCoefficients {
    let band = band.min(c.len());
    let chosen = top_k_indices(&c.0[..band], k);
    let mut coefficients = vec![0.0; c.len()];
    let mut support = Vec::with_capacity(chosen.len());
    for i in chosen {
        if c.0[i] != 0.0 {
            coefficients[i] = c.0[i];
            support.push(i);
        }
    }
    support.sort_unstable();
    SparseCoefficients {
        coefficients,
        support,
    }
}

/// Indices of the `k` largest magnitudes, ties broken by lower index.
pub(crate) fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn estimate_sparsity(c: &SparseCoefficients) -> usize {
    c.sparsity()
}
