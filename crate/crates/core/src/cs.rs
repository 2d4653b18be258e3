//! Seeded random measurement operators and CoSaMP sparse recovery.
//!
//! Measurement matrices are never transmitted. A matrix is fully determined
//! by `(seed, rows, cols)`: entries are drawn row-major from a ChaCha8 stream
//! seeded with `seed` as i.i.d. standard normals scaled by `1/sqrt(rows)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{self, SignalVector};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("measurement count {rows} must lie in 1..={cols}")]
    Dimension { rows: usize, cols: usize },
    #[error("sparsity must be at least 1")]
    ZeroSparsity,
    #[error("sparsity {sparsity} exceeds the {measurements} available measurements")]
    Infeasible {
        sparsity: usize,
        measurements: usize,
    },
    #[error("length mismatch: {expected} vs {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("SNR is undefined for an all-zero original signal")]
    ZeroSignal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub seed: u64,
    entries: DMatrix<f64>,
}

impl MeasurementMatrix {
    pub fn generate(seed: u64, rows: usize, cols: usize) -> Result<Self, RecoveryError> {
        if rows == 0 || rows > cols {
            return Err(RecoveryError::Dimension { rows, cols });
        }
        let mut rng = seed::rng(seed);
        let scale = 1.0 / (rows as f64).sqrt();
        let draws: Vec<f64> = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(Self {
            seed,
            entries: DMatrix::from_row_slice(rows, cols, &draws),
        })
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.entries * DVector::from_column_slice(x))
            .iter()
            .copied()
            .collect()
    }

    /// Operator acting on DCT coefficients: `Phi * Psi^T`. Row `r` is the
    /// DCT of row `r` of `Phi`.
    pub fn in_dct_basis(&self) -> DMatrix<f64> {
        let (rows, cols) = self.entries.shape();
        let mut out = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            let row: Vec<f64> = self.entries.row(r).iter().copied().collect();
            let transformed = field::dct_forward_unflushed(&row);
            for (c, v) in transformed.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }
}

/// Measurement vector plus the metadata needed to regenerate its matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub values: Vec<f64>,
    pub matrix_seed: u64,
    pub signal_length: usize,
    pub sparsity_hint: usize,
}

impl Measurements {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn matrix(&self) -> Result<MeasurementMatrix, RecoveryError> {
        MeasurementMatrix::generate(self.matrix_seed, self.rows(), self.signal_length)
    }

    pub fn with_sparsity(mut self, k: usize) -> Self {
        self.sparsity_hint = k;
        self
    }
}

/// `y = Phi x` with `Phi` regenerated from `(seed, m, len(x))`.
pub fn measure(x: &SignalVector, m: usize, seed: u64) -> Result<Measurements, RecoveryError> {
    let phi = MeasurementMatrix::generate(seed, m, x.len())?;
    Ok(Measurements {
        values: phi.apply(x.values()),
        matrix_seed: seed,
        signal_length: x.len(),
        sparsity_hint: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryModel {
    Plain,
    #[default]
    DctModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Halting threshold on `||r|| / ||y||`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub model: RecoveryModel,
    /// Low-frequency band for the DCT model; `None` means `max(4K, 16)`.
    #[serde(default)]
    pub band: Option<usize>,
}

fn default_iterations() -> usize {
    50
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            max_iterations: default_iterations(),
            tolerance: default_tolerance(),
            model: RecoveryModel::DctModel,
            band: None,
        }
    }
}

impl RecoveryConfig {
    pub fn plain() -> Self {
        Self {
            model: RecoveryModel::Plain,
            ..Self::default()
        }
    }

    pub fn band_for(&self, k: usize) -> usize {
        self.band.unwrap_or_else(|| (4 * k).max(16))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Estimate in the recovered domain: signal values for plain CoSaMP,
    /// DCT coefficients for the model-based variant.
    pub estimate: SignalVector,
    pub support: Vec<usize>,
    pub iterations: usize,
    /// `||y - A x||` after each accepted iteration, starting from `||y||`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// A restricted least-squares system was rank deficient.
    pub degraded: bool,
}

impl Recovery {
    pub fn relative_residual(&self) -> f64 {
        let first = self.residual_history[0];
        if first == 0.0 {
            0.0
        } else {
            self.residual_history.last().copied().unwrap_or(0.0) / first
        }
    }
}

/// Plain CoSaMP: adjoint proxy, 2K largest, merge, restricted least
/// squares, prune to K.
pub fn cosamp(y: &Measurements, k: usize, cfg: &RecoveryConfig) -> Result<Recovery, RecoveryError> {
    let phi = y.matrix()?;
    cosamp_with(phi.entries(), &y.values, k, cfg, None)
}

/// CoSaMP over DCT coefficients with the low-frequency support model: the
/// K lowest indices are always candidates, data-driven picks and pruning are
/// confined to the first `band` coefficients.
pub fn cosamp_dct_model(
    y: &Measurements,
    k: usize,
    cfg: &RecoveryConfig,
) -> Result<Recovery, RecoveryError> {
    let phi = y.matrix()?;
    let operator = phi.in_dct_basis();
    cosamp_with(&operator, &y.values, k, cfg, Some(cfg.band_for(k)))
}

/// Recovers a signal that is sparse in the DCT domain from measurements of
/// its node values, returning node-domain values. `cfg.model` selects plain
/// CoSaMP support selection over all coefficients or the low-frequency model.
pub fn recover_from_dct(
    y: &Measurements,
    k: usize,
    cfg: &RecoveryConfig,
) -> Result<(SignalVector, Recovery), RecoveryError> {
    let phi = y.matrix()?;
    let operator = phi.in_dct_basis();
    let band = match cfg.model {
        RecoveryModel::Plain => None,
        RecoveryModel::DctModel => Some(cfg.band_for(k)),
    };
    let rec = cosamp_with(&operator, &y.values, k, cfg, band)?;
    Ok((field::dct_inverse(&rec.estimate), rec))
}

pub(crate) fn cosamp_with(
    a: &DMatrix<f64>,
    y: &[f64],
    k: usize,
    cfg: &RecoveryConfig,
    band: Option<usize>,
) -> Result<Recovery, RecoveryError> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(RecoveryError::LengthMismatch {
            expected: m,
            actual: y.len(),
        });
    }
    if k == 0 {
        return Err(RecoveryError::ZeroSparsity);
    }
    if k > m {
        return Err(RecoveryError::Infeasible {
            sparsity: k,
            measurements: m,
        });
    }
    let y = DVector::from_column_slice(y);
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Ok(Recovery {
            estimate: SignalVector::zeros(n),
            support: Vec::new(),
            iterations: 1,
            residual_history: vec![0.0],
            converged: true,
            degraded: false,
        });
    }

    let forced = band.map_or(0, |b| k.min(b.min(n)));
    let band = band.map_or(n, |b| b.min(n));
    let mut estimate = vec![0.0; n];
    let mut support: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    let mut history = vec![y_norm];
    let mut degraded = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations.max(1) {
        iterations += 1;
        let proxy = a.transpose() * &residual;
        let proxy = proxy.as_slice();

        let mut merged: Vec<usize> = Vec::with_capacity(4 * k);
        let mut seen = vec![false; n];
        let mut push = |i: usize, merged: &mut Vec<usize>| {
            if !seen[i] && merged.len() < m {
                seen[i] = true;
                merged.push(i);
            }
        };
        for &i in &support {
            push(i, &mut merged);
        }
        for i in 0..forced {
            push(i, &mut merged);
        }
        for i in field::top_k_indices(&proxy[..band], 2 * k) {
            push(i, &mut merged);
        }

        let (solution, rank_deficient) = restricted_least_squares(a, &y, &merged);
        degraded |= rank_deficient;
        let mut wide = vec![0.0; n];
        for (&i, &v) in merged.iter().zip(solution.iter()) {
            wide[i] = v;
        }
        let mut next_support = field::top_k_indices(&wide[..band], k);
        next_support.retain(|&i| wide[i] != 0.0);
        next_support.sort_unstable();
        let mut next = vec![0.0; n];
        for &i in &next_support {
            next[i] = wide[i];
        }

        let next_residual = &y - a * DVector::from_column_slice(&next);
        let r_norm = next_residual.norm();
        let previous = *history.last().expect("history starts with ||y||");
        if r_norm > previous {
            // keep the residual sequence monotone: stop at the better iterate
            break;
        }
        let stalled = next_support == support && r_norm >= previous;
        estimate = next;
        support = next_support;
        residual = next_residual;
        history.push(r_norm);
        if r_norm <= cfg.tolerance * y_norm {
            converged = true;
            break;
        }
        if stalled {
            break;
        }
    }

    Ok(Recovery {
        estimate: SignalVector::from_raw(estimate),
        support,
        iterations,
        residual_history: history,
        converged,
        degraded,
    })
}

/// Least squares on a column subset via SVD. Returns the solution and
/// whether the restricted matrix was numerically rank deficient.
fn restricted_least_squares(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    columns: &[usize],
) -> (Vec<f64>, bool) {
    if columns.is_empty() {
        return (Vec::new(), false);
    }
    let sub = a.select_columns(columns);
    let svd = sub.svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    let rank_deficient = smallest <= 1e-10 * largest;
    let solution = svd
        .solve(y, 1e-12 * largest)
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; columns.len()]);
    (solution, rank_deficient)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    /// Recovery error is exactly zero.
    Exact,
    Decibels(f64),
}

impl Snr {
    /// Decibels, with exact recovery mapped to `+inf`.
    pub fn db(&self) -> f64 {
        match self {
            Snr::Exact => f64::INFINITY,
            Snr::Decibels(v) => *v,
        }
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Exact => f.write_str("exact"),
            Snr::Decibels(v) => write!(f, "{v}"),
        }
    }
}

/// `10 log10(||x||^2 / ||x - x_hat||^2)`.
pub fn snr(original: &SignalVector, recovered: &SignalVector) -> Result<Snr, RecoveryError> {
    if original.len() != recovered.len() {
        return Err(RecoveryError::LengthMismatch {
            expected: original.len(),
            actual: recovered.len(),
        });
    }
    let power: f64 = original.values().iter().map(|v| v * v).sum();
    if power == 0.0 {
        return Err(RecoveryError::ZeroSignal);
    }
    let error: f64 = original
        .values()
        .iter()
        .zip(recovered.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if error == 0.0 {
        return Ok(Snr::Exact);
    }
    Ok(Snr::Decibels(10.0 * (power / error).log10()))
}
