//! Cost-driven representation learning.
//!
//! For every step the cumulative cost over a short window is regressed on a
//! quadratic form of the history. The fitted matrix is factored at the latent
//! rank, giving a linear map from histories to latent states. Steps inside the
//! controllability window additionally have small singular values truncated.

use alloc::vec::Vec;

use crate::error::{bail_validation, Error, Result};
use crate::linalg::{eig_sym_desc, low_rank_factor, svd_desc, trunc_sv, Matrix, Vector};
use crate::quadreg::{cumulative_targets, fit_quadratic, QuadRegOptions};
pub use crate::sim::build_history;
use crate::sim::{history_dim, Dataset};
use crate::system::validate_windows;

/// Default multiplier of the automatic truncation threshold.
pub const DEFAULT_THRESHOLD_MULTIPLIER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Fixed(f64),
    /// `multiplier * sqrt(ell (d_y + d_u)) * d_x^{3/4} * n^{-1/4}`.
    Auto { multiplier: f64 },
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Auto {
            multiplier: DEFAULT_THRESHOLD_MULTIPLIER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorelConfig {
    pub latent_dim: usize,
    pub ell: usize,
    pub m: usize,
    pub threshold: Threshold,
    pub regression: QuadRegOptions,
}

impl CorelConfig {
    pub fn new(latent_dim: usize, ell: usize, m: usize) -> Self {
        Self {
            latent_dim,
            ell,
            m,
            threshold: Threshold::default(),
            regression: QuadRegOptions::default(),
        }
    }

    /// Truncation threshold for a dataset of `n` trajectories.
    pub fn resolve_threshold(&self, n: usize, obs_dim: usize, control_dim: usize) -> f64 {
        match self.threshold {
            Threshold::Fixed(theta) => theta,
            Threshold::Auto { multiplier } => {
                let width = libm::sqrt((self.ell * (obs_dim + control_dim)) as f64);
                multiplier * width * libm::pow(self.latent_dim as f64, 0.75) * libm::pow(n as f64, -0.25)
            }
        }
    }

    fn validate(&self, horizon: usize) -> Result<()> {
        if self.latent_dim < 1 {
            bail_validation!("latent dimension must be at least 1");
        }
        validate_windows(self.ell, self.m, horizon)?;
        let ok = match self.threshold {
            Threshold::Fixed(t) => t >= 0.0 && t.is_finite(),
            Threshold::Auto { multiplier } => multiplier >= 0.0 && multiplier.is_finite(),
        };
        if !ok {
            bail_validation!("truncation threshold must be finite and nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub n_hat_fro: f64,
    pub b_hat: f64,
    pub residual_rms: f64,
    /// Number of nonzero singular values of the learned block.
    pub kept_rank: usize,
}

/// Learned maps from histories to latent states, one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRepresentation {
    pub blocks: Vec<Matrix>,
    /// Fitted quadratic-form matrices before factorization.
    pub quadratic_forms: Vec<Matrix>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub threshold: f64,
    pub samples: usize,
}

impl StateRepresentation {
    pub fn horizon(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn latent_dim(&self) -> usize {
        self.blocks[0].nrows()
    }
}

/// Latent states `zhat_t = M_t h_t` together with the observed controls and costs.
///
/// Matrices are indexed by step and hold one trajectory per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDataset {
    pub latents: Vec<Matrix>,
    pub controls: Vec<Matrix>,
    pub costs: Vec<Vector>,
}

impl LatentDataset {
    pub fn len(&self) -> usize {
        self.costs[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn horizon(&self) -> usize {
        self.latents.len() - 1
    }

    pub fn latent(&self, t: usize, i: usize) -> Vector {
        self.latents[t].row(i).transpose()
    }
}

/// Histories of every trajectory at step `t`, one per row.
pub fn history_matrix(ds: &Dataset, t: usize) -> Matrix {
    let d = history_dim(t, ds.obs_dim, ds.control_dim);
    let mut out = Matrix::zeros(ds.len(), d);
    for (i, view) in ds.learner_views().enumerate() {
        let mut col = 0;
        for v in view.observations[..=t].iter().chain(&view.controls[..t]) {
            for &x in v.iter() {
                out[(i, col)] = x;
                col += 1;
            }
        }
    }
    out
}

fn positive_rank(m: &Matrix) -> usize {
    let sv = svd_desc(m).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 0.0 && s > 1e-12 * top).count()
}

/// Learns the representation and the latent dataset.
pub fn corel(ds: &Dataset, cfg: &CorelConfig, control_costs: &[Matrix]) -> Result<(StateRepresentation, LatentDataset)> {
    let horizon = ds.horizon;
    cfg.validate(horizon)?;
    ds.validate()?;
    let n = ds.len();
    let theta = cfg.resolve_threshold(n, ds.obs_dim, ds.control_dim);
    let targets = cumulative_targets(ds, control_costs, cfg.ell, cfg.m)?;

    let mut blocks = Vec::with_capacity(horizon + 1);
    let mut quadratic_forms = Vec::with_capacity(horizon + 1);
    let mut diagnostics = Vec::with_capacity(horizon + 1);
    let mut latents = Vec::with_capacity(horizon + 1);
    for (t, target) in targets.iter().enumerate() {
        let hist = history_matrix(ds, t);
        let fit = fit_quadratic(&hist, target, &cfg.regression)?;
        let factor = low_rank_factor(&fit.n_hat, cfg.latent_dim)?.factor;
        let block = if t < cfg.ell { trunc_sv(&factor, theta)? } else { factor };
        latents.push(&hist * block.transpose());
        diagnostics.push(StepDiagnostics {
            n_hat_fro: fit.n_hat.norm(),
            b_hat: fit.b_hat,
            residual_rms: fit.residual_rms,
            kept_rank: positive_rank(&block),
        });
        blocks.push(block);
        quadratic_forms.push(fit.n_hat);
    }

    let controls = (0..horizon)
        .map(|t| Matrix::from_fn(n, ds.control_dim, |i, j| ds.trajectories[i].controls[t][j]))
        .collect();
    let costs = (0..=horizon)
        .map(|t| Vector::from_iterator(n, ds.learner_views().map(|v| v.costs[t])))
        .collect();
    Ok((
        StateRepresentation {
            blocks,
            quadratic_forms,
            diagnostics,
            threshold: theta,
            samples: n,
        },
        LatentDataset {
            latents,
            controls,
            costs,
        },
    ))
}

/// Rank suggested by the largest ratio between consecutive eigenvalues of a
/// fitted quadratic form, or `None` when no eigenvalue is above the noise floor.
///
/// The floor is the larger of a relative cutoff and the magnitude of the most
/// negative eigenvalue, which estimates the noise level of the fit.
pub fn spectral_gap_rank(n_hat: &Matrix) -> Result<Option<usize>> {
    let values = eig_sym_desc(n_hat)?.values;
    let top = values.iter().copied().fold(0.0, f64::max);
    let most_negative = values.iter().copied().fold(0.0, f64::min);
    let floor = (1e-12 * top).max(-most_negative).max(f64::MIN_POSITIVE);
    let positive: Vec<f64> = values.iter().copied().filter(|&v| v > floor).collect();
    if positive.is_empty() {
        return Ok(None);
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..positive.len() {
        let next = positive.get(i + 1).copied().unwrap_or(floor);
        let ratio = positive[i] / next;
        if ratio > best.1 {
            best = (i + 1, ratio);
        }
    }
    Ok(Some(best.0))
}

/// Majority vote of [`spectral_gap_rank`] over the supplied forms (ties go to
/// the smaller rank).
pub fn discover_rank(forms: &[Matrix]) -> Result<usize> {
    if forms.is_empty() {
        return Err(Error::Discovery("no quadratic forms supplied".into()));
    }
    let mut votes: Vec<(usize, usize)> = Vec::new();
    for f in forms {
        if let Some(r) = spectral_gap_rank(f)? {
            match votes.iter_mut().find(|(rank, _)| *rank == r) {
                Some(entry) => entry.1 += 1,
                None => votes.push((r, 1)),
            }
        }
    }
    votes
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(r, _)| r)
        .ok_or_else(|| Error::Discovery("no positive eigenvalues in any fitted form".into()))
}
