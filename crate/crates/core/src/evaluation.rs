//! Comparisons against ground truth.
//!
//! Learned objects live in an arbitrary orthonormal gauge. Every comparison
//! first aligns the true normalized representation to the learned one per
//! step, then measures errors or evaluates controllers in the aligned frame.

use alloc::vec::Vec;

use crate::corel::StateRepresentation;
use crate::error::{bail_validation, Error, Result};
use crate::linalg::{op_norm, procrustes_align, symmetrize, Matrix};
use crate::oracle::{
    control_riccati, evaluate_feedback_exact, latent_covariances, latent_innovation_covs, mc_rollout_cost,
    zero_control_cost, FeedbackProblem, McEstimate, Oracle,
};
use crate::sim::{Policy, Simulator};
use crate::sysid::{Controller, LatentModel};
use crate::system::LqgSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Orthonormal `S_t` minimizing `||S_t M*_t - Mhat_t||_F`.
    pub rotations: Vec<Matrix>,
    pub op_errors: Vec<f64>,
    pub fro_errors: Vec<f64>,
}

pub fn representation_error(learned: &[Matrix], truth: &[Matrix]) -> Result<Alignment> {
    if learned.len() != truth.len() {
        bail_validation!("representation_error: {} learned blocks vs {} true blocks", learned.len(), truth.len());
    }
    let mut rotations = Vec::with_capacity(learned.len());
    let mut op_errors = Vec::with_capacity(learned.len());
    let mut fro_errors = Vec::with_capacity(learned.len());
    for (m_hat, m_true) in learned.iter().zip(truth) {
        let s = procrustes_align(m_true, m_hat)?;
        let diff = m_hat - &s * m_true;
        op_errors.push(op_norm(&diff));
        fro_errors.push(diff.norm());
        rotations.push(s);
    }
    Ok(Alignment {
        rotations,
        op_errors,
        fro_errors,
    })
}

/// Ground truth of the normalized system needed for controller evaluation.
#[derive(Debug, Clone)]
pub struct Truth {
    pub system: LqgSystem,
    pub oracle: Oracle,
    /// Covariances of the true latent state under the exploration policy.
    pub exploration_cov: Vec<Matrix>,
    /// Covariances of the per-step latent innovation `L_t i_t`.
    pub innovation_cov: Vec<Matrix>,
    pub zero_control_cost: f64,
}

impl Truth {
    pub fn new(normalized: LqgSystem, sigma_u: f64) -> Result<Self> {
        let oracle = Oracle::new(&normalized)?;
        let exploration_cov = latent_covariances(&normalized, &oracle.filter, sigma_u);
        let innovation_cov = latent_innovation_covs(&oracle.filter);
        let zero_control_cost = zero_control_cost(&normalized)?;
        Ok(Self {
            system: normalized,
            oracle,
            exploration_cov,
            innovation_cov,
            zero_control_cost,
        })
    }

    pub fn zero_gap(&self) -> f64 {
        self.zero_control_cost - self.oracle.optimal_cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    /// Steps `0..ell` with the true value matrix at `ell` as terminal cost.
    Early,
    /// Steps `ell..T` with the true terminal cost.
    Late,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGap {
    pub gap: f64,
    pub learned_cost: f64,
    pub optimal_cost: f64,
}

/// Exact suboptimality of learned gains on one segment of the aligned true
/// latent system.
pub fn controller_suboptimality(truth: &Truth, rotations: &[Matrix], gains: &[Matrix], ell: usize, segment: Segment) -> Result<SegmentGap> {
    let sys = &truth.system;
    let horizon = sys.horizon();
    if rotations.len() != horizon + 1 || gains.len() != horizon {
        bail_validation!("controller_suboptimality: need {} rotations and {horizon} gains", horizon + 1);
    }
    if ell < 1 || ell > horizon {
        bail_validation!("controller_suboptimality: ell must lie in [1, {horizon}]");
    }
    let (start, end) = match segment {
        Segment::Early => (0, ell),
        Segment::Late => (ell, horizon),
    };
    let rot = |t: usize, m: &Matrix| symmetrize(&(&rotations[t] * m * rotations[t].transpose()));
    let steps = start..end;
    let a: Vec<Matrix> = steps.clone().map(|t| &rotations[t + 1] * sys.a(t) * rotations[t].transpose()).collect();
    let b: Vec<Matrix> = steps.clone().map(|t| &rotations[t + 1] * sys.b(t)).collect();
    let q: Vec<Matrix> = steps.clone().map(|t| rot(t, sys.q(t))).collect();
    let r: Vec<Matrix> = steps.clone().map(|t| sys.r(t).clone()).collect();
    let noise: Vec<Matrix> = steps.clone().map(|t| rot(t + 1, &truth.innovation_cov[t + 1])).collect();
    let terminal = match segment {
        Segment::Early => rot(end, &truth.oracle.lqr.values[end]),
        Segment::Late => rot(end, sys.q(end)),
    };
    let init_cov = rot(start, &truth.exploration_cov[start]);
    let best = control_riccati(&a, &b, &q, &r, &terminal)?;
    let cost_of = |g: &[Matrix]| {
        evaluate_feedback_exact(&FeedbackProblem {
            a: &a,
            b: &b,
            noise_cov: &noise,
            init_cov: &init_cov,
            gains: g,
            q: &q,
            r: &r,
            terminal: &terminal,
        })
        .map(|v| v.cost)
    };
    let learned_cost = cost_of(&gains[start..end])?;
    let optimal_cost = cost_of(&best.gains)?;
    Ok(SegmentGap {
        gap: learned_cost - optimal_cost,
        learned_cost,
        optimal_cost,
    })
}

/// All deterministic metrics of one learned pipeline output.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub alignment: Alignment,
    /// `||Nhat_t - M*_t^T M*_t||_F` per step.
    pub quadratic_form_errors: Vec<f64>,
    /// `||Ahat_t - S_{t+1} A_t S_t^T||_2` per step.
    pub dynamics_errors: Vec<f64>,
    /// `||Bhat_t - S_{t+1} B_t||_2` per step.
    pub input_errors: Vec<f64>,
    /// `(t, ||Qhat_t - S_t Q_t S_t^T||_F)` for `ell <= t < T`.
    pub cost_errors: Vec<(usize, f64)>,
    pub ctl_gap_early: SegmentGap,
    pub ctl_gap_late: SegmentGap,
    pub zero_gap: f64,
}

pub fn evaluate(truth: &Truth, rep: &StateRepresentation, model: &LatentModel, ctl: &Controller, ell: usize) -> Result<EvaluationReport> {
    let sys = &truth.system;
    let horizon = sys.horizon();
    let true_blocks = &truth.oracle.representation.blocks;
    let alignment = representation_error(&rep.blocks, true_blocks)?;
    let s = &alignment.rotations;
    let quadratic_form_errors = rep
        .quadratic_forms
        .iter()
        .zip(true_blocks)
        .map(|(n_hat, m)| (n_hat - m.transpose() * m).norm())
        .collect();
    let dynamics_errors = (0..horizon)
        .map(|t| op_norm(&(&model.a[t] - &s[t + 1] * sys.a(t) * s[t].transpose())))
        .collect();
    let input_errors = (0..horizon)
        .map(|t| op_norm(&(&model.b[t] - &s[t + 1] * sys.b(t))))
        .collect();
    let cost_errors = (ell..horizon)
        .map(|t| (t, (&model.q[t] - &s[t] * sys.q(t) * s[t].transpose()).norm()))
        .collect();
    Ok(EvaluationReport {
        quadratic_form_errors,
        dynamics_errors,
        input_errors,
        cost_errors,
        ctl_gap_early: controller_suboptimality(truth, s, &ctl.gains, ell, Segment::Early)?,
        ctl_gap_late: controller_suboptimality(truth, s, &ctl.gains, ell, Segment::Late)?,
        zero_gap: truth.zero_gap(),
        alignment,
    })
}

/// Monte-Carlo estimate of `J(policy) - J(reference)` from paired rollouts
/// that share every noise draw (common random numbers).
pub fn end_to_end_gap(sim: &Simulator<'_>, policy: &dyn Policy, reference: &dyn Policy, n_mc: usize, seed: u64) -> Result<McEstimate> {
    if n_mc < 100 {
        bail_validation!("end_to_end_gap needs n_mc >= 100");
    }
    let diffs = (0..n_mc as u64)
        .map(|i| Ok(mc_rollout_cost(sim, policy, seed, i)? - mc_rollout_cost(sim, reference, seed, i)?))
        .collect::<Result<Vec<f64>>>()?;
    McEstimate::from_samples(&diffs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln n, ln err)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        bail_validation!("rate_fit needs at least 3 points, got {}", points.len());
    }
    if let Some(&(n, e)) = points.iter().find(|(n, e)| !(*n > 0.0) || !(*e > 0.0)) {
        return Err(Error::Validation(alloc::format!(
            "rate_fit needs positive values, got ({n}, {e})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        bail_validation!("rate_fit needs at least two distinct sample sizes");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-24 {
        1.0
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Median of a nonempty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}
