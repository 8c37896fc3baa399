//! Ground-truth baselines computed from the true system: Kalman filtering,
//! LQR, the separation-principle policy and exact/Monte-Carlo policy costs.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{bail_validation, Error, Result};
use crate::linalg::{frob_inner, pairwise_sum, spd_inverse, symmetrize, Matrix, Vector};
use crate::sim::{trajectory_seed, HistoryFeedback, Policy, Simulator};
use crate::system::LqgSystem;

/// Largest condition number accepted when inverting innovation or control
/// Hessian matrices.
pub const MAX_CONDITION: f64 = 1e12;

/// Forward filter Riccati recursion.
///
/// The measurement at step `t` updates the covariance predicted with the
/// dynamics of step `t - 1`; the first update starts from the initial covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSolution {
    /// Pre-update covariances, starting with the initial-state covariance.
    pub predicted: Vec<Matrix>,
    /// Post-update error covariances.
    pub posterior: Vec<Matrix>,
    pub gains: Vec<Matrix>,
    /// Innovation covariances `C S_pred C^T + obs_cov`.
    pub innovation_cov: Vec<Matrix>,
}

pub fn filter_riccati(sys: &LqgSystem) -> Result<FilterSolution> {
    let horizon = sys.horizon();
    let mut predicted = Vec::with_capacity(horizon + 1);
    let mut posterior = Vec::with_capacity(horizon + 1);
    let mut gains = Vec::with_capacity(horizon + 1);
    let mut innovation_cov = Vec::with_capacity(horizon + 1);
    let mut pred = sys.init_cov().clone();
    for t in 0..=horizon {
        let c = sys.c(t);
        let lam = symmetrize(&(c * &pred * c.transpose() + sys.obs_cov(t)));
        let lam_inv = spd_inverse(&lam, MAX_CONDITION, &format!("innovation covariance at t={t}"))?;
        let gain = &pred * c.transpose() * lam_inv;
        let post = symmetrize(&(&pred - &gain * c * &pred));
        if t < horizon {
            let next = symmetrize(&(sys.a(t) * &post * sys.a(t).transpose() + sys.process_cov(t)));
            predicted.push(core::mem::replace(&mut pred, next));
        } else {
            predicted.push(pred.clone());
        }
        posterior.push(post);
        gains.push(gain);
        innovation_cov.push(lam);
    }
    Ok(FilterSolution {
        predicted,
        posterior,
        gains,
        innovation_cov,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub estimates: Vec<Vector>,
    pub innovations: Vec<Vector>,
}

/// Runs the time-varying Kalman filter over one observed history.
pub fn kalman_filter(sys: &LqgSystem, fs: &FilterSolution, observations: &[Vector], controls: &[Vector]) -> Result<FilterOutput> {
    let horizon = sys.horizon();
    if observations.len() != horizon + 1 || controls.len() != horizon {
        bail_validation!(
            "kalman_filter: got {} observations and {} controls for horizon {horizon}",
            observations.len(),
            controls.len()
        );
    }
    let mut estimates = Vec::with_capacity(horizon + 1);
    let mut innovations = Vec::with_capacity(horizon + 1);
    let mut prior = Vector::zeros(sys.state_dim());
    for t in 0..=horizon {
        let innov = &observations[t] - sys.c(t) * &prior;
        let z = &prior + &fs.gains[t] * &innov;
        if t < horizon {
            prior = sys.a(t) * &z + sys.b(t) * &controls[t];
        }
        estimates.push(z);
        innovations.push(innov);
    }
    Ok(FilterOutput {
        estimates,
        innovations,
    })
}

/// Backward control Riccati recursion over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    /// Value matrices; the last one is the supplied terminal matrix.
    pub values: Vec<Matrix>,
    pub gains: Vec<Matrix>,
}

/// Solves the finite-window LQR problem with stage matrices `a[i], b[i],
/// q[i], r[i]` and terminal cost `terminal`. Gains follow `u = K x`.
pub fn control_riccati(a: &[Matrix], b: &[Matrix], q: &[Matrix], r: &[Matrix], terminal: &Matrix) -> Result<LqrSolution> {
    let steps = a.len();
    if b.len() != steps || q.len() != steps || r.len() != steps {
        bail_validation!("control_riccati: sequences must have equal length");
    }
    let mut values = Vec::with_capacity(steps + 1);
    let mut gains = Vec::with_capacity(steps);
    let mut p = symmetrize(terminal);
    values.push(p.clone());
    for t in (0..steps).rev() {
        let bt_p = b[t].transpose() * &p;
        let hess = symmetrize(&(&bt_p * &b[t] + &r[t]));
        let hess_inv = spd_inverse(&hess, MAX_CONDITION, &format!("control Hessian at step {t}"))?;
        let k = -(hess_inv * bt_p * &a[t]);
        let closed = &a[t] + &b[t] * &k;
        p = symmetrize(&(&q[t] + k.transpose() * &r[t] * &k + closed.transpose() * &p * &closed));
        values.push(p.clone());
        gains.push(k);
    }
    values.reverse();
    gains.reverse();
    Ok(LqrSolution { values, gains })
}

/// Full-horizon LQR of a system with terminal cost `Q_T`.
pub fn system_lqr(sys: &LqgSystem) -> Result<LqrSolution> {
    let p = sys.parts();
    let horizon = sys.horizon();
    control_riccati(&p.a, &p.b, &p.q[..horizon], &p.r, &p.q[horizon])
}

/// Linear map from the stacked history to the filter estimate, per step.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRepresentation {
    pub blocks: Vec<Matrix>,
}

impl HistoryRepresentation {
    pub fn apply(&self, t: usize, history: &Vector) -> Vector {
        &self.blocks[t] * history
    }
}

/// Unrolls the filter: `z_t = M_t [y_0..y_t; u_0..u_{t-1}]`.
pub fn build_history_representation(sys: &LqgSystem, fs: &FilterSolution) -> HistoryRepresentation {
    let (dx, dy, du) = (sys.state_dim(), sys.obs_dim(), sys.control_dim());
    let horizon = sys.horizon();
    let mut blocks = Vec::with_capacity(horizon + 1);
    blocks.push(fs.gains[0].clone());
    for t in 0..horizon {
        let update = Matrix::identity(dx, dx) - &fs.gains[t + 1] * sys.c(t + 1);
        let a_bar = &update * sys.a(t);
        let b_bar = &update * sys.b(t);
        let prev = &blocks[t];
        let obs_cols = (t + 1) * dy;
        let mut next = Matrix::zeros(dx, (t + 2) * dy + (t + 1) * du);
        next.columns_mut(0, obs_cols).copy_from(&(&a_bar * prev.columns(0, obs_cols)));
        next.columns_mut(obs_cols, dy).copy_from(&fs.gains[t + 1]);
        let ctl_start = (t + 2) * dy;
        if t > 0 {
            next.columns_mut(ctl_start, t * du)
                .copy_from(&(&a_bar * prev.columns(obs_cols, t * du)));
        }
        next.columns_mut(ctl_start + t * du, du).copy_from(&b_bar);
        blocks.push(next);
    }
    HistoryRepresentation { blocks }
}

/// Inputs for the exact cost of linear state feedback `u_t = K_t x_t`.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackProblem<'a> {
    pub a: &'a [Matrix],
    pub b: &'a [Matrix],
    /// Additive noise covariance entering after step `t`.
    pub noise_cov: &'a [Matrix],
    pub init_cov: &'a Matrix,
    pub gains: &'a [Matrix],
    pub q: &'a [Matrix],
    pub r: &'a [Matrix],
    pub terminal: &'a Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackValue {
    pub cost: f64,
    /// State covariances along the window, including the terminal one.
    pub covariances: Vec<Matrix>,
}

/// Expected cost of a zero-mean linear system under state feedback, by
/// propagating the state covariance.
pub fn evaluate_feedback_exact(p: &FeedbackProblem<'_>) -> Result<FeedbackValue> {
    let steps = p.a.len();
    if [p.b.len(), p.noise_cov.len(), p.gains.len(), p.q.len(), p.r.len()]
        .iter()
        .any(|&l| l != steps)
    {
        bail_validation!("evaluate_feedback_exact: sequences must have equal length");
    }
    let mut cov = symmetrize(p.init_cov);
    let mut covariances = Vec::with_capacity(steps + 1);
    let mut cost = 0.0;
    for t in 0..steps {
        let k = &p.gains[t];
        let stage = &p.q[t] + k.transpose() * &p.r[t] * k;
        cost += frob_inner(&stage, &cov);
        let closed = &p.a[t] + &p.b[t] * k;
        let next = symmetrize(&(&closed * &cov * closed.transpose() + &p.noise_cov[t]));
        covariances.push(core::mem::replace(&mut cov, next));
    }
    cost += frob_inner(p.terminal, &cov);
    covariances.push(cov);
    Ok(FeedbackValue { cost, covariances })
}

/// Covariances of the filter estimate under i.i.d. exploration with
/// standard deviation `sigma_u`.
pub fn latent_covariances(sys: &LqgSystem, fs: &FilterSolution, sigma_u: f64) -> Vec<Matrix> {
    let horizon = sys.horizon();
    let injected = |t: usize| {
        let l = &fs.gains[t];
        l * &fs.innovation_cov[t] * l.transpose()
    };
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(symmetrize(&injected(0)));
    for t in 0..horizon {
        let prev = &out[t];
        let next = sys.a(t) * prev * sys.a(t).transpose()
            + sys.b(t) * sys.b(t).transpose() * (sigma_u * sigma_u)
            + injected(t + 1);
        out.push(symmetrize(&next));
    }
    out
}

/// Covariance of the filter-estimate jump `L_t i_t` injected at each step.
pub fn latent_innovation_covs(fs: &FilterSolution) -> Vec<Matrix> {
    fs.gains
        .iter()
        .zip(&fs.innovation_cov)
        .map(|(l, lam)| symmetrize(&(l * lam * l.transpose())))
        .collect()
}

/// All ground-truth objects of one system.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub filter: FilterSolution,
    pub lqr: LqrSolution,
    pub representation: HistoryRepresentation,
    /// Expected cost of the optimal (separation-principle) policy.
    pub optimal_cost: f64,
}

impl Oracle {
    pub fn new(sys: &LqgSystem) -> Result<Self> {
        let filter = filter_riccati(sys)?;
        let lqr = system_lqr(sys)?;
        let representation = build_history_representation(sys, &filter);
        let optimal_cost = optimal_cost(sys, &filter, &lqr);
        Ok(Self {
            filter,
            lqr,
            representation,
            optimal_cost,
        })
    }

    /// `u_t = K_t M_t h_t`.
    pub fn separation_policy(&self, sys: &LqgSystem) -> Result<HistoryFeedback> {
        let gains = self
            .lqr
            .gains
            .iter()
            .zip(&self.representation.blocks)
            .map(|(k, m)| k * m)
            .collect();
        HistoryFeedback::new(gains, sys.obs_dim(), sys.control_dim())
    }
}

/// Exact optimal cost: LQR value of the filter estimate plus the filtering
/// error penalty `tr(Q_t * posterior_t)`.
pub fn optimal_cost(sys: &LqgSystem, fs: &FilterSolution, lqr: &LqrSolution) -> f64 {
    let injected = latent_innovation_covs(fs);
    let mut terms = Vec::with_capacity(2 * sys.horizon() + 2);
    for (t, inj) in injected.iter().enumerate() {
        terms.push(frob_inner(&lqr.values[t], inj));
    }
    for t in 0..=sys.horizon() {
        terms.push(frob_inner(sys.q(t), &fs.posterior[t]));
    }
    pairwise_sum(&terms)
}

/// Exact expected cost of applying no control at all.
pub fn zero_control_cost(sys: &LqgSystem) -> Result<f64> {
    let p = sys.parts();
    let horizon = sys.horizon();
    let gains: Vec<Matrix> = (0..horizon)
        .map(|_| Matrix::zeros(sys.control_dim(), sys.state_dim()))
        .collect();
    Ok(evaluate_feedback_exact(&FeedbackProblem {
        a: &p.a,
        b: &p.b,
        noise_cov: &p.process_cov,
        init_cov: &p.init_cov,
        gains: &gains,
        q: &p.q[..horizon],
        r: &p.r,
        terminal: &p.q[horizon],
    })?
    .cost)
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            bail_validation!("Monte-Carlo estimate needs at least 2 samples");
        }
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Ok(Self {
            mean,
            stderr: libm::sqrt(var / n as f64),
            samples: n,
        })
    }
}

/// Total cost of rollout `i` of a Monte-Carlo evaluation seeded by `seed`.
pub fn mc_rollout_cost(sim: &Simulator<'_>, policy: &dyn Policy, seed: u64, i: u64) -> Result<f64> {
    Ok(sim.simulate(policy, trajectory_seed(seed, i))?.total_cost())
}

pub fn evaluate_policy_mc(sim: &Simulator<'_>, policy: &dyn Policy, n_mc: usize, seed: u64) -> Result<McEstimate> {
    if n_mc < 2 {
        return Err(Error::Validation("evaluate_policy_mc needs n_mc >= 2".into()));
    }
    let costs = (0..n_mc as u64)
        .map(|i| mc_rollout_cost(sim, policy, seed, i))
        .collect::<Result<Vec<_>>>()?;
    McEstimate::from_samples(&costs)
}
