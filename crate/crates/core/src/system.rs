//! Ground-truth linear time-varying LQG systems, assumption checkers and a
//! random fixture generator.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail_validation, Error, Result};
use crate::linalg::{eig_sym_desc, op_norm, svd_desc, Matrix};

/// Raw matrix sequences of an LQG system, indexed by time step.
///
/// Lengths: `a`, `b`, `r`, `process_cov` have `horizon` entries;
/// `c`, `q`, `obs_cov` have `horizon + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParts {
    pub a: Vec<Matrix>,
    pub b: Vec<Matrix>,
    pub c: Vec<Matrix>,
    pub q: Vec<Matrix>,
    pub r: Vec<Matrix>,
    pub process_cov: Vec<Matrix>,
    pub obs_cov: Vec<Matrix>,
    pub init_cov: Matrix,
}

/// A validated finite-horizon LQG system.
#[derive(Debug, Clone, PartialEq)]
pub struct LqgSystem {
    parts: SystemParts,
    horizon: usize,
    state_dim: usize,
    obs_dim: usize,
    control_dim: usize,
}

fn min_eig(m: &Matrix) -> Result<f64> {
    let e = eig_sym_desc(m)?;
    Ok(e.values.iter().copied().fold(f64::INFINITY, f64::min))
}

fn check_shape(m: &Matrix, rows: usize, cols: usize, what: &str, t: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        bail_validation!(
            "{what}[{t}] has shape {:?}, expected ({rows}, {cols})",
            m.shape()
        );
    }
    if m.iter().any(|x| !x.is_finite()) {
        bail_validation!("{what}[{t}] contains non-finite entries");
    }
    Ok(())
}

fn check_psd(m: &Matrix, what: &str, t: usize) -> Result<()> {
    let scale = m.amax().max(1.0);
    let lo = min_eig(m).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{what}[{t}]: {msg}")),
        other => other,
    })?;
    if lo < -1e-9 * scale {
        bail_validation!("{what}[{t}] is not PSD (min eigenvalue {lo:e})");
    }
    Ok(())
}

impl LqgSystem {
    /// Validates shapes, symmetry and definiteness.
    pub fn new(parts: SystemParts) -> Result<Self> {
        let horizon = parts.a.len();
        if horizon < 1 {
            bail_validation!("horizon must be at least 1");
        }
        let dx = parts.a[0].nrows();
        let du = parts.b.first().map_or(0, |b| b.ncols());
        let dy = parts.c.first().map_or(0, |c| c.nrows());
        if dx < 1 || du < 1 || dy < 1 {
            bail_validation!("dimensions must be positive (d_x={dx}, d_y={dy}, d_u={du})");
        }
        for (name, len, want) in [
            ("B", parts.b.len(), horizon),
            ("R", parts.r.len(), horizon),
            ("process_cov", parts.process_cov.len(), horizon),
            ("C", parts.c.len(), horizon + 1),
            ("Q", parts.q.len(), horizon + 1),
            ("obs_cov", parts.obs_cov.len(), horizon + 1),
        ] {
            if len != want {
                bail_validation!("{name} has {len} entries, expected {want}");
            }
        }
        for t in 0..horizon {
            check_shape(&parts.a[t], dx, dx, "A", t)?;
            check_shape(&parts.b[t], dx, du, "B", t)?;
            check_shape(&parts.r[t], du, du, "R", t)?;
            check_shape(&parts.process_cov[t], dx, dx, "process_cov", t)?;
            check_psd(&parts.process_cov[t], "process_cov", t)?;
            let r_min = min_eig(&parts.r[t])?;
            if r_min <= 0.0 {
                bail_validation!("R[{t}] is not positive definite (min eigenvalue {r_min:e})");
            }
        }
        for t in 0..=horizon {
            check_shape(&parts.c[t], dy, dx, "C", t)?;
            check_shape(&parts.q[t], dx, dx, "Q", t)?;
            check_shape(&parts.obs_cov[t], dy, dy, "obs_cov", t)?;
            check_psd(&parts.q[t], "Q", t)?;
            check_psd(&parts.obs_cov[t], "obs_cov", t)?;
        }
        check_shape(&parts.init_cov, dx, dx, "init_cov", 0)?;
        check_psd(&parts.init_cov, "init_cov", 0)?;
        Ok(Self {
            parts,
            horizon,
            state_dim: dx,
            obs_dim: dy,
            control_dim: du,
        })
    }

    /// Time-invariant system repeated over `horizon` steps.
    #[allow(clippy::too_many_arguments)]
    pub fn time_invariant(
        horizon: usize,
        a: Matrix,
        b: Matrix,
        c: Matrix,
        q: Matrix,
        r: Matrix,
        process_cov: Matrix,
        obs_cov: Matrix,
        init_cov: Matrix,
    ) -> Result<Self> {
        Self::new(SystemParts {
            a: vec_of(&a, horizon),
            b: vec_of(&b, horizon),
            c: vec_of(&c, horizon + 1),
            q: vec_of(&q, horizon + 1),
            r: vec_of(&r, horizon),
            process_cov: vec_of(&process_cov, horizon),
            obs_cov: vec_of(&obs_cov, horizon + 1),
            init_cov,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }
    pub fn control_dim(&self) -> usize {
        self.control_dim
    }
    pub fn parts(&self) -> &SystemParts {
        &self.parts
    }
    pub fn into_parts(self) -> SystemParts {
        self.parts
    }

    pub fn a(&self, t: usize) -> &Matrix {
        &self.parts.a[t]
    }
    pub fn b(&self, t: usize) -> &Matrix {
        &self.parts.b[t]
    }
    pub fn c(&self, t: usize) -> &Matrix {
        &self.parts.c[t]
    }
    pub fn q(&self, t: usize) -> &Matrix {
        &self.parts.q[t]
    }
    pub fn r(&self, t: usize) -> &Matrix {
        &self.parts.r[t]
    }
    pub fn process_cov(&self, t: usize) -> &Matrix {
        &self.parts.process_cov[t]
    }
    pub fn obs_cov(&self, t: usize) -> &Matrix {
        &self.parts.obs_cov[t]
    }
    pub fn init_cov(&self) -> &Matrix {
        &self.parts.init_cov
    }
    pub fn control_costs(&self) -> &[Matrix] {
        &self.parts.r
    }

    /// State transition `A_{to-1} ... A_{from}` (identity when `to == from`).
    pub fn transition(&self, to: usize, from: usize) -> Matrix {
        let mut phi = Matrix::identity(self.state_dim, self.state_dim);
        for s in from..to {
            phi = &self.parts.a[s] * phi;
        }
        phi
    }
}

fn vec_of(m: &Matrix, len: usize) -> Vec<Matrix> {
    (0..len).map(|_| m.clone()).collect()
}

/// Assumption parameters used by checks and the learning pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionParams {
    pub alpha: f64,
    pub rho: f64,
    pub ell: usize,
    pub nu: f64,
    pub m: usize,
    pub mu_sq: f64,
    pub beta: f64,
    pub sigma_v: f64,
}

impl AssumptionParams {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.alpha > 0.0) {
            bail_validation!("alpha must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            bail_validation!("rho must lie in (0, 1)");
        }
        validate_windows(self.ell, self.m, horizon)?;
        if !(self.nu > 0.0 && self.mu_sq > 0.0 && self.beta > 0.0) {
            bail_validation!("nu, mu_sq and beta must be positive");
        }
        Ok(())
    }
}

pub(crate) fn validate_windows(ell: usize, m: usize, horizon: usize) -> Result<()> {
    if ell < 1 || ell > horizon {
        bail_validation!("controllability window {ell} must lie in [1, {horizon}]");
    }
    if m < 1 {
        bail_validation!("cost-observability window must be at least 1");
    }
    Ok(())
}

/// Length of the cost window starting at step `t`: one step before the
/// controllability window has elapsed, otherwise `m` steps clipped at the horizon.
pub fn window_len(t: usize, horizon: usize, ell: usize, m: usize) -> usize {
    if t < ell {
        1
    } else {
        m.min(horizon - t + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub pass: bool,
    /// `(t0, t, ||Phi_{t,t0}||_2)` at the worst ratio against `alpha * rho^(t-t0)`.
    pub worst: (usize, usize, f64),
    pub worst_ratio: f64,
}

pub fn check_stability(sys: &LqgSystem, alpha: f64, rho: f64) -> Result<StabilityReport> {
    if !(alpha > 0.0) || !(rho > 0.0 && rho < 1.0) {
        bail_validation!("check_stability needs alpha > 0 and 0 < rho < 1");
    }
    let horizon = sys.horizon();
    let mut worst = (0, 1, 0.0);
    let mut worst_ratio = f64::NEG_INFINITY;
    for t0 in 0..horizon {
        let mut phi = Matrix::identity(sys.state_dim(), sys.state_dim());
        for t in (t0 + 1)..=horizon {
            phi = sys.a(t - 1) * phi;
            let norm = op_norm(&phi);
            let ratio = norm / (alpha * libm::pow(rho, (t - t0) as f64));
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst = (t0, t, norm);
            }
        }
    }
    Ok(StabilityReport {
        pass: worst_ratio <= 1.0 + 1e-12,
        worst,
        worst_ratio,
    })
}

/// Controllability matrix `[B_t, A_t B_{t-1}, ..., A_t...A_{t-ell+2} B_{t-ell+1}]`.
pub fn controllability_matrix(sys: &LqgSystem, t: usize, ell: usize) -> Matrix {
    let dx = sys.state_dim();
    let du = sys.control_dim();
    let mut out = Matrix::zeros(dx, ell * du);
    let mut prefix = Matrix::identity(dx, dx);
    for j in 0..ell {
        let s = t - j;
        out.columns_mut(j * du, du).copy_from(&(&prefix * sys.b(s)));
        if j + 1 < ell {
            prefix = &prefix * sys.a(s);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityReport {
    pub min_singular_value: f64,
    /// `(t, sigma_min, full_rank)` for every `ell-1 <= t <= T-1`.
    pub per_step: Vec<(usize, f64, bool)>,
}

impl ControllabilityReport {
    pub fn all_full_rank(&self) -> bool {
        self.per_step.iter().all(|s| s.2)
    }
}

pub fn check_controllability(sys: &LqgSystem, ell: usize) -> Result<ControllabilityReport> {
    validate_windows(ell, 1, sys.horizon())?;
    let dx = sys.state_dim();
    let mut per_step = Vec::new();
    let mut min_sv = f64::INFINITY;
    for t in (ell - 1)..sys.horizon() {
        let phi_c = controllability_matrix(sys, t, ell);
        let sv = svd_desc(&phi_c).singular_values;
        let smin = if sv.len() < dx { 0.0 } else { sv[dx - 1] };
        let top = sv.iter().copied().fold(0.0, f64::max);
        let full = sv.len() >= dx && smin > 1e-10 * top.max(f64::MIN_POSITIVE) && smin > 0.0;
        min_sv = min_sv.min(smin);
        per_step.push((t, smin, full));
    }
    Ok(ControllabilityReport {
        min_singular_value: min_sv,
        per_step,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianReport {
    pub gramians: Vec<Matrix>,
    pub windows: Vec<usize>,
    /// Smallest eigenvalue over all steps.
    pub min_eigenvalue: f64,
    pub worst_step: usize,
}

pub fn cost_observability_gramians(sys: &LqgSystem, ell: usize, m: usize) -> Result<GramianReport> {
    validate_windows(ell, m, sys.horizon())?;
    let horizon = sys.horizon();
    let mut gramians = Vec::with_capacity(horizon + 1);
    let mut windows = Vec::with_capacity(horizon + 1);
    let mut min_eigenvalue = f64::INFINITY;
    let mut worst_step = 0;
    for t in 0..=horizon {
        let k = window_len(t, horizon, ell, m);
        let mut g = Matrix::zeros(sys.state_dim(), sys.state_dim());
        let mut phi = Matrix::identity(sys.state_dim(), sys.state_dim());
        for tau in t..(t + k) {
            if tau > t {
                phi = sys.a(tau - 1) * phi;
            }
            g += phi.transpose() * sys.q(tau) * &phi;
        }
        let g = crate::linalg::symmetrize(&g);
        let lo = min_eig(&g)?;
        if lo < min_eigenvalue {
            min_eigenvalue = lo;
            worst_step = t;
        }
        gramians.push(g);
        windows.push(k);
    }
    Ok(GramianReport {
        gramians,
        windows,
        min_eigenvalue,
        worst_step,
    })
}

/// How the random generator shapes the early steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureMode {
    Generic,
    /// Requires `d_u < d_x` and uses a rank-one initial covariance, so the
    /// latent state is rank-deficient during the first steps.
    RankDeficientEarly,
}

/// Parameters of [`random_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSystemSpec {
    pub state_dim: usize,
    pub obs_dim: usize,
    pub control_dim: usize,
    pub horizon: usize,
    /// Operator norm every `A_t` is rescaled to.
    pub rho: f64,
    pub process_noise: f64,
    pub obs_noise: f64,
    pub init_scale: f64,
    pub cost_scale: f64,
    /// Added to `Q_t` as `q_floor * I` for `t < ell` and at the terminal step.
    pub q_floor: f64,
    pub r_floor: f64,
    pub control_cost_scale: f64,
    /// Steps treated as the early regime when placing the cost floor.
    pub ell: usize,
    /// Rank of interior cost matrices; `None` means full rank.
    pub interior_cost_rank: Option<usize>,
    pub mode: FixtureMode,
    /// When set, random factors get singular values spread over
    /// `[1/k, 1]` instead of Gaussian entries, bounding their condition number by `k`.
    pub max_condition: Option<f64>,
}

impl RandomSystemSpec {
    pub fn new(state_dim: usize, obs_dim: usize, control_dim: usize, horizon: usize) -> Self {
        Self {
            state_dim,
            obs_dim,
            control_dim,
            horizon,
            rho: 0.8,
            process_noise: 0.3,
            obs_noise: 0.3,
            init_scale: 1.0,
            cost_scale: 1.0,
            q_floor: 0.5,
            r_floor: 0.5,
            control_cost_scale: 0.5,
            ell: 1,
            interior_cost_rank: None,
            mode: FixtureMode::Generic,
            max_condition: None,
        }
    }
}

const MAX_RANK_RETRIES: usize = 10;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn full_rank_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
    let want = rows.min(cols);
    for _ in 0..MAX_RANK_RETRIES {
        let m = gaussian(rng, rows, cols);
        let sv = svd_desc(&m).singular_values;
        if sv.len() == want && sv[want - 1] > 1e-6 * sv[0] {
            return Ok(m);
        }
    }
    Err(Error::Generation(format!(
        "{what}: no full-rank draw after {MAX_RANK_RETRIES} attempts"
    )))
}

/// `U diag(s) V^T` with Haar-random frames and `s` log-uniform on `[1/kappa, 1]`.
fn conditioned(rng: &mut ChaCha8Rng, rows: usize, cols: usize, kappa: f64) -> Matrix {
    let rank = rows.min(cols);
    let u = gaussian(rng, rows, rank).qr().q();
    let v = gaussian(rng, cols, rank).qr().q();
    let log_k = libm::log(kappa);
    let s = Matrix::from_fn(rank, rank, |i, j| {
        if i == j {
            libm::exp(-log_k * rng.random::<f64>())
        } else {
            0.0
        }
    });
    u * s * v.transpose()
}

/// Draws a random system satisfying the stability, controllability and
/// cost-observability assumptions by construction (stability with `alpha = 1`).
pub fn random_system(spec: &RandomSystemSpec, seed: u64) -> Result<LqgSystem> {
    let (dx, dy, du, horizon) = (spec.state_dim, spec.obs_dim, spec.control_dim, spec.horizon);
    if dx < 1 || dy < 1 || du < 1 || horizon < 1 {
        bail_validation!("random_system: dimensions and horizon must be positive");
    }
    if !(spec.rho > 0.0 && spec.rho < 1.0) {
        bail_validation!("random_system: rho must lie in (0, 1)");
    }
    for (name, v) in [
        ("process_noise", spec.process_noise),
        ("obs_noise", spec.obs_noise),
        ("init_scale", spec.init_scale),
        ("cost_scale", spec.cost_scale),
        ("q_floor", spec.q_floor),
        ("control_cost_scale", spec.control_cost_scale),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            bail_validation!("random_system: {name} must be finite and nonnegative");
        }
    }
    if !(spec.r_floor > 0.0) {
        bail_validation!("random_system: r_floor must be positive");
    }
    if !(spec.obs_noise > 0.0) {
        bail_validation!("random_system: obs_noise must be positive");
    }
    if spec.mode == FixtureMode::RankDeficientEarly && du >= dx {
        bail_validation!("rank_deficient_early mode needs d_u < d_x (got d_u={du}, d_x={dx})");
    }
    let interior_rank = spec.interior_cost_rank.unwrap_or(dx);
    if interior_rank < 1 || interior_rank > dx {
        bail_validation!("interior_cost_rank must lie in [1, {dx}]");
    }

    if let Some(k) = spec.max_condition {
        if !(k >= 1.0) || !k.is_finite() {
            bail_validation!("random_system: max_condition must be finite and at least 1");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = |rng: &mut ChaCha8Rng, rows: usize, cols: usize, what: &str| match spec.max_condition {
        Some(k) => Ok(conditioned(rng, rows, cols, k)),
        None => full_rank_gaussian(rng, rows, cols, what),
    };
    let mut a = Vec::with_capacity(horizon);
    let mut b = Vec::with_capacity(horizon);
    let mut r = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let raw = factor(&mut rng, dx, dx, &format!("A[{t}]"))?;
        let norm = op_norm(&raw);
        a.push(raw * (spec.rho / norm));
        b.push(factor(&mut rng, dx, du, &format!("B[{t}]"))?);
        let h = factor(&mut rng, du, du, "R factor")? * spec.control_cost_scale;
        r.push(crate::linalg::symmetrize(
            &(&h * h.transpose() + Matrix::identity(du, du) * spec.r_floor),
        ));
    }
    let mut c = Vec::with_capacity(horizon + 1);
    let mut q = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        c.push(factor(&mut rng, dy, dx, &format!("C[{t}]"))?);
        let floored = t < spec.ell || t == horizon;
        let rank = if floored { dx } else { interior_rank };
        let g = factor(&mut rng, dx, rank, "Q factor")? * spec.cost_scale;
        let mut qt = &g * g.transpose();
        if floored {
            qt += Matrix::identity(dx, dx) * spec.q_floor;
        }
        q.push(crate::linalg::symmetrize(&qt));
    }
    let process_cov = vec_of(&(Matrix::identity(dx, dx) * (spec.process_noise * spec.process_noise)), horizon);
    let obs_cov = vec_of(&(Matrix::identity(dy, dy) * (spec.obs_noise * spec.obs_noise)), horizon + 1);
    let init_cov = match spec.mode {
        FixtureMode::Generic => Matrix::identity(dx, dx) * (spec.init_scale * spec.init_scale),
        FixtureMode::RankDeficientEarly => {
            let g = gaussian(&mut rng, dx, 1);
            let g = &g / g.norm();
            (&g * g.transpose()) * (spec.init_scale * spec.init_scale)
        }
    };
    LqgSystem::new(SystemParts {
        a,
        b,
        c,
        q,
        r,
        process_cov,
        obs_cov,
        init_cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    fn lti_scalar(horizon: usize, a: f64, q: f64) -> LqgSystem {
        LqgSystem::time_invariant(
            horizon,
            scalar(a),
            scalar(1.0),
            scalar(1.0),
            scalar(q),
            scalar(1.0),
            scalar(0.1),
            scalar(0.1),
            scalar(1.0),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_indefinite_r() {
        let sys = lti_scalar(3, 0.5, 1.0);
        let mut parts = sys.clone().into_parts();
        parts.q.pop();
        assert!(matches!(LqgSystem::new(parts), Err(Error::Validation(_))));
        let mut parts = sys.into_parts();
        parts.r[1] = scalar(0.0);
        assert!(matches!(LqgSystem::new(parts), Err(Error::Validation(_))));
    }

    #[test]
    fn stability_examples() {
        let zero = lti_scalar(4, 0.0, 1.0);
        assert!(check_stability(&zero, 1.0, 0.5).unwrap().pass);

        let sys = LqgSystem::time_invariant(
            5,
            Matrix::identity(2, 2) * 0.9,
            Matrix::identity(2, 1),
            Matrix::identity(1, 2),
            Matrix::identity(2, 2),
            scalar(1.0),
            Matrix::identity(2, 2),
            scalar(1.0),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let rep = check_stability(&sys, 1.0, 0.9).unwrap();
        assert!(rep.pass);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);

        let unstable = lti_scalar(5, 1.1, 1.0);
        let rep = check_stability(&unstable, 1.0, 0.95).unwrap();
        assert!(!rep.pass);
        assert_eq!((rep.worst.0, rep.worst.1), (0, 5));
        let expected = libm::pow(1.1, 5.0) / libm::pow(0.95, 5.0);
        assert!((rep.worst_ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn controllability_examples() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let sys = LqgSystem::time_invariant(
            3,
            a,
            b,
            Matrix::identity(1, 2),
            Matrix::identity(2, 2),
            scalar(1.0),
            Matrix::identity(2, 2),
            scalar(1.0),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let phi = controllability_matrix(&sys, 1, 2);
        assert_eq!(phi, Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let rep = check_controllability(&sys, 2).unwrap();
        assert!((rep.min_singular_value - 1.0).abs() < 1e-12);
        assert!(rep.all_full_rank());

        let mut parts = sys.into_parts();
        parts.b.iter_mut().for_each(|b| b.fill(0.0));
        let rep = check_controllability(&LqgSystem::new(parts).unwrap(), 2).unwrap();
        assert_eq!(rep.min_singular_value, 0.0);
        assert!(!rep.all_full_rank());
    }

    #[test]
    fn gramian_examples() {
        let sys = lti_scalar(4, 0.0, 1.0);
        for m in [1, 2, 5] {
            let rep = cost_observability_gramians(&sys, 1, m).unwrap();
            assert!(rep.gramians.iter().all(|g| (g[(0, 0)] - 1.0).abs() < 1e-15));
        }
        let sys = lti_scalar(6, 1.0, 1.0);
        let rep = cost_observability_gramians(&sys, 1, 3).unwrap();
        assert_eq!(rep.gramians[2][(0, 0)], 3.0);
        assert_eq!(rep.windows, alloc::vec![1, 3, 3, 3, 3, 2, 1]);
        let rep = cost_observability_gramians(&sys, 6, 3).unwrap();
        assert_eq!(&rep.windows[..6], &[1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn random_system_is_stable_and_deterministic() {
        let spec = RandomSystemSpec::new(3, 2, 3, 5);
        let s1 = random_system(&spec, 7).unwrap();
        let s2 = random_system(&spec, 7).unwrap();
        assert_eq!(s1, s2);
        assert!(check_stability(&s1, 1.0, spec.rho + 1e-9).unwrap().pass);
        assert!(check_controllability(&s1, 1).unwrap().all_full_rank());
        assert_ne!(s1, random_system(&spec, 8).unwrap());
    }

    #[test]
    fn rank_deficient_mode_requires_fewer_controls() {
        let mut spec = RandomSystemSpec::new(2, 2, 2, 4);
        spec.mode = FixtureMode::RankDeficientEarly;
        assert!(random_system(&spec, 1).is_err());
        spec.control_dim = 1;
        let sys = random_system(&spec, 1).unwrap();
        let e = eig_sym_desc(sys.init_cov()).unwrap();
        assert!(e.values[1].abs() < 1e-12);
    }
}
