//! Latent system identification and certainty-equivalent planning.

use alloc::vec::Vec;

use crate::corel::{LatentDataset, StateRepresentation};
use crate::error::{bail_validation, Result};
use crate::linalg::{min_norm_lstsq, psd_project, Matrix};
use crate::oracle::{control_riccati, LqrSolution};
use crate::quadreg::{fit_quadratic, QuadRegOptions};
use crate::sim::HistoryFeedback;

/// Identified latent dynamics and costs; the control costs are the known ones.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub a: Vec<Matrix>,
    pub b: Vec<Matrix>,
    pub q: Vec<Matrix>,
    pub r: Vec<Matrix>,
}

impl LatentModel {
    pub fn horizon(&self) -> usize {
        self.a.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub gains: Vec<Matrix>,
    pub values: Vec<Matrix>,
}

impl From<LqrSolution> for Controller {
    fn from(s: LqrSolution) -> Self {
        Self {
            gains: s.gains,
            values: s.values,
        }
    }
}

/// Per-step regression of `zhat_{t+1}` on `[zhat_t; u_t]`.
pub fn fit_dynamics(lds: &LatentDataset, rel_tol: f64) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
    let horizon = lds.horizon();
    let n = lds.len();
    if n < 1 {
        bail_validation!("fit_dynamics: empty latent dataset");
    }
    let mut a = Vec::with_capacity(horizon);
    let mut b = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let dx = lds.latents[t].ncols();
        let du = lds.controls[t].ncols();
        let mut x = Matrix::zeros(n, dx + du);
        x.columns_mut(0, dx).copy_from(&lds.latents[t]);
        x.columns_mut(dx, du).copy_from(&lds.controls[t]);
        let w = min_norm_lstsq(&x, &lds.latents[t + 1], rel_tol)?;
        a.push(w.rows(0, dx).transpose());
        b.push(w.rows(dx, du).transpose());
    }
    Ok((a, b))
}

/// Identity cost for `t < ell` and at the horizon; otherwise the PSD
/// projection of a quadratic fit of the state part of the observed cost.
pub fn fit_costs(lds: &LatentDataset, control_costs: &[Matrix], ell: usize, opts: &QuadRegOptions) -> Result<Vec<Matrix>> {
    let horizon = lds.horizon();
    if control_costs.len() != horizon {
        bail_validation!("fit_costs: expected {horizon} control-cost matrices");
    }
    let dx = lds.latents[0].ncols();
    let mut q = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        if t < ell || t == horizon {
            q.push(Matrix::identity(dx, dx));
            continue;
        }
        let u = &lds.controls[t];
        let r = &control_costs[t];
        let targets: Vec<f64> = (0..lds.len())
            .map(|i| {
                let ui = u.row(i).transpose();
                lds.costs[t][i] - (ui.transpose() * r * &ui)[(0, 0)]
            })
            .collect();
        let fit = fit_quadratic(&lds.latents[t], &targets, opts)?;
        q.push(psd_project(&fit.n_hat)?);
    }
    Ok(q)
}

pub fn identify(lds: &LatentDataset, control_costs: &[Matrix], ell: usize, opts: &QuadRegOptions) -> Result<LatentModel> {
    let (a, b) = fit_dynamics(lds, opts.rel_tol)?;
    let q = fit_costs(lds, control_costs, ell, opts)?;
    Ok(LatentModel {
        a,
        b,
        q,
        r: control_costs.to_vec(),
    })
}

/// Certainty-equivalent gains with terminal cost `Q_T`.
pub fn plan(model: &LatentModel) -> Result<Controller> {
    let horizon = model.horizon();
    if model.q.len() != horizon + 1 || model.b.len() != horizon || model.r.len() != horizon {
        bail_validation!("plan: inconsistent model lengths");
    }
    Ok(control_riccati(&model.a, &model.b, &model.q[..horizon], &model.r, &model.q[horizon])?.into())
}

/// History policy `u_t = K_t M_t h_t`.
pub fn assemble_policy(rep: &StateRepresentation, ctl: &Controller, obs_dim: usize, control_dim: usize) -> Result<HistoryFeedback> {
    if ctl.gains.len() + 1 != rep.blocks.len() {
        bail_validation!(
            "controller has {} gains but representation covers {} steps",
            ctl.gains.len(),
            rep.blocks.len()
        );
    }
    let mut gains = Vec::with_capacity(ctl.gains.len());
    for (t, (k, m)) in ctl.gains.iter().zip(&rep.blocks).enumerate() {
        if k.ncols() != m.nrows() {
            bail_validation!("gain {t} has {} columns but the latent dimension is {}", k.ncols(), m.nrows());
        }
        gains.push(k * m);
    }
    HistoryFeedback::new(gains, obs_dim, control_dim)
}
