//! Change of state coordinates that turns every cost-observability Gramian
//! into the identity.
//!
//! With `F_t = Gbar_t^{1/2}` the new state is `x'_t = F_t x_t`, giving
//! `A'_t = F_{t+1} A_t F_t^{-1}`, `B'_t = F_{t+1} B_t`, `C'_t = C_t F_t^{-1}`,
//! `Q'_t = F_t^{-1} Q_t F_t^{-1}`, `W'_t = F_{t+1} W_t F_{t+1}` and
//! `X'_0 = F_0 X_0 F_0`. Control costs and observation noise are unchanged.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{eig_sym_desc, op_norm, symmetrize, Matrix};
use crate::system::{cost_observability_gramians, LqgSystem, SystemParts};

/// Smallest Gramian eigenvalue accepted by [`normalize`].
pub const MIN_GRAMIAN_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSystem {
    pub system: LqgSystem,
    /// `Gbar_t^{1/2}` for `t = 0..T`.
    pub forward: Vec<Matrix>,
    /// `Gbar_t^{-1/2}` for `t = 0..T`.
    pub inverse: Vec<Matrix>,
}

pub fn normalize(sys: &LqgSystem, ell: usize, m: usize) -> Result<NormalizedSystem> {
    let report = cost_observability_gramians(sys, ell, m)?;
    let mut forward = Vec::with_capacity(report.gramians.len());
    let mut inverse = Vec::with_capacity(report.gramians.len());
    for (t, g) in report.gramians.iter().enumerate() {
        let eig = eig_sym_desc(g)?;
        let lo = eig.values[eig.values.len() - 1];
        if !(lo > MIN_GRAMIAN_EIGENVALUE) {
            return Err(Error::conditioning(
                format!("cost-observability Gramian at t={t} is near singular"),
                lo,
            ));
        }
        forward.push(eig.reconstruct_with(libm::sqrt));
        inverse.push(eig.reconstruct_with(|l| 1.0 / libm::sqrt(l)));
    }
    let p = sys.parts();
    let horizon = sys.horizon();
    let parts = SystemParts {
        a: (0..horizon).map(|t| &forward[t + 1] * &p.a[t] * &inverse[t]).collect(),
        b: (0..horizon).map(|t| &forward[t + 1] * &p.b[t]).collect(),
        c: (0..=horizon).map(|t| &p.c[t] * &inverse[t]).collect(),
        q: (0..=horizon)
            .map(|t| symmetrize(&(&inverse[t] * &p.q[t] * &inverse[t])))
            .collect(),
        r: p.r.clone(),
        process_cov: (0..horizon)
            .map(|t| symmetrize(&(&forward[t + 1] * &p.process_cov[t] * &forward[t + 1])))
            .collect(),
        obs_cov: p.obs_cov.clone(),
        init_cov: symmetrize(&(&forward[0] * &p.init_cov * &forward[0])),
    };
    Ok(NormalizedSystem {
        system: LqgSystem::new(parts)?,
        forward,
        inverse,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    /// `max_t ||Gbar_t - I||_2` of the checked system.
    pub max_deviation: f64,
    pub worst_step: usize,
}

/// Recomputes the Gramians of a (supposedly) normalized system.
pub fn verify_normalization(sys: &LqgSystem, ell: usize, m: usize) -> Result<NormalizationReport> {
    let report = cost_observability_gramians(sys, ell, m)?;
    let mut max_deviation = 0.0;
    let mut worst_step = 0;
    for (t, g) in report.gramians.iter().enumerate() {
        let dev = op_norm(&(g - Matrix::identity(g.nrows(), g.ncols())));
        if dev > max_deviation {
            max_deviation = dev;
            worst_step = t;
        }
    }
    Ok(NormalizationReport {
        max_deviation,
        worst_step,
    })
}
