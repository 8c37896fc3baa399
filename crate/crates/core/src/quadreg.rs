//! Quadratic regression with intercept: fit symmetric `N` and scalar `b`
//! minimizing `sum_i (h_i^T N h_i + b - y_i)^2`.
//!
//! The problem is linear in `(svec(N), b)` with design rows
//! `[svec(h_i h_i^T); 1]`, and is solved as minimum-norm least squares.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail_validation, Error, Result};
use crate::linalg::{quad_form, smat, svec_len, svec_outer_into, Matrix, SymVec, TriangularAccumulator, Vector, DEFAULT_REL_TOL};
use crate::sim::Dataset;
use crate::system::{validate_windows, window_len};

pub const DEFAULT_FEATURE_CAP: usize = 20_000;

/// Rows absorbed per block when streaming the design matrix.
const MIN_BLOCK_ROWS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadRegOptions {
    pub rel_tol: f64,
    /// Ridge penalty on `svec(N)`; zero gives ordinary least squares.
    pub ridge: f64,
    pub feature_cap: usize,
}

impl Default for QuadRegOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            ridge: 0.0,
            feature_cap: DEFAULT_FEATURE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadFit {
    pub n_hat: Matrix,
    pub b_hat: f64,
    pub residual_rms: f64,
    pub feature_dim: usize,
}

/// Number of regression unknowns for histories of dimension `d`.
pub fn feature_dim(d: usize) -> usize {
    svec_len(d) + 1
}

/// Fits the quadratic model. `histories` holds one sample per row.
pub fn fit_quadratic(histories: &Matrix, targets: &[f64], opts: &QuadRegOptions) -> Result<QuadFit> {
    let (n, d) = histories.shape();
    if n < 1 {
        bail_validation!("fit_quadratic: need at least one sample");
    }
    if targets.len() != n {
        bail_validation!("fit_quadratic: {n} histories but {} targets", targets.len());
    }
    if !(opts.ridge >= 0.0) {
        bail_validation!("fit_quadratic: ridge must be nonnegative");
    }
    let features = feature_dim(d);
    if features > opts.feature_cap {
        return Err(Error::FeatureCap {
            features,
            cap: opts.feature_cap,
        });
    }
    let sv = features - 1;
    let cols = features + 1;
    let block_rows = MIN_BLOCK_ROWS.max(4 * cols);
    let mut acc = TriangularAccumulator::new(features, 1);
    let mut h = vec![0.0; d];
    let mut feat = vec![0.0; sv];
    let mut start = 0;
    while start < n {
        let rows = block_rows.min(n - start);
        let mut block = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let i = start + r;
            for (j, hj) in h.iter_mut().enumerate() {
                *hj = histories[(i, j)];
            }
            svec_outer_into(&h, &mut feat);
            for (j, &f) in feat.iter().enumerate() {
                block[(r, j)] = f;
            }
            block[(r, sv)] = 1.0;
            block[(r, features)] = targets[i];
        }
        acc.push(&block)?;
        start += rows;
    }
    if opts.ridge > 0.0 {
        let penalty = Matrix::from_fn(sv, cols, |i, j| if i == j { libm::sqrt(opts.ridge) } else { 0.0 });
        acc.push(&penalty)?;
    }
    let w = acc.solve(opts.rel_tol)?;
    let n_hat = smat(&SymVec::new(Vector::from_iterator(sv, w.column(0).iter().take(sv).copied()))?);
    let b_hat = w[(sv, 0)];
    let mut sq = Vec::with_capacity(n);
    for i in 0..n {
        let hi: Vector = histories.row(i).transpose();
        let e = quad_form(&hi, &n_hat) + b_hat - targets[i];
        sq.push(e * e);
    }
    let residual_rms = libm::sqrt(crate::linalg::pairwise_sum(&sq) / n as f64);
    Ok(QuadFit {
        n_hat,
        b_hat,
        residual_rms,
        feature_dim: features,
    })
}

/// Cumulative cost targets with the known control costs removed.
///
/// Entry `[t][i]` sums the costs of trajectory `i` over the window starting at
/// `t` and subtracts `||u_tau||^2_{R_tau}` for the controls inside that window.
/// The terminal step carries no control.
pub fn cumulative_targets(ds: &Dataset, control_costs: &[Matrix], ell: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    let horizon = ds.horizon;
    validate_windows(ell, m, horizon)?;
    if control_costs.len() != horizon {
        bail_validation!("expected {horizon} control-cost matrices, got {}", control_costs.len());
    }
    let mut out = vec![Vec::with_capacity(ds.len()); horizon + 1];
    for view in ds.learner_views() {
        let ctl: Vec<f64> = view
            .controls
            .iter()
            .zip(control_costs)
            .map(|(u, r)| quad_form(u, r))
            .collect();
        for (t, column) in out.iter_mut().enumerate() {
            let k = window_len(t, horizon, ell, m);
            let costs: f64 = view.costs[t..t + k].iter().sum();
            let controls: f64 = ctl[t..(t + k).min(horizon)].iter().sum();
            column.push(costs - controls);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Trajectory;

    #[test]
    fn one_dimensional_hand_example() {
        let h = Matrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|x: &f64| 2.0 * x * x + 5.0).collect();
        let fit = fit_quadratic(&h, &y, &QuadRegOptions::default()).unwrap();
        assert!((fit.n_hat[(0, 0)] - 2.0).abs() < 1e-10);
        assert!((fit.b_hat - 5.0).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-10);
        assert_eq!(fit.feature_dim, 2);
    }

    #[test]
    fn zero_targets_give_zero_fit() {
        let h = Matrix::from_fn(10, 2, |i, j| (i * 2 + j) as f64 * 0.1);
        let fit = fit_quadratic(&h, &[0.0; 10], &QuadRegOptions::default()).unwrap();
        assert_eq!(fit.n_hat, Matrix::zeros(2, 2));
        assert_eq!(fit.b_hat, 0.0);
    }

    #[test]
    fn feature_cap_is_enforced() {
        let h = Matrix::zeros(2, 10);
        let opts = QuadRegOptions {
            feature_cap: 50,
            ..QuadRegOptions::default()
        };
        assert_eq!(
            fit_quadratic(&h, &[0.0, 0.0], &opts),
            Err(Error::FeatureCap { features: 56, cap: 50 })
        );
    }

    #[test]
    fn ridge_shrinks_toward_zero() {
        let h = Matrix::from_column_slice(4, 1, &[1.0, -1.0, 2.0, 0.5]);
        let y: Vec<f64> = (0..4).map(|i| 3.0 * h[(i, 0)] * h[(i, 0)]).collect();
        let plain = fit_quadratic(&h, &y, &QuadRegOptions::default()).unwrap();
        let ridged = fit_quadratic(
            &h,
            &y,
            &QuadRegOptions {
                ridge: 10.0,
                ..QuadRegOptions::default()
            },
        )
        .unwrap();
        assert!(ridged.n_hat[(0, 0)].abs() < plain.n_hat[(0, 0)].abs());
    }

    fn dataset_with_costs(costs: Vec<f64>, controls: Vec<f64>) -> Dataset {
        let horizon = controls.len();
        Dataset {
            system_tag: "t".into(),
            sigma_u: 1.0,
            master_seed: 0,
            horizon,
            obs_dim: 1,
            control_dim: 1,
            trajectories: alloc::vec![Trajectory {
                observations: (0..=horizon).map(|_| Vector::zeros(1)).collect(),
                controls: controls.iter().map(|&u| Vector::from_element(1, u)).collect(),
                costs,
                states: None,
            }],
        }
    }

    #[test]
    fn targets_follow_window_rule() {
        let ds = dataset_with_costs(alloc::vec![1.0, 2.0, 3.0, 4.0], alloc::vec![0.0; 3]);
        let r: Vec<Matrix> = (0..3).map(|_| Matrix::identity(1, 1)).collect();
        let t = cumulative_targets(&ds, &r, 1, 2).unwrap();
        let flat: Vec<f64> = t.iter().map(|c| c[0]).collect();
        assert_eq!(flat, [1.0, 5.0, 7.0, 4.0]);
    }

    #[test]
    fn single_step_windows_subtract_own_control() {
        let ds = dataset_with_costs(alloc::vec![5.0, 6.0, 7.0], alloc::vec![1.0, 2.0]);
        let r: Vec<Matrix> = (0..2).map(|_| Matrix::identity(1, 1) * 0.5).collect();
        let t = cumulative_targets(&ds, &r, 2, 4).unwrap();
        let flat: Vec<f64> = t.iter().map(|c| c[0]).collect();
        assert_eq!(flat, [4.5, 4.0, 7.0]);
    }
}
