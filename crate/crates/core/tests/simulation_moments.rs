//! Monte-Carlo moment checks of the simulator and the filter.

use lqg_latent_core::oracle::{evaluate_policy_mc, filter_riccati, kalman_filter, latent_covariances, Oracle};
use lqg_latent_core::sim::{collect_dataset, exploration_trajectory, Simulator, ZeroPolicy};
use lqg_latent_core::system::{check_controllability, random_system, LqgSystem, RandomSystemSpec};
use lqg_latent_core::{Matrix, Vector};

fn diag(values: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_row_slice(values))
}

#[test]
fn initial_cost_has_chi_squared_mean() {
    let dx = 3;
    let sys = LqgSystem::time_invariant(
        2,
        Matrix::zeros(dx, dx),
        Matrix::zeros(dx, 1),
        Matrix::identity(1, dx),
        Matrix::identity(dx, dx),
        Matrix::identity(1, 1),
        Matrix::zeros(dx, dx),
        Matrix::identity(1, 1),
        Matrix::identity(dx, dx),
    )
    .unwrap();
    let sim = Simulator::new(&sys).unwrap();
    let costs: Vec<f64> = (0..20000).map(|i| sim.simulate(&ZeroPolicy { control_dim: 1 }, i).unwrap().costs[0]).collect();
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (costs.len() - 1) as f64;
    let stderr = (var / costs.len() as f64).sqrt();
    assert!((mean - dx as f64).abs() <= 3.0 * stderr, "mean {mean} stderr {stderr}");
}

#[test]
fn exploration_controls_have_the_requested_covariance() {
    let sys = random_system(&RandomSystemSpec::new(2, 2, 2, 3), 8).unwrap();
    let sigma = 0.7;
    let ds = collect_dataset(&sys, sigma, 10000, 4, "moments").unwrap();
    for t in 0..3 {
        let mut cov = Matrix::zeros(2, 2);
        for tr in &ds.trajectories {
            cov += &tr.controls[t] * tr.controls[t].transpose();
        }
        cov /= ds.len() as f64;
        let target = Matrix::identity(2, 2) * (sigma * sigma);
        let rel = (cov - &target).norm() / target.norm();
        assert!(rel < 0.05, "t={t} relative deviation {rel}");
    }
}

#[test]
fn distinct_seeds_give_distinct_trajectories() {
    let sys = random_system(&RandomSystemSpec::new(2, 2, 1, 3), 2).unwrap();
    let sim = Simulator::new(&sys).unwrap();
    let mut seen: Vec<Vector> = Vec::new();
    for master in 0..4u64 {
        for i in 0..4u64 {
            let y0 = exploration_trajectory(&sim, 1.0, master, i).unwrap().observations[0].clone();
            assert!(seen.iter().all(|s| s != &y0), "duplicate trajectory at ({master}, {i})");
            seen.push(y0);
        }
    }
}

#[test]
fn generic_fixture_with_enough_controls_is_controllable() {
    for seed in 0..10 {
        let sys = random_system(&RandomSystemSpec::new(2, 2, 3, 4), seed).unwrap();
        assert!(check_controllability(&sys, 1).unwrap().all_full_rank(), "seed {seed}");
    }
}

#[test]
fn precise_observations_make_the_estimate_track_the_state() {
    for eps in [1e-2, 1e-4] {
        let sys = LqgSystem::time_invariant(
            5,
            diag(&[0.9]),
            diag(&[1.0]),
            diag(&[1.0]),
            diag(&[1.0]),
            diag(&[1.0]),
            Matrix::zeros(1, 1),
            diag(&[eps * eps]),
            diag(&[1.0]),
        )
        .unwrap();
        let fs = filter_riccati(&sys).unwrap();
        let sim = Simulator::new(&sys).unwrap();
        for i in 0..20 {
            let tr = exploration_trajectory(&sim, 1.0, 3, i).unwrap();
            let est = kalman_filter(&sys, &fs, &tr.observations, &tr.controls).unwrap().estimates;
            let states = tr.states.as_ref().unwrap();
            for t in 0..=5 {
                assert!((est[t][0] - states[t][0]).abs() < 10.0 * eps, "eps={eps} t={t}");
            }
        }
    }
}

#[test]
fn stderr_scales_like_inverse_root_samples() {
    let sys = random_system(&RandomSystemSpec::new(2, 2, 1, 4), 5).unwrap();
    let sim = Simulator::new(&sys).unwrap();
    let small = evaluate_policy_mc(&sim, &ZeroPolicy { control_dim: 1 }, 4000, 1).unwrap();
    let large = evaluate_policy_mc(&sim, &ZeroPolicy { control_dim: 1 }, 8000, 2).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((ratio - 2f64.sqrt()).abs() < 0.15, "ratio {ratio}");
}

#[test]
fn deterministic_system_has_zero_stderr() {
    let sys = LqgSystem::time_invariant(
        3,
        diag(&[0.5]),
        diag(&[1.0]),
        diag(&[1.0]),
        diag(&[1.0]),
        diag(&[1.0]),
        Matrix::zeros(1, 1),
        diag(&[1.0]),
        Matrix::zeros(1, 1),
    )
    .unwrap();
    let sim = Simulator::new(&sys).unwrap();
    let est = evaluate_policy_mc(&sim, &ZeroPolicy { control_dim: 1 }, 50, 1).unwrap();
    assert_eq!(est.mean, 0.0);
    assert_eq!(est.stderr, 0.0);
}

#[test]
fn latent_covariance_matches_filter_outputs() {
    let sys = random_system(&RandomSystemSpec::new(2, 2, 1, 4), 12).unwrap();
    let oracle = Oracle::new(&sys).unwrap();
    let sigma_u = 0.8;
    let predicted = latent_covariances(&sys, &oracle.filter, sigma_u);
    let sim = Simulator::new(&sys).unwrap();
    let n = 100_000;
    let mut empirical = vec![Matrix::zeros(2, 2); 5];
    for i in 0..n {
        let tr = exploration_trajectory(&sim, sigma_u, 77, i).unwrap();
        let est = kalman_filter(&sys, &oracle.filter, &tr.observations, &tr.controls).unwrap().estimates;
        for (acc, z) in empirical.iter_mut().zip(&est) {
            *acc += z * z.transpose();
        }
    }
    for (t, (emp, pred)) in empirical.iter().zip(&predicted).enumerate() {
        let emp = emp / n as f64;
        let rel = (&emp - pred).svd(false, false).singular_values.max() / pred.clone().svd(false, false).singular_values.max();
        assert!(rel < 0.05, "t={t} relative operator-norm deviation {rel}");
    }
}

#[test]
fn zero_exploration_and_blind_filter_give_zero_latent_covariance() {
    let sys = LqgSystem::time_invariant(
        3,
        diag(&[0.5, 0.2]),
        Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
        Matrix::zeros(1, 2),
        Matrix::identity(2, 2),
        diag(&[1.0]),
        Matrix::identity(2, 2),
        diag(&[1.0]),
        Matrix::identity(2, 2),
    )
    .unwrap();
    let fs = filter_riccati(&sys).unwrap();
    for cov in latent_covariances(&sys, &fs, 0.0) {
        assert_eq!(cov.amax(), 0.0);
    }
}
