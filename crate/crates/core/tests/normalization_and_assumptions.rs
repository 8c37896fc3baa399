use lqg_latent_core::normalization::{normalize, verify_normalization};
use lqg_latent_core::oracle::{zero_control_cost, Oracle};
use lqg_latent_core::sim::{GaussianExploration, NoiseDraw, Simulator};
use lqg_latent_core::system::{
    check_controllability, check_stability, cost_observability_gramians, random_system, window_len, LqgSystem, RandomSystemSpec,
    SystemParts,
};
use lqg_latent_core::{Matrix, Vector};
use proptest::prelude::*;

fn system(dx: usize, dy: usize, du: usize, horizon: usize, seed: u64) -> LqgSystem {
    random_system(&RandomSystemSpec::new(dx, dy, du, horizon), seed).unwrap()
}

fn singular_values(m: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normalized_gramians_are_identity(seed in any::<u64>(), dx in 1usize..4, du in 1usize..3, ell in 1usize..3, m in 1usize..4) {
        let sys = system(dx, 2, du, 5, seed);
        let n = normalize(&sys, ell, m).unwrap();
        let rep = verify_normalization(&n.system, ell, m).unwrap();
        prop_assert!(rep.max_deviation < 1e-8, "deviation {:e}", rep.max_deviation);
        for (f, g) in n.forward.iter().zip(&n.inverse) {
            prop_assert!((f * g - Matrix::identity(dx, dx)).amax() < 1e-9);
        }
    }

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>(), dx in 1usize..4, ell in 1usize..3) {
        let sys = system(dx, 2, 1, 5, seed);
        let once = normalize(&sys, ell, 2).unwrap();
        let twice = normalize(&once.system, ell, 2).unwrap();
        for f in &twice.forward {
            prop_assert!((f - Matrix::identity(dx, dx)).amax() < 1e-8);
        }
        for t in 0..5 {
            prop_assert!((twice.system.a(t) - once.system.a(t)).amax() < 1e-8);
        }
    }

    #[test]
    fn normalization_preserves_costs_and_maps_estimates(seed in any::<u64>(), dx in 1usize..4, dy in 1usize..3, du in 1usize..3) {
        let sys = system(dx, dy, du, 5, seed);
        let n = normalize(&sys, 1, 2).unwrap();
        let before = Oracle::new(&sys).unwrap();
        let after = Oracle::new(&n.system).unwrap();
        prop_assert!(rel_close(before.optimal_cost, after.optimal_cost, 1e-9));
        prop_assert!(rel_close(zero_control_cost(&sys).unwrap(), zero_control_cost(&n.system).unwrap(), 1e-9));
        // Estimates transform with the state: M'_t = F_t M_t.
        for t in 0..=5 {
            let mapped = &n.forward[t] * &before.representation.blocks[t];
            prop_assert!((mapped - &after.representation.blocks[t]).amax() < 1e-8);
        }
    }

    #[test]
    fn assumption_checks_match_brute_force(seed in any::<u64>(), dx in 1usize..4, du in 1usize..3, ell in 1usize..3, m in 1usize..4) {
        let horizon = 5;
        let sys = system(dx, 2, du, horizon, seed);

        let mut worst = 0.0f64;
        for t0 in 0..horizon {
            for t in (t0 + 1)..=horizon {
                let mut phi = Matrix::identity(dx, dx);
                for s in t0..t {
                    phi = sys.a(s) * phi;
                }
                worst = worst.max(singular_values(&phi)[0] / 0.9f64.powi((t - t0) as i32));
            }
        }
        let stab = check_stability(&sys, 1.0, 0.9).unwrap();
        prop_assert!(rel_close(stab.worst_ratio, worst, 1e-9));
        prop_assert_eq!(stab.pass, worst <= 1.0 + 1e-12);

        let ctrl = check_controllability(&sys, ell).unwrap();
        let mut brute_min = f64::INFINITY;
        for t in (ell - 1)..horizon {
            let mut blocks = Vec::new();
            for j in 0..ell {
                let mut prefix = Matrix::identity(dx, dx);
                for s in ((t - j + 1)..=t).rev() {
                    prefix = prefix * sys.a(s);
                }
                blocks.push(prefix * sys.b(t - j));
            }
            let mut full = Matrix::zeros(dx, ell * du);
            for (j, b) in blocks.iter().enumerate() {
                full.columns_mut(j * du, du).copy_from(b);
            }
            let sv = singular_values(&full);
            brute_min = brute_min.min(if sv.len() < dx { 0.0 } else { sv[dx - 1] });
        }
        prop_assert!(rel_close(ctrl.min_singular_value, brute_min, 1e-9));

        // Gramian entries from propagated basis vectors: G_ij = sum_tau x_i(tau)^T Q x_j(tau).
        let gram = cost_observability_gramians(&sys, ell, m).unwrap();
        for t in 0..=horizon {
            let k = window_len(t, horizon, ell, m);
            let paths: Vec<Vec<Vector>> = (0..dx)
                .map(|i| {
                    let mut x = Vector::zeros(dx);
                    x[i] = 1.0;
                    let mut out = vec![x.clone()];
                    for tau in t..(t + k - 1) {
                        x = sys.a(tau) * x;
                        out.push(x.clone());
                    }
                    out
                })
                .collect();
            for i in 0..dx {
                for j in 0..dx {
                    let g: f64 = (0..k).map(|s| (paths[i][s].transpose() * sys.q(t + s) * &paths[j][s])[(0, 0)]).sum();
                    prop_assert!(rel_close(gram.gramians[t][(i, j)], g, 1e-9));
                }
            }
        }
    }
}

#[test]
fn controllability_fails_without_actuation() {
    let sys = system(2, 2, 1, 4, 3);
    let mut parts: SystemParts = sys.into_parts();
    for b in parts.b.iter_mut() {
        b.fill(0.0);
    }
    let sys = LqgSystem::new(parts).unwrap();
    let rep = check_controllability(&sys, 1).unwrap();
    assert!(!rep.all_full_rank());
    assert_eq!(rep.min_singular_value, 0.0);
}

#[test]
fn coupled_rollouts_have_identical_costs() {
    let sys = system(3, 2, 2, 5, 11);
    let n = normalize(&sys, 1, 2).unwrap();
    let original = Simulator::new(&sys).unwrap();
    let primed = Simulator::new(&n.system).unwrap();
    let policy = GaussianExploration { control_dim: 2, sigma: 1.0 };
    for seed in 0..100 {
        let noise = original.draw_noise(seed);
        let coupled = NoiseDraw {
            init_state: &n.forward[0] * &noise.init_state,
            process: noise.process.iter().enumerate().map(|(t, w)| &n.forward[t + 1] * w).collect(),
            observation: noise.observation.clone(),
        };
        let a = original.rollout_with(&noise, &policy, seed).unwrap();
        let b = primed.rollout_with(&coupled, &policy, seed).unwrap();
        let top = a.costs.iter().copied().fold(0.0, f64::max);
        for (ca, cb) in a.costs.iter().zip(&b.costs) {
            assert!((ca - cb).abs() <= 1e-8 * (1.0 + top), "seed {seed}: {ca} vs {cb}");
        }
    }
}

#[test]
fn raw_fixture_is_not_normalized() {
    let sys = system(2, 2, 1, 4, 5);
    assert!(verify_normalization(&sys, 1, 2).unwrap().max_deviation > 1e-6);
}
