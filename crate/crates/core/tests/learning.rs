use lqg_latent_core::corel::{corel, history_matrix, CorelConfig, LatentDataset};
use lqg_latent_core::normalization::normalize;
use lqg_latent_core::oracle::{system_lqr, Oracle};
use lqg_latent_core::quadreg::{fit_quadratic, QuadRegOptions};
use lqg_latent_core::sim::collect_dataset;
use lqg_latent_core::sysid::{identify, plan, LatentModel};
use lqg_latent_core::system::{random_system, LqgSystem, RandomSystemSpec};
use lqg_latent_core::{Matrix, Vector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn normalized_system(seed: u64) -> LqgSystem {
    let mut spec = RandomSystemSpec::new(2, 2, 2, 4);
    spec.max_condition = Some(2.0);
    spec.obs_noise = 1.0;
    let sys = random_system(&spec, seed).unwrap();
    normalize(&sys, 1, 2).unwrap().system
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn noiseless_quadratic_is_recovered(seed in any::<u64>(), d in 1usize..5, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian(&mut rng, d, d);
        let truth = (&g + g.transpose()) * 0.5;
        let n = 40 + 10 * d * d;
        let hist = gaussian(&mut rng, n, d);
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                let h = hist.row(i).transpose();
                (h.transpose() * &truth * &h)[(0, 0)] + b
            })
            .collect();
        let fit = fit_quadratic(&hist, &targets, &QuadRegOptions::default()).unwrap();
        prop_assert!((&fit.n_hat - &truth).amax() < 1e-8 * (1.0 + truth.amax()));
        prop_assert!((fit.b_hat - b).abs() < 1e-8 * (1.0 + b.abs()));
        prop_assert!(fit.residual_rms < 1e-8 * (1.0 + truth.amax()));
    }
}

#[test]
fn quadratic_fit_error_shrinks_with_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let truth = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -0.5]);
    let mut errs = Vec::new();
    for n in [1000usize, 16000] {
        let mut per_seed = Vec::new();
        for _ in 0..7 {
            let hist = gaussian(&mut rng, n, 2);
            let noise = gaussian(&mut rng, n, 2);
            let targets: Vec<f64> = (0..n)
                .map(|i| {
                    let h = hist.row(i).transpose();
                    (h.transpose() * &truth * &h)[(0, 0)] + 0.7 + noise[(i, 0)] * noise[(i, 1)]
                })
                .collect();
            let fit = fit_quadratic(&hist, &targets, &QuadRegOptions::default()).unwrap();
            per_seed.push((&fit.n_hat - &truth).norm());
        }
        per_seed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        errs.push(per_seed[3]);
    }
    // A 16x larger sample should cut the error by about 4x; 2.5x leaves room for noise.
    assert!(errs[1] * 2.5 < errs[0], "errors {errs:?}");
}

#[test]
fn representation_is_permutation_equivariant() {
    let sys = normalized_system(4);
    let ds = collect_dataset(&sys, 1.0, 600, 9, "perm").unwrap();
    let mut shuffled = ds.clone();
    let n = ds.len();
    let order: Vec<usize> = (0..n).map(|i| (i * 379 + 11) % n).collect();
    shuffled.trajectories = order.iter().map(|&i| ds.trajectories[i].clone()).collect();
    let cfg = CorelConfig::new(2, 1, 2);
    let (rep_a, lat_a) = corel(&ds, &cfg, sys.control_costs()).unwrap();
    let (rep_b, lat_b) = corel(&shuffled, &cfg, sys.control_costs()).unwrap();
    assert_eq!(rep_a.threshold, rep_b.threshold);
    for t in 0..rep_a.blocks.len() {
        let scale = 1.0 + rep_a.blocks[t].amax();
        assert!((&rep_a.blocks[t] - &rep_b.blocks[t]).amax() < 1e-10 * scale, "block {t}");
        for (k, &i) in order.iter().enumerate().step_by(37) {
            assert!((lat_b.latents[t].row(k) - lat_a.latents[t].row(i)).amax() < 1e-10 * scale);
        }
    }
}

#[test]
fn history_matrix_rows_follow_trajectories() {
    let sys = normalized_system(5);
    let ds = collect_dataset(&sys, 1.0, 3, 2, "rows").unwrap();
    let h = history_matrix(&ds, 2);
    let tr = &ds.trajectories[1];
    let mut expected: Vec<f64> = Vec::new();
    for y in &tr.observations[..=2] {
        expected.extend(y.iter());
    }
    for u in &tr.controls[..2] {
        expected.extend(u.iter());
    }
    assert_eq!(h.row(1).iter().copied().collect::<Vec<_>>(), expected);
}

/// Latent dataset built from the exact filter estimates of a normalized system.
fn oracle_latents(sys: &LqgSystem, n: usize, seed: u64) -> LatentDataset {
    let ds = collect_dataset(sys, 1.0, n, seed, "oracle").unwrap();
    let oracle = Oracle::new(sys).unwrap();
    let horizon = sys.horizon();
    LatentDataset {
        latents: (0..=horizon)
            .map(|t| history_matrix(&ds, t) * oracle.representation.blocks[t].transpose())
            .collect(),
        controls: (0..horizon)
            .map(|t| Matrix::from_fn(n, sys.control_dim(), |i, j| ds.trajectories[i].controls[t][j]))
            .collect(),
        costs: (0..=horizon)
            .map(|t| Vector::from_iterator(n, ds.trajectories.iter().map(|tr| tr.costs[t])))
            .collect(),
    }
}

#[test]
fn identification_from_exact_latents_recovers_the_system() {
    let sys = normalized_system(6);
    let lds = oracle_latents(&sys, 20000, 3);
    let ell = 1;
    let model = identify(&lds, sys.control_costs(), ell, &QuadRegOptions::default()).unwrap();
    for t in 0..sys.horizon() {
        assert!((&model.a[t] - sys.a(t)).amax() < 0.05, "A_{t}: {}", (&model.a[t] - sys.a(t)).amax());
        assert!((&model.b[t] - sys.b(t)).amax() < 0.05, "B_{t}: {}", (&model.b[t] - sys.b(t)).amax());
    }
    for t in ell..sys.horizon() {
        let err = (&model.q[t] - sys.q(t)).amax();
        assert!(err < 0.15 * (1.0 + sys.q(t).amax()), "Q_{t}: {err}");
    }
}

#[test]
fn planning_on_the_true_model_reproduces_lqr() {
    let sys = normalized_system(7);
    let p = sys.parts();
    let model = LatentModel {
        a: p.a.clone(),
        b: p.b.clone(),
        q: p.q.clone(),
        r: p.r.clone(),
    };
    let ctl = plan(&model).unwrap();
    let lqr = system_lqr(&sys).unwrap();
    for (k, k_ref) in ctl.gains.iter().zip(&lqr.gains) {
        assert!((k - k_ref).amax() < 1e-12);
    }
}
