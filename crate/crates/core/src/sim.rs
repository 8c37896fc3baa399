//! Trajectory simulation with counter-based random streams.
//!
//! Every Gaussian draw comes from a ChaCha8 stream keyed by
//! `(seed, kind, t)`, so any single trajectory can be regenerated in isolation
//! and parallel collection is order independent.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail_validation, Result};
use crate::linalg::{psd_sqrt, quad_form, Matrix, Vector};
use crate::system::LqgSystem;

/// Source of randomness inside a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    InitialState = 0,
    Process = 1,
    Observation = 2,
    Control = 3,
}

/// Independent generator for one `(seed, kind, t)` triple.
pub fn stream_rng(seed: u64, kind: StreamKind, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 32) | t as u64);
    rng
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trajectory `index` within a dataset drawn from `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn standard_normal_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// A (possibly randomized) map from the observed history to a control.
///
/// `observations` holds `y_0..y_t` and `controls` holds `u_0..u_{t-1}`.
pub trait Policy {
    fn control(&self, t: usize, observations: &[Vector], controls: &[Vector], rng: &mut ChaCha8Rng) -> Vector;
}

impl<F> Policy for F
where
    F: Fn(usize, &[Vector], &[Vector], &mut ChaCha8Rng) -> Vector,
{
    fn control(&self, t: usize, observations: &[Vector], controls: &[Vector], rng: &mut ChaCha8Rng) -> Vector {
        self(t, observations, controls, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroPolicy {
    pub control_dim: usize,
}

impl Policy for ZeroPolicy {
    fn control(&self, _: usize, _: &[Vector], _: &[Vector], _: &mut ChaCha8Rng) -> Vector {
        Vector::zeros(self.control_dim)
    }
}

/// i.i.d. exploration `u_t ~ N(0, sigma^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianExploration {
    pub control_dim: usize,
    pub sigma: f64,
}

impl Policy for GaussianExploration {
    fn control(&self, _: usize, _: &[Vector], _: &[Vector], rng: &mut ChaCha8Rng) -> Vector {
        standard_normal_vector(rng, self.control_dim) * self.sigma
    }
}

/// Linear history feedback `u_t = G_t h_t` with `h_t = [y_0..y_t; u_0..u_{t-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFeedback {
    gains: Vec<Matrix>,
}

impl HistoryFeedback {
    /// `gains[t]` must be `d_u x ((t+1) d_y + t d_u)`.
    pub fn new(gains: Vec<Matrix>, obs_dim: usize, control_dim: usize) -> Result<Self> {
        for (t, g) in gains.iter().enumerate() {
            let want = (t + 1) * obs_dim + t * control_dim;
            if g.shape() != (control_dim, want) {
                bail_validation!(
                    "history gain {t} has shape {:?}, expected ({control_dim}, {want})",
                    g.shape()
                );
            }
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[Matrix] {
        &self.gains
    }
}

impl Policy for HistoryFeedback {
    fn control(&self, t: usize, observations: &[Vector], controls: &[Vector], _: &mut ChaCha8Rng) -> Vector {
        let g = &self.gains[t];
        let mut u = Vector::zeros(g.nrows());
        let mut col = 0;
        for v in observations.iter().chain(controls) {
            u += g.columns(col, v.len()) * v;
            col += v.len();
        }
        u
    }
}

/// Length of the stacked history at step `t`.
pub fn history_dim(t: usize, obs_dim: usize, control_dim: usize) -> usize {
    (t + 1) * obs_dim + t * control_dim
}

/// `h_t = [y_0; ...; y_t; u_0; ...; u_{t-1}]`.
pub fn build_history(observations: &[Vector], controls: &[Vector], t: usize) -> Vector {
    let parts = observations[..=t].iter().chain(&controls[..t]);
    let dim = parts.clone().map(|v| v.len()).sum();
    let mut h = Vector::zeros(dim);
    let mut at = 0;
    for v in parts {
        h.rows_mut(at, v.len()).copy_from(v);
        at += v.len();
    }
    h
}

/// One rollout. `states` is diagnostic only and absent for loaded data.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub costs: Vec<f64>,
    pub states: Option<Vec<Vector>>,
}

impl Trajectory {
    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    /// The observable part `(y, u, c)`.
    pub fn learner_view(&self) -> LearnerTrajectory<'_> {
        LearnerTrajectory {
            observations: &self.observations,
            controls: &self.controls,
            costs: &self.costs,
        }
    }
}

/// Borrowed view without hidden states; the only form learners receive.
#[derive(Debug, Clone, Copy)]
pub struct LearnerTrajectory<'a> {
    pub observations: &'a [Vector],
    pub controls: &'a [Vector],
    pub costs: &'a [f64],
}

/// `n` exploration trajectories plus the metadata needed to regenerate them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system_tag: String,
    pub sigma_u: f64,
    pub master_seed: u64,
    pub horizon: usize,
    pub obs_dim: usize,
    pub control_dim: usize,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn learner_views(&self) -> impl ExactSizeIterator<Item = LearnerTrajectory<'_>> + '_ {
        self.trajectories.iter().map(Trajectory::learner_view)
    }

    /// Checks every trajectory against the recorded horizon and dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.trajectories.is_empty() {
            bail_validation!("dataset has no trajectories");
        }
        for (i, tr) in self.trajectories.iter().enumerate() {
            if tr.observations.len() != self.horizon + 1
                || tr.controls.len() != self.horizon
                || tr.costs.len() != self.horizon + 1
            {
                bail_validation!("trajectory {i} has inconsistent length");
            }
            if tr.observations.iter().any(|y| y.len() != self.obs_dim)
                || tr.controls.iter().any(|u| u.len() != self.control_dim)
            {
                bail_validation!("trajectory {i} has inconsistent dimensions");
            }
        }
        Ok(())
    }
}

/// Explicit noise realization of one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub init_state: Vector,
    /// `w_0..w_{T-1}`.
    pub process: Vec<Vector>,
    /// `v_0..v_T`.
    pub observation: Vec<Vector>,
}

/// Rollout engine with precomputed covariance square roots.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    sys: &'a LqgSystem,
    sqrt_init: Matrix,
    sqrt_process: Vec<Matrix>,
    sqrt_obs: Vec<Matrix>,
}

impl<'a> Simulator<'a> {
    pub fn new(sys: &'a LqgSystem) -> Result<Self> {
        let p = sys.parts();
        Ok(Self {
            sys,
            sqrt_init: psd_sqrt(&p.init_cov)?,
            sqrt_process: p.process_cov.iter().map(psd_sqrt).collect::<Result<_>>()?,
            sqrt_obs: p.obs_cov.iter().map(psd_sqrt).collect::<Result<_>>()?,
        })
    }

    pub fn system(&self) -> &LqgSystem {
        self.sys
    }

    /// Noise for one rollout, drawn from the seed's per-step streams.
    pub fn draw_noise(&self, seed: u64) -> NoiseDraw {
        let dx = self.sys.state_dim();
        let dy = self.sys.obs_dim();
        let init_state = &self.sqrt_init * standard_normal_vector(&mut stream_rng(seed, StreamKind::InitialState, 0), dx);
        let process = self
            .sqrt_process
            .iter()
            .enumerate()
            .map(|(t, s)| s * standard_normal_vector(&mut stream_rng(seed, StreamKind::Process, t), dx))
            .collect();
        let observation = self
            .sqrt_obs
            .iter()
            .enumerate()
            .map(|(t, s)| s * standard_normal_vector(&mut stream_rng(seed, StreamKind::Observation, t), dy))
            .collect();
        NoiseDraw {
            init_state,
            process,
            observation,
        }
    }

    pub fn simulate(&self, policy: &dyn Policy, seed: u64) -> Result<Trajectory> {
        self.rollout_with(&self.draw_noise(seed), policy, seed)
    }

    /// Rolls out with a given noise realization; the policy's randomness
    /// still comes from the control streams of `seed`.
    pub fn rollout_with(&self, noise: &NoiseDraw, policy: &dyn Policy, seed: u64) -> Result<Trajectory> {
        let sys = self.sys;
        let horizon = sys.horizon();
        let du = sys.control_dim();
        let mut x = noise.init_state.clone();
        let mut observations = Vec::with_capacity(horizon + 1);
        let mut controls = Vec::with_capacity(horizon);
        let mut costs = Vec::with_capacity(horizon + 1);
        let mut states = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            observations.push(sys.c(t) * &x + &noise.observation[t]);
            let state_cost = quad_form(&x, sys.q(t));
            if t == horizon {
                costs.push(state_cost);
                states.push(x);
                break;
            }
            let mut rng = stream_rng(seed, StreamKind::Control, t);
            let u = policy.control(t, &observations, &controls, &mut rng);
            if u.len() != du {
                bail_validation!("policy returned a control of length {} at t={t}, expected {du}", u.len());
            }
            costs.push(state_cost + quad_form(&u, sys.r(t)));
            let next = sys.a(t) * &x + sys.b(t) * &u + &noise.process[t];
            controls.push(u);
            states.push(core::mem::replace(&mut x, next));
        }
        Ok(Trajectory {
            observations,
            controls,
            costs,
            states: Some(states),
        })
    }
}

/// Trajectory `index` of an exploration dataset.
pub fn exploration_trajectory(sim: &Simulator<'_>, sigma_u: f64, master_seed: u64, index: u64) -> Result<Trajectory> {
    let policy = GaussianExploration {
        control_dim: sim.system().control_dim(),
        sigma: sigma_u,
    };
    sim.simulate(&policy, trajectory_seed(master_seed, index))
}

/// `n` exploration trajectories with `u_t ~ N(0, sigma_u^2 I)`.
pub fn collect_dataset(
    sys: &LqgSystem,
    sigma_u: f64,
    n: usize,
    master_seed: u64,
    system_tag: &str,
) -> Result<Dataset> {
    if !(sigma_u > 0.0) {
        bail_validation!("sigma_u must be positive");
    }
    if n < 1 {
        bail_validation!("need at least one trajectory");
    }
    let sim = Simulator::new(sys)?;
    let trajectories = (0..n as u64)
        .map(|i| exploration_trajectory(&sim, sigma_u, master_seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        system_tag: system_tag.into(),
        sigma_u,
        master_seed,
        horizon: sys.horizon(),
        obs_dim: sys.obs_dim(),
        control_dim: sys.control_dim(),
        trajectories,
    })
}
