//! The learning pipeline per `(n, seed)` cell and result rows.

use std::fmt::Write as _;

use lqg_latent_core::corel::{corel, discover_rank, CorelConfig, LatentDataset, StateRepresentation};
use lqg_latent_core::evaluation::{evaluate, EvaluationReport, Truth};
use lqg_latent_core::normalization::normalize;
use lqg_latent_core::oracle::{mc_rollout_cost, McEstimate, Oracle};
use lqg_latent_core::quadreg::QuadRegOptions;
use lqg_latent_core::sim::{exploration_trajectory, Dataset, Policy, Simulator};
use lqg_latent_core::sysid::{assemble_policy, identify, plan, Controller, LatentModel};
use lqg_latent_core::system::LqgSystem;
use lqg_latent_core::Matrix;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};

pub const RESULTS_HEADER: &str = "fixture,n,seed,t,metric,value";

/// One line of the results file.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub fixture: String,
    pub n: usize,
    pub seed: u64,
    pub t: Option<usize>,
    pub metric: String,
    pub value: f64,
}

impl Row {
    pub fn to_csv(&self) -> String {
        let t = self.t.map(|t| t.to_string()).unwrap_or_default();
        format!("{},{},{},{},{},{}", self.fixture, self.n, self.seed, t, self.metric, self.value)
    }
}

pub fn render_rows(rows: &[Row]) -> String {
    let mut out = String::with_capacity(rows.len() * 48 + 64);
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

/// Collects an exploration dataset, parallel over trajectories.
pub fn collect_parallel(sys: &LqgSystem, sigma_u: f64, n: usize, master_seed: u64, tag: &str) -> HarnessResult<Dataset> {
    if !(sigma_u > 0.0) || n < 1 {
        return Err(HarnessError::Validation("need sigma_u > 0 and n >= 1".into()));
    }
    let sim = Simulator::new(sys)?;
    let trajectories = (0..n as u64)
        .into_par_iter()
        .map(|i| exploration_trajectory(&sim, sigma_u, master_seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        system_tag: tag.to_string(),
        sigma_u,
        master_seed,
        horizon: sys.horizon(),
        obs_dim: sys.obs_dim(),
        control_dim: sys.control_dim(),
        trajectories,
    })
}

/// Output of representation learning, identification and planning.
#[derive(Debug, Clone)]
pub struct Learned {
    pub representation: StateRepresentation,
    pub latent: LatentDataset,
    pub model: Option<LatentModel>,
    pub controller: Option<Controller>,
}

pub fn learn(ds: &Dataset, corel_cfg: &CorelConfig, control_costs: &[Matrix], with_sysid: bool) -> HarnessResult<Learned> {
    let (representation, latent) = corel(ds, corel_cfg, control_costs)?;
    let (model, controller) = if with_sysid {
        let model = identify(&latent, control_costs, corel_cfg.ell, &corel_cfg.regression)?;
        let ctl = plan(&model)?;
        (Some(model), Some(ctl))
    } else {
        (None, None)
    };
    Ok(Learned {
        representation,
        latent,
        model,
        controller,
    })
}

/// Paired Monte-Carlo estimate of `J(policy) - J(reference)`, parallel over rollouts.
pub fn paired_gap(sim: &Simulator<'_>, policy: &(dyn Policy + Sync), reference: &(dyn Policy + Sync), n_mc: usize, seed: u64) -> HarnessResult<McEstimate> {
    let diffs = (0..n_mc as u64)
        .into_par_iter()
        .map(|i| Ok(mc_rollout_cost(sim, policy, seed, i)? - mc_rollout_cost(sim, reference, seed, i)?))
        .collect::<HarnessResult<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&diffs)?)
}

/// Seed of the Monte-Carlo evaluation stream of a cell, decoupled from its data seed.
pub fn evaluation_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_E2E0_0000_0000
}

/// Ground truth shared by all cells of an experiment.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub system: LqgSystem,
    pub truth: Truth,
    pub oracle: Oracle,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub learned: Learned,
    pub report: Option<EvaluationReport>,
    pub e2e: Option<McEstimate>,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> HarnessResult<Self> {
        let system = cfg.system()?;
        Self::with_system(cfg, system)
    }

    pub fn with_system(cfg: ExperimentConfig, system: LqgSystem) -> HarnessResult<Self> {
        if cfg.ell > system.horizon() {
            return Err(HarnessError::Validation(format!(
                "ell = {} exceeds the horizon {}",
                cfg.ell,
                system.horizon()
            )));
        }
        let normalized = normalize(&system, cfg.ell, cfg.m)?;
        let truth = Truth::new(normalized.system, cfg.sigma_u)?;
        let oracle = Oracle::new(&system)?;
        Ok(Self {
            cfg,
            system,
            truth,
            oracle,
        })
    }

    pub fn corel_config(&self) -> CorelConfig {
        self.cfg.corel_config(self.system.state_dim())
    }

    pub fn regression_options(&self) -> QuadRegOptions {
        self.cfg.regression_options()
    }

    pub fn dataset(&self, n: usize, seed: u64) -> HarnessResult<Dataset> {
        collect_parallel(&self.system, self.cfg.sigma_u, n, seed, &self.cfg.tag)
    }

    /// Runs one cell end to end.
    pub fn cell(&self, n: usize, seed: u64) -> HarnessResult<CellOutput> {
        let toggles = self.cfg.toggles;
        if !toggles.corel {
            return Err(HarnessError::Validation("representation learning is disabled".into()));
        }
        let ds = self.dataset(n, seed)?;
        let learned = learn(&ds, &self.corel_config(), self.system.control_costs(), toggles.sysid)?;
        let report = match (&learned.model, &learned.controller) {
            (Some(model), Some(ctl)) if toggles.eval => Some(evaluate(&self.truth, &learned.representation, model, ctl, self.cfg.ell)?),
            _ => None,
        };
        let e2e = match &learned.controller {
            Some(ctl) if toggles.e2e => Some(self.end_to_end(&learned.representation, ctl, seed)?),
            _ => None,
        };
        Ok(CellOutput { learned, report, e2e })
    }

    pub fn end_to_end(&self, rep: &StateRepresentation, ctl: &Controller, seed: u64) -> HarnessResult<McEstimate> {
        let sys = &self.system;
        let policy = assemble_policy(rep, ctl, sys.obs_dim(), sys.control_dim())?;
        let reference = self.oracle.separation_policy(sys)?;
        let sim = Simulator::new(sys)?;
        paired_gap(&sim, &policy, &reference, self.cfg.n_mc, evaluation_seed(seed))
    }

    /// Result rows of one cell; failures become a single error row.
    pub fn cell_rows(&self, n: usize, seed: u64) -> Vec<Row> {
        match self.cell(n, seed) {
            Ok(out) => self.rows_for(n, seed, &out.learned.representation, out.report.as_ref(), out.e2e.as_ref()),
            Err(e) => vec![self.row(n, seed, None, &format!("error_{}", e.kind()), e.exit_code() as f64)],
        }
    }

    fn row(&self, n: usize, seed: u64, t: Option<usize>, metric: &str, value: f64) -> Row {
        Row {
            fixture: self.cfg.tag.clone(),
            n,
            seed,
            t,
            metric: metric.to_string(),
            value,
        }
    }

    pub fn rows_for(&self, n: usize, seed: u64, rep: &StateRepresentation, report: Option<&EvaluationReport>, e2e: Option<&McEstimate>) -> Vec<Row> {
        let ell = self.cfg.ell;
        let mut rows = Vec::new();
        let mut push = |t: Option<usize>, metric: &str, value: f64| rows.push(self.row(n, seed, t, metric, value));
        push(None, "theta", rep.threshold);
        for (t, d) in rep.diagnostics.iter().enumerate() {
            push(Some(t), "kept_rank", d.kept_rank as f64);
        }
        let late_forms: Vec<Matrix> = rep.quadratic_forms[ell..].to_vec();
        if let Ok(r) = discover_rank(&late_forms) {
            push(None, "discovered_rank", r as f64);
        }
        if let Some(rep_eval) = report {
            let al = &rep_eval.alignment;
            for t in 0..al.op_errors.len() {
                push(Some(t), "rep_err", al.op_errors[t]);
                push(Some(t), "rep_err_fro", al.fro_errors[t]);
                push(Some(t), "n_hat_err", rep_eval.quadratic_form_errors[t]);
            }
            for t in 0..rep_eval.dynamics_errors.len() {
                push(Some(t), "a_err", rep_eval.dynamics_errors[t]);
                push(Some(t), "b_err", rep_eval.input_errors[t]);
            }
            for &(t, e) in &rep_eval.cost_errors {
                push(Some(t), "q_err", e);
            }
            let max_of = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::max);
            push(None, "rep_err_early_max", max_of(&al.op_errors[..ell]));
            push(None, "rep_err_late_max", max_of(&al.op_errors[ell..]));
            push(None, "n_hat_err_late_max", max_of(&rep_eval.quadratic_form_errors[ell..]));
            push(None, "a_err_late_max", max_of(&rep_eval.dynamics_errors[ell..]));
            push(None, "b_err_late_max", max_of(&rep_eval.input_errors[ell..]));
            let q: Vec<f64> = rep_eval.cost_errors.iter().map(|c| c.1).collect();
            if !q.is_empty() {
                push(None, "q_err_late_max", max_of(&q));
            }
            push(None, "ctl_gap_early", rep_eval.ctl_gap_early.gap);
            push(None, "ctl_gap_late", rep_eval.ctl_gap_late.gap);
            push(None, "zero_gap", rep_eval.zero_gap);
        }
        if let Some(e2e) = e2e {
            push(None, "e2e_gap", e2e.mean);
            push(None, "e2e_stderr", e2e.stderr);
        }
        rows
    }

    /// All cells in grid order (n outer, seed inner), computed in parallel.
    pub fn run_all(&self) -> Vec<Row> {
        self.run_cells(&self.cells())
    }

    pub fn cells(&self) -> Vec<(usize, u64)> {
        self.cfg
            .n_grid
            .iter()
            .flat_map(|&n| self.cfg.seeds.iter().map(move |&s| (n, s)))
            .collect()
    }

    pub fn run_cells(&self, cells: &[(usize, u64)]) -> Vec<Row> {
        cells
            .par_iter()
            .map(|&(n, seed)| self.cell_rows(n, seed))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }
}
