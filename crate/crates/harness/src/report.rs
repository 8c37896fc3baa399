//! Assumption reports and sweep summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use lqg_latent_core::evaluation::{median, rate_fit, RateFit};
use lqg_latent_core::linalg::{eig_sym_desc, DEFAULT_REL_TOL, min_positive_singular_value, op_norm};
use lqg_latent_core::normalization::{normalize, verify_normalization};
use lqg_latent_core::oracle::{latent_covariances, Oracle};
use lqg_latent_core::system::{check_controllability, check_stability, cost_observability_gramians, window_len, LqgSystem};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};
use crate::pipeline::{Row, RESULTS_HEADER};

/// Assumption check outcome rendered as text.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub text: String,
    pub all_pass: bool,
}

/// Smallest `rho` with `||Phi_{t,t0}|| <= alpha * rho^(t-t0)` for all pairs.
fn fitted_rate(sys: &LqgSystem, alpha: f64) -> f64 {
    let dx = sys.state_dim();
    let mut best: f64 = 0.0;
    for t0 in 0..sys.horizon() {
        let mut phi = lqg_latent_core::Matrix::identity(dx, dx);
        for t in (t0 + 1)..=sys.horizon() {
            phi = sys.a(t - 1) * phi;
            let r = (op_norm(&phi) / alpha).powf(1.0 / (t - t0) as f64);
            best = best.max(r);
        }
    }
    best
}

pub fn check_report(cfg: &ExperimentConfig, sys: &LqgSystem) -> HarnessResult<CheckReport> {
    let (ell, m, horizon) = (cfg.ell, cfg.m, sys.horizon());
    if ell > horizon {
        return Err(HarnessError::Validation(format!("ell = {ell} exceeds the horizon {horizon}")));
    }
    let mut out = String::new();
    let mut all_pass = true;
    let mut verdict = |name: &str, pass: bool, detail: String, out: &mut String| {
        all_pass &= pass;
        let _ = writeln!(out, "{:<22} {}  {detail}", name, if pass { "PASS" } else { "FAIL" });
    };
    let _ = writeln!(out, "fixture {}  d_x={} d_y={} d_u={} T={horizon} ell={ell} m={m}", cfg.tag, sys.state_dim(), sys.obs_dim(), sys.control_dim());
    let _ = writeln!(out);

    let (alpha, rho) = (cfg.check.alpha, cfg.check.rho);
    let stab = check_stability(sys, alpha, rho)?;
    let (t0, t1, norm) = stab.worst;
    verdict(
        "stability",
        stab.pass,
        format!(
            "alpha={alpha} rho={rho} worst ||Phi({t1},{t0})||={norm:.6e} ratio={:.6e} fitted_rho(alpha)={:.6e} alpha*rho={:.6e}",
            stab.worst_ratio,
            fitted_rate(sys, alpha),
            alpha * rho
        ),
        &mut out,
    );

    let ctrl = check_controllability(sys, ell)?;
    verdict(
        "controllability",
        ctrl.all_full_rank(),
        format!("nu={:.6e}", ctrl.min_singular_value),
        &mut out,
    );
    for (t, smin, full) in &ctrl.per_step {
        let _ = writeln!(out, "    t={t:<3} sigma_min={smin:.6e} full_rank={full}");
    }

    let gram = cost_observability_gramians(sys, ell, m)?;
    verdict(
        "cost_observability",
        gram.min_eigenvalue > 0.0,
        format!("mu^2={:.6e} at t={}", gram.min_eigenvalue, gram.worst_step),
        &mut out,
    );

    let normalized = normalize(sys, ell, m);
    match normalized.as_ref().map_err(Clone::clone).and_then(|n| verify_normalization(&n.system, ell, m)) {
        Ok(rep) => verdict(
            "normalization",
            rep.max_deviation <= 1e-6,
            format!("max ||Gramian' - I||_2={:.3e} at t={}", rep.max_deviation, rep.worst_step),
            &mut out,
        ),
        Err(e) => verdict("normalization", false, e.to_string(), &mut out),
    }

    if let Ok(normalized) = normalized {
        let oracle = Oracle::new(&normalized.system)?;
        let beta = oracle.representation.blocks[..ell]
            .iter()
            .map(|m| min_positive_singular_value(m, DEFAULT_REL_TOL).unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        let _ = writeln!(out, "{:<22} beta={beta:.6e} (min positive singular value of the normalized latent map, t < ell)", "early_signal");
        let covs = latent_covariances(&normalized.system, &oracle.filter, cfg.sigma_u);
        let norm_ctrl = check_controllability(&normalized.system, ell)?;
        let bound = cfg.sigma_u * cfg.sigma_u * norm_ctrl.min_singular_value * norm_ctrl.min_singular_value;
        let mut min_cov = f64::INFINITY;
        for cov in &covs[ell..] {
            let ev = eig_sym_desc(cov)?.values;
            min_cov = min_cov.min(ev[ev.len() - 1]);
        }
        verdict(
            "latent_excitation",
            min_cov >= bound * (1.0 - 1e-9),
            format!("min_t>=ell sigma_min(Cov z)={min_cov:.6e} >= sigma_u^2 nu'^2={bound:.6e}"),
            &mut out,
        );
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "window table (t -> k)");
    for t in 0..=horizon {
        let _ = writeln!(out, "    t={t:<3} k={}", window_len(t, horizon, ell, m));
    }
    Ok(CheckReport { text: out, all_pass })
}

pub fn parse_results(text: &str, path: &Path) -> HarnessResult<Vec<Row>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(HarnessError::format(path, format!("expected header '{RESULTS_HEADER}'"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| HarnessError::format(path, format!("line {}: bad {what}", i + 2));
        if f.len() != 6 {
            return Err(bad("field count"));
        }
        rows.push(Row {
            fixture: f[0].to_string(),
            n: f[1].parse().map_err(|_| bad("n"))?,
            seed: f[2].parse().map_err(|_| bad("seed"))?,
            t: if f[3].is_empty() {
                None
            } else {
                Some(f[3].parse().map_err(|_| bad("t"))?)
            },
            metric: f[4].to_string(),
            value: f[5].parse().map_err(|_| bad("value"))?,
        });
    }
    Ok(rows)
}

pub fn read_results(path: &Path) -> HarnessResult<Vec<Row>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_results(&text, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRate {
    pub fixture: String,
    pub metric: String,
    pub t: Option<usize>,
    /// Median over seeds per sample size.
    pub medians: Vec<(usize, f64)>,
    pub fit: RateFit,
}

impl MetricRate {
    pub fn regime(&self, ell: Option<usize>) -> &'static str {
        match (self.t, ell) {
            (Some(t), Some(ell)) if t < ell => "early",
            (Some(_), Some(_)) => "late",
            (Some(_), None) => "per_step",
            (None, _) if self.metric.contains("early") => "early",
            (None, _) if self.metric.contains("late") => "late",
            (None, _) => "aggregate",
        }
    }

    pub fn note(&self) -> &'static str {
        if self.metric.starts_with("e2e") {
            "conjectured rate"
        } else {
            ""
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepSummary {
    pub rates: Vec<MetricRate>,
    pub warnings: Vec<String>,
}

/// Metrics that are diagnostics rather than errors and carry no rate.
const NOT_RATES: &[&str] = &["kept_rank", "discovered_rank", "zero_gap", "e2e_stderr"];

pub fn sweep(rows: &[Row]) -> HarnessResult<SweepSummary> {
    let distinct_n: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    if distinct_n.len() < 3 {
        return Err(HarnessError::Validation(format!(
            "sweep report needs at least 3 distinct sample sizes, found {}",
            distinct_n.len()
        )));
    }
    type Key = (String, String, Option<usize>);
    let mut groups: BTreeMap<Key, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut summary = SweepSummary::default();
    for r in rows {
        if r.metric.starts_with("error_") {
            continue;
        }
        let entry = groups.entry((r.fixture.clone(), r.metric.clone(), r.t)).or_default().entry(r.n).or_default();
        if r.value.is_finite() {
            entry.push(r.value);
        }
    }
    let errors = rows.iter().filter(|r| r.metric.starts_with("error_")).count();
    if errors > 0 {
        summary.warnings.push(format!("{errors} failed cells excluded"));
    }
    for ((fixture, metric, t), per_n) in groups {
        if NOT_RATES.contains(&metric.as_str()) {
            continue;
        }
        let label = match t {
            Some(t) => format!("{fixture}/{metric}[t={t}]"),
            None => format!("{fixture}/{metric}"),
        };
        let medians: Vec<(usize, f64)> = per_n
            .iter()
            .filter_map(|(&n, v)| median(v).filter(|m| *m > 0.0).map(|m| (n, m)))
            .collect();
        if medians.is_empty() {
            summary.warnings.push(format!("{label}: empty metric, skipped"));
            continue;
        }
        if medians.len() < 3 {
            summary.warnings.push(format!("{label}: fewer than 3 sample sizes with positive medians, skipped"));
            continue;
        }
        let pts: Vec<(f64, f64)> = medians.iter().map(|&(n, m)| (n as f64, m)).collect();
        let fit = rate_fit(&pts)?;
        summary.rates.push(MetricRate {
            fixture,
            metric,
            t,
            medians,
            fit,
        });
    }
    Ok(summary)
}

impl SweepSummary {
    pub fn find(&self, metric: &str, t: Option<usize>) -> Option<&MetricRate> {
        self.rates.iter().find(|r| r.metric == metric && r.t == t)
    }

    pub fn to_csv(&self, ell: Option<usize>) -> String {
        let mut out = String::from("fixture,metric,t,regime,slope,intercept,r_squared,points,note\n");
        for r in &self.rates {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.fixture,
                r.metric,
                r.t.map(|t| t.to_string()).unwrap_or_default(),
                r.regime(ell),
                r.fit.slope,
                r.fit.intercept,
                r.fit.r_squared,
                r.medians.len(),
                r.note()
            );
        }
        out
    }

    pub fn to_text(&self, ell: Option<usize>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:<20} {:>4} {:<10} {:>9} {:>6}  medians", "fixture", "metric", "t", "regime", "slope", "r2");
        for r in &self.rates {
            let t = r.t.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
            let meds: Vec<String> = r.medians.iter().map(|(n, m)| format!("{n}:{m:.3e}")).collect();
            let _ = write!(
                out,
                "{:<12} {:<20} {:>4} {:<10} {:>9.4} {:>6.3}  {}",
                r.fixture,
                r.metric,
                t,
                r.regime(ell),
                r.fit.slope,
                r.fit.r_squared,
                meds.join(" ")
            );
            if !r.note().is_empty() {
                let _ = write!(out, "  ({})", r.note());
            }
            out.push('\n');
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
