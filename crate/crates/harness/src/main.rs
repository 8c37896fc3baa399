use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lqg_latent::config::ExperimentConfig;
use lqg_latent::error::{HarnessError, HarnessResult};
use lqg_latent::formats::{
    controller_artifact, controller_from_artifact, model_artifact, model_from_artifact, read_blocks, read_dataset,
    representation_artifact, representation_from_artifact, write_blocks, write_dataset, write_dataset_csv,
    write_system_json,
};
use lqg_latent::pipeline::{learn, render_rows, Experiment, Row};
use lqg_latent::report::{check_report, read_results, sweep};
use lqg_latent_core::evaluation::evaluate;
use rayon::prelude::*;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "LQG_LATENT_THREADS";

#[derive(Parser)]
#[command(name = "lqg-latent", version, about = "Cost-driven latent model learning for finite-horizon LQG control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict the run to this single seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct CellArgs {
    #[command(flatten)]
    common: Common,
    /// Restrict to one sample size from the grid.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the modelling assumptions of the configured fixture.
    Check(Common),
    /// Collect exploration datasets for every (n, seed) cell.
    Collect {
        #[command(flatten)]
        cell: CellArgs,
        /// Also write a long-format CSV copy of each dataset.
        #[arg(long)]
        csv: bool,
    },
    /// Learn representation, latent model and controller from collected datasets.
    Learn(CellArgs),
    /// Evaluate learned artifacts against the ground truth.
    Evaluate(CellArgs),
    /// Full pipeline over the grid; writes results.csv.
    Run(Common),
    /// Rate summary of a results file.
    SweepReport {
        #[command(flatten)]
        common: Common,
        /// Results file; defaults to results.csv in the output directory.
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Context {
    fn new(common: &Common) -> HarnessResult<Self> {
        let mut cfg = ExperimentConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            cfg.seeds = vec![seed];
        }
        let out = common.out.clone().unwrap_or_else(|| cfg.out_dir());
        std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
        Ok(Self { cfg, out })
    }

    fn cells(&self, n: Option<usize>) -> HarnessResult<Vec<(usize, u64)>> {
        let grid: Vec<usize> = match n {
            Some(n) if self.cfg.n_grid.contains(&n) => vec![n],
            Some(n) => return Err(HarnessError::Validation(format!("n = {n} is not in the configured grid"))),
            None => self.cfg.n_grid.clone(),
        };
        Ok(grid
            .iter()
            .flat_map(|&n| self.cfg.seeds.iter().map(move |&s| (n, s)))
            .collect())
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn stem(n: usize, seed: u64) -> String {
    format!("n{n}_s{seed}")
}

fn write_text(path: &Path, text: &str) -> HarnessResult<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn cmd_check(common: &Common) -> HarnessResult<()> {
    let ctx = Context::new(common)?;
    let sys = ctx.cfg.system()?;
    let report = check_report(&ctx.cfg, &sys)?;
    write_text(&ctx.file("check.txt"), &report.text)?;
    print!("{}", report.text);
    Ok(())
}

fn cmd_collect(args: &CellArgs, csv: bool) -> HarnessResult<()> {
    let ctx = Context::new(&args.common)?;
    let exp = Experiment::new(ctx.cfg.clone())?;
    write_system_json(&ctx.file("system.json"), &exp.system)?;
    for (n, seed) in ctx.cells(args.n)? {
        let ds = exp.dataset(n, seed)?;
        write_dataset(&ctx.file(&format!("dataset_{}.bin", stem(n, seed))), &ds, exp.system.state_dim())?;
        if csv {
            write_dataset_csv(&ctx.file(&format!("dataset_{}.csv", stem(n, seed))), &ds)?;
        }
        eprintln!("collected n={n} seed={seed}");
    }
    Ok(())
}

fn cmd_learn(args: &CellArgs) -> HarnessResult<()> {
    let ctx = Context::new(&args.common)?;
    let exp = Experiment::new(ctx.cfg.clone())?;
    for (n, seed) in ctx.cells(args.n)? {
        let path = ctx.file(&format!("dataset_{}.bin", stem(n, seed)));
        let (_, ds) = read_dataset(&path)?;
        let learned = learn(&ds, &exp.corel_config(), exp.system.control_costs(), true)?;
        let s = stem(n, seed);
        write_blocks(&ctx.out, &format!("representation_{s}"), &representation_artifact(&learned.representation))?;
        if let (Some(model), Some(ctl)) = (&learned.model, &learned.controller) {
            write_blocks(&ctx.out, &format!("model_{s}"), &model_artifact(model))?;
            write_blocks(&ctx.out, &format!("controller_{s}"), &controller_artifact(ctl))?;
        }
        eprintln!("learned n={n} seed={seed}");
    }
    Ok(())
}

fn cmd_evaluate(args: &CellArgs) -> HarnessResult<()> {
    let ctx = Context::new(&args.common)?;
    let exp = Experiment::new(ctx.cfg.clone())?;
    let mut rows = Vec::new();
    for (n, seed) in ctx.cells(args.n)? {
        let s = stem(n, seed);
        let rep_stem = format!("representation_{s}");
        let rep = representation_from_artifact(&read_blocks(&ctx.out, &rep_stem)?, &ctx.file(&rep_stem))?;
        let model_stem = format!("model_{s}");
        let model = model_from_artifact(&read_blocks(&ctx.out, &model_stem)?, &ctx.file(&model_stem))?;
        let ctl_stem = format!("controller_{s}");
        let ctl = controller_from_artifact(&read_blocks(&ctx.out, &ctl_stem)?, &ctx.file(&ctl_stem))?;
        let report = evaluate(&exp.truth, &rep, &model, &ctl, ctx.cfg.ell)?;
        let e2e = if ctx.cfg.toggles.e2e {
            Some(exp.end_to_end(&rep, &ctl, seed)?)
        } else {
            None
        };
        rows.extend(exp.rows_for(n, seed, &rep, Some(&report), e2e.as_ref()));
    }
    write_text(&ctx.file("evaluation.csv"), &render_rows(&rows))
}

fn cmd_run(common: &Common) -> HarnessResult<()> {
    let ctx = Context::new(common)?;
    let started = Instant::now();
    let exp = Experiment::new(ctx.cfg.clone())?;
    let cells = exp.cells();
    let timed: Vec<(Vec<Row>, f64)> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let cell_start = Instant::now();
            let rows = exp.cell_rows(n, seed);
            (rows, cell_start.elapsed().as_secs_f64())
        })
        .collect();
    let mut log = String::new();
    let mut rows = Vec::new();
    for (&(n, seed), (cell_rows, seconds)) in cells.iter().zip(timed) {
        let status = cell_rows
            .iter()
            .find(|r| r.metric.starts_with("error_"))
            .map_or("ok".to_string(), |r| r.metric.clone());
        log.push_str(&format!("n={n} seed={seed} status={status} seconds={seconds:.3}\n"));
        rows.extend(cell_rows);
    }
    log.push_str(&format!("total seconds={:.3}\n", started.elapsed().as_secs_f64()));
    write_text(&ctx.file("results.csv"), &render_rows(&rows))?;
    write_text(&ctx.file("run.log"), &log)?;
    eprint!("{log}");
    Ok(())
}

fn cmd_sweep_report(common: &Common, results: Option<&Path>) -> HarnessResult<()> {
    let ctx = Context::new(common)?;
    let path = results.map(Path::to_path_buf).unwrap_or_else(|| ctx.file("results.csv"));
    let rows = read_results(&path)?;
    let summary = sweep(&rows)?;
    let ell = Some(ctx.cfg.ell);
    let text = summary.to_text(ell);
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    write_text(&ctx.file("summary.txt"), &text)?;
    write_text(&ctx.file("summary.csv"), &summary.to_csv(ell))?;
    print!("{text}");
    Ok(())
}

fn configure_threads() -> HarnessResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&k| k >= 1)
        .ok_or_else(|| HarnessError::Validation(format!("{THREADS_VAR} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HarnessError::Validation(format!("thread pool: {e}")))
}

fn dispatch(cli: &Cli) -> HarnessResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Check(c) => cmd_check(c),
        Command::Collect { cell, csv } => cmd_collect(cell, *csv),
        Command::Learn(c) => cmd_learn(c),
        Command::Evaluate(c) => cmd_evaluate(c),
        Command::Run(c) => cmd_run(c),
        Command::SweepReport { common, results } => cmd_sweep_report(common, results.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
