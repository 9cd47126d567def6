//! The benchmark harness behind the CLI subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::aggressive::{run_aggressive_multi_chain, AggressiveConfig, ModeStats};
use crate::config::{ExperimentConfig, Method, TargetSpec};
use crate::diagnostics::{build_report_with, DiagnosticsReport, ModeConfig, ReportOptions};
use crate::error::Result;
use crate::mass::MassMatrix;
use crate::report::{self, AggressiveRow, Provenance, ResultRow, AGGRESSIVE_HEADER, RESULTS_HEADER};
use crate::sampler::{run_multi_chain, ChainResult};
use crate::targets::Target;
use crate::verify::{run_probe, Probe, VerifyOptions, VerifyOutcome};

pub const DEFAULT_RESULTS_PATH: &str = "results.csv";
pub const DEFAULT_AGGRESSIVE_PATH: &str = "aggressive.csv";
/// Chains per configuration in the aggressive suite.
pub const SUITE_CHAINS: usize = 4;
/// Autocorrelation mixing-time cap used by the aggressive suite.
pub const AGGRESSIVE_MIXING_CAP: usize = 1000;
/// The suite's named coefficient pairs.
pub const SUITE_CONFIGS: [(&str, f64, f64); 3] = [("A", 8.0, 5.0), ("B", 10.0, 6.0), ("C", 15.0, 8.0)];
pub const DEFAULT_MODE_RADIUS: f64 = 2.0;

/// Everything produced by one (target, method) pair.
#[derive(Debug, Clone)]
pub struct JobResult {
    pub distribution: String,
    pub method: Method,
    pub chains: Vec<ChainResult>,
    /// Per-chain mode statistics of aggressive runs, hop counts included.
    pub aggressive_modes: Option<Vec<ModeStats>>,
    pub report: DiagnosticsReport,
    pub wall_seconds: f64,
}

impl JobResult {
    pub fn row(&self) -> ResultRow<'_> {
        ResultRow {
            distribution: self.distribution.clone(),
            method: self.method.label(),
            report: &self.report,
            wall_seconds: self.wall_seconds,
        }
    }
}

fn mode_config(model: &dyn Target, agg: Option<&AggressiveConfig>) -> Option<ModeConfig> {
    if let Some(a) = agg {
        return Some(ModeConfig { centers: a.mode_centers.clone(), radius: a.mode_radius });
    }
    let centers = model.descriptor().mode_centers;
    (centers.len() > 1).then_some(ModeConfig { centers, radius: DEFAULT_MODE_RADIUS })
}

/// Runs one job of `cfg`.
pub fn run_job(cfg: &ExperimentConfig, target: &TargetSpec, method: Method) -> Result<JobResult> {
    let model = target.build()?;
    let mass = MassMatrix::identity(model.dim())?;
    let params = method.params(cfg.dt, cfg.steps)?;
    let mut run = cfg.run.clone();
    run.initial = cfg.initial.resolve(model.as_ref(), run.n_chains)?;
    let start = Instant::now();
    let (chains, agg, aggressive_modes) = if method.is_aggressive() {
        let agg = cfg.aggressive.resolve(model.as_ref())?;
        let runs = run_aggressive_multi_chain(model.as_ref(), &params, &mass, &agg, &run)?;
        let modes: Vec<ModeStats> = runs.iter().map(|r| r.modes.clone()).collect();
        (runs.into_iter().map(|r| r.chain).collect(), Some(agg), Some(modes))
    } else {
        (run_multi_chain(model.as_ref(), &params, &mass, &run)?, None, None)
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    let opts = ReportOptions { modes: mode_config(model.as_ref(), agg.as_ref()), ..ReportOptions::default() };
    let mut report = build_report_with(&chains, model.as_ref(), &opts)?;
    if let (Some(per_chain), Some(total)) = (&aggressive_modes, report.mode_stats.as_mut()) {
        let hops = ModeStats::aggregate(per_chain);
        total.hop_attempts = hops.hop_attempts;
        total.hop_accepts = hops.hop_accepts;
    }
    Ok(JobResult { distribution: model.descriptor().label, method, chains, aggressive_modes, report, wall_seconds })
}

/// Runs every job of `cfg` in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<JobResult>> {
    cfg.jobs().map(|(t, m)| run_job(cfg, t, m)).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `results.csv` becomes `results.energies.csv`.
pub fn energies_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    path.with_file_name(format!("{stem}.energies.csv"))
}

fn write_energies(path: &Path, provenance: &Provenance, jobs: &[JobResult]) -> Result<()> {
    let mut rows = Vec::new();
    for job in jobs {
        for (c, chain) in job.chains.iter().enumerate() {
            for (i, r) in chain.records.iter().flatten().enumerate() {
                rows.push(vec![
                    job.distribution.clone(),
                    job.method.label(),
                    c.to_string(),
                    (i + 1).to_string(),
                    format!("{:e}", r.h0),
                    format!("{:e}", r.h_star),
                    u8::from(r.accepted).to_string(),
                    u8::from(r.divergent).to_string(),
                ]);
            }
        }
    }
    let header = ["Distribution", "Method", "Chain", "Iteration", "H0", "H*", "Accepted", "Divergent"];
    report::write_csv(create(path)?, provenance, &header, &rows)
}

/// Runs the experiment, writes the results CSV and prints a summary to `out`.
/// Returns the path written.
pub fn cmd_run(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<PathBuf> {
    let provenance = Provenance::new(cfg.run.master_seed, cfg.config_hash.clone());
    let mut jobs = Vec::new();
    for (t, m) in cfg.jobs() {
        writeln!(out, "running {} / {}", t.name, m.label())?;
        jobs.push(run_job(cfg, t, m)?);
    }
    let rows: Vec<Vec<String>> = jobs.iter().map(|j| j.row().fields()).collect();
    let path = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_RESULTS_PATH));
    report::write_csv(create(&path)?, &provenance, &RESULTS_HEADER, &rows)?;
    if cfg.record_energies {
        write_energies(&energies_path(&path), &provenance, &jobs)?;
    }
    writeln!(out, "\n{}", report::render_table(&RESULTS_HEADER, &rows))?;
    writeln!(out, "{}\nwrote {}", provenance.comment(), path.display())?;
    Ok(path)
}

/// Runs one verification probe and prints its table. Returns whether it passed.
pub fn cmd_verify(probe: Probe, opts: &VerifyOptions, out: &mut dyn Write) -> Result<VerifyOutcome> {
    let outcome = run_probe(probe, opts)?;
    write!(out, "{}", outcome.render())?;
    Ok(outcome)
}

/// Runs the aggressive suite on every target of `cfg` and returns its rows.
pub fn run_aggressive_suite(cfg: &ExperimentConfig) -> Result<Vec<AggressiveRow>> {
    let mut rows = Vec::new();
    for target in &cfg.targets {
        let model = target.build()?;
        let mass = MassMatrix::identity(model.dim())?;
        let agg = cfg.aggressive.resolve(model.as_ref())?;
        let mut run = cfg.run.clone();
        run.n_chains = SUITE_CHAINS;
        run.initial = cfg.initial.resolve(model.as_ref(), SUITE_CHAINS)?;
        for (name, alpha2, beta2) in SUITE_CONFIGS {
            let params = Method::Aggressive { alpha2, beta2 }.params(cfg.dt, cfg.steps)?;
            let start = Instant::now();
            let runs = run_aggressive_multi_chain(model.as_ref(), &params, &mass, &agg, &run)?;
            let wall_seconds = start.elapsed().as_secs_f64();
            let modes = ModeStats::aggregate(&runs.iter().map(|r| r.modes.clone()).collect::<Vec<_>>());
            let chains: Vec<ChainResult> = runs.into_iter().map(|r| r.chain).collect();
            let opts = ReportOptions { mixing_max_lag: AGGRESSIVE_MIXING_CAP, ..ReportOptions::default() };
            let rep = build_report_with(&chains, model.as_ref(), &opts)?;
            rows.push(AggressiveRow {
                config: if cfg.targets.len() > 1 { format!("{name} ({})", target.name) } else { name.to_string() },
                alpha2,
                beta2,
                modes,
                autocorr_mixing: rep.mixing_time,
                mpl_accept: rep.accept_rate,
                min_ess: rep.min_ess,
                grad_evals: rep.total_grad_evals,
                wall_seconds,
            });
        }
    }
    Ok(rows)
}

/// Runs the aggressive suite, writes its CSV and prints a summary.
pub fn cmd_aggressive_suite(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<PathBuf> {
    let provenance = Provenance::new(cfg.run.master_seed, cfg.config_hash.clone());
    let rows: Vec<Vec<String>> = run_aggressive_suite(cfg)?.iter().map(AggressiveRow::fields).collect();
    let path = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_AGGRESSIVE_PATH));
    report::write_csv(create(&path)?, &provenance, &AGGRESSIVE_HEADER, &rows)?;
    writeln!(out, "{}", report::render_table(&AGGRESSIVE_HEADER, &rows))?;
    writeln!(out, "{}\nwrote {}", provenance.comment(), path.display())?;
    Ok(path)
}
