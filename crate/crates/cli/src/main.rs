use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liyau_core::harness::{
    self, builtin_config, calibration_suite, lemma_config, lemma_scenarios, negative_controls, preview,
    refinement_study, CGrid, Config, RunOptions, StudyConfig, TableRow,
};
use liyau_core::{Error, Result};
use serde_json::json;

/// Verifies Li-Yau type gradient bounds and their supporting lemmas on
/// discrete model surfaces.
#[derive(Parser)]
#[command(name = "liyau", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON); the built-in suite when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for report.json and table.csv.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    threads: usize,
    /// Single thread and no timings, so reports are byte-stable.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Manifold preview statistics.
    Build,
    /// Run every check of every scenario.
    Verify,
    /// Run only the lemma checks.
    Lemmas,
    /// Fit (C, kappa) on the calibration suite.
    Calibrate,
    /// Refinement studies against closed-form oracles.
    Study,
}

fn load(common: &Common, fallback: impl FnOnce() -> Config) -> Result<Config> {
    match &common.config {
        Some(p) => Config::load(p),
        None => Ok(fallback()),
    }
}

fn run(cli: &Cli, opts: &RunOptions) -> Result<i32> {
    let c = &cli.common;
    let out: &Path = &c.out;
    match cli.command {
        Command::Build => {
            let cfg = load(c, builtin_config)?;
            let previews: Vec<_> = cfg.scenarios.iter().map(preview).collect::<Result<_>>()?;
            let rows: Vec<TableRow> = previews
                .iter()
                .map(|p| TableRow {
                    scenario: p.scenario.clone(),
                    check: "unit_ball_volume".into(),
                    x: None,
                    y: None,
                    t: None,
                    lhs: p.unit_ball_volume,
                    rhs: f64::NAN,
                    violated: false,
                })
                .collect();
            for p in &previews {
                println!(
                    "{:<20} vertices {:>7}  h {:.4}  volume {:.5} (analytic {:.5})  k(p,1) {:.4e}",
                    p.scenario, p.num_vertices, p.mesh_size_length, p.total_volume, p.analytic_volume, p.k_value
                );
            }
            let report = json!({ "schema_version": harness::SCHEMA_VERSION, "previews": previews });
            harness::write_outputs(out, &report, &rows)?;
            Ok(0)
        }
        Command::Verify | Command::Lemmas => {
            let cfg = if matches!(cli.command, Command::Lemmas) {
                lemma_config(&load(c, || {
                    let mut cfg = builtin_config();
                    cfg.scenarios = lemma_scenarios();
                    cfg.scenarios.extend(negative_controls().into_iter().filter(|s| !s.corrupt_solution));
                    cfg
                })?)
            } else {
                load(c, builtin_config)?
            };
            let run = harness::run_config(&cfg, opts)?;
            for r in &run.summary.reports {
                for ch in &r.checks {
                    let status = match (ch.passed, r.negative_control) {
                        (true, _) => "pass",
                        (false, true) => "flagged (negative control)",
                        (false, false) if !ch.hypothesis_satisfied => "fail (hypothesis not met)",
                        (false, false) => "FAIL",
                    };
                    println!("{:<20} {:<14} {status}", r.scenario, ch.check);
                }
            }
            if let Some(cal) = &run.summary.calibration {
                println!("calibrated C = {}, kappa = {} (bound by `{}`)", cal.c, cal.kappa, cal.binding);
            }
            println!("{} failure(s); {}", run.summary.failures, run.summary.interpretation);
            harness::write_outputs(out, &run.summary, &run.rows)?;
            Ok(run.summary.exit_code())
        }
        Command::Calibrate => {
            let cfg = load(c, || Config {
                scenarios: calibration_suite(),
                ..builtin_config()
            })?;
            let seed = opts.seed.unwrap_or(cfg.seed);
            let prepared = harness::prepare_all(&cfg.scenarios, seed, opts)?;
            let rep = harness::calibrate_constants(&prepared, CGrid::default())?;
            let rows: Vec<TableRow> = rep
                .entries
                .iter()
                .map(|e| TableRow {
                    scenario: e.scenario.clone(),
                    check: "calibration_min_c".into(),
                    x: None,
                    y: None,
                    t: None,
                    lhs: e.min_c.unwrap_or(f64::NAN),
                    rhs: rep.c,
                    violated: false,
                })
                .collect();
            for e in &rep.entries {
                println!("{:<20} k {:.4e}  min C {:?}", e.scenario, e.k_value, e.min_c);
            }
            println!("C = {}, kappa = {} (bound by `{}`)", rep.c, rep.kappa, rep.binding);
            let report = json!({ "schema_version": harness::SCHEMA_VERSION, "calibration": rep });
            harness::write_outputs(out, &report, &rows)?;
            Ok(0)
        }
        Command::Study => {
            let cfg: StudyConfig = match &c.config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => StudyConfig::default(),
            };
            let studies = refinement_study(&cfg)?;
            let mut rows = Vec::new();
            for s in &studies {
                println!("{:<20} errors {:?}  orders {:?}", s.study, s.rows.iter().map(|r| r.error).collect::<Vec<_>>(), s.orders);
                rows.extend(s.table_rows());
            }
            let report = json!({ "schema_version": harness::SCHEMA_VERSION, "studies": studies });
            harness::write_outputs(out, &report, &rows)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let threads = if c.deterministic { 1 } else { c.threads };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("warning: {e}");
    }
    let opts = RunOptions {
        seed: c.seed,
        threads: rayon::current_num_threads(),
        deterministic: c.deterministic,
    };
    match run(&cli, &opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            match &e {
                Error::Config { field, reason } => eprintln!("error: config field `{field}`: {reason}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(2)
        }
    }
}
