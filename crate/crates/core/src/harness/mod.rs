//! Scenario runs, calibration, refinement studies and report files.

pub mod calibrate;
pub mod catalog;
pub mod config;
pub mod report;
pub mod scenario;
pub mod study;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::k_norm;
use crate::error::Result;
use crate::geometry::DiscreteManifold;

pub use calibrate::{calibrate_constants, CGrid, CalibrationEntry, CalibrationReport};
pub use catalog::{builtin_config, calibration_suite, gaussian_anchor, lemma_scenarios, negative_controls};
pub use config::{CheckKind, Config, Constants, Initial, ParamSettings, Scenario, SolverSettings, SCHEMA_VERSION};
pub use report::{format_table, write_table, CheckOutcome, ConstantSource, RunReport, RunSummary, TableRow, TABLE_HEADER};
pub use scenario::{Prepared, RunOptions};
pub use study::{refinement_study, Convergence, StudyConfig};

pub fn prepare_all(scenarios: &[Scenario], seed: u64, opts: &RunOptions) -> Result<Vec<Prepared>> {
    scenarios.par_iter().map(|s| Prepared::prepare(s, seed, opts)).collect()
}

/// Calibration suite with the Li–Yau inputs of `like`.
fn suite_like(like: &ParamSettings) -> Vec<Scenario> {
    calibration_suite()
        .into_iter()
        .map(|mut s| {
            s.params = ParamSettings {
                c: None,
                kappa: None,
                ..like.clone()
            };
            s
        })
        .collect()
}

/// Calibrates on the built-in suite, reusing already prepared scenarios
/// that coincide with suite members.
pub fn calibrate_for(
    like: &ParamSettings,
    have: &[Prepared],
    seed: u64,
    grid: CGrid,
    opts: &RunOptions,
) -> Result<CalibrationReport> {
    let suite = suite_like(like);
    let missing: Vec<Scenario> = suite
        .iter()
        .filter(|s| !have.iter().any(|p| &p.scenario == *s))
        .cloned()
        .collect();
    let fresh = prepare_all(&missing, seed, opts)?;
    let members: Vec<&Prepared> = suite
        .iter()
        .map(|s| have.iter().chain(&fresh).find(|p| &p.scenario == s).expect("prepared"))
        .collect();
    let entries = members
        .par_iter()
        .map(|p| calibrate::calibrate_entry(p, &grid.values()))
        .collect::<Result<Vec<_>>>()?;
    calibrate::summarize(entries, grid)
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub rows: Vec<TableRow>,
}

/// Runs every scenario of `cfg`; constants come from the scenario, the
/// config, or calibration on the built-in suite, in that order.
pub fn run_config(cfg: &Config, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let prepared = prepare_all(&cfg.scenarios, seed, opts)?;
    let mut calibration = None;
    let mut constants = cfg.constants;
    if constants.is_none() {
        if let Some(p) = prepared.iter().find(|p| p.resolve(None).is_err()) {
            let rep = calibrate_for(&p.scenario.params, &prepared, seed, CGrid::default(), opts)?;
            constants = Some(rep.constants());
            calibration = Some(rep);
        }
    }
    let evaluated: Vec<(RunReport, Vec<TableRow>)> = prepared
        .par_iter()
        .map(|p| {
            let (mut report, rows) = p.evaluate(constants, opts)?;
            if calibration.is_some() && report.constants.source == ConstantSource::Config {
                report.constants.source = ConstantSource::Calibrated;
            }
            Ok((report, rows))
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(evaluated.len());
    let mut rows = Vec::new();
    for (r, t) in evaluated {
        reports.push(r);
        rows.extend(t);
    }
    let mut summary = RunSummary::new(reports);
    summary.calibration = calibration;
    Ok(RunOutput { summary, rows })
}

/// Keeps only the lemma checks; scenarios left without checks are dropped.
pub fn lemma_config(cfg: &Config) -> Config {
    let lemma = [CheckKind::Doubling, CheckKind::Sobolev, CheckKind::Gaussian, CheckKind::Cutoff];
    let scenarios = cfg
        .scenarios
        .iter()
        .filter_map(|s| {
            let mut s = s.clone();
            s.checks.retain(|c| lemma.contains(c));
            (!s.checks.is_empty()).then_some(s)
        })
        .collect();
    Config {
        scenarios,
        ..cfg.clone()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifoldPreview {
    pub scenario: String,
    pub num_vertices: usize,
    pub resolution: [usize; 2],
    pub mesh_size_length: f64,
    pub total_volume: f64,
    pub analytic_volume: f64,
    pub unit_ball_volume: f64,
    pub k_value: f64,
}

pub fn preview(s: &Scenario) -> Result<ManifoldPreview> {
    let m = DiscreteManifold::build(&s.manifold)?;
    let v = crate::curvature::ric_minus_field(&m, s.params.ric_norm)?;
    let k = k_norm(&m, &v, s.params.p, 1.0, &s.solver.centers)?.global;
    let center = s
        .center_point
        .map(|p| m.nearest_vertex(p))
        .or(m.pole())
        .unwrap_or_else(|| m.nearest_vertex(chart_middle(&m)));
    Ok(ManifoldPreview {
        scenario: s.id.clone(),
        num_vertices: m.num_vertices(),
        resolution: s.manifold.resolution,
        mesh_size_length: m.mesh_size(),
        total_volume: m.total_volume(),
        analytic_volume: m.analytic_volume(),
        unit_ball_volume: m.ball(center, 1.0)?.volume,
        k_value: k,
    })
}

fn chart_middle(m: &DiscreteManifold) -> [f64; 2] {
    let [n1, n2] = m.grid();
    m.coords((n2 / 2) * n1 + n1 / 2)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// `report.json` and `table.csv` in `dir`.
pub fn write_outputs(dir: &Path, report: &impl Serialize, rows: &[TableRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), report)?;
    write_table(&dir.join("table.csv"), rows)
}
