//! Refinement studies against closed-form oracles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiscreteManifold, ManifoldSpec};
use crate::heat::{solve_heat, Boundary, Domain, TimeGrid};
use crate::lemmas::build_cutoff;
use crate::liyau::{compute_q_at, JInput};

use super::report::TableRow;

/// Times at which the flat Gaussian anchor is compared with `n/(2t)`.
pub const ANCHOR_TIMES: [f64; 4] = [0.02, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub schema_version: u32,
    /// Base grid counts; each study scales them to its own chart.
    pub levels: Vec<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            schema_version: super::config::SCHEMA_VERSION,
            levels: vec![32, 64, 128],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: String,
    pub resolution: usize,
    pub h: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Convergence {
    pub study: String,
    pub rows: Vec<StudyRow>,
    /// `log2(e_{i}/e_{i+1})` between consecutive levels.
    pub orders: Vec<f64>,
    pub monotone: bool,
}

impl Convergence {
    fn new(study: &str, rows: Vec<StudyRow>) -> Self {
        let orders = rows
            .windows(2)
            .map(|w| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln())
            .collect();
        let monotone = rows.windows(2).all(|w| w[1].error <= w[0].error);
        Convergence {
            study: study.into(),
            rows,
            orders,
            monotone,
        }
    }

    pub fn last_order(&self) -> f64 {
        *self.orders.last().unwrap_or(&f64::NAN)
    }

    pub fn table_rows(&self) -> Vec<TableRow> {
        self.rows
            .iter()
            .map(|r| TableRow {
                scenario: format!("{}_{}", self.study, r.resolution),
                check: "refinement_error".into(),
                x: Some(r.h),
                y: None,
                t: None,
                lhs: r.error,
                rhs: f64::NAN,
                violated: false,
            })
            .collect()
    }
}

/// `sin(2πx) + 2` on the closed unit torus; max error at `t = 0.1` with
/// `Δt ∝ h²`.
pub fn eigenfunction_decay(levels: &[usize]) -> Result<Convergence> {
    let t = 0.1;
    let rows = levels
        .iter()
        .map(|&n| {
            let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(1.0, 1.0, n, n))?;
            let h = 1.0 / n as f64;
            let init: Vec<f64> = (0..m.num_vertices()).map(|v| (2.0 * PI * m.coords(v)[0]).sin() + 2.0).collect();
            let times = TimeGrid::new(vec![0.0, t], 0.5 * h * h)?;
            let u = solve_heat(&m, &Domain::whole(&m), &init, Boundary::Closed, &times)?;
            let decay = (-4.0 * PI * PI * t).exp();
            let error = (0..m.num_vertices())
                .map(|v| (u.values[1][v] - 2.0 - decay * (2.0 * PI * m.coords(v)[0]).sin()).abs())
                .fold(0.0, f64::max);
            Ok(StudyRow {
                study: "eigenfunction_decay".into(),
                resolution: n,
                h,
                error,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Convergence::new("eigenfunction_decay", rows))
}

/// Relative error of `|B(O, 1/4)|` against `π/16` on the unit torus.
pub fn ball_volume(levels: &[usize]) -> Result<Convergence> {
    let r = 0.25;
    let rows = levels
        .iter()
        .map(|&n| {
            let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(1.0, 1.0, n, n))?;
            let ball = m.ball(m.nearest_vertex([0.5, 0.5]), r)?;
            let exact = PI * r * r;
            Ok(StudyRow {
                study: "ball_volume".into(),
                resolution: n,
                h: 1.0 / n as f64,
                error: (ball.volume - exact).abs() / exact,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Convergence::new("ball_volume", rows))
}

/// Constant data stays constant: the error is exactly zero.
pub fn constant_solution(levels: &[usize]) -> Result<Convergence> {
    let rows = levels
        .iter()
        .map(|&n| {
            let m = DiscreteManifold::build(&ManifoldSpec::warped_disk("sinh(r)", 1.5, n, n))?;
            let times = TimeGrid::new(vec![0.0, 0.1, 0.5], 0.01)?;
            let u = solve_heat(&m, &Domain::whole(&m), &vec![3.0; m.num_vertices()], Boundary::Closed, &times)?;
            let error = u.values.iter().flatten().map(|x| (x - 3.0).abs()).fold(0.0, f64::max);
            Ok(StudyRow {
                study: "constant_solution".into(),
                resolution: n,
                h: 1.5 / n as f64,
                error,
            })
        })
        .collect::<Result<_>>()?;
    let mut c = Convergence::new("constant_solution", rows);
    c.orders.clear();
    Ok(c)
}

/// Worst relative error of `|∇u|²/u² - Δu/u` against `n/(2t)` for the
/// exact planar kernel on `[0, 2]²` with `n` cells per side, over
/// `B(O, 1/2)` and [`ANCHOR_TIMES`].
pub fn gaussian_anchor_error(n: usize) -> Result<f64> {
    let m = DiscreteManifold::build(&ManifoldSpec::flat_rect(2.0, 2.0, n, n))?;
    let o = m.nearest_vertex([1.0, 1.0]);
    let oc = m.coords(o);
    // ScalarTimeField starts at t = 0; that slice is a placeholder.
    let times: Vec<f64> = std::iter::once(0.0).chain(ANCHOR_TIMES).collect();
    let values = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return vec![1.0; m.num_vertices()];
            }
            (0..m.num_vertices())
                .map(|v| {
                    let c = m.coords(v);
                    let d2 = (c[0] - oc[0]).powi(2) + (c[1] - oc[1]).powi(2);
                    (-d2 / (4.0 * t)).exp() / (4.0 * PI * t)
                })
                .collect()
        })
        .collect();
    let u = crate::heat::ScalarTimeField::new(crate::heat::FieldKind::Heat, times, values)?;
    let region = m.ball(o, 0.5)?;
    let ks: Vec<usize> = (1..=ANCHOR_TIMES.len()).collect();
    let q = compute_q_at(&m, &u, JInput::Constant(1.0), 1.0, &region.members, &ks)?;
    let mut worst: f64 = 0.0;
    for (i, &t) in ANCHOR_TIMES.iter().enumerate() {
        let exact = m.dimension() as f64 / (2.0 * t);
        for p in 0..region.members.len() {
            worst = worst.max((q.q(i, p) - exact).abs() / exact);
        }
    }
    Ok(worst)
}

pub fn gaussian_anchor(levels: &[usize]) -> Result<Convergence> {
    let rows = levels
        .iter()
        .map(|&n| {
            Ok(StudyRow {
                study: "gaussian_anchor".into(),
                resolution: 2 * n,
                h: 1.0 / n as f64,
                error: gaussian_anchor_error(2 * n)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Convergence::new("gaussian_anchor", rows))
}

/// Relative change of the cutoff constant `c*` against the finest level,
/// on a flat torus of side 4 with radius 1.
pub fn cutoff_stability(levels: &[usize]) -> Result<Convergence> {
    let consts: Vec<(usize, f64)> = levels
        .iter()
        .map(|&n| {
            let n = 3 * n;
            let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(4.0, 4.0, n, n))?;
            let c = build_cutoff(&m, m.nearest_vertex([2.0, 2.0]), 1.0, 5)?.constant;
            Ok((n, c))
        })
        .collect::<Result<_>>()?;
    let finest = consts.last().unwrap().1;
    let rows = consts
        .iter()
        .map(|&(n, c)| StudyRow {
            study: "cutoff_constant".into(),
            resolution: n,
            h: 4.0 / n as f64,
            error: (c - finest).abs() / finest,
        })
        .collect();
    let mut c = Convergence::new("cutoff_constant", rows);
    c.orders.clear();
    Ok(c)
}

pub fn refinement_study(cfg: &StudyConfig) -> Result<Vec<Convergence>> {
    if cfg.levels.len() < 3 {
        return Err(Error::Config {
            field: "levels".into(),
            reason: format!("need at least 3 grid levels, got {}", cfg.levels.len()),
        });
    }
    if cfg.levels.windows(2).any(|w| w[1] <= w[0]) || cfg.levels[0] < 8 {
        return Err(Error::Config {
            field: "levels".into(),
            reason: "levels must increase and start at 8 or more".into(),
        });
    }
    let l = &cfg.levels;
    Ok(vec![
        eigenfunction_decay(l)?,
        ball_volume(l)?,
        constant_solution(l)?,
        gaussian_anchor(l)?,
        cutoff_stability(l)?,
    ])
}
