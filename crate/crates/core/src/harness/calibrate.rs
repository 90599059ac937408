//! Fitting `(C, κ)` on a scenario suite.
//!
//! For each scenario the smallest `C` on a logarithmic grid is found such
//! that the envelope, the lower bound on `J` and the main bound all pass
//! with `κ` equal to the scenario's own `k(p, 1)`. Every one of these checks
//! only gets easier as `C` grows, so the calibrated `C` is the maximum of
//! the per-scenario minima and `κ` the largest suite `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::Constants;
use super::scenario::Prepared;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CGrid {
    pub min: f64,
    pub max: f64,
    pub per_decade: usize,
}

impl Default for CGrid {
    fn default() -> Self {
        CGrid {
            min: 1e-3,
            max: 1e3,
            per_decade: 8,
        }
    }
}

impl CGrid {
    pub fn values(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.log10(), self.max.log10());
        let n = ((hi - lo) * self.per_decade as f64).round() as usize;
        (0..=n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / n as f64)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub scenario: String,
    pub k_value: f64,
    /// Smallest passing grid value per check, `None` when none passes.
    pub min_c_envelope: Option<f64>,
    pub min_c_lower_j: Option<f64>,
    pub min_c_li_yau: Option<f64>,
    pub min_c: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub c: f64,
    pub kappa: f64,
    pub grid: CGrid,
    /// Scenario that sets `C`.
    pub binding: String,
    pub entries: Vec<CalibrationEntry>,
}

impl CalibrationReport {
    pub fn constants(&self) -> Constants {
        Constants {
            c: self.c,
            kappa: self.kappa,
        }
    }
}

fn first_pass(grid: &[f64], mut pass: impl FnMut(f64) -> Result<bool>) -> Result<Option<f64>> {
    for &c in grid {
        if pass(c)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

pub fn calibrate_entry(p: &Prepared, grid: &[f64]) -> Result<CalibrationEntry> {
    let k = p.k_value;
    let envelope = first_pass(grid, |c| {
        let params = p.params(c, k)?;
        Ok(p.envelope(&params).iter().all(|&(_, h, env)| h <= env * (1.0 + 1e-12)))
    })?;
    let lower_j = first_pass(grid, |c| {
        let params = p.params(c, k)?;
        Ok(p.lower_j(&params)?.iter().all(|&(_, jl, jmin, _)| jl <= jmin * (1.0 + 1e-12)))
    })?;
    let li_yau = first_pass(grid, |c| Ok(p.li_yau(&p.params(c, k)?)?.0.passed()))?;
    let min_c = match (envelope, lower_j, li_yau) {
        (Some(a), Some(b), Some(c)) => Some(a.max(b).max(c)),
        _ => None,
    };
    Ok(CalibrationEntry {
        scenario: p.id().to_string(),
        k_value: k,
        min_c_envelope: envelope,
        min_c_lower_j: lower_j,
        min_c_li_yau: li_yau,
        min_c,
    })
}

pub fn calibrate_constants(suite: &[Prepared], grid: CGrid) -> Result<CalibrationReport> {
    use rayon::prelude::*;
    if suite.is_empty() {
        return Err(Error::Calibration("empty suite".into()));
    }
    if let Some(p) = suite.iter().find(|p| p.w.is_none() || p.u.is_none()) {
        return Err(Error::Calibration(format!(
            "scenario `{}` lacks the envelope, lower-J or main-bound checks",
            p.id()
        )));
    }
    let values = grid.values();
    let entries: Vec<CalibrationEntry> =
        suite.par_iter().map(|p| calibrate_entry(p, &values)).collect::<Result<_>>()?;
    summarize(entries, grid)
}

/// `C` as the largest per-scenario minimum, `κ` as the largest `k`.
pub fn summarize(entries: Vec<CalibrationEntry>, grid: CGrid) -> Result<CalibrationReport> {
    if entries.is_empty() {
        return Err(Error::Calibration("empty suite".into()));
    }
    if let Some(bad) = entries.iter().find(|e| e.min_c.is_none()) {
        let which: Vec<&str> = [
            ("envelope", bad.min_c_envelope),
            ("lower_j", bad.min_c_lower_j),
            ("li_yau", bad.min_c_li_yau),
        ]
        .iter()
        .filter(|(_, c)| c.is_none())
        .map(|(n, _)| *n)
        .collect();
        return Err(Error::Calibration(format!(
            "no C in [{}, {}] passes on `{}` (k = {}); failing: {}",
            grid.min,
            grid.max,
            bad.scenario,
            bad.k_value,
            which.join(", ")
        )));
    }
    let binding = entries
        .iter()
        .fold(&entries[0], |a, b| if b.min_c > a.min_c { b } else { a });
    Ok(CalibrationReport {
        c: binding.min_c.unwrap(),
        kappa: entries.iter().map(|e| e.k_value).fold(0.0, f64::max),
        grid,
        binding: binding.scenario.clone(),
        entries,
    })
}
