use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, DiscreteManifold, Vertex};

/// Which equation produced a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Heat,
    HeatKernel,
    W,
    J,
    Other,
}

/// Scalar field on all vertices at each node of a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarTimeField {
    pub kind: FieldKind,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ScalarTimeField {
    pub fn new(kind: FieldKind, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let f = ScalarTimeField { kind, times, values };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::Degenerate("time grid and slices differ in length".into()));
        }
        check_time_grid(&self.times)?;
        for (k, slice) in self.values.iter().enumerate() {
            if let Some(v) = slice.iter().position(|x| !x.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "non-finite value at vertex {v}, time {}",
                    self.times[k]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Running supremum over `members × [0, t_k]`.
    pub fn running_sup(&self, members: &[Vertex]) -> Vec<f64> {
        let mut acc = f64::NEG_INFINITY;
        self.values
            .iter()
            .map(|s| {
                acc = members.iter().map(|&v| s[v]).fold(acc, f64::max);
                acc
            })
            .collect()
    }

    /// Parabolic rescaling `t → s² t` (values unchanged).
    pub fn rescaled_time(&self, s: f64) -> ScalarTimeField {
        ScalarTimeField {
            kind: self.kind,
            times: self.times.iter().map(|t| t * s * s).collect(),
            values: self.values.clone(),
        }
    }
}

pub(crate) fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::Degenerate("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Degenerate("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Output times plus the largest internal implicit step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub outputs: Vec<f64>,
    pub dt_max: f64,
}

impl TimeGrid {
    pub fn new(outputs: Vec<f64>, dt_max: f64) -> Result<Self> {
        check_time_grid(&outputs)?;
        if !(dt_max > 0.0) {
            return Err(Error::Degenerate(format!("dt must be positive, got {dt_max}")));
        }
        Ok(TimeGrid { outputs, dt_max })
    }

    /// `n_out + 1` equally spaced outputs on `[0, t_end]`.
    pub fn uniform(t_end: f64, n_out: usize, dt_max: f64) -> Result<Self> {
        let outputs = (0..=n_out)
            .map(|k| t_end * k as f64 / n_out as f64)
            .collect();
        Self::new(outputs, dt_max)
    }

    /// Number of equal internal steps and their size for interval `k → k+1`.
    pub fn substeps(&self, k: usize) -> (usize, f64) {
        let span = self.outputs[k + 1] - self.outputs[k];
        let n = (span / self.dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, span / n as f64)
    }

    pub fn with_dt(&self, dt_max: f64) -> Self {
        TimeGrid {
            outputs: self.outputs.clone(),
            dt_max,
        }
    }

    pub fn t_end(&self) -> f64 {
        *self.outputs.last().unwrap()
    }
}

/// Set of interior vertices on which an evolution equation is posed.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    members: Vec<Vertex>,
    local: Vec<Option<usize>>,
}

impl Domain {
    pub fn whole(m: &DiscreteManifold) -> Self {
        Self::from_members(m, (0..m.num_vertices()).collect())
    }

    pub fn from_members(m: &DiscreteManifold, mut members: Vec<Vertex>) -> Self {
        members.sort_unstable();
        members.dedup();
        let mut local = vec![None; m.num_vertices()];
        for (k, &v) in members.iter().enumerate() {
            local[v] = Some(k);
        }
        Domain { members, local }
    }

    pub fn from_ball(m: &DiscreteManifold, ball: &Ball) -> Self {
        Self::from_members(m, ball.members.clone())
    }

    pub fn members(&self) -> &[Vertex] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.local.get(v).is_some_and(|x| x.is_some())
    }

    pub fn local_index(&self, v: Vertex) -> Option<usize> {
        self.local.get(v).copied().flatten()
    }

    pub fn is_whole(&self) -> bool {
        self.members.len() == self.local.len()
    }

    pub(crate) fn gather(&self, global: &[f64]) -> Vec<f64> {
        self.members.iter().map(|&v| global[v]).collect()
    }

    pub(crate) fn scatter(&self, local: &[f64], fill: f64, n: usize) -> Vec<f64> {
        let mut out = vec![fill; n];
        for (k, &v) in self.members.iter().enumerate() {
            out[v] = local[k];
        }
        out
    }
}
