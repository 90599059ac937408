use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, DiscreteManifold, Vertex};

use super::field::{Domain, FieldKind, ScalarTimeField, TimeGrid};
use super::stepper::{Boundary, StepError, StepOperator};

fn operator<'a>(
    cache: &'a mut HashMap<u64, StepOperator>,
    m: &DiscreteManifold,
    domain: &Domain,
    dt: f64,
    boundary: Boundary,
) -> Result<&'a StepOperator> {
    if !cache.contains_key(&dt.to_bits()) {
        let op = StepOperator::new(m, domain, dt, None, boundary).map_err(|e| match e {
            StepError::Other(e) => e,
            StepError::LostDominance => unreachable!("no potential term"),
        })?;
        cache.insert(dt.to_bits(), op);
    }
    Ok(&cache[&dt.to_bits()])
}

/// Implicit Euler solve of `u_t = Δu` on `domain`.
///
/// Outside the domain the returned slices carry the Dirichlet value, or the
/// frozen initial data for a closed sub-domain.
pub fn solve_heat(
    m: &DiscreteManifold,
    domain: &Domain,
    init: &[f64],
    boundary: Boundary,
    times: &TimeGrid,
) -> Result<ScalarTimeField> {
    if init.len() != m.num_vertices() {
        return Err(Error::Degenerate("initial datum has the wrong length".into()));
    }
    if let Some(v) = init.iter().position(|x| !x.is_finite()) {
        return Err(Error::Degenerate(format!("initial datum not finite at vertex {v}")));
    }
    let n = m.num_vertices();
    let (bval, outside): (f64, Vec<f64>) = match boundary {
        Boundary::Dirichlet(b) => (b, vec![b; n]),
        Boundary::Closed => (0.0, init.to_vec()),
    };
    let mut cur = domain.gather(init);
    // Steps act on u - s, so constant data gives a zero right-hand side and
    // stays exactly constant.
    let shift = match boundary {
        Boundary::Dirichlet(b) => b,
        Boundary::Closed => cur.first().copied().unwrap_or(0.0),
    };
    cur.iter_mut().for_each(|x| *x -= shift);
    let bval = bval - shift;
    let scatter = |local: &[f64]| {
        let mut out = outside.clone();
        for (k, &v) in domain.members().iter().enumerate() {
            out[v] = local[k] + shift;
        }
        out
    };

    let mut cache = HashMap::new();
    let mut next = vec![0.0; cur.len()];
    let mut values = vec![scatter(&cur)];
    for k in 0..times.outputs.len() - 1 {
        let (steps, dt) = times.substeps(k);
        let op = operator(&mut cache, m, domain, dt, boundary)?;
        for _ in 0..steps {
            op.step(&cur, bval, None, &mut next)?;
            std::mem::swap(&mut cur, &mut next);
        }
        values.push(scatter(&cur));
    }
    ScalarTimeField::new(FieldKind::Heat, times.outputs.clone(), values)
}

/// Discrete kernel `G(·, t; source, 0)` on a domain: the solution from the
/// normalized point mass `δ_source / w_source`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatKernel {
    pub source: Vertex,
    pub members: Vec<Vertex>,
    pub dirichlet: bool,
    pub field: ScalarTimeField,
}

impl HeatKernel {
    pub fn times(&self) -> &[f64] {
        &self.field.times
    }

    pub fn at(&self, k: usize, x: Vertex) -> f64 {
        self.field.values[k][x]
    }

    /// `∫ G dV` at each output time.
    pub fn mass(&self, m: &DiscreteManifold) -> Vec<f64> {
        self.field
            .values
            .iter()
            .map(|s| self.members.iter().map(|&v| m.weight(v) * s[v]).sum())
            .collect()
    }
}

fn point_mass(m: &DiscreteManifold, source: Vertex) -> Vec<f64> {
    let mut init = vec![0.0; m.num_vertices()];
    init[source] = 1.0 / m.weight(source);
    init
}

pub fn dirichlet_heat_kernel(
    m: &DiscreteManifold,
    ball: &Ball,
    source: Vertex,
    times: &TimeGrid,
) -> Result<HeatKernel> {
    m.check_vertex(source)?;
    if !ball.contains(source) {
        return Err(Error::SourceOutsideDomain(source));
    }
    let domain = Domain::from_ball(m, ball);
    let mut field = solve_heat(m, &domain, &point_mass(m, source), Boundary::Dirichlet(0.0), times)?;
    field.kind = FieldKind::HeatKernel;
    Ok(HeatKernel {
        source,
        members: ball.members.clone(),
        dirichlet: true,
        field,
    })
}

/// Kernel of the whole (closed) manifold.
pub fn global_heat_kernel(m: &DiscreteManifold, source: Vertex, times: &TimeGrid) -> Result<HeatKernel> {
    m.check_vertex(source)?;
    let domain = Domain::whole(m);
    let mut field = solve_heat(m, &domain, &point_mass(m, source), Boundary::Closed, times)?;
    field.kind = FieldKind::HeatKernel;
    Ok(HeatKernel {
        source,
        members: domain.members().to_vec(),
        dirichlet: false,
        field,
    })
}
