use crate::error::{Error, Result};
use crate::geometry::DiscreteManifold;
use crate::sparse::{EnvelopeCholesky, SymmetricCsr};

use super::field::Domain;

/// Treatment of edges leaving the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// No flux across the domain frontier (or no frontier at all).
    Closed,
    /// Prescribed constant value outside the domain.
    Dirichlet(f64),
}

/// One implicit Euler step for `u_t = Δu + q u + g` on a domain:
/// `(W(1 - dt q) - dt L) u⁺ = W u + dt (coupling · b) + dt W g`.
pub(crate) struct StepOperator {
    pub dt: f64,
    weights: Vec<f64>,
    coupling: Vec<f64>,
    matrix: SymmetricCsr,
    chol: EnvelopeCholesky,
}

pub(crate) enum StepError {
    /// `1 - dt q` is not positive somewhere; the caller should shrink `dt`.
    LostDominance,
    Other(Error),
}

impl From<Error> for StepError {
    fn from(e: Error) -> Self {
        StepError::Other(e)
    }
}

impl StepOperator {
    pub fn new(
        m: &DiscreteManifold,
        domain: &Domain,
        dt: f64,
        potential: Option<&[f64]>,
        boundary: Boundary,
    ) -> std::result::Result<Self, StepError> {
        let l = m.stiffness();
        let n = domain.len();
        let mut rows = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut coupling = Vec::with_capacity(n);
        for (i, &v) in domain.members().iter().enumerate() {
            let w = m.weight(v);
            let q = potential.map_or(0.0, |p| p[i]);
            let damp = 1.0 - dt * q;
            if !(damp > 0.0) {
                return Err(StepError::LostDominance);
            }
            let mut row = Vec::with_capacity(6);
            let mut diag = w * damp;
            let mut out_flux = 0.0;
            for (j, t) in l.row(v) {
                if j == v {
                    continue;
                }
                match domain.local_index(j) {
                    Some(k) => {
                        row.push((k, -dt * t));
                        diag += dt * t;
                    }
                    None => {
                        out_flux += t;
                        if matches!(boundary, Boundary::Dirichlet(_)) {
                            diag += dt * t;
                        }
                    }
                }
            }
            row.push((i, diag));
            rows.push(row);
            weights.push(w);
            coupling.push(out_flux);
        }
        let matrix = SymmetricCsr::from_rows(rows);
        let chol = EnvelopeCholesky::factor(&matrix)?;
        Ok(StepOperator {
            dt,
            weights,
            coupling,
            matrix,
            chol,
        })
    }

    /// Advances `prev` by one step. `boundary_value` is the Dirichlet datum
    /// (ignored for closed domains); `source` is `g` on the domain.
    pub fn step(
        &self,
        prev: &[f64],
        boundary_value: f64,
        source: Option<&[f64]>,
        out: &mut [f64],
    ) -> Result<()> {
        let n = prev.len();
        let mut rhs = Vec::with_capacity(n);
        for i in 0..n {
            let mut b = self.weights[i] * prev[i] + self.dt * self.coupling[i] * boundary_value;
            if let Some(g) = source {
                b += self.dt * self.weights[i] * g[i];
            }
            rhs.push(b);
        }
        self.chol.solve(&rhs, out);

        let mut ax = vec![0.0; n];
        self.matrix.mul_vec(out, &mut ax);
        let scale = rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let res = ax
            .iter()
            .zip(&rhs)
            .fold(0.0f64, |a, (x, b)| a.max((x - b).abs()));
        if !(res <= 1e-9 * scale.max(f64::MIN_POSITIVE)) && res > 0.0 {
            return Err(Error::Solve(format!(
                "relative residual {:.3e} after direct solve (dt = {})",
                res / scale,
                self.dt
            )));
        }
        Ok(())
    }
}
