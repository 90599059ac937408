//! Negative Ricci field `V = |Ric⁻|` and integral curvature norms.
//!
//! For surfaces `Ric = K g`, so `V = max(0, -K)` under the eigenvalue
//! convention. On a warped product `dr² + f(r)² dθ²` the Gauss curvature is
//! `K = -f''/f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiscreteManifold, Vertex};

/// Pointwise norm applied to the negative part of Ricci.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RicNorm {
    /// Magnitude of the most negative eigenvalue.
    #[default]
    Eigenvalue,
    /// Tensor norm of `Ric⁻`; `√n` times the eigenvalue norm for surfaces.
    Frobenius,
}

/// Gauss curvature at each vertex (curvature units, scaled with the metric).
pub fn gauss_curvature(m: &DiscreteManifold) -> Vec<f64> {
    let s2 = m.length_scale() * m.length_scale();
    match m.warp() {
        None => vec![0.0; m.num_vertices()],
        Some((f, f2)) => {
            // ratio at the pole is taken as the limit from the first ring
            let pole_r = 1e-3 * m.spacing()[0];
            (0..m.num_vertices())
                .map(|v| {
                    let r = if Some(v) == m.pole() { pole_r } else { m.coords(v)[0] };
                    -f2.eval(r) / f.eval(r) / s2
                })
                .collect()
        }
    }
}

pub fn ric_minus_field(m: &DiscreteManifold, norm: RicNorm) -> Result<Vec<f64>> {
    let factor = match norm {
        RicNorm::Eigenvalue => 1.0,
        RicNorm::Frobenius => (m.dimension() as f64).sqrt(),
    };
    let k = gauss_curvature(m);
    if let Some((v, val)) = k.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::Degenerate(format!(
            "curvature is not finite at vertex {v} ({val})"
        )));
    }
    Ok(k.into_iter().map(|x| factor * (-x).max(0.0)).collect())
}

/// Centers over which the supremum in `k(p, r)` is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSet {
    All,
    /// Regular sub-grid with at most `max` centers (plus the pole).
    Grid { max: usize },
    Explicit(Vec<Vertex>),
}

impl Default for SampleSet {
    fn default() -> Self {
        SampleSet::Grid { max: 256 }
    }
}

impl SampleSet {
    pub fn resolve(&self, m: &DiscreteManifold) -> Vec<Vertex> {
        match self {
            SampleSet::All => (0..m.num_vertices()).collect(),
            SampleSet::Explicit(v) => v.clone(),
            SampleSet::Grid { max } => {
                let [n1, n2] = m.grid();
                if n1 * n2 <= *max {
                    return (0..m.num_vertices()).collect();
                }
                let step = ((n1 * n2) as f64 / *max as f64).sqrt().ceil() as usize;
                let mut out: Vec<Vertex> = (0..n2)
                    .step_by(step)
                    .flat_map(|j| (0..n1).step_by(step).map(move |i| j * n1 + i))
                    .collect();
                out.extend(m.pole());
                out
            }
        }
    }
}

/// `k(x, p, r)` per center and `k(p, r)` as their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KNorm {
    pub p: f64,
    pub radius: f64,
    pub local: Vec<(Vertex, f64)>,
    pub global: f64,
    pub argmax: Vertex,
}

/// `r² (⨍_{B(x,r)} V^p)^{1/p}` at one center.
pub fn k_local(m: &DiscreteManifold, v_field: &[f64], p: f64, radius: f64, center: Vertex) -> Result<f64> {
    let ball = m.ball(center, radius)?;
    Ok(radius * radius * m.p_mean(&ball, v_field, p)?)
}

pub fn k_norm(
    m: &DiscreteManifold,
    v_field: &[f64],
    p: f64,
    radius: f64,
    centers: &SampleSet,
) -> Result<KNorm> {
    let n = m.dimension() as f64;
    if !(p > n / 2.0) {
        return Err(Error::Hypothesis(format!(
            "integral curvature norm needs p > n/2 = {}, got p = {p}",
            n / 2.0
        )));
    }
    if !(radius > 0.0) || radius > m.length_scale() * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!(
            "radius must lie in (0, {}], got {radius}",
            m.length_scale()
        )));
    }
    if let Some(bad) = v_field.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Degenerate(format!("V must be non-negative, found {bad}")));
    }
    let centers = centers.resolve(m);
    let local: Vec<(Vertex, f64)> = if v_field.iter().all(|&x| x == 0.0) {
        centers.iter().map(|&c| (c, 0.0)).collect()
    } else {
        centers
            .par_iter()
            .map(|&c| k_local(m, v_field, p, radius, c).map(|k| (c, k)))
            .collect::<Result<_>>()?
    };
    let (argmax, global) = local
        .iter()
        .copied()
        .fold((centers.first().copied().unwrap_or(0), 0.0), |acc, (c, k)| {
            if k > acc.1 {
                (c, k)
            } else {
                acc
            }
        });
    Ok(KNorm {
        p,
        radius,
        local,
        global,
        argmax,
    })
}

/// Field `V` together with the norms computed from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureData {
    pub v: Vec<f64>,
    pub norms: Vec<KNorm>,
}

impl CurvatureData {
    pub fn compute(
        m: &DiscreteManifold,
        norm: RicNorm,
        requests: &[(f64, f64)],
        centers: &SampleSet,
    ) -> Result<Self> {
        let v = ric_minus_field(m, norm)?;
        let norms = requests
            .iter()
            .map(|&(p, r)| k_norm(m, &v, p, r, centers))
            .collect::<Result<_>>()?;
        Ok(CurvatureData { v, norms })
    }

    pub fn global(&self, p: f64, radius: f64) -> Option<f64> {
        self.norms
            .iter()
            .find(|k| k.p == p && k.radius == radius)
            .map(|k| k.global)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldSpec;
    use approx::assert_relative_eq;

    const BUMP: &str = "r*(1+0.1*exp(-(r-1)^2/0.01))";

    /// Hand-differentiated `-f''/f` for the bump warp.
    fn bump_v(r: f64) -> f64 {
        let (a, r0, s2) = (0.1, 1.0, 0.01);
        let e = (-(r - r0).powi(2) / s2).exp();
        let g = 1.0 + a * e;
        let g1 = a * e * (-2.0 * (r - r0) / s2);
        let g2 = a * e * (4.0 * (r - r0).powi(2) / (s2 * s2) - 2.0 / s2);
        let f = r * g;
        let f2 = 2.0 * g1 + r * g2;
        (f2 / f).max(0.0)
    }

    #[test]
    fn flat_and_constant_curvature_models() {
        let flat = DiscreteManifold::build(&ManifoldSpec::flat_torus(1.0, 1.0, 16, 16)).unwrap();
        assert!(ric_minus_field(&flat, RicNorm::Eigenvalue).unwrap().iter().all(|&x| x == 0.0));
        let polar = DiscreteManifold::build(&ManifoldSpec::warped_disk("r", 1.0, 16, 16)).unwrap();
        assert!(ric_minus_field(&polar, RicNorm::Eigenvalue).unwrap().iter().all(|&x| x == 0.0));
        let hyp = DiscreteManifold::build(&ManifoldSpec::warped_disk("sinh(r)", 1.5, 16, 16)).unwrap();
        for x in ric_minus_field(&hyp, RicNorm::Eigenvalue).unwrap() {
            assert_relative_eq!(x, 1.0, max_relative = 1e-9);
        }
        for x in ric_minus_field(&hyp, RicNorm::Frobenius).unwrap() {
            assert_relative_eq!(x, 2f64.sqrt(), max_relative = 1e-9);
        }
        let sphere = DiscreteManifold::build(&ManifoldSpec::warped_disk("sin(r)", 1.5, 16, 16)).unwrap();
        assert!(ric_minus_field(&sphere, RicNorm::Eigenvalue).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bump_field_matches_hand_derivative() {
        let m = DiscreteManifold::build(&ManifoldSpec::warped_disk(BUMP, 2.0, 64, 16)).unwrap();
        let v = ric_minus_field(&m, RicNorm::Eigenvalue).unwrap();
        for (i, &x) in v.iter().enumerate() {
            if Some(i) == m.pole() {
                continue;
            }
            let exact = bump_v(m.coords(i)[0]);
            assert!((x - exact).abs() <= 1e-8 * exact.max(1.0), "{x} vs {exact}");
        }
    }

    #[test]
    fn k_norm_examples() {
        let flat = DiscreteManifold::build(&ManifoldSpec::flat_torus(1.0, 1.0, 16, 16)).unwrap();
        let zero = vec![0.0; flat.num_vertices()];
        for p in [1.5, 2.0, 4.0] {
            assert_eq!(k_norm(&flat, &zero, p, 0.5, &SampleSet::All).unwrap().global, 0.0);
        }
        let ones = vec![1.0; flat.num_vertices()];
        let k = k_norm(&flat, &ones, 3.0, 0.4, &SampleSet::All).unwrap();
        for (_, x) in k.local {
            assert_relative_eq!(x, 0.16, max_relative = 1e-14);
        }
        assert!(matches!(
            k_norm(&flat, &ones, 1.0, 0.5, &SampleSet::All),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn k_norm_is_exactly_scale_invariant() {
        let m = DiscreteManifold::build(&ManifoldSpec::warped_disk(BUMP, 2.0, 24, 24)).unwrap();
        let v = ric_minus_field(&m, RicNorm::Eigenvalue).unwrap();
        let centers = SampleSet::Grid { max: 40 };
        let k1 = k_norm(&m, &v, 2.0, 1.0, &centers).unwrap();
        for s in [0.5, 2.0, 0.3] {
            let ms = m.rescaled(s);
            let vs = ric_minus_field(&ms, RicNorm::Eigenvalue).unwrap();
            let ks = k_norm(&ms, &vs, 2.0, s, &centers).unwrap();
            assert_relative_eq!(ks.global, k1.global, max_relative = 1e-12);
        }
    }

    #[test]
    fn bump_k_norm_matches_fine_grid_quadrature() {
        // Oracle: the same ball average evaluated by fine radial/angular
        // quadrature of the closed-form V, centered at the pole where balls
        // are exact disks {r <= 1}.
        let m = DiscreteManifold::build(&ManifoldSpec::warped_disk(BUMP, 2.0, 160, 32)).unwrap();
        let v = ric_minus_field(&m, RicNorm::Eigenvalue).unwrap();
        let p = m.pole().unwrap();
        let got = k_local(&m, &v, 2.0, 1.0, p).unwrap();
        let f = |r: f64| r * (1.0 + 0.1 * (-(r - 1.0f64).powi(2) / 0.01).exp());
        let n = 4 * 160 * 8;
        let h = 1.0 / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let r = (k as f64 + 0.5) * h;
            num += bump_v(r).powi(2) * f(r) * h;
            den += f(r) * h;
        }
        let exact = (num / den).sqrt();
        assert_relative_eq!(got, exact, max_relative = 0.02);
    }
}
