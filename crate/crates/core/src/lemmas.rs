//! Numerical checks of the four supporting facts: volume doubling, the
//! local Sobolev inequality, Gaussian heat kernel upper bounds and cutoff
//! functions with controlled derivatives.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, DiscreteManifold, Vertex};
use crate::heat::HeatKernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub center: Vertex,
    pub r1: f64,
    pub r2: f64,
    pub volume1: f64,
    pub volume2: f64,
    /// `(|B(r₂)|/r₂ⁿ) / (|B(r₁)|/r₁ⁿ)`.
    pub ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingReport {
    pub rows: Vec<DoublingRow>,
    pub worst_ratio: f64,
    pub failures: usize,
}

pub const DOUBLING_FACTOR: f64 = 2.0;

pub fn check_volume_doubling(
    m: &DiscreteManifold,
    centers: &[Vertex],
    pairs: &[(f64, f64)],
) -> Result<DoublingReport> {
    let scale = m.length_scale();
    for &(r1, r2) in pairs {
        if !(r1 > 0.0 && r1 <= r2 && r2 <= scale * (1.0 + 1e-12)) {
            return Err(Error::InvalidSpec(format!(
                "doubling radii must satisfy 0 < r1 <= r2 <= {scale}, got ({r1}, {r2})"
            )));
        }
    }
    let r_max = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let n = m.dimension() as i32;
    let rows: Vec<Vec<DoublingRow>> = centers
        .par_iter()
        .map(|&c| {
            m.check_vertex(c)?;
            let d = m.distances_from(c, Some(r_max));
            let vol = |r: f64| -> f64 {
                d.iter()
                    .zip(m.weights())
                    .filter(|(x, _)| **x <= r)
                    .map(|(_, w)| w)
                    .sum()
            };
            Ok(pairs
                .iter()
                .map(|&(r1, r2)| {
                    let (v1, v2) = (vol(r1), vol(r2));
                    let ratio = (v2 / r2.powi(n)) / (v1 / r1.powi(n));
                    DoublingRow {
                        center: c,
                        r1,
                        r2,
                        volume1: v1,
                        volume2: v2,
                        ratio,
                        passed: ratio <= DOUBLING_FACTOR,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<DoublingRow> = rows.into_iter().flatten().collect();
    Ok(DoublingReport {
        worst_ratio: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
        failures: rows.iter().filter(|r| !r.passed).count(),
        rows,
    })
}

/// Plateau profile: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, polynomial smoothstep
/// in between.
pub fn plateau(s: f64, degree: u32) -> f64 {
    if s <= 0.5 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    1.0 - smoothstep(2.0 * s - 1.0, degree)
}

fn smoothstep(x: f64, degree: u32) -> f64 {
    match degree {
        3 => x * x * (3.0 - 2.0 * x),
        5 => x * x * x * (10.0 + x * (-15.0 + 6.0 * x)),
        _ => x.powi(4) * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x))),
    }
}

fn check_degree(degree: u32) -> Result<()> {
    if matches!(degree, 3 | 5 | 7) {
        Ok(())
    } else {
        Err(Error::TestFunction(format!("profile degree must be 3, 5 or 7, got {degree}")))
    }
}

/// Test functions for the Sobolev check, as functions of the distance to
/// the ball center (lengths are fractions of the ball radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `(1 - (d/R)²)^power` for `d < R = support·r`.
    Radial { power: u32, support: f64 },
    /// 1 on `d ≤ inner·r`, quintic ramp down to 0 at `(inner + width)·r`.
    Plateau { inner: f64, width: f64 },
    /// Sum of one to three off-center radial bumps drawn from a seeded stream.
    Random { seed: u64, index: u64 },
}

impl TestFunction {
    pub fn label(&self) -> String {
        match self {
            TestFunction::Radial { power, support } => format!("radial_k{power}_s{support}"),
            TestFunction::Plateau { inner, width } => format!("plateau_{inner}_{width}"),
            TestFunction::Random { seed, index } => format!("random_{seed}_{index}"),
        }
    }

    pub fn evaluate(&self, m: &DiscreteManifold, ball: &Ball, d: &[f64]) -> Result<Vec<f64>> {
        let r = ball.radius;
        match *self {
            TestFunction::Radial { power, support } => {
                if !(support > 0.0 && support <= 1.0) || power == 0 {
                    return Err(Error::TestFunction(format!("bad radial bump {self:?}")));
                }
                let rr = support * r;
                Ok(d.iter().map(|&x| radial(x / rr, power)).collect())
            }
            TestFunction::Plateau { inner, width } => {
                if !(inner >= 0.0 && width > 0.0) {
                    return Err(Error::TestFunction(format!("bad plateau {self:?}")));
                }
                Ok(d.iter()
                    .map(|&x| {
                        let s = (x / r - inner) / width;
                        if s <= 0.0 {
                            1.0
                        } else {
                            plateau(0.5 + 0.5 * s, 5)
                        }
                    })
                    .collect())
            }
            TestFunction::Random { seed, index } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                let inner: Vec<Vertex> = ball
                    .members
                    .iter()
                    .copied()
                    .filter(|&v| d[v] <= 0.5 * r)
                    .collect();
                let count = rng.gen_range(1..=3);
                let mut f = vec![0.0; m.num_vertices()];
                for _ in 0..count {
                    let c = inner[rng.gen_range(0..inner.len())];
                    let rad = rng.gen_range(0.15..0.45) * r;
                    let amp = rng.gen_range(0.2..1.0);
                    let power = rng.gen_range(2..=4);
                    let dc = m.distances_from(c, Some(rad));
                    for (fv, x) in f.iter_mut().zip(&dc) {
                        *fv += amp * radial(x / rad, power);
                    }
                }
                Ok(f)
            }
        }
    }
}

fn radial(s: f64, power: u32) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - s * s).powi(power as i32)
    }
}

/// Radial bumps of several powers, a steepening plateau family and 20
/// seeded random bumps.
pub fn sobolev_suite(seed: u64) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for power in [2, 3, 4, 6] {
        for support in [0.5, 0.9] {
            out.push(TestFunction::Radial { power, support });
        }
    }
    for width in [0.4, 0.2, 0.1] {
        out.push(TestFunction::Plateau { inner: 0.4, width });
    }
    out.extend((0..20).map(|index| TestFunction::Random { seed, index }));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevRow {
    pub function: String,
    /// `(⨍ f²)^{1/2} / (r ⨍ |∇f|)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SobolevReport {
    pub center: Vertex,
    pub radius: f64,
    pub rows: Vec<SobolevRow>,
    /// Largest ratio over the suite.
    pub constant: f64,
}

/// Ratio of the two sides of the Sobolev inequality for one function.
pub fn sobolev_ratio(m: &DiscreteManifold, ball: &Ball, f: &[f64]) -> Result<f64> {
    if ball.is_empty() {
        return Err(Error::EmptyBall);
    }
    if let Some(v) = m.frontier(&ball.members).into_iter().find(|&v| f[v] != 0.0) {
        return Err(Error::TestFunction(format!(
            "support reaches the ball boundary at vertex {v}"
        )));
    }
    if let Some(v) = (0..m.num_vertices()).find(|&v| f[v] != 0.0 && !ball.contains(v)) {
        return Err(Error::TestFunction(format!("support leaves the ball at vertex {v}")));
    }
    let (mut l2, mut l1) = (0.0, 0.0);
    for &v in &ball.members {
        let w = m.weight(v);
        l2 += w * f[v] * f[v];
        l1 += w * m.grad_sq_at(f, v).sqrt();
    }
    if l1 == 0.0 {
        return Err(Error::TestFunction("test function is constant".into()));
    }
    let lhs = (l2 / ball.volume).sqrt();
    let rhs = ball.radius * l1 / ball.volume;
    Ok(lhs / rhs)
}

pub fn check_sobolev(
    m: &DiscreteManifold,
    center: Vertex,
    radius: f64,
    functions: &[TestFunction],
) -> Result<SobolevReport> {
    let ball = m.ball(center, radius)?;
    let d = m.distances_from(center, None);
    let rows: Vec<SobolevRow> = functions
        .par_iter()
        .map(|tf| {
            let f = tf.evaluate(m, &ball, &d)?;
            Ok(SobolevRow {
                function: tf.label(),
                ratio: sobolev_ratio(m, &ball, &f)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SobolevReport {
        center,
        radius,
        constant: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
        rows,
    })
}

/// Which kernel values enter the Gaussian fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSampling {
    pub t_min: f64,
    pub t_max: f64,
    /// Largest `d²/t` used; the far tail is dominated by scheme error.
    pub max_d2_over_t: f64,
    /// Target vertices `y`; the kernel sources are the `x`.
    pub targets: Vec<Vertex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSample {
    pub x: Vertex,
    pub y: Vertex,
    pub t: f64,
    pub d: f64,
    pub g: f64,
    pub volume_x: f64,
    pub volume_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    /// Envelope constant: least-squares intercept raised until no sample
    /// lies above the bound.
    pub c1: f64,
    pub c2: f64,
    pub c1_least_squares: f64,
    pub rms_residual: f64,
    pub max_residual: f64,
    pub samples: usize,
    pub t_range: [f64; 2],
    pub d_range: [f64; 2],
}

impl GaussianFit {
    pub fn bound(&self, t: f64, d: f64, volume_x: f64, volume_y: f64) -> f64 {
        self.c1 / (volume_x * volume_y).sqrt() * (-d * d / (self.c2 * t)).exp()
    }
}

pub fn gaussian_samples(
    m: &DiscreteManifold,
    kernels: &[HeatKernel],
    sampling: &GaussianSampling,
) -> Result<Vec<GaussianSample>> {
    let rho_max = sampling.t_max.sqrt();
    // vertex → sorted (distance, weight) prefix for ball volumes up to √t_max
    let mut volumes: BTreeMap<Vertex, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut vertices: Vec<Vertex> = kernels.iter().map(|k| k.source).collect();
    vertices.extend(&sampling.targets);
    vertices.sort_unstable();
    vertices.dedup();
    let tables: Vec<(Vertex, (Vec<f64>, Vec<f64>))> = vertices
        .par_iter()
        .map(|&z| {
            let d = m.distances_from(z, Some(rho_max));
            let mut pairs: Vec<(f64, f64)> = d
                .iter()
                .zip(m.weights())
                .filter(|(x, _)| x.is_finite() && **x <= rho_max)
                .map(|(x, w)| (*x, *w))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            let (ds, cum): (Vec<f64>, Vec<f64>) = pairs
                .into_iter()
                .map(|(x, w)| {
                    acc += w;
                    (x, acc)
                })
                .unzip();
            (z, (ds, cum))
        })
        .collect();
    volumes.extend(tables);
    let volume = |z: Vertex, rho: f64| -> f64 {
        let (ds, cum) = &volumes[&z];
        let k = ds.partition_point(|&x| x <= rho);
        if k == 0 {
            0.0
        } else {
            cum[k - 1]
        }
    };

    let mut out = Vec::new();
    for kernel in kernels {
        let x = kernel.source;
        let dx = m.distances_from(x, None);
        for (k, &t) in kernel.times().iter().enumerate() {
            if !(t > 0.0 && t >= sampling.t_min && t <= sampling.t_max) {
                continue;
            }
            let rho = t.sqrt();
            let vx = volume(x, rho);
            for &y in &sampling.targets {
                let d = dx[y];
                let g = kernel.at(k, y);
                if !(g > 0.0) || !d.is_finite() || d * d / t > sampling.max_d2_over_t {
                    continue;
                }
                let vy = volume(y, rho);
                if vx > 0.0 && vy > 0.0 {
                    out.push(GaussianSample {
                        x,
                        y,
                        t,
                        d,
                        g,
                        volume_x: vx,
                        volume_y: vy,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub const MIN_GAUSSIAN_SAMPLES: usize = 10;

/// Least squares of `log(G √(|B_x||B_y|))` against `-d²/t`.
pub fn fit_gaussian(samples: &[GaussianSample]) -> Result<GaussianFit> {
    if samples.len() < MIN_GAUSSIAN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: MIN_GAUSSIAN_SAMPLES,
        });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (-s.d * s.d / s.t, (s.g * (s.volume_x * s.volume_y).sqrt()).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all samples share the same d²/t".into()));
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::Degenerate(format!("fitted decay rate is not positive ({slope})")));
    }
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
    let max_residual = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let span = |f: fn(&GaussianSample) -> f64| {
        samples
            .iter()
            .map(f)
            .fold([f64::INFINITY, f64::NEG_INFINITY], |a, x| [a[0].min(x), a[1].max(x)])
    };
    Ok(GaussianFit {
        c1: (intercept + max_residual.max(0.0)).exp(),
        c2: 1.0 / slope,
        c1_least_squares: intercept.exp(),
        rms_residual: rms,
        max_residual,
        samples: samples.len(),
        t_range: span(|s| s.t),
        d_range: span(|s| s.d),
    })
}

pub fn fit_gaussian_bound(
    m: &DiscreteManifold,
    kernels: &[HeatKernel],
    sampling: &GaussianSampling,
) -> Result<GaussianFit> {
    fit_gaussian(&gaussian_samples(m, kernels, sampling)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffField {
    pub center: Vertex,
    pub radius: f64,
    pub degree: u32,
    pub phi: Vec<f64>,
    /// `max (|∇φ|² + |Δφ|) r²`.
    pub constant: f64,
    pub argmax: Vertex,
}

/// `φ = η(d(center, ·)/r)` with the plateau profile `η`.
pub fn build_cutoff(m: &DiscreteManifold, center: Vertex, radius: f64, degree: u32) -> Result<CutoffField> {
    check_degree(degree)?;
    if !(radius > 0.0 && radius <= m.length_scale() * (1.0 + 1e-12)) {
        return Err(Error::InvalidSpec(format!(
            "cutoff radius must lie in (0, {}], got {radius}",
            m.length_scale()
        )));
    }
    let ball = m.ball(center, radius)?;
    if !m.ball_inside_chart(&ball) {
        return Err(Error::Clipped { center, radius });
    }
    let d = m.distances_from(center, None);
    let phi: Vec<f64> = d.iter().map(|&x| plateau(x / radius, degree)).collect();
    let r2 = radius * radius;
    let (argmax, constant) = (0..m.num_vertices())
        .map(|v| (v, (m.grad_sq_at(&phi, v) + m.laplacian_at(&phi, v).abs()) * r2))
        .fold((center, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    Ok(CutoffField {
        center,
        radius,
        degree,
        phi,
        constant,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldSpec;
    use crate::heat::{global_heat_kernel, TimeGrid};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn beta_three_halves(k: u32) -> f64 {
        // B(3/2, k) = (k-1)! / Π_{j<k} (3/2 + j)
        let mut out = 1.0;
        for j in 0..k {
            out *= if j == 0 { 1.0 } else { j as f64 };
            out /= 1.5 + j as f64;
        }
        out
    }

    #[test]
    fn doubling_examples() {
        let flat = DiscreteManifold::build(&ManifoldSpec::flat_torus(2.0, 2.0, 128, 128)).unwrap();
        let c = flat.nearest_vertex([1.0, 1.0]);
        let rep = check_volume_doubling(&flat, &[c], &[(0.25, 0.5), (0.5, 0.9)]).unwrap();
        for r in &rep.rows {
            assert!((r.ratio - 1.0).abs() < 0.03, "{r:?}");
        }
        assert_eq!(rep.failures, 0);

        let thin = DiscreteManifold::build(&ManifoldSpec::flat_torus(0.05, 2.0, 8, 320)).unwrap();
        let c = thin.nearest_vertex([0.0, 1.0]);
        let rep = check_volume_doubling(&thin, &[c], &[(0.1, 0.5)]).unwrap();
        // area of a wrapped strip ball: ∫_{-ε/2}^{ε/2} 2√(r² - y²) dy
        let area = |r: f64| {
            let e: f64 = 0.05;
            let half = e / 2.0;
            r * r * ((half / r).asin() * 2.0) + 2.0 * half * (r * r - half * half).sqrt()
        };
        let exact = (area(0.5) / 0.25) / (area(0.1) / 0.01);
        // one cell at each end of the short ball is 3% of its length
        assert!((rep.rows[0].ratio - exact).abs() < 0.03 * exact, "{} vs {exact}", rep.rows[0].ratio);
        assert!((exact - 0.2).abs() < 0.01);

        let hyp = DiscreteManifold::build(&ManifoldSpec::warped_disk("sinh(5*r)/5", 1.0, 128, 64)).unwrap();
        let rep = check_volume_doubling(&hyp, &[hyp.pole().unwrap()], &[(0.2, 1.0)]).unwrap();
        let vol = |r: f64| 2.0 * PI * ((5.0 * r).cosh() - 1.0) / 25.0;
        let exact = vol(1.0) / (vol(0.2) / 0.04);
        assert!((exact - 5.39).abs() < 0.01);
        assert!((rep.rows[0].ratio - exact).abs() < 0.05 * exact);
        assert_eq!(rep.failures, 1);
    }

    #[test]
    fn radial_bump_ratio_matches_closed_form() {
        let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(2.0, 2.0, 160, 160)).unwrap();
        let c = m.nearest_vertex([1.0, 1.0]);
        let funcs: Vec<TestFunction> = [2, 3, 4]
            .into_iter()
            .map(|power| TestFunction::Radial { power, support: 0.8 })
            .collect();
        let rep = check_sobolev(&m, c, 0.5, &funcs).unwrap();
        for (row, k) in rep.rows.iter().zip([2u32, 3, 4]) {
            let exact = 1.0 / ((2.0 * k as f64 + 1.0).sqrt() * 2.0 * k as f64 * beta_three_halves(k));
            assert_relative_eq!(row.ratio, exact, max_relative = 0.02);
        }
    }

    #[test]
    fn sobolev_ratio_is_homogeneous_and_plateaus_saturate() {
        let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(2.0, 2.0, 160, 160)).unwrap();
        let c = m.nearest_vertex([1.0, 1.0]);
        let ball = m.ball(c, 0.5).unwrap();
        let d = m.distances_from(c, None);
        let f = TestFunction::Random { seed: 3, index: 1 }.evaluate(&m, &ball, &d).unwrap();
        let g: Vec<f64> = f.iter().map(|x| 7.5 * x).collect();
        let (a, b) = (sobolev_ratio(&m, &ball, &f).unwrap(), sobolev_ratio(&m, &ball, &g).unwrap());
        assert!((a - b).abs() <= 1e-14 * a);

        let widths = [0.4, 0.2, 0.1, 0.05];
        let funcs: Vec<TestFunction> = widths.iter().map(|&width| TestFunction::Plateau { inner: 0.4, width }).collect();
        let rep = check_sobolev(&m, c, 0.5, &funcs).unwrap();
        for w in rep.rows.windows(2) {
            assert!(w[1].ratio > w[0].ratio);
        }
        assert!(rep.constant < 0.5);
        assert!(rep.constant > 0.45);

        let whole = check_sobolev(&m, c, 0.5, &sobolev_suite(42)).unwrap();
        assert_eq!(whole.rows.len(), 31);
        assert!(whole.constant < 0.5);
    }

    #[test]
    fn support_touching_boundary_rejected() {
        let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(2.0, 2.0, 64, 64)).unwrap();
        let c = m.nearest_vertex([1.0, 1.0]);
        let ball = m.ball(c, 0.5).unwrap();
        let f: Vec<f64> = (0..m.num_vertices()).map(|v| if ball.contains(v) { 1.0 } else { 0.0 }).collect();
        assert!(matches!(sobolev_ratio(&m, &ball, &f), Err(Error::TestFunction(_))));
    }

    #[test]
    fn exact_gaussian_fit() {
        let mut samples = Vec::new();
        for (i, t) in [0.05, 0.1, 0.2].into_iter().enumerate() {
            for k in 0..8 {
                let d = 0.1 * k as f64;
                let g = (-d * d / (4.0 * t)).exp() / (4.0 * PI * t);
                samples.push(GaussianSample {
                    x: 0,
                    y: i * 8 + k,
                    t,
                    d,
                    g,
                    volume_x: PI * t,
                    volume_y: PI * t,
                });
            }
        }
        let fit = fit_gaussian(&samples).unwrap();
        assert_relative_eq!(fit.c2, 4.0, max_relative = 1e-12);
        assert_relative_eq!(fit.c1, 0.25, max_relative = 1e-12);
        assert!(fit.rms_residual < 1e-12);
        assert!(matches!(fit_gaussian(&samples[..9]), Err(Error::TooFewSamples { got: 9, need: 10 })));
    }

    #[test]
    fn discrete_flat_kernel_fit() {
        let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(4.0, 4.0, 128, 128)).unwrap();
        let x = m.nearest_vertex([2.0, 2.0]);
        let times = TimeGrid::new(vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3], 0.002).unwrap();
        let k = global_heat_kernel(&m, x, &times).unwrap();
        let targets: Vec<Vertex> = (0..40)
            .map(|i| m.nearest_vertex([2.0 + 0.03 * i as f64, 2.0 + 0.011 * i as f64]))
            .collect();
        let sampling = GaussianSampling {
            t_min: 0.05,
            t_max: 0.3,
            max_d2_over_t: 12.0,
            targets,
        };
        let fit = fit_gaussian_bound(&m, &[k], &sampling).unwrap();
        assert!((fit.c2 - 4.0).abs() < 0.2, "{fit:?}");
        let samples = gaussian_samples(&m, &[global_heat_kernel(&m, x, &times).unwrap()], &sampling).unwrap();
        for s in samples {
            assert!(s.g <= fit.bound(s.t, s.d, s.volume_x, s.volume_y) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn negative_curvature_fit_stays_below_four() {
        // The K = -1 kernel carries an extra decaying factor (d / sinh d)^{1/2},
        // so the fitted exponent is steeper than the Euclidean one.
        for (warp, lo) in [("sinh(r)", 3.6), ("sinh(2*r)/2", 3.3)] {
            let m = DiscreteManifold::build(&ManifoldSpec::warped_disk(warp, 3.0, 128, 96)).unwrap();
            let x = m.pole().unwrap();
            let times = TimeGrid::new(vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3], 0.002).unwrap();
            let k = global_heat_kernel(&m, x, &times).unwrap();
            let targets: Vec<Vertex> = (0..40).map(|i| m.nearest_vertex([0.03 * i as f64, 0.3])).collect();
            let sampling = GaussianSampling {
                t_min: 0.05,
                t_max: 0.3,
                max_d2_over_t: 12.0,
                targets,
            };
            let fit = fit_gaussian_bound(&m, &[k], &sampling).unwrap();
            assert!(fit.c2 > lo && fit.c2 < 4.0, "{warp}: {fit:?}");
        }
    }

    #[test]
    fn cutoff_examples() {
        let c_star = |n: usize, r: f64| {
            let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(3.0, 3.0, n, n)).unwrap();
            let c = m.nearest_vertex([1.5, 1.5]);
            let cut = build_cutoff(&m, c, r, 5).unwrap();
            let d = m.distances_from(c, None);
            for (v, &phi) in cut.phi.iter().enumerate() {
                assert!((0.0..=1.0).contains(&phi));
                if d[v] <= r / 2.0 {
                    assert_eq!(phi, 1.0);
                }
                if d[v] >= r {
                    assert_eq!(phi, 0.0);
                }
            }
            cut.constant
        };
        let (a, b, c) = (c_star(96, 0.5), c_star(192, 0.5), c_star(384, 0.5));
        assert!((b - a).abs() < 0.1 * b && (c - b).abs() < 0.1 * c, "{a} {b} {c}");
        let big = c_star(384, 1.0);
        assert!((big - c).abs() < 0.05 * c, "{big} {c}");

        let m = DiscreteManifold::build(&ManifoldSpec::flat_rect(1.0, 1.0, 32, 32)).unwrap();
        let near_edge = m.nearest_vertex([0.1, 0.5]);
        assert!(matches!(build_cutoff(&m, near_edge, 0.3, 5), Err(Error::Clipped { .. })));
        assert!(build_cutoff(&m, near_edge, 0.05, 4).is_err());
    }
}
