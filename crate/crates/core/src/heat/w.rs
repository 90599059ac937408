//! The linear problem `w_t = Δw + 2(a-1) V w` on a ball with `w = 1` on the
//! parabolic boundary, solved two ways, and the substitution `J = w^{-1/(a-1)}`.
//!
//! Both solvers work with the deviation `u = w - 1`, which satisfies
//! `u_t = Δu + cV u + cV` with zero Dirichlet data and `c = 2(a-1)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, DiscreteManifold};

use super::field::{Domain, FieldKind, ScalarTimeField, TimeGrid};
use super::stepper::{Boundary, StepError, StepOperator};

/// Time quadrature of the Duhamel integral on each step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Source sampled at the end of each step; the discrete fixed point
    /// coincides with implicit stepping of the potential.
    #[default]
    Right,
    /// Source sampled at the start of each step.
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WOptions {
    /// Smallest internal step before giving up on diagonal dominance.
    #[serde(rename = "dt_floor_time")]
    pub dt_floor: f64,
    pub quadrature: Quadrature,
    /// Bound on `c·max V·slab length`; keeps each slab map contractive.
    pub slab_norm: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for WOptions {
    fn default() -> Self {
        WOptions {
            dt_floor: 1e-9,
            quadrature: Quadrature::Right,
            slab_norm: 0.5,
            tolerance: 1e-13,
            max_iterations: 200,
        }
    }
}

pub fn coupling(a: f64) -> f64 {
    2.0 * (a - 1.0)
}

struct WSetup {
    domain: Domain,
    q: Vec<f64>,
    q_max: f64,
}

fn setup(m: &DiscreteManifold, ball: &Ball, v: &[f64], a: f64) -> Result<WSetup> {
    if !(a > 1.0) {
        return Err(Error::Hypothesis(format!("need a > 1, got {a}")));
    }
    if v.len() != m.num_vertices() {
        return Err(Error::Degenerate("potential has the wrong length".into()));
    }
    if let Some(bad) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::Degenerate(format!("potential must be finite and >= 0, found {bad}")));
    }
    if ball.is_empty() {
        return Err(Error::EmptyBall);
    }
    let domain = Domain::from_ball(m, ball);
    let c = coupling(a);
    let q: Vec<f64> = domain.gather(v).into_iter().map(|x| c * x).collect();
    let q_max = q.iter().copied().fold(0.0, f64::max);
    Ok(WSetup { domain, q, q_max })
}

/// Internal step count for output interval `k`, halving until `dt·q_max < 1`.
fn substeps(times: &TimeGrid, k: usize, q_max: f64, floor: f64) -> Result<(usize, f64)> {
    let (mut n, mut dt) = times.substeps(k);
    let span = times.outputs[k + 1] - times.outputs[k];
    while dt * q_max >= 1.0 {
        n *= 2;
        dt = span / n as f64;
        if dt < floor {
            return Err(Error::StepFloor { dt, floor });
        }
    }
    Ok((n, dt))
}

fn finish(m: &DiscreteManifold, domain: &Domain, times: &TimeGrid, devs: Vec<Vec<f64>>) -> Result<ScalarTimeField> {
    let values = devs
        .into_iter()
        .map(|u| {
            let mut w = domain.scatter(&u, 0.0, m.num_vertices());
            w.iter_mut().for_each(|x| *x += 1.0);
            w
        })
        .collect();
    ScalarTimeField::new(FieldKind::W, times.outputs.clone(), values)
}

/// Implicit stepping with the potential inside the operator.
pub fn solve_w_direct(
    m: &DiscreteManifold,
    ball: &Ball,
    v: &[f64],
    a: f64,
    times: &TimeGrid,
    opts: &WOptions,
) -> Result<ScalarTimeField> {
    let WSetup { domain, q, q_max } = setup(m, ball, v, a)?;
    let mut cache: HashMap<u64, StepOperator> = HashMap::new();
    let mut cur = vec![0.0; domain.len()];
    let mut next = cur.clone();
    let mut devs = vec![cur.clone()];
    for k in 0..times.outputs.len() - 1 {
        let (steps, dt) = substeps(times, k, q_max, opts.dt_floor)?;
        if !cache.contains_key(&dt.to_bits()) {
            let op = StepOperator::new(m, &domain, dt, Some(&q), Boundary::Dirichlet(0.0))
                .map_err(|e| match e {
                    StepError::Other(e) => e,
                    StepError::LostDominance => Error::StepFloor { dt, floor: opts.dt_floor },
                })?;
            cache.insert(dt.to_bits(), op);
        }
        let op = &cache[&dt.to_bits()];
        for _ in 0..steps {
            op.step(&cur, 0.0, Some(&q), &mut next)?;
            std::mem::swap(&mut cur, &mut next);
        }
        devs.push(cur.clone());
    }
    finish(m, &domain, times, devs)
}

/// Convergence record of the Picard iteration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DuhamelReport {
    pub slabs: usize,
    pub iterations: Vec<usize>,
    /// Every iterate was pointwise `>=` its predecessor.
    pub monotone: bool,
    pub final_increment: f64,
}

/// Picard iteration on the Duhamel integral equation
/// `w = 1 + c ∫∫ G₀ V w`, slab by slab, starting each slab from `w ≡ 1`.
///
/// The kernel `G₀` acts through the potential-free Dirichlet propagator, so
/// `Σ_y G₀(x, m·dt; y) g(y) w_y` is one application of `m` implicit steps.
pub fn solve_w_duhamel(
    m: &DiscreteManifold,
    ball: &Ball,
    v: &[f64],
    a: f64,
    times: &TimeGrid,
    opts: &WOptions,
) -> Result<(ScalarTimeField, DuhamelReport)> {
    let WSetup { domain, q, q_max } = setup(m, ball, v, a)?;
    let n = domain.len();
    let mut cache: HashMap<u64, StepOperator> = HashMap::new();
    let mut report = DuhamelReport {
        monotone: true,
        ..Default::default()
    };
    let mut start = vec![0.0; n];
    let mut devs = vec![start.clone()];

    for k in 0..times.outputs.len() - 1 {
        let (steps, dt) = substeps(times, k, q_max, opts.dt_floor)?;
        if !cache.contains_key(&dt.to_bits()) {
            let op = StepOperator::new(m, &domain, dt, None, Boundary::Dirichlet(0.0)).map_err(|e| match e {
                StepError::Other(e) => e,
                StepError::LostDominance => unreachable!(),
            })?;
            cache.insert(dt.to_bits(), op);
        }
        let prop = &cache[&dt.to_bits()];
        let slab_len = if q_max > 0.0 {
            ((opts.slab_norm / (dt * q_max)).floor() as usize).clamp(1, steps)
        } else {
            steps
        };

        let mut done = 0;
        while done < steps {
            let len = slab_len.min(steps - done);
            let (end, iters, inc) = picard_slab(prop, &q, &start, len, opts, &mut report.monotone)?;
            report.iterations.push(iters);
            report.final_increment = report.final_increment.max(inc);
            report.slabs += 1;
            start = end;
            done += len;
        }
        devs.push(start.clone());
    }
    Ok((finish(m, &domain, times, devs)?, report))
}

fn picard_slab(
    prop: &StepOperator,
    q: &[f64],
    start: &[f64],
    len: usize,
    opts: &WOptions,
    monotone: &mut bool,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = start.len();
    let mut old: Vec<Vec<f64>> = vec![vec![0.0; n]; len];
    let mut new: Vec<Vec<f64>> = vec![vec![0.0; n]; len];
    let mut src = vec![0.0; n];
    let mut increment = f64::INFINITY;
    for iter in 1..=opts.max_iterations {
        for s in 0..len {
            let sample: &[f64] = match opts.quadrature {
                Quadrature::Right => &old[s],
                Quadrature::Left if s == 0 => start,
                Quadrature::Left => &old[s - 1],
            };
            for i in 0..n {
                src[i] = q[i] * (1.0 + sample[i]);
            }
            let (head, tail) = new.split_at_mut(s);
            let prev: &[f64] = if s == 0 { start } else { &head[s - 1] };
            prop.step(prev, 0.0, Some(&src), &mut tail[0])?;
        }
        increment = 0.0;
        let mut scale: f64 = 1.0;
        for (o, nw) in old.iter().zip(&new) {
            for (a, b) in o.iter().zip(nw) {
                increment = increment.max((b - a).abs());
                scale = scale.max(1.0 + b.abs());
                if *b < a - 1e-13 * (1.0 + a.abs()) {
                    *monotone = false;
                }
            }
        }
        std::mem::swap(&mut old, &mut new);
        if increment <= opts.tolerance * scale {
            return Ok((old.pop().unwrap(), iter, increment / scale));
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        increment,
    })
}

/// `J = w^{-1/(a-1)}`; rejects `w < 1 - tol`.
pub fn j_from_w(w: &ScalarTimeField, a: f64, tol: f64) -> Result<ScalarTimeField> {
    if !(a > 1.0) {
        return Err(Error::Hypothesis(format!("need a > 1, got {a}")));
    }
    let e = -1.0 / (a - 1.0);
    let mut values = Vec::with_capacity(w.len());
    for s in &w.values {
        let mut out = Vec::with_capacity(s.len());
        for (v, &x) in s.iter().enumerate() {
            if x < 1.0 - tol {
                return Err(Error::MaximumPrinciple { vertex: v, value: x });
            }
            out.push(x.max(1.0).powf(e));
        }
        values.push(out);
    }
    ScalarTimeField::new(FieldKind::J, w.times.clone(), values)
}

/// Inverse substitution `w = J^{-(a-1)}`.
pub fn w_from_j(j: &ScalarTimeField, a: f64) -> ScalarTimeField {
    let e = -(a - 1.0);
    ScalarTimeField {
        kind: FieldKind::W,
        times: j.times.clone(),
        values: j
            .values
            .iter()
            .map(|s| s.iter().map(|x| x.powf(e)).collect())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldSpec;
    use crate::heat::dirichlet_heat_kernel;
    use approx::assert_relative_eq;

    fn setup_disk() -> (DiscreteManifold, Ball) {
        let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(1.0, 1.0, 24, 24)).unwrap();
        let c = m.nearest_vertex([0.5, 0.5]);
        let b = m.ball(c, 0.3).unwrap();
        (m, b)
    }

    fn bump_potential(m: &DiscreteManifold, height: f64) -> Vec<f64> {
        (0..m.num_vertices())
            .map(|v| {
                let [x, y] = m.coords(v);
                height * (-((x - 0.55).powi(2) + (y - 0.5).powi(2)) / 0.01).exp()
            })
            .collect()
    }

    #[test]
    fn zero_potential_gives_one() {
        let (m, b) = setup_disk();
        let v = vec![0.0; m.num_vertices()];
        let times = TimeGrid::uniform(0.1, 4, 0.01).unwrap();
        let w = solve_w_direct(&m, &b, &v, 22.5, &times, &WOptions::default()).unwrap();
        assert!(w.values.iter().flatten().all(|&x| x == 1.0));
        let (wd, rep) = solve_w_duhamel(&m, &b, &v, 22.5, &times, &WOptions::default()).unwrap();
        assert!(wd.values.iter().flatten().all(|&x| x == 1.0));
        assert!(rep.iterations.iter().all(|&i| i == 1));
    }

    #[test]
    fn solvers_agree_and_iterates_are_monotone() {
        let (m, b) = setup_disk();
        let v = bump_potential(&m, 0.4);
        let times = TimeGrid::uniform(0.2, 10, 0.005).unwrap();
        let opts = WOptions::default();
        let w1 = solve_w_direct(&m, &b, &v, 22.5, &times, &opts).unwrap();
        let (w2, rep) = solve_w_duhamel(&m, &b, &v, 22.5, &times, &opts).unwrap();
        assert!(rep.monotone);
        assert!(w1.sup() > 1.01);
        for (s1, s2) in w1.values.iter().zip(&w2.values) {
            for (a, b) in s1.iter().zip(s2) {
                assert!((a - b).abs() <= 1e-10 * a, "{a} vs {b}");
            }
        }
        assert!(w1.inf() >= 1.0);
    }

    #[test]
    fn left_quadrature_converges_to_right_at_first_order() {
        let (m, b) = setup_disk();
        let v = bump_potential(&m, 0.4);
        let gap = |dt: f64| {
            let times = TimeGrid::uniform(0.1, 1, dt).unwrap();
            let right = solve_w_direct(&m, &b, &v, 22.5, &times, &WOptions::default()).unwrap();
            let left_opts = WOptions {
                quadrature: Quadrature::Left,
                ..Default::default()
            };
            let (left, _) = solve_w_duhamel(&m, &b, &v, 22.5, &times, &left_opts).unwrap();
            right.values[1]
                .iter()
                .zip(&left.values[1])
                .map(|(a, b)| (a - b).abs() / a)
                .fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(0.001), gap(0.0005));
        let ratio = g1 / g2;
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn fixed_point_satisfies_kernel_integral_equation() {
        // w(x,t) = 1 + c Σ_j dt Σ_y G₀(x, t - s_j; y) V(y) w(y, s_j) |y|,
        // evaluated with the kernel from source x via symmetry.
        let (m, b) = setup_disk();
        let v = bump_potential(&m, 0.3);
        let a = 7.5;
        let dt = 0.002;
        let steps = 20;
        let times = TimeGrid::uniform(dt * steps as f64, steps, dt).unwrap();
        let (w, _) = solve_w_duhamel(&m, &b, &v, a, &times, &WOptions::default()).unwrap();
        let x = m.nearest_vertex([0.52, 0.47]);
        let g = dirichlet_heat_kernel(&m, &b, x, &times).unwrap();
        let c = coupling(a);
        let mut acc = 0.0;
        for j in 1..=steps {
            let lag = steps - j + 1;
            for &y in &b.members {
                acc += dt * g.at(lag, y) * c * v[y] * w.values[j][y] * m.weight(y);
            }
        }
        assert_relative_eq!(1.0 + acc, w.values[steps][x], max_relative = 1e-10);
    }

    #[test]
    fn comparison_in_the_potential() {
        let (m, b) = setup_disk();
        let v1 = bump_potential(&m, 0.2);
        let v2: Vec<f64> = v1.iter().map(|x| x * 1.5 + 0.01).collect();
        let times = TimeGrid::uniform(0.1, 5, 0.005).unwrap();
        let w1 = solve_w_direct(&m, &b, &v1, 22.5, &times, &WOptions::default()).unwrap();
        let w2 = solve_w_direct(&m, &b, &v2, 22.5, &times, &WOptions::default()).unwrap();
        for (s1, s2) in w1.values.iter().zip(&w2.values) {
            assert!(s1.iter().zip(s2).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn large_potential_halves_the_step() {
        let (m, b) = setup_disk();
        let v = vec![3.0; m.num_vertices()];
        let times = TimeGrid::uniform(0.01, 1, 0.01).unwrap();
        // c·V·dt = 43·3·0.01 > 1 forces halving
        let w = solve_w_direct(&m, &b, &v, 22.5, &times, &WOptions::default()).unwrap();
        assert!(w.inf() >= 1.0);
        let tight = WOptions {
            dt_floor: 0.009,
            ..Default::default()
        };
        assert!(matches!(
            solve_w_direct(&m, &b, &v, 22.5, &times, &tight),
            Err(Error::StepFloor { .. })
        ));
    }

    #[test]
    fn j_substitution() {
        let w = ScalarTimeField::new(FieldKind::W, vec![0.0, 1.0], vec![vec![1.0, 1.0], vec![4.0, 1.5]]).unwrap();
        let j = j_from_w(&w, 2.0, 1e-8).unwrap();
        assert_eq!(j.values[0], vec![1.0, 1.0]);
        assert_eq!(j.values[1][0], 0.25);
        let back = w_from_j(&j, 2.0);
        assert_relative_eq!(back.values[1][1], 1.5, max_relative = 1e-12);
        let bad = ScalarTimeField::new(FieldKind::W, vec![0.0], vec![vec![0.99]]).unwrap();
        assert!(matches!(j_from_w(&bad, 2.0, 1e-8), Err(Error::MaximumPrinciple { .. })));
    }
}
