//! Solving a scenario once and evaluating its checks for given constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use crate::curvature::{k_norm, ric_minus_field};
use crate::error::{Error, Result};
use crate::geometry::{Ball, DiscreteManifold, ManifoldKind, Vertex};
use crate::heat::{
    dirichlet_heat_kernel, global_heat_kernel, j_from_w, solve_heat, solve_w_direct, solve_w_duhamel, Boundary,
    Domain, DuhamelReport, FieldKind, ScalarTimeField, TimeGrid,
};
use crate::lemmas::{
    build_cutoff, check_sobolev, check_volume_doubling, gaussian_samples, fit_gaussian, sobolev_suite,
    GaussianSampling, DOUBLING_FACTOR,
};
use crate::liyau::{
    check_classical, check_li_yau, check_scaling, compute_q_at, gronwall_envelope, j_lower_bound, BoundReport,
    Classical, JInput, LiYauParams, Region, Tolerance,
};

use super::config::{CheckKind, Constants, Initial, Scenario};
use super::report::{
    bound_rows, CheckOutcome, ConstantSource, Provenance, ResolvedConstants, RunReport, TableRow,
};

/// Tolerance for the exact scaling identities.
pub const SCALING_TOLERANCE: f64 = 1e-12;
/// Slack below 1 allowed for `w` by the maximum principle check.
pub const W_FLOOR_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: usize,
    pub deterministic: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            threads: 1,
            deterministic: true,
        }
    }
}

/// Everything a scenario's checks need that does not depend on `(C, κ)`.
pub struct Prepared {
    pub scenario: Scenario,
    pub seed: u64,
    pub manifold: DiscreteManifold,
    pub center: Vertex,
    pub v: Vec<f64>,
    pub k_value: f64,
    pub times: TimeGrid,
    /// `B(O, r)` carrying the `w` problem.
    pub ball: Ball,
    /// `B(O, 1/2)` where gradient bounds are checked.
    pub region: Ball,
    pub w: Option<ScalarTimeField>,
    pub duhamel: Option<(ScalarTimeField, DuhamelReport)>,
    pub j: Option<ScalarTimeField>,
    /// Running sup of `w` over the ball.
    pub h: Vec<f64>,
    pub u_clean: Option<ScalarTimeField>,
    /// The solution handed to the gradient bounds (corrupted for the
    /// negative control).
    pub u: Option<ScalarTimeField>,
    /// Richardson estimate `max_x |Q_h - Q_{2h}|/3` per output time.
    pub scheme_error: Vec<f64>,
    pub timings: BTreeMap<String, f64>,
}

fn center_of(m: &DiscreteManifold, s: &Scenario) -> Vertex {
    if let Some(p) = s.center_point {
        return m.nearest_vertex(p);
    }
    if let Some(p) = m.pole() {
        return p;
    }
    match &s.manifold.kind {
        ManifoldKind::FlatTorus { side_lengths_length: l, .. } => m.nearest_vertex([l[0] / 2.0, l[1] / 2.0]),
        ManifoldKind::WarpedProduct { r_min_length, r_max_length, .. } => {
            m.nearest_vertex([(r_min_length + r_max_length) / 2.0, 0.0])
        }
    }
}

/// Planar heat kernel centred at `O`.
fn exact_gaussian(m: &DiscreteManifold, center: Vertex, times: &[f64]) -> Result<ScalarTimeField> {
    let o = m.coords(center);
    let lengths = match &m.spec().kind {
        ManifoldKind::FlatTorus { side_lengths_length, .. } => *side_lengths_length,
        ManifoldKind::WarpedProduct { .. } => {
            return Err(Error::InvalidSpec("the exact Gaussian needs a flat chart".into()))
        }
    };
    let gap = |a: f64, b: f64, l: f64| {
        let d = (a - b).rem_euclid(l);
        d.min(l - d)
    };
    let values = times
        .iter()
        .map(|&t| {
            (0..m.num_vertices())
                .map(|v| {
                    if t == 0.0 {
                        return 1.0;
                    }
                    let c = m.coords(v);
                    let d2 = gap(c[0], o[0], lengths[0]).powi(2) + gap(c[1], o[1], lengths[1]).powi(2);
                    (-d2 / (4.0 * t)).exp() / (4.0 * PI * t)
                })
                .collect()
        })
        .collect();
    ScalarTimeField::new(FieldKind::Heat, times.to_vec(), values)
}

fn solve_u(m: &DiscreteManifold, s: &Scenario, center: Vertex, times: &TimeGrid) -> Result<ScalarTimeField> {
    match &s.initial {
        Initial::ExactGaussian => exact_gaussian(m, center, &times.outputs),
        Initial::Constant { value } => {
            solve_heat(m, &Domain::whole(m), &vec![*value; m.num_vertices()], Boundary::Closed, times)
        }
        Initial::PointSource { point } => {
            let src = point.map_or(center, |p| m.nearest_vertex(p));
            let mut init = vec![0.0; m.num_vertices()];
            init[src] = 1.0 / m.weight(src);
            solve_heat(m, &Domain::whole(m), &init, Boundary::Closed, times)
        }
    }
}

fn corrupt(m: &DiscreteManifold, u: &mut ScalarTimeField) {
    let [n1, n2] = m.grid();
    for s in u.values.iter_mut().skip(1) {
        for (v, x) in s.iter_mut().enumerate().take(n1 * n2) {
            let sign = if (v % n1 + v / n1) % 2 == 0 { 1.0 } else { -1.0 };
            *x *= 1.0 + 0.9 * sign;
        }
    }
}

/// Halves every grid count that stays at least 8.
fn coarse_resolution(r: [usize; 2]) -> [usize; 2] {
    r.map(|n| if n >= 16 { n / 2 } else { n })
}

fn scheme_error(
    m: &DiscreteManifold,
    s: &Scenario,
    center: Vertex,
    times: &TimeGrid,
    u: &ScalarTimeField,
    region: &Ball,
    alpha: f64,
) -> Result<Vec<f64>> {
    let nt = times.outputs.len();
    let [c1, c2] = coarse_resolution(s.manifold.resolution);
    let spec = s.manifold.with_resolution(c1, c2);
    if spec.resolution == s.manifold.resolution {
        return Ok(vec![0.0; nt]);
    }
    let coarse = DiscreteManifold::build(&spec)?;
    // Δt scales like h² along the most refined axis.
    let ratio = (0..2).map(|i| m.spacing()[i] / coarse.spacing()[i]).fold(1.0, f64::min);
    let coarse_times = times.with_dt(times.dt_max / (ratio * ratio));
    let cc = coarse.nearest_vertex(m.coords(center));
    let uc = solve_u(&coarse, s, cc, &coarse_times)?;
    let map: Vec<Vertex> = region.members.iter().map(|&v| coarse.nearest_vertex(m.coords(v))).collect();
    let ks: Vec<usize> = (1..nt).collect();
    let fine = compute_q_at(m, u, JInput::Constant(1.0), alpha, &region.members, &ks)?;
    let crude = compute_q_at(&coarse, &uc, JInput::Constant(1.0), alpha, &map, &ks)?;
    let mut out = vec![0.0; nt];
    for (i, &k) in ks.iter().enumerate() {
        out[k] = (0..region.members.len())
            .map(|p| {
                (alpha * (fine.grad[i][p] - crude.grad[i][p]).abs() + (fine.rate[i][p] - crude.rate[i][p]).abs()) / 3.0
            })
            .fold(0.0, f64::max);
    }
    Ok(out)
}

impl Prepared {
    pub fn prepare(scenario: &Scenario, base_seed: u64, opts: &RunOptions) -> Result<Self> {
        scenario.validate(&format!("scenario `{}`", scenario.id))?;
        let seed = opts.seed.or(scenario.seed).unwrap_or(base_seed);
        let mut timings = BTreeMap::new();
        let mut clock = Instant::now();
        let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
            timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
            clock = Instant::now();
        };

        let s = scenario;
        let m = DiscreteManifold::build(&s.manifold)?;
        let center = center_of(&m, s);
        let v = ric_minus_field(&m, s.params.ric_norm)?;
        let k_value = k_norm(&m, &v, s.params.p, 1.0, &s.solver.centers)?.global;
        lap("geometry", &mut timings);

        let times = TimeGrid::new(s.solver.output_times_time.clone(), s.solver.dt_time)?;
        let ball = m.ball(center, s.solver.ball_radius_length)?;
        let region = m.ball(center, s.solver.region_radius_length)?;
        if s.needs_w() && !m.ball_inside_chart(&ball) {
            return Err(Error::Clipped {
                center,
                radius: s.solver.ball_radius_length,
            });
        }
        let (_, a) = crate::liyau::li_yau_constants(s.params.alpha, s.params.dimension)?;

        let (mut w, mut duhamel, mut j, mut h) = (None, None, None, Vec::new());
        if s.needs_w() {
            let wd = solve_w_direct(&m, &ball, &v, a, &times, &s.solver.w)?;
            lap("w_direct", &mut timings);
            if s.checks.contains(&CheckKind::WCross) {
                duhamel = Some(solve_w_duhamel(&m, &ball, &v, a, &times, &s.solver.w)?);
                lap("w_duhamel", &mut timings);
            }
            j = Some(j_from_w(&wd, a, W_FLOOR_SLACK)?);
            h = wd.running_sup(&ball.members);
            w = Some(wd);
        }

        let (mut u_clean, mut u, mut scheme) = (None, None, vec![0.0; times.outputs.len()]);
        if s.needs_u() {
            let clean = solve_u(&m, s, center, &times)?;
            lap("heat", &mut timings);
            if s.solver.scheme_error_estimate {
                scheme = scheme_error(&m, s, center, &times, &clean, &region, s.params.alpha)?;
                lap("scheme_error", &mut timings);
            }
            let mut checked = clean.clone();
            if s.corrupt_solution {
                corrupt(&m, &mut checked);
            }
            u_clean = Some(clean);
            u = Some(checked);
        }

        Ok(Prepared {
            scenario: s.clone(),
            seed,
            manifold: m,
            center,
            v,
            k_value,
            times,
            ball,
            region,
            w,
            duhamel,
            j,
            h,
            u_clean,
            u,
            scheme_error: scheme,
            timings,
        })
    }

    pub fn id(&self) -> &str {
        &self.scenario.id
    }

    pub fn resolve(&self, run: Option<Constants>) -> Result<ResolvedConstants> {
        let p = &self.scenario.params;
        match (p.c, p.kappa, run) {
            (Some(c), Some(kappa), _) => Ok(ResolvedConstants {
                c,
                kappa,
                source: ConstantSource::Scenario,
            }),
            (c, kappa, Some(r)) => Ok(ResolvedConstants {
                c: c.unwrap_or(r.c),
                kappa: kappa.unwrap_or(r.kappa),
                source: if c.is_some() || kappa.is_some() {
                    ConstantSource::Scenario
                } else {
                    ConstantSource::Config
                },
            }),
            _ => Err(Error::Config {
                field: "constants".into(),
                reason: format!("scenario `{}` needs C and kappa; set them or run calibration", self.id()),
            }),
        }
    }

    pub fn params(&self, c: f64, kappa: f64) -> Result<LiYauParams> {
        let p = &self.scenario.params;
        LiYauParams::new(p.dimension, p.p, p.alpha, kappa, c)?.with_radius(self.scenario.solver.ball_radius_length)
    }

    fn region_of(&self) -> Region {
        Region {
            members: self.region.members.clone(),
            t_min: self.scenario.solver.t_min_time,
            t_max: self.scenario.solver.t_max_time,
        }
    }

    fn coords(&self) -> impl Fn(Vertex) -> [f64; 2] + '_ {
        |v| self.manifold.coords(v)
    }

    /// Main bound with the per-time scheme slack.
    pub fn li_yau(&self, params: &LiYauParams) -> Result<(BoundReport, Option<BoundReport>)> {
        let u = self.u.as_ref().ok_or_else(|| Error::Degenerate("no heat solution".into()))?;
        let region = self.region_of();
        let rel = self.scenario.solver.tolerance_relative;
        let mut lower = Vec::new();
        let mut solved = Vec::new();
        let mut hyp = true;
        for (k, &t) in u.times.iter().enumerate() {
            if !(t > 0.0 && t >= region.t_min && t <= region.t_max) {
                continue;
            }
            let one = Region {
                members: region.members.clone(),
                t_min: t,
                t_max: t,
            };
            let tol = Tolerance {
                relative: rel,
                absolute: self.scheme_error[k],
            };
            let rep = check_li_yau(
                &self.manifold,
                u,
                params,
                &one,
                tol,
                Some(self.k_value),
                self.j.as_ref(),
                self.scenario.params.rhs_form,
            )?;
            hyp = rep.lower.hypothesis_satisfied;
            lower.extend(rep.lower.rows);
            if let Some(s) = rep.solved {
                solved.extend(s.rows);
            }
        }
        let tol = Tolerance {
            relative: rel,
            absolute: self.scheme_error.iter().copied().fold(0.0, f64::max),
        };
        let lower = BoundReport::from_rows("li_yau", tol, lower, hyp);
        let solved = (!solved.is_empty()).then(|| BoundReport::from_rows("li_yau_solved_j", tol, solved, hyp));
        Ok((lower, solved))
    }

    /// Envelope rows per output time: `h(t)` against the closed form with
    /// the scenario's own `k`.
    pub fn envelope(&self, params: &LiYauParams) -> Vec<(f64, f64, f64)> {
        self.times
            .outputs
            .iter()
            .zip(&self.h)
            .map(|(&t, &h)| (t, h, gronwall_envelope(t, self.k_value, params)))
            .collect()
    }

    /// `(t, J̲(t), min_x J, argmin)` per output time.
    pub fn lower_j(&self, params: &LiYauParams) -> Result<Vec<(f64, f64, f64, Vertex)>> {
        let j = self.j.as_ref().ok_or_else(|| Error::Degenerate("no J field".into()))?;
        j.times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let (arg, min) = self
                    .ball
                    .members
                    .iter()
                    .map(|&v| (v, j.values[k][v]))
                    .fold((self.center, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                Ok((t, j_lower_bound(t, params)?, min, arg))
            })
            .collect()
    }

    pub fn evaluate(&self, run: Option<Constants>, opts: &RunOptions) -> Result<(RunReport, Vec<TableRow>)> {
        let constants = self.resolve(run)?;
        let params = self.params(constants.c, constants.kappa)?;
        let hyp = self.k_value <= params.kappa * (1.0 + 1e-12);
        let neg = self.scenario.negative_control;
        let id = self.id().to_string();
        let mut checks = Vec::new();
        let mut rows = Vec::new();
        let m = &self.manifold;
        let row = |check: &str, at: Option<Vertex>, t: Option<f64>, lhs: f64, rhs: f64, violated: bool| {
            let c = at.map(|v| m.coords(v));
            TableRow {
                scenario: id.clone(),
                check: check.to_string(),
                x: c.map(|c| c[0]),
                y: c.map(|c| c[1]),
                t,
                lhs,
                rhs,
                violated,
            }
        };
        let outcome = |check: &str, passed: bool, hypothesis: bool, metrics: BTreeMap<String, f64>, notes: Vec<String>| {
            CheckOutcome {
                check: check.to_string(),
                passed,
                counts_as_failure: !passed && !neg && hypothesis,
                hypothesis_satisfied: hypothesis,
                metrics,
                notes,
            }
        };

        let mut kinds = self.scenario.checks.clone();
        kinds.sort();
        kinds.dedup();
        for kind in kinds {
            let name = kind.name();
            let mut metrics = BTreeMap::new();
            let mut notes = Vec::new();
            let (passed, hypothesis) = match kind {
                CheckKind::MaxPrinciple => {
                    let w = self.w.as_ref().expect("w solved");
                    let j = self.j.as_ref().expect("J solved");
                    let u = self.u_clean.as_ref().expect("u solved");
                    let mut ok = true;
                    let (mut w_min, mut j_min, mut j_max, mut u_min) =
                        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
                    for (k, &t) in w.times.iter().enumerate() {
                        let (wv, wm) = self.min_over(&w.values[k], &self.ball.members);
                        let (jv, jm) = self.min_over(&j.values[k], &self.ball.members);
                        let jx = self.ball.members.iter().map(|&v| j.values[k][v]).fold(f64::NEG_INFINITY, f64::max);
                        let all: Vec<Vertex> = (0..m.num_vertices()).collect();
                        let (uv, um) = self.min_over(&u.values[k], &all);
                        let bad_w = wm < 1.0 - W_FLOOR_SLACK;
                        let bad_j = !(jm > 0.0) || jx > 1.0;
                        let bad_u = !(um > 0.0) && t > 0.0 && !matches!(self.scenario.initial, Initial::PointSource { .. } if t == 0.0);
                        ok &= !(bad_w || bad_j || bad_u);
                        rows.push(row("max_principle_w", Some(wv), Some(t), 1.0 - W_FLOOR_SLACK, wm, bad_w));
                        rows.push(row("max_principle_j_positive", Some(jv), Some(t), 0.0, jm, !(jm > 0.0)));
                        rows.push(row("max_principle_j_at_most_one", None, Some(t), jx, 1.0, jx > 1.0));
                        if t > 0.0 {
                            rows.push(row("heat_positivity", Some(uv), Some(t), 0.0, um, bad_u));
                            u_min = u_min.min(um);
                        }
                        w_min = w_min.min(wm);
                        j_min = j_min.min(jm);
                        j_max = j_max.max(jx);
                    }
                    let kernel = dirichlet_heat_kernel(m, &self.ball, self.center, &self.times)?;
                    let mass = kernel.mass(m);
                    let mut mass_ok = true;
                    for (k, pair) in mass.windows(2).enumerate() {
                        let bad = pair[1] > pair[0] * (1.0 + 1e-12);
                        mass_ok &= !bad;
                        rows.push(row("kernel_mass", Some(self.center), Some(self.times.outputs[k + 1]), pair[1], pair[0], bad));
                    }
                    metrics.insert("w_min".into(), w_min);
                    metrics.insert("j_min".into(), j_min);
                    metrics.insert("j_max".into(), j_max);
                    metrics.insert("u_min".into(), u_min);
                    metrics.insert("kernel_mass_final".into(), *mass.last().unwrap());
                    (ok && mass_ok, true)
                }
                CheckKind::WCross => {
                    let w = self.w.as_ref().expect("w solved");
                    let (wd, rep) = self.duhamel.as_ref().expect("Duhamel solved");
                    let tol = self.scenario.solver.cross_tolerance_relative;
                    let mut worst: f64 = 0.0;
                    for (k, &t) in w.times.iter().enumerate() {
                        let (at, d) = self
                            .ball
                            .members
                            .iter()
                            .map(|&v| (v, (w.values[k][v] - wd.values[k][v]).abs() / w.values[k][v]))
                            .fold((self.center, 0.0), |a, b| if b.1 > a.1 { b } else { a });
                        worst = worst.max(d);
                        rows.push(row(name, Some(at), Some(t), d, tol, !(d <= tol)));
                    }
                    metrics.insert("sup_relative_difference".into(), worst);
                    metrics.insert("picard_slabs".into(), rep.slabs as f64);
                    metrics.insert(
                        "picard_max_iterations".into(),
                        rep.iterations.iter().copied().max().unwrap_or(0) as f64,
                    );
                    metrics.insert("picard_monotone".into(), f64::from(u8::from(rep.monotone)));
                    (worst <= tol && rep.monotone, true)
                }
                CheckKind::Envelope => {
                    let mut ok = true;
                    let mut worst: f64 = 0.0;
                    for (t, h, env) in self.envelope(&params) {
                        let bad = h > env * (1.0 + 1e-12);
                        ok &= !bad;
                        worst = worst.max(h / env);
                        rows.push(row(name, None, Some(t), h, env, bad));
                    }
                    metrics.insert("max_h_over_envelope".into(), worst);
                    metrics.insert("h_final".into(), *self.h.last().unwrap_or(&1.0));
                    (ok, hyp)
                }
                CheckKind::LowerJ => {
                    let mut ok = true;
                    let mut worst: f64 = 0.0;
                    for (t, jl, jmin, at) in self.lower_j(&params)? {
                        let bad = jl > jmin * (1.0 + 1e-12);
                        ok &= !bad;
                        worst = worst.max(jl / jmin);
                        rows.push(row(name, Some(at), Some(t), jl, jmin, bad));
                    }
                    let (_, _, jmin, _) = *self.lower_j(&params)?.last().unwrap();
                    metrics.insert("max_lower_over_j".into(), worst);
                    metrics.insert("j_min_final".into(), jmin);
                    (ok, hyp)
                }
                CheckKind::LiYau => {
                    let (lower, solved) = self.li_yau(&params)?;
                    metrics.insert("violations".into(), lower.violations as f64);
                    metrics.insert("worst_margin".into(), lower.worst_margin);
                    metrics.insert("worst_relative_margin".into(), lower.worst_relative_margin);
                    metrics.insert("scheme_error_max".into(), lower.tolerance.absolute);
                    if let Some(s) = &solved {
                        metrics.insert("solved_j_violations".into(), s.violations as f64);
                        metrics.insert("solved_j_worst_relative_margin".into(), s.worst_relative_margin);
                    }
                    rows.extend(bound_rows(&id, &lower, self.coords()));
                    (lower.passed(), hyp)
                }
                CheckKind::Classical => {
                    let u = self.u.as_ref().expect("u solved");
                    let v_max = self.v.iter().copied().fold(0.0, f64::max);
                    let form = if v_max == 0.0 {
                        Classical::Optimal
                    } else {
                        Classical::General {
                            alpha: self.scenario.solver.classical.alpha,
                            k: v_max,
                        }
                    };
                    let region = self.region_of();
                    let mut all = Vec::new();
                    let rel = self.scenario.solver.classical.tolerance_relative;
                    for (k, &t) in u.times.iter().enumerate() {
                        if !(t > 0.0 && t >= region.t_min && t <= region.t_max) {
                            continue;
                        }
                        let one = Region {
                            members: region.members.clone(),
                            t_min: t,
                            t_max: t,
                        };
                        let tol = Tolerance {
                            relative: rel,
                            absolute: self.scheme_error[k],
                        };
                        all.extend(check_classical(m, u, form, &one, tol)?.rows);
                    }
                    let tol = Tolerance {
                        relative: rel,
                        absolute: self.scheme_error.iter().copied().fold(0.0, f64::max),
                    };
                    let rep = BoundReport::from_rows(name, tol, all, true);
                    metrics.insert("violations".into(), rep.violations as f64);
                    metrics.insert("worst_relative_margin".into(), rep.worst_relative_margin);
                    metrics.insert("ricci_lower_bound".into(), -v_max);
                    rows.extend(bound_rows(&id, &rep, self.coords()));
                    (rep.passed(), true)
                }
                CheckKind::Doubling => {
                    let pairs: Vec<(f64, f64)> =
                        self.scenario.solver.doubling_radii_length.iter().map(|r| (r[0], r[1])).collect();
                    let rep = check_volume_doubling(m, &[self.center], &pairs)?;
                    for r in &rep.rows {
                        rows.push(row(name, Some(r.center), None, r.ratio, DOUBLING_FACTOR, !r.passed));
                    }
                    metrics.insert("worst_ratio".into(), rep.worst_ratio);
                    metrics.insert("failures".into(), rep.failures as f64);
                    (rep.failures == 0, hyp)
                }
                CheckKind::Sobolev => {
                    let bound = self.scenario.solver.sobolev_bound;
                    let rep = check_sobolev(m, self.center, self.scenario.solver.ball_radius_length, &sobolev_suite(self.seed))?;
                    for r in &rep.rows {
                        rows.push(row(&format!("sobolev_{}", r.function), Some(self.center), None, r.ratio, bound, r.ratio > bound));
                    }
                    metrics.insert("empirical_constant".into(), rep.constant);
                    (rep.constant <= bound, hyp)
                }
                CheckKind::Gaussian => {
                    let times = TimeGrid::new(vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.5], self.scenario.solver.dt_time)?;
                    let kernel = global_heat_kernel(m, self.center, &times)?;
                    let step = (self.ball.members.len() / 64).max(1);
                    let targets: Vec<Vertex> = self.ball.members.iter().copied().step_by(step).collect();
                    let sampling = GaussianSampling {
                        t_min: 0.05,
                        t_max: 0.5,
                        max_d2_over_t: 12.0,
                        targets,
                    };
                    let samples = gaussian_samples(m, std::slice::from_ref(&kernel), &sampling)?;
                    match fit_gaussian(&samples) {
                        Ok(fit) => {
                            let mut ok = fit.c2 > 0.0;
                            for s in &samples {
                                let b = fit.bound(s.t, s.d, s.volume_x, s.volume_y);
                                let bad = s.g > b * (1.0 + 1e-12);
                                ok &= !bad;
                                rows.push(row(name, Some(s.y), Some(s.t), s.g, b, bad));
                            }
                            metrics.insert("c1".into(), fit.c1);
                            metrics.insert("c2".into(), fit.c2);
                            metrics.insert("rms_residual".into(), fit.rms_residual);
                            metrics.insert("samples".into(), fit.samples as f64);
                            (ok, hyp)
                        }
                        Err(e) => {
                            notes.push(e.to_string());
                            (false, hyp)
                        }
                    }
                }
                CheckKind::Cutoff => {
                    let bound = self.scenario.solver.cutoff_bound;
                    let cut = build_cutoff(m, self.center, self.scenario.solver.ball_radius_length, 5)?;
                    rows.push(row(name, Some(cut.argmax), None, cut.constant, bound, !(cut.constant <= bound)));
                    metrics.insert("constant".into(), cut.constant);
                    (cut.constant <= bound, hyp)
                }
                CheckKind::Scaling => {
                    let u = self.u.as_ref().expect("u solved");
                    let mut ok = true;
                    for factor in [0.5, 1.0, 2.0] {
                        let c = check_scaling(
                            m,
                            u,
                            &self.v,
                            self.scenario.params.p,
                            self.scenario.params.alpha,
                            &self.region.members,
                            &self.scenario.solver.centers,
                            factor,
                        )?;
                        let bad_q = !(c.q_error <= SCALING_TOLERANCE);
                        let bad_k = !(c.k_error <= SCALING_TOLERANCE);
                        ok &= !(bad_q || bad_k);
                        rows.push(row("scaling_q", None, Some(factor), c.q_error, SCALING_TOLERANCE, bad_q));
                        rows.push(row("scaling_k", None, Some(factor), c.k_error, SCALING_TOLERANCE, bad_k));
                        metrics.insert(format!("q_error_{factor}"), c.q_error);
                        metrics.insert(format!("k_error_{factor}"), c.k_error);
                    }
                    (ok, true)
                }
            };
            checks.push(outcome(name, passed, hypothesis, metrics, notes));
        }

        let report = RunReport {
            scenario: id.clone(),
            negative_control: neg,
            constants,
            params,
            k_value: self.k_value,
            hypothesis_satisfied: hyp,
            checks,
            provenance: Provenance {
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                schema_version: super::config::SCHEMA_VERSION,
                seed: self.seed,
                resolution: self.scenario.manifold.resolution,
                num_vertices: m.num_vertices(),
                threads: opts.threads,
                deterministic: opts.deterministic,
                timings_seconds: (!opts.deterministic).then(|| self.timings.clone()),
            },
        };
        Ok((report, rows))
    }

    fn min_over(&self, values: &[f64], members: &[Vertex]) -> (Vertex, f64) {
        members
            .iter()
            .map(|&v| (v, values[v]))
            .fold((self.center, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }
}
