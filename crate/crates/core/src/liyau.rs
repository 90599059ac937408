//! Explicit constants of the local Li–Yau bound, the quotient
//! `Q = αJ|∇u|²/u² - u_t/u`, both sides of the bound, the classical
//! Li–Yau bounds and parabolic rescaling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{k_norm, SampleSet};
use crate::error::{Error, Result};
use crate::geometry::{DiscreteManifold, Vertex};
use crate::heat::{FieldKind, ScalarTimeField};

/// `(δ, a)` with `δ = 2(1-α)²/(n + (1-α)²)` and `a = 5/δ`.
pub fn li_yau_constants(alpha: f64, n: usize) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Hypothesis(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n < 2 {
        return Err(Error::Hypothesis(format!("dimension must be at least 2, got {n}")));
    }
    let b = (1.0 - alpha) * (1.0 - alpha);
    let n = n as f64;
    Ok((2.0 * b / (n + b), 5.0 * (n + b) / (2.0 * b)))
}

/// `(2-δ)(1-αJ)²/n - δ`; zero at `J = 1` and non-negative for `J ≤ 1`.
pub fn delta_margin(alpha: f64, delta: f64, n: usize, j: f64) -> f64 {
    let s = 1.0 - alpha * j;
    (2.0 - delta) * s * s / n as f64 - delta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiYauParams {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
    pub a: f64,
    pub kappa: f64,
    pub c: f64,
    pub radius: f64,
}

impl LiYauParams {
    pub fn new(n: usize, p: f64, alpha: f64, kappa: f64, c: f64) -> Result<Self> {
        let (delta, a) = li_yau_constants(alpha, n)?;
        let out = LiYauParams {
            n,
            p,
            alpha,
            delta,
            a,
            kappa,
            c,
            radius: 1.0,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        self.radius = radius;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.n as f64;
        if !(self.p > nf / 2.0) {
            return Err(Error::Hypothesis(format!("need p > n/2 = {}, got p = {}", nf / 2.0, self.p)));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::Hypothesis(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Hypothesis(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(Error::Hypothesis(format!("radius must lie in (0, 1], got {}", self.radius)));
        }
        if !(self.a > 1.0) {
            return Err(Error::Hypothesis(format!("need a > 1, got {}", self.a)));
        }
        Ok(())
    }

    /// `n / (2p - n)`.
    pub fn holder_exponent(&self) -> f64 {
        let n = self.n as f64;
        n / (2.0 * self.p - n)
    }

    /// Rate `2C k r⁻² (1 + [2C(a-1)k]^{n/(2p-n)})`, shared by the lower bound
    /// for `J` and (times `a - 1`) by the envelope for `w`.
    fn rate(&self, k: f64) -> f64 {
        let inner = 2.0 * self.c * (self.a - 1.0) * k;
        2.0 * self.c * k / (self.radius * self.radius) * (1.0 + inner.powf(self.holder_exponent()))
    }
}

/// `J̲_r(t) = 2^{-1/(a-1)} exp(-2Cκ r⁻² (1 + [2C(a-1)κ]^{n/(2p-n)}) t)`.
pub fn j_lower_bound(t: f64, params: &LiYauParams) -> Result<f64> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Degenerate(format!("time must be >= 0, got {t}")));
    }
    Ok(2f64.powf(-1.0 / (params.a - 1.0)) * (-params.rate(params.kappa) * t).exp())
}

/// Closed-form Grönwall bound on `h(t) = sup w`:
/// `2 exp(2C(a-1) k r⁻² (1 + [2C(a-1)k]^{n/(2p-n)}) t)`.
pub fn gronwall_envelope(t: f64, k: f64, params: &LiYauParams) -> f64 {
    if k == 0.0 {
        return 2.0;
    }
    2.0 * ((params.a - 1.0) * params.rate(k) * t).exp()
}

/// Which bracket the right-hand side uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    /// `n/(α(2-δ)J̲ t) + C/(α(2-δ)J̲) [1/(α(2-δ)J̲(1-α)) + 1]`.
    #[default]
    UnitRadius,
    /// Radius-`r` form: `(1 - αJ̲)` in the bracket and an extra `r⁻²` on
    /// the constant term.
    Rescaled,
}

pub fn li_yau_rhs(t: f64, params: &LiYauParams, form: RhsForm) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Degenerate(format!("the bound needs t > 0, got {t}")));
    }
    let jl = j_lower_bound(t, params)?;
    let base = params.alpha * (2.0 - params.delta) * jl;
    let n = params.n as f64;
    let (gap, scale) = match form {
        RhsForm::UnitRadius => (1.0 - params.alpha, 1.0),
        RhsForm::Rescaled => (1.0 - params.alpha * jl, 1.0 / (params.radius * params.radius)),
    };
    if !(base * gap > 0.0) {
        return Err(Error::Degenerate("α(2-δ)J̲(1-α) vanishes".into()));
    }
    Ok(n / (base * t) + params.c * scale / base * (1.0 / (base * gap) + 1.0))
}

/// Which `J` multiplies the gradient term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JVariant {
    /// Solved `J(x, t)`.
    Solved,
    /// Closed-form lower bound `J̲(t)`.
    Lower,
    /// A fixed number (`J = 1` gives the classical quotient).
    Constant,
}

pub enum JInput<'a> {
    Solved(&'a ScalarTimeField),
    /// One value per output time.
    Lower(&'a [f64]),
    Constant(f64),
}

impl JInput<'_> {
    fn variant(&self) -> JVariant {
        match self {
            JInput::Solved(_) => JVariant::Solved,
            JInput::Lower(_) => JVariant::Lower,
            JInput::Constant(_) => JVariant::Constant,
        }
    }

    fn at(&self, k: usize, v: Vertex) -> f64 {
        match self {
            JInput::Solved(f) => f.values[k][v],
            JInput::Lower(l) => l[k],
            JInput::Constant(c) => *c,
        }
    }
}

/// `Q` on a vertex set, with its two ingredients kept separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QField {
    pub variant: JVariant,
    pub alpha: f64,
    pub times: Vec<f64>,
    pub members: Vec<Vertex>,
    /// `|∇u|²/u²` per time, per member.
    pub grad: Vec<Vec<f64>>,
    /// `u_t/u` with `u_t = Δu`.
    pub rate: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
}

impl QField {
    pub fn q(&self, k: usize, i: usize) -> f64 {
        self.alpha * self.j[k][i] * self.grad[k][i] - self.rate[k][i]
    }

    /// `|∇u|²/u² - β u_t/u`, the classical quotient.
    pub fn classical(&self, k: usize, i: usize, beta: f64) -> f64 {
        self.grad[k][i] - beta * self.rate[k][i]
    }
}

pub fn compute_q(
    m: &DiscreteManifold,
    u: &ScalarTimeField,
    j: JInput<'_>,
    alpha: f64,
    members: &[Vertex],
) -> Result<QField> {
    let all: Vec<usize> = (0..u.len()).collect();
    compute_q_at(m, u, j, alpha, members, &all)
}

/// `Q` restricted to the output times with the given indices.
pub fn compute_q_at(
    m: &DiscreteManifold,
    u: &ScalarTimeField,
    j: JInput<'_>,
    alpha: f64,
    members: &[Vertex],
    indices: &[usize],
) -> Result<QField> {
    let nt = u.len();
    match &j {
        JInput::Solved(f) if f.times != u.times => {
            return Err(Error::Degenerate("J and u are sampled at different times".into()))
        }
        JInput::Lower(l) if l.len() != nt => {
            return Err(Error::Degenerate("one J̲ value per output time is required".into()))
        }
        _ => {}
    }
    for &v in members {
        m.check_vertex(v)?;
    }
    let slices: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = indices
        .par_iter()
        .map(|&k| {
            let s = &u.values[k];
            let mut g = Vec::with_capacity(members.len());
            let mut r = Vec::with_capacity(members.len());
            let mut jj = Vec::with_capacity(members.len());
            for &v in members {
                let x = s[v];
                if !(x > 0.0) {
                    return Err(Error::NonPositive { vertex: v, value: x });
                }
                g.push(m.grad_sq_at(s, v) / (x * x));
                r.push(m.laplacian_at(s, v) / x);
                jj.push(j.at(k, v));
            }
            Ok((g, r, jj))
        })
        .collect::<Result<_>>()?;
    let mut grad = Vec::with_capacity(indices.len());
    let mut rate = Vec::with_capacity(indices.len());
    let mut js = Vec::with_capacity(indices.len());
    for (g, r, jj) in slices {
        grad.push(g);
        rate.push(r);
        js.push(jj);
    }
    Ok(QField {
        variant: j.variant(),
        alpha,
        times: indices.iter().map(|&k| u.times[k]).collect(),
        members: members.to_vec(),
        grad,
        rate,
        j: js,
    })
}

/// Points of a bound check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Region {
    pub members: Vec<Vertex>,
    pub t_min: f64,
    pub t_max: f64,
}

impl Region {
    fn time_indices(&self, times: &[f64]) -> Vec<usize> {
        times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > 0.0 && t >= self.t_min * (1.0 - 1e-12) && t <= self.t_max * (1.0 + 1e-12))
            .map(|(k, _)| k)
            .collect()
    }
}

/// A point counts as violated when `margin < -(relative·|rhs| + absolute)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            relative: 1e-3,
            absolute: 0.0,
        }
    }
}

impl Tolerance {
    pub fn allows(&self, margin: f64, rhs: f64) -> bool {
        margin >= -(self.relative * rhs.abs() + self.absolute)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub vertex: Vertex,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub check: String,
    pub tolerance: Tolerance,
    pub rows: Vec<BoundRow>,
    pub worst_margin: f64,
    /// Smallest `margin / |rhs|`.
    pub worst_relative_margin: f64,
    pub violations: usize,
    pub hypothesis_satisfied: bool,
}

impl BoundReport {
    pub fn from_rows(check: &str, tolerance: Tolerance, rows: Vec<BoundRow>, hypothesis_satisfied: bool) -> Self {
        let worst_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        let worst_relative_margin = rows
            .iter()
            .map(|r| r.margin / r.rhs.abs().max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min);
        let violations = rows.iter().filter(|r| r.violated).count();
        BoundReport {
            check: check.to_string(),
            tolerance,
            rows,
            worst_margin,
            worst_relative_margin,
            violations,
            hypothesis_satisfied,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn rows_from(
    q: &QField,
    tolerance: Tolerance,
    lhs: impl Fn(usize, usize) -> f64,
    rhs: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for k in 0..q.times.len() {
        let t = q.times[k];
        let r = rhs(t)?;
        for (i, &v) in q.members.iter().enumerate() {
            let l = lhs(k, i);
            let margin = r - l;
            rows.push(BoundRow {
                vertex: v,
                t,
                lhs: l,
                rhs: r,
                margin,
                violated: !tolerance.allows(margin, r),
            });
        }
    }
    Ok(rows)
}

/// Both variants of the main bound on a region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiYauReport {
    pub params: LiYauParams,
    pub form: RhsForm,
    /// `k(p, 1)` of the scenario, when known.
    pub k_value: Option<f64>,
    /// LHS with `J̲`, as in the statement of the bound.
    pub lower: BoundReport,
    /// LHS with the solved `J`, diagnostic only.
    pub solved: Option<BoundReport>,
}

pub fn check_li_yau(
    m: &DiscreteManifold,
    u: &ScalarTimeField,
    params: &LiYauParams,
    region: &Region,
    tolerance: Tolerance,
    k_value: Option<f64>,
    solved_j: Option<&ScalarTimeField>,
    form: RhsForm,
) -> Result<LiYauReport> {
    params.validate()?;
    let hyp = k_value.is_none_or(|k| k <= params.kappa);
    let lower: Vec<f64> = u
        .times
        .iter()
        .map(|&t| j_lower_bound(t, params))
        .collect::<Result<_>>()?;
    let rhs = |t: f64| li_yau_rhs(t, params, form);

    let ks = region.time_indices(&u.times);
    let q = compute_q_at(m, u, JInput::Lower(&lower), params.alpha, &region.members, &ks)?;
    let rows = rows_from(&q, tolerance, |k, i| q.q(k, i), rhs)?;
    let lower = BoundReport::from_rows("li_yau_lower_j", tolerance, rows, hyp);

    let solved = match solved_j {
        Some(j) => {
            let q = compute_q_at(m, u, JInput::Solved(j), params.alpha, &region.members, &ks)?;
            let rows = rows_from(&q, tolerance, |k, i| q.q(k, i), rhs)?;
            Some(BoundReport::from_rows("li_yau_solved_j", tolerance, rows, hyp))
        }
        None => None,
    };
    Ok(LiYauReport {
        params: *params,
        form,
        k_value,
        lower,
        solved,
    })
}

/// Classical bounds under a pointwise lower Ricci bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Classical {
    /// `|∇u|²/u² - u_t/u ≤ n/(2t)` when `Ric ≥ 0`.
    Optimal,
    /// `|∇u|²/u² - α u_t/u ≤ nα²K/(2(α-1)) + nα²/(2t)` when `Ric ≥ -K`, `α > 1`.
    General { alpha: f64, k: f64 },
}

impl Classical {
    pub fn validate(&self) -> Result<()> {
        if let Classical::General { alpha, k } = *self {
            if !(alpha > 1.0) {
                return Err(Error::Hypothesis(format!(
                    "the general classical bound needs alpha > 1, got {alpha}"
                )));
            }
            if !(k >= 0.0) {
                return Err(Error::Hypothesis(format!("K must be >= 0, got {k}")));
            }
        }
        Ok(())
    }

    fn beta(&self) -> f64 {
        match self {
            Classical::Optimal => 1.0,
            Classical::General { alpha, .. } => *alpha,
        }
    }
}

pub fn classical_rhs(t: f64, n: usize, form: Classical) -> Result<f64> {
    form.validate()?;
    if !(t > 0.0) {
        return Err(Error::Degenerate(format!("the bound needs t > 0, got {t}")));
    }
    let n = n as f64;
    Ok(match form {
        Classical::Optimal => n / (2.0 * t),
        Classical::General { alpha, k } => {
            let a2 = alpha * alpha;
            n * a2 * k / (2.0 * (alpha - 1.0)) + n * a2 / (2.0 * t)
        }
    })
}

pub fn check_classical(
    m: &DiscreteManifold,
    u: &ScalarTimeField,
    form: Classical,
    region: &Region,
    tolerance: Tolerance,
) -> Result<BoundReport> {
    form.validate()?;
    let ks = region.time_indices(&u.times);
    let q = compute_q_at(m, u, JInput::Constant(1.0), 1.0, &region.members, &ks)?;
    let beta = form.beta();
    let n = m.dimension();
    let rows = rows_from(&q, tolerance, |k, i| q.classical(k, i, beta), |t| {
        classical_rhs(t, n, form)
    })?;
    let name = match form {
        Classical::Optimal => "classical_optimal",
        Classical::General { .. } => "classical_general",
    };
    Ok(BoundReport::from_rows(name, tolerance, rows, true))
}

/// Data after `g → r² g`, `t → r² t`.
pub struct Rescaled {
    pub factor: f64,
    pub manifold: DiscreteManifold,
    pub field: ScalarTimeField,
}

pub fn parabolic_rescale(m: &DiscreteManifold, u: &ScalarTimeField, factor: f64) -> Result<Rescaled> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::Degenerate(format!("scale factor must be positive, got {factor}")));
    }
    Ok(Rescaled {
        factor,
        manifold: m.rescaled(factor),
        field: u.rescaled_time(factor),
    })
}

/// Discrepancies of the two exact scaling identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub factor: f64,
    /// `max |Q̃ r² - Q| / (α J |∇u|²/u² + |u_t/u|)` over the region.
    pub q_error: f64,
    /// `|k̃(p, r) - k(p, 1)| / k(p, 1)` (absolute when `k = 0`).
    pub k_error: f64,
    pub k_original: f64,
    pub k_rescaled: f64,
}

pub fn check_scaling(
    m: &DiscreteManifold,
    u: &ScalarTimeField,
    v_field: &[f64],
    p: f64,
    alpha: f64,
    members: &[Vertex],
    centers: &SampleSet,
    factor: f64,
) -> Result<ScalingCheck> {
    let scaled = parabolic_rescale(m, u, factor)?;
    let ks: Vec<usize> = (0..u.len()).filter(|&k| u.times[k] > 0.0).collect();
    let q0 = compute_q_at(m, u, JInput::Constant(1.0), alpha, members, &ks)?;
    let q1 = compute_q_at(&scaled.manifold, &scaled.field, JInput::Constant(1.0), alpha, members, &ks)?;
    let s2 = factor * factor;
    let mut q_error: f64 = 0.0;
    for k in 0..q0.times.len() {
        for i in 0..members.len() {
            let scale = alpha * q0.grad[k][i] + q0.rate[k][i].abs();
            let d = (q1.q(k, i) * s2 - q0.q(k, i)).abs();
            if d > 0.0 {
                q_error = q_error.max(d / scale);
            }
        }
    }
    // V carries curvature units, so it scales by r⁻².
    let v_scaled: Vec<f64> = v_field.iter().map(|x| x / s2).collect();
    let k0 = k_norm(m, v_field, p, m.length_scale(), centers)?.global;
    let k1 = k_norm(&scaled.manifold, &v_scaled, p, scaled.manifold.length_scale(), centers)?.global;
    let k_error = if k0 == 0.0 { k1.abs() } else { (k1 - k0).abs() / k0 };
    Ok(ScalingCheck {
        factor,
        q_error,
        k_error,
        k_original: k0,
        k_rescaled: k1,
    })
}

/// Running supremum `h(t)` of `w` over a vertex set.
pub fn running_sup(w: &ScalarTimeField, members: &[Vertex]) -> Result<Vec<f64>> {
    if w.kind != FieldKind::W {
        return Err(Error::Degenerate("running supremum expects a w field".into()));
    }
    Ok(w.running_sup(members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{ric_minus_field, RicNorm};
    use crate::geometry::ManifoldSpec;
    use crate::heat::{global_heat_kernel, solve_heat, Boundary, Domain, TimeGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constants_examples() {
        let (d, a) = li_yau_constants(0.5, 2).unwrap();
        assert_relative_eq!(d, 2.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(a, 22.5, max_relative = 1e-15);
        let (d, a) = li_yau_constants(0.5, 3).unwrap();
        assert_relative_eq!(d, 2.0 / 13.0, max_relative = 1e-15);
        assert_relative_eq!(a, 32.5, max_relative = 1e-15);
        assert!(li_yau_constants(1.0, 2).is_err());
        assert!(li_yau_constants(0.0, 2).is_err());
        assert!(li_yau_constants(0.5, 1).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let p = LiYauParams::new(2, 2.0, 0.5, 0.0, 1.0).unwrap();
        let j0 = j_lower_bound(0.0, &p).unwrap();
        assert!((j0 - 0.968_274_745_7).abs() < 1e-10);
        assert_eq!(j_lower_bound(10.0, &p).unwrap(), j0);
        let mut bad = p;
        bad.p = 1.0;
        assert!(j_lower_bound(0.0, &bad).is_err());
    }

    #[test]
    fn envelope_example() {
        let p = LiYauParams::new(2, 2.0, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(gronwall_envelope(3.0, 0.0, &p), 2.0);
        assert_eq!(gronwall_envelope(0.0, 0.3, &p), 2.0);
        // 2(a-1)k = 0.43, exponent n/(2p-n) = 1
        let expect = 2.0 * (0.43f64 * 1.43).exp();
        assert_relative_eq!(gronwall_envelope(1.0, 0.01, &p), expect, max_relative = 1e-14);
        assert!((gronwall_envelope(1.0, 0.01, &p) - 3.699).abs() < 1e-3);
    }

    #[test]
    fn lower_j_is_equivalent_to_envelope_at_kappa() {
        let p = LiYauParams::new(2, 3.0, 0.3, 0.02, 0.7).unwrap();
        for t in [0.0, 0.1, 1.0, 4.0] {
            let jl = j_lower_bound(t, &p).unwrap();
            let env = gronwall_envelope(t, p.kappa, &p);
            assert_relative_eq!(jl, env.powf(-1.0 / (p.a - 1.0)), max_relative = 1e-13);
        }
    }

    #[test]
    fn rhs_example() {
        let p = LiYauParams::new(2, 2.0, 0.5, 0.0, 1.0).unwrap();
        let jl = j_lower_bound(1.0, &p).unwrap();
        let base = 0.5 * (16.0 / 9.0) * jl;
        let expect = 2.0 / base + 1.0 / base * (1.0 / (base * 0.5) + 1.0);
        let got = li_yau_rhs(1.0, &p, RhsForm::UnitRadius).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-14);
        assert!((got - 6.185).abs() < 1e-3);
        assert!(li_yau_rhs(1e-9, &p, RhsForm::UnitRadius).unwrap() > 1e9);
        assert!(li_yau_rhs(0.0, &p, RhsForm::UnitRadius).is_err());
        let near_one = LiYauParams::new(2, 2.0, 1.0 - 1e-8, 0.0, 1.0).unwrap();
        assert!(li_yau_rhs(1.0, &near_one, RhsForm::UnitRadius).unwrap() > 1e6);
        // the rescaled bracket is smaller: 1 - αJ̲ > 1 - α
        assert!(li_yau_rhs(1.0, &p, RhsForm::Rescaled).unwrap() < got);
    }

    #[test]
    fn classical_examples() {
        let g = Classical::General { alpha: 2.0, k: 1.0 };
        for t in [0.5, 1.0, 3.0] {
            assert_relative_eq!(classical_rhs(t, 2, g).unwrap(), 4.0 + 4.0 / t, max_relative = 1e-15);
        }
        assert!(classical_rhs(1.0, 2, Classical::General { alpha: 1.0, k: 0.0 }).is_err());
        assert_eq!(classical_rhs(0.5, 2, Classical::Optimal).unwrap(), 2.0);
    }

    fn torus() -> DiscreteManifold {
        DiscreteManifold::build(&ManifoldSpec::flat_torus(2.0, 2.0, 48, 48)).unwrap()
    }

    #[test]
    fn constant_solution_gives_zero_quotient() {
        let m = torus();
        let u = ScalarTimeField::new(FieldKind::Heat, vec![0.0, 0.5, 1.0], vec![vec![3.0; m.num_vertices()]; 3])
            .unwrap();
        let members: Vec<Vertex> = (0..m.num_vertices()).collect();
        let q = compute_q(&m, &u, JInput::Constant(0.9), 0.5, &members).unwrap();
        assert!(q.grad.iter().flatten().chain(q.rate.iter().flatten()).all(|&x| x == 0.0));
        let p = LiYauParams::new(2, 2.0, 0.5, 0.0, 1.0).unwrap();
        let region = Region { members, t_min: 0.1, t_max: 1.0 };
        let rep = check_li_yau(&m, &u, &p, &region, Tolerance::default(), Some(0.0), None, RhsForm::UnitRadius)
            .unwrap();
        assert!(rep.lower.passed() && rep.lower.hypothesis_satisfied);
        assert_eq!(rep.lower.rows.len(), 2 * m.num_vertices());
    }

    #[test]
    fn eigenfunction_quotient_matches_closed_form() {
        // u = 2 + e^{-4π²t} sin 2πx: |∇u|²/u² and Δu/u in closed form.
        let err = |n: usize| {
            let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(1.0, 1.0, n, n)).unwrap();
            let t = 0.01;
            let e = (-4.0 * PI * PI * t).exp();
            let s: Vec<f64> = (0..m.num_vertices())
                .map(|v| 2.0 + e * (2.0 * PI * m.coords(v)[0]).sin())
                .collect();
            let u = ScalarTimeField::new(FieldKind::Heat, vec![0.0, t], vec![s.clone(), s]).unwrap();
            let members: Vec<Vertex> = (0..m.num_vertices()).collect();
            let q = compute_q(&m, &u, JInput::Constant(1.0), 0.5, &members).unwrap();
            let mut worst: f64 = 0.0;
            for (i, &v) in members.iter().enumerate() {
                let x = m.coords(v)[0];
                let uu = 2.0 + e * (2.0 * PI * x).sin();
                let ux = 2.0 * PI * e * (2.0 * PI * x).cos();
                let lap = -4.0 * PI * PI * e * (2.0 * PI * x).sin();
                let exact = 0.5 * ux * ux / (uu * uu) - lap / uu;
                worst = worst.max((q.q(1, i) - exact).abs());
            }
            worst
        };
        let (e1, e2) = (err(32), err(64));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn flat_kernel_has_no_violations_and_corruption_flags() {
        let m = torus();
        let o = m.nearest_vertex([1.0, 1.0]);
        let times = TimeGrid::new(vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2], 0.001).unwrap();
        let g = global_heat_kernel(&m, o, &times).unwrap();
        let ball = m.ball(o, 0.5).unwrap();
        let region = Region {
            members: ball.members.clone(),
            t_min: 0.01,
            t_max: 1.0,
        };
        let p = LiYauParams::new(2, 2.0, 0.5, 0.0, 1.0).unwrap();
        let rep = check_li_yau(&m, &g.field, &p, &region, Tolerance::default(), Some(0.0), None, RhsForm::UnitRadius)
            .unwrap();
        assert!(rep.lower.passed());

        let mut bad = g.field.clone();
        let [n1, _] = m.grid();
        for s in bad.values.iter_mut().skip(1) {
            for (v, x) in s.iter_mut().enumerate() {
                if (v % n1 + v / n1) % 2 == 0 {
                    *x *= 0.05;
                }
            }
        }
        let rep = check_li_yau(&m, &bad, &p, &region, Tolerance::default(), Some(0.0), None, RhsForm::UnitRadius)
            .unwrap();
        assert!(rep.lower.violations > 0);

        // the discrete kernel is close to Gaussian once it spans several cells
        let late = Region { t_min: 0.1, ..region };
        let classical = check_classical(&m, &g.field, Classical::Optimal, &late, Tolerance { relative: 0.05, absolute: 0.0 })
            .unwrap();
        assert!(classical.passed(), "worst {}", classical.worst_relative_margin);
    }

    #[test]
    fn nonpositive_solution_rejected() {
        let m = torus();
        let mut s = vec![1.0; m.num_vertices()];
        s[5] = 0.0;
        let u = ScalarTimeField::new(FieldKind::Heat, vec![0.0], vec![s]).unwrap();
        let members: Vec<Vertex> = (0..m.num_vertices()).collect();
        assert!(matches!(
            compute_q(&m, &u, JInput::Constant(1.0), 0.5, &members),
            Err(Error::NonPositive { vertex: 5, .. })
        ));
    }

    #[test]
    fn scaling_identities_are_exact() {
        let m = DiscreteManifold::build(&ManifoldSpec::warped_disk("r*(1+0.05*exp(-(r-0.8)^2/0.04))", 2.0, 32, 32))
            .unwrap();
        let pole = m.pole().unwrap();
        let init: Vec<f64> = (0..m.num_vertices())
            .map(|v| 1.0 + (-(m.coords(v)[0] - 0.5f64).powi(2) * 4.0).exp())
            .collect();
        let times = TimeGrid::uniform(0.1, 2, 0.01).unwrap();
        let u = solve_heat(&m, &Domain::whole(&m), &init, Boundary::Closed, &times).unwrap();
        let v = ric_minus_field(&m, RicNorm::Eigenvalue).unwrap();
        let members = m.ball(pole, 0.5).unwrap().members;
        let centers = SampleSet::Grid { max: 30 };
        for r in [0.5, 1.0, 2.0] {
            let c = check_scaling(&m, &u, &v, 2.0, 0.5, &members, &centers, r).unwrap();
            assert!(c.q_error <= 1e-12, "{c:?}");
            assert!(c.k_error <= 1e-12, "{c:?}");
            assert!(c.k_original > 0.0);
        }
    }

    proptest! {
        #[test]
        fn identity_and_margin(n in 2usize..12, alpha in 1e-3f64..0.999, j in 0.0f64..1.0) {
            let (d, _) = li_yau_constants(alpha, n).unwrap();
            prop_assert!(delta_margin(alpha, d, n, 1.0).abs() <= 1e-14);
            prop_assert!(delta_margin(alpha, d, n, j) >= -1e-14);
        }

        #[test]
        fn lower_bound_monotone(t1 in 0.0f64..5.0, dt in 0.0f64..5.0, k1 in 0.0f64..0.5, dk in 0.0f64..0.5,
                                c in 0.01f64..5.0, p in 1.01f64..6.0, alpha in 0.05f64..0.95) {
            let a = LiYauParams::new(2, p, alpha, k1, c).unwrap();
            let b = LiYauParams::new(2, p, alpha, k1 + dk, c).unwrap();
            let j1 = j_lower_bound(t1, &a).unwrap();
            prop_assert!(j1 >= 0.0 && j1 <= 2f64.powf(-1.0 / (a.a - 1.0)));
            prop_assert!(j_lower_bound(t1 + dt, &a).unwrap() <= j1);
            prop_assert!(j_lower_bound(t1, &b).unwrap() <= j1);
        }
    }
}
