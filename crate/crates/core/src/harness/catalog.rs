//! Built-in scenarios: the calibration suite, negative controls and the
//! flat Gaussian anchor.

use crate::geometry::ManifoldSpec;

use super::config::{CheckKind, Config, Initial, ParamSettings, Scenario, SolverSettings, SCHEMA_VERSION};

/// Bump warps `r (1 + A e^{-(r-r0)²/s})` as `(A, r0, s)`.
pub const BUMPS: [(f64, f64, f64); 4] = [(0.03, 0.8, 0.1), (0.05, 1.0, 0.15), (-0.03, 0.7, 0.1), (0.05, 1.3, 0.2)];

fn bump_warp(a: f64, r0: f64, s: f64) -> String {
    format!("r*(1+{a}*exp(-(r-{r0})^2/{s}))")
}

const SUITE_CHECKS: [CheckKind; 7] = [
    CheckKind::MaxPrinciple,
    CheckKind::WCross,
    CheckKind::Envelope,
    CheckKind::LowerJ,
    CheckKind::LiYau,
    CheckKind::Doubling,
    CheckKind::Scaling,
];

fn scenario(id: &str, manifold: ManifoldSpec, checks: &[CheckKind]) -> Scenario {
    Scenario {
        id: id.into(),
        manifold,
        center_point: None,
        params: ParamSettings::default(),
        solver: SolverSettings::default(),
        initial: Initial::default(),
        checks: checks.to_vec(),
        negative_control: false,
        corrupt_solution: false,
        seed: None,
    }
}

/// Models with analytically known curvature used to calibrate `(C, κ)`.
pub fn calibration_suite() -> Vec<Scenario> {
    let mut out = vec![
        scenario("flat_torus", ManifoldSpec::flat_torus(3.0, 3.0, 96, 96), &SUITE_CHECKS),
        scenario("collapsed_torus", ManifoldSpec::flat_torus(0.05, 3.0, 8, 96), &SUITE_CHECKS),
        scenario("flat_disk", ManifoldSpec::warped_disk("r", 2.0, 64, 96), &SUITE_CHECKS),
        scenario("sphere_cap", ManifoldSpec::warped_disk("sin(r)", 2.0, 64, 96), &SUITE_CHECKS),
        scenario("hyperbolic", ManifoldSpec::warped_disk("sinh(r)", 2.0, 64, 96), &SUITE_CHECKS),
        scenario("hyperbolic_mild", ManifoldSpec::warped_disk("sinh(0.5*r)/0.5", 2.0, 64, 96), &SUITE_CHECKS),
    ];
    for (i, &(a, r0, s)) in BUMPS.iter().enumerate() {
        out.push(scenario(
            &format!("bump_{}", i + 1),
            ManifoldSpec::warped_disk(&bump_warp(a, r0, s), 2.0, 64, 96),
            &SUITE_CHECKS,
        ));
    }
    out
}

/// Scenarios whose failures are expected.
pub fn negative_controls() -> Vec<Scenario> {
    let mut steep = scenario(
        "steep_hyperbolic",
        ManifoldSpec::warped_disk("sinh(5*r)/5", 1.2, 128, 64),
        &[CheckKind::Doubling],
    );
    steep.negative_control = true;

    let mut corrupted = scenario("corrupted_flat", ManifoldSpec::flat_torus(3.0, 3.0, 96, 96), &[CheckKind::LiYau]);
    corrupted.negative_control = true;
    corrupted.corrupt_solution = true;
    vec![steep, corrupted]
}

/// Exact planar kernel on a truncated chart `[0, 2]²`, checked against
/// the optimal classical bound.
pub fn gaussian_anchor(n: usize) -> Scenario {
    let mut s = scenario(
        "gaussian_anchor",
        ManifoldSpec::flat_rect(2.0, 2.0, n, n),
        &[CheckKind::Classical],
    );
    s.initial = Initial::ExactGaussian;
    s.solver.output_times_time = vec![0.0, 0.02, 0.05, 0.1, 0.2];
    s.solver.t_min_time = 0.02;
    s.solver.t_max_time = 0.2;
    s.solver.scheme_error_estimate = false;
    s
}

/// Lemma checks on flat data: doubling, Sobolev, Gaussian fit and cutoff.
pub fn lemma_scenarios() -> Vec<Scenario> {
    let lemma_checks = [CheckKind::Doubling, CheckKind::Sobolev, CheckKind::Gaussian, CheckKind::Cutoff];
    let mut flat = scenario("flat_lemmas", ManifoldSpec::flat_torus(4.0, 4.0, 128, 128), &lemma_checks);
    flat.solver.dt_time = 0.002;
    let bump = scenario(
        "bump_lemmas",
        ManifoldSpec::warped_disk(&bump_warp(BUMPS[0].0, BUMPS[0].1, BUMPS[0].2), 2.0, 64, 96),
        &[CheckKind::Doubling, CheckKind::Sobolev, CheckKind::Cutoff],
    );
    vec![flat, bump]
}

pub fn builtin_config() -> Config {
    let mut scenarios = calibration_suite();
    scenarios.extend(negative_controls());
    scenarios.push(gaussian_anchor(128));
    scenarios.extend(lemma_scenarios());
    Config {
        schema_version: SCHEMA_VERSION,
        seed: 0,
        constants: None,
        scenarios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config_validates() {
        let cfg = builtin_config();
        cfg.validate().unwrap();
        assert_eq!(calibration_suite().len(), 10);
        assert!(negative_controls().iter().all(|s| s.negative_control));
    }
}
