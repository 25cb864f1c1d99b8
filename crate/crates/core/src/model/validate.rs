//! Sampling-based checks of the declared laws against their structural
//! hypotheses.

use std::fmt;

use serde::Serialize;

use crate::config::Problem;
use crate::lattice::NodeLabel;
use crate::model::{Direction, Point};

const FD_RELATIVE_TOL: f64 = 1e-6;

/// One named check. `margin` is the smallest slack over all samples
/// (negative when the check fails).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub passed: bool,
    pub waived: bool,
    pub margin: f64,
    pub worst_sample: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    /// Failures not covered by a waiver.
    pub fn hard_failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed && !c.waived)
    }

    pub fn is_ok(&self) -> bool {
        self.hard_failures().next().is_none()
    }

    pub fn waivers(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| c.waived)
    }

    pub fn get(&self, id: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = match (c.passed, c.waived) {
                (true, _) => "PASS",
                (false, true) => "WAIVED",
                (false, false) => "FAIL",
            };
            writeln!(f, "{status:6} {:28} margin {:+.3e}  {}", c.id, c.margin, c.message)?;
        }
        Ok(())
    }
}

/// Tracks the worst sample of an inequality `slack ≥ 0`.
struct Worst {
    margin: f64,
    sample: String,
}

impl Worst {
    fn new() -> Self {
        Worst {
            margin: f64::INFINITY,
            sample: String::new(),
        }
    }

    fn observe(&mut self, slack: f64, sample: impl FnOnce() -> String) {
        if slack < self.margin || slack.is_nan() {
            self.margin = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
            self.sample = sample();
        }
    }

    fn finish(self, id: &'static str, message: impl Into<String>) -> CheckOutcome {
        CheckOutcome {
            id,
            passed: self.margin >= 0.0,
            waived: false,
            margin: self.margin,
            worst_sample: self.sample,
            message: message.into(),
        }
    }
}

fn scalar(id: &'static str, passed: bool, margin: f64, message: String) -> CheckOutcome {
    CheckOutcome {
        id,
        passed,
        waived: false,
        margin,
        worst_sample: String::new(),
        message,
    }
}

fn strain_samples() -> Vec<f64> {
    // offset grid avoids the kinks of piecewise laws at |ξ| ∈ {0, 1}
    (0..41).map(|j| -5.0 + 10.0 * (j as f64 + 0.37) / 41.0).collect()
}

fn direction_samples(problem: &Problem) -> Vec<Direction> {
    let mut dirs: Vec<Direction> = (0..16)
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / 8.0;
            [a.cos(), a.sin()]
        })
        .collect();
    dirs.extend(problem.lattice.bonds().iter().map(|b| b.direction));
    dirs
}

fn position_samples(problem: &Problem) -> Vec<Point> {
    let mut xs: Vec<Point> = problem.lattice.bonds().iter().map(|b| b.midpoint).collect();
    xs.extend_from_slice(problem.lattice.nodes());
    xs
}

/// Runs every declared check once. A run must be refused when
/// [`ValidationReport::is_ok`] is false.
pub fn validate_problem(problem: &Problem) -> ValidationReport {
    let mut checks = Vec::new();
    let bulk = problem.bulk();
    let toughness = problem.toughness();
    let load = problem.load();
    let program = problem.boundary();
    let xs = position_samples(problem);
    let strains = strain_samples();
    let waiver = problem.spec.validation.coercivity_waiver;

    let p = bulk.p();
    checks.push(scalar(
        "bulk.exponent",
        p > 1.0 && p.is_finite(),
        p - 1.0,
        format!("p = {p} must exceed 1"),
    ));

    let mut stiffness = Worst::new();
    let (mut mu_lo, mut mu_hi) = (f64::INFINITY, 0.0f64);
    for x in &xs {
        let mu = bulk.stiffness_at(x);
        mu_lo = mu_lo.min(mu);
        mu_hi = mu_hi.max(mu);
        stiffness.observe(mu, || format!("x = {x:?}"));
    }
    let mut c = stiffness.finish("bulk.stiffness", "stiffness must be positive everywhere");
    c.passed = c.margin > 0.0;
    checks.push(c);

    let growth = bulk.growth_constants(mu_lo, mu_hi);
    let mut grow = Worst::new();
    let mut gradients: Vec<Vec<f64>> = strains.iter().map(|&s| vec![s]).collect();
    if problem.lattice.dimension() == 2 {
        for &s in strains.iter().step_by(4) {
            for k in 0..8 {
                let a = std::f64::consts::PI * (k as f64 + 0.5) / 4.0;
                gradients.push(vec![s * a.cos(), s * a.sin()]);
            }
        }
    }
    for x in &xs {
        let w0 = bulk.density(x, &vec![0.0; problem.lattice.dimension()]);
        grow.observe(-w0.abs(), || format!("W({x:?}, 0) = {w0}"));
        for xi in &gradients {
            let w = bulk.density(x, xi);
            let s = xi.iter().map(|c| c * c).sum::<f64>().sqrt().powf(p);
            let lower = w - (growth.c1 * s - growth.c2);
            let upper = growth.c3 * (s + 1.0) - w;
            let slack = lower.min(upper).min(w);
            grow.observe(slack / (1.0 + s), || format!("x = {x:?}, ξ = {xi:?}, W = {w}"));
        }
    }
    checks.push(grow.finish(
        "bulk.growth",
        format!(
            "W(x,0) = 0, W ≥ 0, {:.3}|ξ|^p − {:.3} ≤ W ≤ {:.3}(|ξ|^p + 1)",
            growth.c1, growth.c2, growth.c3
        ),
    ));

    let mut consistency = Worst::new();
    for x in &xs {
        for xi in &gradients {
            let sigma = bulk.stress(x, xi);
            for c in 0..xi.len() {
                let eps = 1e-5 * (1.0 + xi[c].abs());
                let (mut plus, mut minus) = (xi.clone(), xi.clone());
                plus[c] += eps;
                minus[c] -= eps;
                let fd = (bulk.density(x, &plus) - bulk.density(x, &minus)) / (2.0 * eps);
                let slack = FD_RELATIVE_TOL * (1.0 + sigma[c].abs()) - (sigma[c] - fd).abs();
                consistency.observe(slack, || {
                    format!("x = {x:?}, ξ = {xi:?}: ∂ξW = {}, fd = {fd}", sigma[c])
                });
            }
        }
    }
    checks.push(consistency.finish(
        "bulk.stress_consistency",
        "∂ξW matches centered differences of W",
    ));

    checks.push(scalar(
        "toughness.min_positive",
        toughness.min > 0.0,
        toughness.min,
        format!("κ_min = {} must be positive", toughness.min),
    ));

    let dirs = direction_samples(problem);
    let mut even = Worst::new();
    let mut bounds = Worst::new();
    for x in &xs {
        for nu in &dirs {
            let k = toughness.kappa(x, nu);
            let flipped = toughness.kappa(x, &[-nu[0], -nu[1]]);
            even.observe(-(k - flipped).abs(), || {
                format!("x = {x:?}, ν = {nu:?}: κ = {k}, κ(−ν) = {flipped}")
            });
            bounds.observe((k - toughness.min).min(toughness.max - k), || {
                format!("x = {x:?}, ν = {nu:?}: κ = {k}")
            });
        }
    }
    checks.push(even.finish("toughness.evenness", "κ(x, ν) = κ(x, −ν)"));
    checks.push(bounds.finish(
        "toughness.bounds",
        format!("{} ≤ κ ≤ {}", toughness.min, toughness.max),
    ));

    checks.push(scalar(
        "load.exponent",
        load.q > 1.0,
        load.q - 1.0,
        format!("q = {} must exceed 1", load.q),
    ));

    let mut alpha = scalar(
        "load.alpha_positive",
        load.alpha > 0.0,
        load.alpha,
        "α must be positive".to_string(),
    );
    alpha.waived = !alpha.passed && waiver;
    checks.push(alpha);

    let times = problem.grid.times();
    let midpoints: Vec<Point> = problem.lattice.bonds().iter().map(|b| b.midpoint).collect();
    let range = problem.spec.validation.u_range;
    let n_u = problem.spec.validation.u_points.max(2);
    let mut us: Vec<f64> = (0..n_u)
        .map(|j| -range + 2.0 * range * j as f64 / (n_u - 1) as f64)
        .collect();
    if load.alpha > 0.0 && load.q > 1.0 {
        // beyond this radius α|u|^q exceeds β, so a load that does not
        // confine cannot satisfy the bound there
        let tail = 2.0 * (load.beta / load.alpha + 1.0).powf(1.0 / load.q);
        us.extend([tail, -tail]);
    }
    let mut coercive = Worst::new();
    for &t in times {
        for x in &midpoints {
            for &u in &us {
                let lhs = -load.value(t, x, u);
                let rhs = load.alpha * u.abs().powf(load.q) - load.beta;
                coercive.observe(lhs - rhs, || format!("t = {t}, x = {x:?}, u = {u}"));
            }
        }
    }
    let mut c = coercive.finish("load.coercivity", "−F(t,x,u) ≥ α|u|^q − β");
    c.waived = !c.passed && waiver;
    checks.push(c);

    let mut derivs = Worst::new();
    for &t in times.iter().step_by((times.len() / 16).max(1)) {
        for x in midpoints.iter().step_by((midpoints.len() / 8).max(1)) {
            for &u in &us {
                let eps_u = 1e-5 * (1.0 + u.abs());
                let fd_u =
                    (load.value(t, x, u + eps_u) - load.value(t, x, u - eps_u)) / (2.0 * eps_u);
                let du = load.d_du(t, x, u);
                let eps_t = 1e-5 * (1.0 + t.abs());
                let fd_t =
                    (load.value(t + eps_t, x, u) - load.value(t - eps_t, x, u)) / (2.0 * eps_t);
                let dt = load.d_dt(t, x, u);
                let slack = (FD_RELATIVE_TOL * (1.0 + du.abs()) - (du - fd_u).abs())
                    .min(FD_RELATIVE_TOL * (1.0 + dt.abs()) - (dt - fd_t).abs());
                derivs.observe(slack, || {
                    format!("t = {t}, u = {u}: ∂uF = {du} (fd {fd_u}), ∂tF = {dt} (fd {fd_t})")
                });
            }
        }
    }
    checks.push(derivs.finish(
        "load.derivative_consistency",
        "∂uF and ∂tF match centered differences of F",
    ));

    let gripped: Vec<Point> = (0..problem.lattice.node_count())
        .filter(|&n| problem.lattice.label(n) == NodeLabel::Dirichlet)
        .map(|n| *problem.lattice.node(n))
        .collect();
    let mut lipschitz = Worst::new();
    let mut rate = Worst::new();
    for w in times.windows(2) {
        for x in &gripped {
            let dw = (program.value(w[1], x) - program.value(w[0], x)).abs();
            let bound = program.lipschitz * (w[1] - w[0]);
            lipschitz.observe(bound * (1.0 + 1e-12) + 1e-15 - dw, || {
                format!("t ∈ [{}, {}], x = {x:?}", w[0], w[1])
            });
        }
    }
    for &t in times.iter().step_by((times.len() / 16).max(1)) {
        for x in &gripped {
            let eps = 1e-5 * (1.0 + t);
            let fd = (program.value(t + eps, x) - program.value(t - eps, x)) / (2.0 * eps);
            let r = program.rate(t, x);
            rate.observe(FD_RELATIVE_TOL * (1.0 + r.abs()) - (r - fd).abs(), || {
                format!("t = {t}, x = {x:?}: ẇ = {r}, fd = {fd}")
            });
        }
    }
    checks.push(lipschitz.finish(
        "boundary.lipschitz",
        format!("|w(t₂) − w(t₁)| ≤ {}·|t₂ − t₁|", program.lipschitz),
    ));
    checks.push(rate.finish(
        "boundary.rate_consistency",
        "ẇ matches centered differences of w",
    ));

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemSpec;
    use crate::model::{Anisotropy, BulkLaw, LoadDensity, LoadLaw, ToughnessLaw};

    fn problem(spec: ProblemSpec) -> Problem {
        Problem::new(spec).unwrap()
    }

    fn attractive(alpha: f64, beta: f64) -> LoadLaw {
        LoadLaw {
            density: LoadDensity::Attractive {
                stiffness: 1.0,
                rate: 1.0,
            },
            alpha,
            beta,
            q: 2.0,
        }
    }

    #[test]
    fn every_check_appears_once() {
        let report = validate_problem(&problem(ProblemSpec::canonical_1d(1.0, 0.01, 2.0)));
        let mut ids: Vec<&str> = report.checks.iter().map(|c| c.id).collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
        assert_eq!(n, 13);
        assert!(report.is_ok(), "{report}");
        assert_eq!(report.waivers().count(), 1);
    }

    #[test]
    fn attractive_load_is_coercive() {
        // −F = ½(u − t)² ≥ ¼u² − ½t² since the difference is ¼(u − 2t)²
        let mut spec = ProblemSpec::canonical_1d(1.0, 0.01, 2.0);
        spec.load = attractive(0.25, 4.0);
        spec.validation.coercivity_waiver = false;
        let report = validate_problem(&problem(spec));
        assert!(report.get("load.coercivity").unwrap().passed, "{report}");
        assert!(report.is_ok(), "{report}");
        for u in (-40..=40).map(|j| j as f64 * 0.25) {
            for t in (0..=20).map(|j| j as f64 * 0.1) {
                let identity = 0.5 * (u - t) * (u - t) - 0.25 * u * u + 0.5 * t * t;
                assert!((identity - 0.25 * (u - 2.0 * t).powi(2)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_load_needs_waiver() {
        let mut spec = ProblemSpec::canonical_1d(1.0, 0.01, 2.0);
        spec.validation.coercivity_waiver = false;
        let report = validate_problem(&problem(spec.clone()));
        assert!(!report.is_ok());
        let alpha = report.get("load.alpha_positive").unwrap();
        assert!(!alpha.passed && !alpha.waived);
        assert!(alpha.message.contains("α must be positive"));

        spec.validation.coercivity_waiver = true;
        let report = validate_problem(&problem(spec));
        assert!(report.is_ok());
        assert!(report.get("load.alpha_positive").unwrap().waived);
    }

    #[test]
    fn dead_load_is_never_coercive() {
        for (g, beta) in [(1.0, 0.0), (-0.3, 100.0), (5.0, 1e6)] {
            let mut spec = ProblemSpec::canonical_1d(1.0, 0.1, 1.0);
            spec.load = LoadLaw {
                density: LoadDensity::Dead { density: g },
                alpha: 0.5,
                beta,
                q: 2.0,
            };
            let report = validate_problem(&problem(spec));
            assert!(!report.get("load.coercivity").unwrap().passed, "g = {g}");
        }
    }

    #[test]
    fn toughness_evenness() {
        let mut spec = ProblemSpec::canonical_1d(1.0, 0.1, 1.0);
        spec.toughness = ToughnessLaw {
            anisotropy: Anisotropy::Quadratic { strength: 1.0 },
            max: 2.0,
            ..ToughnessLaw::uniform(1.0)
        };
        assert!(validate_problem(&problem(spec.clone())).is_ok());

        spec.toughness = ToughnessLaw {
            anisotropy: Anisotropy::Linear { strength: 1.0 },
            min: 0.0,
            max: 2.0,
            ..ToughnessLaw::uniform(1.0)
        };
        let report = validate_problem(&problem(spec));
        let even = report.get("toughness.evenness").unwrap();
        assert!(!even.passed);
        assert!(!report.get("toughness.min_positive").unwrap().passed);
    }

    #[test]
    fn malformed_exponents_are_hard_failures() {
        let mut spec = ProblemSpec::canonical_1d(1.0, 0.1, 1.0);
        spec.bulk = BulkLaw::p_power(1.0, 1.0);
        spec.load.q = 0.5;
        spec.validation.coercivity_waiver = true;
        let report = validate_problem(&problem(spec));
        let failed: Vec<&str> = report.hard_failures().map(|c| c.id).collect();
        assert!(failed.contains(&"bulk.exponent"));
        assert!(failed.contains(&"load.exponent"));
    }

    #[test]
    fn bulk_families_pass_growth_and_consistency() {
        for bulk in [
            BulkLaw::quadratic(2.0),
            BulkLaw::p_power(1.0, 4.0),
            BulkLaw::p_power(1.0, 1.5),
            BulkLaw::flat_well(1.0),
        ] {
            let mut spec = ProblemSpec::canonical_1d(1.0, 0.1, 1.0);
            spec.bulk = bulk.clone();
            let report = validate_problem(&problem(spec));
            assert!(report.is_ok(), "{bulk:?}\n{report}");
        }
    }
}
