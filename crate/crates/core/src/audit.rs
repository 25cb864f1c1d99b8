//! Post-hoc checks of a computed trace: global stability, irreversibility,
//! energy balance and the jump structure of the energy terms.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AuditSection, Problem};
use crate::energy::{energy_unchecked, force_work, surface_energy, work_rate};
use crate::equilibrium::elastic_energy_of_crack;
use crate::error::{Error, Result};
use crate::evolution::{EvolutionTrace, TraceStep};
use crate::lattice::{check_admissible, crack_contains, CrackSet, DisplacementField};

/// Which competitor cracks a stability check looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CompetitorPolicy {
    /// Enumerate every superset when there are at most this many.
    pub exhaustive_limit: u64,
    /// Otherwise: all single-bond extensions plus this many random supersets.
    pub random: usize,
    pub seed: u64,
}

impl CompetitorPolicy {
    pub fn exhaustive() -> Self {
        CompetitorPolicy {
            exhaustive_limit: u64::MAX,
            random: 0,
            seed: 0,
        }
    }

    pub fn from_section(section: &AuditSection) -> Self {
        CompetitorPolicy {
            exhaustive_limit: section.competitor_limit,
            random: section.random_competitors,
            seed: section.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub t: f64,
    pub passed: bool,
    /// Largest `𝔈(state) − 𝔈(best pair with the competitor crack)`.
    pub worst_margin: f64,
    pub worst_competitor: Vec<usize>,
    pub state_energy: f64,
    pub competitors: usize,
    pub exhaustive: bool,
}

fn competitor_cracks(
    problem: &Problem,
    t: f64,
    crack: &CrackSet,
    policy: &CompetitorPolicy,
) -> (Vec<CrackSet>, bool) {
    let free: Vec<usize> = problem
        .candidates
        .iter()
        .copied()
        .filter(|b| !crack.contains(*b))
        .collect();
    let feasible = free.len() < 64 && (1u64 << free.len()) <= policy.exhaustive_limit;
    if feasible {
        let all = (0..1u64 << free.len())
            .map(|mask| {
                crack.with(
                    free.iter()
                        .enumerate()
                        .filter(|(j, _)| mask >> j & 1 == 1)
                        .map(|(_, &b)| b),
                )
            })
            .collect();
        return (all, true);
    }
    let mut out = vec![crack.clone()];
    out.extend(free.iter().map(|&b| crack.with([b])));
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ t.to_bits());
    for _ in 0..policy.random {
        let picks: Vec<usize> = free.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        out.push(crack.with(picks));
    }
    (out, false)
}

/// Compares the state against the minimal-energy pair of every competitor
/// crack `Γ ⊇ crack` in the policy set. The competitor `Γ = crack` itself is
/// always included.
pub fn check_global_stability(
    problem: &Problem,
    t: f64,
    u: &DisplacementField,
    crack: &CrackSet,
    policy: &CompetitorPolicy,
    tol: f64,
) -> Result<StabilityReport> {
    let state_energy = energy_unchecked(problem, t, u, crack).total;
    let (competitors, exhaustive) = competitor_cracks(problem, t, crack, policy);
    let energies: Vec<Result<f64>> = competitors
        .par_iter()
        .map(|c| {
            Ok(surface_energy(&problem.lattice, problem.toughness(), c)?
                + elastic_energy_of_crack(problem, t, c, Some(u))?)
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_competitor = Vec::new();
    for (c, e) in competitors.iter().zip(energies) {
        let margin = state_energy - e?;
        if margin > worst {
            worst = margin;
            worst_competitor = c.to_vec();
        }
    }
    Ok(StabilityReport {
        t,
        passed: worst <= tol,
        worst_margin: worst,
        worst_competitor,
        state_energy,
        competitors: competitors.len(),
        exhaustive,
    })
}

/// True iff every crack contains its predecessor.
pub fn check_irreversibility(trace: &EvolutionTrace) -> bool {
    cracks_nested(trace.steps.iter().map(|s| &s.crack))
}

pub fn cracks_nested<'a>(cracks: impl IntoIterator<Item = &'a CrackSet>) -> bool {
    let mut prev: Option<&CrackSet> = None;
    for c in cracks {
        if let Some(p) = prev {
            if !crack_contains(p, c).unwrap_or(false) {
                return false;
            }
        }
        prev = Some(c);
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceWindow {
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// `𝒲(t₂) − 𝒲(t₁) + 𝒦(Γ(t₂) ∖ Γ(t₁))`.
    pub lhs: f64,
    /// Left Riemann sum of the work display plus the force-work increment.
    pub rhs: f64,
    pub residual: f64,
    pub normalized: f64,
    /// `lhs − rhs`; discrete evolutions leave a small surplus on the right.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub whole_run: BalanceWindow,
    pub steps: Vec<BalanceWindow>,
    pub tolerance: f64,
    pub energy_scale: f64,
    pub passed: bool,
}

impl BalanceReport {
    pub fn worst_step(&self) -> Option<&BalanceWindow> {
        self.steps
            .iter()
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
    }
}

/// `max(1, largest |energy term|)` over the trace unless the config fixes it.
pub fn energy_scale(problem: &Problem, trace: &EvolutionTrace) -> f64 {
    if let Some(s) = problem.spec.audit.energy_scale {
        return s;
    }
    trace
        .steps
        .iter()
        .flat_map(|s| [s.energy.bulk, s.energy.surface, s.energy.force_work])
        .map(f64::abs)
        .fold(1.0, f64::max)
}

struct BalanceData {
    power: Vec<f64>,
    load: Vec<f64>,
}

impl BalanceData {
    fn new(problem: &Problem, steps: &[TraceStep]) -> Self {
        BalanceData {
            power: steps
                .iter()
                .map(|s| work_rate(problem, s.t, &s.u, &s.crack))
                .collect(),
            load: steps
                .iter()
                .map(|s| force_work(&problem.lattice, problem.load(), s.t, &s.u))
                .collect(),
        }
    }

    fn window(&self, problem: &Problem, steps: &[TraceStep], a: usize, b: usize) -> Result<BalanceWindow> {
        let (sa, sb) = (&steps[a], &steps[b]);
        let new_crack = sb.crack.difference(&sa.crack)?;
        let lhs = sb.energy.bulk - sa.energy.bulk
            + surface_energy(&problem.lattice, problem.toughness(), &new_crack)?;
        let riemann: f64 = (a..b)
            .map(|i| (steps[i + 1].t - steps[i].t) * self.power[i])
            .sum();
        let rhs = riemann + self.load[b] - self.load[a];
        let residual = (lhs - rhs).abs();
        Ok(BalanceWindow {
            start: a,
            end: b,
            t_start: sa.t,
            t_end: sb.t,
            lhs,
            rhs,
            residual,
            normalized: residual / (1.0 + rhs.abs()),
            margin: lhs - rhs,
        })
    }
}

/// Balance over one window `[steps[a].t, steps[b].t]`.
pub fn balance_window(problem: &Problem, trace: &EvolutionTrace, a: usize, b: usize) -> Result<BalanceWindow> {
    if a > b || b >= trace.len() {
        return Err(Error::Sequence(format!(
            "window {a}..{b} outside a trace of {} steps",
            trace.len()
        )));
    }
    let data = BalanceData::new(problem, &trace.steps[..=b]);
    data.window(problem, &trace.steps, a, b)
}

/// Balance over the whole run and over every single step.
pub fn energy_balance_report(problem: &Problem, trace: &EvolutionTrace) -> Result<BalanceReport> {
    if !trace.complete || trace.is_empty() {
        return Err(Error::Sequence("energy balance needs a complete trace".into()));
    }
    let steps = &trace.steps;
    let data = BalanceData::new(problem, steps);
    let last = steps.len() - 1;
    let whole_run = data.window(problem, steps, 0, last)?;
    let per_step = (0..last)
        .map(|i| data.window(problem, steps, i, i + 1))
        .collect::<Result<Vec<_>>>()?;
    let max_step = steps
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .fold(0.0, f64::max);
    let scale = energy_scale(problem, trace);
    let tolerance = problem.spec.audit.balance_factor * max_step * scale;
    let passed = whole_run.residual <= tolerance && per_step.iter().all(|w| w.residual <= tolerance);
    Ok(BalanceReport {
        whole_run,
        steps: per_step,
        tolerance,
        energy_scale: scale,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jump {
    pub index: usize,
    pub t: f64,
    /// Stored energy after the step minus that of the predictor (previous
    /// crack, same time).
    pub delta_bulk: f64,
    pub delta_surface: f64,
    pub delta_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpReport {
    pub threshold: f64,
    pub scale: f64,
    pub jumps: Vec<Jump>,
    /// Largest `|𝔈(step) − 𝔈(predictor)|`: the jump of the total energy at
    /// a fixed time, which must vanish with the time step.
    pub max_total_jump: f64,
    /// Largest `|𝔈ᵢ − 𝔈ᵢ₋₁|` between consecutive steps.
    pub max_consecutive_change: f64,
}

fn step_jump(s: &TraceStep, prev: &TraceStep) -> Jump {
    Jump {
        index: s.index,
        t: s.t,
        delta_bulk: s.energy.bulk - s.predictor.bulk,
        delta_surface: s.energy.surface - prev.energy.surface,
        delta_total: s.energy.total - s.predictor.total,
    }
}

pub fn detect_energy_jumps(trace: &EvolutionTrace, threshold: f64) -> JumpReport {
    let scale = trace
        .steps
        .iter()
        .flat_map(|s| [s.energy.bulk, s.energy.surface, s.predictor.bulk])
        .map(f64::abs)
        .fold(0.0, f64::max);
    let mut jumps = Vec::new();
    let mut max_total_jump: f64 = 0.0;
    let mut max_consecutive_change: f64 = 0.0;
    for pair in trace.steps.windows(2) {
        let j = step_jump(&pair[1], &pair[0]);
        max_total_jump = max_total_jump.max(j.delta_total.abs());
        max_consecutive_change =
            max_consecutive_change.max((pair[1].energy.total - pair[0].energy.total).abs());
        let bar = threshold * scale;
        if j.delta_bulk.abs() > bar || j.delta_surface.abs() > bar {
            jumps.push(j);
        }
    }
    JumpReport {
        threshold,
        scale,
        jumps,
        max_total_jump,
        max_consecutive_change,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub passed: bool,
    pub records: Vec<AuditRecord>,
    pub jumps: JumpReport,
    pub balance: BalanceReport,
    pub stability: Vec<StabilityReport>,
}

impl AuditReport {
    pub fn failures(&self) -> impl Iterator<Item = &AuditRecord> {
        self.records.iter().filter(|r| !r.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report is plain data")
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stability_fails = self
            .stability
            .iter()
            .filter(|s| !s.passed)
            .count();
        let worst = self
            .stability
            .iter()
            .map(|s| s.worst_margin)
            .fold(f64::NEG_INFINITY, f64::max);
        for r in &self.records {
            if r.check.starts_with("stability.step_") || r.check.starts_with("balance.step_") {
                if !r.passed {
                    writeln!(f, "FAIL {:<28} {:.3e} > {:.3e} {}", r.check, r.value, r.tolerance, r.detail)?;
                }
                continue;
            }
            let tag = if r.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {:<28} {:.6e} (tol {:.3e}) {}", r.check, r.value, r.tolerance, r.detail)?;
        }
        writeln!(
            f,
            "stability: {} steps, {} failing, worst margin {:.3e}",
            self.stability.len(),
            stability_fails,
            worst
        )?;
        writeln!(
            f,
            "jumps: {} (max total-energy jump {:.6e})",
            self.jumps.jumps.len(),
            self.jumps.max_total_jump
        )?;
        write!(f, "{}", if self.passed { "audit PASSED" } else { "audit FAILED" })
    }
}

/// Runs every check on a complete trace.
pub fn audit_trace(problem: &Problem, trace: &EvolutionTrace) -> Result<AuditReport> {
    let settings = &problem.spec.audit;
    let policy = CompetitorPolicy::from_section(settings);
    let mut records = Vec::new();

    let mut worst_mismatch: f64 = 0.0;
    let mut inadmissible = Vec::new();
    for s in &trace.steps {
        if check_admissible(&problem.lattice, problem.boundary(), s.t, &s.u, &s.crack).is_err() {
            inadmissible.push(s.index);
            continue;
        }
        let e = energy_unchecked(problem, s.t, &s.u, &s.crack);
        let scale = e.total.abs().max(1.0);
        worst_mismatch = worst_mismatch.max((e.total - s.energy.total).abs() / scale);
    }
    records.push(AuditRecord {
        check: "trace.consistency".into(),
        passed: inadmissible.is_empty() && worst_mismatch <= 1e-12,
        value: worst_mismatch,
        tolerance: 1e-12,
        detail: if inadmissible.is_empty() {
            "recorded energies match the stored fields".into()
        } else {
            format!("inadmissible fields at steps {inadmissible:?}")
        },
    });

    let irreversible = check_irreversibility(trace);
    records.push(AuditRecord {
        check: "irreversibility".into(),
        passed: irreversible,
        value: if irreversible { 0.0 } else { 1.0 },
        tolerance: 0.0,
        detail: format!("{} steps", trace.len()),
    });

    let mut stability = Vec::with_capacity(trace.len());
    for s in &trace.steps {
        let r = check_global_stability(problem, s.t, &s.u, &s.crack, &policy, settings.stability_tol)?;
        records.push(AuditRecord {
            check: format!("stability.step_{}", s.index),
            passed: r.passed,
            value: r.worst_margin,
            tolerance: settings.stability_tol,
            detail: format!(
                "{} competitors{}",
                r.competitors,
                if r.exhaustive { "" } else { " (sampled)" }
            ),
        });
        stability.push(r);
    }
    let worst = stability
        .iter()
        .map(|s| s.worst_margin)
        .fold(f64::NEG_INFINITY, f64::max);
    records.push(AuditRecord {
        check: "stability".into(),
        passed: stability.iter().all(|s| s.passed),
        value: worst,
        tolerance: settings.stability_tol,
        detail: if stability.iter().all(|s| s.exhaustive) {
            "exhaustive over candidates".into()
        } else {
            "sampled competitors on some steps".into()
        },
    });

    let balance = energy_balance_report(problem, trace)?;
    for w in &balance.steps {
        records.push(AuditRecord {
            check: format!("balance.step_{}", w.end),
            passed: w.residual <= balance.tolerance,
            value: w.residual,
            tolerance: balance.tolerance,
            detail: format!("lhs {:.6e} rhs {:.6e}", w.lhs, w.rhs),
        });
    }
    records.push(AuditRecord {
        check: "balance.whole_run".into(),
        passed: balance.whole_run.residual <= balance.tolerance,
        value: balance.whole_run.residual,
        tolerance: balance.tolerance,
        detail: format!(
            "lhs {:.6e} rhs {:.6e}",
            balance.whole_run.lhs, balance.whole_run.rhs
        ),
    });

    let jumps = detect_energy_jumps(trace, settings.jump_threshold);
    let heuristic = trace.steps.iter().filter(|s| s.heuristic).count();
    records.push(AuditRecord {
        check: "search.certified".into(),
        passed: true,
        value: heuristic as f64,
        tolerance: 0.0,
        detail: if heuristic == 0 {
            "every step exhaustive".into()
        } else {
            format!("{heuristic} steps from greedy search are not certified minima")
        },
    });

    let passed = records.iter().all(|r| r.passed);
    Ok(AuditReport {
        passed,
        records,
        jumps,
        balance,
        stability,
    })
}
