//! Time-discrete quasistatic evolution.
//!
//! At every grid time the total energy is minimized globally over cracks that
//! contain the previous crack, searched within the configured candidate
//! bonds. The resulting states are read back through a piecewise-constant,
//! right-open interpolation.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::audit::{check_global_stability, CompetitorPolicy};
use crate::config::{Problem, SearchKind};
use crate::energy::{energy_unchecked, force_work, surface_energy, work_rate, EnergyBreakdown};
use crate::equilibrium::{minimize_displacement, ElasticCache};
use crate::error::{Error, Result};
use crate::lattice::{check_admissible, AdmissiblePair, CrackSet, DisplacementField};
use crate::model::validate_problem;

/// Relative tolerance under which two energies count as tied.
pub const TIE_TOL: f64 = 1e-12;

pub fn energies_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Ordering of candidate minimizers: lower energy first; among ties, fewer
/// broken bonds, then the lexicographically smallest bond-id list.
pub fn compare_candidates(a: (f64, &CrackSet), b: (f64, &CrackSet)) -> Ordering {
    if !energies_tie(a.0, b.0) {
        return a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal);
    }
    a.1.len().cmp(&b.1.len()).then_with(|| a.1.lex_cmp(b.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStrategy {
    Initial,
    Exhaustive,
    Greedy,
}

impl StepStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStrategy::Initial => "initial",
            StepStrategy::Exhaustive => "exhaustive",
            StepStrategy::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for StepStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial" => Ok(StepStrategy::Initial),
            "exhaustive" => Ok(StepStrategy::Exhaustive),
            "greedy" => Ok(StepStrategy::Greedy),
            other => Err(Error::Config(format!("unknown step strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: DisplacementField,
    pub crack: CrackSet,
    pub energy: EnergyBreakdown,
    /// Elastic minimizer with the previous crack at the same time.
    pub predictor: EnergyBreakdown,
    pub strategy: StepStrategy,
    /// Set when the result is not certified globally minimal.
    pub heuristic: bool,
    pub candidates_evaluated: usize,
}

/// `K(Γ) + min_u (𝒲 − ℱ)` for one candidate crack.
fn candidate_energy(problem: &Problem, cache: &ElasticCache, crack: &CrackSet) -> Result<f64> {
    Ok(surface_energy(&problem.lattice, problem.toughness(), crack)? + cache.energy(crack)?)
}

struct BranchAndBound<'a> {
    problem: &'a Problem,
    cache: &'a ElasticCache<'a>,
    free: Vec<usize>,
    best: Option<(f64, CrackSet)>,
    evaluated: usize,
}

impl BranchAndBound<'_> {
    fn offer(&mut self, energy: f64, crack: &CrackSet) {
        let better = match &self.best {
            None => true,
            Some((e, c)) => compare_candidates((energy, crack), (*e, c)) == Ordering::Less,
        };
        if better {
            self.best = Some((energy, crack.clone()));
        }
    }

    /// Visits `current` and every superset formed with `free[next..]`.
    fn visit(&mut self, current: CrackSet, next: usize) -> Result<()> {
        let e = candidate_energy(self.problem, self.cache, &current)?;
        self.evaluated += 1;
        self.offer(e, &current);
        for j in next..self.free.len() {
            let child = current.with([self.free[j]]);
            // any crack in this subtree has at least the child's surface
            // energy and at most the elastic energy of the largest crack
            let largest = child.with(self.free[j + 1..].iter().copied());
            let lower_bound = surface_energy(&self.problem.lattice, self.problem.toughness(), &child)?
                + self.cache.energy(&largest)?;
            if let Some((best, _)) = &self.best {
                if lower_bound > *best && !energies_tie(lower_bound, *best) {
                    continue;
                }
            }
            self.visit(child, j + 1)?;
        }
        Ok(())
    }
}

fn exhaustive(
    problem: &Problem,
    cache: &ElasticCache,
    prev: &CrackSet,
    free: Vec<usize>,
) -> Result<(CrackSet, usize)> {
    let mut search = BranchAndBound {
        problem,
        cache,
        free,
        best: None,
        evaluated: 0,
    };
    search.visit(prev.clone(), 0)?;
    let (_, crack) = search.best.expect("the previous crack is always evaluated");
    Ok((crack, search.evaluated))
}

fn greedy(
    problem: &Problem,
    cache: &ElasticCache,
    prev: &CrackSet,
    free: &[usize],
) -> Result<(CrackSet, usize)> {
    let mut current = prev.clone();
    let mut energy = candidate_energy(problem, cache, &current)?;
    let mut evaluated = 1;
    loop {
        let options: Vec<usize> = free.iter().copied().filter(|b| !current.contains(*b)).collect();
        if options.is_empty() {
            break;
        }
        let scored: Vec<Result<(f64, CrackSet)>> = options
            .par_iter()
            .map(|&b| {
                let next = current.with([b]);
                candidate_energy(problem, cache, &next).map(|e| (e, next))
            })
            .collect();
        evaluated += scored.len();
        let mut best: Option<(f64, CrackSet)> = None;
        for item in scored {
            let (e, c) = item?;
            let better = match &best {
                None => true,
                Some((be, bc)) => compare_candidates((e, &c), (*be, bc)) == Ordering::Less,
            };
            if better {
                best = Some((e, c));
            }
        }
        let (e, c) = best.expect("options is not empty");
        if compare_candidates((e, &c), (energy, &current)) == Ordering::Less {
            current = c;
            energy = e;
        } else {
            break;
        }
    }
    Ok((current, evaluated))
}

/// Solves one incremental minimum problem at `t` with the constraint
/// `Γ ⊇ prev`. `warm` (normally the previous displacement) seeds every
/// solve and fixes the position of freely floating fragments.
pub fn incremental_step(
    problem: &Problem,
    time_index: usize,
    t: f64,
    prev: &CrackSet,
    warm: &DisplacementField,
    strategy: SearchKind,
) -> Result<StepOutcome> {
    let cache = ElasticCache::new(problem, time_index, t, warm);
    let free: Vec<usize> = problem
        .candidates
        .iter()
        .copied()
        .filter(|b| !prev.contains(*b))
        .collect();
    let settings = &problem.spec.strategy;

    let (crack, evaluated, used, heuristic) = match strategy {
        SearchKind::Greedy => {
            let (c, n) = greedy(problem, &cache, prev, &free)?;
            (c, n, StepStrategy::Greedy, true)
        }
        SearchKind::Exhaustive => {
            let count: u128 = 1u128.checked_shl(free.len() as u32).unwrap_or(u128::MAX);
            if count > settings.exhaustive_limit as u128 {
                if !settings.greedy_fallback {
                    return Err(Error::SearchTooLarge {
                        free: free.len(),
                        count,
                        limit: settings.exhaustive_limit,
                    });
                }
                let (c, n) = greedy(problem, &cache, prev, &free)?;
                (c, n, StepStrategy::Greedy, true)
            } else {
                let (c, n) = exhaustive(problem, &cache, prev, free)?;
                (c, n, StepStrategy::Exhaustive, false)
            }
        }
    };

    let (u, _) = minimize_displacement(problem, t, &crack, Some(warm))?;
    let energy = energy_unchecked(problem, t, &u, &crack);
    let (v, _) = minimize_displacement(problem, t, prev, Some(warm))?;
    let predictor = energy_unchecked(problem, t, &v, prev);
    Ok(StepOutcome {
        u,
        crack,
        energy,
        predictor,
        strategy: used,
        heuristic,
        candidates_evaluated: evaluated,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub index: usize,
    pub t: f64,
    #[serde(serialize_with = "serialize_crack")]
    pub crack: CrackSet,
    #[serde(skip)]
    pub u: DisplacementField,
    pub energy: EnergyBreakdown,
    pub predictor: EnergyBreakdown,
    pub strategy: StepStrategy,
    pub heuristic: bool,
    pub candidates_evaluated: usize,
    /// Left-endpoint Riemann sum of the external work from `t = 0`.
    pub cumulative_work: f64,
}

fn serialize_crack<S: serde::Serializer>(crack: &CrackSet, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(crack.ids())
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub steps: Vec<TraceStep>,
    /// False when a step failed and the run stopped early.
    pub complete: bool,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.t).collect()
    }

    /// Index of the first step with a nonempty crack beyond the initial one.
    pub fn first_crack_step(&self) -> Option<usize> {
        let initial = self.steps.first()?.crack.len();
        self.steps.iter().position(|s| s.crack.len() > initial)
    }
}

/// Runs the scheme from the default initial state: the configured initial
/// crack (empty unless set) with its elastic minimizer at `t = 0`.
pub fn run_evolution(problem: &Problem) -> Result<EvolutionTrace> {
    run_evolution_with(problem, problem.spec.strategy.kind)
}

pub fn run_evolution_with(problem: &Problem, strategy: SearchKind) -> Result<EvolutionTrace> {
    let report = validate_problem(problem);
    if !report.is_ok() {
        return Err(Error::Validation(
            report
                .hard_failures()
                .map(|c| format!("{}: {} ({})", c.id, c.message, c.worst_sample))
                .collect(),
        ));
    }
    let crack0 = CrackSet::from_ids(&problem.lattice, problem.spec.initial.crack.iter().copied())?;
    let (u0, _) = minimize_displacement(problem, 0.0, &crack0, None)?;
    let initial = AdmissiblePair::new(&problem.lattice, problem.boundary(), 0.0, u0, crack0)?;
    run_evolution_from(problem, initial, strategy)
}

/// Runs the scheme from an arbitrary initial pair, which must be globally
/// stable at `t = 0`.
pub fn run_evolution_from(
    problem: &Problem,
    initial: AdmissiblePair,
    strategy: SearchKind,
) -> Result<EvolutionTrace> {
    let times = problem.grid.times();
    check_admissible(&problem.lattice, problem.boundary(), times[0], &initial.u, &initial.crack)?;
    let policy = CompetitorPolicy::from_section(&problem.spec.audit);
    let stability = check_global_stability(
        problem,
        times[0],
        &initial.u,
        &initial.crack,
        &policy,
        problem.spec.audit.stability_tol,
    )?;
    if !stability.passed {
        return Err(Error::InitialNotStable {
            margin: stability.worst_margin,
        });
    }

    let energy0 = energy_unchecked(problem, times[0], &initial.u, &initial.crack);
    let mut trace = EvolutionTrace {
        steps: vec![TraceStep {
            index: 0,
            t: times[0],
            crack: initial.crack,
            u: initial.u,
            energy: energy0,
            predictor: energy0,
            strategy: StepStrategy::Initial,
            heuristic: false,
            candidates_evaluated: 0,
            cumulative_work: 0.0,
        }],
        complete: false,
    };

    for (i, &t) in times.iter().enumerate().skip(1) {
        let prev = trace.steps.last().expect("trace starts with the initial state");
        let outcome = match incremental_step(problem, i, t, &prev.crack, &prev.u, strategy) {
            Ok(o) => o,
            Err(e) => {
                return Err(Error::Aborted {
                    step: i,
                    partial: Box::new(trace),
                    source: Box::new(e),
                })
            }
        };
        let power = work_rate(problem, prev.t, &prev.u, &prev.crack);
        let load = problem.load();
        let cumulative_work = prev.cumulative_work
            + (t - prev.t) * power
            + force_work(&problem.lattice, load, t, &outcome.u)
            - force_work(&problem.lattice, load, prev.t, &prev.u);
        trace.steps.push(TraceStep {
            index: i,
            t,
            crack: outcome.crack,
            u: outcome.u,
            energy: outcome.energy,
            predictor: outcome.predictor,
            strategy: outcome.strategy,
            heuristic: outcome.heuristic,
            candidates_evaluated: outcome.candidates_evaluated,
            cumulative_work,
        });
    }
    trace.complete = true;
    Ok(trace)
}

/// State of the largest grid time not exceeding `t` (right-open intervals;
/// the final time maps to the final step).
pub fn interpolate(trace: &EvolutionTrace, t: f64) -> Result<&TraceStep> {
    let (first, last) = match (trace.steps.first(), trace.steps.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(Error::TimeOutOfRange { t, start: 0.0, end: 0.0 }),
    };
    if !(t >= first && t <= last) {
        return Err(Error::TimeOutOfRange {
            t,
            start: first,
            end: last,
        });
    }
    let idx = trace.steps.partition_point(|s| s.t <= t) - 1;
    Ok(&trace.steps[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemSpec;
    use crate::model::{ToughnessField, ToughnessLaw};

    fn canonical(kappa: f64) -> Problem {
        Problem::new(ProblemSpec::canonical_1d(kappa, 0.01, 2.0)).unwrap()
    }

    fn step(p: &Problem, t: f64) -> StepOutcome {
        let empty = CrackSet::empty(&p.lattice);
        let warm = DisplacementField::zeros(&p.lattice);
        incremental_step(p, 1, t, &empty, &warm, SearchKind::Exhaustive).unwrap()
    }

    #[test]
    fn below_threshold_stays_intact() {
        let p = canonical(1.0);
        let o = step(&p, 1.0);
        assert!(o.crack.is_empty());
        assert!((o.energy.total - 0.5).abs() < 1e-12);
        assert!(!o.heuristic);
    }

    #[test]
    fn above_threshold_breaks_the_first_bond() {
        let p = canonical(1.0);
        let o = step(&p, 1.42);
        assert_eq!(o.crack.to_vec(), vec![0]);
        assert!((o.energy.total - 1.0).abs() < 1e-12);
        assert!((o.predictor.total - 0.5 * 1.42 * 1.42).abs() < 1e-12);
    }

    #[test]
    fn cheaper_right_half_and_the_tie_rule() {
        let mut spec = ProblemSpec::canonical_1d(1.0, 0.01, 2.0);
        spec.toughness = ToughnessLaw {
            field: ToughnessField::Step {
                axis: 0,
                split: 0.5,
                below: 1.0,
                above: 0.5,
            },
            min: 0.5,
            max: 1.0,
            ..ToughnessLaw::uniform(1.0)
        };
        let p = Problem::new(spec).unwrap();
        let at_tie = step(&p, 1.0);
        assert!(at_tie.crack.is_empty(), "equal energies keep the smaller crack");
        assert!((at_tie.energy.total - 0.5).abs() < 1e-12);
        let past = step(&p, 1.01);
        assert_eq!(past.crack.to_vec(), vec![2]);
        assert!((past.energy.total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn greedy_matches_on_the_bar() {
        let p = canonical(1.0);
        let empty = CrackSet::empty(&p.lattice);
        let warm = DisplacementField::zeros(&p.lattice);
        let g = incremental_step(&p, 1, 1.42, &empty, &warm, SearchKind::Greedy).unwrap();
        assert!(g.heuristic);
        assert_eq!(g.crack.to_vec(), vec![0]);
        assert!((g.energy.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn search_limit_is_enforced() {
        let mut spec = ProblemSpec::canonical_1d(1.0, 0.01, 2.0);
        spec.strategy.exhaustive_limit = 16;
        let p = Problem::new(spec.clone()).unwrap();
        let empty = CrackSet::empty(&p.lattice);
        let warm = DisplacementField::zeros(&p.lattice);
        let err = incremental_step(&p, 1, 1.0, &empty, &warm, SearchKind::Exhaustive).unwrap_err();
        assert!(matches!(err, Error::SearchTooLarge { count: 64, .. }));
        spec.strategy.greedy_fallback = true;
        let p = Problem::new(spec).unwrap();
        let o = incremental_step(&p, 1, 1.0, &empty, &warm, SearchKind::Exhaustive).unwrap();
        assert!(o.heuristic);
        assert_eq!(o.strategy, StepStrategy::Greedy);
    }

    #[test]
    fn canonical_run() {
        let p = canonical(1.0);
        let trace = run_evolution(&p).unwrap();
        assert!(trace.complete);
        assert_eq!(trace.len(), 201);
        let first = trace.first_crack_step().unwrap();
        assert_eq!(first, 142);
        for s in &trace.steps {
            assert_eq!(s.crack.len(), usize::from(s.index >= 142), "step {}", s.index);
        }
    }

    #[test]
    fn short_run_never_cracks() {
        let p = Problem::new(ProblemSpec::canonical_1d(1.0, 0.01, 0.5)).unwrap();
        let trace = run_evolution(&p).unwrap();
        for s in &trace.steps {
            assert!(s.crack.is_empty());
            assert!((s.energy.total - 0.5 * s.t * s.t).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_initial_state_is_refused() {
        let p = canonical(1.0);
        let crack = CrackSet::empty(&p.lattice);
        // a stretched bar at t = 0 with an intact grip is inadmissible;
        // pretend the grip already moved by giving the wrong time
        let u = DisplacementField::from_fn(&p.lattice, |x| 2.0 * x[0]);
        let pair = AdmissiblePair {
            t: 0.0,
            u,
            crack,
        };
        assert!(run_evolution_from(&p, pair, SearchKind::Exhaustive).is_err());
    }

    #[test]
    fn interpolation_is_right_open() {
        let p = Problem::new(ProblemSpec::canonical_1d(1.0, 0.1, 0.5)).unwrap();
        let trace = run_evolution(&p).unwrap();
        let t3 = trace.steps[3].t;
        assert_eq!(interpolate(&trace, t3).unwrap().index, 3);
        assert_eq!(interpolate(&trace, 0.35).unwrap().index, 3);
        assert_eq!(interpolate(&trace, trace.steps.last().unwrap().t).unwrap().index, 5);
        assert!(interpolate(&trace, 0.6).is_err());
        assert!(interpolate(&trace, -0.1).is_err());
    }
}
