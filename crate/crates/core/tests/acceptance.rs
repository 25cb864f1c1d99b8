//! Exit criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use brittle_core::audit::{
    balance_window, check_global_stability, check_irreversibility, detect_energy_jumps,
    energy_balance_report, CompetitorPolicy,
};
use brittle_core::config::{CandidateSpec, Problem, ProblemSpec, SearchKind};
use brittle_core::energy::{bulk_energy_of_strains, df_dt, force_work, pair_df, pair_dw};
use brittle_core::evolution::{incremental_step, run_evolution, EvolutionTrace};
use brittle_core::io::trace_csv;
use brittle_core::lattice::{BondKind, CrackSet, DisplacementField, Edge, Geometry, Lattice};
use brittle_core::lemma::{lemma_experiment, Oscillation, SequenceSpec, TestFunction};
use brittle_core::model::{
    BulkLaw, LoadDensity, LoadLaw, Modulation, ToughnessField, ToughnessLaw,
};

fn report(n: u32, passed: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if passed { "PASS" } else { "FAIL" });
}

fn canonical(kappa: f64, step: f64, end: f64) -> Problem {
    Problem::new(ProblemSpec::canonical_1d(kappa, step, end)).unwrap()
}

/// Minimal total energy of the four-cell bar over every crack containing
/// `prev`: any broken bond (interior or grip) releases the whole stored
/// energy `t²/2`, and every bond costs `κ`.
fn bar_oracle(kappa: f64, t: f64, prev: &[usize]) -> (f64, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..64 {
        let set: Vec<usize> = (0..6).filter(|b| mask >> b & 1 == 1).collect();
        if !prev.iter().all(|b| set.contains(b)) {
            continue;
        }
        let elastic = if set.is_empty() { 0.5 * t * t } else { 0.0 };
        let e = kappa * set.len() as f64 + elastic;
        let better = match &best {
            None => true,
            Some((be, bs)) => {
                let tie = (e - be).abs() <= 1e-12 * e.abs().max(be.abs()).max(1.0);
                if tie {
                    (set.len(), &set) < (bs.len(), bs)
                } else {
                    e < *be
                }
            }
        };
        if better {
            best = Some((e, set));
        }
    }
    best.unwrap()
}

#[test]
fn criterion_1_griffith_initiation() {
    let mut ok = true;
    let mut details = Vec::new();
    for kappa in [0.5, 1.0, 2.0] {
        let dt = 0.01;
        // the κ = 2 threshold is t* = 2, so the run must extend past it
        let p = canonical(kappa, dt, 2.5);
        let start = Instant::now();
        let trace = run_evolution(&p).unwrap();
        let elapsed = start.elapsed();
        let t_star = (2.0 * kappa).sqrt();
        let first = trace.first_crack_step().map(|i| trace.steps[i].t);
        let in_window = first.is_some_and(|t| t_star < t && t <= t_star + dt + 1e-12);

        let mut matches_oracle = true;
        let mut prev: Vec<usize> = Vec::new();
        for s in &trace.steps[1..] {
            let (e, set) = bar_oracle(kappa, s.t, &prev);
            if s.crack.to_vec() != set || (s.energy.total - e).abs() > 1e-12 {
                matches_oracle = false;
            }
            prev = s.crack.to_vec();
        }
        let fast = elapsed < Duration::from_secs(1);
        ok &= in_window && matches_oracle && fast;
        details.push(format!(
            "κ={kappa}: t*={t_star:.6} t_crack={first:?} oracle={matches_oracle} {:.0?}",
            elapsed
        ));
    }
    report(1, ok, &details.join("; "));
    assert!(ok);
}

/// `(id, a, b, volume / length², midpoint, normal, area)`
type OracleBond = (usize, usize, usize, f64, [f64; 2], [f64; 2], f64);
/// `(id, node, midpoint, normal, area)`
type OracleAnchor = (usize, usize, [f64; 2], [f64; 2], f64);

/// Independent model of a rectangular lattice: its own node and bond
/// enumeration, quadratic energy assembly and dense solve.
struct PlateOracle {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    interior: Vec<OracleBond>,
    anchors: Vec<OracleAnchor>,
}

impl PlateOracle {
    fn new(nx: usize, ny: usize, lattice: &Lattice) -> Self {
        let (hx, hy) = (1.0 / nx as f64, 1.0 / ny as f64);
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let half = |edge: bool, h: f64| if edge { 0.5 * h } else { h };
        // the library's bond numbering is only used to name bonds
        let id_of = |a: usize, b: usize| {
            lattice
                .bonds()
                .iter()
                .position(|bond| bond.kind == BondKind::Interior { a, b })
                .unwrap()
        };
        let mut interior = Vec::new();
        for j in 0..=ny {
            for i in 0..nx {
                let (a, b) = (node(i, j), node(i + 1, j));
                let area = half(j == 0 || j == ny, hy);
                let mid = [(i as f64 + 0.5) * hx, j as f64 * hy];
                interior.push((id_of(a, b), a, b, area * hx / (hx * hx), mid, [1.0, 0.0], area));
            }
        }
        for j in 0..ny {
            for i in 0..=nx {
                let (a, b) = (node(i, j), node(i, j + 1));
                let area = half(i == 0 || i == nx, hx);
                let mid = [i as f64 * hx, (j as f64 + 0.5) * hy];
                interior.push((id_of(a, b), a, b, area * hy / (hy * hy), mid, [0.0, 1.0], area));
            }
        }
        let mut anchors = Vec::new();
        for j in 0..=ny {
            for (i, normal) in [(0, [-1.0, 0.0]), (nx, [1.0, 0.0])] {
                let n = node(i, j);
                let id = lattice
                    .bonds()
                    .iter()
                    .position(|bond| bond.kind == BondKind::Anchor { node: n })
                    .unwrap();
                let area = half(j == 0 || j == ny, hy);
                anchors.push((id, n, [i as f64 * hx, j as f64 * hy], normal, area));
            }
        }
        PlateOracle {
            nx,
            ny,
            hx,
            hy,
            interior,
            anchors,
        }
    }

    fn nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    fn x(&self, n: usize) -> [f64; 2] {
        let i = n % (self.nx + 1);
        let j = n / (self.nx + 1);
        [i as f64 * self.hx, j as f64 * self.hy]
    }

    fn node_volume(&self, n: usize) -> f64 {
        let i = n % (self.nx + 1);
        let j = n / (self.nx + 1);
        let fx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
        let fy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
        fx * self.hx * fy * self.hy
    }

    /// `min_u 𝒲 + ½c Σ vol (u − r t)²` with grips `u = t x` on intact anchors,
    /// plus the toughness cost of `crack`.
    fn energy(&self, crack: &[usize], t: f64, c: f64, r: f64, toughness: &ToughnessLaw) -> f64 {
        let n = self.nodes();
        let mut fixed = vec![None; n];
        for &(id, node, ..) in &self.anchors {
            if !crack.contains(&id) {
                fixed[node] = Some(t * self.x(node)[0]);
            }
        }
        let free: Vec<usize> = (0..n).filter(|&k| fixed[k].is_none()).collect();
        let mut index = vec![usize::MAX; n];
        for (k, &node) in free.iter().enumerate() {
            index[node] = k;
        }
        let m = free.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for &(id, p, q, k, ..) in &self.interior {
            if crack.contains(&id) {
                continue;
            }
            for (s, o) in [(p, q), (q, p)] {
                if fixed[s].is_some() {
                    continue;
                }
                let is = index[s];
                a[(is, is)] += k;
                match fixed[o] {
                    Some(v) => rhs[is] += k * v,
                    None => a[(is, index[o])] -= k,
                }
            }
        }
        for (k, &node) in free.iter().enumerate() {
            let v = self.node_volume(node) * c;
            a[(k, k)] += v;
            rhs[k] += v * r * t;
        }
        let mut u: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        if m > 0 {
            // without load a floating fragment makes the matrix singular
            let sol = if c > 0.0 {
                a.cholesky().unwrap().solve(&rhs)
            } else {
                a.svd(true, true).solve(&rhs, 1e-13).unwrap()
            };
            for (k, &node) in free.iter().enumerate() {
                u[node] = sol[k];
            }
        }
        let mut e = 0.0;
        for &(id, p, q, k, ..) in &self.interior {
            if !crack.contains(&id) {
                e += 0.5 * k * (u[q] - u[p]).powi(2);
            }
        }
        for (node, value) in u.iter().enumerate() {
            e += 0.5 * c * self.node_volume(node) * (value - r * t).powi(2);
        }
        for &(id, _, _, _, mid, normal, area) in &self.interior {
            if crack.contains(&id) {
                e += toughness.kappa(&mid, &normal) * area;
            }
        }
        for &(id, _, mid, normal, area) in &self.anchors {
            if crack.contains(&id) {
                e += toughness.kappa(&mid, &normal) * area;
            }
        }
        e
    }

    /// Full enumeration over supersets of `prev` inside `candidates`.
    fn best(
        &self,
        candidates: &[usize],
        prev: &[usize],
        t: f64,
        c: f64,
        r: f64,
        toughness: &ToughnessLaw,
    ) -> (f64, Vec<usize>) {
        let free: Vec<usize> = candidates.iter().copied().filter(|b| !prev.contains(b)).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u64..(1 << free.len()) {
            let mut set: Vec<usize> = prev.to_vec();
            set.extend((0..free.len()).filter(|j| mask >> j & 1 == 1).map(|j| free[j]));
            set.sort_unstable();
            let e = self.energy(&set, t, c, r, toughness);
            let better = match &best {
                None => true,
                Some((be, bs)) => {
                    let tie = (e - be).abs() <= 1e-12 * e.abs().max(be.abs()).max(1.0);
                    if tie {
                        (set.len(), &set) < (bs.len(), bs)
                    } else {
                        e < *be
                    }
                }
            };
            if better {
                best = Some((e, set));
            }
        }
        best.unwrap()
    }
}

fn random_toughness(seed: u64, cell: f64) -> ToughnessLaw {
    ToughnessLaw {
        field: ToughnessField::Random {
            seed,
            low: 0.5,
            high: 1.5,
            cell,
        },
        min: 0.5,
        max: 1.5,
        ..ToughnessLaw::uniform(1.0)
    }
}

fn plate_spec(n: usize, toughness: ToughnessLaw, load: LoadLaw, anchors: bool) -> ProblemSpec {
    let mut spec = ProblemSpec::canonical_1d(1.0, 0.05, 2.0);
    spec.geometry = Geometry::rectangle([1.0, 1.0], [n, n], vec![Edge::Left, Edge::Right]);
    spec.boundary.gradient = vec![1.0, 0.0];
    spec.toughness = toughness;
    spec.load = load;
    spec.strategy.candidates = CandidateSpec::Corridor {
        axis: 0,
        at: 0.5,
        anchors,
    };
    spec
}

fn attractive(c: f64, r: f64) -> LoadLaw {
    LoadLaw {
        density: LoadDensity::Attractive { stiffness: c, rate: r },
        alpha: 0.25 * c,
        // ½c(u − rt)² − ¼cu² ≥ −½c(rt)², enough for t ≤ 4
        beta: 8.0 * c * r * r,
        q: 2.0,
    }
}

#[test]
fn criterion_2_exhaustive_oracle_equivalence() {
    let start = Instant::now();
    let mut ok = true;
    let mut cases = 0;
    let mut library = Duration::ZERO;
    let mut details = Vec::new();
    let loads = [(0.0, 0.0), (1.0, 0.5)];
    for (seed, &(c, r)) in [11u64, 29].iter().zip(&loads) {
        let load = if c == 0.0 { LoadLaw::zero() } else { attractive(c, r) };
        let p = Problem::new(plate_spec(3, random_toughness(*seed, 1.0 / 3.0), load, true)).unwrap();
        assert!(p.candidates.len() <= 12);
        let oracle = PlateOracle::new(3, 3, &p.lattice);
        let toughness = p.spec.toughness.clone();
        let warm = DisplacementField::zeros(&p.lattice);

        let mut prev = CrackSet::empty(&p.lattice);
        for (level, t) in [0.6, 1.1, 1.6, 2.4, 3.5].into_iter().enumerate() {
            // the scheme's own chain of previous cracks, and the empty crack
            for base in [prev.clone(), CrackSet::empty(&p.lattice)] {
                let clock = Instant::now();
                let got = incremental_step(&p, level + 1, t, &base, &warm, SearchKind::Exhaustive).unwrap();
                library += clock.elapsed();
                let (e, set) = oracle.best(&p.candidates, &base.to_vec(), t, c, r, &toughness);
                let same = got.crack.to_vec() == set && (got.energy.total - e).abs() <= 1e-12;
                if !same {
                    details.push(format!(
                        "mismatch t={t} c={c}: got {} {:.15} vs oracle {set:?} {e:.15}",
                        got.crack, got.energy.total
                    ));
                }
                ok &= same;
                cases += 1;
            }
            prev = incremental_step(&p, level + 1, t, &prev, &warm, SearchKind::Exhaustive)
                .unwrap()
                .crack;
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    details.push(format!(
        "{cases} cases, 12 candidates, {elapsed:.1?} total ({library:.1?} in incremental_step)"
    ));
    report(2, ok, &details.join("; "));
    assert!(ok);
}

fn audited(p: &Problem, trace: &EvolutionTrace) -> (bool, f64) {
    let policy = CompetitorPolicy::exhaustive();
    let mut worst = f64::NEG_INFINITY;
    for s in &trace.steps {
        let r = check_global_stability(p, s.t, &s.u, &s.crack, &policy, 1e-9).unwrap();
        assert!(r.exhaustive);
        worst = worst.max(r.worst_margin);
    }
    (check_irreversibility(trace), worst)
}

#[test]
fn criterion_3_stability_and_irreversibility() {
    let mut runs: Vec<(String, Problem)> = [0.5, 1.0, 2.0]
        .into_iter()
        .map(|k| (format!("canonical κ={k}"), canonical(k, 0.01, 2.5)))
        .collect();
    let mut bar = ProblemSpec::canonical_1d(1.0, 0.02, 2.5);
    bar.geometry = Geometry::chain(1.0, 8);
    bar.toughness = random_toughness(3, 0.125);
    runs.push(("random bar".into(), Problem::new(bar).unwrap()));
    let mut plate = plate_spec(4, random_toughness(7, 0.25), LoadLaw::zero(), false);
    plate.strategy.candidates = CandidateSpec::Corridor {
        axis: 0,
        at: 0.375,
        anchors: false,
    };
    runs.push(("random plate 4x4".into(), Problem::new(plate).unwrap()));
    let mut gripped = plate_spec(3, random_toughness(13, 1.0 / 3.0), attractive(1.0, 0.5), true);
    gripped.time.step = Some(0.1);
    gripped.time.end = Some(3.0);
    gripped.validation.coercivity_waiver = false;
    runs.push(("random plate 3x3 with grips".into(), Problem::new(gripped).unwrap()));

    let mut ok = true;
    let mut details = Vec::new();
    for (name, p) in &runs {
        let trace = run_evolution(p).unwrap_or_else(|e| panic!("{name}: {e}"));
        let (irreversible, worst) = audited(p, &trace);
        let cracked = trace.steps.last().unwrap().crack.len();
        ok &= irreversible && worst <= 1e-9;
        details.push(format!("{name}: irreversible={irreversible} worst margin={worst:.2e} final crack={cracked}"));
    }
    report(3, ok, &details.join("; "));
    assert!(ok);
}

#[test]
fn criterion_4_energy_balance() {
    let steps = [0.02, 0.01, 0.005];
    let mut residuals = Vec::new();
    let mut within = true;
    for dt in steps {
        let p = canonical(1.0, dt, 2.0);
        let trace = run_evolution(&p).unwrap();
        let r = energy_balance_report(&p, &trace).unwrap();
        within &= r.whole_run.residual <= 10.0 * dt;
        residuals.push(r.whole_run.residual);
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    let first_order = ratios.iter().all(|q| (0.3..=0.7).contains(q));

    // pre-crack window [0, 1.4] at Δt = 0.01 against a brute-force left sum
    let p = canonical(1.0, 0.01, 2.0);
    let trace = run_evolution(&p).unwrap();
    let window = balance_window(&p, &trace, 0, 140).unwrap();
    let mut left_sum = 0.0;
    for i in 0..140 {
        let t = i as f64 * 0.01;
        left_sum += 0.01 * t;
    }
    let expected_gap = 0.5 * 1.4 * 1.4 - left_sum;
    let pre_crack = (window.residual - expected_gap).abs() <= 1e-12;

    println!("  whole-run residuals {residuals:?} (bound 10·Δt: {within})");
    println!("  halving ratios {ratios:?} (required in [0.3, 0.7]: {first_order})");
    println!(
        "  pre-crack residual {:.15} vs left-sum gap {expected_gap:.15}: {pre_crack}",
        window.residual
    );
    let ok = within && first_order && pre_crack;
    report(
        4,
        ok,
        &format!("bound={within} first-order ratios={first_order} pre-crack={pre_crack}"),
    );
    assert!(ok);
}

#[test]
fn criterion_5_jump_structure() {
    let mut ok = true;
    let mut totals = Vec::new();
    let mut details = Vec::new();
    for dt in [0.02, 0.01, 0.005] {
        let kappa = 1.0;
        let p = canonical(kappa, dt, 2.0);
        let trace = run_evolution(&p).unwrap();
        let jumps = detect_energy_jumps(&trace, p.spec.audit.jump_threshold);
        let Some(j) = jumps.jumps.first() else {
            ok = false;
            details.push(format!("Δt={dt}: no jump"));
            continue;
        };
        let t = j.t;
        let surface = j.delta_surface == kappa * 1.0;
        let bulk = (j.delta_bulk + 0.5 * t * t).abs() <= 1e-12;
        let total = j.delta_total.abs() <= dt * t * 1.5;
        ok &= jumps.jumps.len() == 1 && surface && bulk && total;
        totals.push(j.delta_total.abs());
        details.push(format!(
            "Δt={dt}: t_crack={t} ΔK={} ΔW={:.12} |ΔE|={:.3e} ≤ {:.3e}",
            j.delta_surface,
            j.delta_bulk,
            j.delta_total.abs(),
            dt * t * 1.5
        ));
    }
    // the linear envelope 1.5·Δt·t_crack bounds every entry; the measured
    // jumps may not grow as Δt shrinks
    let nonincreasing = totals.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    ok &= nonincreasing;
    details.push(format!("non-increasing={nonincreasing}"));
    report(5, ok, &details.join("; "));
    assert!(ok);
}

#[test]
fn criterion_6_lemma_lab() {
    let start = Instant::now();
    let ks: Vec<usize> = (0..=8).map(|e| 1 << e).collect();
    let sawtooth = SequenceSpec {
        ks: ks.clone(),
        ..SequenceSpec::new(Oscillation::Sawtooth)
    };
    let flat = lemma_experiment(&sawtooth, &BulkLaw::flat_well(1.0), &TestFunction::DEFAULT).unwrap();
    let flat_ok = flat.rows.iter().all(|r| {
        r.energy_gap == 0.0
            && r.pairing_gaps.iter().all(|g| *g <= 1e-12)
            && r.meas_dev_05 == 1.0
    });
    let perturbation = SequenceSpec {
        ks,
        ..SequenceSpec::new(Oscillation::Perturbation { scale: 1.0 })
    };
    let convex = lemma_experiment(&perturbation, &BulkLaw::quadratic(1.0), &TestFunction::DEFAULT).unwrap();
    let last = convex.rows.last().unwrap();
    let convex_ok = last.meas_dev_01 < 0.01;
    let elapsed = start.elapsed();
    let ok = flat_ok && convex_ok && elapsed < Duration::from_secs(10);
    report(
        6,
        ok,
        &format!(
            "flat well zero gaps and deviation 1: {flat_ok}; convex meas_dev_0.1 at k={} is {} ; {elapsed:.1?}",
            last.k, last.meas_dev_01
        ),
    );
    assert!(ok);
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn criterion_7_derivative_consistency() {
    let lattice = Lattice::build(&Geometry::rectangle([1.0, 1.0], [4, 4], vec![Edge::Left])).unwrap();
    let crack = CrackSet::from_ids(&lattice, [3, 17]).unwrap();
    let bonds = lattice.interior_bond_count();
    let nodes = lattice.node_count();
    let modulated = Modulation::Linear {
        axis: 0,
        slope: 0.5,
    };
    let laws = [
        ("quadratic", BulkLaw::quadratic(1.3)),
        ("p-power 1.5", BulkLaw::p_power(0.7, 1.5)),
        ("p-power 3", BulkLaw { modulation: modulated, ..BulkLaw::p_power(1.0, 3.0) }),
        ("flat-well", BulkLaw::flat_well(2.0)),
    ];
    let loads = [
        ("attractive", attractive(0.8, 0.6)),
        ("dead", LoadLaw {
            density: LoadDensity::Dead { density: -0.4 },
            alpha: 0.0,
            beta: 0.0,
            q: 2.0,
        }),
        ("zero", LoadLaw::zero()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let mut checks = 0;
    for (name, law) in &laws {
        for _ in 0..100 {
            let phi: Vec<f64> = (0..bonds).map(|_| rng.random_range(-2.0..2.0)).collect();
            let psi: Vec<f64> = (0..bonds).map(|_| rng.random_range(-1.0..1.0)).collect();
            let eps = 1e-6;
            let shifted = |s: f64| -> Vec<f64> { phi.iter().zip(&psi).map(|(a, b)| a + s * b).collect() };
            let fd = (bulk_energy_of_strains(&lattice, law, &crack, &shifted(eps))
                - bulk_energy_of_strains(&lattice, law, &crack, &shifted(-eps)))
                / (2.0 * eps);
            let exact = pair_dw(&lattice, law, &crack, &phi, &psi);
            if !close(exact, fd) {
                failures.push(format!("{name} pairing {exact} vs {fd}"));
            }
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let xi = rng.random_range(-2.0..2.0);
            let h = 1e-6 * (1.0 + f64::abs(xi));
            let fd = (law.density(&x, &[xi + h]) - law.density(&x, &[xi - h])) / (2.0 * h);
            let stress = law.scalar_stress(&x, xi);
            if !close(stress, fd) {
                failures.push(format!("{name} stress at {xi}: {stress} vs {fd}"));
            }
            checks += 2;
        }
    }
    for (name, load) in &loads {
        for _ in 0..100 {
            let t = rng.random_range(0.0..3.0);
            let u = DisplacementField((0..nodes).map(|_| rng.random_range(-2.0..2.0)).collect());
            let v = DisplacementField((0..nodes).map(|_| rng.random_range(-1.0..1.0)).collect());
            let eps = 1e-6;
            let plus = DisplacementField(u.0.iter().zip(&v.0).map(|(a, b)| a + eps * b).collect());
            let minus = DisplacementField(u.0.iter().zip(&v.0).map(|(a, b)| a - eps * b).collect());
            let fd = (force_work(&lattice, load, t, &plus) - force_work(&lattice, load, t, &minus)) / (2.0 * eps);
            let exact = pair_df(&lattice, load, t, &u, &v);
            if !close(exact, fd) {
                failures.push(format!("{name} load pairing {exact} vs {fd}"));
            }
            let fd_t = (force_work(&lattice, load, t + eps, &u) - force_work(&lattice, load, t - eps, &u)) / (2.0 * eps);
            let exact_t = df_dt(&lattice, load, t, &u);
            if !close(exact_t, fd_t) {
                failures.push(format!("{name} time derivative {exact_t} vs {fd_t}"));
            }
            checks += 2;
        }
    }
    let ok = failures.is_empty();
    report(
        7,
        ok,
        &format!("{checks} finite-difference checks, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    );
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/plate_2d.toml")).unwrap();
    let mut csvs = Vec::new();
    for _ in 0..2 {
        let mut spec = ProblemSpec::from_toml_str(&text).unwrap();
        spec.audit.seed = 99;
        let p = Problem::new(spec).unwrap();
        csvs.push(trace_csv(&run_evolution(&p).unwrap()));
    }
    let canonical_runs: Vec<String> = (0..2)
        .map(|_| trace_csv(&run_evolution(&canonical(1.0, 0.01, 2.0)).unwrap()))
        .collect();
    let ok = csvs[0] == csvs[1] && canonical_runs[0] == canonical_runs[1];
    report(8, ok, &format!("{} and {} bytes compared", csvs[0].len(), canonical_runs[0].len()));
    assert!(ok);
}
