//! Elastic equilibrium at fixed time and crack.
//!
//! Minimizes `𝒲(∇u) − ℱ(t)(u)` over fields that match the grip on intact
//! anchors. Quadratic bulk laws go through conjugate gradients on the
//! (symmetric positive definite) reduced system; other convex laws use
//! gradient descent with Armijo backtracking.
//!
//! A fragment cut off from every intact anchor has no unique equilibrium
//! when the load does not confine it. With `F ≡ 0` its smallest node is
//! pinned at the warm-start value and reported; under any other
//! non-confining load the energy is unbounded below.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::config::Problem;
use crate::error::{Error, Result};
use crate::lattice::{apply_boundary, CrackSet, DisplacementField};

pub const GRADIENT_TOL: f64 = 1e-10;
pub const CG_RELATIVE_RESIDUAL: f64 = 1e-12;
pub const MAX_DESCENT_ITERATIONS: usize = 100_000;
const ARMIJO: f64 = 1e-4;
const ENERGY_ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖∇E‖∞ / (1 + Σ|energy terms|)` over free nodes.
    pub gradient_norm: f64,
    /// `𝒲 − ℱ` at the returned field.
    pub energy: f64,
    /// Nodes pinned because their fragment floats freely.
    pub pinned: Vec<usize>,
}

/// Internal view of the reduced problem.
struct System<'a> {
    problem: &'a Problem,
    t: f64,
    crack: &'a CrackSet,
    free: Vec<bool>,
}

impl System<'_> {
    /// Energy and the absolute scale used to normalise gradients.
    fn energy(&self, u: &[f64]) -> (f64, f64) {
        let lattice = &self.problem.lattice;
        let law = self.problem.bulk();
        let load = self.problem.load();
        let mut bulk = 0.0;
        let mut scale = 0.0;
        for (id, a, b, bond) in lattice.interior_bonds() {
            if self.crack.contains(id) {
                continue;
            }
            let w = bond.volume() * law.density(&bond.midpoint, &[(u[b] - u[a]) / bond.length]);
            bulk += w;
            scale += w.abs();
        }
        let mut work = 0.0;
        if !load.is_zero() {
            for (n, &value) in u.iter().enumerate() {
                let f = lattice.node_volume(n) * load.value(self.t, lattice.node(n), value);
                work += f;
                scale += f.abs();
            }
        }
        (bulk - work, scale)
    }

    /// Gradient restricted to free nodes.
    fn gradient(&self, u: &[f64], g: &mut [f64]) {
        let lattice = &self.problem.lattice;
        let law = self.problem.bulk();
        let load = self.problem.load();
        g.iter_mut().for_each(|v| *v = 0.0);
        for (id, a, b, bond) in lattice.interior_bonds() {
            if self.crack.contains(id) {
                continue;
            }
            let sigma = law.scalar_stress(&bond.midpoint, (u[b] - u[a]) / bond.length);
            let f = bond.volume() * sigma / bond.length;
            g[b] += f;
            g[a] -= f;
        }
        if !load.is_zero() {
            for (n, gn) in g.iter_mut().enumerate() {
                *gn -= lattice.node_volume(n) * load.d_du(self.t, lattice.node(n), u[n]);
            }
        }
        for (gn, &free) in g.iter_mut().zip(&self.free) {
            if !free {
                *gn = 0.0;
            }
        }
    }

    /// Hessian-vector product for quadratic bulk laws.
    fn hessian_apply(&self, v: &[f64], out: &mut [f64]) {
        let lattice = &self.problem.lattice;
        let law = self.problem.bulk();
        let curvature = -self.problem.load().d2_du2();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (id, a, b, bond) in lattice.interior_bonds() {
            if self.crack.contains(id) {
                continue;
            }
            let k = bond.volume() * law.stiffness_at(&bond.midpoint) / (bond.length * bond.length);
            let d = k * (v[b] - v[a]);
            out[b] += d;
            out[a] -= d;
        }
        if curvature != 0.0 {
            for (n, o) in out.iter_mut().enumerate() {
                *o += lattice.node_volume(n) * curvature * v[n];
            }
        }
        for (o, &free) in out.iter_mut().zip(&self.free) {
            if !free {
                *o = 0.0;
            }
        }
    }

    fn scaled_norm(&self, g: &[f64], scale: f64) -> f64 {
        g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (1.0 + scale)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the inner problem of one incremental step.
pub fn minimize_displacement(
    problem: &Problem,
    t: f64,
    crack: &CrackSet,
    warm_start: Option<&DisplacementField>,
) -> Result<(DisplacementField, SolveReport)> {
    let lattice = &problem.lattice;
    let n = lattice.node_count();
    let start = warm_start
        .cloned()
        .unwrap_or_else(|| DisplacementField::zeros(lattice));
    let mut u = apply_boundary(lattice, &start, t, crack, problem.boundary()).0;

    let mut free = vec![true; n];
    for (id, node, _) in lattice.anchors() {
        if !crack.contains(id) {
            free[node] = false;
        }
    }
    let components = lattice.components(crack);
    let mut anchored = vec![false; n];
    for node in 0..n {
        if !free[node] {
            anchored[components[node]] = true;
        }
    }
    let load = problem.load();
    let mut pinned = Vec::new();
    for node in 0..n {
        if components[node] != node || anchored[node] || load.confines() {
            continue;
        }
        if load.is_zero() {
            free[node] = false;
            pinned.push(node);
        } else {
            return Err(Error::Unbounded { node });
        }
    }

    let system = System {
        problem,
        t,
        crack,
        free,
    };
    let mut g = vec![0.0; n];
    let iterations = if problem.bulk().is_quadratic() {
        solve_quadratic(&system, &mut u, &mut g)
    } else {
        descend(&system, &mut u, &mut g)?
    };
    system.gradient(&u, &mut g);
    let (energy, scale) = system.energy(&u);
    let gradient_norm = system.scaled_norm(&g, scale);
    if gradient_norm.is_nan() || gradient_norm > GRADIENT_TOL {
        return Err(Error::NonConvergence {
            iterations,
            gradient_norm,
            best: Box::new(DisplacementField(u)),
        });
    }
    Ok((
        DisplacementField(u),
        SolveReport {
            iterations,
            gradient_norm,
            energy,
            pinned,
        },
    ))
}

/// Conjugate gradients on `H δ = −g`, restarted a few times as iterative
/// refinement if rounding leaves the gradient above tolerance.
fn solve_quadratic(system: &System, u: &mut [f64], g: &mut [f64]) -> usize {
    let n = u.len();
    let free_count = system.free.iter().filter(|&&f| f).count();
    let mut total = 0;
    let (mut r, mut p, mut hp, mut x) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..5 {
        system.gradient(u, g);
        let (_, scale) = system.energy(u);
        if system.scaled_norm(g, scale) <= GRADIENT_TOL * 1e-2 {
            break;
        }
        for i in 0..n {
            r[i] = -g[i];
            p[i] = r[i];
            x[i] = 0.0;
        }
        let mut rr = dot(&r, &r);
        let target = CG_RELATIVE_RESIDUAL * CG_RELATIVE_RESIDUAL * rr;
        for _ in 0..(4 * free_count + 20) {
            if rr <= target {
                break;
            }
            system.hessian_apply(&p, &mut hp);
            let php = dot(&p, &hp);
            if php <= 0.0 {
                break;
            }
            let alpha = rr / php;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            let rr_next = dot(&r, &r);
            let beta = rr_next / rr;
            rr = rr_next;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            total += 1;
        }
        for i in 0..n {
            u[i] += x[i];
        }
    }
    total
}

impl System<'_> {
    /// Hessian-vector product at `u`, shifted by `shift` on free nodes.
    fn curvature_apply(&self, u: &[f64], shift: f64, v: &[f64], out: &mut [f64]) {
        let lattice = &self.problem.lattice;
        let law = self.problem.bulk();
        let load = -self.problem.load().d2_du2();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (id, a, b, bond) in lattice.interior_bonds() {
            if self.crack.contains(id) {
                continue;
            }
            let xi = (u[b] - u[a]) / bond.length;
            let k = bond.volume() * law.scalar_curvature(&bond.midpoint, xi) / (bond.length * bond.length);
            let d = k * (v[b] - v[a]);
            out[b] += d;
            out[a] -= d;
        }
        for (n, o) in out.iter_mut().enumerate() {
            if self.free[n] {
                *o += (lattice.node_volume(n) * load + shift) * v[n];
            } else {
                *o = 0.0;
            }
        }
    }
}

/// Newton direction from a few CG iterations on the shifted Hessian.
fn newton_direction(system: &System, u: &[f64], g: &[f64], shift: f64, d: &mut [f64]) {
    let n = u.len();
    let (mut r, mut p, mut hp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        d[i] = 0.0;
        r[i] = -g[i];
        p[i] = r[i];
    }
    let mut rr = dot(&r, &r);
    let target = 1e-20 * rr;
    for _ in 0..(2 * n + 20) {
        if rr <= target {
            break;
        }
        system.curvature_apply(u, shift, &p, &mut hp);
        let php = dot(&p, &hp);
        if php <= 0.0 {
            break;
        }
        let alpha = rr / php;
        for i in 0..n {
            d[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
}

/// Damped Newton with Armijo backtracking; falls back to the gradient when
/// the Newton direction is not a descent direction.
fn descend(system: &System, u: &mut [f64], g: &mut [f64]) -> Result<usize> {
    let lattice = &system.problem.lattice;
    let law = system.problem.bulk();
    let mut diagonal: f64 = 1e-12;
    for (id, _, _, bond) in lattice.interior_bonds() {
        if !system.crack.contains(id) {
            diagonal = diagonal.max(bond.volume() * law.stiffness_at(&bond.midpoint) / (bond.length * bond.length));
        }
    }
    let shift = 1e-10 * diagonal;
    let mut d = vec![0.0; u.len()];
    let mut trial = u.to_vec();
    let mut trial_g = vec![0.0; u.len()];
    let (mut energy, mut scale) = system.energy(u);
    for iteration in 0..MAX_DESCENT_ITERATIONS {
        system.gradient(u, g);
        let norm = system.scaled_norm(g, scale);
        if norm <= GRADIENT_TOL {
            return Ok(iteration);
        }
        newton_direction(system, u, g, shift, &mut d);
        let mut slope = dot(g, &d);
        if slope.is_nan() || slope >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            for i in 0..d.len() {
                d[i] = -g[i] / diagonal;
            }
            slope = dot(g, &d);
        }
        // below this the energy cannot resolve the predicted decrease
        if -slope <= ENERGY_ROUNDOFF * scale.max(1.0) {
            for i in 0..u.len() {
                trial[i] = u[i] + d[i];
            }
            let (e, s) = system.energy(&trial);
            system.gradient(&trial, &mut trial_g);
            if system.scaled_norm(&trial_g, s) < norm {
                u.copy_from_slice(&trial);
                energy = e;
                scale = s;
                continue;
            }
            return Ok(iteration);
        }
        let mut step = 1.0;
        loop {
            for i in 0..u.len() {
                trial[i] = u[i] + step * d[i];
            }
            let (e, s) = system.energy(&trial);
            if e <= energy + ARMIJO * step * slope {
                u.copy_from_slice(&trial);
                energy = e;
                scale = s;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                // no representable decrease left; the caller checks the gradient
                return Ok(iteration);
            }
        }
    }
    Ok(MAX_DESCENT_ITERATIONS)
}

/// `min_u 𝒲 − ℱ(t)` at fixed crack: the quantity competing cracks are ranked by.
pub fn elastic_energy_of_crack(
    problem: &Problem,
    t: f64,
    crack: &CrackSet,
    warm_start: Option<&DisplacementField>,
) -> Result<f64> {
    let (_, report) = minimize_displacement(problem, t, crack, warm_start)?;
    Ok(report.energy)
}

/// Memoized elastic energies for one time step, keyed by time index and
/// crack. Every entry is solved from the same warm start, so the cached value
/// does not depend on evaluation order.
pub struct ElasticCache<'a> {
    problem: &'a Problem,
    time_index: usize,
    t: f64,
    warm_start: &'a DisplacementField,
    entries: Mutex<HashMap<(usize, Vec<usize>), f64>>,
}

impl<'a> ElasticCache<'a> {
    pub fn new(
        problem: &'a Problem,
        time_index: usize,
        t: f64,
        warm_start: &'a DisplacementField,
    ) -> Self {
        ElasticCache {
            problem,
            time_index,
            t,
            warm_start,
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn warm_start(&self) -> &DisplacementField {
        self.warm_start
    }

    pub fn energy(&self, crack: &CrackSet) -> Result<f64> {
        let key = (self.time_index, crack.to_vec());
        if let Some(&e) = self.entries.lock().expect("cache poisoned").get(&key) {
            return Ok(e);
        }
        let e = elastic_energy_of_crack(self.problem, self.t, crack, Some(self.warm_start))?;
        self.entries.lock().expect("cache poisoned").insert(key, e);
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
