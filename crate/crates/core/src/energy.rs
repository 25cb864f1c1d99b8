//! Bulk, surface and load functionals and their differential pairings.
//!
//! Every bond sees only its axial difference quotient, so breaking a bond and
//! dropping its energy term are the same operation. Sums run sequentially in
//! bond/node order, which keeps repeated evaluations bit-identical.

use serde::{Deserialize, Serialize};

use crate::config::Problem;
use crate::error::Result;
use crate::lattice::{check_admissible, crack_segments, CrackSet, DisplacementField, Lattice};
use crate::model::{BulkLaw, LoadLaw, ToughnessLaw};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bulk: f64,
    pub surface: f64,
    pub force_work: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(bulk: f64, surface: f64, force_work: f64) -> Self {
        EnergyBreakdown {
            bulk,
            surface,
            force_work,
            total: bulk + surface - force_work,
        }
    }

    pub const CSV_HEADER: &'static str = "E_bulk,E_surf,F_work,E_total";
}

/// `𝒲` evaluated on a bond-strain field (one entry per interior bond).
pub fn bulk_energy_of_strains(
    lattice: &Lattice,
    law: &BulkLaw,
    crack: &CrackSet,
    strains: &[f64],
) -> f64 {
    lattice
        .interior_bonds()
        .filter(|(id, ..)| !crack.contains(*id))
        .map(|(id, _, _, bond)| bond.volume() * law.density(&bond.midpoint, &[strains[id]]))
        .sum()
}

pub fn bulk_energy(
    lattice: &Lattice,
    law: &BulkLaw,
    u: &DisplacementField,
    crack: &CrackSet,
) -> f64 {
    let strains = u.bond_strains(lattice);
    bulk_energy_of_strains(lattice, law, crack, &strains)
}

/// `𝒦(Γ) = Σ κ(midpoint, normal) · area` over broken bonds.
pub fn surface_energy(lattice: &Lattice, toughness: &ToughnessLaw, crack: &CrackSet) -> Result<f64> {
    Ok(crack_segments(crack, lattice)?
        .iter()
        .map(|s| toughness.kappa(&s.midpoint, &s.normal) * s.area)
        .sum())
}

/// `ℱ(t)(u)` by nodal quadrature with dual-cell weights.
pub fn force_work(lattice: &Lattice, load: &LoadLaw, t: f64, u: &DisplacementField) -> f64 {
    if load.is_zero() {
        return 0.0;
    }
    (0..lattice.node_count())
        .map(|n| lattice.node_volume(n) * load.value(t, lattice.node(n), u.0[n]))
        .sum()
}

/// `𝔈(t)(u, Γ)`; refuses pairs violating the grip condition.
pub fn total_energy(
    problem: &Problem,
    t: f64,
    u: &DisplacementField,
    crack: &CrackSet,
) -> Result<EnergyBreakdown> {
    check_admissible(&problem.lattice, problem.boundary(), t, u, crack)?;
    Ok(energy_unchecked(problem, t, u, crack))
}

pub(crate) fn energy_unchecked(
    problem: &Problem,
    t: f64,
    u: &DisplacementField,
    crack: &CrackSet,
) -> EnergyBreakdown {
    let lattice = &problem.lattice;
    EnergyBreakdown::new(
        bulk_energy(lattice, problem.bulk(), u, crack),
        surface_energy(lattice, problem.toughness(), crack).expect("crack checked against lattice"),
        force_work(lattice, problem.load(), t, u),
    )
}

/// `⟨d𝒲(Φ), Ψ⟩ = Σ volume · ∂ξW(Φ) · Ψ` over intact bonds.
pub fn pair_dw(
    lattice: &Lattice,
    law: &BulkLaw,
    crack: &CrackSet,
    phi: &[f64],
    psi: &[f64],
) -> f64 {
    lattice
        .interior_bonds()
        .filter(|(id, ..)| !crack.contains(*id))
        .map(|(id, _, _, bond)| {
            bond.volume() * law.scalar_stress(&bond.midpoint, phi[id]) * psi[id]
        })
        .sum()
}

/// `⟨dℱ(t)(u), v⟩` by nodal quadrature.
pub fn pair_df(
    lattice: &Lattice,
    load: &LoadLaw,
    t: f64,
    u: &DisplacementField,
    v: &DisplacementField,
) -> f64 {
    (0..lattice.node_count())
        .map(|n| lattice.node_volume(n) * load.d_du(t, lattice.node(n), u.0[n]) * v.0[n])
        .sum()
}

/// `ℱ̇(t)(u)` by nodal quadrature.
pub fn df_dt(lattice: &Lattice, load: &LoadLaw, t: f64, u: &DisplacementField) -> f64 {
    (0..lattice.node_count())
        .map(|n| lattice.node_volume(n) * load.d_dt(t, lattice.node(n), u.0[n]))
        .sum()
}

/// Power of the external actions at `(t, u, Γ)`:
/// `⟨d𝒲(∇u), ∇ẇ⟩ − ⟨dℱ(t)(u), ẇ⟩ − ℱ̇(t)(u)`, with `ẇ` extended into the body
/// by the boundary program's closed form.
pub fn work_rate(problem: &Problem, t: f64, u: &DisplacementField, crack: &CrackSet) -> f64 {
    let lattice = &problem.lattice;
    let rate = DisplacementField::from_fn(lattice, |x| problem.boundary().rate(t, x));
    let strains = u.bond_strains(lattice);
    let rate_strains = rate.bond_strains(lattice);
    pair_dw(lattice, problem.bulk(), crack, &strains, &rate_strains)
        - pair_df(lattice, problem.load(), t, u, &rate)
        - df_dt(lattice, problem.load(), t, u)
}
