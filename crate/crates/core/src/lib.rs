//! Lattice model of quasistatic brittle fracture in antiplane shear.
//!
//! A scalar displacement lives on the nodes of a regular grid; bonds carry
//! the bulk energy and can break at a toughness cost. The time-discrete
//! evolution minimizes bulk plus surface energy minus load work at every
//! step over cracks containing the previous one, and the audit module checks
//! the resulting trace for stability, irreversibility and energy balance.

pub mod audit;
pub mod config;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod evolution;
pub mod io;
pub mod lattice;
pub mod lemma;
pub mod model;

pub use audit::{
    audit_trace, check_global_stability, check_irreversibility, detect_energy_jumps,
    energy_balance_report, AuditReport, BalanceReport, CompetitorPolicy, JumpReport,
    StabilityReport,
};
pub use config::{Problem, ProblemSpec, SearchKind, TimeGrid};
pub use energy::{total_energy, EnergyBreakdown};
pub use equilibrium::{minimize_displacement, SolveReport};
pub use error::{Error, Result};
pub use evolution::{
    incremental_step, interpolate, run_evolution, run_evolution_with, EvolutionTrace,
    StepOutcome, StepStrategy, TraceStep,
};
pub use lattice::{
    crack_contains, crack_segments, AdmissiblePair, CrackSet, DisplacementField, Edge, Geometry,
    Lattice,
};
pub use lemma::{build_sequence, lemma_experiment, LemmaReport, LemmaSpec, SequenceSpec};
pub use model::{
    validate_problem, BoundaryProgram, BulkLaw, LoadLaw, ToughnessLaw, ValidationReport,
};
