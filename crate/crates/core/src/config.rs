//! The declarative problem document and the runtime problem built from it.
//!
//! Documents are TOML. Every section rejects unknown keys so that a
//! misspelled parameter is an error instead of a silent default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Geometry, Lattice};
use crate::model::{BoundaryProgram, BulkLaw, LoadLaw, ToughnessLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub geometry: Geometry,
    pub bulk: BulkLaw,
    pub toughness: ToughnessLaw,
    pub load: LoadLaw,
    pub boundary: BoundaryProgram,
    pub time: TimeSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either a uniform grid `0, step, 2·step, …, end` or explicit `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchKind {
    Exhaustive,
    Greedy,
}

impl SearchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchKind::Exhaustive => "exhaustive",
            SearchKind::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for SearchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SearchKind::Exhaustive),
            "greedy" => Ok(SearchKind::Greedy),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected exhaustive or greedy)"
            ))),
        }
    }
}

/// Among equal-energy minimizers, prefer fewer broken bonds, then the
/// lexicographically smallest bond-id list. This is the only rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    #[default]
    FewestThenLexicographic,
}

/// Bonds the crack search may break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum CandidateSpec {
    /// Every interior and anchor bond.
    #[default]
    All,
    Ids { ids: Vec<usize> },
    /// Bonds along `axis` whose span strictly contains the coordinate `at`,
    /// i.e. the bonds a straight cut at `x[axis] = at` would sever.
    Corridor {
        axis: usize,
        at: f64,
        #[serde(default)]
        anchors: bool,
    },
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    #[serde(default = "default_search")]
    pub kind: SearchKind,
    #[serde(default = "default_exhaustive_limit")]
    pub exhaustive_limit: u64,
    #[serde(default)]
    pub greedy_fallback: bool,
    #[serde(default)]
    pub candidates: CandidateSpec,
    #[serde(default)]
    pub tie_rule: TieRule,
}

fn default_search() -> SearchKind {
    SearchKind::Exhaustive
}

fn default_exhaustive_limit() -> u64 {
    1 << 20
}

impl Default for StrategySection {
    fn default() -> Self {
        StrategySection {
            kind: default_search(),
            exhaustive_limit: default_exhaustive_limit(),
            greedy_fallback: false,
            candidates: CandidateSpec::All,
            tie_rule: TieRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    /// Global-stability margin tolerance (absolute energy).
    #[serde(default = "default_stability_tol")]
    pub stability_tol: f64,
    /// Balance tolerance is `balance_factor · max Δt · energy scale`.
    #[serde(default = "default_balance_factor")]
    pub balance_factor: f64,
    /// Energy scale; defaults to `max(1, largest |energy term| on the trace)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_scale: Option<f64>,
    /// Competitor enumeration is exhaustive up to this many crack sets.
    #[serde(default = "default_competitor_limit")]
    pub competitor_limit: u64,
    /// Random supersets drawn when enumeration is infeasible.
    #[serde(default = "default_random_competitors")]
    pub random_competitors: usize,
    #[serde(default = "default_jump_threshold")]
    pub jump_threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_stability_tol() -> f64 {
    1e-9
}
fn default_balance_factor() -> f64 {
    10.0
}
fn default_competitor_limit() -> u64 {
    1 << 16
}
fn default_random_competitors() -> usize {
    256
}
fn default_jump_threshold() -> f64 {
    0.1
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection {
            stability_tol: default_stability_tol(),
            balance_factor: default_balance_factor(),
            energy_scale: None,
            competitor_limit: default_competitor_limit(),
            random_competitors: default_random_competitors(),
            jump_threshold: default_jump_threshold(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    /// Accept loads that fail `−F ≥ α|u|^q − β` (e.g. `F ≡ 0` under full grip).
    #[serde(default)]
    pub coercivity_waiver: bool,
    #[serde(default = "default_u_range")]
    pub u_range: f64,
    #[serde(default = "default_u_points")]
    pub u_points: usize,
}

fn default_u_range() -> f64 {
    10.0
}
fn default_u_points() -> usize {
    41
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            coercivity_waiver: false,
            u_range: default_u_range(),
            u_points: default_u_points(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Bonds broken at `t = 0`; the initial field is the elastic minimizer.
    #[serde(default)]
    pub crack: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

impl ProblemSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The canonical one-dimensional bar: quadratic bulk, `μ = 1`, `L = 1`,
    /// four cells, `F ≡ 0` (waived), `w(t, x) = t·x`, uniform toughness.
    pub fn canonical_1d(kappa: f64, step: f64, end: f64) -> Self {
        ProblemSpec {
            geometry: Geometry::chain(1.0, 4),
            bulk: BulkLaw::quadratic(1.0),
            toughness: ToughnessLaw::uniform(kappa),
            load: LoadLaw::zero(),
            boundary: BoundaryProgram {
                gradient: vec![1.0],
                offset: 0.0,
                lipschitz: 1.0,
            },
            time: TimeSection {
                step: Some(step),
                end: Some(end),
                points: None,
            },
            strategy: StrategySection::default(),
            audit: AuditSection::default(),
            validation: ValidationSection {
                coercivity_waiver: true,
                ..ValidationSection::default()
            },
            initial: InitialSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Strictly increasing times starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::Config("time grid must start at t = 0".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("time grid must be strictly increasing".into()));
        }
        Ok(TimeGrid { times })
    }

    pub fn uniform(step: f64, end: f64) -> Result<Self> {
        if step.is_nan() || step <= 0.0 || end.is_nan() || end < 0.0 {
            return Err(Error::Config("time step must be positive and end nonnegative".into()));
        }
        let n = (end / step).round();
        if (n * step - end).abs() > 1e-9 * end.max(step) {
            return Err(Error::Config(format!(
                "end time {end} is not a multiple of the step {step}"
            )));
        }
        Self::new((0..=n as usize).map(|i| i as f64 * step).collect())
    }

    pub fn from_section(section: &TimeSection) -> Result<Self> {
        match (section.points.as_ref(), section.step, section.end) {
            (Some(points), None, None) => Self::new(points.clone()),
            (None, Some(step), Some(end)) => Self::uniform(step, end),
            _ => Err(Error::Config(
                "time section needs either `points` or both `step` and `end`".into(),
            )),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// Largest step, the refinement parameter of the scheme.
    pub fn max_step(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// A configuration bound to its lattice, time grid and candidate bonds.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub lattice: Lattice,
    pub grid: TimeGrid,
    /// Sorted ids of the bonds the crack search may break.
    pub candidates: Vec<usize>,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let lattice = Lattice::build(&spec.geometry)?;
        if spec.boundary.gradient.len() != lattice.dimension() {
            return Err(Error::Config(format!(
                "boundary gradient needs {} entries",
                lattice.dimension()
            )));
        }
        let grid = TimeGrid::from_section(&spec.time)?;
        let candidates = resolve_candidates(&lattice, &spec.strategy.candidates)?;
        for &id in &spec.initial.crack {
            if id >= lattice.bond_count() {
                return Err(Error::UnknownBond {
                    id,
                    count: lattice.bond_count(),
                });
            }
        }
        Ok(Problem {
            spec,
            lattice,
            grid,
            candidates,
        })
    }

    pub fn bulk(&self) -> &BulkLaw {
        &self.spec.bulk
    }

    pub fn toughness(&self) -> &ToughnessLaw {
        &self.spec.toughness
    }

    pub fn load(&self) -> &LoadLaw {
        &self.spec.load
    }

    pub fn boundary(&self) -> &BoundaryProgram {
        &self.spec.boundary
    }
}

fn resolve_candidates(lattice: &Lattice, spec: &CandidateSpec) -> Result<Vec<usize>> {
    let mut ids: Vec<usize> = match spec {
        CandidateSpec::All => (0..lattice.bond_count()).collect(),
        CandidateSpec::Ids { ids } => {
            for &id in ids {
                if id >= lattice.bond_count() {
                    return Err(Error::UnknownBond {
                        id,
                        count: lattice.bond_count(),
                    });
                }
            }
            ids.clone()
        }
        CandidateSpec::Corridor { axis, at, anchors } => {
            if *axis >= lattice.dimension() {
                return Err(Error::Config(format!("corridor axis {axis} out of range")));
            }
            let mut ids: Vec<usize> = lattice
                .interior_bonds()
                .filter(|(_, a, b, bond)| {
                    bond.direction[*axis] == 1.0 && {
                        let (lo, hi) = (lattice.node(*a)[*axis], lattice.node(*b)[*axis]);
                        lo < *at && *at < hi
                    }
                })
                .map(|(id, _, _, _)| id)
                .collect();
            if ids.is_empty() {
                return Err(Error::Config(format!(
                    "corridor at {at} on axis {axis} crosses no bonds; place it between node lines"
                )));
            }
            if *anchors {
                ids.extend(lattice.anchors().map(|(id, _, _)| id));
            }
            ids
        }
    };
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Edge;

    #[test]
    fn uniform_grid_row_counts() {
        assert_eq!(TimeGrid::uniform(0.01, 2.0).unwrap().len(), 201);
        assert_eq!(TimeGrid::uniform(0.005, 2.0).unwrap().len(), 401);
        assert!(TimeGrid::uniform(0.3, 1.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.2, 0.2]).is_err());
        assert!(TimeGrid::new(vec![0.1, 0.2]).is_err());
        let g = TimeGrid::new(vec![0.0, 0.1, 0.5, 0.6]).unwrap();
        assert!((g.max_step() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn round_trip() {
        let spec = ProblemSpec::canonical_1d(1.0, 0.01, 2.0);
        let text = spec.to_toml_string().unwrap();
        let back = ProblemSpec::from_toml_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ProblemSpec::canonical_1d(1.0, 0.01, 2.0)
            .to_toml_string()
            .unwrap();
        text = text.replace("[toughness]", "[toughness]\ntooughness = 3.0");
        let err = ProblemSpec::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("tooughness"), "{err}");

        let text = ProblemSpec::canonical_1d(1.0, 0.01, 2.0)
            .to_toml_string()
            .unwrap()
            .replace("[toughness]", "[tooughness]");
        let err = ProblemSpec::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("tooughness"), "{err}");
    }

    #[test]
    fn corridor_candidates() {
        let mut spec = ProblemSpec::canonical_1d(1.0, 0.1, 1.0);
        spec.geometry = Geometry::rectangle([1.0, 1.0], [3, 3], vec![Edge::Left, Edge::Right]);
        spec.boundary.gradient = vec![1.0, 0.0];
        spec.strategy.candidates = CandidateSpec::Corridor {
            axis: 0,
            at: 0.5,
            anchors: false,
        };
        let p = Problem::new(spec.clone()).unwrap();
        assert_eq!(p.candidates.len(), 4);
        for &id in &p.candidates {
            let b = p.lattice.bond(id);
            assert_eq!(b.direction, [1.0, 0.0]);
            assert!((b.midpoint[0] - 0.5).abs() < 1e-12);
        }
        spec.strategy.candidates = CandidateSpec::Corridor {
            axis: 0,
            at: 0.5,
            anchors: true,
        };
        assert_eq!(Problem::new(spec).unwrap().candidates.len(), 12);
    }
}
