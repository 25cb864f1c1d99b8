//! Problem builders shared by the benchmarks.

use brittle_core::config::{CandidateSpec, Problem, ProblemSpec};
use brittle_core::lattice::{Edge, Geometry};
use brittle_core::model::{BulkLaw, ToughnessField, ToughnessLaw};

/// Square plate with `n × n` cells gripped left and right, cracks confined
/// to the vertical corridor just left of the centre line.
pub fn plate(n: usize, bulk: BulkLaw) -> Problem {
    let mut spec = ProblemSpec::canonical_1d(1.0, 0.02, 2.0);
    spec.geometry = Geometry::rectangle([1.0, 1.0], [n, n], vec![Edge::Left, Edge::Right]);
    spec.boundary.gradient = vec![1.0, 0.0];
    spec.bulk = bulk;
    spec.toughness = ToughnessLaw {
        field: ToughnessField::Random {
            seed: 5,
            low: 0.5,
            high: 1.5,
            cell: 1.0 / n as f64,
        },
        min: 0.5,
        max: 1.5,
        ..ToughnessLaw::uniform(1.0)
    };
    let h = 1.0 / n as f64;
    spec.strategy.candidates = CandidateSpec::Corridor {
        axis: 0,
        at: (n / 2) as f64 * h - 0.5 * h,
        anchors: false,
    };
    Problem::new(spec).expect("benchmark problem is valid")
}

pub fn canonical(cells: usize) -> Problem {
    let mut spec = ProblemSpec::canonical_1d(1.0, 0.01, 2.0);
    spec.geometry = Geometry::chain(1.0, cells);
    Problem::new(spec).expect("benchmark problem is valid")
}
