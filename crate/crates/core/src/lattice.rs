//! Bond lattices, crack sets and displacement fields.
//!
//! A lattice is a tensor grid of nodes joined by axial bonds. Each node on a
//! Dirichlet edge additionally owns one anchor bond that ties it to the grip.
//! Cracks are sets of broken bonds. Breaking an interior bond removes its
//! energy term; breaking an anchor releases the node from the grip.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryProgram, Direction, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    fn outward_normal(self) -> Direction {
        match self {
            Edge::Left => [-1.0, 0.0],
            Edge::Right => [1.0, 0.0],
            Edge::Bottom => [0.0, -1.0],
            Edge::Top => [0.0, 1.0],
        }
    }
}

/// Geometry section of the configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub dimension: usize,
    /// Side lengths; the body occupies `[0, extent[0]] × [0, extent[1]]`.
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
    /// Edges carrying the prescribed deformation; all others are traction free.
    pub dirichlet: Vec<Edge>,
}

impl Geometry {
    pub fn chain(length: f64, cells: usize) -> Self {
        Geometry {
            dimension: 1,
            extent: vec![length],
            cells: vec![cells],
            dirichlet: vec![Edge::Left, Edge::Right],
        }
    }

    pub fn rectangle(extent: [f64; 2], cells: [usize; 2], dirichlet: Vec<Edge>) -> Self {
        Geometry {
            dimension: 2,
            extent: extent.to_vec(),
            cells: cells.to_vec(),
            dirichlet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLabel {
    Interior,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondKind {
    Interior { a: usize, b: usize },
    /// Ghost bond tying `node` to the boundary program.
    Anchor { node: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub kind: BondKind,
    pub midpoint: Point,
    /// Unit bond direction, which is also the normal of a crack across it.
    /// For anchors this is the outward normal of the grip.
    pub direction: Direction,
    /// Crack area created by breaking the bond (an (n−1)-measure).
    pub cross_section: f64,
    /// Axial length `h`; zero for anchors.
    pub length: f64,
}

impl Bond {
    pub fn volume(&self) -> f64 {
        self.cross_section * self.length
    }

    pub fn is_anchor(&self) -> bool {
        matches!(self.kind, BondKind::Anchor { .. })
    }
}

/// Cheap fingerprint used to refuse operations mixing lattices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeKey {
    dimension: usize,
    cells: [usize; 2],
    bonds: usize,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    dimension: usize,
    extent: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
    nodes: Vec<Point>,
    labels: Vec<NodeLabel>,
    node_volume: Vec<f64>,
    bonds: Vec<Bond>,
    n_interior: usize,
    anchor_of: Vec<Option<usize>>,
}

impl Lattice {
    pub fn build(geometry: &Geometry) -> Result<Self> {
        let dim = geometry.dimension;
        if dim != 1 && dim != 2 {
            return Err(Error::Lattice(format!("dimension must be 1 or 2, got {dim}")));
        }
        if geometry.extent.len() != dim || geometry.cells.len() != dim {
            return Err(Error::Lattice(format!(
                "extent and cells need {dim} entries each"
            )));
        }
        if geometry.cells.contains(&0) {
            return Err(Error::Lattice("cell counts must be at least 1".into()));
        }
        if geometry.extent.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Lattice("extents must be positive".into()));
        }
        if geometry.dirichlet.is_empty() {
            return Err(Error::Lattice(
                "Dirichlet boundary is empty; the boundary program would be undefined".into(),
            ));
        }
        if dim == 1
            && geometry
                .dirichlet
                .iter()
                .any(|e| matches!(e, Edge::Bottom | Edge::Top))
        {
            return Err(Error::Lattice(
                "a chain only has left and right ends".into(),
            ));
        }
        if dim == 1 {
            Ok(Self::build_chain(geometry))
        } else {
            Ok(Self::build_grid(geometry))
        }
    }

    fn build_chain(geometry: &Geometry) -> Self {
        let n = geometry.cells[0];
        let length = geometry.extent[0];
        let h = length / n as f64;
        let nodes: Vec<Point> = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
        let mut labels = vec![NodeLabel::Interior; n + 1];
        let ends = [(0, Edge::Left), (n, Edge::Right)];
        for (node, edge) in ends {
            labels[node] = if geometry.dirichlet.contains(&edge) {
                NodeLabel::Dirichlet
            } else {
                NodeLabel::Neumann
            };
        }
        let mut node_volume = vec![h; n + 1];
        node_volume[0] = h / 2.0;
        node_volume[n] = h / 2.0;

        let mut bonds: Vec<Bond> = (0..n)
            .map(|i| Bond {
                kind: BondKind::Interior { a: i, b: i + 1 },
                midpoint: [(i as f64 + 0.5) * h, 0.0],
                direction: [1.0, 0.0],
                cross_section: 1.0,
                length: h,
            })
            .collect();
        let mut anchor_of = vec![None; n + 1];
        for (node, edge) in ends {
            if labels[node] == NodeLabel::Dirichlet {
                anchor_of[node] = Some(bonds.len());
                bonds.push(Bond {
                    kind: BondKind::Anchor { node },
                    midpoint: nodes[node],
                    direction: edge.outward_normal(),
                    cross_section: 1.0,
                    length: 0.0,
                });
            }
        }
        Lattice {
            dimension: 1,
            extent: [length, 0.0],
            cells: [n, 0],
            spacing: [h, 0.0],
            nodes,
            labels,
            node_volume,
            bonds,
            n_interior: n,
            anchor_of,
        }
    }

    fn build_grid(geometry: &Geometry) -> Self {
        let (nx, ny) = (geometry.cells[0], geometry.cells[1]);
        let (lx, ly) = (geometry.extent[0], geometry.extent[1]);
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let half_if = |edge: bool, h: f64| if edge { h / 2.0 } else { h };

        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut node_volume = Vec::with_capacity(nodes.capacity());
        let mut on_edges: Vec<Vec<Edge>> = Vec::with_capacity(nodes.capacity());
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 * hx, j as f64 * hy]);
                node_volume.push(half_if(i == 0 || i == nx, hx) * half_if(j == 0 || j == ny, hy));
                let mut edges = Vec::new();
                if i == 0 {
                    edges.push(Edge::Left);
                }
                if i == nx {
                    edges.push(Edge::Right);
                }
                if j == 0 {
                    edges.push(Edge::Bottom);
                }
                if j == ny {
                    edges.push(Edge::Top);
                }
                on_edges.push(edges);
            }
        }

        let mut bonds = Vec::new();
        for j in 0..=ny {
            for i in 0..nx {
                bonds.push(Bond {
                    kind: BondKind::Interior {
                        a: id(i, j),
                        b: id(i + 1, j),
                    },
                    midpoint: [(i as f64 + 0.5) * hx, j as f64 * hy],
                    direction: [1.0, 0.0],
                    cross_section: half_if(j == 0 || j == ny, hy),
                    length: hx,
                });
            }
        }
        for j in 0..ny {
            for i in 0..=nx {
                bonds.push(Bond {
                    kind: BondKind::Interior {
                        a: id(i, j),
                        b: id(i, j + 1),
                    },
                    midpoint: [i as f64 * hx, (j as f64 + 0.5) * hy],
                    direction: [0.0, 1.0],
                    cross_section: half_if(i == 0 || i == nx, hx),
                    length: hy,
                });
            }
        }
        let n_interior = bonds.len();

        let mut labels = vec![NodeLabel::Interior; nodes.len()];
        let mut anchor_of = vec![None; nodes.len()];
        for (node, edges) in on_edges.iter().enumerate() {
            if edges.is_empty() {
                continue;
            }
            let grips: Vec<Edge> = edges
                .iter()
                .copied()
                .filter(|e| geometry.dirichlet.contains(e))
                .collect();
            if grips.is_empty() {
                labels[node] = NodeLabel::Neumann;
                continue;
            }
            labels[node] = NodeLabel::Dirichlet;
            let (i, j) = (node % (nx + 1), node / (nx + 1));
            let mut area = 0.0;
            let mut normal = [0.0, 0.0];
            for edge in &grips {
                area += match edge {
                    Edge::Left | Edge::Right => half_if(j == 0 || j == ny, hy),
                    Edge::Bottom | Edge::Top => half_if(i == 0 || i == nx, hx),
                };
                let n = edge.outward_normal();
                normal[0] += n[0];
                normal[1] += n[1];
            }
            let len = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
            anchor_of[node] = Some(bonds.len());
            bonds.push(Bond {
                kind: BondKind::Anchor { node },
                midpoint: nodes[node],
                direction: [normal[0] / len, normal[1] / len],
                cross_section: area,
                length: 0.0,
            });
        }

        Lattice {
            dimension: 2,
            extent: [lx, ly],
            cells: [nx, ny],
            spacing: [hx, hy],
            nodes,
            labels,
            node_volume,
            bonds,
            n_interior,
            anchor_of,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    /// Bond lengths along each axis.
    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn measure(&self) -> f64 {
        if self.dimension == 1 {
            self.extent[0]
        } else {
            self.extent[0] * self.extent[1]
        }
    }

    pub fn key(&self) -> LatticeKey {
        LatticeKey {
            dimension: self.dimension,
            cells: self.cells,
            bonds: self.bonds.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Point {
        &self.nodes[id]
    }

    pub fn label(&self, node: usize) -> NodeLabel {
        self.labels[node]
    }

    /// Dual-cell volume of a node (half cells on the boundary).
    pub fn node_volume(&self, node: usize) -> f64 {
        self.node_volume[node]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, id: usize) -> &Bond {
        &self.bonds[id]
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Interior bonds occupy ids `0..interior_bond_count()`; anchors follow.
    pub fn interior_bond_count(&self) -> usize {
        self.n_interior
    }

    pub fn anchor_count(&self) -> usize {
        self.bonds.len() - self.n_interior
    }

    pub fn anchor_of(&self, node: usize) -> Option<usize> {
        self.anchor_of[node]
    }

    pub fn interior_bonds(&self) -> impl Iterator<Item = (usize, usize, usize, &Bond)> {
        self.bonds[..self.n_interior]
            .iter()
            .enumerate()
            .map(|(id, bond)| match bond.kind {
                BondKind::Interior { a, b } => (id, a, b, bond),
                BondKind::Anchor { .. } => unreachable!("anchors follow interior bonds"),
            })
    }

    pub fn anchors(&self) -> impl Iterator<Item = (usize, usize, &Bond)> {
        self.bonds[self.n_interior..]
            .iter()
            .enumerate()
            .map(move |(k, bond)| match bond.kind {
                BondKind::Anchor { node } => (self.n_interior + k, node, bond),
                BondKind::Interior { .. } => unreachable!("anchors follow interior bonds"),
            })
    }

    /// Connected components of the intact interior-bond graph, as a
    /// component index per node. Components are numbered by their smallest node.
    pub fn components(&self, crack: &CrackSet) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (id, a, b, _) in self.interior_bonds() {
            if crack.contains(id) {
                continue;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[hi] = lo;
            }
        }
        (0..self.nodes.len()).map(|n| find(&mut parent, n)).collect()
    }
}

/// One broken bond seen as a piece of crack surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackSegment {
    pub bond: usize,
    pub midpoint: Point,
    pub normal: Direction,
    pub area: f64,
}

/// A crack: the set of broken bonds of one lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CrackSet {
    lattice: LatticeKey,
    bonds: BTreeSet<usize>,
}

impl CrackSet {
    pub fn empty(lattice: &Lattice) -> Self {
        CrackSet {
            lattice: lattice.key(),
            bonds: BTreeSet::new(),
        }
    }

    pub fn from_ids<I: IntoIterator<Item = usize>>(lattice: &Lattice, ids: I) -> Result<Self> {
        let mut crack = Self::empty(lattice);
        for id in ids {
            crack.insert(lattice, id)?;
        }
        Ok(crack)
    }

    pub fn insert(&mut self, lattice: &Lattice, id: usize) -> Result<bool> {
        if lattice.key() != self.lattice {
            return Err(Error::LatticeMismatch);
        }
        if id >= lattice.bond_count() {
            return Err(Error::UnknownBond {
                id,
                count: lattice.bond_count(),
            });
        }
        Ok(self.bonds.insert(id))
    }

    pub fn contains(&self, bond: usize) -> bool {
        self.bonds.contains(&bond)
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.bonds.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.bonds.iter().copied().collect()
    }

    pub fn key(&self) -> LatticeKey {
        self.lattice
    }

    /// Union with extra bond ids already known to be valid for this lattice.
    pub fn with<I: IntoIterator<Item = usize>>(&self, extra: I) -> Self {
        let mut out = self.clone();
        out.bonds.extend(extra);
        out
    }

    pub fn union(&self, other: &CrackSet) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(self.with(other.ids()))
    }

    pub fn difference(&self, other: &CrackSet) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(CrackSet {
            lattice: self.lattice,
            bonds: self.bonds.difference(&other.bonds).copied().collect(),
        })
    }

    /// Lexicographic order on sorted bond-id lists.
    pub fn lex_cmp(&self, other: &CrackSet) -> std::cmp::Ordering {
        self.bonds.iter().cmp(other.bonds.iter())
    }
}

impl fmt::Display for CrackSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, id) in self.bonds.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

/// `Γ₁ ⊆ Γ₂`.
pub fn crack_contains(inner: &CrackSet, outer: &CrackSet) -> Result<bool> {
    if inner.lattice != outer.lattice {
        return Err(Error::LatticeMismatch);
    }
    Ok(inner.bonds.is_subset(&outer.bonds))
}

pub fn crack_segments(crack: &CrackSet, lattice: &Lattice) -> Result<Vec<CrackSegment>> {
    if crack.lattice != lattice.key() {
        return Err(Error::LatticeMismatch);
    }
    crack
        .ids()
        .map(|id| {
            let bond = lattice.bonds.get(id).ok_or(Error::UnknownBond {
                id,
                count: lattice.bond_count(),
            })?;
            Ok(CrackSegment {
                bond: id,
                midpoint: bond.midpoint,
                normal: bond.direction,
                area: bond.cross_section,
            })
        })
        .collect()
}

/// Nodal displacement values (antiplane: one scalar per node).
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField(pub Vec<f64>);

impl DisplacementField {
    pub fn zeros(lattice: &Lattice) -> Self {
        DisplacementField(vec![0.0; lattice.node_count()])
    }

    pub fn from_fn(lattice: &Lattice, f: impl Fn(&Point) -> f64) -> Self {
        DisplacementField(lattice.nodes().iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Axial strain `(u_b − u_a)/h` on every interior bond (broken or not).
    pub fn bond_strains(&self, lattice: &Lattice) -> Vec<f64> {
        lattice
            .interior_bonds()
            .map(|(_, a, b, bond)| (self.0[b] - self.0[a]) / bond.length)
            .collect()
    }

    pub fn sup_distance(&self, other: &DisplacementField) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Assigns `w(t, x)` on every node still held by an intact anchor. Nodes
/// whose anchor is broken keep their value.
pub fn apply_boundary(
    lattice: &Lattice,
    u: &DisplacementField,
    t: f64,
    crack: &CrackSet,
    program: &BoundaryProgram,
) -> DisplacementField {
    let mut out = u.clone();
    for (id, node, _) in lattice.anchors() {
        if !crack.contains(id) {
            out.0[node] = program.value(t, lattice.node(node));
        }
    }
    out
}

/// A displacement/crack pair at a given time, checked against the boundary
/// condition on the intact part of the grip.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissiblePair {
    pub t: f64,
    pub u: DisplacementField,
    pub crack: CrackSet,
}

impl AdmissiblePair {
    pub fn new(
        lattice: &Lattice,
        program: &BoundaryProgram,
        t: f64,
        u: DisplacementField,
        crack: CrackSet,
    ) -> Result<Self> {
        check_admissible(lattice, program, t, &u, &crack)?;
        Ok(AdmissiblePair { t, u, crack })
    }
}

pub fn check_admissible(
    lattice: &Lattice,
    program: &BoundaryProgram,
    t: f64,
    u: &DisplacementField,
    crack: &CrackSet,
) -> Result<()> {
    if crack.key() != lattice.key() || u.0.len() != lattice.node_count() {
        return Err(Error::LatticeMismatch);
    }
    for (id, node, _) in lattice.anchors() {
        if crack.contains(id) {
            continue;
        }
        let expected = program.value(t, lattice.node(node));
        if u.0[node] != expected {
            return Err(Error::Inadmissible {
                node,
                expected,
                found: u.0[node],
            });
        }
    }
    Ok(())
}
