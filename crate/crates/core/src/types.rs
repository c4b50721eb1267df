//! Shared domain model: meshes, atoms, element-local coordinates.
//!
//! Points are stored as `[f64; 3]` regardless of the model dimension; unused
//! trailing components are zero. All types are immutable once built.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Linear element families supported by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    Bar2,
    Tri3,
    Quad4,
    Tet4,
    Hex8,
}

impl ElementKind {
    pub const ALL: [ElementKind; 5] =
        [ElementKind::Bar2, ElementKind::Tri3, ElementKind::Quad4, ElementKind::Tet4, ElementKind::Hex8];

    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Bar2 => 2,
            ElementKind::Tri3 => 3,
            ElementKind::Quad4 => 4,
            ElementKind::Tet4 => 4,
            ElementKind::Hex8 => 8,
        }
    }

    /// Spatial dimension the element lives in.
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Bar2 => 1,
            ElementKind::Tri3 | ElementKind::Quad4 => 2,
            ElementKind::Tet4 | ElementKind::Hex8 => 3,
        }
    }

    /// Number of stored iso coordinates (barycentric kinds carry all weights).
    pub fn iso_len(self) -> usize {
        match self {
            ElementKind::Bar2 => 1,
            ElementKind::Tri3 => 3,
            ElementKind::Quad4 => 2,
            ElementKind::Tet4 => 4,
            ElementKind::Hex8 => 3,
        }
    }

    pub fn is_simplex(self) -> bool {
        matches!(self, ElementKind::Tri3 | ElementKind::Tet4)
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Bar2 => "bar2",
            ElementKind::Tri3 => "tri3",
            ElementKind::Quad4 => "quad4",
            ElementKind::Tet4 => "tet4",
            ElementKind::Hex8 => "hex8",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ElementKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidValue(format!("unknown element kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub coords: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    pub kind: ElementKind,
    /// Node ids, ordered per the iso-parametric corner convention of the kind.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub nodes: Vec<Node>,
    /// Sorted by ascending element id.
    pub elements: Vec<Element>,
    node_index: HashMap<usize, usize>,
    element_index: HashMap<usize, usize>,
}

impl Mesh {
    /// Builds lookup tables. Structural problems are not rejected here; run
    /// [`validate_mesh`] for diagnostics.
    pub fn new(dim: usize, nodes: Vec<Node>, mut elements: Vec<Element>) -> Self {
        elements.sort_by_key(|e| e.id);
        let node_index = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let element_index = elements.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        Mesh { dim, nodes, elements, node_index, element_index }
    }

    pub fn node_position(&self, id: usize) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn node(&self, id: usize) -> Option<&Node> {
        self.node_position(id).map(|i| &self.nodes[i])
    }

    pub fn element(&self, id: usize) -> Option<&Element> {
        self.element_index.get(&id).map(|&i| &self.elements[i])
    }

    /// Nodal coordinates of an element in connectivity order.
    pub fn element_coords(&self, element: &Element) -> Result<Vec<Point>> {
        element
            .nodes
            .iter()
            .map(|&n| {
                self.node(n)
                    .map(|node| node.coords)
                    .ok_or_else(|| Error::Missing(format!("node {n} referenced by element {}", element.id)))
            })
            .collect()
    }

    /// Axis-aligned extent of the largest element along each axis.
    pub fn max_element_extent(&self) -> Point {
        let mut extent = [0.0; 3];
        for e in &self.elements {
            let Ok(coords) = self.element_coords(e) else {
                continue;
            };
            for axis in 0..self.dim {
                let (lo, hi) = coords
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, c| (acc.0.min(c[axis]), acc.1.max(c[axis])));
                extent[axis] = f64::max(extent[axis], hi - lo);
            }
        }
        extent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Checks every structural invariant of a mesh; returns one diagnostic per
/// violation, or an empty list for a well-formed mesh.
pub fn validate_mesh(mesh: &Mesh) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |subject: String, message: String| out.push(Diagnostic { subject, message });

    if !(1..=3).contains(&mesh.dim) {
        diag("mesh".into(), format!("unsupported dimension {}", mesh.dim));
    }
    let mut seen = HashSet::new();
    for n in &mesh.nodes {
        if !seen.insert(n.id) {
            diag(format!("node {}", n.id), "duplicate node id".into());
        }
        if n.coords.iter().any(|c| !c.is_finite()) {
            diag(format!("node {}", n.id), "non-finite coordinate".into());
        }
    }
    let mut seen = HashSet::new();
    for e in &mesh.elements {
        let subject = format!("element {}", e.id);
        if !seen.insert(e.id) {
            diag(subject.clone(), "duplicate element id".into());
        }
        if e.kind.dim() != mesh.dim {
            diag(subject.clone(), format!("{} element in a {}D mesh", e.kind, mesh.dim));
        }
        if e.nodes.len() != e.kind.node_count() {
            diag(
                subject.clone(),
                format!("connectivity length {} (expected {} for {})", e.nodes.len(), e.kind.node_count(), e.kind),
            );
        }
        let missing: Vec<usize> = e.nodes.iter().copied().filter(|&n| mesh.node(n).is_none()).collect();
        if !missing.is_empty() {
            diag(subject, format!("references missing node ids {missing:?}"));
        }
    }
    out
}

/// Atomistic model: positions, masses, and nearest-neighbour bonds.
#[derive(Debug, Clone)]
pub struct AtomSet {
    pub dim: usize,
    pub ids: Vec<usize>,
    pub positions: Vec<Point>,
    pub masses: Vec<f64>,
    /// Unordered bonds as index pairs `(i, j)` with `i < j`.
    pub pairs: Vec<(usize, usize)>,
}

impl AtomSet {
    pub fn new(dim: usize, ids: Vec<usize>, positions: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if ids.len() != positions.len() || masses.len() != positions.len() {
            return Err(Error::InvalidValue("atom ids, positions and masses differ in length".into()));
        }
        if let Some(i) = positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidValue(format!("atom {} has a non-finite position", ids[i])));
        }
        if let Some(i) = masses.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidValue(format!("atom {} has non-positive mass", ids[i])));
        }
        Ok(AtomSet { dim, ids, positions, masses, pairs: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Equilibrium bond vector from atom `i` to atom `j`.
    pub fn bond_vector(&self, i: usize, j: usize) -> Point {
        let (a, b) = (self.positions[i], self.positions[j]);
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
    }

    /// Replaces the bond list with every pair closer than `cutoff`.
    pub fn with_neighbors_within(mut self, cutoff: f64) -> Self {
        let inv = 1.0 / cutoff;
        let mut bins: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        for (i, p) in self.positions.iter().enumerate() {
            bins.entry(bin_of(p, inv)).or_default().push(i);
        }
        let mut pairs = Vec::new();
        for (i, p) in self.positions.iter().enumerate() {
            let c = bin_of(p, inv);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let key = [c[0] + dx, c[1] + dy, c[2] + dz];
                        let Some(members) = bins.get(&key) else { continue };
                        for &j in members {
                            if j > i && norm(&sub(&self.positions[j], p)) <= cutoff {
                                pairs.push((i, j));
                            }
                        }
                    }
                }
            }
        }
        pairs.sort_unstable();
        self.pairs = pairs;
        self
    }
}

fn bin_of(p: &Point, inv: f64) -> [i64; 3] {
    [(p[0] * inv).floor() as i64, (p[1] * inv).floor() as i64, (p[2] * inv).floor() as i64]
}

/// Element-local coordinates of a point.
///
/// Barycentric kinds (tri3, tet4) carry every weight, so `values` has 3 or 4
/// live entries summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoCoords {
    pub kind: ElementKind,
    values: [f64; 4],
}

impl IsoCoords {
    pub fn new(kind: ElementKind, values: &[f64]) -> Result<Self> {
        if values.len() != kind.iso_len() {
            return Err(Error::InvalidValue(format!(
                "{} iso coordinates need {} values, got {}",
                kind,
                kind.iso_len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite iso coordinate".into()));
        }
        if kind.is_simplex() {
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidValue(format!("{kind} barycentric weights sum to {sum}")));
            }
        }
        let mut v = [0.0; 4];
        v[..values.len()].copy_from_slice(values);
        Ok(IsoCoords { kind, values: v })
    }

    pub fn bar2(xi: f64) -> Self {
        IsoCoords { kind: ElementKind::Bar2, values: [xi, 0.0, 0.0, 0.0] }
    }

    /// Triangle coordinates from the first two weights; the third closes the sum.
    pub fn tri3(xi: f64, eta: f64) -> Self {
        IsoCoords { kind: ElementKind::Tri3, values: [xi, eta, 1.0 - (xi + eta), 0.0] }
    }

    pub fn quad4(xi: f64, eta: f64) -> Self {
        IsoCoords { kind: ElementKind::Quad4, values: [xi, eta, 0.0, 0.0] }
    }

    pub fn tet4(xi: f64, eta: f64, gamma: f64) -> Self {
        IsoCoords { kind: ElementKind::Tet4, values: [xi, eta, gamma, 1.0 - (xi + eta + gamma)] }
    }

    pub fn hex8(xi: f64, eta: f64, zeta: f64) -> Self {
        IsoCoords { kind: ElementKind::Hex8, values: [xi, eta, zeta, 0.0] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.kind.iso_len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    In,
    Out,
}

/// Where an atom sits inside the FE mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementLocation {
    /// Index into the atom set.
    pub atom: usize,
    pub element: usize,
    pub iso: IsoCoords,
    pub status: Status,
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: usize, x: f64, y: f64) -> Node {
        Node { id, coords: [x, y, 0.0] }
    }

    #[test]
    fn minimal_triangle_mesh_is_valid() {
        let mesh = Mesh::new(
            2,
            vec![node(1, 0.0, 0.0), node(2, 1.0, 0.0), node(3, 0.0, 1.0)],
            vec![Element { id: 1, kind: ElementKind::Tri3, nodes: vec![1, 2, 3] }],
        );
        assert!(validate_mesh(&mesh).is_empty());
    }

    #[test]
    fn missing_node_is_reported_once() {
        let mesh = Mesh::new(
            2,
            vec![node(1, 0.0, 0.0), node(2, 1.0, 0.0), node(3, 1.0, 1.0)],
            vec![Element { id: 7, kind: ElementKind::Quad4, nodes: vec![1, 2, 3, 99] }],
        );
        let diags = validate_mesh(&mesh);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].subject.contains("element 7"));
    }

    #[test]
    fn short_hex_connectivity_is_reported() {
        let nodes: Vec<Node> =
            (0..8).map(|i| Node { id: i, coords: [i as f64, (i % 2) as f64, (i / 4) as f64] }).collect();
        let mesh = Mesh::new(3, nodes, vec![Element { id: 1, kind: ElementKind::Hex8, nodes: (0..7).collect() }]);
        let diags = validate_mesh(&mesh);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("connectivity length"));
    }

    #[test]
    fn barycentric_sum_is_enforced() {
        assert!(IsoCoords::new(ElementKind::Tri3, &[0.5, 0.25, 0.25]).is_ok());
        assert!(IsoCoords::new(ElementKind::Tri3, &[0.5, 0.5, 0.25]).is_err());
        assert!(IsoCoords::new(ElementKind::Quad4, &[0.5]).is_err());
    }

    #[test]
    fn neighbor_search_finds_square_lattice_bonds() {
        let mut pos = Vec::new();
        for i in 0..4 {
            for j in 0..3 {
                pos.push([i as f64, j as f64, 0.0]);
            }
        }
        let n = pos.len();
        let atoms = AtomSet::new(2, (0..n).collect(), pos, vec![1.0; n]).unwrap().with_neighbors_within(1.05);
        // 4x3 grid: 3*3 horizontal + 4*2 vertical bonds.
        assert_eq!(atoms.pairs.len(), 17);
        assert!(atoms.pairs.iter().all(|&(i, j)| i < j));
    }
}
