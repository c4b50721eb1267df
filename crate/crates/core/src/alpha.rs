//! Arlequin coupling coefficient: distance-ratio and heat-conduction methods,
//! and interpolation to quadrature points and atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{norm2, solve_spd, TripletBuilder};
use crate::ray::{boundary_points, BoundaryPoints, Primitive, Ray};
use crate::shape::{element_shape_values, forward_map, physical_gradients, quadrature};
use crate::topology::{boundary_primitives, label_sides, nearest_anchor, CouplingMap, Side};
use crate::types::{distance, AtomSet, Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMethod {
    Direct,
    Temperature,
}

impl AlphaMethod {
    pub fn name(self) -> &'static str {
        match self {
            AlphaMethod::Direct => "direct",
            AlphaMethod::Temperature => "temperature",
        }
    }
}

impl fmt::Display for AlphaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlphaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(AlphaMethod::Direct),
            "temperature" => Ok(AlphaMethod::Temperature),
            _ => Err(Error::InvalidValue(format!("unknown alpha method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussAlpha {
    pub element: usize,
    pub point: usize,
    pub position: Point,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomAlpha {
    pub atom: usize,
    pub position: Point,
    pub alpha: f64,
}

/// Coefficient on the coupling region. The MD weight is `1 - alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaField {
    pub method: AlphaMethod,
    /// Keyed by node id, coupling-region nodes only.
    pub nodal: BTreeMap<usize, f64>,
    pub gauss: Vec<GaussAlpha>,
    pub atoms: Vec<AtomAlpha>,
}

/// `|x - x0| / |x1 - x0|`, clamped to [0, 1].
pub fn alpha_from_points(x: &Point, bp: &BoundaryPoints) -> f64 {
    let span = distance(&bp.x1, &bp.x0);
    if span == 0.0 {
        return 0.0;
    }
    (distance(x, &bp.x0) / span).clamp(0.0, 1.0)
}

/// Direct method at one point, ray cast from the nearest anchor.
pub fn alpha_direct(x: &Point, anchors: &[Point], prims: &[(usize, Primitive)]) -> Result<f64> {
    let anchor = nearest_anchor(x, anchors)
        .ok_or_else(|| Error::BadAnchor { anchor: Vec::new(), reason: "no anchor points given".into() })?;
    let bp = boundary_points(&Ray::new(*anchor, *x)?, prims)?;
    Ok(alpha_from_points(x, &bp))
}

/// Nodes of the coupling elements, ascending.
pub fn coupling_nodes(mesh: &Mesh, elements: &[usize]) -> Result<Vec<usize>> {
    let mut set = BTreeSet::new();
    for &id in elements {
        let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
        set.extend(e.nodes.iter().copied());
    }
    Ok(set.into_iter().collect())
}

/// Outcome of the conduction solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatSolution {
    pub nodal: BTreeMap<usize, f64>,
    /// `|K_ff a_f - f| / |f|` of the reduced system (0 when nothing is free).
    pub relative_residual: f64,
}

/// Laplace problem on the coupling elements with unit conductivity,
/// `alpha = 0` on MD-side and `1` on FE-side boundary nodes.
pub fn solve_alpha_temperature(mesh: &Mesh, elements: &[usize], sides: &BTreeMap<usize, Side>) -> Result<HeatSolution> {
    if !sides.values().any(|s| *s == Side::MdSide) || !sides.values().any(|s| *s == Side::FeSide) {
        return Err(Error::SingularHeatSystem("both md_side and fe_side boundary values are required".into()));
    }
    let nodes = coupling_nodes(mesh, elements)?;
    let index: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut free_index = vec![usize::MAX; nodes.len()];
    let mut free = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        if !sides.contains_key(n) {
            free_index[i] = free.len();
            free.push(i);
        }
    }
    check_components(mesh, elements, &index, &nodes, sides)?;

    let mut k = TripletBuilder::new(free.len());
    let mut rhs = vec![0.0; free.len()];
    for &id in elements {
        let e = mesh.element(id).expect("coupling nodes resolved");
        let coords = mesh.element_coords(e)?;
        let local: Vec<usize> = e.nodes.iter().map(|n| index[n]).collect();
        let nn = local.len();
        let mut ke = vec![0.0; nn * nn];
        for (iso, w) in quadrature(e.kind) {
            let (grads, det) = physical_gradients(e.kind, &coords, &iso)?;
            let jw = det.abs() * w;
            for a in 0..nn {
                for b in 0..nn {
                    let g: f64 = (0..mesh.dim).map(|d| grads[a][d] * grads[b][d]).sum();
                    ke[a * nn + b] += g * jw;
                }
            }
        }
        for a in 0..nn {
            let fa = free_index[local[a]];
            if fa == usize::MAX {
                continue;
            }
            for b in 0..nn {
                let nb = nodes[local[b]];
                match sides.get(&nb) {
                    Some(side) => rhs[fa] -= ke[a * nn + b] * side.alpha(),
                    None => k.add(fa, free_index[local[b]], ke[a * nn + b]),
                }
            }
        }
    }
    let k = k.build();
    let sol = if free.is_empty() { Vec::new() } else { solve_spd(&k, &rhs)? };
    let residual: Vec<f64> = k.mul_vec(&sol).iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let relative_residual = if norm2(&rhs) > 0.0 { norm2(&residual) / norm2(&rhs) } else { norm2(&residual) };
    if relative_residual >= 1e-10 {
        return Err(Error::NoConvergence(relative_residual));
    }
    let mut nodal = BTreeMap::new();
    for (i, &n) in nodes.iter().enumerate() {
        let v = match sides.get(&n) {
            Some(side) => side.alpha(),
            None => sol[free_index[i]],
        };
        nodal.insert(n, v);
    }
    Ok(HeatSolution { nodal, relative_residual })
}

/// Every connected piece of the coupling mesh needs a prescribed node.
fn check_components(
    mesh: &Mesh,
    elements: &[usize],
    index: &BTreeMap<usize, usize>,
    nodes: &[usize],
    sides: &BTreeMap<usize, Side>,
) -> Result<()> {
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &id in elements {
        let e = mesh.element(id).expect("coupling nodes resolved");
        let root = find(&mut parent, index[&e.nodes[0]]);
        for n in &e.nodes[1..] {
            let r = find(&mut parent, index[n]);
            parent[r] = root;
        }
    }
    let mut anchored = BTreeSet::new();
    for (i, n) in nodes.iter().enumerate() {
        if sides.contains_key(n) {
            anchored.insert(find(&mut parent, i));
        }
    }
    for (i, n) in nodes.iter().enumerate() {
        if !anchored.contains(&find(&mut parent, i)) {
            return Err(Error::SingularHeatSystem(format!("node {n} lies in a component with no boundary value")));
        }
    }
    Ok(())
}

/// Shape-function interpolation of nodal values to the quadrature points of
/// the coupling elements and to the located atoms.
pub fn interpolate_alpha(
    mesh: &Mesh,
    atoms: &AtomSet,
    map: &CouplingMap,
    nodal: &BTreeMap<usize, f64>,
) -> Result<(Vec<GaussAlpha>, Vec<AtomAlpha>)> {
    let nodal_of = |id: usize| -> Result<Vec<f64>> {
        let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
        e.nodes
            .iter()
            .map(|n| nodal.get(n).copied().ok_or_else(|| Error::Missing(format!("alpha at node {n}"))))
            .collect()
    };
    let mut gauss = Vec::new();
    for &id in &map.elements {
        let e = mesh.element(id).expect("checked by nodal_of");
        let values = nodal_of(id)?;
        let coords = mesh.element_coords(e)?;
        for (k, (iso, _)) in quadrature(e.kind).into_iter().enumerate() {
            let n = element_shape_values(e.kind, &iso)?;
            gauss.push(GaussAlpha {
                element: id,
                point: k,
                position: forward_map(e.kind, &coords, &iso)?,
                alpha: dot(&n, &values),
            });
        }
    }
    let mut out = Vec::with_capacity(map.locations.len());
    for loc in &map.locations {
        let e = mesh.element(loc.element).ok_or_else(|| Error::Missing(format!("element {}", loc.element)))?;
        let n = element_shape_values(e.kind, &loc.iso)?;
        let position =
            *atoms.positions.get(loc.atom).ok_or_else(|| Error::Missing(format!("atom index {}", loc.atom)))?;
        out.push(AtomAlpha { atom: loc.atom, position, alpha: dot(&n, &nodal_of(loc.element)?) });
    }
    Ok((gauss, out))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fills in side labels when missing, then computes nodal alpha by the
/// chosen method and interpolates it.
pub fn build_alpha_field(
    method: AlphaMethod,
    mesh: &Mesh,
    atoms: &AtomSet,
    anchors: &[Point],
    map: &mut CouplingMap,
) -> Result<AlphaField> {
    if map.elements.is_empty() {
        return Ok(AlphaField { method, nodal: BTreeMap::new(), gauss: Vec::new(), atoms: Vec::new() });
    }
    if map.sides.is_empty() {
        map.sides = label_sides(mesh, &map.elements, &map.boundary, anchors)?;
    }
    let nodal = match method {
        AlphaMethod::Temperature => solve_alpha_temperature(mesh, &map.elements, &map.sides)?.nodal,
        AlphaMethod::Direct => {
            let prims = boundary_primitives(&map.boundary, mesh)?;
            let nodes = coupling_nodes(mesh, &map.elements)?;
            let values = nodes
                .par_iter()
                .map(|&n| {
                    let x = mesh.node(n).expect("coupling node exists").coords;
                    alpha_direct(&x, anchors, &prims)
                })
                .collect::<Result<Vec<f64>>>()?;
            nodes.into_iter().zip(values).collect()
        }
    };
    let (gauss, atom_alpha) = interpolate_alpha(mesh, atoms, map, &nodal)?;
    Ok(AlphaField { method, nodal, gauss, atoms: atom_alpha })
}

impl AlphaField {
    /// CSV rows `entity_type,entity_id,x,y[,z],alpha`.
    pub fn to_csv(&self, mesh: &Mesh, atoms: &AtomSet) -> String {
        let dim = mesh.dim.max(1);
        let mut s = String::from("entity_type,entity_id,x");
        for axis in ["y", "z"].iter().take(dim.saturating_sub(1)) {
            let _ = write!(s, ",{axis}");
        }
        s.push_str(",alpha\n");
        let mut row = |kind: &str, id: usize, p: &Point, a: f64| {
            let _ = write!(s, "{kind},{id}");
            for c in &p[..dim] {
                let _ = write!(s, ",{c:.16e}");
            }
            let _ = writeln!(s, ",{a:.16e}");
        };
        for (&n, &a) in &self.nodal {
            if let Some(node) = mesh.node(n) {
                row("node", n, &node.coords, a);
            }
        }
        for (k, g) in self.gauss.iter().enumerate() {
            row("gauss", k, &g.position, g.alpha);
        }
        for a in &self.atoms {
            row("atom", atoms.ids[a.atom], &a.position, a.alpha);
        }
        s
    }

    /// Atom alpha by atom index.
    pub fn atom_map(&self) -> BTreeMap<usize, f64> {
        self.atoms.iter().map(|a| (a.atom, a.alpha)).collect()
    }

    /// Reads the CSV written by [`AlphaField::to_csv`]. Gauss rows are
    /// matched to elements by order, so `map` must be the one used to write.
    pub fn from_csv(text: &str, method: AlphaMethod, mesh: &Mesh, atoms: &AtomSet, map: &CouplingMap) -> Result<Self> {
        let mut nodal = BTreeMap::new();
        let mut gauss_rows = Vec::new();
        let mut atom_rows = BTreeMap::new();
        let index: BTreeMap<usize, usize> = atoms.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let loc = || format!("alpha csv line {}", lineno + 1);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != mesh.dim + 3 {
                return Err(Error::parse(loc(), "wrong column count"));
            }
            let id: usize = f[1].parse().map_err(|_| Error::parse(loc(), "bad entity id"))?;
            let mut p = [0.0; 3];
            for d in 0..mesh.dim {
                p[d] = f[2 + d].parse().map_err(|_| Error::parse(loc(), "bad coordinate"))?;
            }
            let a: f64 = f[f.len() - 1].parse().map_err(|_| Error::parse(loc(), "bad alpha"))?;
            match f[0] {
                "node" => {
                    nodal.insert(id, a);
                }
                "gauss" => gauss_rows.push((p, a)),
                "atom" => {
                    let i = *index.get(&id).ok_or_else(|| Error::parse(loc(), format!("unknown atom id {id}")))?;
                    atom_rows.insert(i, (p, a));
                }
                other => return Err(Error::parse(loc(), format!("unknown entity type {other}"))),
            }
        }
        let mut gauss = Vec::with_capacity(gauss_rows.len());
        let mut rows = gauss_rows.into_iter();
        for &id in &map.elements {
            let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
            for k in 0..quadrature(e.kind).len() {
                let (position, alpha) = rows
                    .next()
                    .ok_or_else(|| Error::parse("alpha csv", "fewer gauss rows than coupling quadrature points"))?;
                gauss.push(GaussAlpha { element: id, point: k, position, alpha });
            }
        }
        let atoms_out =
            atom_rows.into_iter().map(|(atom, (position, alpha))| AtomAlpha { atom, position, alpha }).collect();
        Ok(AlphaField { method, nodal, gauss, atoms: atoms_out })
    }
}
