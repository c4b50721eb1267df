//! Coupling region, its boundary by repetition counting, and side labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::iso::{in_out_status, invert};
use crate::ray::{ray_hits, Primitive, Ray, T_BAND};
use crate::types::{distance, ElementKind, ElementLocation, IsoCoords, Mesh, Point, Status};

/// A face of an element: edge in 2D, triangle or quad in 3D, node in 1D.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceObject {
    /// Node ids in ascending order; identifies the face.
    pub key: Vec<usize>,
    pub owner: usize,
    /// Node ids in the owner's local order.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    MdSide,
    FeSide,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::MdSide => "md_side",
            Side::FeSide => "fe_side",
        }
    }

    /// Coupling coefficient imposed on this side.
    pub fn alpha(self) -> f64 {
        match self {
            Side::MdSide => 0.0,
            Side::FeSide => 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CouplingMap {
    pub elements: Vec<usize>,
    pub locations: Vec<ElementLocation>,
    pub boundary: Vec<SurfaceObject>,
    pub sides: BTreeMap<usize, Side>,
}

/// Elements owning at least one atom with status in.
pub fn coupling_elements(locations: &[ElementLocation]) -> Vec<usize> {
    let set: BTreeSet<usize> = locations.iter().filter(|l| l.status == Status::In).map(|l| l.element).collect();
    set.into_iter().collect()
}

/// Local node index lists of the faces of each kind.
pub fn face_pattern(kind: ElementKind) -> &'static [&'static [usize]] {
    match kind {
        ElementKind::Bar2 => &[&[0], &[1]],
        ElementKind::Tri3 => &[&[0, 1], &[1, 2], &[2, 0]],
        ElementKind::Quad4 => &[&[0, 1], &[1, 2], &[2, 3], &[3, 0]],
        ElementKind::Tet4 => &[&[0, 1, 2], &[0, 1, 3], &[1, 2, 3], &[2, 0, 3]],
        ElementKind::Hex8 => {
            &[&[0, 3, 2, 1], &[4, 5, 6, 7], &[0, 1, 5, 4], &[1, 2, 6, 5], &[2, 3, 7, 6], &[3, 0, 4, 7]]
        }
    }
}

fn surface_objects(ids: &[usize], mesh: &Mesh) -> Result<Vec<SurfaceObject>> {
    let mut objects = Vec::new();
    for &id in ids {
        let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
        for face in face_pattern(e.kind) {
            let nodes: Vec<usize> = face.iter().map(|&k| e.nodes[k]).collect();
            let mut key = nodes.clone();
            key.sort_unstable();
            objects.push(SurfaceObject { key, owner: id, nodes });
        }
    }
    Ok(objects)
}

/// Faces of the element subset that belong to exactly one element.
///
/// The face list is sorted by key; a face is unique when its first and last
/// occurrence in the sorted list coincide.
pub fn extract_boundary(elements: &[usize], mesh: &Mesh) -> Result<Vec<SurfaceObject>> {
    let mut objects = surface_objects(elements, mesh)?;
    objects.sort_by(|a, b| a.key.cmp(&b.key).then(a.owner.cmp(&b.owner)));
    let n = objects.len();
    let mut first = vec![0; n];
    for i in 1..n {
        first[i] = if objects[i].key == objects[i - 1].key { first[i - 1] } else { i };
    }
    let mut last = vec![n.saturating_sub(1); n];
    for i in (0..n.saturating_sub(1)).rev() {
        last[i] = if objects[i].key == objects[i + 1].key { last[i + 1] } else { i };
    }
    let boundary: Vec<SurfaceObject> =
        objects.into_iter().enumerate().filter(|&(i, _)| first[i] == last[i]).map(|(_, o)| o).collect();
    debug_assert_eq!(
        boundary.iter().map(|o| o.key.clone()).collect::<Vec<_>>(),
        boundary_keys_by_count(elements, mesh)?
    );
    Ok(boundary)
}

/// Reference for [`extract_boundary`]: keys counted in a hash map.
pub fn boundary_keys_by_count(elements: &[usize], mesh: &Mesh) -> Result<Vec<Vec<usize>>> {
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for o in surface_objects(elements, mesh)? {
        *counts.entry(o.key).or_default() += 1;
    }
    let mut keys: Vec<Vec<usize>> = counts.into_iter().filter(|(_, c)| *c == 1).map(|(k, _)| k).collect();
    keys.sort();
    Ok(keys)
}

/// Number of closed loops formed by 2D boundary edges, or `None` if some
/// node does not have exactly two incident edges.
pub fn boundary_loops(boundary: &[SurfaceObject]) -> Option<usize> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in boundary {
        let [a, b] = s.key[..] else { return None };
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    if adj.values().any(|v| v.len() != 2) {
        return None;
    }
    let mut seen = BTreeSet::new();
    let mut loops = 0;
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        loops += 1;
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for &m in &adj[&n] {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
    }
    Some(loops)
}

/// Ray-test primitives for the boundary; quads are split along their first
/// diagonal.
pub fn boundary_primitives(boundary: &[SurfaceObject], mesh: &Mesh) -> Result<Vec<(usize, Primitive)>> {
    let pos = |id: usize| mesh.node(id).map(|n| n.coords).ok_or_else(|| Error::Missing(format!("boundary node {id}")));
    let mut out = Vec::new();
    for (i, s) in boundary.iter().enumerate() {
        let p: Vec<Point> = s.nodes.iter().map(|&n| pos(n)).collect::<Result<_>>()?;
        match p.len() {
            1 => out.push((i, Primitive::Point(p[0]))),
            2 => out.push((i, Primitive::Segment([p[0], p[1]]))),
            3 => out.push((i, Primitive::Triangle([p[0], p[1], p[2]]))),
            _ => {
                out.push((i, Primitive::Triangle([p[0], p[1], p[2]])));
                out.push((i, Primitive::Triangle([p[0], p[2], p[3]])));
            }
        }
    }
    Ok(out)
}

pub fn nearest_anchor<'a>(x: &Point, anchors: &'a [Point]) -> Option<&'a Point> {
    anchors.iter().min_by(|a, b| distance(a, x).total_cmp(&distance(b, x)))
}

/// Probe directions for the enclosure check, offset from the axes so they
/// avoid grid-aligned edges.
fn probe_directions(dim: usize) -> Vec<Point> {
    let mut dirs = Vec::new();
    match dim {
        1 => dirs.extend([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
        2 => {
            for k in 0..16 {
                let a = (k as f64 + 0.3137) * std::f64::consts::TAU / 16.0;
                dirs.push([a.cos(), a.sin(), 0.0]);
            }
        }
        _ => {
            for k in 0..8 {
                for l in 0..4 {
                    let a = (k as f64 + 0.3137) * std::f64::consts::TAU / 8.0;
                    let z = -0.75 + 0.5 * l as f64 + 0.0917;
                    let r = (1.0 - z * z).sqrt();
                    dirs.push([r * a.cos(), r * a.sin(), z]);
                }
            }
        }
    }
    dirs
}

/// Rejects anchors lying inside a coupling element or not enclosed by the
/// boundary. In 1D one bracketing side is enough.
pub fn check_anchor(anchor: &Point, mesh: &Mesh, elements: &[usize], prims: &[(usize, Primitive)]) -> Result<()> {
    let bad = |reason: String| Error::BadAnchor { anchor: anchor.to_vec(), reason };
    for &id in elements {
        let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
        let coords = mesh.element_coords(e)?;
        if let Ok(inv) = invert(e.kind, &coords, *anchor) {
            if inv.status == Status::In {
                return Err(bad(format!("lies inside coupling element {id}")));
            }
        }
    }
    let extent = mesh.max_element_extent().iter().fold(1.0f64, |m, v| m.max(*v));
    let mut enclosed = true;
    let mut seen = false;
    for d in probe_directions(mesh.dim) {
        let target = [anchor[0] + extent * d[0], anchor[1] + extent * d[1], anchor[2] + extent * d[2]];
        let ray = Ray::new(*anchor, target)?;
        if ray_hits(&ray, prims)?.is_empty() {
            enclosed = false;
        } else {
            seen = true;
        }
    }
    // a 1D strip has its MD region on one side only
    if (mesh.dim == 1 && seen) || enclosed {
        Ok(())
    } else {
        Err(bad("not enclosed by the coupling boundary".into()))
    }
}

/// Labels each boundary node by the ray from its nearest anchor: crossing
/// the boundary before reaching the node puts it on the FE side.
pub fn label_sides(
    mesh: &Mesh,
    elements: &[usize],
    boundary: &[SurfaceObject],
    anchors: &[Point],
) -> Result<BTreeMap<usize, Side>> {
    if anchors.is_empty() {
        return Err(Error::BadAnchor { anchor: Vec::new(), reason: "no anchor points given".into() });
    }
    let prims = boundary_primitives(boundary, mesh)?;
    for a in anchors {
        check_anchor(a, mesh, elements, &prims)?;
    }
    let nodes: BTreeSet<usize> = boundary.iter().flat_map(|s| s.key.iter().copied()).collect();
    let mut sides = BTreeMap::new();
    for node in nodes {
        let x = mesh.node(node).ok_or_else(|| Error::Missing(format!("node {node}")))?.coords;
        let anchor = nearest_anchor(&x, anchors).expect("anchors checked non-empty");
        let ray = Ray::new(*anchor, x)?;
        let hits = ray_hits(&ray, &prims)?;
        for h in &hits {
            let touches = boundary[h.surface].key.binary_search(&node).is_ok();
            if (h.t - 1.0).abs() <= T_BAND && !touches {
                return Err(Error::GrazingRay { node });
            }
        }
        let crossed = hits.iter().any(|h| h.t < 1.0 - T_BAND);
        sides.insert(node, if crossed { Side::FeSide } else { Side::MdSide });
    }
    Ok(sides)
}

/// Iso coordinates listed in serialized form: barycentric kinds drop the
/// dependent last weight.
fn iso_free_values(iso: &IsoCoords) -> &[f64] {
    let v = iso.values();
    if iso.kind.is_simplex() {
        &v[..v.len() - 1]
    } else {
        v
    }
}

impl CouplingMap {
    pub fn to_text(&self, mesh: &Mesh) -> String {
        let mut s = String::from("[coupling_elements]\n");
        for e in &self.elements {
            let _ = writeln!(s, "{e}");
        }
        s.push_str("[atom_locations]\n");
        for l in &self.locations {
            let kind = mesh.element(l.element).map_or(l.iso.kind, |e| e.kind);
            let _ = write!(s, "{} {} {}", l.atom, l.element, kind);
            for v in iso_free_values(&l.iso) {
                let _ = write!(s, " {v:.16e}");
            }
            s.push('\n');
        }
        s.push_str("[boundary]\n");
        for b in &self.boundary {
            let nodes: Vec<String> = b.nodes.iter().map(usize::to_string).collect();
            let side = b.key.iter().map(|n| self.sides.get(n).map_or("-", |s| s.name())).collect::<Vec<_>>().join(",");
            let _ = writeln!(s, "{} | {} | {}", nodes.join(" "), b.owner, side);
        }
        s.push_str("[sides]\n");
        for (n, side) in &self.sides {
            let _ = writeln!(s, "{n} {}", side.name());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = CouplingMap::default();
        let mut section = "";
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = || format!("coupling map line {}", lineno + 1);
            if line.starts_with('[') {
                section = match line {
                    "[coupling_elements]" | "[atom_locations]" | "[boundary]" | "[sides]" => line,
                    _ => return Err(Error::parse(loc(), format!("unknown section {line}"))),
                };
                continue;
            }
            let num = |t: &str| t.parse::<usize>().map_err(|e| Error::parse(loc(), e.to_string()));
            let real = |t: &str| t.parse::<f64>().map_err(|e| Error::parse(loc(), e.to_string()));
            match section {
                "[coupling_elements]" => map.elements.push(num(line)?),
                "[atom_locations]" => {
                    let f: Vec<&str> = line.split_whitespace().collect();
                    if f.len() < 4 {
                        return Err(Error::parse(loc(), "expected atom, element, kind, iso values"));
                    }
                    let kind: ElementKind = f[2].parse().map_err(|_| Error::parse(loc(), "bad element kind"))?;
                    let vals = f[3..].iter().map(|t| real(t)).collect::<Result<Vec<_>>>()?;
                    let iso = match (kind, vals.as_slice()) {
                        (ElementKind::Tri3, [a, b]) => IsoCoords::tri3(*a, *b),
                        (ElementKind::Tet4, [a, b, c]) => IsoCoords::tet4(*a, *b, *c),
                        (k, v) if !k.is_simplex() => {
                            IsoCoords::new(k, v).map_err(|e| Error::parse(loc(), e.to_string()))?
                        }
                        _ => return Err(Error::parse(loc(), "wrong number of iso values")),
                    };
                    map.locations.push(ElementLocation {
                        atom: num(f[0])?,
                        element: num(f[1])?,
                        status: in_out_status(&iso),
                        iso,
                    });
                }
                "[boundary]" => {
                    let parts: Vec<&str> = line.split('|').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(Error::parse(loc(), "expected 'nodes | owner | sides'"));
                    }
                    let nodes = parts[0].split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
                    let mut key = nodes.clone();
                    key.sort_unstable();
                    map.boundary.push(SurfaceObject { key, owner: num(parts[1])?, nodes });
                }
                "[sides]" => {
                    let f: Vec<&str> = line.split_whitespace().collect();
                    let side = match f.as_slice() {
                        [_, "md_side"] => Side::MdSide,
                        [_, "fe_side"] => Side::FeSide,
                        _ => return Err(Error::parse(loc(), "expected 'node md_side|fe_side'")),
                    };
                    map.sides.insert(num(f[0])?, side);
                }
                _ => return Err(Error::parse(loc(), "data before any section header")),
            }
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Element, Node};

    fn tri_pair() -> Mesh {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
            .iter()
            .enumerate()
            .map(|(i, p)| Node { id: i, coords: [p[0], p[1], 0.0] })
            .collect();
        let elements = vec![
            Element { id: 0, kind: ElementKind::Tri3, nodes: vec![0, 1, 2] },
            Element { id: 1, kind: ElementKind::Tri3, nodes: vec![0, 2, 3] },
        ];
        Mesh::new(2, nodes, elements)
    }

    #[test]
    fn triangle_edges() {
        let mesh = tri_pair();
        assert_eq!(extract_boundary(&[0], &mesh).unwrap().len(), 3);
        let both = extract_boundary(&[0, 1], &mesh).unwrap();
        assert_eq!(both.len(), 4);
        assert!(both.iter().all(|s| s.key != vec![0, 2]));
        assert_eq!(boundary_loops(&both), Some(1));
    }

    #[test]
    fn coupling_element_set() {
        assert!(coupling_elements(&[]).is_empty());
        let loc = ElementLocation { atom: 0, element: 7, iso: IsoCoords::quad4(0.0, 0.0), status: Status::In };
        assert_eq!(coupling_elements(&[loc]), vec![7]);
    }
}
