//! Built-in 2D wave-reflection problem: a square FE domain with a square
//! hole, an MD patch filling the hole and overlapping a ring of elements.

use crate::config::Config;
use crate::error::Result;
use crate::types::{AtomSet, Element, ElementKind, Mesh, Node};

/// Elements per side of the full FE domain.
pub const CELLS: usize = 19;
/// Domain side length.
pub const SIDE: f64 = 100.0;
/// Elements per side of the removed centre block.
pub const HOLE: usize = 5;
/// Elements per side of the block covered by atoms.
pub const MD_BLOCK: usize = 9;

fn in_centre(i: usize, j: usize, width: usize) -> bool {
    let lo = (CELLS - width) / 2;
    (lo..lo + width).contains(&i) && (lo..lo + width).contains(&j)
}

/// Structured quad4 mesh of `nx x ny` square elements of side `h` with the
/// origin at a corner, keeping element `(i, j)` when `keep(i, j)`. Node ids
/// are `j (nx + 1) + i + 1`; element ids count kept elements from 1. Nodes
/// not used by a kept element are dropped.
pub fn grid_mesh(nx: usize, ny: usize, h: f64, keep: impl Fn(usize, usize) -> bool) -> Mesh {
    let node_id = |i: usize, j: usize| j * (nx + 1) + i + 1;
    let mut elements = Vec::new();
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let nodes = vec![node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)];
            for n in &nodes {
                used[n - 1] = true;
            }
            elements.push(Element { id: elements.len() + 1, kind: ElementKind::Quad4, nodes });
        }
    }
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[node_id(i, j) - 1] {
                nodes.push(Node { id: node_id(i, j), coords: [i as f64 * h, j as f64 * h, 0.0] });
            }
        }
    }
    Mesh::new(2, nodes, elements)
}

/// `[0, SIDE]^2` in `CELLS x CELLS` quads with the centre `HOLE x HOLE`
/// block removed.
pub fn demo_mesh() -> Mesh {
    grid_mesh(CELLS, CELLS, SIDE / CELLS as f64, |i, j| !in_centre(i, j, HOLE))
}

/// Square lattice rotated by 45 degrees and centred on the domain. Sites
/// sit at `centre + (p - (n-1)/2) s` for `p, q < per_axis` with `p + q`
/// even and `s = r0 / sqrt 2`.
pub fn lattice_patch(r0: f64, per_axis: usize) -> Result<AtomSet> {
    let s = r0 / 2f64.sqrt();
    let offset = (per_axis as f64 - 1.0) / 2.0;
    let mut positions = Vec::new();
    for q in 0..per_axis {
        for p in 0..per_axis {
            if (p + q) % 2 == 0 {
                positions.push([SIDE / 2.0 + (p as f64 - offset) * s, SIDE / 2.0 + (q as f64 - offset) * s, 0.0]);
            }
        }
    }
    let n = positions.len();
    AtomSet::new(2, (1..=n).collect(), positions, vec![1.0; n])
}

/// Number of lattice sites per axis that fits inside a centred square of
/// side `width`.
fn sites_within(r0: f64, width: f64) -> usize {
    let s = r0 / 2f64.sqrt();
    (width / s).floor() as usize + 1
}

/// Atoms filling the MD block (overlap ring plus hole).
pub fn demo_atoms(r0: f64) -> Result<AtomSet> {
    let h = SIDE / CELLS as f64;
    lattice_patch(r0, sites_within(r0, MD_BLOCK as f64 * h - 0.5))
}

/// Atoms filling the whole domain, for the reference run.
pub fn full_md_atoms(r0: f64) -> Result<AtomSet> {
    lattice_patch(r0, sites_within(r0, SIDE - 0.5))
}

pub fn demo_config() -> Config {
    Config { anchors: vec![[SIDE / 2.0, SIDE / 2.0, 0.0]], center: [SIDE / 2.0, SIDE / 2.0, 0.0], ..Config::default() }
}

/// Whether `x` lies in the FE part of the demo mesh, i.e. outside the
/// hole.
pub fn covered_by_mesh(x: &[f64; 3]) -> bool {
    let h = SIDE / CELLS as f64;
    let lo = ((CELLS - HOLE) / 2) as f64 * h;
    let hi = lo + HOLE as f64 * h;
    !((lo..=hi).contains(&x[0]) && (lo..=hi).contains(&x[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let mesh = demo_mesh();
        assert_eq!(mesh.elements.len(), CELLS * CELLS - HOLE * HOLE);
        let r0 = crate::lattice::PairPotential::default().r0;
        assert_eq!(demo_atoms(r0).unwrap().len(), 1458);
        assert_eq!(full_md_atoms(r0).unwrap().len(), 6498);
    }
}
