//! Uniform cell grid that limits atom-in-element tests to nearby atoms.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::iso::invert;
use crate::types::{AtomSet, ElementLocation, Mesh, Point, Status};

pub type CellKey = [i64; 3];

/// Integer cell coordinates `floor(x_i / l_i)`; unused axes map to 0.
pub fn cell_coords(x: &Point, cell_size: &[f64]) -> CellKey {
    let mut key = [0; 3];
    for (axis, l) in cell_size.iter().enumerate().take(3) {
        key[axis] = (x[axis] / l).floor() as i64;
    }
    key
}

#[derive(Debug, Clone)]
pub struct CellGrid {
    cell_size: Vec<f64>,
    node_count: usize,
    atom_count: usize,
    nodes: HashMap<CellKey, Vec<usize>>,
    atoms: HashMap<CellKey, Vec<usize>>,
}

impl CellGrid {
    /// Bins mesh nodes (by id) and atoms (by index). Each cell length must
    /// cover the largest element extent on its axis, so an element never
    /// spans more than two cells per axis.
    pub fn new(mesh: &Mesh, atoms: &AtomSet, cell_size: &[f64]) -> Result<Self> {
        if cell_size.len() != mesh.dim {
            return Err(Error::GridMismatch(format!("{} cell lengths for a {}D mesh", cell_size.len(), mesh.dim)));
        }
        if cell_size.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::GridMismatch("cell lengths must be positive".into()));
        }
        let extent = mesh.max_element_extent();
        for (axis, &l) in cell_size.iter().enumerate() {
            if l < extent[axis] {
                return Err(Error::GridMismatch(format!(
                    "cell length {l} on axis {axis} is below the largest element extent {}",
                    extent[axis]
                )));
            }
        }
        let mut nodes: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for n in &mesh.nodes {
            nodes.entry(cell_coords(&n.coords, cell_size)).or_default().push(n.id);
        }
        let mut atom_bins: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for (i, p) in atoms.positions.iter().enumerate() {
            atom_bins.entry(cell_coords(p, cell_size)).or_default().push(i);
        }
        Ok(CellGrid {
            cell_size: cell_size.to_vec(),
            node_count: mesh.nodes.len(),
            atom_count: atoms.len(),
            nodes,
            atoms: atom_bins,
        })
    }

    pub fn cell_size(&self) -> &[f64] {
        &self.cell_size
    }

    pub fn nodes_in(&self, key: &CellKey) -> &[usize] {
        self.nodes.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn atoms_in(&self, key: &CellKey) -> &[usize] {
        self.atoms.get(key).map_or(&[], Vec::as_slice)
    }

    /// Atom indices in every cell of the box spanned by the cells of an
    /// element's nodes.
    ///
    /// Only the cells holding a node are not enough: a triangle with nodes in
    /// cells (0,0), (1,0), (0,1) can cover part of cell (1,1).
    fn candidates(&self, node_coords: &[Point]) -> Vec<usize> {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for c in node_coords {
            let k = cell_coords(c, &self.cell_size);
            for d in 0..3 {
                lo[d] = lo[d].min(k[d]);
                hi[d] = hi[d].max(k[d]);
            }
        }
        let mut out = Vec::new();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    out.extend_from_slice(self.atoms_in(&[x, y, z]));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Status of atom `p` against one element, treating fold singularities as
/// outside: a convex element never contains points on its fold line.
fn classify(mesh: &Mesh, element: usize, coords: &[Point], p: Point, atom: usize) -> Result<Option<ElementLocation>> {
    let kind = mesh.elements[element].kind;
    match invert(kind, coords, p) {
        Ok(inv) if inv.status == Status::In => {
            Ok(Some(ElementLocation { atom, element: mesh.elements[element].id, iso: inv.iso, status: Status::In }))
        }
        Ok(_) | Err(Error::FoldSingularity) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Cell-localized search. Elements are visited in ascending id and an atom
/// found inside one is not tested again, so shared-face atoms go to the
/// lowest-id element. Returns only atoms with status in, sorted by atom.
pub fn locate_atoms(mesh: &Mesh, atoms: &AtomSet, grid: &CellGrid) -> Result<Vec<ElementLocation>> {
    if grid.node_count != mesh.nodes.len() || grid.atom_count != atoms.len() {
        return Err(Error::GridMismatch("grid was built for a different mesh or atom set".into()));
    }
    let mut available = vec![true; atoms.len()];
    let mut found = Vec::new();
    for (ei, element) in mesh.elements.iter().enumerate() {
        let coords = mesh.element_coords(element)?;
        for a in grid.candidates(&coords) {
            if !available[a] {
                continue;
            }
            if let Some(loc) = classify(mesh, ei, &coords, atoms.positions[a], a)? {
                available[a] = false;
                found.push(loc);
            }
        }
    }
    found.sort_by_key(|l| l.atom);
    Ok(found)
}

/// All-pairs reference: each atom goes to the first element (by id) that
/// contains it.
pub fn locate_atoms_brute_force(mesh: &Mesh, atoms: &AtomSet) -> Result<Vec<ElementLocation>> {
    let coords = mesh.elements.iter().map(|e| mesh.element_coords(e)).collect::<Result<Vec<_>>>()?;
    let mut found = Vec::new();
    for (a, &p) in atoms.positions.iter().enumerate() {
        for (ei, c) in coords.iter().enumerate() {
            if let Some(loc) = classify(mesh, ei, c, p, a)? {
                found.push(loc);
                break;
            }
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Element, ElementKind, Node};

    #[test]
    fn floor_coordinates() {
        assert_eq!(cell_coords(&[2.5, 3.1, 0.0], &[1.0, 1.0]), [2, 3, 0]);
        assert_eq!(cell_coords(&[-0.5, 0.0, 0.0], &[1.0, 1.0]), [-1, 0, 0]);
        assert_eq!(cell_coords(&[5.2, 7.9, 0.4], &[2.0, 2.0, 2.0]), [2, 3, 0]);
    }

    fn single(kind: ElementKind, pts: &[[f64; 2]]) -> Mesh {
        let nodes = pts.iter().enumerate().map(|(i, p)| Node { id: i + 1, coords: [p[0], p[1], 0.0] }).collect();
        let element = Element { id: 1, kind, nodes: (1..=pts.len()).collect() };
        Mesh::new(2, nodes, vec![element])
    }

    #[test]
    fn unit_quad_center() {
        let mesh = single(ElementKind::Quad4, &[[1.0, 1.0], [0.0, 1.0], [0.0, 0.0], [1.0, 0.0]]);
        let atoms = AtomSet::new(2, vec![0, 1], vec![[0.5, 0.5, 0.0], [9.0, 9.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let grid = CellGrid::new(&mesh, &atoms, &[1.0, 1.0]).unwrap();
        let loc = locate_atoms(&mesh, &atoms, &grid).unwrap();
        assert_eq!(loc.len(), 1);
        assert_eq!(loc[0].atom, 0);
        assert_eq!(loc[0].iso.values(), &[0.0, 0.0]);
    }

    #[test]
    fn atom_in_node_free_cell_is_found() {
        let mesh = single(ElementKind::Tri3, &[[0.99, 0.99], [1.9, 0.99], [0.99, 1.9]]);
        // midpoint of the long edge, pulled slightly inside; its cell holds no node
        let atoms = AtomSet::new(2, vec![0], vec![[1.44, 1.44, 0.0]], vec![1.0]).unwrap();
        let grid = CellGrid::new(&mesh, &atoms, &[1.0, 1.0]).unwrap();
        assert_eq!(cell_coords(&atoms.positions[0], &[1.0, 1.0]), [1, 1, 0]);
        assert!(mesh.elements[0]
            .nodes
            .iter()
            .all(|&n| { cell_coords(&mesh.node(n).unwrap().coords, &[1.0, 1.0]) != [1, 1, 0] }));
        assert_eq!(locate_atoms(&mesh, &atoms, &grid).unwrap().len(), 1);
    }

    #[test]
    fn undersized_cells_are_rejected() {
        let mesh = single(ElementKind::Quad4, &[[2.0, 2.0], [0.0, 2.0], [0.0, 0.0], [2.0, 0.0]]);
        let atoms = AtomSet::new(2, vec![], vec![], vec![]).unwrap();
        assert!(matches!(CellGrid::new(&mesh, &atoms, &[1.0, 1.0]), Err(Error::GridMismatch(_))));
    }
}
