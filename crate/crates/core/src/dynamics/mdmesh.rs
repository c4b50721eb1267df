//! Triangulation of the coupling atoms built from lattice bonds.

use std::collections::{BTreeSet, HashSet};

use crate::types::AtomSet;

/// Triangles over atom indices, counter-clockwise.
///
/// Bond 3-cycles are used directly. Lattices without them (square lattices)
/// are split along one diagonal of every bond 4-cycle. Only cells whose
/// corners all satisfy `keep` are returned.
pub fn lattice_triangles(atoms: &AtomSet, keep: impl Fn(usize) -> bool) -> Vec<[usize; 3]> {
    let n = atoms.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in &atoms.pairs {
        adj[i].insert(j);
        adj[j].insert(i);
    }
    let mut tris = Vec::new();
    for i in 0..n {
        for &j in adj[i].range(i + 1..) {
            for &k in adj[j].range(j + 1..) {
                if adj[i].contains(&k) {
                    tris.push([i, j, k]);
                }
            }
        }
    }
    if tris.is_empty() {
        let mut seen = HashSet::new();
        for i in 0..n {
            for &j in &adj[i] {
                for &k in &adj[i] {
                    if k <= j {
                        continue;
                    }
                    for &l in adj[j].intersection(&adj[k]) {
                        if l == i || adj[i].contains(&l) {
                            continue;
                        }
                        let mut key = [i, j, k, l];
                        key.sort_unstable();
                        if seen.insert(key) && key.iter().all(|&a| keep(a)) {
                            // i-j-l-k is the cycle; split along i-l
                            tris.push([i, j, l]);
                            tris.push([i, l, k]);
                        }
                    }
                }
            }
        }
    }
    tris.retain(|t| t.iter().all(|&a| keep(a)));
    for t in &mut tris {
        if signed_area(atoms, t) < 0.0 {
            t.swap(1, 2);
        }
    }
    tris
}

pub fn signed_area(atoms: &AtomSet, t: &[usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| atoms.positions[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_patch_gives_two_triangles_per_cell() {
        let mut pos = Vec::new();
        for y in 0..4 {
            for x in 0..5 {
                pos.push([x as f64, y as f64, 0.0]);
            }
        }
        let n = pos.len();
        let atoms = AtomSet::new(2, (0..n).collect(), pos, vec![1.0; n]).unwrap().with_neighbors_within(1.05);
        let tris = lattice_triangles(&atoms, |_| true);
        assert_eq!(tris.len(), 2 * 4 * 3);
        let area: f64 = tris.iter().map(|t| signed_area(&atoms, t)).sum();
        assert!((area - 12.0).abs() < 1e-12);
    }
}
