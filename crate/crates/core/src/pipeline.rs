//! Preprocessing chain: locate atoms, collect coupling elements and their
//! boundary.

use crate::cells::{locate_atoms, CellGrid};
use crate::config::Config;
use crate::error::Result;
use crate::topology::{coupling_elements, extract_boundary, CouplingMap};
use crate::types::{AtomSet, Mesh};

/// Configured cell lengths, or the largest element extent per axis.
pub fn cell_size(mesh: &Mesh, config: &Config) -> Vec<f64> {
    match &config.cell_size {
        Some(l) => l.clone(),
        None => mesh.max_element_extent()[..mesh.dim].iter().map(|l| l.max(f64::MIN_POSITIVE)).collect(),
    }
}

/// Coupling map without side labels.
pub fn build_coupling_map(mesh: &Mesh, atoms: &AtomSet, cell_size: &[f64]) -> Result<CouplingMap> {
    let grid = CellGrid::new(mesh, atoms, cell_size)?;
    let locations = locate_atoms(mesh, atoms, &grid)?;
    let elements = coupling_elements(&locations);
    let boundary = extract_boundary(&elements, mesh)?;
    Ok(CouplingMap { elements, locations, boundary, sides: Default::default() })
}
