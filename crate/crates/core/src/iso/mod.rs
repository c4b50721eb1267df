//! Closed-form inverse iso-parametric mappings and in/out classification.
//!
//! Every kind has a direct formula: affine for bar2/tri3/tet4, the
//! case-split bilinear inversion for quad4 ([`quad4`]) and a third-order
//! series with Newton refinement for hex8 ([`hex8`]).

pub mod hex8;
pub mod quad4;

use crate::error::{Error, Result};
use crate::types::{ElementKind, IsoCoords, Point, Status};

pub use hex8::{inverse_map_hex8, HexInverse, HexInverseTables, TableVariant};
pub use quad4::{inverse_map_quad4, HuaCase, QuadInverse, QuadInverseCoefficients};

/// Half-width of the band outside the reference element still counted as in.
pub const IN_OUT_TOL: f64 = 1e-9;

/// Relative threshold for singular denominators and determinants.
pub(crate) const DEGENERACY: f64 = 1e-14;

/// Result of inverting a point against one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub iso: IsoCoords,
    pub status: Status,
}

/// In/out status from iso coordinates: box test on [-1, 1] for
/// bar2/quad4/hex8, barycentric [0, 1] test for tri3/tet4. Boundary is in.
pub fn in_out_status(iso: &IsoCoords) -> Status {
    let inside = if iso.kind.is_simplex() {
        iso.values().iter().all(|&w| (-IN_OUT_TOL..=1.0 + IN_OUT_TOL).contains(&w))
    } else {
        iso.values().iter().all(|&w| (-1.0 - IN_OUT_TOL..=1.0 + IN_OUT_TOL).contains(&w))
    };
    if inside {
        Status::In
    } else {
        Status::Out
    }
}

/// Length scale of an element: diagonal of its bounding box.
pub(crate) fn element_scale(coords: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for c in coords {
        for d in 0..3 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
    }
    (0..3).map(|d| (hi[d] - lo[d]).powi(2)).sum::<f64>().sqrt()
}

/// Bar element: `xi = (2x - (X1 + X2)) / (X2 - X1)`.
pub fn inverse_map_bar2(nodes: [f64; 2], x: f64) -> Result<IsoCoords> {
    let len = nodes[1] - nodes[0];
    let magnitude = nodes[0].abs().max(nodes[1].abs()).max(f64::MIN_POSITIVE);
    if len.abs() <= DEGENERACY * magnitude {
        return Err(Error::DegenerateElement("bar2 with coincident nodes".into()));
    }
    Ok(IsoCoords::bar2((2.0 * x - (nodes[0] + nodes[1])) / len))
}

/// Triangle: barycentric weights of nodes 1, 2, 3.
pub fn inverse_map_tri3(nodes: [Point; 3], p: Point) -> Result<IsoCoords> {
    let [x1, y1] = [nodes[0][0], nodes[0][1]];
    let [x2, y2] = [nodes[1][0], nodes[1][1]];
    let [x3, y3] = [nodes[2][0], nodes[2][1]];
    let den = (y2 - y3) * (x1 - x3) - (y3 - y1) * (x3 - x2);
    let scale = element_scale(&nodes);
    if den.abs() <= DEGENERACY * scale * scale {
        return Err(Error::DegenerateElement("zero-area tri3".into()));
    }
    let (dx, dy) = (p[0] - x3, p[1] - y3);
    let xi = (dx * (y2 - y3) + dy * (x3 - x2)) / den;
    let eta = (dx * (y3 - y1) + dy * (x1 - x3)) / den;
    Ok(IsoCoords::tri3(xi, eta))
}

fn det4(m: [[f64; 4]; 4]) -> f64 {
    let mat = nalgebra::Matrix4::from_fn(|i, j| m[i][j]);
    mat.determinant()
}

fn tet_rows(nodes: &[Point; 4]) -> [[f64; 4]; 4] {
    let mut m = [[1.0; 4]; 4];
    for (row, n) in m.iter_mut().zip(nodes) {
        row[..3].copy_from_slice(n);
    }
    m
}

/// Tetrahedron: barycentric weights by Cramer's rule on the 4x4 homogeneous
/// coordinate matrix.
pub fn inverse_map_tet4(nodes: [Point; 4], p: Point) -> Result<IsoCoords> {
    let base = tet_rows(&nodes);
    let det = det4(base);
    let scale = element_scale(&nodes);
    if det.abs() <= DEGENERACY * scale.powi(3) {
        return Err(Error::DegenerateElement("coplanar tet4 nodes".into()));
    }
    let mut w = [0.0; 3];
    for (k, wk) in w.iter_mut().enumerate() {
        let mut m = base;
        m[k] = [p[0], p[1], p[2], 1.0];
        *wk = det4(m) / det;
    }
    Ok(IsoCoords::tet4(w[0], w[1], w[2]))
}

/// Inverts `p` against an element of any kind and classifies it.
pub fn invert(kind: ElementKind, coords: &[Point], p: Point) -> Result<Inversion> {
    if coords.len() != kind.node_count() {
        return Err(Error::InvalidValue(format!("{kind} needs {} nodes, got {}", kind.node_count(), coords.len())));
    }
    let iso = match kind {
        ElementKind::Bar2 => inverse_map_bar2([coords[0][0], coords[1][0]], p[0])?,
        ElementKind::Tri3 => inverse_map_tri3([coords[0], coords[1], coords[2]], p)?,
        ElementKind::Tet4 => inverse_map_tet4([coords[0], coords[1], coords[2], coords[3]], p)?,
        ElementKind::Quad4 => {
            let q = inverse_map_quad4(&[coords[0], coords[1], coords[2], coords[3]], p)?;
            return Ok(Inversion { iso: q.iso, status: q.status });
        }
        ElementKind::Hex8 => {
            let mut c = [[0.0; 3]; 8];
            c.copy_from_slice(coords);
            let h = inverse_map_hex8(&c, p)?;
            return Ok(Inversion { iso: h.iso, status: h.status });
        }
    };
    Ok(Inversion { status: in_out_status(&iso), iso })
}
