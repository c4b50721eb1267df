//! Linear shape functions, their parametric gradients, and quadrature rules.
//!
//! Corner conventions (normative for connectivity ordering):
//!
//! * quad4: node 1 at (1, 1), node 2 at (-1, 1), node 3 at (-1, -1), node 4 at (1, -1)
//! * hex8: nodes 1-4 on the face zeta = -1 at (-1,-1), (1,-1), (1,1), (-1,1),
//!   nodes 5-8 the same on zeta = +1
//! * tri3 / tet4: iso coordinates are the barycentric weights of nodes in order

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::types::{ElementKind, IsoCoords, Point};

pub const QUAD4_XI: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
pub const QUAD4_ETA: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

pub const HEX8_XI: [f64; 8] = [-1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
pub const HEX8_ETA: [f64; 8] = [-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
pub const HEX8_ZETA: [f64; 8] = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];

/// Shape function values at `iso`, one per element node.
pub fn element_shape_values(kind: ElementKind, iso: &IsoCoords) -> Result<Vec<f64>> {
    if iso.kind != kind {
        return Err(Error::KindMismatch { kind: kind.to_string(), iso_kind: iso.kind.to_string() });
    }
    let v = iso.values();
    Ok(match kind {
        ElementKind::Bar2 => vec![0.5 * (1.0 - v[0]), 0.5 * (1.0 + v[0])],
        ElementKind::Tri3 | ElementKind::Tet4 => v.to_vec(),
        ElementKind::Quad4 => (0..4).map(|i| 0.25 * (1.0 + QUAD4_XI[i] * v[0]) * (1.0 + QUAD4_ETA[i] * v[1])).collect(),
        ElementKind::Hex8 => (0..8)
            .map(|i| 0.125 * (1.0 + HEX8_XI[i] * v[0]) * (1.0 + HEX8_ETA[i] * v[1]) * (1.0 + HEX8_ZETA[i] * v[2]))
            .collect(),
    })
}

/// Corner iso coordinates of node `k`.
pub fn corner_iso(kind: ElementKind, k: usize) -> IsoCoords {
    match kind {
        ElementKind::Bar2 => IsoCoords::bar2(if k == 0 { -1.0 } else { 1.0 }),
        ElementKind::Tri3 => {
            let mut w = [0.0; 3];
            w[k] = 1.0;
            IsoCoords::tri3(w[0], w[1])
        }
        ElementKind::Quad4 => IsoCoords::quad4(QUAD4_XI[k], QUAD4_ETA[k]),
        ElementKind::Tet4 => {
            let mut w = [0.0; 4];
            w[k] = 1.0;
            IsoCoords::tet4(w[0], w[1], w[2])
        }
        ElementKind::Hex8 => IsoCoords::hex8(HEX8_XI[k], HEX8_ETA[k], HEX8_ZETA[k]),
    }
}

/// Number of independent parametric directions (equals the element dimension).
fn param_dim(kind: ElementKind) -> usize {
    kind.dim()
}

/// Derivatives of each shape function with respect to the independent
/// parameters: `grads[node][param]`. For simplices the last weight is the
/// dependent one.
pub fn shape_param_gradients(kind: ElementKind, iso: &IsoCoords) -> Vec<[f64; 3]> {
    let v = iso.values();
    match kind {
        ElementKind::Bar2 => vec![[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]],
        ElementKind::Tri3 => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, -1.0, 0.0]],
        ElementKind::Tet4 => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -1.0, -1.0]],
        ElementKind::Quad4 => (0..4)
            .map(|i| {
                let (a, b) = (QUAD4_XI[i], QUAD4_ETA[i]);
                [0.25 * a * (1.0 + b * v[1]), 0.25 * b * (1.0 + a * v[0]), 0.0]
            })
            .collect(),
        ElementKind::Hex8 => (0..8)
            .map(|i| {
                let (a, b, c) = (HEX8_XI[i], HEX8_ETA[i], HEX8_ZETA[i]);
                let (fa, fb, fc) = (1.0 + a * v[0], 1.0 + b * v[1], 1.0 + c * v[2]);
                [0.125 * a * fb * fc, 0.125 * b * fa * fc, 0.125 * c * fa * fb]
            })
            .collect(),
    }
}

/// Forward iso-parametric map: physical position of `iso` in the element.
pub fn forward_map(kind: ElementKind, coords: &[Point], iso: &IsoCoords) -> Result<Point> {
    let n = element_shape_values(kind, iso)?;
    let mut x = [0.0; 3];
    for (w, c) in n.iter().zip(coords) {
        for d in 0..3 {
            x[d] += w * c[d];
        }
    }
    Ok(x)
}

/// Shape function gradients in physical coordinates plus the Jacobian
/// determinant at `iso`.
pub fn physical_gradients(kind: ElementKind, coords: &[Point], iso: &IsoCoords) -> Result<(Vec<[f64; 3]>, f64)> {
    let dim = param_dim(kind);
    let g = shape_param_gradients(kind, iso);
    // jac[a][p] = d x_a / d param_p
    let mut jac = Matrix3::<f64>::identity();
    for a in 0..dim {
        for p in 0..dim {
            jac[(a, p)] = g.iter().zip(coords).map(|(gi, c)| gi[p] * c[a]).sum();
        }
    }
    let det = jac.determinant();
    if det.abs() < 1e-300 {
        return Err(Error::DegenerateElement(format!("zero Jacobian in {kind}")));
    }
    let inv = jac.try_inverse().ok_or_else(|| Error::DegenerateElement(format!("singular Jacobian in {kind}")))?;
    let grads = g
        .iter()
        .map(|gi| {
            let dp = Vector3::new(gi[0], gi[1], gi[2]);
            // dN/dx_a = sum_p dN/dparam_p * dparam_p/dx_a
            let dx = inv.transpose() * dp;
            let mut out = [0.0; 3];
            out[..dim].copy_from_slice(&dx.as_slice()[..dim]);
            out
        })
        .collect();
    Ok((grads, det))
}

/// Gauss rule used for stiffness/conduction: 2 points per axis on
/// quad4/hex8, 1 point on tri3, 4 points on tet4.
pub fn quadrature(kind: ElementKind) -> Vec<(IsoCoords, f64)> {
    let g = 1.0 / 3f64.sqrt();
    match kind {
        ElementKind::Bar2 => vec![(IsoCoords::bar2(-g), 1.0), (IsoCoords::bar2(g), 1.0)],
        ElementKind::Tri3 => vec![(IsoCoords::tri3(1.0 / 3.0, 1.0 / 3.0), 0.5)],
        ElementKind::Quad4 => {
            let mut q = Vec::with_capacity(4);
            for &b in &[-g, g] {
                for &a in &[-g, g] {
                    q.push((IsoCoords::quad4(a, b), 1.0));
                }
            }
            q
        }
        ElementKind::Tet4 => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            vec![
                (IsoCoords::tet4(a, b, b), 1.0 / 24.0),
                (IsoCoords::tet4(b, a, b), 1.0 / 24.0),
                (IsoCoords::tet4(b, b, a), 1.0 / 24.0),
                (IsoCoords::tet4(b, b, b), 1.0 / 24.0),
            ]
        }
        ElementKind::Hex8 => {
            let mut q = Vec::with_capacity(8);
            for &c in &[-g, g] {
                for &b in &[-g, g] {
                    for &a in &[-g, g] {
                        q.push((IsoCoords::hex8(a, b, c), 1.0));
                    }
                }
            }
            q
        }
    }
}

/// Rule exact for products of two shape functions (consistent mass).
pub fn mass_quadrature(kind: ElementKind) -> Vec<(IsoCoords, f64)> {
    match kind {
        ElementKind::Tri3 => vec![
            (IsoCoords::tri3(0.5, 0.5), 1.0 / 6.0),
            (IsoCoords::tri3(0.0, 0.5), 1.0 / 6.0),
            (IsoCoords::tri3(0.5, 0.0), 1.0 / 6.0),
        ],
        other => quadrature(other),
    }
}
