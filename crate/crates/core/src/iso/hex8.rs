//! Inverse trilinear map for hex8: Yuan's third-order series, then Newton.
//!
//! With `x' = x - mean(X)` the forward map is
//! `x' = e1 xi + e2 eta + e3 zeta + e4 eta zeta + e5 xi zeta + e6 xi eta + e7 xi eta zeta`.
//! Multiplying by `J^-1` gives
//! `xbar_k = xi_k + A_k eta zeta + B_k xi zeta + D_k xi eta + C_k xi eta zeta`, whose coefficients are the `P_ijk` triple products.
//! Reverting that series to third order yields the `G1`/`G2` tensors. Both
//! are treated as symmetric in their trailing indices, as the `1/2` and `1/6`
//! prefactors require.
//!
//! Two printed entries disagree with the reversion and are listed in
//! [`ERRATA`]. [`TableVariant::AsPrinted`] rebuilds the printed tables so
//! tests can show the difference.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::shape::{forward_map, shape_param_gradients, HEX8_ETA, HEX8_XI, HEX8_ZETA};
use crate::types::{ElementKind, IsoCoords, Point, Status};

use super::{element_scale, in_out_status, DEGENERACY};

const MAX_NEWTON: usize = 20;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableVariant {
    Corrected,
    AsPrinted,
}

/// A printed tensor entry replaced by its re-derived value.
#[derive(Debug, Clone, Copy)]
pub struct Erratum {
    pub entry: &'static str,
    pub printed: &'static str,
    pub corrected: &'static str,
}

pub const ERRATA: [Erratum; 2] = [
    Erratum { entry: "G1_323", printed: "P623", corrected: "P124" },
    Erratum { entry: "G2_2223", printed: "-2(P163 P423 + P143 P143)", corrected: "-2(P163 P423 + P143 P124)" },
];

#[derive(Debug, Clone)]
pub struct HexInverseTables {
    /// `e[k]` holds `(a_{k+1}, b_{k+1}, c_{k+1})`.
    pub e: [Vector3<f64>; 7],
    pub e123: f64,
    pub jacobian: Matrix3<f64>,
    pub center: Point,
    pub g1: [[[f64; 3]; 3]; 3],
    pub g2: [[[[f64; 3]; 3]; 3]; 3],
}

impl HexInverseTables {
    pub fn new(nodes: &[Point; 8], variant: TableVariant) -> Result<Self> {
        let patterns: [[f64; 8]; 7] = std::array::from_fn(|k| {
            std::array::from_fn(|i| {
                let (x, y, z) = (HEX8_XI[i], HEX8_ETA[i], HEX8_ZETA[i]);
                [x, y, z, y * z, x * z, x * y, x * y * z][k]
            })
        });
        let e: [Vector3<f64>; 7] = std::array::from_fn(|k| {
            let mut v = Vector3::zeros();
            for (i, node) in nodes.iter().enumerate() {
                for d in 0..3 {
                    v[d] += patterns[k][i] * node[d] / 8.0;
                }
            }
            v
        });
        let e123 = e[0].dot(&e[1].cross(&e[2]));
        let scale = element_scale(nodes);
        if e123.abs() <= DEGENERACY * scale.powi(3) {
            return Err(Error::DegenerateElement("hex8 with singular Jacobian".into()));
        }
        let mut center = [0.0; 3];
        for n in nodes {
            for d in 0..3 {
                center[d] += n[d] / 8.0;
            }
        }
        let jacobian = Matrix3::from_columns(&[e[0], e[1], e[2]]);
        // 1-based indices to match the P_ijk notation
        let p = |i: usize, j: usize, k: usize| e[i - 1].dot(&e[j - 1].cross(&e[k - 1])) / e123;

        let a = [p(4, 2, 3), p(1, 4, 3), p(1, 2, 4)];
        let b = [p(5, 2, 3), p(1, 5, 3), p(1, 2, 5)];
        let d = [p(6, 2, 3), p(1, 6, 3), p(1, 2, 6)];
        let c = [p(7, 2, 3), p(1, 7, 3), p(1, 2, 7)];

        let mut g1 = [[[0.0; 3]; 3]; 3];
        let mut g2 = [[[[0.0; 3]; 3]; 3]; 3];
        for k in 0..3 {
            set_sym2(&mut g1[k], 0, 1, d[k]);
            set_sym2(&mut g1[k], 0, 2, b[k]);
            set_sym2(&mut g1[k], 1, 2, a[k]);

            set_sym3(&mut g2[k], [0, 0, 1], -2.0 * (d[k] * d[1] + b[k] * d[2]));
            set_sym3(&mut g2[k], [0, 0, 2], -2.0 * (d[k] * b[1] + b[k] * b[2]));
            set_sym3(&mut g2[k], [1, 1, 0], -2.0 * (d[k] * d[0] + a[k] * d[2]));
            set_sym3(&mut g2[k], [1, 1, 2], -2.0 * (d[k] * a[0] + a[k] * a[2]));
            set_sym3(&mut g2[k], [2, 2, 0], -2.0 * (b[k] * b[0] + a[k] * b[1]));
            set_sym3(&mut g2[k], [2, 2, 1], -2.0 * (b[k] * a[0] + a[k] * a[1]));
            let mixed = b[k] * d[0] + d[k] * b[0] + a[k] * d[1] + d[k] * a[1] + a[k] * b[2] + b[k] * a[2];
            set_sym3(&mut g2[k], [0, 1, 2], c[k] - mixed);
        }
        if variant == TableVariant::AsPrinted {
            set_sym2(&mut g1[2], 1, 2, d[0]);
            set_sym3(&mut g2[1], [1, 1, 2], -2.0 * (d[1] * a[0] + a[1] * a[1]));
        }
        Ok(HexInverseTables { e, e123, jacobian, center, g1, g2 })
    }

    /// Truncated series estimate of the iso coordinates of `p`.
    pub fn series(&self, p: Point) -> Result<[f64; 3]> {
        let shifted = Vector3::new(p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]);
        let inv = self
            .jacobian
            .try_inverse()
            .ok_or_else(|| Error::DegenerateElement("hex8 with singular Jacobian".into()))?;
        let xb = inv * shifted;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut quad = 0.0;
            let mut cubic = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    quad += self.g1[k][i][j] * xb[i] * xb[j];
                    for l in 0..3 {
                        cubic += self.g2[k][i][j][l] * xb[i] * xb[j] * xb[l];
                    }
                }
            }
            *o = xb[k] - quad / 2.0 - cubic / 6.0;
        }
        Ok(out)
    }
}

fn set_sym2(m: &mut [[f64; 3]; 3], i: usize, j: usize, v: f64) {
    m[i][j] = v;
    m[j][i] = v;
}

fn set_sym3(t: &mut [[[f64; 3]; 3]; 3], idx: [usize; 3], v: f64) {
    let [i, j, k] = idx;
    for [a, b, c] in [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
        t[a][b][c] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexInverse {
    pub iso: IsoCoords,
    pub status: Status,
    /// Raw series estimate before refinement.
    pub series: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
}

/// Series estimate refined by Newton iterations on the trilinear map.
pub fn inverse_map_hex8(nodes: &[Point; 8], p: Point) -> Result<HexInverse> {
    let tables = HexInverseTables::new(nodes, TableVariant::Corrected)?;
    let series = tables.series(p)?;
    let tol = NEWTON_TOL * element_scale(nodes);

    let mut xi = series;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let x = forward_map(ElementKind::Hex8, nodes, &IsoCoords::hex8(xi[0], xi[1], xi[2]))?;
        let r = Vector3::new(p[0] - x[0], p[1] - x[1], p[2] - x[2]);
        if r.amax() <= tol {
            converged = true;
            break;
        }
        if iterations == MAX_NEWTON {
            break;
        }
        let g = shape_param_gradients(ElementKind::Hex8, &IsoCoords::hex8(xi[0], xi[1], xi[2]));
        let mut jac = Matrix3::zeros();
        for (gi, c) in g.iter().zip(nodes) {
            for a in 0..3 {
                for q in 0..3 {
                    jac[(a, q)] += gi[q] * c[a];
                }
            }
        }
        let Some(step) = jac.lu().solve(&r) else { break };
        let next = [xi[0] + step[0], xi[1] + step[1], xi[2] + step[2]];
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        xi = next;
        iterations += 1;
    }
    let iso = IsoCoords::hex8(xi[0], xi[1], xi[2]);
    Ok(HexInverse { status: in_out_status(&iso), iso, series, converged, iterations })
}
