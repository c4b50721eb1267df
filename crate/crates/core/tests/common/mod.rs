//! Random element generators and small geometric oracles shared by the
//! integration tests.
#![allow(dead_code)]

use arlequin_core::shape::forward_map;
use arlequin_core::{ElementKind, IsoCoords, Point};
use rand::Rng;

pub const QUAD_XI: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
pub const QUAD_ETA: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

fn vec2(rng: &mut impl Rng, lo: f64, hi: f64) -> [f64; 2] {
    [rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Quad corners from the bilinear coefficients:
/// `X_i = centre + (b xi_i + c eta_i + a xi_i eta_i) / 4`.
pub fn quad_from_coefficients(centre: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [Point; 4] {
    std::array::from_fn(|i| {
        let (x, e) = (QUAD_XI[i], QUAD_ETA[i]);
        [
            centre[0] + (b[0] * x + c[0] * e + a[0] * x * e) / 4.0,
            centre[1] + (b[1] * x + c[1] * e + a[1] * x * e) / 4.0,
            0.0,
        ]
    })
}

/// Jacobian determinant (up to a positive factor) at every corner has the
/// sign of `b x c` and stays away from zero.
fn well_shaped(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let base = cross(b, c);
    if base <= 0.0 {
        return false;
    }
    (0..4).all(|i| {
        let (x, e) = (QUAD_XI[i], QUAD_ETA[i]);
        let col1 = [b[0] + a[0] * e, b[1] + a[1] * e];
        let col2 = [c[0] + a[0] * x, c[1] + a[1] * x];
        cross(col1, col2) > 0.2 * base
    })
}

/// Random convex quad whose bilinear coefficients follow the zero pattern
/// of inversion branch `case` (1..=8).
pub fn random_quad_for_case(case: u8, rng: &mut impl Rng) -> [Point; 4] {
    loop {
        let centre = vec2(rng, -5.0, 5.0);
        let mut b = vec2(rng, -2.0, 2.0);
        let mut c = vec2(rng, -2.0, 2.0);
        let mut a = vec2(rng, -0.8, 0.8);
        match case {
            1 => a = [0.0, 0.0],
            2 => {
                a[0] = 0.0;
                c[0] = 0.0;
            }
            3 => a[0] = 0.0,
            4 => {
                a[1] = 0.0;
                b[1] = 0.0;
            }
            5 => a[1] = 0.0,
            6 => {
                let k = rng.random_range(-0.4..0.4);
                a = [k * b[0], k * b[1]];
            }
            7 => {
                let k = rng.random_range(-0.4..0.4);
                a = [k * c[0], k * c[1]];
            }
            _ => {}
        }
        let nonzero = |v: f64| v.abs() > 0.05;
        let pattern_ok = match case {
            1 => true,
            2 => nonzero(a[1]),
            3 => nonzero(a[1]) && nonzero(c[0]),
            4 => nonzero(a[0]),
            5 => nonzero(a[0]) && nonzero(b[1]),
            6 | 7 => nonzero(a[0]) && nonzero(a[1]),
            _ => nonzero(a[0]) && nonzero(a[1]) && nonzero(cross(a, b)) && nonzero(cross(a, c)),
        };
        if pattern_ok && well_shaped(a, b, c) {
            return quad_from_coefficients(centre, a, b, c);
        }
    }
}

/// Random non-degenerate element of a simplex or bar kind.
pub fn random_simplex(kind: ElementKind, rng: &mut impl Rng) -> Vec<Point> {
    loop {
        let n = kind.node_count();
        let dim = kind.dim();
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for c in p.iter_mut().take(dim) {
                    *c = rng.random_range(-3.0..3.0);
                }
                p
            })
            .collect();
        let ok = match kind {
            ElementKind::Bar2 => (pts[1][0] - pts[0][0]).abs() > 0.3,
            ElementKind::Tri3 => {
                let area = cross(
                    [pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]],
                    [pts[2][0] - pts[0][0], pts[2][1] - pts[0][1]],
                );
                let longest = (0..3)
                    .map(|i| {
                        let (p, q) = (pts[i], pts[(i + 1) % 3]);
                        (p[0] - q[0]).hypot(p[1] - q[1])
                    })
                    .fold(0.0, f64::max);
                area.abs() > 0.1 * longest * longest
            }
            ElementKind::Tet4 => {
                let e = |k: usize| [pts[k][0] - pts[0][0], pts[k][1] - pts[0][1], pts[k][2] - pts[0][2]];
                let (u, v, w) = (e(1), e(2), e(3));
                let vol = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
                    + u[2] * (v[0] * w[1] - v[1] * w[0]);
                vol.abs() > 0.5
            }
            _ => unreachable!("not a simplex kind"),
        };
        if ok {
            return pts;
        }
    }
}

/// Random interior iso coordinates, kept `margin` away from the faces.
pub fn random_interior_iso(kind: ElementKind, margin: f64, rng: &mut impl Rng) -> IsoCoords {
    let lo = -1.0 + margin;
    let hi = 1.0 - margin;
    match kind {
        ElementKind::Bar2 => IsoCoords::bar2(rng.random_range(lo..hi)),
        ElementKind::Quad4 => IsoCoords::quad4(rng.random_range(lo..hi), rng.random_range(lo..hi)),
        ElementKind::Hex8 => {
            IsoCoords::hex8(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
        }
        ElementKind::Tri3 | ElementKind::Tet4 => {
            let n = kind.node_count();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(margin..1.0)).collect();
            let s: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|v| v / s).collect();
            if kind == ElementKind::Tri3 {
                IsoCoords::tri3(w[0], w[1])
            } else {
                IsoCoords::tet4(w[0], w[1], w[2])
            }
        }
    }
}

pub fn forward(kind: ElementKind, nodes: &[Point], iso: &IsoCoords) -> Point {
    forward_map(kind, nodes, iso).expect("forward map")
}

pub fn iso_error(a: &IsoCoords, b: &IsoCoords) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Hex corners of the parallelepiped `origin + xi e1 + eta e2 + zeta e3`
/// over `[-1, 1]^3`, in the shape-function node order.
pub fn parallelepiped(origin: Point, e: [Point; 3]) -> [Point; 8] {
    use arlequin_core::shape::{HEX8_ETA, HEX8_XI, HEX8_ZETA};
    std::array::from_fn(|i| {
        let s = [HEX8_XI[i], HEX8_ETA[i], HEX8_ZETA[i]];
        std::array::from_fn(|d| origin[d] + s[0] * e[0][d] + s[1] * e[1][d] + s[2] * e[2][d])
    })
}

pub fn random_parallelepiped(rng: &mut impl Rng) -> [Point; 8] {
    loop {
        let e: [Point; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        let det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
            + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
        if det > 0.2 {
            let origin = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
            return parallelepiped(origin, e);
        }
    }
}

/// Unit-half-width cube with each corner moved by up to `fraction` of the
/// edge length per axis.
pub fn perturbed_cube(fraction: f64, rng: &mut impl Rng) -> [Point; 8] {
    let mut c = parallelepiped([0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    for p in &mut c {
        for v in p.iter_mut() {
            *v += rng.random_range(-1.0..1.0) * fraction * 2.0;
        }
    }
    c
}

/// Point-in-convex-polygon test with a tolerance band (counter-clockwise
/// corners).
pub fn inside_convex_polygon(corners: &[Point], p: Point, band: f64) -> bool {
    let n = corners.len();
    (0..n).all(|i| {
        let a = corners[i];
        let b = corners[(i + 1) % n];
        let edge = [b[0] - a[0], b[1] - a[1]];
        let len = edge[0].hypot(edge[1]);
        cross(edge, [p[0] - a[0], p[1] - a[1]]) / len >= -band
    })
}
