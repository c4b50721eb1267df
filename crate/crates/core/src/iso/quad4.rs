//! Inverse bilinear map for quad4 by Hua's eight-way case split.
//!
//! With the corner convention of [`crate::shape`] the forward map reads
//! `d1 = b1 xi + c1 eta + a1 xi eta` and `d2 = b2 xi + c2 eta + a2 xi eta`,
//! where `d = 4 x - sum(X)`. Which coefficients vanish decides whether xi is
//! found linearly or from a quadratic.
//!
//! Three printed formulas disagree with that forward map and are corrected
//! here (each branch is pinned by a forward-map round-trip test):
//! case 1 denominator `b1 c2 - b2 c1`, case 4 denominator `b1 c2 + a1 d2`,
//! and case 6 numerator `d2 a_c - c2 a_d`.

use crate::error::{Error, Result};
use crate::types::{IsoCoords, Point, Status};

use super::{in_out_status, DEGENERACY, IN_OUT_TOL};

/// Relative threshold for classifying a coefficient as zero when selecting
/// the case.
const CASE_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadInverseCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl QuadInverseCoefficients {
    pub fn new(nodes: &[Point; 4], p: Point) -> Self {
        let x: [f64; 4] = std::array::from_fn(|i| nodes[i][0]);
        let y: [f64; 4] = std::array::from_fn(|i| nodes[i][1]);
        QuadInverseCoefficients {
            a1: x[0] - x[1] + x[2] - x[3],
            a2: y[0] - y[1] + y[2] - y[3],
            b1: x[0] - x[1] - x[2] + x[3],
            b2: y[0] - y[1] - y[2] + y[3],
            c1: x[0] + x[1] - x[2] - x[3],
            c2: y[0] + y[1] - y[2] - y[3],
            d1: 4.0 * p[0] - x.iter().sum::<f64>(),
            d2: 4.0 * p[1] - y.iter().sum::<f64>(),
        }
    }

    pub fn ab(&self) -> f64 {
        self.a2 * self.b1 - self.a1 * self.b2
    }

    pub fn ac(&self) -> f64 {
        self.a2 * self.c1 - self.a1 * self.c2
    }

    pub fn ad(&self) -> f64 {
        self.a2 * self.d1 - self.a1 * self.d2
    }

    /// Element length scale (4x the half-edge vectors).
    fn scale(&self) -> f64 {
        [self.a1, self.a2, self.b1, self.b2, self.c1, self.c2].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Which of the eight closed-form branches produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HuaCase(pub u8);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadInverse {
    pub iso: IsoCoords,
    pub status: Status,
    pub case: HuaCase,
}

/// Selects the branch from the zero pattern of `a1, a2, c1, b2, a_b, a_c`.
pub fn select_case(k: &QuadInverseCoefficients) -> HuaCase {
    let tol = CASE_ZERO * k.scale();
    let tol2 = tol * k.scale();
    let zero = |v: f64| v.abs() <= tol;
    let case = match (zero(k.a1), zero(k.a2)) {
        (true, true) => 1,
        (true, false) => {
            if zero(k.c1) {
                2
            } else {
                3
            }
        }
        (false, true) => {
            if zero(k.b2) {
                4
            } else {
                5
            }
        }
        (false, false) => {
            if k.ab().abs() <= tol2 {
                6
            } else if k.ac().abs() <= tol2 {
                7
            } else {
                8
            }
        }
    };
    HuaCase(case)
}

/// Real roots of `a x^2 + b x + c = 0`, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let mag = a.abs().max(b.abs()).max(c.abs());
    if mag == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * mag {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc >= -1e-12 * b * b.max(4.0 * (a * c).abs()) {
            disc = 0.0;
        } else {
            return Vec::new();
        }
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

fn checked_div(num: f64, den: f64, floor: f64) -> Result<f64> {
    if den.abs() <= floor {
        Err(Error::FoldSingularity)
    } else {
        Ok(num / den)
    }
}

fn excess(v: f64) -> f64 {
    (v.abs() - 1.0).max(0.0)
}

/// Picks the root pair lying in [-1, 1]^2. No admissible pair means the point
/// is outside; the pair closest to the reference square is then returned.
fn choose(candidates: Vec<(f64, f64)>) -> Result<((f64, f64), Status)> {
    let finite: Vec<(f64, f64)> = candidates.into_iter().filter(|(x, e)| x.is_finite() && e.is_finite()).collect();
    let admissible: Vec<(f64, f64)> =
        finite.iter().copied().filter(|&(x, e)| in_out_status(&IsoCoords::quad4(x, e)) == Status::In).collect();
    match admissible.as_slice() {
        [one] => Ok((*one, Status::In)),
        [a, b] => {
            if (a.0 - b.0).abs() <= IN_OUT_TOL && (a.1 - b.1).abs() <= IN_OUT_TOL {
                Ok((*a, Status::In))
            } else {
                Err(Error::AmbiguousRoots([a.0, a.1], [b.0, b.1]))
            }
        }
        _ => finite
            .into_iter()
            .min_by(|p, q| {
                let ep = excess(p.0).max(excess(p.1));
                let eq = excess(q.0).max(excess(q.1));
                ep.total_cmp(&eq)
            })
            .map(|pair| (pair, Status::Out))
            .ok_or(Error::FoldSingularity),
    }
}

/// Inverse map of a point against a convex quad4.
pub fn inverse_map_quad4(nodes: &[Point; 4], p: Point) -> Result<QuadInverse> {
    let k = QuadInverseCoefficients::new(nodes, p);
    let scale = k.scale();
    let area2 = k.b1 * k.c2 - k.b2 * k.c1;
    if scale == 0.0 || area2.abs() <= DEGENERACY * scale * scale {
        return Err(Error::DegenerateElement("quad4 with zero area".into()));
    }
    let floor = DEGENERACY * scale * scale;
    let QuadInverseCoefficients { a1, a2, b1, b2, c1, c2, d1, d2 } = k;
    let case = select_case(&k);

    let candidates: Vec<(f64, f64)> = match case.0 {
        1 => {
            let den = b1 * c2 - b2 * c1;
            vec![(checked_div(d1 * c2 - d2 * c1, den, floor)?, checked_div(b1 * d2 - b2 * d1, den, floor)?)]
        }
        2 => {
            let xi = checked_div(d1, b1, DEGENERACY * scale)?;
            vec![(xi, checked_div(b1 * d2 - b2 * d1, a2 * d1 + b1 * c2, floor)?)]
        }
        3 => quadratic_roots(a2 * b1, c2 * b1 - a2 * d1 - b2 * c1, d2 * c1 - c2 * d1)
            .into_iter()
            .map(|xi| (xi, (d1 - b1 * xi) / c1))
            .collect(),
        4 => {
            let eta = checked_div(d2, c2, DEGENERACY * scale)?;
            vec![(checked_div(d1 * c2 - c1 * d2, b1 * c2 + a1 * d2, floor)?, eta)]
        }
        5 => {
            if c2.abs() <= CASE_ZERO * scale {
                // y depends on xi alone
                let xi = d2 / b2;
                vec![(xi, checked_div(d1 - b1 * xi, c1 + a1 * xi, DEGENERACY * scale)?)]
            } else {
                quadratic_roots(a1 * b2, c1 * b2 - a1 * d2 - b1 * c2, d1 * c2 - c1 * d2)
                    .into_iter()
                    .map(|xi| (xi, (d2 - b2 * xi) / c2))
                    .collect()
            }
        }
        6 => {
            let (ac, ad) = (k.ac(), k.ad());
            let eta = checked_div(ad, ac, floor)?;
            let xi = checked_div(d2 * ac - c2 * ad, b2 * ac + a2 * ad, floor * scale)?;
            vec![(xi, eta)]
        }
        7 => {
            let (ab, ad) = (k.ab(), k.ad());
            let xi = checked_div(ad, ab, floor)?;
            let eta = checked_div(d2 * ab - b2 * ad, c2 * ab + a2 * ad, floor * scale)?;
            vec![(xi, eta)]
        }
        _ => {
            let (ab, ac, ad) = (k.ab(), k.ac(), k.ad());
            quadratic_roots(a2 * ab, c2 * ab - a2 * ad - b2 * ac, d2 * ac - c2 * ad)
                .into_iter()
                .map(|xi| (xi, (ad - ab * xi) / ac))
                .collect()
        }
    };

    let ((xi, eta), status) = choose(candidates)?;
    Ok(QuadInverse { iso: IsoCoords::quad4(xi, eta), status, case })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::forward_map;
    use crate::types::ElementKind;

    fn unit_square() -> [Point; 4] {
        [[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
    }

    fn roundtrip(nodes: &[Point; 4], xi: f64, eta: f64) -> QuadInverse {
        let p = forward_map(ElementKind::Quad4, nodes, &IsoCoords::quad4(xi, eta)).unwrap();
        let inv = inverse_map_quad4(nodes, p).unwrap();
        let v = inv.iso.values();
        assert!((v[0] - xi).abs() < 1e-12 && (v[1] - eta).abs() < 1e-12, "{inv:?} vs ({xi},{eta})");
        inv
    }

    #[test]
    fn unit_square_is_case_one() {
        let inv = inverse_map_quad4(&unit_square(), [0.75, 0.5, 0.0]).unwrap();
        assert_eq!(inv.case, HuaCase(1));
        assert_eq!(inv.iso.values(), &[0.5, 0.0]);
        assert_eq!(inv.status, Status::In);
    }

    #[test]
    fn corner_average_maps_to_center() {
        let nodes = [[2.0, 1.5, 0.0], [-0.3, 1.0, 0.0], [0.1, -0.4, 0.0], [1.7, 0.2, 0.0]];
        let c = [nodes.iter().map(|n| n[0]).sum::<f64>() / 4.0, nodes.iter().map(|n| n[1]).sum::<f64>() / 4.0, 0.0];
        let inv = inverse_map_quad4(&nodes, c).unwrap();
        assert!(inv.iso.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn vertical_sided_trapezoid_is_case_two() {
        let nodes = [[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert_eq!(roundtrip(&nodes, 0.3, -0.6).case, HuaCase(2));
    }

    #[test]
    fn printed_case_four_denominator_fails_round_trip() {
        // a2 = b2 = 0: horizontal parallel sides.
        let nodes = [[2.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let (xi, eta) = (0.4, 0.7);
        assert_eq!(roundtrip(&nodes, xi, eta).case, HuaCase(4));
        let p = forward_map(ElementKind::Quad4, &nodes, &IsoCoords::quad4(xi, eta)).unwrap();
        let k = QuadInverseCoefficients::new(&nodes, p);
        let printed = (k.d1 * k.c2 - k.c1 * k.d2) / (k.a1 * k.b2 + k.b1 * k.c2);
        assert!((printed - xi).abs() > 0.1);
    }

    #[test]
    fn outside_point_is_out() {
        let inv = inverse_map_quad4(&unit_square(), [1.5, 0.5, 0.0]).unwrap();
        assert_eq!(inv.status, Status::Out);
    }

    #[test]
    fn degenerate_quad_is_rejected() {
        let nodes = [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0], [4.0, 0.0, 0.0]];
        assert!(inverse_map_quad4(&nodes, [0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn stable_quadratic() {
        let r = quadratic_roots(1.0, -3.0, 2.0);
        assert!(r.contains(&1.0) && r.contains(&2.0));
        let r = quadratic_roots(1e-20, 2.0, -1.0);
        assert_eq!(r, vec![0.5]);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
    }
}
