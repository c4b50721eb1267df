//! Ray intersection with boundary segments and triangles, and selection of
//! the two boundary points bracketing a target.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::types::{sub, Point};

/// Half-band around `t = 1` inside which the target itself is on the boundary.
pub const T_BAND: f64 = 1e-9;
/// Hits closer than this in `t` are the same geometric crossing.
pub const T_MERGE: f64 = 1e-12;

const PARALLEL: f64 = 1e-13;

/// `x(t) = anchor + t (target - anchor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub anchor: Point,
    pub target: Point,
}

impl Ray {
    pub fn new(anchor: Point, target: Point) -> Result<Self> {
        if anchor == target {
            return Err(Error::InvalidValue("ray target coincides with its anchor".into()));
        }
        Ok(Ray { anchor, target })
    }

    pub fn direction(&self) -> Point {
        sub(&self.target, &self.anchor)
    }

    pub fn at(&self, t: f64) -> Point {
        let d = self.direction();
        [self.anchor[0] + t * d[0], self.anchor[1] + t * d[1], self.anchor[2] + t * d[2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub surface: usize,
    pub u: f64,
    pub v: f64,
}

/// Planar primitive of a boundary surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Point(Point),
    Segment([Point; 2]),
    Triangle([Point; 3]),
}

/// Boundary primitives tagged with the index of the surface they came from.
pub type Primitives = [(usize, Primitive)];

/// Solves `[d, p1 - p2] [t; u] = p1 - x_a` in the plane.
pub fn intersect_segment(ray: &Ray, p1: Point, p2: Point) -> Option<Hit> {
    let d = ray.direction();
    let m = Matrix2::new(d[0], p1[0] - p2[0], d[1], p1[1] - p2[1]);
    let rhs = Vector2::new(p1[0] - ray.anchor[0], p1[1] - ray.anchor[1]);
    let scale = (d[0].hypot(d[1])) * (p1[0] - p2[0]).hypot(p1[1] - p2[1]);
    let det = m.determinant();
    if det.abs() <= PARALLEL * scale {
        return None;
    }
    let s = m.lu().solve(&rhs)?;
    let (t, u) = (s[0], s[1]);
    (t > 0.0 && (0.0..=1.0).contains(&u)).then_some(Hit { t, surface: 0, u, v: 0.0 })
}

/// Solves `x_a + t d = p1 + u (p2 - p1) + v (p3 - p1)`.
pub fn intersect_triangle(ray: &Ray, p1: Point, p2: Point, p3: Point) -> Option<Hit> {
    let d = Vector3::from(ray.direction());
    let e1 = Vector3::from(sub(&p2, &p1));
    let e2 = Vector3::from(sub(&p3, &p1));
    let m = Matrix3::from_columns(&[-d, e1, e2]);
    let scale = d.norm() * e1.cross(&e2).norm();
    if m.determinant().abs() <= PARALLEL * scale {
        return None;
    }
    let s = m.lu().solve(&Vector3::from(sub(&ray.anchor, &p1)))?;
    let (t, u, v) = (s[0], s[1], s[2]);
    let ok = t > 0.0 && (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) && u + v <= 1.0;
    ok.then_some(Hit { t, surface: 0, u, v })
}

fn intersect_point(ray: &Ray, p: Point) -> Option<Hit> {
    let d = ray.direction()[0];
    let t = (p[0] - ray.anchor[0]) / d;
    (t > 0.0).then_some(Hit { t, surface: 0, u: 0.0, v: 0.0 })
}

/// Whether the ray runs along the primitive instead of crossing it.
fn runs_along(ray: &Ray, prim: &Primitive) -> bool {
    let d = Vector3::from(ray.direction());
    let a = Vector3::from(ray.anchor);
    match prim {
        Primitive::Point(_) => false,
        Primitive::Segment([p1, p2]) => {
            let e = Vector3::from(sub(p2, p1));
            let cross = |x: &Vector3<f64>, y: &Vector3<f64>| x[0] * y[1] - x[1] * y[0];
            let scale = d.norm() * e.norm();
            let w = Vector3::from(*p1) - a;
            if cross(&d, &e).abs() > PARALLEL * scale || cross(&d, &w).abs() > 1e-12 * scale.max(d.norm() * w.norm()) {
                return false;
            }
            // collinear: does the forward half-line overlap the segment?
            let dd = d.dot(&d);
            let t1 = w.dot(&d) / dd;
            let t2 = (Vector3::from(*p2) - a).dot(&d) / dd;
            t1.max(t2) > 0.0
        }
        Primitive::Triangle(ps) => {
            let e1 = Vector3::from(sub(&ps[1], &ps[0]));
            let e2 = Vector3::from(sub(&ps[2], &ps[0]));
            let n = e1.cross(&e2);
            let scale = n.norm();
            if d.dot(&n).abs() > PARALLEL * scale * d.norm() {
                return false;
            }
            let w = Vector3::from(ps[0]) - a;
            if w.dot(&n).abs() > 1e-12 * scale * w.norm().max(d.norm()) {
                return false;
            }
            // coplanar: test the ray against each edge within the plane
            let (i, j) = dominant_plane(&n);
            let flat = |p: &Point| [p[i], p[j], 0.0];
            let r2 = Ray { anchor: flat(&ray.anchor), target: flat(&ray.target) };
            (0..3).any(|k| intersect_segment(&r2, flat(&ps[k]), flat(&ps[(k + 1) % 3])).is_some())
        }
    }
}

fn dominant_plane(n: &Vector3<f64>) -> (usize, usize) {
    let drop = n.iamax();
    match drop {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Every crossing of the ray with the boundary, sorted by `t`, with
/// crossings at a shared vertex merged.
pub fn ray_hits(ray: &Ray, prims: &Primitives) -> Result<Vec<Hit>> {
    let mut hits = Vec::new();
    for &(surface, prim) in prims {
        if runs_along(ray, &prim) {
            return Err(Error::RayAlongBoundary(surface));
        }
        let hit = match prim {
            Primitive::Point(p) => intersect_point(ray, p),
            Primitive::Segment([p1, p2]) => intersect_segment(ray, p1, p2),
            Primitive::Triangle([p1, p2, p3]) => intersect_triangle(ray, p1, p2, p3),
        };
        if let Some(h) = hit {
            hits.push(Hit { surface, ..h });
        }
    }
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    hits.dedup_by(|b, a| (b.t - a.t).abs() <= T_MERGE);
    Ok(hits)
}

/// Points where the ray enters (MD side) and leaves (FE side) the coupling
/// region around its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoints {
    pub x0: Point,
    pub x1: Point,
    pub t0: f64,
    pub t1: f64,
}

/// `T0` is the largest crossing before the target and `T1` the smallest
/// after it; either falls back to 1 when the target lies on that boundary.
pub fn boundary_points(ray: &Ray, prims: &Primitives) -> Result<BoundaryPoints> {
    let hits = ray_hits(ray, prims)?;
    if hits.is_empty() {
        return Err(Error::BadAnchor {
            anchor: ray.anchor.to_vec(),
            reason: format!("ray towards {:?} never meets the coupling boundary", ray.target),
        });
    }
    let t0 = hits
        .iter()
        .map(|h| h.t)
        .filter(|&t| t < 1.0 - T_BAND)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))));
    let t1 = hits
        .iter()
        .map(|h| h.t)
        .filter(|&t| t > 1.0 + T_BAND)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));
    let t0 = t0.unwrap_or(1.0);
    let t1 = t1.unwrap_or(1.0);
    Ok(BoundaryPoints {
        x0: if t0 == 1.0 { ray.target } else { ray.at(t0) },
        x1: if t1 == 1.0 { ray.target } else { ray.at(t1) },
        t0,
        t1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ray(a: [f64; 3], b: [f64; 3]) -> Ray {
        Ray::new(a, b).unwrap()
    }

    #[test]
    fn perpendicular_segment() {
        let h = intersect_segment(&ray([0.0; 3], [2.0, 0.0, 0.0]), [1.0, -1.0, 0.0], [1.0, 1.0, 0.0]).unwrap();
        assert_eq!((h.t, h.u), (0.5, 0.5));
    }

    #[test]
    fn parallel_segment_misses() {
        assert!(intersect_segment(&ray([0.0; 3], [2.0, 0.0, 0.0]), [3.0, 1.0, 0.0], [4.0, 1.0, 0.0]).is_none());
    }

    #[test]
    fn triangle_on_plane_z1() {
        let h =
            intersect_triangle(&ray([0.0; 3], [0.0, 0.0, 2.0]), [-1.0, -1.0, 1.0], [3.0, -1.0, 1.0], [-1.0, 3.0, 1.0])
                .unwrap();
        assert_eq!((h.t, h.u, h.v), (0.5, 0.25, 0.25));
    }

    #[test]
    fn ray_in_triangle_plane_misses() {
        let r = ray([0.0, 0.0, 1.0], [1.0, 0.0, 1.0]);
        assert!(intersect_triangle(&r, [-1.0, -1.0, 1.0], [3.0, -1.0, 1.0], [-1.0, 3.0, 1.0]).is_none());
        let prims = [(4, Primitive::Triangle([[-1.0, -1.0, 1.0], [3.0, -1.0, 1.0], [-1.0, 3.0, 1.0]]))];
        assert!(matches!(ray_hits(&r, &prims), Err(Error::RayAlongBoundary(4))));
    }

    #[test]
    fn collinear_segment_is_rejected() {
        let prims = [(2, Primitive::Segment([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]))];
        let r = ray([0.0; 3], [2.0, 0.0, 0.0]);
        assert!(matches!(ray_hits(&r, &prims), Err(Error::RayAlongBoundary(2))));
        // behind the anchor is harmless
        let prims = [(2, Primitive::Segment([[-3.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))];
        assert!(ray_hits(&r, &prims).unwrap().is_empty());
    }

    #[test]
    fn shared_vertex_counts_once() {
        let prims = [
            (0, Primitive::Segment([[1.0, -1.0, 0.0], [1.0, 0.0, 0.0]])),
            (1, Primitive::Segment([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])),
        ];
        let hits = ray_hits(&ray([0.0; 3], [2.0, 0.0, 0.0]), &prims).unwrap();
        assert_eq!(hits.len(), 1);
    }

    fn square(h: f64, first: usize) -> Vec<(usize, Primitive)> {
        let c = [[h, h, 0.0], [-h, h, 0.0], [-h, -h, 0.0], [h, -h, 0.0]];
        (0..4).map(|k| (first + k, Primitive::Segment([c[k], c[(k + 1) % 4]]))).collect()
    }

    #[test]
    fn annulus_regular_and_on_boundary_cases() {
        let mut prims = square(1.0, 0);
        prims.extend(square(3.0, 4));
        let bp = boundary_points(&ray([0.0; 3], [2.0, 0.5, 0.0]), &prims).unwrap();
        assert!((bp.t0 - 0.5).abs() < 1e-15 && (bp.t1 - 1.5).abs() < 1e-15);
        // on the FE side
        let bp = boundary_points(&ray([0.0; 3], [3.0, 1.0, 0.0]), &prims).unwrap();
        assert_eq!(bp.t1, 1.0);
        assert!((bp.t0 - 1.0 / 3.0).abs() < 1e-15);
        // on the MD side
        let bp = boundary_points(&ray([0.0; 3], [1.0, 0.2, 0.0]), &prims).unwrap();
        assert_eq!(bp.t0, 1.0);
        assert!((bp.t1 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_hits_is_a_bad_anchor() {
        let prims = square(1.0, 0);
        assert!(matches!(
            boundary_points(&ray([5.0, 5.0, 0.0], [6.0, 5.0, 0.0]), &prims),
            Err(Error::BadAnchor { .. })
        ));
    }
}
