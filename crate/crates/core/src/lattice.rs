//! Lennard-Jones type pair potential, harmonic MD stiffness, and the
//! elastic tensor of the representative lattice.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::types::{norm, AtomSet, Point};

/// `phi(r) = eps [ (n/m) (r0/r)^m - (r0/r)^n ]`, minimum `eps (n/m - 1)` at `r0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPotential {
    pub epsilon: f64,
    pub n: f64,
    pub m: f64,
    pub r0: f64,
}

impl Default for PairPotential {
    fn default() -> Self {
        PairPotential { epsilon: 1.0, n: 6.0, m: 12.0, r0: 1.2405 }
    }
}

impl PairPotential {
    pub fn new(epsilon: f64, n: f64, m: f64, r0: f64) -> Result<Self> {
        if !(m > n && n > 0.0 && r0 > 0.0 && epsilon > 0.0) {
            return Err(Error::InvalidValue(format!(
                "pair potential needs m > n > 0 and positive eps, r0 (got eps={epsilon}, n={n}, m={m}, r0={r0})"
            )));
        }
        Ok(PairPotential { epsilon, n, m, r0 })
    }

    fn check(r: f64) -> Result<()> {
        if r > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidValue(format!("pair distance {r} must be positive")))
        }
    }

    pub fn phi(&self, r: f64) -> Result<f64> {
        Self::check(r)?;
        let s = self.r0 / r;
        Ok(self.epsilon * ((self.n / self.m) * s.powf(self.m) - s.powf(self.n)))
    }

    pub fn phi_prime(&self, r: f64) -> Result<f64> {
        Self::check(r)?;
        let s = self.r0 / r;
        Ok(self.epsilon * self.n / r * (s.powf(self.n) - s.powf(self.m)))
    }

    pub fn phi_double_prime(&self, r: f64) -> Result<f64> {
        Self::check(r)?;
        let s = self.r0 / r;
        Ok(self.epsilon * self.n / (r * r) * ((self.m + 1.0) * s.powf(self.m) - (self.n + 1.0) * s.powf(self.n)))
    }
}

/// Hessian block of one bond with respect to the displacement of its far end:
/// `(phi''/R^2 - phi'/R^3) R (x) R + (phi'/R) I`.
pub fn pair_block(potential: &PairPotential, bond: &Point, dim: usize) -> Result<Matrix3<f64>> {
    let r = norm(bond);
    if r == 0.0 {
        return Err(Error::InvalidValue("zero-length neighbour vector".into()));
    }
    let d1 = potential.phi_prime(r)?;
    let d2 = potential.phi_double_prime(r)?;
    let mut k = Matrix3::zeros();
    for a in 0..dim {
        for b in 0..dim {
            k[(a, b)] = (d2 / (r * r) - d1 / (r * r * r)) * bond[a] * bond[b];
        }
        k[(a, a)] += d1 / r;
    }
    Ok(k)
}

/// Global MD stiffness (dof `dim * i + axis`). Each bond adds its block with
/// the `+, -, -, +` pattern on the `(i, i), (i, j), (j, i), (j, j)` slots.
pub fn md_tangent(atoms: &AtomSet, potential: &PairPotential) -> Result<CsrMatrix> {
    let dim = atoms.dim;
    let mut t = TripletBuilder::new(dim * atoms.len());
    for &(i, j) in &atoms.pairs {
        let k = pair_block(potential, &atoms.bond_vector(i, j), dim)?;
        for a in 0..dim {
            for b in 0..dim {
                let v = k[(a, b)];
                t.add(dim * i + a, dim * i + b, v);
                t.add(dim * j + a, dim * j + b, v);
                t.add(dim * i + a, dim * j + b, -v);
                t.add(dim * j + a, dim * i + b, -v);
            }
        }
    }
    Ok(t.build())
}

/// Total pair energy after displacing atoms by `u` (dof layout of [`md_tangent`]).
pub fn pair_energy(atoms: &AtomSet, potential: &PairPotential, u: &[f64]) -> Result<f64> {
    let dim = atoms.dim;
    let mut e = 0.0;
    for &(i, j) in &atoms.pairs {
        let mut r = atoms.bond_vector(i, j);
        for a in 0..dim {
            r[a] += u[dim * j + a] - u[dim * i + a];
        }
        e += potential.phi(norm(&r))?;
    }
    Ok(e)
}

/// 2D square lattice in the 45-degree orientation with nearest-neighbour
/// bonds of length `r0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub a1: Point,
    pub a2: Point,
    /// Bond vectors summed in the elastic tensor.
    pub representative: Vec<Point>,
    /// Cell volume dividing the bond sum.
    pub cell_volume: f64,
}

impl LatticeSpec {
    pub fn square_45(r0: f64) -> Self {
        let h = r0 / 2f64.sqrt();
        LatticeSpec {
            a1: [h, -h, 0.0],
            a2: [h, h, 0.0],
            representative: vec![[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]],
            cell_volume: r0 * r0 / 2.0,
        }
    }

    pub fn rotated_90(&self) -> Self {
        let rot = |p: &Point| [-p[1], p[0], 0.0];
        LatticeSpec {
            a1: rot(&self.a1),
            a2: rot(&self.a2),
            representative: self.representative.iter().map(rot).collect(),
            cell_volume: self.cell_volume,
        }
    }
}

/// Plane elastic moduli `C_ijkl`, indices in {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticTensor {
    pub c: [[[[f64; 2]; 2]; 2]; 2],
}

impl ElasticTensor {
    /// Voigt matrix in the order (11, 22, 12).
    pub fn voigt(&self) -> [[f64; 3]; 3] {
        let pairs = [(0, 0), (1, 1), (0, 1)];
        let mut m = [[0.0; 3]; 3];
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for (q, &(k, l)) in pairs.iter().enumerate() {
                m[p][q] = self.c[i][j][k][l];
            }
        }
        m
    }
}

/// `C = 1/(2 V) sum_j (phi''/R^2 - phi'/R^3) R_j (x) R_j (x) R_j (x) R_j`.
pub fn elastic_tensor(lattice: &LatticeSpec, potential: &PairPotential) -> Result<ElasticTensor> {
    let mut c = [[[[0.0; 2]; 2]; 2]; 2];
    for rv in &lattice.representative {
        let r = norm(rv);
        let w = (potential.phi_double_prime(r)? / (r * r) - potential.phi_prime(r)? / (r * r * r))
            / (2.0 * lattice.cell_volume);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        c[i][j][k][l] += w * rv[i] * rv[j] * rv[k] * rv[l];
                    }
                }
            }
        }
    }
    Ok(ElasticTensor { c })
}
