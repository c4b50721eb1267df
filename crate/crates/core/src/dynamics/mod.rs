//! Scaled FE and MD matrices, coupling constraints, and the explicit
//! constrained integrator.

pub mod mdmesh;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::alpha::{AlphaField, AlphaMethod};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::iso::{in_out_status, invert};
use crate::lattice::{elastic_tensor, pair_block, ElasticTensor, LatticeSpec, PairPotential};
use crate::linalg::{CsrMatrix, SkylineCholesky, TripletBuilder};
use crate::shape::{element_shape_values, mass_quadrature, physical_gradients, quadrature};
use crate::topology::CouplingMap;
use crate::types::{AtomSet, ElementKind, IsoCoords, Mesh, Point, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMethod {
    /// Weak coupling: L2 projection of the MD velocity field.
    Wcm,
    /// Bridging domain: each coupling atom follows the FE interpolation.
    Bdm,
}

impl fmt::Display for CouplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingMethod::Wcm => "wcm",
            CouplingMethod::Bdm => "bdm",
        })
    }
}

impl FromStr for CouplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wcm" => Ok(CouplingMethod::Wcm),
            "bdm" => Ok(CouplingMethod::Bdm),
            _ => Err(Error::InvalidValue(format!("unknown coupling method '{s}'"))),
        }
    }
}

/// How FE and MD energies are weighted in the coupling region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    ArlequinDirect,
    ArlequinTemperature,
    /// Both models at full weight.
    None,
    /// Both models at weight 0.5.
    ConstantHalf,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::ArlequinDirect, Variant::ArlequinTemperature, Variant::None, Variant::ConstantHalf];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ArlequinDirect => "arlequin_direct",
            Variant::ArlequinTemperature => "arlequin_temperature",
            Variant::None => "none",
            Variant::ConstantHalf => "constant_half",
        }
    }

    /// Alpha field the variant reads, if any.
    pub fn alpha_method(self) -> Option<AlphaMethod> {
        match self {
            Variant::ArlequinDirect => Some(AlphaMethod::Direct),
            Variant::ArlequinTemperature => Some(AlphaMethod::Temperature),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidValue(format!("unknown variant '{s}'")))
    }
}

/// Energy weights. Elements and atoms outside the coupling region keep
/// weight 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Weights {
    /// Per coupling element, one value per stiffness quadrature point.
    pub fe_stiffness: BTreeMap<usize, Vec<f64>>,
    /// Per coupling element, one value per mass quadrature point.
    pub fe_mass: BTreeMap<usize, Vec<f64>>,
    pub md_mass: Vec<f64>,
    /// Per-atom weight; a bond gets the mean of its two atoms.
    pub md_stiffness: Vec<f64>,
}

/// Scale factor of bond `(i, j)` from per-atom MD weights.
pub fn pair_factor(wi: f64, wj: f64) -> f64 {
    0.5 * (wi + wj)
}

impl Weights {
    pub fn unit(atoms: usize) -> Self {
        Weights { md_mass: vec![1.0; atoms], md_stiffness: vec![1.0; atoms], ..Weights::default() }
    }

    /// Weights for one variant. Mass weights are clamped to
    /// `[alpha_min, 1 - alpha_min]` so no mass vanishes; stiffness weights
    /// are not.
    pub fn for_variant(
        variant: Variant,
        mesh: &Mesh,
        atoms: &AtomSet,
        map: &CouplingMap,
        alpha: Option<&AlphaField>,
        alpha_min: f64,
    ) -> Result<Self> {
        let mut w = Weights::unit(atoms.len());
        let constant = match variant {
            Variant::None => Some(1.0),
            Variant::ConstantHalf => Some(0.5),
            _ => None,
        };
        if let Some(c) = constant {
            for &id in &map.elements {
                let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
                w.fe_stiffness.insert(id, vec![c; quadrature(e.kind).len()]);
                w.fe_mass.insert(id, vec![c; mass_quadrature(e.kind).len()]);
            }
            for l in &map.locations {
                w.md_mass[l.atom] = c;
                w.md_stiffness[l.atom] = c;
            }
            return Ok(w);
        }
        let alpha = alpha.ok_or_else(|| Error::Missing(format!("alpha field for variant {variant}")))?;
        let clamp = |a: f64| a.clamp(alpha_min, 1.0 - alpha_min);
        let mut gauss: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for g in &alpha.gauss {
            gauss.insert((g.element, g.point), g.alpha);
        }
        for &id in &map.elements {
            let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
            let stiff = (0..quadrature(e.kind).len())
                .map(|k| {
                    gauss
                        .get(&(id, k))
                        .copied()
                        .ok_or_else(|| Error::Missing(format!("alpha at quadrature point {k} of element {id}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let nodal = e
                .nodes
                .iter()
                .map(|n| alpha.nodal.get(n).copied().ok_or_else(|| Error::Missing(format!("alpha at node {n}"))))
                .collect::<Result<Vec<_>>>()?;
            let mass = mass_quadrature(e.kind)
                .iter()
                .map(|(iso, _)| {
                    let n = element_shape_values(e.kind, iso)?;
                    Ok(clamp(n.iter().zip(&nodal).map(|(a, b)| a * b).sum()))
                })
                .collect::<Result<Vec<_>>>()?;
            w.fe_stiffness.insert(id, stiff);
            w.fe_mass.insert(id, mass);
        }
        let atom_alpha = alpha.atom_map();
        for l in &map.locations {
            let a =
                *atom_alpha.get(&l.atom).ok_or_else(|| Error::Missing(format!("alpha at atom index {}", l.atom)))?;
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidValue(format!("alpha {a} at atom index {} outside [0, 1]", l.atom)));
            }
            w.md_mass[l.atom] = clamp(1.0 - a);
            w.md_stiffness[l.atom] = 1.0 - a;
        }
        Ok(w)
    }
}

/// Plane-strain stiffness matrix in Voigt order (11, 22, 12) with
/// engineering shear.
fn voigt(c: &ElasticTensor) -> [[f64; 3]; 3] {
    c.voigt()
}

/// Scalar (per-axis) consistent mass and vector stiffness of the FE model.
/// Rows follow `mesh.nodes` order; stiffness dofs are `2 * node + axis`.
pub fn assemble_scaled_fe(
    mesh: &Mesh,
    moduli: &ElasticTensor,
    density: f64,
    weights: &Weights,
) -> Result<(CsrMatrix, CsrMatrix)> {
    if mesh.dim != 2 {
        return Err(Error::InvalidValue("FE dynamics is implemented for 2D meshes".into()));
    }
    let d = voigt(moduli);
    let n = mesh.nodes.len();
    let mut mass = TripletBuilder::new(n);
    let mut stiff = TripletBuilder::new(2 * n);
    for e in &mesh.elements {
        if !matches!(e.kind, ElementKind::Tri3 | ElementKind::Quad4) {
            return Err(Error::InvalidValue(format!("element {} of kind {} in a 2D dynamic model", e.id, e.kind)));
        }
        let coords = mesh.element_coords(e)?;
        let idx: Vec<usize> = e
            .nodes
            .iter()
            .map(|id| mesh.node_position(*id).ok_or_else(|| Error::Missing(format!("node {id}"))))
            .collect::<Result<_>>()?;
        let ws = weights.fe_stiffness.get(&e.id);
        for (k, (iso, w)) in quadrature(e.kind).into_iter().enumerate() {
            let scale = ws.map_or(1.0, |v| v[k]);
            if scale == 0.0 {
                continue;
            }
            let (g, det) = physical_gradients(e.kind, &coords, &iso)?;
            let jw = det.abs() * w * scale;
            for (a, ga) in g.iter().enumerate() {
                let ba = [[ga[0], 0.0], [0.0, ga[1]], [ga[1], ga[0]]];
                for (b, gb) in g.iter().enumerate() {
                    let bb = [[gb[0], 0.0], [0.0, gb[1]], [gb[1], gb[0]]];
                    for i in 0..2 {
                        for j in 0..2 {
                            let mut v = 0.0;
                            for p in 0..3 {
                                for q in 0..3 {
                                    v += ba[p][i] * d[p][q] * bb[q][j];
                                }
                            }
                            stiff.add(2 * idx[a] + i, 2 * idx[b] + j, v * jw);
                        }
                    }
                }
            }
        }
        let wm = weights.fe_mass.get(&e.id);
        for (k, (iso, w)) in mass_quadrature(e.kind).into_iter().enumerate() {
            let scale = wm.map_or(1.0, |v| v[k]);
            let (_, det) = physical_gradients(e.kind, &coords, &iso)?;
            let nv = element_shape_values(e.kind, &iso)?;
            let jw = det.abs() * w * scale * density;
            for a in 0..nv.len() {
                for b in 0..nv.len() {
                    mass.add(idx[a], idx[b], nv[a] * nv[b] * jw);
                }
            }
        }
    }
    Ok((mass.build(), stiff.build()))
}

/// Scaled atom masses and MD stiffness (dofs `dim * atom + axis`).
pub fn assemble_scaled_md(
    atoms: &AtomSet,
    potential: &PairPotential,
    weights: &Weights,
) -> Result<(Vec<f64>, CsrMatrix)> {
    let dim = atoms.dim;
    if weights.md_mass.len() != atoms.len() || weights.md_stiffness.len() != atoms.len() {
        return Err(Error::InvalidValue("MD weights do not match the atom count".into()));
    }
    let masses = atoms.masses.iter().zip(&weights.md_mass).map(|(m, w)| m * w).collect();
    let mut t = TripletBuilder::new(dim * atoms.len());
    for &(i, j) in &atoms.pairs {
        let f = pair_factor(weights.md_stiffness[i], weights.md_stiffness[j]);
        let k = pair_block(potential, &atoms.bond_vector(i, j), dim)?;
        for a in 0..dim {
            for b in 0..dim {
                let v = f * k[(a, b)];
                t.add(dim * i + a, dim * i + b, v);
                t.add(dim * j + a, dim * j + b, v);
                t.add(dim * i + a, dim * j + b, -v);
                t.add(dim * j + a, dim * i + b, -v);
            }
        }
    }
    Ok((masses, t.build()))
}

/// Rectangular sparse operator stored by rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn new(nrows: usize, ncols: usize) -> Self {
        SparseRows { ncols, rows: vec![Vec::new(); nrows] }
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        match self.rows[r].iter_mut().find(|(cc, _)| *cc == c) {
            Some(e) => e.1 += v,
            None => self.rows[r].push((c, v)),
        }
    }

    fn finish(&mut self) {
        for r in &mut self.rows {
            r.sort_by_key(|e| e.0);
        }
    }

    /// `W x` for one axis of an interleaved vector with `dim` components.
    pub fn apply(&self, x: &[f64], dim: usize, axis: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(c, v)| v * x[dim * c + axis]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                m[(i, c)] += v;
            }
        }
        m
    }
}

/// Velocity constraint `W_u u' = W_q q'`, applied axis by axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub method: CouplingMethod,
    /// Columns follow `mesh.nodes` order.
    pub wu: SparseRows,
    /// Columns are atom indices.
    pub wq: SparseRows,
}

impl Constraints {
    pub fn len(&self) -> usize {
        self.wu.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wu.rows.is_empty()
    }
}

/// Builds `W_u` and `W_q`.
///
/// BDM: one row per coupling atom, `W_q = I` and `W_u` the FE shape values
/// at the atom.
///
/// WCM: one row per coupling FE node. Both matrices are integrated on the
/// MD triangulation with a centroid rule, `W_u = sum A N N^T` and
/// `W_q = sum A N phi^T`. The FE shape values at a centroid use iso
/// coordinates interpolated from its corner atoms. Integrating `W_u` on the
/// same triangles keeps rigid motions admissible.
pub fn build_constraints(
    method: CouplingMethod,
    mesh: &Mesh,
    atoms: &AtomSet,
    map: &CouplingMap,
) -> Result<Constraints> {
    let n_fe = mesh.nodes.len();
    let location: BTreeMap<usize, &crate::types::ElementLocation> = map.locations.iter().map(|l| (l.atom, l)).collect();
    let node_pos = |id: usize| mesh.node_position(id).ok_or_else(|| Error::Missing(format!("node {id}")));
    match method {
        CouplingMethod::Bdm => {
            let mut wu = SparseRows::new(map.locations.len(), n_fe);
            let mut wq = SparseRows::new(map.locations.len(), atoms.len());
            for (r, l) in map.locations.iter().enumerate() {
                let e = mesh.element(l.element).ok_or_else(|| Error::Missing(format!("element {}", l.element)))?;
                for (n, v) in e.nodes.iter().zip(element_shape_values(e.kind, &l.iso)?) {
                    if v != 0.0 {
                        wu.add(r, node_pos(*n)?, v);
                    }
                }
                wq.add(r, l.atom, 1.0);
            }
            wu.finish();
            Ok(Constraints { method, wu, wq })
        }
        CouplingMethod::Wcm => {
            if mesh.dim != 2 || atoms.dim != 2 {
                return Err(Error::InvalidValue("weak coupling is implemented for 2D models".into()));
            }
            let mut rows_of: BTreeMap<usize, usize> = BTreeMap::new();
            for &id in &map.elements {
                let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
                for n in &e.nodes {
                    let p = node_pos(*n)?;
                    let next = rows_of.len();
                    rows_of.entry(p).or_insert(next);
                }
            }
            // renumber rows in node order
            for (k, v) in rows_of.values_mut().enumerate() {
                *v = k;
            }
            let mut wu = SparseRows::new(rows_of.len(), n_fe);
            let mut wq = SparseRows::new(rows_of.len(), atoms.len());
            let tris = mdmesh::lattice_triangles(atoms, |a| location.contains_key(&a));
            for t in &tris {
                let area = mdmesh::signed_area(atoms, t);
                let scale = t
                    .iter()
                    .map(|&a| crate::types::distance(&atoms.positions[a], &atoms.positions[t[0]]))
                    .fold(0.0, f64::max);
                if area <= 1e-14 * scale * scale {
                    return Err(Error::DegenerateElement(format!("MD triangle {t:?}")));
                }
                let (element, iso) = centroid_iso(mesh, atoms, t, &location)?;
                let e = mesh.element(element).expect("element resolved by centroid_iso");
                let shape = element_shape_values(e.kind, &iso)?;
                let cols: Vec<usize> = e.nodes.iter().map(|n| node_pos(*n)).collect::<Result<_>>()?;
                for (a, &na) in shape.iter().enumerate() {
                    let r = rows_of[&cols[a]];
                    for (b, &nb) in shape.iter().enumerate() {
                        wu.add(r, cols[b], area * na * nb);
                    }
                    for &atom in t {
                        wq.add(r, atom, area * na / 3.0);
                    }
                }
            }
            wu.finish();
            wq.finish();
            Ok(Constraints { method, wu, wq })
        }
    }
}

/// Element and iso coordinates of an MD triangle centroid, averaging the
/// corners' iso coordinates relative to each candidate element.
fn centroid_iso(
    mesh: &Mesh,
    atoms: &AtomSet,
    tri: &[usize; 3],
    location: &BTreeMap<usize, &crate::types::ElementLocation>,
) -> Result<(usize, IsoCoords)> {
    let mut candidates: Vec<usize> = tri.iter().map(|a| location[a].element).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let mut fallback = None;
    for &id in &candidates {
        let e = mesh.element(id).ok_or_else(|| Error::Missing(format!("element {id}")))?;
        let coords = mesh.element_coords(e)?;
        let mut sum = [0.0; 4];
        for &a in tri {
            let iso = if location[&a].element == id {
                location[&a].iso
            } else {
                invert(e.kind, &coords, atoms.positions[a])?.iso
            };
            for (s, v) in sum.iter_mut().zip(iso.values()) {
                *s += v / 3.0;
            }
        }
        let iso = match e.kind {
            ElementKind::Tri3 => IsoCoords::tri3(sum[0], sum[1]),
            kind => IsoCoords::new(kind, &sum[..kind.iso_len()])?,
        };
        if in_out_status(&iso) == Status::In {
            return Ok((id, iso));
        }
        fallback.get_or_insert((id, iso));
    }
    fallback.ok_or_else(|| Error::Missing(format!("element for MD triangle {tri:?}")))
}

/// Dense Cholesky that names the rows with vanishing pivots.
fn factor_multiplier(h: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = h.clone().cholesky() {
        return Ok(c);
    }
    let n = h.nrows();
    let tol = 1e-12 * (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max);
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut redundant = Vec::new();
    for j in 0..n {
        let mut d = h[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            redundant.push(j);
            continue;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Err(Error::RedundantConstraints(redundant))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub ke_fe: f64,
    pub ke_md: f64,
    pub pe_fe: f64,
    pub pe_md: f64,
    pub ke_total: f64,
    pub pe_total: f64,
    pub e_total: f64,
    /// Kinetic energy of the atoms in the pure MD region.
    pub ke_md_region: f64,
}

impl EnergyRecord {
    /// Columns after `step`, in CSV order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.time,
            self.ke_fe,
            self.ke_md,
            self.pe_fe,
            self.pe_md,
            self.ke_total,
            self.pe_total,
            self.e_total,
            self.ke_md_region,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub entity: &'static str,
    pub id: usize,
    pub position: Point,
    pub displacement: [f64; 2],
    pub ke_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub rows: Vec<SnapshotRow>,
}

/// Displacements, velocities and unconstrained accelerations of both models.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    pub qv: Vec<f64>,
    pub qa: Vec<f64>,
    pub lambda: Vec<f64>,
    pub step: usize,
    pub time: f64,
}

/// Precomputed operators of a coupled (or standalone) model. Everything is
/// fixed after construction, so the time loop only does products and
/// triangular solves.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub fe_mass: CsrMatrix,
    pub fe_stiffness: CsrMatrix,
    fe_factor: Option<SkylineCholesky>,
    pub md_mass: Vec<f64>,
    pub md_stiffness: CsrMatrix,
    pub constraints: Option<Constraints>,
    /// `M_u^-1 W_u^T`, one column per constraint row.
    fe_correction: DMatrix<f64>,
    multiplier: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    /// Atoms counted in `ke_md_region`.
    pub md_region: Vec<bool>,
    node_ids: Vec<usize>,
    node_positions: Vec<Point>,
    atom_ids: Vec<usize>,
    atom_positions: Vec<Point>,
    /// Lumped FE mass over unweighted nodal area, for energy densities.
    node_density: Vec<f64>,
    atom_area: f64,
}

impl CoupledSystem {
    pub fn new(
        mesh: &Mesh,
        atoms: &AtomSet,
        fe: (CsrMatrix, CsrMatrix),
        md: (Vec<f64>, CsrMatrix),
        constraints: Option<Constraints>,
        md_region: Vec<bool>,
        atom_area: f64,
    ) -> Result<Self> {
        let (fe_mass, fe_stiffness) = fe;
        let (md_mass, md_stiffness) = md;
        if (!atoms.is_empty() && atoms.dim != 2) || (!mesh.nodes.is_empty() && mesh.dim != 2) {
            return Err(Error::InvalidValue("dynamics is implemented for 2D models".into()));
        }
        let fe_factor = if fe_mass.n > 0 { Some(SkylineCholesky::factor(&fe_mass)?) } else { None };
        let constraints = constraints.filter(|c| !c.is_empty());
        let (fe_correction, multiplier) = match &constraints {
            Some(c) => {
                let factor =
                    fe_factor.as_ref().ok_or_else(|| Error::InvalidValue("constraints without an FE model".into()))?;
                let rows = c.len();
                let mut g = DMatrix::zeros(fe_mass.n, rows);
                for (r, row) in c.wu.rows.iter().enumerate() {
                    let mut rhs = vec![0.0; fe_mass.n];
                    for &(col, v) in row {
                        rhs[col] = v;
                    }
                    let sol = factor.solve(&rhs);
                    g.column_mut(r).copy_from_slice(&sol);
                }
                let wu = c.wu.to_dense();
                let mut h = &wu * &g;
                let mut wq_scaled = c.wq.to_dense();
                for (col, m) in md_mass.iter().enumerate() {
                    let s = 1.0 / m;
                    for r in 0..rows {
                        wq_scaled[(r, col)] *= s;
                    }
                }
                h += &wq_scaled * c.wq.to_dense().transpose();
                (g, Some(factor_multiplier(h)?))
            }
            None => (DMatrix::zeros(0, 0), None),
        };
        let lumped = row_sums(&fe_mass);
        let area = nodal_area(mesh)?;
        let node_density = lumped.iter().zip(&area).map(|(m, a)| if *a > 0.0 { m / a } else { 0.0 }).collect();
        Ok(CoupledSystem {
            fe_mass,
            fe_stiffness,
            fe_factor,
            md_mass,
            md_stiffness,
            constraints,
            fe_correction,
            multiplier,
            md_region,
            node_ids: mesh.nodes.iter().map(|n| n.id).collect(),
            node_positions: mesh.nodes.iter().map(|n| n.coords).collect(),
            atom_ids: atoms.ids.clone(),
            atom_positions: atoms.positions.clone(),
            node_density,
            atom_area,
        })
    }

    fn fe_nodes(&self) -> usize {
        self.fe_mass.n
    }

    fn atoms(&self) -> usize {
        self.md_mass.len()
    }

    /// Unconstrained accelerations `-M^-1 K x` of both models.
    fn accelerations(&self, u: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; u.len()];
        if let Some(f) = &self.fe_factor {
            let force = self.fe_stiffness.mul_vec(u);
            for axis in 0..2 {
                let rhs: Vec<f64> = (0..self.fe_nodes()).map(|i| -force[2 * i + axis]).collect();
                for (i, x) in f.solve(&rhs).into_iter().enumerate() {
                    a[2 * i + axis] = x;
                }
            }
        }
        let force = self.md_stiffness.mul_vec(q);
        let qa = force.iter().enumerate().map(|(k, f)| -f / self.md_mass[k / 2]).collect();
        (a, qa)
    }

    /// Largest `|W_u v - W_q qv|` over rows and axes.
    pub fn constraint_residual(&self, v: &[f64], qv: &[f64]) -> f64 {
        let Some(c) = &self.constraints else { return 0.0 };
        (0..2)
            .flat_map(|axis| {
                let a = c.wu.apply(v, 2, axis);
                let b = c.wq.apply(qv, 2, axis);
                a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// Removes the constraint violation of the velocities with multiplier
    /// forces acting over `dt`.
    fn project(&self, v: &mut [f64], qv: &mut [f64], lambda: &mut [f64], dt: f64) {
        let (Some(c), Some(chol)) = (&self.constraints, &self.multiplier) else { return };
        let rows = c.len();
        for pass in 0..2 {
            let mut worst = 0.0f64;
            for axis in 0..2 {
                let wu = c.wu.apply(v, 2, axis);
                let wq = c.wq.apply(qv, 2, axis);
                let r = nalgebra::DVector::from_iterator(rows, wu.iter().zip(&wq).map(|(a, b)| (a - b) / dt));
                worst = worst.max(r.amax() * dt);
                if pass == 1 && r.amax() * dt <= 1e-12 {
                    continue;
                }
                let lam = chol.solve(&r);
                let du = &self.fe_correction * &lam;
                for i in 0..self.fe_nodes() {
                    v[2 * i + axis] -= dt * du[i];
                }
                for (row, l) in c.wq.rows.iter().zip(lam.iter()) {
                    for &(atom, w) in row {
                        qv[2 * atom + axis] += dt * w * l / self.md_mass[atom];
                    }
                }
                for (k, l) in lam.iter().enumerate() {
                    lambda[2 * k + axis] = if pass == 0 { *l } else { lambda[2 * k + axis] + l };
                }
            }
            if pass == 0 && self.constraint_residual(v, qv) <= 1e-12 {
                break;
            }
            let _ = worst;
        }
    }

    /// Initial state with `u_y` a Gaussian bump on nodes and atoms and zero
    /// velocities.
    pub fn gaussian_state(&self, amplitude: f64, width: f64, center: &Point) -> SimState {
        let bump = |p: &Point| {
            amplitude * (-((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (width * width)).exp()
        };
        let mut u = vec![0.0; 2 * self.fe_nodes()];
        for (i, p) in self.node_positions.iter().enumerate() {
            u[2 * i + 1] = bump(p);
        }
        let mut q = vec![0.0; 2 * self.atoms()];
        for (i, p) in self.atom_positions.iter().enumerate() {
            q[2 * i + 1] = bump(p);
        }
        self.state_from(u, q)
    }

    pub fn state_from(&self, u: Vec<f64>, q: Vec<f64>) -> SimState {
        let (a, qa) = self.accelerations(&u, &q);
        SimState {
            v: vec![0.0; u.len()],
            qv: vec![0.0; q.len()],
            lambda: vec![0.0; 2 * self.constraints.as_ref().map_or(0, Constraints::len)],
            u,
            a,
            q,
            qa,
            step: 0,
            time: 0.0,
        }
    }

    /// One central-difference step in velocity form with the velocity
    /// constraint enforced after each half kick.
    pub fn step(&self, s: &mut SimState, dt: f64) {
        for (v, a) in s.v.iter_mut().zip(&s.a) {
            *v += 0.5 * dt * a;
        }
        for (v, a) in s.qv.iter_mut().zip(&s.qa) {
            *v += 0.5 * dt * a;
        }
        self.project(&mut s.v, &mut s.qv, &mut s.lambda, dt);
        for (u, v) in s.u.iter_mut().zip(&s.v) {
            *u += dt * v;
        }
        for (q, v) in s.q.iter_mut().zip(&s.qv) {
            *q += dt * v;
        }
        let (a, qa) = self.accelerations(&s.u, &s.q);
        s.a = a;
        s.qa = qa;
        for (v, a) in s.v.iter_mut().zip(&s.a) {
            *v += 0.5 * dt * a;
        }
        for (v, a) in s.qv.iter_mut().zip(&s.qa) {
            *v += 0.5 * dt * a;
        }
        self.project(&mut s.v, &mut s.qv, &mut s.lambda, dt);
        s.step += 1;
        s.time = s.step as f64 * dt;
    }

    pub fn energy(&self, s: &SimState) -> EnergyRecord {
        let mut ke_fe = 0.0;
        for axis in 0..2 {
            let va: Vec<f64> = (0..self.fe_nodes()).map(|i| s.v[2 * i + axis]).collect();
            ke_fe += self.fe_mass.energy(&va);
        }
        let atom_ke = |i: usize| 0.5 * self.md_mass[i] * (s.qv[2 * i].powi(2) + s.qv[2 * i + 1].powi(2));
        let ke_md: f64 = (0..self.atoms()).map(atom_ke).sum();
        let ke_md_region: f64 = (0..self.atoms()).filter(|&i| self.md_region[i]).map(atom_ke).sum();
        let pe_fe = self.fe_stiffness.energy(&s.u);
        let pe_md = self.md_stiffness.energy(&s.q);
        EnergyRecord {
            step: s.step,
            time: s.time,
            ke_fe,
            ke_md,
            pe_fe,
            pe_md,
            ke_total: ke_fe + ke_md,
            pe_total: pe_fe + pe_md,
            e_total: ke_fe + ke_md + pe_fe + pe_md,
            ke_md_region,
        }
    }

    pub fn snapshot(&self, s: &SimState) -> Snapshot {
        let mut rows = Vec::with_capacity(self.fe_nodes() + self.atoms());
        for i in 0..self.fe_nodes() {
            let v2 = s.v[2 * i].powi(2) + s.v[2 * i + 1].powi(2);
            rows.push(SnapshotRow {
                entity: "node",
                id: self.node_ids[i],
                position: self.node_positions[i],
                displacement: [s.u[2 * i], s.u[2 * i + 1]],
                ke_density: 0.5 * self.node_density[i] * v2,
            });
        }
        for i in 0..self.atoms() {
            let v2 = s.qv[2 * i].powi(2) + s.qv[2 * i + 1].powi(2);
            rows.push(SnapshotRow {
                entity: "atom",
                id: self.atom_ids[i],
                position: self.atom_positions[i],
                displacement: [s.q[2 * i], s.q[2 * i + 1]],
                ke_density: 0.5 * self.md_mass[i] * v2 / self.atom_area,
            });
        }
        Snapshot { step: s.step, rows }
    }

    /// Power-iteration estimate of the largest angular frequency of either
    /// model without constraints.
    pub fn max_frequency(&self) -> f64 {
        let mut lam = 0.0f64;
        let iters = 200;
        if let Some(f) = &self.fe_factor {
            let n = 2 * self.fe_nodes();
            let mut x: Vec<f64> = (0..n).map(seed).collect();
            for _ in 0..iters {
                let kx = self.fe_stiffness.mul_vec(&x);
                let mut y = vec![0.0; n];
                for axis in 0..2 {
                    let rhs: Vec<f64> = (0..n / 2).map(|i| kx[2 * i + axis]).collect();
                    for (i, v) in f.solve(&rhs).into_iter().enumerate() {
                        y[2 * i + axis] = v;
                    }
                }
                let norm = crate::linalg::norm2(&y);
                if norm == 0.0 {
                    break;
                }
                lam = lam.max(norm / crate::linalg::norm2(&x));
                x = y.into_iter().map(|v| v / norm).collect();
            }
        }
        let n = 2 * self.atoms();
        if n > 0 {
            let mut x: Vec<f64> = (0..n).map(seed).collect();
            let mut md = 0.0f64;
            for _ in 0..iters {
                let kx = self.md_stiffness.mul_vec(&x);
                let y: Vec<f64> = kx.iter().enumerate().map(|(k, v)| v / self.md_mass[k / 2]).collect();
                let norm = crate::linalg::norm2(&y);
                if norm == 0.0 {
                    break;
                }
                md = md.max(norm / crate::linalg::norm2(&x));
                x = y.into_iter().map(|v| v / norm).collect();
            }
            lam = lam.max(md);
        }
        lam.sqrt()
    }

    /// Rejects `dt` above the central-difference limit `2 / omega_max`.
    pub fn check_time_step(&self, dt: f64) -> Result<()> {
        let w = self.max_frequency();
        if w > 0.0 && dt > 2.0 / w {
            return Err(Error::UnstableTimeStep { dt, limit: 2.0 / w });
        }
        Ok(())
    }
}

/// Deterministic start vector for power iteration.
fn seed(i: usize) -> f64 {
    let x = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn row_sums(m: &CsrMatrix) -> Vec<f64> {
    (0..m.n).map(|r| m.row(r).map(|(_, v)| v).sum()).collect()
}

/// `int N_i` per node over the whole mesh.
fn nodal_area(mesh: &Mesh) -> Result<Vec<f64>> {
    let mut area = vec![0.0; mesh.nodes.len()];
    for e in &mesh.elements {
        let coords = mesh.element_coords(e)?;
        for (iso, w) in mass_quadrature(e.kind) {
            let (_, det) = physical_gradients(e.kind, &coords, &iso)?;
            for (n, v) in e.nodes.iter().zip(element_shape_values(e.kind, &iso)?) {
                if let Some(p) = mesh.node_position(*n) {
                    area[p] += v * det.abs() * w;
                }
            }
        }
    }
    Ok(area)
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub energies: Vec<EnergyRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Constraint residual after each step, starting with the initial state.
    pub constraint_residuals: Vec<f64>,
}

/// Integrates `steps` steps, recording energies every step and snapshots
/// at the requested steps. Aborts when the total energy exceeds ten times
/// its initial value.
pub fn run(
    system: &CoupledSystem,
    mut state: SimState,
    dt: f64,
    steps: usize,
    snapshot_steps: &[usize],
) -> Result<RunOutput> {
    let mut out =
        RunOutput { energies: Vec::with_capacity(steps + 1), snapshots: Vec::new(), constraint_residuals: Vec::new() };
    let first = system.energy(&state);
    let initial = first.e_total;
    out.energies.push(first);
    out.constraint_residuals.push(system.constraint_residual(&state.v, &state.qv));
    if snapshot_steps.contains(&0) {
        out.snapshots.push(system.snapshot(&state));
    }
    for _ in 0..steps {
        system.step(&mut state, dt);
        let e = system.energy(&state);
        if !e.e_total.is_finite() || (initial > 0.0 && e.e_total > 10.0 * initial) {
            return Err(Error::Instability { step: state.step, energy: e.e_total, initial });
        }
        out.energies.push(e);
        out.constraint_residuals.push(system.constraint_residual(&state.v, &state.qv));
        if snapshot_steps.contains(&state.step) {
            out.snapshots.push(system.snapshot(&state));
        }
    }
    Ok(out)
}

/// Material parameters shared by the FE and MD sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub potential: PairPotential,
    pub moduli: ElasticTensor,
    /// Atom mass over cell volume.
    pub density: f64,
    pub cell_volume: f64,
}

impl Material {
    pub fn from_config(config: &Config, atom_mass: f64) -> Result<Self> {
        let potential = config.potential()?;
        let lattice = LatticeSpec::square_45(potential.r0);
        Ok(Material {
            moduli: elastic_tensor(&lattice, &potential)?,
            density: atom_mass / lattice.cell_volume,
            cell_volume: lattice.cell_volume,
            potential,
        })
    }
}

fn mean_mass(atoms: &AtomSet) -> f64 {
    if atoms.is_empty() {
        1.0
    } else {
        atoms.masses.iter().sum::<f64>() / atoms.len() as f64
    }
}

/// Coupled FE-MD model for one variant. `atoms` must carry bonds.
pub fn build_coupled_system(
    mesh: &Mesh,
    atoms: &AtomSet,
    map: &CouplingMap,
    alpha: Option<&AlphaField>,
    config: &Config,
    variant: Variant,
) -> Result<CoupledSystem> {
    let material = Material::from_config(config, mean_mass(atoms))?;
    let weights = Weights::for_variant(variant, mesh, atoms, map, alpha, config.alpha_min)?;
    let fe = assemble_scaled_fe(mesh, &material.moduli, material.density, &weights)?;
    let md = assemble_scaled_md(atoms, &material.potential, &weights)?;
    let constraints = if map.locations.is_empty() {
        None
    } else {
        Some(build_constraints(config.coupling_method, mesh, atoms, map)?)
    };
    let mut region = vec![true; atoms.len()];
    for l in &map.locations {
        region[l.atom] = false;
    }
    CoupledSystem::new(mesh, atoms, fe, md, constraints, region, material.cell_volume)
}

/// Standalone MD model; `region` marks the atoms counted in `ke_md_region`.
pub fn build_md_system(atoms: &AtomSet, config: &Config, region: Vec<bool>) -> Result<CoupledSystem> {
    let material = Material::from_config(config, mean_mass(atoms))?;
    let md = assemble_scaled_md(atoms, &material.potential, &Weights::unit(atoms.len()))?;
    let empty = Mesh::new(2, Vec::new(), Vec::new());
    CoupledSystem::new(
        &empty,
        atoms,
        (CsrMatrix::zeros(0), CsrMatrix::zeros(0)),
        md,
        None,
        region,
        material.cell_volume,
    )
}

/// Standalone FE model.
pub fn build_fe_system(mesh: &Mesh, config: &Config, atom_mass: f64) -> Result<CoupledSystem> {
    let material = Material::from_config(config, atom_mass)?;
    let fe = assemble_scaled_fe(mesh, &material.moduli, material.density, &Weights::unit(0))?;
    let empty = AtomSet::new(2, Vec::new(), Vec::new(), Vec::new())?;
    CoupledSystem::new(mesh, &empty, fe, (Vec::new(), CsrMatrix::zeros(0)), None, Vec::new(), material.cell_volume)
}

/// Validates the step against the stability estimate, then runs from the
/// configured Gaussian initial condition.
pub fn run_experiment(system: &CoupledSystem, config: &Config) -> Result<RunOutput> {
    system.check_time_step(config.dt)?;
    let state = system.gaussian_state(config.amplitude(), config.width(), &config.center);
    run(system, state, config.dt, config.steps, &config.snapshot_steps)
}
