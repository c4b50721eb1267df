//! Plain-text mesh and atom files, and the energy and snapshot CSVs.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::{EnergyRecord, Snapshot};
use crate::error::{Error, Result};
use crate::types::{AtomSet, Element, ElementKind, Mesh, Node};

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Non-empty lines with `#` comments stripped, paired with 1-based numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let fields: Vec<&str> = l.split('#').next().unwrap_or("").split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn field<T: std::str::FromStr>(fields: &[&str], k: usize, what: &str, line: usize, origin: &str) -> Result<T> {
    let loc = format!("{origin} line {line}");
    let raw = fields.get(k).ok_or_else(|| Error::parse(&loc, format!("missing {what}")))?;
    raw.parse().map_err(|_| Error::parse(&loc, format!("bad {what} '{raw}'")))
}

fn header(fields: &[&str], line: usize, origin: &str) -> Result<usize> {
    let dim: usize = field(fields, 0, "dimension", line, origin)?;
    if !(1..=3).contains(&dim) {
        return Err(Error::parse(format!("{origin} line {line}"), format!("dimension {dim} not in 1..=3")));
    }
    Ok(dim)
}

/// `dim N_nodes N_elems`, then `id x [y [z]]` per node, then
/// `id kind n1 n2 ...` per element.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    const ORIGIN: &str = "mesh";
    let mut lines = data_lines(text);
    let (l, h) = lines.next().ok_or_else(|| Error::parse(ORIGIN, "empty file"))?;
    let dim = header(&h, l, ORIGIN)?;
    let n_nodes: usize = field(&h, 1, "node count", l, ORIGIN)?;
    let n_elems: usize = field(&h, 2, "element count", l, ORIGIN)?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (l, f) = lines.next().ok_or_else(|| Error::parse(ORIGIN, "fewer node lines than declared"))?;
        if f.len() != dim + 1 {
            return Err(Error::parse(format!("{ORIGIN} line {l}"), format!("node needs id and {dim} coordinates")));
        }
        let mut coords = [0.0; 3];
        for (d, c) in coords.iter_mut().enumerate().take(dim) {
            *c = field(&f, d + 1, "coordinate", l, ORIGIN)?;
        }
        nodes.push(Node { id: field(&f, 0, "node id", l, ORIGIN)?, coords });
    }
    let mut elements = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let (l, f) = lines.next().ok_or_else(|| Error::parse(ORIGIN, "fewer element lines than declared"))?;
        let kind: ElementKind = field(&f, 1, "element kind", l, ORIGIN)?;
        let ids = (2..f.len()).map(|k| field(&f, k, "node id", l, ORIGIN)).collect::<Result<Vec<usize>>>()?;
        elements.push(Element { id: field(&f, 0, "element id", l, ORIGIN)?, kind, nodes: ids });
    }
    if let Some((l, _)) = lines.next() {
        return Err(Error::parse(format!("{ORIGIN} line {l}"), "trailing data after declared elements"));
    }
    Ok(Mesh::new(dim, nodes, elements))
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = format!("{} {} {}\n", mesh.dim, mesh.nodes.len(), mesh.elements.len());
    for n in &mesh.nodes {
        let _ = write!(s, "{}", n.id);
        for c in &n.coords[..mesh.dim] {
            let _ = write!(s, " {c:.16e}");
        }
        s.push('\n');
    }
    for e in &mesh.elements {
        let _ = write!(s, "{} {}", e.id, e.kind);
        for n in &e.nodes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    s
}

/// `dim N_atoms`, then `id x [y [z]] mass` per atom.
pub fn parse_atoms(text: &str) -> Result<AtomSet> {
    const ORIGIN: &str = "atoms";
    let mut lines = data_lines(text);
    let (l, h) = lines.next().ok_or_else(|| Error::parse(ORIGIN, "empty file"))?;
    let dim = header(&h, l, ORIGIN)?;
    let n: usize = field(&h, 1, "atom count", l, ORIGIN)?;
    let mut ids = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    for _ in 0..n {
        let (l, f) = lines.next().ok_or_else(|| Error::parse(ORIGIN, "fewer atom lines than declared"))?;
        if f.len() != dim + 2 {
            return Err(Error::parse(
                format!("{ORIGIN} line {l}"),
                format!("atom needs id, {dim} coordinates and mass"),
            ));
        }
        ids.push(field(&f, 0, "atom id", l, ORIGIN)?);
        let mut p = [0.0; 3];
        for (d, c) in p.iter_mut().enumerate().take(dim) {
            *c = field(&f, d + 1, "coordinate", l, ORIGIN)?;
        }
        positions.push(p);
        masses.push(field(&f, dim + 1, "mass", l, ORIGIN)?);
    }
    if let Some((l, _)) = lines.next() {
        return Err(Error::parse(format!("{ORIGIN} line {l}"), "trailing data after declared atoms"));
    }
    AtomSet::new(dim, ids, positions, masses)
}

pub fn write_atoms(atoms: &AtomSet) -> String {
    let mut s = format!("{} {}\n", atoms.dim, atoms.len());
    for i in 0..atoms.len() {
        let _ = write!(s, "{}", atoms.ids[i]);
        for c in &atoms.positions[i][..atoms.dim] {
            let _ = write!(s, " {c:.16e}");
        }
        let _ = writeln!(s, " {:.16e}", atoms.masses[i]);
    }
    s
}

pub const ENERGY_HEADER: &str = "step,time,ke_fe,ke_md,pe_fe,pe_md,ke_total,pe_total,e_total,ke_md_region";

pub fn write_energy_csv(records: &[EnergyRecord]) -> String {
    let mut s = format!("{ENERGY_HEADER}\n");
    for r in records {
        let _ = write!(s, "{}", r.step);
        for v in r.values() {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_energy_csv(text: &str) -> Result<Vec<EnergyRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == ENERGY_HEADER => {}
        _ => return Err(Error::parse("energy csv line 1", "unexpected header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("energy csv line {}", i + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::parse(&loc, "expected 10 columns"));
        }
        let step: usize = f[0].parse().map_err(|_| Error::parse(&loc, "bad step"))?;
        let v = f[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(&loc, format!("bad number '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(EnergyRecord {
            step,
            time: v[0],
            ke_fe: v[1],
            ke_md: v[2],
            pe_fe: v[3],
            pe_md: v[4],
            ke_total: v[5],
            pe_total: v[6],
            e_total: v[7],
            ke_md_region: v[8],
        });
    }
    Ok(out)
}

pub fn write_snapshot_csv(snapshot: &Snapshot) -> String {
    let mut s = String::from("entity_type,id,x,y,u_x,u_y,ke_density\n");
    for r in &snapshot.rows {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.entity, r.id, r.position[0], r.position[1], r.displacement[0], r.displacement[1], r.ke_density
        );
    }
    s
}
