use arlequin_core::alpha::{build_alpha_field, AlphaMethod};
use arlequin_core::config::Config;
use arlequin_core::demo::{demo_atoms, demo_config, demo_mesh, grid_mesh};
use arlequin_core::dynamics::{
    build_constraints, build_coupled_system, build_fe_system, run, run_experiment, CouplingMethod, Variant, Weights,
};
use arlequin_core::pipeline::{build_coupling_map, cell_size};
use arlequin_core::topology::CouplingMap;
use arlequin_core::{AtomSet, Error, Mesh};

struct Demo {
    mesh: Mesh,
    atoms: AtomSet,
    map: CouplingMap,
    config: Config,
}

fn demo(method: CouplingMethod) -> Demo {
    let mut config = demo_config();
    config.coupling_method = method;
    let mesh = demo_mesh();
    let atoms = demo_atoms(config.r0).unwrap().with_neighbors_within(config.neighbor_cutoff * config.r0);
    let map = build_coupling_map(&mesh, &atoms, &cell_size(&mesh, &config)).unwrap();
    Demo { mesh, atoms, map, config }
}

fn max_drift(e: &[arlequin_core::dynamics::EnergyRecord]) -> f64 {
    let e0 = e[0].e_total;
    e.iter().map(|r| (r.e_total - e0).abs() / e0).fold(0.0, f64::max)
}

#[test]
fn demo_counts() {
    let d = demo(CouplingMethod::Wcm);
    assert_eq!(d.map.elements.len(), 56);
    assert_eq!(d.map.locations.len(), 1008);
    assert_eq!(d.atoms.len(), 1458);
}

#[test]
fn zero_state_stays_at_rest() {
    let d = demo(CouplingMethod::Wcm);
    let system = build_coupled_system(&d.mesh, &d.atoms, &d.map, None, &d.config, Variant::None).unwrap();
    let state = system.state_from(vec![0.0; 2 * d.mesh.nodes.len()], vec![0.0; 2 * d.atoms.len()]);
    let out = run(&system, state, d.config.dt, 20, &[]).unwrap();
    assert!(out.energies.iter().all(|e| e.e_total == 0.0));
}

#[test]
fn fe_model_conserves_energy() {
    let mesh = grid_mesh(12, 12, 5.0, |_, _| true);
    let mut config = demo_config();
    config.center = [30.0, 30.0, 0.0];
    let system = build_fe_system(&mesh, &config, 1.0).unwrap();
    system.check_time_step(config.dt).unwrap();
    let state = system.gaussian_state(config.amplitude(), config.width(), &config.center);
    let out = run(&system, state, config.dt, 200, &[]).unwrap();
    assert!(max_drift(&out.energies) < 1e-3);
}

#[test]
fn coupled_runs_keep_constraints_and_energy() {
    for method in [CouplingMethod::Wcm, CouplingMethod::Bdm] {
        let mut d = demo(method);
        d.config.steps = 60;
        let alpha =
            build_alpha_field(AlphaMethod::Temperature, &d.mesh, &d.atoms, &d.config.anchors, &mut d.map).unwrap();
        let system =
            build_coupled_system(&d.mesh, &d.atoms, &d.map, Some(&alpha), &d.config, Variant::ArlequinTemperature)
                .unwrap();
        let out = run_experiment(&system, &d.config).unwrap();
        assert_eq!(out.energies.len(), 61);
        assert!(out.constraint_residuals.iter().all(|r| *r < 1e-9), "{method}");
        assert!(max_drift(&out.energies) < 5e-3, "{method}");
    }
}

fn apply(w: &arlequin_core::dynamics::SparseRows, values: &[f64]) -> Vec<f64> {
    w.rows.iter().map(|r| r.iter().map(|&(c, v)| v * values[c]).sum()).collect()
}

/// A linear displacement field sampled on nodes and atoms satisfies both
/// constraint forms; on the affine demo elements this is exact up to
/// rounding.
#[test]
fn linear_fields_are_admissible() {
    let field = |p: &[f64; 3]| 0.3 + 0.02 * p[0] - 0.01 * p[1];
    for method in [CouplingMethod::Wcm, CouplingMethod::Bdm] {
        let d = demo(method);
        let c = build_constraints(method, &d.mesh, &d.atoms, &d.map).unwrap();
        let fu: Vec<f64> = d.mesh.nodes.iter().map(|n| field(&n.coords)).collect();
        let fq: Vec<f64> = d.atoms.positions.iter().map(field).collect();
        let lhs = apply(&c.wu, &fu);
        let rhs = apply(&c.wq, &fq);
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12 * scale, "{method}: {a} vs {b}");
        }
    }
}

/// Oracle: the weak-coupling rows sum to the area of the lattice cells
/// whose four corner atoms all lie in the coupling region, each cell being
/// a square of side `r0`.
#[test]
fn weak_coupling_rows_integrate_the_overlap() {
    use std::collections::HashSet;
    let d = demo(CouplingMethod::Wcm);
    let c = build_constraints(CouplingMethod::Wcm, &d.mesh, &d.atoms, &d.map).unwrap();
    let total: f64 = c.wq.rows.iter().flat_map(|r| r.iter().map(|e| e.1)).sum();
    let s = d.config.r0 / 2f64.sqrt();
    let site = |p: &[f64; 3]| (((p[0] - 50.0) / s + 26.5).round() as i64, ((p[1] - 50.0) / s + 26.5).round() as i64);
    let coupled: HashSet<(i64, i64)> = d.map.locations.iter().map(|l| site(&d.atoms.positions[l.atom])).collect();
    let mut cells = 0;
    for q in -1..=54i64 {
        for p in -1..=54i64 {
            if (p + q) % 2 != 0 && [(p - 1, q), (p + 1, q), (p, q - 1), (p, q + 1)].iter().all(|k| coupled.contains(k))
            {
                cells += 1;
            }
        }
    }
    let expected = cells as f64 * d.config.r0 * d.config.r0;
    assert!((total - expected).abs() < 1e-9 * expected, "{total} vs {expected}");
    let wu_total: f64 = c.wu.rows.iter().flat_map(|r| r.iter().map(|e| e.1)).sum();
    assert!((wu_total - expected).abs() < 1e-9 * expected);
}

#[test]
fn variant_weights() {
    let mut d = demo(CouplingMethod::Wcm);
    let none = Weights::for_variant(Variant::None, &d.mesh, &d.atoms, &d.map, None, 1e-3).unwrap();
    assert!(none.md_mass.iter().all(|w| *w == 1.0));
    let half = Weights::for_variant(Variant::ConstantHalf, &d.mesh, &d.atoms, &d.map, None, 1e-3).unwrap();
    assert_eq!(half.md_mass.iter().filter(|w| **w == 0.5).count(), 1008);
    assert!(half.fe_stiffness.values().flatten().all(|w| *w == 0.5));
    assert!(matches!(
        Weights::for_variant(Variant::ArlequinDirect, &d.mesh, &d.atoms, &d.map, None, 1e-3),
        Err(Error::Missing(_))
    ));
    let alpha = build_alpha_field(AlphaMethod::Direct, &d.mesh, &d.atoms, &d.config.anchors, &mut d.map).unwrap();
    let w = Weights::for_variant(Variant::ArlequinDirect, &d.mesh, &d.atoms, &d.map, Some(&alpha), 0.01).unwrap();
    for a in &alpha.atoms {
        assert_eq!(w.md_stiffness[a.atom], 1.0 - a.alpha);
        assert_eq!(w.md_mass[a.atom], (1.0 - a.alpha).clamp(0.01, 0.99));
    }
    assert!(w.fe_mass.values().flatten().all(|m| (0.01..=0.99).contains(m)));
}

#[test]
fn oversized_step_is_rejected() {
    let d = demo(CouplingMethod::Wcm);
    let system = build_coupled_system(&d.mesh, &d.atoms, &d.map, None, &d.config, Variant::None).unwrap();
    assert!(matches!(system.check_time_step(1.0), Err(Error::UnstableTimeStep { .. })));
    let state = system.gaussian_state(0.1, 10.0, &[50.0, 50.0, 0.0]);
    assert!(matches!(run(&system, state, 1.0, 200, &[]), Err(Error::Instability { .. })));
}

#[test]
fn orphan_coupling_node_is_a_redundant_row() {
    let mesh = grid_mesh(2, 1, 1.0, |_, _| true);
    // a lattice patch inside the left element only, so the far nodes of
    // the right element get no weak-coupling weight
    let s = 0.2;
    let mut positions = Vec::new();
    for q in 0..4 {
        for p in 0..4 {
            positions.push([0.2 + p as f64 * s, 0.2 + q as f64 * s, 0.0]);
        }
    }
    positions.push([1.5, 0.5, 0.0]);
    let n = positions.len();
    let atoms = AtomSet::new(2, (1..=n).collect(), positions, vec![1.0; n]).unwrap().with_neighbors_within(1.01 * s);
    let map = build_coupling_map(&mesh, &atoms, &[1.0, 1.0]).unwrap();
    let mut config = demo_config();
    config.coupling_method = CouplingMethod::Wcm;
    let err = build_coupled_system(&mesh, &atoms, &map, None, &config, Variant::None).unwrap_err();
    assert!(matches!(err, Error::RedundantConstraints(ref rows) if !rows.is_empty()), "{err}");
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let d = demo(CouplingMethod::Wcm);
    let mut config = d.config.clone();
    config.steps = 30;
    let run_once = || {
        let system = build_coupled_system(&d.mesh, &d.atoms, &d.map, None, &config, Variant::ConstantHalf).unwrap();
        run_experiment(&system, &config).unwrap()
    };
    assert_eq!(run_once(), run_once());
}
