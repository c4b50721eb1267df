use arlequin_core::lattice::{elastic_tensor, md_tangent, pair_energy, LatticeSpec, PairPotential};
use arlequin_core::AtomSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Richardson-extrapolated central second difference.
fn second_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[test]
fn phi_derivatives_match_finite_differences() {
    let p = PairPotential::default();
    for r in [0.9 * p.r0, p.r0, 1.05 * p.r0, 1.3 * p.r0] {
        let fd2 = second_derivative(|x| p.phi(x).unwrap(), r, 1e-3);
        let exact = p.phi_double_prime(r).unwrap();
        assert!((fd2 - exact).abs() < 1e-8 * exact.abs().max(1.0), "r={r}: {fd2} vs {exact}");
        let h = 1e-5;
        let fd1 = (p.phi(r + h).unwrap() - p.phi(r - h).unwrap()) / (2.0 * h);
        assert!((fd1 - p.phi_prime(r).unwrap()).abs() < 1e-8 * exact.abs());
    }
}

fn jittered_cluster(rng: &mut impl Rng, r0: f64) -> AtomSet {
    let s = r0 / 2f64.sqrt();
    let mut positions = Vec::new();
    for q in 0..5 {
        for p in 0..5 {
            if (p + q) % 2 == 0 {
                positions.push([
                    p as f64 * s + rng.random_range(-0.05..0.05),
                    q as f64 * s + rng.random_range(-0.05..0.05),
                    0.0,
                ]);
            }
        }
    }
    let n = positions.len();
    AtomSet::new(2, (1..=n).collect(), positions, vec![1.0; n]).unwrap().with_neighbors_within(1.2 * r0)
}

/// Oracle: central differences of the exact pair energy.
#[test]
fn tangent_matches_energy_hessian() {
    let p = PairPotential::default();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let atoms = jittered_cluster(&mut rng, p.r0);
    assert!(!atoms.pairs.is_empty());
    let k = md_tangent(&atoms, &p).unwrap();
    let n = 2 * atoms.len();
    let h = 1e-4;
    let energy = |u: &[f64]| pair_energy(&atoms, &p, u).unwrap();
    let scale = (0..n).map(|i| k.get(i, i).abs()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut u = vec![0.0; n];
            let mut at = |di: f64, dj: f64| {
                u.iter_mut().for_each(|v| *v = 0.0);
                u[i] += di;
                u[j] += dj;
                energy(&u)
            };
            let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
            worst = worst.max((fd - k.get(i, j)).abs());
        }
    }
    assert!(worst < 1e-6 * scale, "{worst} vs {scale}");
    assert!(k.is_symmetric(1e-12 * scale));
}

/// Oracle: second derivative of the lattice energy density under uniform
/// strain, summed over the representative bonds.
#[test]
fn elastic_tensor_matches_strain_energy() {
    let p = PairPotential::default();
    let lattice = LatticeSpec::square_45(p.r0);
    let c = elastic_tensor(&lattice, &p).unwrap();
    let density = |e: [[f64; 2]; 2]| {
        lattice
            .representative
            .iter()
            .map(|r| {
                let x = r[0] + e[0][0] * r[0] + e[0][1] * r[1];
                let y = r[1] + e[1][0] * r[0] + e[1][1] * r[1];
                p.phi(x.hypot(y)).unwrap()
            })
            .sum::<f64>()
            / (2.0 * lattice.cell_volume)
    };
    let c1111 = second_derivative(|s| density([[s, 0.0], [0.0, 0.0]]), 0.0, 1e-3);
    let c2222 = second_derivative(|s| density([[0.0, 0.0], [0.0, s]]), 0.0, 1e-3);
    assert!((c1111 - c.c[0][0][0][0]).abs() < 1e-6 * c1111);
    assert!((c2222 - c.c[1][1][1][1]).abs() < 1e-6 * c2222);
    let d2 = p.phi_double_prime(p.r0).unwrap();
    assert!((c.c[0][0][0][0] - d2).abs() < 1e-10 * d2);
    assert!((d2 - 23.39).abs() < 5e-3);
}
