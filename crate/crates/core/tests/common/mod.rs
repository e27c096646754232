#![allow(dead_code)]

use bosonic_bdg::bdg::{assemble_bdg, BdGOperator, Boundary, OneParticleOperator, PairingOperator};
use bosonic_bdg::linalg::{self, c64, cr, CMat};
use bosonic_bdg::models::{chern_insulator, LatticeModel, Term};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    Array2::from_shape_fn((n, n), |_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    linalg::hermitian_part(&random_complex(rng, n, scale))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let m = random_complex(rng, n, scale);
    (&m + &m.t()).mapv(|z| z * 0.5)
}

/// Arbitrary BdG operator; typically dynamically unstable.
pub fn random_bdg(rng: &mut ChaCha8Rng, n: usize) -> BdGOperator {
    let h = random_hermitian(rng, n, 1.0);
    let d = random_symmetric(rng, n, 1.0);
    let mu = rng.random_range(-1.0..1.0);
    assemble_bdg(OneParticleOperator::from_matrix(h).unwrap(), PairingOperator::new(d), mu).unwrap()
}

/// Thermodynamically stable operator: μ is pushed below `‖A₀‖` so that
/// `A_μ ≥ margin`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, pairing: f64, margin: f64) -> BdGOperator {
    let h = random_hermitian(rng, n, 1.0);
    let d = random_symmetric(rng, n, pairing);
    let a0 = BdGOperator::from_fiber(h.clone(), d.clone(), linalg::conj(&h), 0.0).unwrap().a_matrix();
    let (w, _) = linalg::eigh(&a0).unwrap();
    let shift = w[0] - margin;
    assemble_bdg(OneParticleOperator::from_matrix(h).unwrap(), PairingOperator::new(d), shift).unwrap()
}

/// Chern insulator with random small complex hoppings and pairings; both
/// one-particle bands stay gapped, so the BdG operator at `mu` has two
/// separated positive bands.
pub fn random_two_band(rng: &mut ChaCha8Rng) -> (LatticeModel, f64) {
    let mass = rng.random_range(-1.6..-0.4);
    let base = chern_insulator(mass, [1, 1], [Boundary::Periodic; 2]).unwrap();
    let mut amp = |s: f64| c64::new(rng.random_range(-s..s), rng.random_range(-s..s));
    let mut hoppings = base.hoppings.clone();
    let mut pairings = Vec::new();
    for disp in [[0i64, 0], [1, 0], [0, 1]] {
        let back = [-disp[0], -disp[1]];
        for (to, from) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let onsite = disp == [0, 0];
            if onsite && to > from {
                continue;
            }
            let (t, d) = (amp(0.05), amp(0.1));
            if onsite && to == from {
                hoppings.push(Term::new(&disp, to, from, cr(t.re)));
                pairings.push(Term::new(&disp, to, from, d));
            } else {
                hoppings.push(Term::new(&disp, to, from, t));
                hoppings.push(Term::new(&back, from, to, t.conj()));
                pairings.push(Term::new(&disp, to, from, d));
                pairings.push(Term::new(&back, from, to, d));
            }
        }
    }
    let model = LatticeModel::new("random-two-band", vec![1, 1], 2, vec![Boundary::Periodic; 2], hoppings, pairings).unwrap();
    (model, -6.0)
}
