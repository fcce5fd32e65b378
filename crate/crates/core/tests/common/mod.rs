#![allow(dead_code)]

use hamlearn::dynamics::{DensityMatrix, JumpTerm, LindbladGenerator};
use hamlearn::linalg::{dagger, trace, C64};
use hamlearn::pauli::{Pauli, PauliString, WeightedPauliSum};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn ps(s: &str) -> PauliString {
    s.parse().unwrap()
}

pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn complex_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> Array2<C64> {
    let a = complex_gaussian(dim, dim, rng);
    (&a + &dagger(&a)).mapv(|z| z * 0.5)
}

/// Full-rank state `A A† / Tr`.
pub fn random_state(n_sites: usize, rng: &mut impl Rng) -> DensityMatrix {
    let a = complex_gaussian(1 << n_sites, 1 << n_sites, rng);
    let m = a.dot(&dagger(&a));
    let tr = trace(&m).re;
    DensityMatrix::new(m.mapv(|z| z / tr)).unwrap()
}

fn single(n: usize, site: usize, p: Pauli) -> WeightedPauliSum {
    WeightedPauliSum::from_terms(n, [(PauliString::single(n, site, p).unwrap(), C64::new(1.0, 0.0))]).unwrap()
}

/// Random Hamiltonian plus a PSD `{X, Y, Z}` dissipator on every site and a
/// two-site `{XX, ZZ}` block on the first bond.
pub fn random_generator(n_sites: usize, rng: &mut impl Rng) -> LindbladGenerator {
    let h = random_hermitian(1 << n_sites, rng);
    let mut terms = Vec::new();
    for site in 0..n_sites {
        let b = complex_gaussian(3, 3, rng).mapv(|z| z * 0.2);
        terms.push(JumpTerm {
            sites: vec![site],
            operators: Pauli::NON_IDENTITY.iter().map(|&p| single(n_sites, site, p)).collect(),
            gamma: b.dot(&dagger(&b)),
        });
    }
    if n_sites >= 2 {
        let pair = |p: Pauli| {
            let mut symbols = vec![Pauli::I; n_sites];
            symbols[0] = p;
            symbols[1] = p;
            WeightedPauliSum::from_terms(n_sites, [(PauliString::new(symbols).unwrap(), C64::new(1.0, 0.0))]).unwrap()
        };
        let b = complex_gaussian(2, 2, rng).mapv(|z| z * 0.2);
        terms.push(JumpTerm { sites: vec![0, 1], operators: vec![pair(Pauli::X), pair(Pauli::Z)], gamma: b.dot(&dagger(&b)) });
    }
    LindbladGenerator::new(n_sites, h, terms).unwrap()
}
