mod common;

use common::{complex_gaussian, max_abs, random_generator, random_hermitian, random_state};
use hamlearn::dynamics::{build_thermal_generator, propagate, steady_state, Propagator, SpinChainSpec, ThermalBasis};
use hamlearn::estimators::solve::project_gamma_blocks;
use hamlearn::estimators::{assemble_steady, inject_noise, CorrelationSystem, GammaConstraint, ModelSpace};
use hamlearn::linalg::{dagger, hermitian_eigenvalues, hermitize, trace, C64};
use hamlearn::pauli::{anticommutator, commutator, enumerate_basis, pauli_mul, LocalBasisSpec, Pauli, PauliString};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    prop::collection::vec(0..4usize, n).prop_map(|ix| PauliString::new(ix.into_iter().map(|i| Pauli::ALL[i]).collect()).unwrap())
}

fn pauli_pair() -> impl Strategy<Value = (PauliString, PauliString)> {
    (1..=5usize).prop_flat_map(|n| (pauli_string(n), pauli_string(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn commutator_plus_anticommutator_is_twice_the_product((p, q) in pauli_pair()) {
        let (phase, r) = pauli_mul(&p, &q).unwrap();
        let mut sum = commutator(&p, &q).unwrap();
        for (s, c) in anticommutator(&p, &q).unwrap().iter() {
            sum.add(s.clone(), *c);
        }
        prop_assert_eq!(sum.len(), 1);
        let c = sum.get(&r).unwrap();
        prop_assert!((c - phase.to_complex() * 2.0).norm() < 1e-15);
    }

    #[test]
    fn symbolic_product_matches_dense((p, q) in pauli_pair()) {
        let (phase, r) = pauli_mul(&p, &q).unwrap();
        let dense = p.to_dense().unwrap().dot(&q.to_dense().unwrap());
        let symbolic = r.to_dense().unwrap().mapv(|z| z * phase.to_complex());
        prop_assert!(max_abs(&(&dense - &symbolic)) < 1e-13);
        prop_assert_eq!(p.commutes_with(&q), commutator(&p, &q).unwrap().is_empty());
    }

    #[test]
    fn adjoint_generator_is_dual(seed in any::<u64>(), n in 1..=3usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen = random_generator(n, &mut rng);
        let rho = random_state(n, &mut rng);
        let o = complex_gaussian(1 << n, 1 << n, &mut rng);
        let lhs = trace(&o.dot(&gen.apply(rho.matrix()).unwrap()));
        let rhs = trace(&gen.adjoint_apply(&o).unwrap().dot(rho.matrix()));
        prop_assert!((lhs - rhs).norm() < 1e-11, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn propagation_keeps_trace_hermiticity_and_positivity(seed in any::<u64>(), n in 1..=3usize, t in 0.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen = random_generator(n, &mut rng);
        let rho = random_state(n, &mut rng);
        let out = Propagator::new(&gen, t).unwrap().evolve(rho.matrix()).unwrap();
        prop_assert!((trace(&out) - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(max_abs(&(&out - &dagger(&out))) < 1e-12);
        let min = hermitian_eigenvalues(&hermitize(&out)).unwrap()[0];
        prop_assert!(min > -1e-10, "min eigenvalue {min}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_is_a_semigroup(seed in any::<u64>(), n in 1..=3usize, s in 0.0..1.5f64, t in 0.0..1.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen = random_generator(n, &mut rng);
        let rho = random_state(n, &mut rng);
        let two_steps = propagate(&gen, &propagate(&gen, &rho, s).unwrap(), t).unwrap();
        let one_step = propagate(&gen, &rho, s + t).unwrap();
        prop_assert!(max_abs(&(two_steps.matrix() - one_step.matrix())) < 1e-10);
    }

    #[test]
    fn thermal_bases_give_the_same_generator(g in 0.0..0.5f64, nbar in 0.0..3.0f64, n in 1..=3usize) {
        let spec = SpinChainSpec::uniform(n, [0.5, 0.0, -2.55], 0.25, g, nbar);
        let a = build_thermal_generator(&spec, ThermalBasis::Ladder).unwrap().liouvillian_matrix();
        let b = build_thermal_generator(&spec, ThermalBasis::Pauli).unwrap().liouvillian_matrix();
        prop_assert!(max_abs(&(&a - &b)) < 1e-13);
    }

    #[test]
    fn projection_keeps_antihermitian_part_and_is_nearest(seed in any::<u64>(), constraint_ix in 0..2usize) {
        let constraint = [GammaConstraint::UnconstrainedComplex, GammaConstraint::Hermitian][constraint_ix];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ModelSpace::local(2, 1, 1, constraint).unwrap();
        let x0 = Array1::from_shape_fn(model.dim(), |_| rng.sample::<f64, _>(StandardNormal));
        let mut x = x0.clone();
        let min = project_gamma_blocks(&mut x, &model).unwrap();
        prop_assert!(min >= -1e-12);
        let h = model.hamiltonian_range();
        prop_assert_eq!(x.slice(ndarray::s![h.clone()]), x0.slice(ndarray::s![h]));
        for r in 0..model.regions().len() {
            let before = model.gamma_matrix(&x0, r);
            let after = model.gamma_matrix(&x, r);
            let anti = |m: &Array2<C64>| m - &hermitize(m);
            prop_assert!(max_abs(&(anti(&before) - anti(&after))) < 1e-12);
            let b = complex_gaussian(3, 3, &mut rng);
            let other_psd = b.dot(&dagger(&b));
            let dist = |m: &Array2<C64>| (&hermitize(&before) - m).iter().map(|z| z.norm_sqr()).sum::<f64>();
            prop_assert!(dist(&hermitize(&after)) <= dist(&other_psd) + 1e-12);
        }
        let mut again = x.clone();
        project_gamma_blocks(&mut again, &model).unwrap();
        prop_assert!((&again - &x).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn system_file_round_trips(seed in any::<u64>(), rows in 1..12usize, cols in 1..9usize, with_rhs in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let special = [0.0, -0.0, 5e-324, 1e300, -1.0 / 3.0];
        let value = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.2) { special[rng.random_range(0..special.len())] } else { rng.sample::<f64, _>(StandardNormal) }
        };
        let m = Array2::from_shape_fn((rows, cols), |_| value(&mut rng));
        let b = with_rhs.then(|| Array1::from_shape_fn(rows, |_| value(&mut rng)));
        let system = CorrelationSystem::from_matrix(m, b).unwrap();
        let mut buf = Vec::new();
        system.write_to(&mut buf).unwrap();
        let back = CorrelationSystem::read_from(buf.as_slice()).unwrap();
        let bits = |s: &CorrelationSystem| s.matrix().iter().chain(s.rhs().into_iter().flatten()).map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&system));
        prop_assert_eq!(back.row_labels(), system.row_labels());
        prop_assert_eq!(back.col_labels(), system.col_labels());
        prop_assert_eq!(back.rhs().is_some(), with_rhs);
    }
}

#[test]
fn assembled_system_file_round_trips() {
    let spec = SpinChainSpec::uniform(2, [0.5, 0.0, -2.55], 0.25, 0.05, 0.5);
    let rho = steady_state(&build_thermal_generator(&spec, ThermalBasis::Ladder).unwrap()).unwrap();
    let model = ModelSpace::local(2, 2, 1, GammaConstraint::UnconstrainedComplex).unwrap();
    let inputs = enumerate_basis(&LocalBasisSpec::chain(2, 2, true)).unwrap();
    let system = assemble_steady(&rho, &inputs, &model).unwrap();
    let mut buf = Vec::new();
    system.write_to(&mut buf).unwrap();
    let back = CorrelationSystem::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.matrix(), system.matrix());
    assert_eq!(back.row_labels(), system.row_labels());
    assert_eq!(back.col_labels(), system.col_labels());
    assert_eq!(back.hamiltonian_cols(), system.hamiltonian_cols());
}

#[test]
fn injected_noise_has_the_requested_statistics() {
    let (rows, cols) = (200, 500);
    let clean = CorrelationSystem::from_matrix(Array2::zeros((rows, cols)), Some(Array1::zeros(rows))).unwrap();
    for (sigma, seed) in [(1e-6, 1u64), (0.3, 2), (4.0, 3)] {
        let noisy = inject_noise(&clean, sigma, seed).unwrap();
        let draws: Vec<f64> = noisy.matrix().iter().chain(noisy.rhs().unwrap()).copied().collect();
        let n = draws.len() as f64;
        assert!(n >= 1e5);
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 5.0 * sigma / n.sqrt(), "mean {mean} at sigma {sigma}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "variance {var} at sigma {sigma}");
        let within_one = draws.iter().filter(|v| v.abs() < sigma).count() as f64 / n;
        assert!((within_one - 0.682_689).abs() < 0.01);
        assert_eq!(inject_noise(&clean, sigma, seed).unwrap(), noisy);
        assert_ne!(inject_noise(&clean, sigma, seed + 100).unwrap(), noisy);
    }
    assert_eq!(inject_noise(&clean, 0.0, 9).unwrap(), clean);
    assert!(inject_noise(&clean, -1.0, 9).is_err());
}

#[test]
fn random_hermitian_helper_is_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h = random_hermitian(4, &mut rng);
    assert!(max_abs(&(&h - &dagger(&h))) == 0.0);
}
