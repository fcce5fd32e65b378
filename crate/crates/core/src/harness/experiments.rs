//! The five experiment pipelines.
//!
//! Every pipeline is a pure function of the configuration: sweep points run
//! in the current rayon pool, each with its own RNG stream derived from the
//! base seed, and records are sorted before they are returned.

use ndarray::Array1;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{DisorderMode, ExperimentConfig, ExperimentKind};
use super::output::{sort_records, ResultRecord};
use crate::dynamics::{
    build_thermal_generator, conjugated_state_set, one_local_unitaries, steady_state, DensityMatrix, LindbladGenerator,
    SpinChainSpec, ThermalBasis,
};
use crate::error::{Error, Result};
use crate::estimators::{
    assemble_dynamical, assemble_steady, derivative_variance_ratio, inject_noise, least_squares_estimator,
    measurement_complexity, psd_constrained_estimator, svd_null_estimator, CorrelationSystem, EstimationReport,
    ModelSpace, SolverKind,
};
use crate::pauli::{enumerate_basis, LocalBasisSpec, PauliString};

pub const THREADS_ENV: &str = "HAMLEARN_THREADS";

const MODEL_STREAM_OFFSET: u64 = 1 << 32;

/// Independent 64-bit seed for stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Worker count from `HAMLEARN_THREADS`, or `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!("{THREADS_ENV}={v:?} must be a positive integer"))),
        },
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers (rayon's default
/// when `None`).
pub fn with_thread_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    config.validate(kind)?;
    let mut records = match kind {
        ExperimentKind::SteadySweep => run_steady_sweep(config)?,
        ExperimentKind::NoiseSweep => run_noise_sweep(config)?,
        ExperimentKind::DynamicSize => run_dynamic_size(config)?,
        ExperimentKind::DynamicDt => run_dynamic_dt(config)?,
        ExperimentKind::FdVariance => vec![run_fd_variance(config)?],
    };
    sort_records(&mut records);
    Ok(records)
}

/// Generator, fixed point, model space and true coordinates for one chain.
pub struct TruthSetup {
    pub generator: LindbladGenerator,
    pub steady: DensityMatrix,
    pub model: ModelSpace,
    pub x_true: Array1<f64>,
}

impl TruthSetup {
    pub fn new(spec: &SpinChainSpec, config: &ExperimentConfig) -> Result<Self> {
        let generator = build_thermal_generator(spec, ThermalBasis::Ladder)?;
        let steady = steady_state(&generator)?;
        let model = config.model.model(spec.n_sites)?;
        let x_true = model.coordinates_of(&generator)?;
        Ok(Self { generator, steady, model, x_true })
    }
}

fn chain_inputs(n_sites: usize, locality: usize) -> Result<Vec<PauliString>> {
    enumerate_basis(&LocalBasisSpec::chain(n_sites, locality.min(n_sites), true))
}

/// Width of the window spanned by the string's support.
fn span(p: &PauliString) -> usize {
    let s = p.support();
    match (s.first(), s.last()) {
        (Some(a), Some(b)) => b - a + 1,
        _ => 0,
    }
}

/// Short hex digest of the matrix and right-hand side bits.
pub fn system_digest(system: &CorrelationSystem) -> String {
    let mut h = Sha256::new();
    h.update((system.rows() as u64).to_le_bytes());
    h.update((system.cols() as u64).to_le_bytes());
    for v in system.matrix().iter().chain(system.rhs().into_iter().flatten()) {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn truth_residual(system: &CorrelationSystem, x_true: &Array1<f64>) -> f64 {
    let mut r = system.matrix().dot(x_true);
    if let Some(b) = system.rhs() {
        r -= b;
    }
    r.dot(&r).sqrt()
}

fn solve(kind: SolverKind, system: &CorrelationSystem, model: &ModelSpace) -> Result<EstimationReport> {
    match kind {
        SolverKind::SvdNull => svd_null_estimator(system),
        SolverKind::LeastSquares => least_squares_estimator(system),
        SolverKind::PsdConstrained => psd_constrained_estimator(system, model),
    }
}

fn fill_report(rec: &mut ResultRecord, report: &mut EstimationReport, x_true: &Array1<f64>, model: &ModelSpace) -> Result<()> {
    let m = report.evaluate(x_true, model)?;
    rec.solver = Some(report.solver);
    rec.delta_h = Some(m.delta_h);
    rec.delta_hl = Some(m.delta_hl);
    rec.delta_env = m.delta_env;
    rec.s0 = Some(report.s0);
    rec.gap = Some(report.gap);
    rec.ambiguous = Some(report.ambiguous);
    Ok(())
}

/// Cardinalities at which the steady sweep first reaches each input locality.
pub fn locality_transitions(records: &[ResultRecord]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for r in records.iter().filter(|r| r.experiment == Some(ExperimentKind::SteadySweep)) {
        if let Some(k) = r.input_locality {
            if out.last().is_none_or(|&(last, _)| k > last) {
                out.push((k, r.value as usize));
            }
        }
    }
    out
}

pub fn run_steady_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let n = config.chain.n_sites;
    let truth = TruthSetup::new(&config.chain.spec(n), config)?;
    let inputs = chain_inputs(n, config.steady.input_locality)?;
    let full = assemble_steady(&truth.steady, &inputs, &truth.model)?;
    let stride = config.steady.stride;
    let mut sizes: Vec<usize> = (stride..=inputs.len()).step_by(stride).collect();
    if sizes.last() != Some(&inputs.len()) {
        sizes.push(inputs.len());
    }
    sizes
        .par_iter()
        .map(|&k| {
            let system = full.restrict_inputs(k);
            let mut report = svd_null_estimator(&system)?;
            let mut rec = ResultRecord::new(ExperimentKind::SteadySweep, "cardinality", k as f64);
            rec.n_sites = Some(n);
            rec.rows = Some(system.rows());
            rec.input_locality = Some(span(&inputs[k - 1]));
            rec.measurement_complexity = Some(measurement_complexity(&system));
            rec.truth_residual = Some(truth_residual(&system, &truth.x_true));
            rec.system_digest = Some(system_digest(&system));
            fill_report(&mut rec, &mut report, &truth.x_true, &truth.model)?;
            Ok(rec)
        })
        .collect()
}

/// Chain with every field component and coupling shifted by an independent
/// uniform draw from `[-width, width]`.
pub fn disordered_chain(config: &ExperimentConfig, seed: u64) -> SpinChainSpec {
    let mut spec = config.chain.spec(config.chain.n_sites);
    let width = config.noise.disorder_width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in spec.local_fields.iter_mut().flatten().chain(spec.couplings.iter_mut()) {
        if width > 0.0 {
            *v += rng.random_range(-width..=width);
        }
    }
    spec
}

struct NoiseInstance {
    truth: TruthSetup,
    system: CorrelationSystem,
}

fn noise_instance(config: &ExperimentConfig, spec: &SpinChainSpec) -> Result<NoiseInstance> {
    let truth = TruthSetup::new(spec, config)?;
    let inputs = chain_inputs(spec.n_sites, config.steady.input_locality)?;
    let system = assemble_steady(&truth.steady, &inputs, &truth.model)?;
    Ok(NoiseInstance { truth, system })
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<f64>>>()?;
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn run_noise_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let n = config.chain.n_sites;
    let seeds = config.noise.seeds as u64;
    let instances: Vec<NoiseInstance> = match config.noise.disorder_mode {
        DisorderMode::Seeds => vec![noise_instance(config, &config.chain.spec(n))?],
        DisorderMode::Models => (0..seeds)
            .into_par_iter()
            .map(|k| noise_instance(config, &disordered_chain(config, derive_seed(config.seed, MODEL_STREAM_OFFSET + k))))
            .collect::<Result<_>>()?,
    };
    let tasks: Vec<(f64, u64)> =
        config.noise.sigma_grid.iter().flat_map(|&sigma| (0..seeds).map(move |k| (sigma, k))).collect();
    let per_seed: Vec<ResultRecord> = tasks
        .par_iter()
        .map(|&(sigma, k)| {
            let inst = &instances[if instances.len() == 1 { 0 } else { k as usize }];
            let noisy = inject_noise(&inst.system, sigma, derive_seed(config.seed, k))?;
            let mut report = svd_null_estimator(&noisy)?;
            let mut rec = ResultRecord::new(ExperimentKind::NoiseSweep, "sigma", sigma);
            rec.n_sites = Some(n);
            rec.seed = Some(k);
            rec.rows = Some(noisy.rows());
            rec.system_digest = Some(system_digest(&noisy));
            rec.measurement_complexity = Some(measurement_complexity(&noisy));
            rec.truth_residual = Some(truth_residual(&noisy, &inst.truth.x_true));
            fill_report(&mut rec, &mut report, &inst.truth.x_true, &inst.truth.model)?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let mut out = per_seed.clone();
    for &sigma in &config.noise.sigma_grid {
        let group: Vec<&ResultRecord> = per_seed.iter().filter(|r| r.value == sigma).collect();
        let mut rec = ResultRecord::new(ExperimentKind::NoiseSweep, "sigma", sigma);
        rec.n_sites = Some(n);
        rec.solver = Some(SolverKind::SvdNull);
        rec.rows = group[0].rows;
        rec.measurement_complexity = group[0].measurement_complexity;
        rec.delta_h = mean(group.iter().map(|r| r.delta_h));
        rec.delta_hl = mean(group.iter().map(|r| r.delta_hl));
        rec.delta_env = mean(group.iter().map(|r| r.delta_env));
        rec.s0 = mean(group.iter().map(|r| r.s0));
        rec.gap = mean(group.iter().map(|r| r.gap));
        rec.truth_residual = mean(group.iter().map(|r| r.truth_residual));
        rec.ambiguous = Some(group.iter().any(|r| r.ambiguous == Some(true)));
        out.push(rec);
    }
    Ok(out)
}

struct DynamicInputs {
    truth: TruthSetup,
    states: Vec<DensityMatrix>,
    inputs: Vec<PauliString>,
}

fn dynamic_inputs(config: &ExperimentConfig, n: usize) -> Result<DynamicInputs> {
    let truth = TruthSetup::new(&config.chain.spec(n), config)?;
    let states = conjugated_state_set(&truth.steady, &one_local_unitaries(n))?;
    let inputs = chain_inputs(n, config.dynamic.input_locality)?;
    Ok(DynamicInputs { truth, states, inputs })
}

fn dynamic_records(
    setup: &DynamicInputs,
    kind: ExperimentKind,
    variable: &str,
    value: f64,
    dt: f64,
    order: u8,
    solvers: &[SolverKind],
) -> Result<Vec<ResultRecord>> {
    let t = &setup.truth;
    let system = assemble_dynamical(&setup.states, &setup.inputs, &t.generator, dt, order, &t.model)?;
    let digest = system_digest(&system);
    let residual = truth_residual(&system, &t.x_true);
    let complexity = measurement_complexity(&system);
    solvers
        .iter()
        .map(|&solver| {
            let mut report = solve(solver, &system, &t.model)?;
            let mut rec = ResultRecord::new(kind, variable, value);
            rec.n_sites = Some(t.model.n_sites());
            rec.order = Some(order);
            rec.rows = Some(system.rows());
            rec.measurement_complexity = Some(complexity);
            rec.truth_residual = Some(residual);
            rec.system_digest = Some(digest.clone());
            fill_report(&mut rec, &mut report, &t.x_true, &t.model)?;
            Ok(rec)
        })
        .collect()
}

pub fn run_dynamic_size(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let d = &config.dynamic;
    let per_size: Vec<Vec<ResultRecord>> = d
        .sizes
        .par_iter()
        .map(|&n| {
            let setup = dynamic_inputs(config, n)?;
            dynamic_records(&setup, ExperimentKind::DynamicSize, "n_sites", n as f64, d.dt, d.order, &d.solvers)
        })
        .collect::<Result<_>>()?;
    Ok(per_size.into_iter().flatten().collect())
}

pub fn run_dynamic_dt(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let d = &config.dynamic;
    let setup = dynamic_inputs(config, config.chain.n_sites)?;
    let tasks: Vec<(f64, u8)> = d.dt_grid.iter().flat_map(|&dt| [(dt, 1u8), (dt, 2u8)]).collect();
    let per_point: Vec<Vec<ResultRecord>> = tasks
        .par_iter()
        .map(|&(dt, order)| dynamic_records(&setup, ExperimentKind::DynamicDt, "dt", dt, dt, order, &d.solvers))
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn run_fd_variance(config: &ExperimentConfig) -> Result<ResultRecord> {
    let f = &config.fd_variance;
    let v = derivative_variance_ratio(f.samples, f.sigma, config.seed)?;
    let mut rec = ResultRecord::new(ExperimentKind::FdVariance, "samples", f.samples as f64);
    rec.seed = Some(config.seed);
    rec.estimate = Some(v.ratio);
    rec.ci_low = Some(v.ci_low);
    rec.ci_high = Some(v.ci_high);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.chain.n_sites = 2;
        c.noise.sigma_grid = vec![0.0, 1e-6, 1e-5];
        c.noise.seeds = 3;
        c.dynamic.sizes = vec![2];
        c.dynamic.dt_grid = vec![1e-3, 1e-2];
        c.fd_variance.samples = 20_000;
        c
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..50).map(|k| derive_seed(11, k)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 50);
        assert_eq!(derive_seed(11, 3), a[3]);
        assert_ne!(derive_seed(12, 3), a[3]);
    }

    #[test]
    fn steady_sweep_shape() {
        let mut c = small_config();
        c.chain.n_sites = 3;
        let recs = run_experiment(ExperimentKind::SteadySweep, &c).unwrap();
        assert_eq!(recs.len(), 63);
        let mc: Vec<usize> = recs.iter().map(|r| r.measurement_complexity.unwrap()).collect();
        assert!(mc.windows(2).all(|w| w[0] <= w[1]));
        let last = recs.last().unwrap();
        assert!(last.delta_h.unwrap() < 1e-6, "{last:?}");
        assert!(!last.ambiguous.unwrap());
        assert_eq!(locality_transitions(&recs), vec![(1, 1), (2, 10), (3, 28)]);

        // Two sites give 30 rows for 51 unknowns.
        c.chain.n_sites = 2;
        c.steady.stride = 4;
        let recs = run_experiment(ExperimentKind::SteadySweep, &c).unwrap();
        let sizes: Vec<f64> = recs.iter().map(|r| r.value).collect();
        assert_eq!(sizes, vec![4.0, 8.0, 12.0, 15.0]);
        assert!(recs.iter().all(|r| r.ambiguous == Some(true)));
    }

    #[test]
    fn noise_sweep_zero_sigma_matches_clean_system() {
        let mut c = small_config();
        c.chain.n_sites = 3;
        let recs = run_experiment(ExperimentKind::NoiseSweep, &c).unwrap();
        assert_eq!(recs.len(), 3 * 4);
        let steady = run_experiment(ExperimentKind::SteadySweep, &c).unwrap();
        let clean = steady.last().unwrap();
        for r in recs.iter().filter(|r| r.value == 0.0 && r.seed.is_some()) {
            assert_eq!(r.system_digest, clean.system_digest);
            assert_eq!(r.delta_h, clean.delta_h);
            assert_eq!(r.s0, clean.s0);
        }
        let means: Vec<&ResultRecord> = recs.iter().filter(|r| r.seed.is_none()).collect();
        assert_eq!(means.len(), 3);
        assert!(means[2].delta_h > means[1].delta_h);
    }

    #[test]
    fn disordered_models_differ_per_seed() {
        let mut c = small_config();
        c.chain.n_sites = 3;
        c.noise.disorder_mode = DisorderMode::Models;
        let a = disordered_chain(&c, 1);
        let b = disordered_chain(&c, 2);
        assert_ne!(a, b);
        assert!(a.local_fields[0].iter().zip(c.chain.field).all(|(x, y)| (x - y).abs() <= 0.1));
        let recs = run_experiment(ExperimentKind::NoiseSweep, &c).unwrap();
        assert!(recs.iter().filter(|r| r.value == 0.0).all(|r| r.delta_h.unwrap() < 1e-6));
    }

    #[test]
    fn dynamic_solvers_share_the_system() {
        let c = small_config();
        let recs = run_experiment(ExperimentKind::DynamicSize, &c).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].system_digest, recs[1].system_digest);
        assert_eq!(recs[0].solver, Some(SolverKind::LeastSquares));
        assert!(recs[0].delta_hl.unwrap() <= 1e-4);
        let recs = run_experiment(ExperimentKind::DynamicDt, &c).unwrap();
        assert_eq!(recs.len(), 2 * 2 * 2);
    }

    #[test]
    fn fd_variance_is_reproducible() {
        let c = small_config();
        let a = run_experiment(ExperimentKind::FdVariance, &c).unwrap();
        let b = run_experiment(ExperimentKind::FdVariance, &c).unwrap();
        assert_eq!(a, b);
        assert!((a[0].estimate.unwrap() - 3.25).abs() < 0.2);
    }

    #[test]
    fn pool_size_does_not_change_records() {
        let c = small_config();
        let serial = with_thread_pool(Some(1), || run_experiment(ExperimentKind::NoiseSweep, &c)).unwrap().unwrap();
        let parallel = with_thread_pool(Some(4), || run_experiment(ExperimentKind::NoiseSweep, &c)).unwrap().unwrap();
        assert_eq!(serial, parallel);
    }
}
