//! Dense open-system engine for thermal XX spin chains.
//!
//! Superoperators act on column-stacked density matrices, so
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`. Units have ħ = 1.
//!
//! The ground state of a site is `|0⟩` (the `Z = +1` eigenstate). Relaxation
//! is `σ⁻ = |0⟩⟨1| = (X + iY)/2` and excitation is `σ⁺ = |1⟩⟨0| = (X − iY)/2`,
//! with jump operators `L± = √g± σ±`, `g₊ = g n̄ / 2` and `g₋ = g (n̄ + 1) / 2`.

use ndarray::{Array1, Array2};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dagger, hermitize, kron, C64, I, ONE, ZERO};
use crate::pauli::{Pauli, PauliString, WeightedPauliSum, DEFAULT_DENSE_CAP};

/// Dense `2^N × 2^N` complex matrix.
pub type DenseOperator = Array2<C64>;

/// Hermiticity and trace tolerance for [`DensityMatrix`].
pub const STATE_TOLERANCE: f64 = 1e-12;
/// Most negative eigenvalue a [`DensityMatrix`] may have.
pub const STATE_MIN_EIGENVALUE: f64 = -1e-10;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Array2<C64>);

impl DensityMatrix {
    pub fn new(m: Array2<C64>) -> Result<Self> {
        let dim = m.nrows();
        if dim != m.ncols() || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!("shape {:?} is not 2^N square", m.dim())));
        }
        let herm = linalg::hermiticity_defect(&m);
        if herm > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("Hermiticity defect {herm:e}")));
        }
        let tr = linalg::trace(&m);
        if (tr - ONE).norm() > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let eigs = linalg::hermitian_eigenvalues(&hermitize(&m))?;
        let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        if min < STATE_MIN_EIGENVALUE {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    /// Computational basis projector `|k⟩⟨k|`.
    pub fn basis_state(n_sites: usize, k: usize) -> Result<Self> {
        let dim = 1usize << n_sites;
        if k >= dim {
            return Err(Error::InvalidParameter(format!("basis index {k} out of range")));
        }
        let mut m = Array2::zeros((dim, dim));
        m[[k, k]] = ONE;
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(psi: &Array1<C64>) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi = psi.mapv(|z| z / norm);
        let m = Array2::from_shape_fn((psi.len(), psi.len()), |(i, j)| psi[i] * psi[j].conj());
        Self::new(m)
    }

    pub fn maximally_mixed(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        Self(Array2::eye(dim).mapv(|z: C64| z / dim as f64))
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_sites(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reservoir {
    /// Reservoir-spin coupling rate.
    pub g: f64,
    /// Thermal occupation number.
    pub nbar: f64,
}

impl Reservoir {
    /// `(g₊, g₋)`.
    pub fn rates(&self) -> (f64, f64) {
        (self.g * self.nbar / 2.0, self.g * (self.nbar + 1.0) / 2.0)
    }
}

/// Open XX chain: `H = Σ c_i·σ_i + Σ J_{i,i+1} X_i X_{i+1}` plus a thermal
/// reservoir on every site.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinChainSpec {
    pub n_sites: usize,
    pub local_fields: Vec<[f64; 3]>,
    pub couplings: Vec<f64>,
    pub reservoir: Reservoir,
}

impl SpinChainSpec {
    pub fn uniform(n_sites: usize, field: [f64; 3], coupling: f64, g: f64, nbar: f64) -> Self {
        Self {
            n_sites,
            local_fields: vec![field; n_sites],
            couplings: vec![coupling; n_sites.saturating_sub(1)],
            reservoir: Reservoir { g, nbar },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidParameter("chain needs at least one site".into()));
        }
        if self.n_sites > DEFAULT_DENSE_CAP {
            return Err(Error::CapExceeded { n_sites: self.n_sites, cap: DEFAULT_DENSE_CAP });
        }
        check_dim(self.n_sites, self.local_fields.len())?;
        check_dim(self.n_sites - 1, self.couplings.len())?;
        let Reservoir { g, nbar } = self.reservoir;
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling rate g = {g} must be >= 0")));
        }
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::InvalidParameter(format!("thermal occupation n̄ = {nbar} must be >= 0")));
        }
        let all_finite = self.local_fields.iter().flatten().chain(&self.couplings).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("fields and couplings must be finite".into()));
        }
        Ok(())
    }

    /// Hamiltonian as a Pauli sum.
    pub fn hamiltonian_terms(&self) -> Result<WeightedPauliSum> {
        self.validate()?;
        let n = self.n_sites;
        let mut h = WeightedPauliSum::new(n);
        for (site, field) in self.local_fields.iter().enumerate() {
            for (p, c) in Pauli::NON_IDENTITY.iter().zip(field) {
                h.add(PauliString::single(n, site, *p)?, C64::new(*c, 0.0));
            }
        }
        for (bond, j) in self.couplings.iter().enumerate() {
            let mut symbols = vec![Pauli::I; n];
            symbols[bond] = Pauli::X;
            symbols[bond + 1] = Pauli::X;
            h.add(PauliString::new(symbols)?, C64::new(*j, 0.0));
        }
        Ok(h)
    }
}

pub fn build_hamiltonian(spec: &SpinChainSpec) -> Result<DenseOperator> {
    spec.hamiltonian_terms()?.to_dense()
}

/// Operator basis used to express the thermal dissipator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermalBasis {
    /// `{σ⁺, σ⁻}` with `γ = diag(g₊, g₋)`.
    Ladder,
    /// `{X, Y}` with the 2×2 coefficient matrix obtained by expanding σ±.
    Pauli,
}

/// Dissipator block `Σ_nm γ_nm (L_n ρ L_m† − ½{L_m† L_n, ρ})` over one region.
#[derive(Debug, Clone)]
pub struct JumpTerm {
    pub sites: Vec<usize>,
    pub operators: Vec<WeightedPauliSum>,
    pub gamma: Array2<C64>,
}

#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    n_sites: usize,
    hamiltonian: DenseOperator,
    jump_terms: Vec<JumpTerm>,
    dense_jumps: Vec<Vec<DenseOperator>>,
    /// `Σ γ_nm L_m† L_n` summed over all terms.
    effective: DenseOperator,
}

impl LindbladGenerator {
    pub fn new(n_sites: usize, hamiltonian: DenseOperator, jump_terms: Vec<JumpTerm>) -> Result<Self> {
        if n_sites > DEFAULT_DENSE_CAP {
            return Err(Error::CapExceeded { n_sites, cap: DEFAULT_DENSE_CAP });
        }
        let dim = 1usize << n_sites;
        check_dim(dim, hamiltonian.nrows())?;
        check_dim(dim, hamiltonian.ncols())?;
        let mut effective = Array2::zeros((dim, dim));
        let mut dense_jumps = Vec::with_capacity(jump_terms.len());
        for term in &jump_terms {
            let k = term.operators.len();
            if term.gamma.dim() != (k, k) {
                return Err(Error::Model(format!(
                    "gamma of shape {:?} for {k} jump operators",
                    term.gamma.dim()
                )));
            }
            let ops = term
                .operators
                .iter()
                .map(|op| {
                    check_dim(n_sites, op.n_sites())?;
                    op.to_dense()
                })
                .collect::<Result<Vec<_>>>()?;
            for n in 0..k {
                for m in 0..k {
                    let g = term.gamma[[n, m]];
                    if g != ZERO {
                        effective.scaled_add(g, &dagger(&ops[m]).dot(&ops[n]));
                    }
                }
            }
            dense_jumps.push(ops);
        }
        Ok(Self { n_sites, hamiltonian, jump_terms, dense_jumps, effective })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn hamiltonian(&self) -> &DenseOperator {
        &self.hamiltonian
    }

    pub fn jump_terms(&self) -> &[JumpTerm] {
        &self.jump_terms
    }

    /// True when every γ is Hermitian and positive semidefinite to 1e-10.
    pub fn is_physical(&self) -> bool {
        self.jump_terms.iter().all(|t| {
            if linalg::hermiticity_defect(&t.gamma) > 1e-10 {
                return false;
            }
            match linalg::hermitian_eigenvalues(&hermitize(&t.gamma)) {
                Ok(eigs) => eigs.iter().all(|&e| e >= -1e-10),
                Err(_) => false,
            }
        })
    }

    fn check_operand(&self, m: &Array2<C64>) -> Result<()> {
        check_dim(self.dim(), m.nrows())?;
        check_dim(self.dim(), m.ncols())
    }

    /// `ℒ[ρ] = −i[H, ρ] + Σ γ_nm (L_n ρ L_m† − ½{L_m† L_n, ρ})`.
    pub fn apply(&self, rho: &Array2<C64>) -> Result<Array2<C64>> {
        self.check_operand(rho)?;
        let h = &self.hamiltonian;
        let mut out = (h.dot(rho) - rho.dot(h)).mapv(|z| -I * z);
        out.scaled_add(C64::new(-0.5, 0.0), &self.effective.dot(rho));
        out.scaled_add(C64::new(-0.5, 0.0), &rho.dot(&self.effective));
        for (term, ops) in self.jump_terms.iter().zip(&self.dense_jumps) {
            for (n, ln) in ops.iter().enumerate() {
                for (m, lm) in ops.iter().enumerate() {
                    let g = term.gamma[[n, m]];
                    if g != ZERO {
                        out.scaled_add(g, &ln.dot(rho).dot(&dagger(lm)));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Heisenberg-picture generator
    /// `ℒ†[O] = −i[O, H] + Σ γ_nm (L_m† O L_n − ½{L_m† L_n, O})`.
    pub fn adjoint_apply(&self, o: &DenseOperator) -> Result<DenseOperator> {
        self.check_operand(o)?;
        let h = &self.hamiltonian;
        let mut out = (o.dot(h) - h.dot(o)).mapv(|z| -I * z);
        out.scaled_add(C64::new(-0.5, 0.0), &self.effective.dot(o));
        out.scaled_add(C64::new(-0.5, 0.0), &o.dot(&self.effective));
        for (term, ops) in self.jump_terms.iter().zip(&self.dense_jumps) {
            for (n, ln) in ops.iter().enumerate() {
                for (m, lm) in ops.iter().enumerate() {
                    let g = term.gamma[[n, m]];
                    if g != ZERO {
                        out.scaled_add(g, &dagger(lm).dot(o).dot(ln));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Superoperator acting on column-stacked `vec(ρ)`.
    pub fn liouvillian_matrix(&self) -> Array2<C64> {
        let dim = self.dim();
        let eye = linalg::identity(dim);
        let h = &self.hamiltonian;
        let k = &self.effective;
        let mut l = kron(eye.view(), h.view()).mapv(|z| -I * z);
        l.scaled_add(I, &kron(h.t(), eye.view()));
        l.scaled_add(C64::new(-0.5, 0.0), &kron(eye.view(), k.view()));
        l.scaled_add(C64::new(-0.5, 0.0), &kron(k.t(), eye.view()));
        for (term, ops) in self.jump_terms.iter().zip(&self.dense_jumps) {
            for (n, ln) in ops.iter().enumerate() {
                for (m, lm) in ops.iter().enumerate() {
                    let g = term.gamma[[n, m]];
                    if g != ZERO {
                        let lm_conj = lm.mapv(|z| z.conj());
                        l.scaled_add(g, &kron(lm_conj.view(), ln.view()));
                    }
                }
            }
        }
        l
    }
}

pub fn liouvillian_matrix(gen: &LindbladGenerator) -> Array2<C64> {
    gen.liouvillian_matrix()
}

pub fn adjoint_apply(gen: &LindbladGenerator, o: &DenseOperator) -> Result<DenseOperator> {
    gen.adjoint_apply(o)
}

fn site_op(n: usize, site: usize, terms: [(Pauli, C64); 2]) -> Result<WeightedPauliSum> {
    WeightedPauliSum::from_terms(
        n,
        terms.into_iter().map(|(p, c)| PauliString::single(n, site, p).map(|s| (s, c))).collect::<Result<Vec<_>>>()?,
    )
}

/// `σ⁺ = |1⟩⟨0| = (X − iY)/2` on `site`.
pub fn sigma_plus(n_sites: usize, site: usize) -> Result<WeightedPauliSum> {
    site_op(n_sites, site, [(Pauli::X, C64::new(0.5, 0.0)), (Pauli::Y, C64::new(0.0, -0.5))])
}

/// `σ⁻ = |0⟩⟨1| = (X + iY)/2` on `site`.
pub fn sigma_minus(n_sites: usize, site: usize) -> Result<WeightedPauliSum> {
    site_op(n_sites, site, [(Pauli::X, C64::new(0.5, 0.0)), (Pauli::Y, C64::new(0.0, 0.5))])
}

/// Coefficients of the thermal site dissipator over `{X, Y}`:
/// `γ_XX = γ_YY = (g₊ + g₋)/4`, `γ_XY = conj(γ_YX) = i (g₊ − g₋)/4`.
pub fn thermal_pauli_gamma(reservoir: &Reservoir) -> Array2<C64> {
    let (gp, gm) = reservoir.rates();
    let d = C64::new((gp + gm) / 4.0, 0.0);
    let off = C64::new(0.0, (gp - gm) / 4.0);
    ndarray::array![[d, off], [off.conj(), d]]
}

pub fn build_thermal_generator(spec: &SpinChainSpec, basis: ThermalBasis) -> Result<LindbladGenerator> {
    spec.validate()?;
    let n = spec.n_sites;
    let hamiltonian = build_hamiltonian(spec)?;
    let (gp, gm) = spec.reservoir.rates();
    let mut terms = Vec::new();
    if spec.reservoir.g > 0.0 {
        for site in 0..n {
            let term = match basis {
                ThermalBasis::Ladder => JumpTerm {
                    sites: vec![site],
                    operators: vec![sigma_plus(n, site)?, sigma_minus(n, site)?],
                    gamma: ndarray::array![[C64::new(gp, 0.0), ZERO], [ZERO, C64::new(gm, 0.0)]],
                },
                ThermalBasis::Pauli => JumpTerm {
                    sites: vec![site],
                    operators: vec![
                        WeightedPauliSum::from_terms(n, [(PauliString::single(n, site, Pauli::X)?, ONE)])?,
                        WeightedPauliSum::from_terms(n, [(PauliString::single(n, site, Pauli::Y)?, ONE)])?,
                    ],
                    gamma: thermal_pauli_gamma(&spec.reservoir),
                },
            };
            terms.push(term);
        }
    }
    LindbladGenerator::new(n, hamiltonian, terms)
}

/// Kernel eigenvalues closer than this fraction of the spectral scale count as
/// degenerate.
pub const UNIQUENESS_RATIO: f64 = 1e-8;

/// Unique fixed point `ℒ[ρ] = 0` from a dense eigendecomposition of the
/// Liouvillian.
pub fn steady_state(gen: &LindbladGenerator) -> Result<DensityMatrix> {
    let dim = gen.dim();
    let l = gen.liouvillian_matrix();
    let (eigs, vecs) = linalg::eig(&l)?;
    let mut order: Vec<usize> = (0..eigs.len()).collect();
    order.sort_by(|&a, &b| eigs[a].norm().total_cmp(&eigs[b].norm()));
    let scale = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let second = eigs[order[1]].norm();
    if scale == 0.0 || second < UNIQUENESS_RATIO * scale {
        return Err(Error::NonUniqueFixedPoint { second, scale });
    }
    let v: Array1<C64> = vecs.column(order[0]).to_owned();
    let rho = hermitize(&linalg::unvectorize(&v, dim));
    let tr = linalg::trace(&rho);
    if tr.norm() < 1e-14 {
        return Err(Error::InvalidState("kernel vector is traceless".into()));
    }
    DensityMatrix::new(rho.mapv(|z| z / tr.re))
}

/// Cached `exp(L t)` for repeated propagation over the same interval.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    time: f64,
    map: Array2<C64>,
}

impl Propagator {
    pub fn new(gen: &LindbladGenerator, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!("propagation time {t} must be >= 0")));
        }
        let dim = gen.dim();
        let map = if t == 0.0 {
            linalg::identity(dim * dim)
        } else {
            linalg::expm(&gen.liouvillian_matrix().mapv(|z| z * t))?
        };
        Ok(Self { dim, time: t, map })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Raw evolved matrix, before any state validation.
    pub fn evolve(&self, rho: &Array2<C64>) -> Result<Array2<C64>> {
        check_dim(self.dim, rho.nrows())?;
        check_dim(self.dim, rho.ncols())?;
        if self.time == 0.0 {
            return Ok(rho.clone());
        }
        let out = self.map.dot(&linalg::vectorize(rho));
        Ok(linalg::unvectorize(&out, self.dim))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if self.time == 0.0 {
            check_dim(self.dim, rho.dim())?;
            return Ok(rho.clone());
        }
        DensityMatrix::new(hermitize(&self.evolve(rho.matrix())?))
    }
}

/// `ρ(t) = exp(ℒ t) ρ₀`.
pub fn propagate(gen: &LindbladGenerator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    Propagator::new(gen, t)?.apply(rho0)
}

/// `Tr[ρ O]` for Hermitian `O`.
pub fn expectation(rho: &DensityMatrix, o: &DenseOperator) -> Result<f64> {
    check_dim(rho.dim(), o.nrows())?;
    check_dim(rho.dim(), o.ncols())?;
    let defect = linalg::hermiticity_defect(o);
    let r = rho.matrix();
    let tr: C64 = r.iter().zip(o.t().iter()).map(|(a, b)| a * b).sum();
    if tr.im.abs() > 1e-11 || defect > STATE_TOLERANCE {
        return Err(Error::NonHermitian(tr.im.abs().max(defect)));
    }
    Ok(tr.re)
}

/// `Tr[ρ P]` for a Pauli string without materializing `P`.
pub fn pauli_expectation(rho: &Array2<C64>, p: &PauliString) -> C64 {
    let (flip, sign, n_y) = p.masks();
    let base = crate::pauli::Phase::from_power(n_y).to_complex();
    let mut acc = ZERO;
    for k in 0..rho.nrows() {
        let v = rho[[k, k ^ flip]];
        if (k & sign).count_ones() % 2 == 1 {
            acc -= v;
        } else {
            acc += v;
        }
    }
    base * acc
}

/// `[ρ_ss, U₁ ρ_ss U₁†, ...]`, with `ρ_ss` itself first and identity strings
/// skipped.
pub fn conjugated_state_set(rho_ss: &DensityMatrix, unitaries: &[PauliString]) -> Result<Vec<DensityMatrix>> {
    let mut out = vec![rho_ss.clone()];
    for u in unitaries {
        check_dim(rho_ss.n_sites(), u.n_sites())?;
        if u.is_identity() {
            continue;
        }
        let dense = u.to_dense()?;
        let conj = dense.dot(rho_ss.matrix()).dot(&dagger(&dense));
        out.push(DensityMatrix::new(conj)?);
    }
    Ok(out)
}

/// All 1-local Pauli strings, site by site.
pub fn one_local_unitaries(n_sites: usize) -> Vec<PauliString> {
    (0..n_sites)
        .flat_map(|s| Pauli::NON_IDENTITY.map(|p| PauliString::single(n_sites, s, p).expect("site in range")))
        .collect()
}
