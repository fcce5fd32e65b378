//! Layout of the real unknown vector `x = (c, γ-coordinates)`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dynamics::LindbladGenerator;
use crate::error::{Error, Result};
use crate::linalg::{self, C64, I, ONE, ZERO};
use crate::pauli::{enumerate_basis, LocalBasisSpec, Pauli, PauliString};

/// How each region's γ matrix is parameterized by real coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GammaConstraint {
    /// `Re γ_nm, Im γ_nm` for every ordered pair: `2 k²` reals.
    #[default]
    UnconstrainedComplex,
    /// Real diagonal plus `Re, Im` of the upper triangle: `k²` reals.
    Hermitian,
    /// Hermitian coordinates; solvers that honor constraints keep γ ⪰ 0.
    Psd,
}

impl fmt::Display for GammaConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaConstraint::UnconstrainedComplex => "unconstrained-complex",
            GammaConstraint::Hermitian => "hermitian",
            GammaConstraint::Psd => "psd",
        })
    }
}

impl FromStr for GammaConstraint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unconstrained-complex" => Ok(Self::UnconstrainedComplex),
            "hermitian" => Ok(Self::Hermitian),
            "psd" => Ok(Self::Psd),
            _ => Err(Error::InvalidParameter(format!("unknown gamma constraint {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LindbladRegion {
    pub sites: Vec<usize>,
    pub jump_basis: Vec<PauliString>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    n_sites: usize,
    hamiltonian_terms: Vec<PauliString>,
    regions: Vec<LindbladRegion>,
    gamma_constraint: GammaConstraint,
    offsets: Vec<usize>,
    dim: usize,
}

impl ModelSpace {
    pub fn new(
        n_sites: usize,
        hamiltonian_terms: Vec<PauliString>,
        regions: Vec<LindbladRegion>,
        gamma_constraint: GammaConstraint,
    ) -> Result<Self> {
        if hamiltonian_terms.is_empty() && regions.is_empty() {
            return Err(Error::Model("empty model space".into()));
        }
        let all_ops = hamiltonian_terms.iter().chain(regions.iter().flat_map(|r| &r.jump_basis));
        for p in all_ops {
            if p.n_sites() != n_sites {
                return Err(Error::DimensionMismatch { expected: n_sites, found: p.n_sites() });
            }
        }
        let mut offsets = Vec::with_capacity(regions.len());
        let mut dim = hamiltonian_terms.len();
        for r in &regions {
            if r.jump_basis.is_empty() {
                return Err(Error::Model("region with an empty jump basis".into()));
            }
            offsets.push(dim);
            dim += block_len(r.jump_basis.len(), gamma_constraint);
        }
        Ok(Self { n_sites, hamiltonian_terms, regions, gamma_constraint, offsets, dim })
    }

    /// Hamiltonian terms of locality `1..=k` on contiguous windows, one region
    /// per site with jump basis `{X, Y, Z}`.
    pub fn local(n_sites: usize, k: usize, jump_locality: usize, gamma_constraint: GammaConstraint) -> Result<Self> {
        if jump_locality != 1 {
            return Err(Error::Model(format!(
                "jump locality {jump_locality} is not supported; only single-site regions are"
            )));
        }
        let terms = enumerate_basis(&LocalBasisSpec::chain(n_sites, k, true))?;
        let regions = (0..n_sites)
            .map(|s| {
                let jump_basis = Pauli::NON_IDENTITY
                    .iter()
                    .map(|p| PauliString::single(n_sites, s, *p))
                    .collect::<Result<Vec<_>>>()?;
                Ok(LindbladRegion { sites: vec![s], jump_basis })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_sites, terms, regions, gamma_constraint)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian_terms(&self) -> &[PauliString] {
        &self.hamiltonian_terms
    }

    pub fn hamiltonian_dim(&self) -> usize {
        self.hamiltonian_terms.len()
    }

    pub fn regions(&self) -> &[LindbladRegion] {
        &self.regions
    }

    pub fn gamma_constraint(&self) -> GammaConstraint {
        self.gamma_constraint
    }

    pub fn hamiltonian_range(&self) -> Range<usize> {
        0..self.hamiltonian_terms.len()
    }

    pub fn gamma_range(&self) -> Range<usize> {
        self.hamiltonian_terms.len()..self.dim
    }

    pub fn region_range(&self, r: usize) -> Range<usize> {
        let start = self.offsets[r];
        start..start + block_len(self.regions[r].jump_basis.len(), self.gamma_constraint)
    }

    /// Columns and complex weights expressing `γ_nm` of region `r` as a
    /// linear function of the coordinates.
    pub fn gamma_coefficients(&self, r: usize, n: usize, m: usize) -> Vec<(usize, C64)> {
        let k = self.regions[r].jump_basis.len();
        let base = self.offsets[r];
        match self.gamma_constraint {
            GammaConstraint::UnconstrainedComplex => {
                let col = base + 2 * (n * k + m);
                vec![(col, ONE), (col + 1, I)]
            }
            GammaConstraint::Hermitian | GammaConstraint::Psd => {
                if n == m {
                    vec![(base + hermitian_index(k, n, n), ONE)]
                } else if n < m {
                    let col = base + hermitian_index(k, n, m);
                    vec![(col, ONE), (col + 1, I)]
                } else {
                    let col = base + hermitian_index(k, m, n);
                    vec![(col, ONE), (col + 1, -I)]
                }
            }
        }
    }

    /// Reassembles region `r`'s γ matrix from `x`.
    pub fn gamma_matrix(&self, x: &Array1<f64>, r: usize) -> Array2<C64> {
        let k = self.regions[r].jump_basis.len();
        Array2::from_shape_fn((k, k), |(n, m)| {
            self.gamma_coefficients(r, n, m).iter().map(|(col, w)| w * x[*col]).sum()
        })
    }

    /// Writes `gamma` into region `r`'s coordinates. Hermitian layouts keep
    /// only the Hermitian part.
    pub fn set_gamma(&self, x: &mut Array1<f64>, r: usize, gamma: &Array2<C64>) {
        let k = self.regions[r].jump_basis.len();
        let base = self.offsets[r];
        match self.gamma_constraint {
            GammaConstraint::UnconstrainedComplex => {
                for n in 0..k {
                    for m in 0..k {
                        let col = base + 2 * (n * k + m);
                        x[col] = gamma[[n, m]].re;
                        x[col + 1] = gamma[[n, m]].im;
                    }
                }
            }
            GammaConstraint::Hermitian | GammaConstraint::Psd => {
                let h = linalg::hermitize(gamma);
                for n in 0..k {
                    x[base + hermitian_index(k, n, n)] = h[[n, n]].re;
                    for m in n + 1..k {
                        let col = base + hermitian_index(k, n, m);
                        x[col] = h[[n, m]].re;
                        x[col + 1] = h[[n, m]].im;
                    }
                }
            }
        }
    }

    /// Per-coordinate weights making the Euclidean norm of `w ∘ x` equal to
    /// the Frobenius norm of the γ blocks.
    pub fn frobenius_weights(&self) -> Array1<f64> {
        let mut w = Array1::ones(self.dim);
        if matches!(self.gamma_constraint, GammaConstraint::Hermitian | GammaConstraint::Psd) {
            for (r, region) in self.regions.iter().enumerate() {
                let k = region.jump_basis.len();
                let base = self.offsets[r];
                for n in 0..k {
                    for m in n + 1..k {
                        let col = base + hermitian_index(k, n, m);
                        w[col] = std::f64::consts::SQRT_2;
                        w[col + 1] = std::f64::consts::SQRT_2;
                    }
                }
            }
        }
        w
    }

    pub fn column_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.hamiltonian_terms.iter().map(|p| format!("c:{p}")).collect();
        for (r, region) in self.regions.iter().enumerate() {
            let k = region.jump_basis.len();
            let name = |i: usize| region.jump_basis[i].to_string();
            match self.gamma_constraint {
                GammaConstraint::UnconstrainedComplex => {
                    for n in 0..k {
                        for m in 0..k {
                            labels.push(format!("re:r{r}:{},{}", name(n), name(m)));
                            labels.push(format!("im:r{r}:{},{}", name(n), name(m)));
                        }
                    }
                }
                GammaConstraint::Hermitian | GammaConstraint::Psd => {
                    for n in 0..k {
                        labels.push(format!("re:r{r}:{},{}", name(n), name(n)));
                        for m in n + 1..k {
                            labels.push(format!("re:r{r}:{},{}", name(n), name(m)));
                            labels.push(format!("im:r{r}:{},{}", name(n), name(m)));
                        }
                    }
                }
            }
        }
        labels
    }

    /// Coordinates of a generator in this layout. Fails when the generator's
    /// Hamiltonian or dissipator lies outside the model span.
    pub fn coordinates_of(&self, gen: &LindbladGenerator) -> Result<Array1<f64>> {
        if gen.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch { expected: self.n_sites, found: gen.n_sites() });
        }
        let mut x = Array1::zeros(self.dim);
        let h = gen.hamiltonian();
        let dim = gen.dim() as f64;
        let mut remainder = h.clone();
        let shift = linalg::trace(h) / dim;
        for i in 0..gen.dim() {
            remainder[[i, i]] -= shift;
        }
        for (l, s) in self.hamiltonian_terms.iter().enumerate() {
            let dense = s.to_dense()?;
            let coeff = linalg::trace(&dense.dot(h)) / dim;
            x[l] = coeff.re;
            remainder.scaled_add(C64::new(-coeff.re, 0.0), &dense);
        }
        let miss = linalg::frobenius(&remainder);
        if miss > 1e-10 * linalg::frobenius(h).max(1.0) {
            return Err(Error::Model(format!("Hamiltonian lies outside the model span (residual {miss:e})")));
        }

        // γ'_pq = Σ_ab u_ap γ_ab conj(u_bq) with L_a = Σ_p u_ap P_p.
        let mut pauli_gamma: BTreeMap<(PauliString, PauliString), C64> = BTreeMap::new();
        for term in gen.jump_terms() {
            for (a, la) in term.operators.iter().enumerate() {
                for (b, lb) in term.operators.iter().enumerate() {
                    let g = term.gamma[[a, b]];
                    if g == ZERO {
                        continue;
                    }
                    for (p, up) in la.iter() {
                        for (q, uq) in lb.iter() {
                            if p.is_identity() || q.is_identity() {
                                return Err(Error::Model("jump operator has an identity component".into()));
                            }
                            *pauli_gamma.entry((p.clone(), q.clone())).or_insert(ZERO) += up * g * uq.conj();
                        }
                    }
                }
            }
        }
        let mut blocks: Vec<Array2<C64>> = self
            .regions
            .iter()
            .map(|r| Array2::zeros((r.jump_basis.len(), r.jump_basis.len())))
            .collect();
        for ((p, q), g) in pauli_gamma {
            if g.norm() < 1e-15 {
                continue;
            }
            let slot = self.regions.iter().enumerate().find_map(|(r, region)| {
                let n = region.jump_basis.iter().position(|b| *b == p)?;
                let m = region.jump_basis.iter().position(|b| *b == q)?;
                Some((r, n, m))
            });
            let (r, n, m) = slot.ok_or_else(|| {
                Error::Model(format!("dissipator pair ({p}, {q}) lies outside every model region"))
            })?;
            blocks[r][[n, m]] += g;
        }
        for (r, block) in blocks.iter().enumerate() {
            if self.gamma_constraint != GammaConstraint::UnconstrainedComplex
                && linalg::hermiticity_defect(block) > 1e-12
            {
                return Err(Error::Model("non-Hermitian γ in a Hermitian layout".into()));
            }
            self.set_gamma(&mut x, r, block);
        }
        Ok(x)
    }
}

fn block_len(k: usize, constraint: GammaConstraint) -> usize {
    match constraint {
        GammaConstraint::UnconstrainedComplex => 2 * k * k,
        GammaConstraint::Hermitian | GammaConstraint::Psd => k * k,
    }
}

/// Offset of `(n, m)` with `n <= m` inside a Hermitian block: each row `n`
/// holds the diagonal entry followed by `(re, im)` pairs for `m > n`.
fn hermitian_index(k: usize, n: usize, m: usize) -> usize {
    debug_assert!(n <= m);
    let row_start: usize = (0..n).map(|r| 1 + 2 * (k - 1 - r)).sum();
    if n == m {
        row_start
    } else {
        row_start + 1 + 2 * (m - n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_thermal_generator, SpinChainSpec, ThermalBasis};

    #[test]
    fn five_site_parameter_count() {
        let m = ModelSpace::local(5, 2, 1, GammaConstraint::UnconstrainedComplex).unwrap();
        assert_eq!(m.hamiltonian_dim(), 51);
        assert_eq!(m.dim(), 141);
        let h = ModelSpace::local(5, 2, 1, GammaConstraint::Hermitian).unwrap();
        assert_eq!(h.dim(), 51 + 45);
        assert_eq!(m.column_labels().len(), 141);
        assert_eq!(h.column_labels().len(), 96);
    }

    #[test]
    fn hermitian_index_is_dense() {
        for k in 1..5 {
            let mut seen = vec![false; k * k];
            for n in 0..k {
                seen[hermitian_index(k, n, n)] = true;
                for m in n + 1..k {
                    let i = hermitian_index(k, n, m);
                    seen[i] = true;
                    seen[i + 1] = true;
                }
            }
            assert!(seen.iter().all(|s| *s));
        }
    }

    #[test]
    fn gamma_round_trip_in_each_layout() {
        let gamma = ndarray::array![
            [C64::new(0.3, 0.0), C64::new(0.1, 0.2), C64::new(0.0, -0.4)],
            [C64::new(0.1, -0.2), C64::new(0.5, 0.0), C64::new(0.7, 0.1)],
            [C64::new(0.0, 0.4), C64::new(0.7, -0.1), C64::new(0.2, 0.0)]
        ];
        for c in [GammaConstraint::UnconstrainedComplex, GammaConstraint::Hermitian, GammaConstraint::Psd] {
            let m = ModelSpace::local(2, 1, 1, c).unwrap();
            let mut x = Array1::zeros(m.dim());
            m.set_gamma(&mut x, 1, &gamma);
            let back = m.gamma_matrix(&x, 1);
            assert!(linalg::frobenius(&(&back - &gamma)) < 1e-15, "{c}");
            let w = m.frobenius_weights();
            let norm = (&w * &x).mapv(|v| v * v).sum().sqrt();
            assert!((norm - linalg::frobenius(&gamma)).abs() < 1e-14, "{c}");
        }
    }

    #[test]
    fn thermal_coordinates_match_between_bases() {
        let spec = SpinChainSpec::uniform(3, [0.5, 0.0, -2.55], 0.25, 0.05, 0.5);
        let m = ModelSpace::local(3, 2, 1, GammaConstraint::UnconstrainedComplex).unwrap();
        let a = m.coordinates_of(&build_thermal_generator(&spec, ThermalBasis::Ladder).unwrap()).unwrap();
        let b = m.coordinates_of(&build_thermal_generator(&spec, ThermalBasis::Pauli).unwrap()).unwrap();
        assert!((&a - &b).iter().all(|v| v.abs() < 1e-15));
        // c_x on site 0 is the first coordinate, c_z on site 0 the third.
        assert!((a[0] - 0.5).abs() < 1e-15 && (a[2] + 2.55).abs() < 1e-15);
        let gamma = m.gamma_matrix(&a, 0);
        let (gp, gm) = (0.05 * 0.5 / 2.0, 0.05 * 1.5 / 2.0);
        assert!((gamma[[0, 0]].re - (gp + gm) / 4.0).abs() < 1e-15);
        assert!((gamma[[0, 1]] - C64::new(0.0, (gp - gm) / 4.0)).norm() < 1e-15);
        assert_eq!(gamma[[2, 2]], ZERO);
    }

    #[test]
    fn coordinates_reject_out_of_span_generators() {
        let spec = SpinChainSpec::uniform(3, [0.5, 0.0, -2.55], 0.25, 0.05, 0.5);
        let gen = build_thermal_generator(&spec, ThermalBasis::Pauli).unwrap();
        let small = ModelSpace::local(3, 1, 1, GammaConstraint::UnconstrainedComplex).unwrap();
        assert!(matches!(small.coordinates_of(&gen), Err(Error::Model(_))));
        assert!(ModelSpace::local(3, 2, 2, GammaConstraint::Psd).is_err());
    }
}
