//! Symbolic algebra over N-site Pauli strings.
//!
//! Site 0 is the leftmost symbol in the text form and the most significant
//! qubit of every dense materialization, so `"IZ"` becomes `diag(1,-1,1,-1)`.
//! Phases are kept as powers of `i` and never touch floating point until a
//! caller asks for a complex coefficient.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};

/// Largest chain that [`PauliString::to_dense`] materializes by default.
pub const DEFAULT_DENSE_CAP: usize = 10;

/// Coefficients below this magnitude are removed from a [`WeightedPauliSum`].
pub const ZERO_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Single-site product `self * other = i^k * r`.
    pub fn times(self, other: Pauli) -> (Phase, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (Phase::ONE, p),
            (a, b) if a == b => (Phase::ONE, I),
            (X, Y) => (Phase::I, Z),
            (Y, Z) => (Phase::I, X),
            (Z, X) => (Phase::I, Y),
            (Y, X) => (Phase::MINUS_I, Z),
            (Z, Y) => (Phase::MINUS_I, X),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!(),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A phase `i^k`, stored as `k mod 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Phase {
        Phase((k % 4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn conj(self) -> Phase {
        Phase((4 - self.0) % 4)
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Tensor product of single-site Pauli symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    symbols: Vec<Pauli>,
}

impl PauliString {
    pub fn new(symbols: Vec<Pauli>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidParameter("a Pauli string needs at least one site".into()));
        }
        Ok(Self { symbols })
    }

    pub fn identity(n_sites: usize) -> Self {
        Self { symbols: vec![Pauli::I; n_sites.max(1)] }
    }

    /// `symbol` on `site`, identity elsewhere.
    pub fn single(n_sites: usize, site: usize, symbol: Pauli) -> Result<Self> {
        if site >= n_sites {
            return Err(Error::InvalidParameter(format!(
                "site {site} outside a {n_sites}-site chain"
            )));
        }
        let mut symbols = vec![Pauli::I; n_sites];
        symbols[site] = symbol;
        Ok(Self { symbols })
    }

    pub fn n_sites(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[Pauli] {
        &self.symbols
    }

    pub fn symbol(&self, site: usize) -> Pauli {
        self.symbols[site]
    }

    pub fn support(&self) -> Vec<usize> {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != Pauli::I)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.symbols.iter().filter(|s| **s != Pauli::I).count()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    /// True when the two strings commute as operators.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let clashes = self
            .symbols
            .iter()
            .zip(&other.symbols)
            .filter(|(a, b)| **a != Pauli::I && **b != Pauli::I && a != b)
            .count();
        clashes % 2 == 0
    }

    /// Bit masks over basis indices: `(flip, phase_sign, n_y)`. Site `s`
    /// occupies bit `n - 1 - s`.
    pub(crate) fn masks(&self) -> (usize, usize, u32) {
        let n = self.n_sites();
        let mut flip = 0usize;
        let mut sign = 0usize;
        let mut n_y = 0u32;
        for (s, p) in self.symbols.iter().enumerate() {
            let bit = 1usize << (n - 1 - s);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    sign |= bit;
                    n_y += 1;
                }
                Pauli::Z => sign |= bit,
            }
        }
        (flip, sign, n_y)
    }

    pub fn to_dense(&self) -> Result<Array2<Complex64>> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    /// Kronecker product of the single-site matrices.
    pub fn to_dense_with_cap(&self, cap: usize) -> Result<Array2<Complex64>> {
        let n = self.n_sites();
        if n > cap {
            return Err(Error::CapExceeded { n_sites: n, cap });
        }
        let dim = 1usize << n;
        let (flip, sign, n_y) = self.masks();
        let base = Phase::from_power(n_y);
        let mut out = Array2::zeros((dim, dim));
        for k in 0..dim {
            let mut phase = base;
            if (k & sign).count_ones() % 2 == 1 {
                phase = phase * Phase::MINUS_ONE;
            }
            out[[k ^ flip, k]] = phase.to_complex();
        }
        Ok(out)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(Pauli::from_char)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::ParsePauli(s.to_string()))?;
        if symbols.is_empty() {
            return Err(Error::ParsePauli(s.to_string()));
        }
        Ok(Self { symbols })
    }
}

/// Product `p * q = phase * r`.
pub fn pauli_mul(p: &PauliString, q: &PauliString) -> Result<(Phase, PauliString)> {
    check_dim(p.n_sites(), q.n_sites())?;
    let mut phase = Phase::ONE;
    let symbols = p
        .symbols
        .iter()
        .zip(&q.symbols)
        .map(|(a, b)| {
            let (ph, r) = a.times(*b);
            phase = phase * ph;
            r
        })
        .collect();
    Ok((phase, PauliString { symbols }))
}

/// `[p, q] = pq - qp`: empty when the strings commute.
pub fn commutator(p: &PauliString, q: &PauliString) -> Result<WeightedPauliSum> {
    let (phase, r) = pauli_mul(p, q)?;
    let mut out = WeightedPauliSum::new(p.n_sites());
    if !p.commutes_with(q) {
        out.add(r, phase.to_complex() * 2.0);
    }
    Ok(out)
}

/// `{p, q} = pq + qp`: empty when the strings anticommute.
pub fn anticommutator(p: &PauliString, q: &PauliString) -> Result<WeightedPauliSum> {
    let (phase, r) = pauli_mul(p, q)?;
    let mut out = WeightedPauliSum::new(p.n_sites());
    if p.commutes_with(q) {
        out.add(r, phase.to_complex() * 2.0);
    }
    Ok(out)
}

/// Linear combination of Pauli strings with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPauliSum {
    n_sites: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl WeightedPauliSum {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites, terms: BTreeMap::new() }
    }

    pub fn from_terms<I>(n_sites: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut out = Self::new(n_sites);
        for (p, c) in terms {
            check_dim(n_sites, p.n_sites())?;
            out.add(p, c);
        }
        Ok(out)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Adds `coeff * p`, dropping the entry if it cancels to zero.
    pub fn add(&mut self, p: PauliString, coeff: Complex64) {
        debug_assert_eq!(p.n_sites(), self.n_sites);
        let entry = self.terms.entry(p).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        self.normalize();
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, c| c.norm() > ZERO_TOLERANCE);
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= factor;
        }
        out.normalize();
        out
    }

    pub fn get(&self, p: &PauliString) -> Option<Complex64> {
        self.terms.get(p).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Hermitian conjugate: conjugates every coefficient.
    pub fn dagger(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    pub fn to_dense(&self) -> Result<Array2<Complex64>> {
        let dim = 1usize << self.n_sites;
        if self.n_sites > DEFAULT_DENSE_CAP {
            return Err(Error::CapExceeded { n_sites: self.n_sites, cap: DEFAULT_DENSE_CAP });
        }
        let mut out = Array2::zeros((dim, dim));
        for (p, c) in &self.terms {
            out.scaled_add(*c, &p.to_dense()?);
        }
        Ok(out)
    }
}

/// Geometry of the enumerated basis. Only open chains are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Geometry {
    #[default]
    ContiguousChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalBasisSpec {
    pub n_sites: usize,
    pub locality: usize,
    pub geometry: Geometry,
    pub include_lower: bool,
}

impl LocalBasisSpec {
    pub fn chain(n_sites: usize, locality: usize, include_lower: bool) -> Self {
        Self { n_sites, locality, geometry: Geometry::ContiguousChain, include_lower }
    }

    /// Closed-form length of [`enumerate_basis`].
    pub fn count(&self) -> usize {
        let lo = if self.include_lower { 1 } else { self.locality };
        (lo..=self.locality)
            .map(|m| (self.n_sites + 1 - m) * patterns_with_locality(m))
            .sum()
    }
}

fn patterns_with_locality(m: usize) -> usize {
    match m {
        0 => 0,
        1 => 3,
        _ => 9 * 4usize.pow(m as u32 - 2),
    }
}

/// Strings whose support spans exactly `m` adjacent sites (both endpoints
/// non-identity), ordered by locality, then window start from the left end of
/// the chain, then lexicographically per site with `I < X < Y < Z`.
pub fn enumerate_basis(spec: &LocalBasisSpec) -> Result<Vec<PauliString>> {
    let n = spec.n_sites;
    let k = spec.locality;
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidLocality { k, n_sites: n });
    }
    let lo = if spec.include_lower { 1 } else { k };
    let mut out = Vec::with_capacity(spec.count());
    for m in lo..=k {
        for start in 0..=(n - m) {
            for pattern in window_patterns(m) {
                let mut symbols = vec![Pauli::I; n];
                symbols[start..start + m].copy_from_slice(&pattern);
                out.push(PauliString { symbols });
            }
        }
    }
    Ok(out)
}

fn window_patterns(m: usize) -> Vec<Vec<Pauli>> {
    let mut acc: Vec<Vec<Pauli>> = vec![Vec::new()];
    for pos in 0..m {
        let choices: &[Pauli] =
            if pos == 0 || pos == m - 1 { &Pauli::NON_IDENTITY } else { &Pauli::ALL };
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push(*c);
                    next
                })
            })
            .collect();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_site_products() {
        assert_eq!(pauli_mul(&ps("X"), &ps("Y")).unwrap(), (Phase::I, ps("Z")));
        assert_eq!(pauli_mul(&ps("X"), &ps("X")).unwrap(), (Phase::ONE, ps("I")));
        assert_eq!(pauli_mul(&ps("XZ"), &ps("YZ")).unwrap(), (Phase::I, ps("ZI")));
    }

    #[test]
    fn mul_matches_dense_product_for_two_sites() {
        let dense_xz = ps("XZ").to_dense().unwrap();
        let dense_yz = ps("YZ").to_dense().unwrap();
        let prod = dense_xz.dot(&dense_yz);
        let expected = ps("ZI").to_dense().unwrap().mapv(|v| v * c(0.0, 1.0));
        assert!((&prod - &expected).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(matches!(
            pauli_mul(&ps("X"), &ps("XX")),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(commutator(&ps("X"), &ps("XX")).is_err());
        assert!(anticommutator(&ps("XY"), &ps("X")).is_err());
    }

    #[test]
    fn commutator_examples() {
        let xy = commutator(&ps("X"), &ps("Y")).unwrap();
        assert_eq!(xy.len(), 1);
        assert_eq!(xy.get(&ps("Z")), Some(c(0.0, 2.0)));
        assert!(commutator(&ps("X"), &ps("X")).unwrap().is_empty());
        let xx_zi = commutator(&ps("XX"), &ps("ZI")).unwrap();
        assert_eq!(xx_zi.get(&ps("YX")), Some(c(0.0, -2.0)));
        assert_eq!(xx_zi.len(), 1);
    }

    #[test]
    fn anticommutator_examples() {
        assert!(anticommutator(&ps("X"), &ps("Y")).unwrap().is_empty());
        assert_eq!(anticommutator(&ps("X"), &ps("X")).unwrap().get(&ps("I")), Some(c(2.0, 0.0)));
        assert!(anticommutator(&ps("XY"), &ps("XZ")).unwrap().is_empty());
    }

    #[test]
    fn dense_examples() {
        let x = ps("X").to_dense().unwrap();
        assert_eq!(x[[0, 1]], c(1.0, 0.0));
        assert_eq!(x[[1, 0]], c(1.0, 0.0));
        assert_eq!(x[[0, 0]], c(0.0, 0.0));
        let iz = ps("IZ").to_dense().unwrap();
        let diag: Vec<f64> = (0..4).map(|k| iz[[k, k]].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
        let y = ps("Y").to_dense().unwrap();
        assert_eq!(y[[0, 1]], c(0.0, -1.0));
        assert_eq!(y[[1, 0]], c(0.0, 1.0));
    }

    #[test]
    fn dense_cap_is_enforced() {
        let p = PauliString::identity(4);
        assert!(matches!(p.to_dense_with_cap(3), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn enumeration_counts() {
        let count = |n, k| enumerate_basis(&LocalBasisSpec::chain(n, k, true)).unwrap().len();
        assert_eq!(count(2, 1), 6);
        assert_eq!(count(5, 1), 15);
        assert_eq!(count(5, 2), 51);
        // 9 one-local, 18 two-local, 36 three-local: every non-identity string.
        assert_eq!(count(3, 3), 63);
        let exact = enumerate_basis(&LocalBasisSpec::chain(5, 2, false)).unwrap();
        assert_eq!(exact.len(), 36);
        assert!(exact.iter().all(|p| p.weight() == 2));
    }

    #[test]
    fn enumeration_order_and_uniqueness() {
        let spec = LocalBasisSpec::chain(4, 3, true);
        let list = enumerate_basis(&spec).unwrap();
        assert_eq!(list.len(), spec.count());
        let unique: HashSet<_> = list.iter().collect();
        assert_eq!(unique.len(), list.len());
        let text: Vec<String> = list.iter().take(4).map(|p| p.to_string()).collect();
        assert_eq!(text, ["XIII", "YIII", "ZIII", "IXII"]);
        assert_eq!(list[12].to_string(), "XXII");
        // 3-local windows allow an identity in the middle.
        assert!(list.iter().any(|p| p.to_string() == "XIZI"));
        assert!(list.iter().all(|p| {
            let s = p.support();
            s.last().unwrap() - s.first().unwrap() < 3
        }));
    }

    #[test]
    fn enumeration_rejects_bad_locality() {
        assert!(matches!(
            enumerate_basis(&LocalBasisSpec::chain(3, 4, true)),
            Err(Error::InvalidLocality { k: 4, n_sites: 3 })
        ));
        assert!(enumerate_basis(&LocalBasisSpec::chain(3, 0, true)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = ps("XIZYI");
        assert_eq!(p.to_string(), "XIZYI");
        assert_eq!(p.support(), vec![0, 2, 3]);
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn weighted_sum_drops_cancelled_terms() {
        let mut s = WeightedPauliSum::new(1);
        s.add(ps("X"), c(1.0, 0.0));
        s.add(ps("X"), c(-1.0, 0.0));
        assert!(s.is_empty());
        s.add(ps("Z"), c(0.5, 0.5));
        assert_eq!(s.dagger().get(&ps("Z")), Some(c(0.5, -0.5)));
    }
}
