//! Correlation systems `C x = 0` and `C' x = W` built from expectation values.
//!
//! Rows are ordered by input operator, then input state, then real/imaginary
//! part. Columns follow the [`ModelSpace`] layout.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::model::ModelSpace;
use crate::dynamics::{pauli_expectation, DensityMatrix, LindbladGenerator, Propagator};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{C64, I};
use crate::pauli::{anticommutator, commutator, pauli_mul, PauliString, WeightedPauliSum};

/// Rows with a smaller Euclidean norm (and zero right-hand side) are dropped.
pub const ROW_DROP_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowPart {
    Re,
    Im,
}

impl fmt::Display for RowPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowPart::Re => "re",
            RowPart::Im => "im",
        })
    }
}

impl FromStr for RowPart {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "re" => Ok(RowPart::Re),
            "im" => Ok(RowPart::Im),
            _ => Err(Error::InvalidParameter(format!("row part {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowLabel {
    pub input: PauliString,
    pub input_index: usize,
    pub state: usize,
    pub part: RowPart,
}

/// Pauli observables whose expectations populate one `(input, state)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub input_index: usize,
    pub state: usize,
    pub observables: Vec<PauliString>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSystem {
    matrix: Array2<f64>,
    rhs: Option<Array1<f64>>,
    row_labels: Vec<RowLabel>,
    col_labels: Vec<String>,
    hamiltonian_cols: usize,
    provenance: Vec<Provenance>,
}

impl CorrelationSystem {
    /// A system without operator provenance; every column counts as
    /// Hamiltonian for sign fixing.
    pub fn from_matrix(matrix: Array2<f64>, rhs: Option<Array1<f64>>) -> Result<Self> {
        if let Some(b) = &rhs {
            check_dim(matrix.nrows(), b.len())?;
        }
        let identity = PauliString::identity(1);
        let row_labels = (0..matrix.nrows())
            .map(|i| RowLabel { input: identity.clone(), input_index: i, state: 0, part: RowPart::Re })
            .collect();
        let col_labels = (0..matrix.ncols()).map(|j| format!("x{j}")).collect();
        let hamiltonian_cols = matrix.ncols();
        Ok(Self { matrix, rhs, row_labels, col_labels, hamiltonian_cols, provenance: Vec::new() })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> Option<&Array1<f64>> {
        self.rhs.as_ref()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.rhs.is_none()
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row_labels(&self) -> &[RowLabel] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn hamiltonian_cols(&self) -> usize {
        self.hamiltonian_cols
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Number of distinct input operators that contributed rows or provenance.
    pub fn input_count(&self) -> usize {
        self.provenance
            .iter()
            .map(|p| p.input_index + 1)
            .chain(self.row_labels.iter().map(|l| l.input_index + 1))
            .max()
            .unwrap_or(0)
    }

    /// Sub-system built from the first `k` input operators only.
    pub fn restrict_inputs(&self, k: usize) -> Self {
        let keep: Vec<usize> = (0..self.rows()).filter(|&i| self.row_labels[i].input_index < k).collect();
        let matrix = self.matrix.select(ndarray::Axis(0), &keep);
        let rhs = self.rhs.as_ref().map(|b| b.select(ndarray::Axis(0), &keep));
        Self {
            matrix,
            rhs,
            row_labels: keep.iter().map(|&i| self.row_labels[i].clone()).collect(),
            col_labels: self.col_labels.clone(),
            hamiltonian_cols: self.hamiltonian_cols,
            provenance: self.provenance.iter().filter(|p| p.input_index < k).cloned().collect(),
        }
    }

    /// Writes the plain-text matrix file read back by [`CorrelationSystem::read_from`].
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# hamlearn correlation system v1")?;
        writeln!(w, "rows {}", self.rows())?;
        writeln!(w, "cols {}", self.cols())?;
        writeln!(w, "hamiltonian_cols {}", self.hamiltonian_cols)?;
        writeln!(w, "rhs {}", if self.rhs.is_some() { "yes" } else { "no" })?;
        for (j, label) in self.col_labels.iter().enumerate() {
            writeln!(w, "col {j} {label}")?;
        }
        for (i, l) in self.row_labels.iter().enumerate() {
            writeln!(w, "row {i} {} {} {} {}", l.input, l.input_index, l.state, l.part)?;
        }
        writeln!(w, "data")?;
        for (i, row) in self.matrix.rows().into_iter().enumerate() {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if let Some(b) = &self.rhs {
                fields.push(b[i].to_string());
            }
            writeln!(w, "{}", fields.join(" "))?;
        }
        Ok(())
    }

    /// Parses the format written by [`CorrelationSystem::write_to`]. Operator
    /// provenance is not stored in the file.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            loop {
                match lines.next() {
                    Some((i, Ok(line))) => {
                        if line.starts_with('#') || line.trim().is_empty() {
                            continue;
                        }
                        return Ok((i + 1, line));
                    }
                    Some((i, Err(e))) => return Err(Error::Format { line: i + 1, msg: e.to_string() }),
                    None => return Err(Error::Format { line: 0, msg: format!("missing {what}") }),
                }
            }
        };
        fn header(line: (usize, String), key: &str) -> Result<String> {
            let (n, text) = line;
            let rest = text
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| Error::Format { line: n, msg: format!("expected `{key}`") })?;
            Ok(rest.to_string())
        }
        let num = |line: (usize, String), key: &str| -> Result<usize> {
            let n = line.0;
            header(line, key)?.trim().parse().map_err(|_| Error::Format { line: n, msg: format!("bad {key}") })
        };
        let rows = num(next("rows")?, "rows")?;
        let cols = num(next("cols")?, "cols")?;
        let hamiltonian_cols = num(next("hamiltonian_cols")?, "hamiltonian_cols")?;
        let has_rhs = match header(next("rhs")?, "rhs")?.as_str() {
            "yes" => true,
            "no" => false,
            other => return Err(Error::Format { line: 0, msg: format!("rhs flag {other:?}") }),
        };
        let mut col_labels = Vec::with_capacity(cols);
        for j in 0..cols {
            let line = next("col")?;
            let n = line.0;
            let rest = header(line, "col")?;
            let (idx, label) = rest.split_once(' ').ok_or(Error::Format { line: n, msg: "bad col".into() })?;
            if idx.parse::<usize>().ok() != Some(j) {
                return Err(Error::Format { line: n, msg: format!("expected column {j}") });
            }
            col_labels.push(label.to_string());
        }
        let mut row_labels = Vec::with_capacity(rows);
        for i in 0..rows {
            let line = next("row")?;
            let n = line.0;
            let bad = |msg: &str| Error::Format { line: n, msg: msg.to_string() };
            let rest = header(line, "row")?;
            let f: Vec<&str> = rest.split_whitespace().collect();
            if f.len() != 5 || f[0].parse::<usize>().ok() != Some(i) {
                return Err(bad("bad row label"));
            }
            row_labels.push(RowLabel {
                input: f[1].parse().map_err(|_| bad("bad input operator"))?,
                input_index: f[2].parse().map_err(|_| bad("bad input index"))?,
                state: f[3].parse().map_err(|_| bad("bad state index"))?,
                part: f[4].parse().map_err(|_| bad("bad row part"))?,
            });
        }
        let (n, marker) = next("data")?;
        if marker.trim() != "data" {
            return Err(Error::Format { line: n, msg: "expected `data`".into() });
        }
        let width = cols + usize::from(has_rhs);
        let mut matrix = Array2::zeros((rows, cols));
        let mut rhs = has_rhs.then(|| Array1::zeros(rows));
        for i in 0..rows {
            let (n, line) = next("data row")?;
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format { line: n, msg: e.to_string() })?;
            if values.len() != width {
                return Err(Error::Format { line: n, msg: format!("expected {width} values") });
            }
            for j in 0..cols {
                matrix[[i, j]] = values[j];
            }
            if let Some(b) = rhs.as_mut() {
                b[i] = values[cols];
            }
        }
        Ok(Self { matrix, rhs, row_labels, col_labels, hamiltonian_cols, provenance: Vec::new() })
    }
}

/// Operators whose expectations give each column entry for one input.
struct SymbolicRow {
    columns: Vec<WeightedPauliSum>,
    observables: Vec<PauliString>,
}

fn symbolic_row(input: &PauliString, model: &ModelSpace) -> Result<SymbolicRow> {
    let n = model.n_sites();
    check_dim(n, input.n_sites())?;
    let mut columns = vec![WeightedPauliSum::new(n); model.dim()];
    for (l, s) in model.hamiltonian_terms().iter().enumerate() {
        columns[l] = commutator(input, s)?.scaled(-I);
    }
    for (r, region) in model.regions().iter().enumerate() {
        let basis = &region.jump_basis;
        for (ni, ln) in basis.iter().enumerate() {
            for (mi, lm) in basis.iter().enumerate() {
                // L_m† O L_n − ½{L_m† L_n, O}; Pauli jump operators are Hermitian.
                let (ph1, p1) = pauli_mul(lm, input)?;
                let (ph2, p2) = pauli_mul(&p1, ln)?;
                let mut b = WeightedPauliSum::new(n);
                b.add(p2, (ph1 * ph2).to_complex());
                let (phk, k) = pauli_mul(lm, ln)?;
                for (p, c) in anticommutator(&k, input)?.iter() {
                    b.add(p.clone(), c * phk.to_complex() * -0.5);
                }
                if b.is_empty() {
                    continue;
                }
                for (col, w) in model.gamma_coefficients(r, ni, mi) {
                    for (p, c) in b.iter() {
                        columns[col].add(p.clone(), c * w);
                    }
                }
            }
        }
    }
    let observables: BTreeSet<PauliString> = columns
        .iter()
        .flat_map(|c| c.iter().map(|(p, _)| p.clone()))
        .filter(|p| !p.is_identity())
        .collect();
    Ok(SymbolicRow { columns, observables: observables.into_iter().collect() })
}

fn evaluate(row: &SymbolicRow, rho: &Array2<C64>) -> Vec<C64> {
    row.columns
        .iter()
        .map(|col| col.iter().map(|(p, c)| c * pauli_expectation(rho, p)).sum::<C64>())
        .collect()
}

struct Builder {
    cols: usize,
    data: Vec<f64>,
    rhs: Vec<f64>,
    labels: Vec<RowLabel>,
    provenance: Vec<Provenance>,
}

impl Builder {
    fn new(cols: usize) -> Self {
        Self { cols, data: Vec::new(), rhs: Vec::new(), labels: Vec::new(), provenance: Vec::new() }
    }

    fn push_complex(&mut self, entries: &[C64], rhs: f64, input: &PauliString, input_index: usize, state: usize) {
        for (part, value, b) in [
            (RowPart::Re, entries.iter().map(|z| z.re).collect::<Vec<_>>(), rhs),
            (RowPart::Im, entries.iter().map(|z| z.im).collect::<Vec<_>>(), 0.0),
        ] {
            let norm = value.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < ROW_DROP_TOLERANCE && b.abs() < ROW_DROP_TOLERANCE {
                continue;
            }
            self.data.extend(value);
            self.rhs.push(b);
            self.labels.push(RowLabel { input: input.clone(), input_index, state, part });
        }
    }

    fn finish(self, model: &ModelSpace, heterogeneous: bool) -> CorrelationSystem {
        let rows = self.labels.len();
        let matrix = Array2::from_shape_vec((rows, self.cols), self.data).expect("row widths are uniform");
        CorrelationSystem {
            matrix,
            rhs: heterogeneous.then(|| Array1::from(self.rhs)),
            row_labels: self.labels,
            col_labels: model.column_labels(),
            hamiltonian_cols: model.hamiltonian_dim(),
            provenance: self.provenance,
        }
    }
}

/// Homogeneous system `C x = 0` from a fixed point: each input `O` gives the
/// row `⟨ℒ†_x[O]⟩_ρ` as a linear function of `x`, split into real and
/// imaginary parts.
pub fn assemble_steady(rho_ss: &DensityMatrix, inputs: &[PauliString], model: &ModelSpace) -> Result<CorrelationSystem> {
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("no input operators".into()));
    }
    check_dim(model.n_sites(), rho_ss.n_sites())?;
    let mut b = Builder::new(model.dim());
    for (i, o) in inputs.iter().enumerate() {
        let sym = symbolic_row(o, model)?;
        let entries = evaluate(&sym, rho_ss.matrix());
        b.push_complex(&entries, 0.0, o, i, 0);
        b.provenance.push(Provenance { input_index: i, state: 0, observables: sym.observables });
    }
    Ok(b.finish(model, false))
}

/// Finite-difference stencil order for the time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FdOrder {
    First,
    Second,
}

impl FdOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            FdOrder::First => 1,
            FdOrder::Second => 2,
        }
    }

    /// Derivative estimate at `t = 0` from samples at `0, dt, 2dt`.
    pub fn derivative(self, samples: &[f64], dt: f64) -> f64 {
        match self {
            FdOrder::First => (samples[1] - samples[0]) / dt,
            FdOrder::Second => (-samples[2] + 4.0 * samples[1] - 3.0 * samples[0]) / (2.0 * dt),
        }
    }
}

impl TryFrom<u8> for FdOrder {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(FdOrder::First),
            2 => Ok(FdOrder::Second),
            _ => Err(Error::InvalidParameter(format!("finite-difference order {v} is not 1 or 2"))),
        }
    }
}

/// Heterogeneous system `C' x = W`: rows evaluate the structural entries on
/// each input state, the right-hand side holds the finite-difference estimate
/// of `d⟨O_i⟩_j / dt` from propagated states.
pub fn assemble_dynamical(
    states: &[DensityMatrix],
    inputs: &[PauliString],
    gen: &LindbladGenerator,
    dt: f64,
    order: u8,
    model: &ModelSpace,
) -> Result<CorrelationSystem> {
    let order = FdOrder::try_from(order)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be > 0")));
    }
    if inputs.is_empty() || states.is_empty() {
        return Err(Error::InvalidParameter("no input operators or states".into()));
    }
    check_dim(model.n_sites(), gen.n_sites())?;
    let step = Propagator::new(gen, dt)?;
    let mut trajectories = Vec::with_capacity(states.len());
    for rho in states {
        check_dim(gen.dim(), rho.dim())?;
        let mut traj = vec![rho.matrix().clone(), step.evolve(rho.matrix())?];
        if order == FdOrder::Second {
            let next = step.evolve(&traj[1])?;
            traj.push(next);
        }
        trajectories.push(traj);
    }
    let mut b = Builder::new(model.dim());
    for (i, o) in inputs.iter().enumerate() {
        let sym = symbolic_row(o, model)?;
        for (j, traj) in trajectories.iter().enumerate() {
            let entries = evaluate(&sym, &traj[0]);
            let samples: Vec<f64> = traj.iter().map(|r| pauli_expectation(r, o).re).collect();
            b.push_complex(&entries, order.derivative(&samples, dt), o, i, j);
            let mut obs = sym.observables.clone();
            if !o.is_identity() && !obs.contains(o) {
                obs.push(o.clone());
                obs.sort();
            }
            b.provenance.push(Provenance { input_index: i, state: j, observables: obs });
        }
    }
    Ok(b.finish(model, true))
}

/// Adds independent `N(0, σ²)` draws to every matrix and right-hand-side
/// entry. The stream depends only on `seed`.
pub fn inject_noise(system: &CorrelationSystem, sigma: f64, seed: u64) -> Result<CorrelationSystem> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise level {sigma} must be >= 0")));
    }
    let mut out = system.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    for v in out.matrix.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    if let Some(b) = out.rhs.as_mut() {
        for v in b.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Distinct non-identity Pauli observables needed to populate the system.
pub fn measurement_complexity(system: &CorrelationSystem) -> usize {
    system.provenance.iter().flat_map(|p| p.observables.iter()).collect::<BTreeSet<_>>().len()
}

/// Complex structural row for one input and state, before the real/imaginary
/// split.
pub fn structural_row(input: &PauliString, rho: &DensityMatrix, model: &ModelSpace) -> Result<Vec<C64>> {
    let sym = symbolic_row(input, model)?;
    Ok(evaluate(&sym, rho.matrix()))
}
