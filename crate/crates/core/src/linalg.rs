//! Small dense helpers shared by the dynamics and estimator modules.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};
use ndarray::{Array1, Array2, ArrayView2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub fn identity(dim: usize) -> Array2<C64> {
    Array2::eye(dim)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &aij) in a.indexed_iter() {
        if aij == ZERO {
            continue;
        }
        let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
        Zip::from(&mut block).and(&b).for_each(|o, &v| *o = aij * v);
    }
    out
}

pub fn frobenius(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// Largest entry of `|m - m†|`.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

fn to_faer<T: Copy>(m: &Array2<T>) -> Mat<T> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn from_faer<T: Copy>(m: MatRef<'_, T>) -> Array2<T> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

fn decomposition_error(what: &str, e: impl std::fmt::Debug) -> Error {
    Error::Linalg(format!("{what}: {e:?}"))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix; only the
/// lower triangle is read.
pub fn hermitian_eig(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let evd = to_faer(m).self_adjoint_eigen(Side::Lower).map_err(|e| decomposition_error("Hermitian eigensolver", e))?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, from_faer(evd.U())))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Result<Vec<f64>> {
    to_faer(m).self_adjoint_eigenvalues(Side::Lower).map_err(|e| decomposition_error("Hermitian eigensolver", e))
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: &Array2<f64>) -> Result<Vec<f64>> {
    to_faer(m).self_adjoint_eigenvalues(Side::Lower).map_err(|e| decomposition_error("symmetric eigensolver", e))
}

/// Eigenvalues and right eigenvectors (as columns) of a general complex
/// matrix.
pub fn eig(m: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    let evd = to_faer(m).eigen().map_err(|e| decomposition_error("eigensolver", e))?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok((values, from_faer(evd.U())))
}

/// Inverse through an LU factorisation with partial pivoting.
pub fn inverse(m: &Array2<C64>) -> Array2<C64> {
    from_faer(to_faer(m).partial_piv_lu().inverse().as_ref())
}

/// `A = U diag(s) Vᵀ` with `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

/// Thin decomposition (`k = min(m, n)` columns in `U` and `V`), or the full
/// one with square `U` and `V`.
pub fn svd(a: &Array2<f64>, full: bool) -> Result<Svd> {
    let f = to_faer(a);
    let d = if full { f.svd() } else { f.thin_svd() }.map_err(|e| decomposition_error("SVD", e))?;
    Ok(Svd { u: from_faer(d.U()), s: d.S().column_vector().iter().copied().collect(), v: from_faer(d.V()) })
}

pub fn hermitize(m: &Array2<C64>) -> Array2<C64> {
    (m + &dagger(m)).mapv(|z| z * 0.5)
}

/// Column-stacking vectorization: `vec(A)[i + j*n] = A[i, j]`.
pub fn vectorize(m: &Array2<C64>) -> Array1<C64> {
    m.t().iter().copied().collect()
}

pub fn unvectorize(v: &Array1<C64>, dim: usize) -> Array2<C64> {
    Array2::from_shape_fn((dim, dim), |(i, j)| v[i + j * dim])
}

pub fn one_norm(m: &Array2<C64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by degree-13 Padé approximation with scaling and
/// squaring.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-squarings);
    let a = a.mapv(|z| z * scale);
    let b = &PADE13;
    let eye = identity(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> Array2<C64> {
        let mut m = a6.mapv(|z| z * c6);
        m.scaled_add(C64::new(c4, 0.0), &a4);
        m.scaled_add(C64::new(c2, 0.0), &a2);
        if c0 != 0.0 {
            m.scaled_add(C64::new(c0, 0.0), &eye);
        }
        m
    };
    let u_inner = a6.dot(&lin(b[13], b[11], b[9], 0.0)) + lin(b[7], b[5], b[3], b[1]);
    let u = a.dot(&u_inner);
    let v = a6.dot(&lin(b[12], b[10], b[8], 0.0)) + lin(b[6], b[4], b[2], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = inverse(&q).dot(&p);
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = array![[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(0.0, -20.0)]];
        let e = expm(&d).unwrap();
        assert!((e[[0, 0]] - C64::new(1f64.exp(), 0.0)).norm() < 1e-13);
        assert!((e[[1, 1]] - C64::new(0.0, -20.0).exp()).norm() < 1e-12);
        let nil = array![[ZERO, C64::new(3.0, 0.0)], [ZERO, ZERO]];
        let e = expm(&nil).unwrap();
        assert!((e[[0, 1]] - C64::new(3.0, 0.0)).norm() < 1e-14);
        assert!((e[[0, 0]] - ONE).norm() < 1e-14);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(-i θ X) = cos θ I - i sin θ X
        let theta = 7.3;
        let x = array![[ZERO, C64::new(0.0, -theta)], [C64::new(0.0, -theta), ZERO]];
        let e = expm(&x).unwrap();
        assert!((e[[0, 0]] - C64::new(theta.cos(), 0.0)).norm() < 1e-12);
        assert!((e[[0, 1]] - C64::new(0.0, -theta.sin())).norm() < 1e-12);
    }

    #[test]
    fn vectorization_is_column_major() {
        let m = array![[C64::new(1.0, 0.0), C64::new(2.0, 0.0)], [C64::new(3.0, 0.0), C64::new(4.0, 0.0)]];
        let v = vectorize(&m);
        assert_eq!(v.iter().map(|z| z.re).collect::<Vec<_>>(), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvectorize(&v, 2), m);
    }

    #[test]
    fn hermitian_eig_reconstructs_complex_input() {
        let h = array![[ONE, C64::new(0.0, 0.7)], [C64::new(0.0, -0.7), -ONE]];
        let (e, v) = hermitian_eig(&h).unwrap();
        let d = Array2::from_diag(&e.mapv(|x| C64::new(x, 0.0)));
        let back = v.dot(&d).dot(&dagger(&v));
        assert!(frobenius(&(&back - &h)) < 1e-14);
    }

    #[test]
    fn general_eig_and_inverse() {
        let m = array![[C64::new(2.0, 1.0), ONE], [ZERO, C64::new(-1.0, 0.5)]];
        let (vals, vecs) = eig(&m).unwrap();
        for k in 0..2 {
            let v = vecs.column(k).to_owned();
            let r = m.dot(&v) - v.mapv(|z| z * vals[k]);
            assert!(r.iter().all(|z| z.norm() < 1e-13));
        }
        let back = inverse(&m).dot(&m);
        assert!(frobenius(&(&back - &identity(2))) < 1e-14);
    }

    #[test]
    fn svd_reconstructs_wide_and_tall() {
        for (rows, cols) in [(7, 3), (3, 7), (160, 141)] {
            let a = Array2::from_shape_fn((rows, cols), |(i, j)| ((i * 31 + j * 17) % 13) as f64 - 6.0 + 0.01 * i as f64);
            for full in [false, true] {
                let d = svd(&a, full).unwrap();
                let k = d.s.len();
                let us = d.u.slice(ndarray::s![.., ..k]).to_owned() * &d.s;
                let back = us.dot(&d.v.slice(ndarray::s![.., ..k]).t());
                let err = (&back - &a).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(err < 1e-10, "{rows}x{cols} {err:e}");
                assert!(d.s.windows(2).into_iter().all(|w| w[0] >= w[1]));
                if full {
                    assert_eq!(d.v.dim(), (cols, cols));
                }
            }
        }
    }

    #[test]
    fn kron_matches_definition() {
        let a = array![[ONE, C64::new(2.0, 0.0)], [ZERO, I]];
        let b = array![[ZERO, ONE], [ONE, ZERO]];
        let k = kron(a.view(), b.view());
        assert_eq!(k[[0, 1]], ONE);
        assert_eq!(k[[1, 2]], C64::new(2.0, 0.0));
        assert_eq!(k[[2, 3]], I);
        assert_eq!(k[[2, 2]], ZERO);
        assert_eq!(k[[3, 2]], I);
    }
}
