//! Dense complex linear algebra: vectors, Hermitian matrices, eigenvalues
//! and positive-definite solves.
//!
//! Matrices are small (tens of rows), stored row-major, and immutable once
//! built. Eigenvalues are computed lazily and cached.

use std::ops::{Deref, Index};
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance for conjugate symmetry checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// An eigenvalue is treated as positive when it exceeds this fraction of
/// the largest eigenvalue.
pub const PD_REL_TOL: f64 = 1e-12;

/// `a^H b`.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

#[inline]
pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `‖a - b‖₂`.
#[inline]
pub fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Complex column vector with finite entries and fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation(format!("non-finite vector entry at index {i}")));
        }
        Ok(ComplexVector(entries))
    }

    /// Wraps entries produced by internal arithmetic on finite inputs.
    pub(crate) fn from_vec_unchecked(entries: Vec<Complex64>) -> Self {
        ComplexVector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        ComplexVector(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        ComplexVector(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// `self^H other`.
    pub fn dot(&self, other: &ComplexVector) -> Complex64 {
        inner(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        ComplexVector(self.0.iter().map(|z| z * c).collect())
    }

    pub fn conj(&self) -> Self {
        ComplexVector(self.0.iter().map(|z| z.conj()).collect())
    }

    /// Entries at the given indices, in order.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        ComplexVector(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

impl Deref for ComplexVector {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl From<ComplexVector> for Vec<Complex64> {
    fn from(v: ComplexVector) -> Self {
        v.0
    }
}

/// Dense Hermitian matrix, row-major.
#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
    eigvals: OnceLock<Vec<f64>>,
}

impl HermitianMatrix {
    /// Validates conjugate symmetry within [`HERMITIAN_TOL`] (relative to the
    /// largest entry) and stores the exactly symmetrized matrix.
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::validation(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("matrix has non-finite entries"));
        }
        let scale = data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut sym = data;
        for i in 0..n {
            for j in i..n {
                let a = sym[i * n + j];
                let b = sym[j * n + i].conj();
                if (a - b).norm() > HERMITIAN_TOL * scale {
                    return Err(Error::validation(format!(
                        "matrix is not Hermitian at ({i}, {j}): {a} vs conj {b}"
                    )));
                }
                let avg = (a + b) * 0.5;
                sym[i * n + j] = avg;
                sym[j * n + i] = avg.conj();
            }
        }
        Ok(HermitianMatrix {
            n,
            data: sym,
            eigvals: OnceLock::new(),
        })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::new(n, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = Complex64::new(d, 0.0);
        }
        HermitianMatrix {
            n,
            data,
            eigvals: OnceLock::new(),
        }
    }

    /// `c · a aᴴ`.
    pub fn outer(a: &[Complex64], c: f64) -> Self {
        let n = a.len();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(a[i] * a[j].conj() * c);
            }
        }
        HermitianMatrix {
            n,
            data,
            eigvals: OnceLock::new(),
        }
    }

    fn from_raw(n: usize, data: Vec<Complex64>) -> Self {
        HermitianMatrix {
            n,
            data,
            eigvals: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matvec(&self, x: &[Complex64]) -> ComplexVector {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.matvec_into(x, &mut out);
        ComplexVector(out)
    }

    pub fn matvec_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (row, o) in self.data.chunks_exact(self.n).zip(out.iter_mut()) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `Re(xᴴ A x)`; the imaginary part vanishes up to rounding.
    pub fn quad_form(&self, x: &[Complex64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, row) in self.data.chunks_exact(self.n).enumerate() {
            let ax: Complex64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += x[i].conj() * ax;
        }
        acc.re
    }

    /// `A + c I`.
    pub fn add_identity(&self, c: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..self.n {
            data[i * self.n + i] += c;
        }
        Self::from_raw(self.n, data)
    }

    /// `s · A` for real `s`.
    pub fn scale(&self, s: f64) -> Self {
        Self::from_raw(self.n, self.data.iter().map(|z| z * s).collect())
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::validation(format!(
                "dimension mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(Self::from_raw(
            self.n,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Principal submatrix on the given rows/columns.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::validation(format!(
                "index {bad} out of range for dimension {}",
                self.n
            )));
        }
        let k = indices.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in indices {
            for &j in indices {
                data.push(self.get(i, j));
            }
        }
        Ok(Self::from_raw(k, data))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    /// All eigenvalues, ascending. Computed once and cached.
    pub fn eigvals(&self) -> &[f64] {
        self.eigvals.get_or_init(|| {
            let mut vals: Vec<f64> = SymmetricEigen::new(self.to_nalgebra())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            vals.sort_by(f64::total_cmp);
            vals
        })
    }

    /// Full eigendecomposition with eigenvalues ascending.
    pub fn eigh(&self) -> Eigh {
        let eig = SymmetricEigen::new(self.to_nalgebra());
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| ComplexVector(eig.eigenvectors.column(k).iter().copied().collect()))
            .collect();
        Eigh { values, vectors }
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigvals().last().expect("nonempty matrix")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigvals()[0]
    }

    /// Every eigenvalue exceeds [`PD_REL_TOL`] times the largest.
    pub fn is_positive_definite(&self) -> bool {
        let max = self.lambda_max();
        max > 0.0 && self.lambda_min() > PD_REL_TOL * max
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, one per eigenvalue.
    pub vectors: Vec<ComplexVector>,
}

impl Eigh {
    /// `Q Λ Qᴴ` as a row-major buffer.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let n = self.values.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for (val, q) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += q[i] * q[j].conj() * *val;
                }
            }
        }
        out
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn herm_eigvals(a: &HermitianMatrix) -> Vec<f64> {
    a.eigvals().to_vec()
}

/// Cholesky factor `A = L Lᴴ` of a Hermitian positive-definite matrix.
/// Built once, solved against many right-hand sides.
#[derive(Clone, Debug)]
pub struct HpdFactor {
    n: usize,
    /// Lower triangle, row-major; upper part unused.
    l: Vec<Complex64>,
}

impl HpdFactor {
    pub fn new(a: &HermitianMatrix) -> Result<Self> {
        let n = a.dim();
        let max_diag = (0..n).map(|i| a.get(i, i).re).fold(0.0, f64::max);
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = a.get(j, j).re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d.is_nan() || d <= PD_REL_TOL * max_diag {
                return Err(Error::Singular(format!(
                    "non-positive pivot {d:e} at column {j} in Cholesky factorization"
                )));
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(HpdFactor { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` into `out` without allocating.
    pub fn solve_into(&self, b: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        assert_eq!(out.len(), n);
        // L y = b
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: Complex64 = row.iter().zip(&out[..i]).map(|(l, y)| l * y).sum();
            out[i] = (b[i] - s) / self.l[i * n + i].re;
        }
        // Lᴴ x = y
        for i in (0..n).rev() {
            let s: Complex64 = out
                .iter()
                .enumerate()
                .skip(i + 1)
                .map(|(k, x)| self.l[k * n + i].conj() * x)
                .sum();
            out[i] = (out[i] - s) / self.l[i * n + i].re;
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> ComplexVector {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.solve_into(b, &mut out);
        ComplexVector(out)
    }
}

/// Solves `A x = b` for Hermitian positive-definite `A`.
///
/// Positive definiteness is judged on the spectrum: every eigenvalue must
/// exceed [`PD_REL_TOL`]`· λ_max`.
pub fn solve_hpd(a: &HermitianMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    if b.len() != a.dim() {
        return Err(Error::validation(format!(
            "right-hand side length {} does not match dimension {}",
            b.len(),
            a.dim()
        )));
    }
    if !a.is_positive_definite() {
        return Err(Error::Singular(format!(
            "matrix is not positive definite (eigenvalues {:e} .. {:e})",
            a.lambda_min(),
            a.lambda_max()
        )));
    }
    Ok(HpdFactor::new(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hpd(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        // B Bᴴ + n I
        let b: Vec<Complex64> = (0..n * n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        HermitianMatrix::from_fn(n, |i, j| {
            let mut s: Complex64 = (0..n).map(|k| b[i * n + k] * b[j * n + k].conj()).sum();
            if i == j {
                s += n as f64;
            }
            s
        })
        .unwrap()
    }

    #[test]
    fn identity_and_diagonal_eigenvalues() {
        assert_eq!(herm_eigvals(&HermitianMatrix::identity(3)), vec![1.0, 1.0, 1.0]);
        let d = herm_eigvals(&HermitianMatrix::diagonal(&[4.0, 1.0]));
        assert!((d[0] - 1.0).abs() < 1e-14 && (d[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let err = HermitianMatrix::new(2, vec![c(1.0, 0.0), c(1.0, 1.0), c(1.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(err, Err(Error::Validation(_))));
        let err = HermitianMatrix::new(1, vec![c(1.0, 0.5)]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn eigh_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 3, 7, 16] {
            let a = random_hpd(n, &mut rng);
            let rec = a.eigh().reconstruct();
            let err = distance(&rec, a.as_slice());
            assert!(err <= 1e-9 * a.frobenius(), "n={n} err={err}");
        }
    }

    #[test]
    fn shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hpd(6, &mut rng);
        for shift in [1.0, 1e3] {
            let shifted = a.add_identity(shift);
            for (x, y) in a.eigvals().iter().zip(shifted.eigvals()) {
                assert!((x + shift - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn solve_trivial_cases() {
        let b = ComplexVector::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0)]).unwrap();
        let x = solve_hpd(&HermitianMatrix::identity(3), &b).unwrap();
        assert!(distance(&x, &b) < 1e-15);
        let x = solve_hpd(&HermitianMatrix::diagonal(&[2.0; 3]), &b).unwrap();
        assert!(distance(&x, &b.scale(c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn solve_residual_and_eigen_route_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [2, 5, 12, 30] {
            let a = random_hpd(n, &mut rng);
            let b = ComplexVector::new(
                (0..n)
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect(),
            )
            .unwrap();
            let x = solve_hpd(&a, &b).unwrap();
            let ax = a.matvec(&x);
            assert!(distance(&ax, &b) <= 1e-10 * b.norm());

            // x = Q Λ⁻¹ Qᴴ b
            let eig = a.eigh();
            let mut via_eig = vec![c(0.0, 0.0); n];
            for (val, q) in eig.values.iter().zip(&eig.vectors) {
                let coef = q.dot(&b) / *val;
                for i in 0..n {
                    via_eig[i] += q[i] * coef;
                }
            }
            assert!(distance(&via_eig, &x) <= 1e-8 * x.norm());
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = HermitianMatrix::outer(&[c(1.0, 0.0), c(0.0, 1.0)], 1.0);
        let b = ComplexVector::from_real(&[1.0, 1.0]);
        assert!(matches!(solve_hpd(&a, &b), Err(Error::Singular(_))));
        assert!(matches!(HpdFactor::new(&a), Err(Error::Singular(_))));
        let neg = HermitianMatrix::diagonal(&[1.0, -1.0]);
        assert!(matches!(solve_hpd(&neg, &b), Err(Error::Singular(_))));
    }

    #[test]
    fn restrict_picks_principal_submatrix() {
        let a = HermitianMatrix::from_fn(3, |i, j| {
            if i == j {
                c(i as f64 + 1.0, 0.0)
            } else if i < j {
                c(0.1 * (i + j) as f64, 0.2)
            } else {
                c(0.1 * (i + j) as f64, -0.2)
            }
        })
        .unwrap();
        let r = a.restrict(&[0, 2]).unwrap();
        assert_eq!(r.dim(), 2);
        assert_eq!(r[(0, 1)], a[(0, 2)]);
        assert_eq!(r[(1, 1)], a[(2, 2)]);
        assert!(a.restrict(&[3]).is_err());
    }
}
