//! Dense Hermitian operators and their functional calculus.
//!
//! Operators on a product space `H1 ⊗ H2` use the index layout
//! `(i, j) ↦ i·d2 + j`, where `i` indexes `H1` and `j` indexes `H2`.
//! Partial traces below are written as explicit index sums over that layout.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QotError, Result};
use crate::scalar::{abs, lit, to_f64, Real};

/// Tolerance used when reading operators from files.
pub const FILE_HERMITIAN_TOL: f64 = 1e-8;

/// The pair of factor dimensions `(d1, d2)` of `H1 ⊗ H2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductSpace {
    pub d1: usize,
    pub d2: usize,
}

impl ProductSpace {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(QotError::InvalidInput(format!(
                "product space factors must be positive, got ({d1}, {d2})"
            )));
        }
        Ok(Self { d1, d2 })
    }

    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.d2 + j
    }
}

/// A dense complex Hermitian matrix.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator<T: Real> {
    mat: DMatrix<Complex<T>>,
}

/// Eigenvalues in ascending order with the matching unitary eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition<T: Real> {
    pub eigenvalues: Vec<T>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<Complex<T>>,
}

fn max_abs_entry<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()))
}

/// Returns `(A + A†)/2` for a square complex matrix.
pub fn hermitian_project<T: Real>(a: &DMatrix<Complex<T>>) -> HermitianOperator<T> {
    assert!(a.is_square(), "hermitian_project requires a square matrix");
    let half = lit::<T>(0.5);
    let mut mat = a + a.adjoint();
    mat.iter_mut().for_each(|z| *z = z.scale(half));
    HermitianOperator { mat }
}

impl<T: Real> HermitianOperator<T> {
    /// Validates finiteness and Hermitian symmetry, then symmetrizes.
    pub fn from_matrix(mat: DMatrix<Complex<T>>) -> Result<Self> {
        Self::from_matrix_with_tol(mat, T::hermitian_tol())
    }

    pub fn from_matrix_with_tol(mat: DMatrix<Complex<T>>, tol: T) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(QotError::InvalidInput(format!(
                "expected a non-empty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QotError::InvalidInput("matrix has non-finite entries".into()));
        }
        let skew = max_abs_entry(&(&mat - mat.adjoint()));
        let bound = tol * (T::one() + max_abs_entry(&mat));
        if skew > bound {
            return Err(QotError::InvalidInput(format!(
                "matrix is not Hermitian: max|A - A†| = {:e}",
                to_f64(skew)
            )));
        }
        Ok(hermitian_project(&mat))
    }

    /// Builds from row-major real and imaginary parts.
    pub fn from_re_im(re: &[Vec<T>], im: &[Vec<T>]) -> Result<Self> {
        let n = re.len();
        if im.len() != n || re.iter().chain(im.iter()).any(|row| row.len() != n) {
            return Err(QotError::InvalidInput(
                "re/im must both be n×n row-major arrays".into(),
            ));
        }
        let mat = DMatrix::from_fn(n, n, |i, j| Complex::new(re[i][j], im[i][j]));
        Self::from_matrix(mat)
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        assert!(n > 0, "dimension must be positive");
        let mat = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex::new(diag[i], T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        });
        Self { mat }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            mat: DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero())),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, lambda: T) -> Self {
        Self::from_real_diagonal(&vec![lambda; dim])
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex<T>> {
        self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        self.mat[(i, j)]
    }

    pub fn real_parts(&self) -> Vec<Vec<T>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.mat[(i, j)].re).collect())
            .collect()
    }

    pub fn imag_parts(&self) -> Vec<Vec<T>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.mat[(i, j)].im).collect())
            .collect()
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            mat: self.mat.map(|z| z.scale(k)),
        }
    }

    /// `A + λ·Id`.
    pub fn shift(&self, lambda: T) -> Self {
        let mut mat = self.mat.clone();
        for i in 0..self.dim() {
            mat[(i, i)].re += lambda;
        }
        Self { mat }
    }

    /// `self + k·other`.
    pub fn axpy(&self, k: T, other: &Self) -> Self {
        self.check_same_dim(other)
            .expect("axpy requires equal dimensions");
        Self {
            mat: self.mat.zip_map(&other.mat, |a, b| a + b.scale(k)),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).fold(T::zero(), |acc, i| acc + self.mat[(i, i)].re)
    }

    pub fn max_abs(&self) -> T {
        max_abs_entry(&self.mat)
    }

    pub fn hs_norm(&self) -> T {
        self.mat
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    /// `‖self − other‖_HS`.
    pub fn distance(&self, other: &Self) -> T {
        (self - other).hs_norm()
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(QotError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.mat.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn spectral_decompose(&self) -> Result<SpectralDecomposition<T>> {
        if !self.is_finite() {
            return Err(QotError::InvalidInput(
                "cannot decompose an operator with non-finite entries".into(),
            ));
        }
        let n = self.dim();
        if n == 1 {
            return Ok(SpectralDecomposition {
                eigenvalues: vec![self.mat[(0, 0)].re],
                eigenvectors: DMatrix::from_element(1, 1, Complex::new(T::one(), T::zero())),
            });
        }
        let eig = SymmetricEigen::try_new(self.mat.clone(), T::default_epsilon(), 10_000 * n)
            .ok_or_else(|| {
                QotError::Numeric(format!(
                    "Hermitian eigensolver did not converge (dim {n}, max|A| = {:e})",
                    to_f64(self.max_abs())
                ))
            })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .expect("finite eigenvalues")
        });
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn smallest_eigenvalue(&self) -> Result<T> {
        Ok(self.spectral_decompose()?.eigenvalues[0])
    }

    pub fn largest_eigenvalue(&self) -> Result<T> {
        Ok(*self
            .spectral_decompose()?
            .eigenvalues
            .last()
            .expect("dim >= 1"))
    }

    /// Largest `|λ|`, the operator norm.
    pub fn spectral_norm(&self) -> Result<T> {
        let eig = self.spectral_decompose()?;
        Ok(eig
            .eigenvalues
            .iter()
            .fold(T::zero(), |acc, &l| acc.max(abs(l))))
    }

    /// `Σ_k f(λ_k)|ξ_k⟩⟨ξ_k|`.
    pub fn lift(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Ok(self.spectral_decompose()?.map(f))
    }

    /// Like [`lift`](Self::lift) for partial functions; `None` marks an
    /// eigenvalue outside the domain of `f`.
    pub fn try_lift(&self, name: &str, f: impl Fn(T) -> Option<T>) -> Result<Self> {
        self.spectral_decompose()?.try_map(name, f)
    }

    /// `Σ_k f(λ_k)`.
    pub fn trace_function(&self, f: impl Fn(T) -> T) -> Result<T> {
        Ok(self
            .spectral_decompose()?
            .eigenvalues
            .into_iter()
            .fold(T::zero(), |acc, l| acc + f(l)))
    }

    /// `Re Tr[A·B]`.
    pub fn hs_inner(&self, other: &Self) -> Result<T> {
        self.check_same_dim(other)?;
        // Tr[AB] = Σ_ij A_ij B_ji = Σ_ij A_ij conj(B_ij) for Hermitian B.
        Ok(self
            .mat
            .iter()
            .zip(other.mat.iter())
            .fold(T::zero(), |acc, (a, b)| acc + (a * b.conj()).re))
    }

    /// `A ⊗ B` with entry `((i,j),(k,l)) = A(i,k)·B(j,l)`.
    pub fn kron(&self, other: &Self) -> Self {
        let space = ProductSpace {
            d1: self.dim(),
            d2: other.dim(),
        };
        let n = space.dim();
        let mut mat = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
        for i in 0..space.d1 {
            for k in 0..space.d1 {
                let a = self.mat[(i, k)];
                for j in 0..space.d2 {
                    for l in 0..space.d2 {
                        mat[(space.index(i, j), space.index(k, l))] = a * other.mat[(j, l)];
                    }
                }
            }
        }
        hermitian_project(&mat)
    }

    /// `U ⊕ V = U ⊗ Id + Id ⊗ V`.
    pub fn oplus(&self, v: &Self) -> Self {
        let space = ProductSpace {
            d1: self.dim(),
            d2: v.dim(),
        };
        let n = space.dim();
        let mut mat = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
        for i in 0..space.d1 {
            for k in 0..space.d1 {
                let u = self.mat[(i, k)];
                for j in 0..space.d2 {
                    mat[(space.index(i, j), space.index(k, j))] += u;
                }
            }
        }
        for i in 0..space.d1 {
            for j in 0..space.d2 {
                for l in 0..space.d2 {
                    mat[(space.index(i, j), space.index(i, l))] += v.mat[(j, l)];
                }
            }
        }
        hermitian_project(&mat)
    }

    fn check_product_dim(&self, space: ProductSpace) -> Result<()> {
        if self.dim() != space.dim() {
            return Err(QotError::DimensionMismatch {
                expected: space.dim(),
                found: self.dim(),
            });
        }
        Ok(())
    }

    /// `P1 Γ = Tr_{H2} Γ`, so that `Tr[Γ(U⊗Id)] = Tr[(P1 Γ) U]`.
    pub fn partial_trace_1(&self, space: ProductSpace) -> Result<Self> {
        self.check_product_dim(space)?;
        let mat = DMatrix::from_fn(space.d1, space.d1, |i, k| {
            (0..space.d2).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                acc + self.mat[(space.index(i, j), space.index(k, j))]
            })
        });
        Ok(hermitian_project(&mat))
    }

    /// `P2 Γ = Tr_{H1} Γ`, so that `Tr[Γ(Id⊗V)] = Tr[(P2 Γ) V]`.
    pub fn partial_trace_2(&self, space: ProductSpace) -> Result<Self> {
        self.check_product_dim(space)?;
        let mat = DMatrix::from_fn(space.d2, space.d2, |j, l| {
            (0..space.d1).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
                acc + self.mat[(space.index(i, j), space.index(i, l))]
            })
        });
        Ok(hermitian_project(&mat))
    }

    /// Converts between scalar types through `f64`.
    pub fn cast<S: Real>(&self) -> HermitianOperator<S> {
        HermitianOperator {
            mat: self
                .mat
                .map(|z| Complex::new(lit::<S>(to_f64(z.re)), lit::<S>(to_f64(z.im)))),
        }
    }

    pub fn to_file(&self) -> MatrixFile {
        let conv = |rows: Vec<Vec<T>>| -> Vec<Vec<f64>> {
            rows.into_iter()
                .map(|r| r.into_iter().map(to_f64).collect())
                .collect()
        };
        MatrixFile {
            dim: self.dim(),
            re: conv(self.real_parts()),
            im: conv(self.imag_parts()),
        }
    }

    pub fn from_file(file: &MatrixFile) -> Result<Self> {
        let n = file.dim;
        if n == 0 {
            return Err(QotError::InvalidInput("matrix file: dim must be >= 1".into()));
        }
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !shape_ok(&file.re) || !shape_ok(&file.im) {
            return Err(QotError::InvalidInput(format!(
                "matrix file: re and im must be {n}x{n} arrays"
            )));
        }
        let mat = DMatrix::from_fn(n, n, |i, j| {
            Complex::new(lit::<T>(file.re[i][j]), lit::<T>(file.im[i][j]))
        });
        Self::from_matrix_with_tol(mat, lit(FILE_HERMITIAN_TOL))
    }
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn rebuild(&self, values: &[T]) -> HermitianOperator<T> {
        let mut scaled = self.eigenvectors.clone();
        for (k, &v) in values.iter().enumerate() {
            scaled.column_mut(k).iter_mut().for_each(|z| *z = z.scale(v));
        }
        hermitian_project(&(scaled * self.eigenvectors.adjoint()))
    }

    pub fn reconstruct(&self) -> HermitianOperator<T> {
        self.rebuild(&self.eigenvalues)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> HermitianOperator<T> {
        let values: Vec<T> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.rebuild(&values)
    }

    pub fn try_map(&self, name: &str, f: impl Fn(T) -> Option<T>) -> Result<HermitianOperator<T>> {
        let values = self
            .eigenvalues
            .iter()
            .map(|&l| match f(l) {
                Some(v) if v.is_finite() => Ok(v),
                _ => Err(QotError::Domain {
                    function: name.to_string(),
                    eigenvalue: to_f64(l),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.rebuild(&values))
    }
}

impl<T: Real> fmt::Debug for HermitianOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianOperator(dim={}) {}", self.dim(), self.mat)
    }
}

/// On-disk representation: `{ "dim": n, "re": [[...]], "im": [[...]] }`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl<T: Real> Serialize for HermitianOperator<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(serializer)
    }
}

impl<'de, T: Real> Deserialize<'de> for HermitianOperator<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = MatrixFile::deserialize(deserializer)?;
        Self::from_file(&file).map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a, T: Real> $trait<&'a HermitianOperator<T>> for &'a HermitianOperator<T> {
            type Output = HermitianOperator<T>;
            fn $method(self, rhs: &'a HermitianOperator<T>) -> HermitianOperator<T> {
                assert_eq!(self.dim(), rhs.dim(), "operator dimensions differ");
                HermitianOperator { mat: &self.mat $op &rhs.mat }
            }
        }
        impl<T: Real> $trait<HermitianOperator<T>> for HermitianOperator<T> {
            type Output = HermitianOperator<T>;
            fn $method(self, rhs: HermitianOperator<T>) -> HermitianOperator<T> {
                &self $op &rhs
            }
        }
        impl<'a, T: Real> $trait<&'a HermitianOperator<T>> for HermitianOperator<T> {
            type Output = HermitianOperator<T>;
            fn $method(self, rhs: &'a HermitianOperator<T>) -> HermitianOperator<T> {
                &self $op rhs
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);

impl<T: Real> AddAssign<&HermitianOperator<T>> for HermitianOperator<T> {
    fn add_assign(&mut self, rhs: &HermitianOperator<T>) {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions differ");
        self.mat += &rhs.mat;
    }
}

impl<T: Real> SubAssign<&HermitianOperator<T>> for HermitianOperator<T> {
    fn sub_assign(&mut self, rhs: &HermitianOperator<T>) {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions differ");
        self.mat -= &rhs.mat;
    }
}

impl<T: Real> Neg for &HermitianOperator<T> {
    type Output = HermitianOperator<T>;
    fn neg(self) -> HermitianOperator<T> {
        HermitianOperator { mat: -&self.mat }
    }
}

impl<T: Real> Neg for HermitianOperator<T> {
    type Output = HermitianOperator<T>;
    fn neg(self) -> HermitianOperator<T> {
        -&self
    }
}

impl<T: Real> Mul<T> for &HermitianOperator<T> {
    type Output = HermitianOperator<T>;
    fn mul(self, k: T) -> HermitianOperator<T> {
        self.scale(k)
    }
}

impl<T: Real> Mul<T> for HermitianOperator<T> {
    type Output = HermitianOperator<T>;
    fn mul(self, k: T) -> HermitianOperator<T> {
        self.scale(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type H = HermitianOperator<f64>;

    fn pauli_x() -> H {
        H::from_re_im(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[vec![0.0; 2], vec![0.0; 2]]).unwrap()
    }

    #[test]
    fn diagonal_spectrum_is_sorted() {
        let a = H::from_real_diagonal(&[2.0, 1.0]);
        let eig = a.spectral_decompose().unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 2.0]);
        // eigenvectors: columns of a permutation of the identity
        assert!((eig.eigenvectors[(1, 0)].norm_sqr() - 1.0).abs() < 1e-14);
        assert!((eig.eigenvectors[(0, 1)].norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_x_spectrum() {
        let eig = pauli_x().spectral_decompose().unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lift_examples() {
        let e = H::zeros(2).lift(f64::exp).unwrap();
        assert!(e.distance(&H::identity(2)) < 1e-15);
        let sq = pauli_x().lift(|t| t * t).unwrap();
        assert!(sq.distance(&H::identity(2)) < 1e-14);
        let f = |t: f64| t * t.ln() - t;
        let got = H::from_real_diagonal(&[0.3, 0.7]).lift(f).unwrap();
        let want = H::from_real_diagonal(&[f(0.3), f(0.7)]);
        assert!(got.distance(&want) < 1e-15);
    }

    #[test]
    fn lift_reports_offending_eigenvalue() {
        let a = H::from_real_diagonal(&[-0.5, 2.0]);
        let err = a
            .try_lift("ln", |t| if t > 0.0 { Some(t.ln()) } else { None })
            .unwrap_err();
        match err {
            QotError::Domain { eigenvalue, .. } => assert_eq!(eigenvalue, -0.5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn kron_examples() {
        assert_eq!(H::identity(2).kron(&H::identity(2)), H::identity(4));
        let k = H::from_real_diagonal(&[1.0, 2.0]).kron(&H::from_real_diagonal(&[3.0, 4.0]));
        assert!(k.distance(&H::from_real_diagonal(&[3.0, 4.0, 6.0, 8.0])) < 1e-15);
    }

    #[test]
    fn oplus_examples() {
        let s = H::from_real_diagonal(&[1.0, 2.0]).oplus(&H::from_real_diagonal(&[10.0, 20.0]));
        assert!(s.distance(&H::from_real_diagonal(&[11.0, 21.0, 12.0, 22.0])) < 1e-15);
        let z = H::scaled_identity(3, 1.7).oplus(&H::scaled_identity(2, -1.7));
        assert!(z.max_abs() < 1e-15);
    }

    #[test]
    fn partial_traces_of_identity() {
        let space = ProductSpace::new(2, 2).unwrap();
        let id = H::identity(4);
        assert!(id.partial_trace_1(space).unwrap().distance(&H::scaled_identity(2, 2.0)) < 1e-15);
        assert!(id.partial_trace_2(space).unwrap().distance(&H::scaled_identity(2, 2.0)) < 1e-15);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let space = ProductSpace::new(2, 3).unwrap();
        assert!(matches!(
            H::identity(4).partial_trace_1(space),
            Err(QotError::DimensionMismatch { expected: 6, found: 4 })
        ));
    }

    #[test]
    fn hs_inner_and_trace_function() {
        assert_eq!(H::identity(3).hs_inner(&H::identity(3)).unwrap(), 3.0);
        let a = H::from_real_diagonal(&[0.0, 2f64.ln()]);
        assert!((a.trace_function(f64::exp).unwrap() - 3.0).abs() < 1e-15);
        assert!(H::identity(2).hs_inner(&H::identity(3)).is_err());
    }

    #[test]
    fn smallest_eigenvalue_examples() {
        let a = H::from_real_diagonal(&[3.0, -1.0, 2.0]);
        assert_eq!(a.smallest_eigenvalue().unwrap(), -1.0);
        assert!((H::scaled_identity(4, 0.25).smallest_eigenvalue().unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(0.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(0.0, 0.0),
                Complex::new(0.0, 0.0),
            ],
        );
        let p = hermitian_project(&a);
        assert_eq!(p.entry(0, 1), Complex::new(0.5, 0.0));
        assert_eq!(p.entry(1, 0), Complex::new(0.5, 0.0));
        assert_eq!(hermitian_project(p.matrix()), p);
    }

    #[test]
    fn rejects_non_hermitian_and_non_finite() {
        let bad = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(0.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(0.0, 0.0),
                Complex::new(0.0, 0.0),
            ],
        );
        assert!(H::from_matrix(bad).is_err());
        let nan = DMatrix::from_element(1, 1, Complex::new(f64::NAN, 0.0));
        assert!(matches!(H::from_matrix(nan), Err(QotError::InvalidInput(_))));
    }

    #[test]
    fn file_reader_tolerance() {
        let mut file = pauli_x().to_file();
        file.re[0][1] += 1e-10;
        assert!(H::from_file(&file).is_ok());
        file.re[0][1] += 1e-6;
        assert!(H::from_file(&file).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let a = HermitianOperator::<f32>::from_real_diagonal(&[0.5, -0.25]);
        let eig = a.spectral_decompose().unwrap();
        assert_eq!(eig.eigenvalues, vec![-0.25, 0.5]);
    }
}
