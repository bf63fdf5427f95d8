//! Structured constant matrices (J, P_m, M, Γ) and dense analysis kernels.

use crate::scalar::{lit, to_f64, Real};
use crate::{ComplexMatrix, RealMatrix};
use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, Scalar, SymmetricEigen};
use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix has eigenvalue {eigenvalue:.3e} below -{tol:.1e}")]
    NotPsd { eigenvalue: f64, tol: f64 },
    #[error("Sylvester operator is singular")]
    SingularSylvester,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Sign classes reported by [`classify_definiteness`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    NegativeSemidefinite,
    NegativeDefinite,
}

impl Definiteness {
    pub fn is_psd(self) -> bool {
        matches!(self, Self::PositiveDefinite | Self::PositiveSemidefinite)
    }

    pub fn is_pd(self) -> bool {
        self == Self::PositiveDefinite
    }

    pub fn is_nsd(self) -> bool {
        matches!(self, Self::NegativeDefinite | Self::NegativeSemidefinite)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PositiveDefinite => "positive_definite",
            Self::PositiveSemidefinite => "psd",
            Self::Indefinite => "indefinite",
            Self::NegativeSemidefinite => "nsd",
            Self::NegativeDefinite => "negative_definite",
        }
    }
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

pub fn to_complex<T: Real>(m: &RealMatrix<T>) -> ComplexMatrix<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

pub fn re_part<T: Real>(m: &ComplexMatrix<T>) -> RealMatrix<T> {
    m.map(|z| z.re)
}

pub fn im_part<T: Real>(m: &ComplexMatrix<T>) -> RealMatrix<T> {
    m.map(|z| z.im)
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(m: &RealMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Modulus of a complex number.
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

pub fn max_abs_c<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

/// The 2×2 symplectic block [[0, 1], [-1, 0]].
pub fn j2<T: Real>() -> RealMatrix<T> {
    DMatrix::from_row_slice(2, 2, &[T::zero(), T::one(), -T::one(), T::zero()])
}

/// Block diagonal of `m` copies of J.
pub fn diag_j<T: Real>(m: usize) -> RealMatrix<T> {
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        out[(2 * k, 2 * k + 1)] = T::one();
        out[(2 * k + 1, 2 * k)] = -T::one();
    }
    out
}

pub fn block_diag<N: Scalar + Zero>(blocks: &[&DMatrix<N>]) -> DMatrix<N> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn hstack<N: Scalar + Zero>(blocks: &[&DMatrix<N>]) -> DMatrix<N> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vstack<N: Scalar + Zero>(blocks: &[&DMatrix<N>]) -> DMatrix<N> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Row-selection matrix with row `i` equal to `e_{idx[i]}`.
pub fn selection_matrix<T: Real>(idx: &[usize], n: usize) -> RealMatrix<T> {
    let mut p = DMatrix::zeros(idx.len(), n);
    for (i, &j) in idx.iter().enumerate() {
        p[(i, j)] = T::one();
    }
    p
}

/// The 2m×2m permutation sending (a1, a2, …, a2m) to (a1, a3, …, a2m-1, a2, a4, …, a2m).
pub fn permutation_matrix<T: Real>(m: usize) -> RealMatrix<T> {
    let mut p = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        p[(k, 2 * k)] = T::one();
        p[(m + k, 2 * k + 1)] = T::one();
    }
    p
}

/// M = ½[[1, i], [1, -i]].
pub fn m_matrix<T: Real>() -> ComplexMatrix<T> {
    let h = lit::<T>(0.5);
    let z = T::zero();
    DMatrix::from_row_slice(
        2,
        2,
        &[cplx(h, z), cplx(z, h), cplx(h, z), cplx(z, -h)],
    )
}

/// Block diagonal of `m` copies of M.
pub fn diag_m<T: Real>(m: usize) -> ComplexMatrix<T> {
    let mm = m_matrix::<T>();
    let blocks: Vec<&ComplexMatrix<T>> = (0..m).map(|_| &mm).collect();
    block_diag(&blocks)
}

/// Γ(N) = P_N · diag_N(M).
pub fn gamma_matrix<T: Real>(n_pairs: usize) -> ComplexMatrix<T> {
    to_complex(&permutation_matrix::<T>(n_pairs)) * diag_m::<T>(n_pairs)
}

/// Inverse of Γ(N), in closed form: diag_N(M⁻¹)·P_Nᵀ with M⁻¹ = [[1, 1], [-i, i]].
pub fn gamma_inverse<T: Real>(n_pairs: usize) -> ComplexMatrix<T> {
    let z = T::zero();
    let o = T::one();
    let minv = DMatrix::from_row_slice(2, 2, &[cplx(o, z), cplx(o, z), cplx(z, -o), cplx(z, o)]);
    let blocks: Vec<&ComplexMatrix<T>> = (0..n_pairs).map(|_| &minv).collect();
    block_diag(&blocks) * to_complex(&permutation_matrix::<T>(n_pairs).transpose())
}

/// Spectral (largest singular value) norm; zero for empty matrices.
pub fn op_norm<T: Real>(m: &RealMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |a, &s| a.max(s))
}

pub fn op_norm_c<T: Real>(m: &ComplexMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |a, &s| a.max(s))
}

/// Smallest singular value; zero for empty matrices.
pub fn sigma_min_c<T: Real>(m: &ComplexMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    let s = m.clone().svd(false, false).singular_values;
    s.iter().fold(s[0], |a, &x| a.min(x))
}

pub fn symmetrize<T: Real>(m: &RealMatrix<T>) -> RealMatrix<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}

pub fn hermitian_part<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    (m + m.adjoint()).map(|z| z * lit::<T>(0.5))
}

fn require_square<N: Scalar>(m: &DMatrix<N>) -> Result<usize, MatError> {
    if m.nrows() != m.ncols() {
        return Err(MatError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Householder reflector I − 2vv†/‖v‖² for a fixed, dense v.
fn scrambler<T: Real>(n: usize) -> ComplexMatrix<T> {
    let v = DMatrix::<Complex<T>>::from_fn(n, 1, |i, _| {
        cplx(lit::<T>(1.0 + 0.37 * i as f64), lit::<T>(0.11 * (i % 3) as f64))
    });
    let vv = &v * v.adjoint() * cplx(lit::<T>(2.0) / v.norm_squared(), T::zero());
    DMatrix::identity(n, n) - vv
}

/// Shifted QR can stall on particular orderings; retry on unitarily
/// similar copies W†MW and map the Schur vectors back with W.
fn schur_attempts<T: Real>(m: &ComplexMatrix<T>) -> Option<(ComplexMatrix<T>, ComplexMatrix<T>)> {
    let n = m.nrows();
    let reversal = {
        let mut p = DMatrix::<Complex<T>>::zeros(n, n);
        for i in 0..n {
            p[(i, n - 1 - i)] = Complex::new(T::one(), T::zero());
        }
        p
    };
    let transforms = [None, Some(reversal), Some(scrambler::<T>(n))];
    for (k, w) in transforms.iter().enumerate() {
        let target = match w {
            Some(w) => w.adjoint() * m * w,
            None => m.clone(),
        };
        let eps = T::default_epsilon() * lit::<T>(if k == 0 { 1.0 } else { 4.0 });
        if let Some(schur) = Schur::try_new(target, eps, 10_000 * n) {
            let (q, t) = schur.unpack();
            return Some(match w {
                Some(w) => (w * q, t),
                None => (q, t),
            });
        }
    }
    None
}

/// Complex Schur form M = Q·T·Q† with T upper triangular.
pub fn complex_schur<T: Real>(
    m: &ComplexMatrix<T>,
) -> Result<(ComplexMatrix<T>, ComplexMatrix<T>), MatError> {
    let n = require_square(m)?;
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let (q, mut t) = schur_attempts(m).ok_or(MatError::NoConvergence)?;
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex::zero();
        }
    }
    Ok((q, t))
}

/// Orders eigenvalues lexicographically by (real, imaginary).
pub fn sort_eigenvalues<T: Real>(v: &mut [Complex<T>]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

pub fn eigenvalues_c<T: Real>(m: &ComplexMatrix<T>) -> Result<Vec<Complex<T>>, MatError> {
    let (_, t) = complex_schur(m)?;
    let mut v: Vec<Complex<T>> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    sort_eigenvalues(&mut v);
    Ok(v)
}

/// Eigenvalues of a real square matrix, sorted by (real, imaginary).
pub fn eigenvalues<T: Real>(m: &RealMatrix<T>) -> Result<Vec<Complex<T>>, MatError> {
    let mut v = eigenvalues_c(&to_complex(m))?;
    // Snap the imaginary parts of real eigenvalues so conjugate pairs stay paired.
    let scale = T::one() + max_abs(m);
    let cut = lit::<T>(1e3) * T::default_epsilon() * scale;
    for z in v.iter_mut() {
        if z.im.abs() <= cut {
            z.im = T::zero();
        }
    }
    sort_eigenvalues(&mut v);
    Ok(v)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<T: Real>(m: &RealMatrix<T>) -> Result<T, MatError> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(T::zero(), |a, z| a.max(cabs(*z))))
}

/// Largest eigenvalue real part (negative infinity surrogate for empty input).
pub fn spectral_abscissa<T: Real>(m: &RealMatrix<T>) -> Result<T, MatError> {
    let eig = eigenvalues(m)?;
    Ok(eig
        .iter()
        .map(|z| z.re)
        .fold(lit::<T>(-1e300_f64.min(f64::MAX)), |a, r| a.max(r)))
}

/// True when every eigenvalue has real part below `-tol`.
pub fn is_hurwitz<T: Real>(m: &RealMatrix<T>, tol: T) -> Result<bool, MatError> {
    Ok(eigenvalues(m)?.iter().all(|z| z.re < -tol))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen<T: Real>(m: &ComplexMatrix<T>) -> (Vec<T>, ComplexMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let se = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[a]
            .partial_cmp(&se.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen<T: Real>(m: &RealMatrix<T>) -> (Vec<T>, RealMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let se = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[a]
            .partial_cmp(&se.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

fn check_hermitian<T: Real>(s: &ComplexMatrix<T>, tol: T) -> Result<(), MatError> {
    require_square(s)?;
    let dev = max_abs_c(&(s - s.adjoint()));
    if dev > tol * (T::one() + max_abs_c(s)) {
        return Err(MatError::NotHermitian {
            deviation: to_f64(dev),
        });
    }
    Ok(())
}

fn classify_sorted<T: Real>(eig: &[T], tol: T) -> Definiteness {
    let (lo, hi) = match (eig.first(), eig.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Definiteness::PositiveSemidefinite,
    };
    if lo > tol {
        Definiteness::PositiveDefinite
    } else if lo >= -tol {
        Definiteness::PositiveSemidefinite
    } else if hi < -tol {
        Definiteness::NegativeDefinite
    } else if hi <= tol {
        Definiteness::NegativeSemidefinite
    } else {
        Definiteness::Indefinite
    }
}

/// Classifies a Hermitian matrix by the signs of its eigenvalues.
///
/// A zero matrix is reported as `PositiveSemidefinite`.
pub fn classify_definiteness<T: Real>(
    s: &ComplexMatrix<T>,
    tol: T,
) -> Result<Definiteness, MatError> {
    check_hermitian(s, tol)?;
    let (eig, _) = hermitian_eigen(s);
    Ok(classify_sorted(&eig, tol))
}

pub fn classify_definiteness_real<T: Real>(
    s: &RealMatrix<T>,
    tol: T,
) -> Result<Definiteness, MatError> {
    classify_definiteness(&to_complex(s), tol)
}

/// Factor L with L†L = S; one row per eigenvalue above `rank_tol`, and a
/// single zero row when S has numerical rank zero.
pub fn psd_factor<T: Real>(s: &ComplexMatrix<T>, rank_tol: T) -> Result<ComplexMatrix<T>, MatError> {
    check_hermitian(s, lit::<T>(1e-9).max(rank_tol))?;
    let n = s.nrows();
    let (eig, v) = hermitian_eigen(s);
    if let Some(&lo) = eig.first() {
        if lo < -rank_tol {
            return Err(MatError::NotPsd {
                eigenvalue: to_f64(lo),
                tol: to_f64(rank_tol),
            });
        }
    }
    let keep: Vec<usize> = (0..n).rev().filter(|&i| eig[i] > rank_tol).collect();
    if keep.is_empty() {
        return Ok(DMatrix::zeros(1, n));
    }
    let mut l = DMatrix::zeros(keep.len(), n);
    for (r, &i) in keep.iter().enumerate() {
        let scale = eig[i].sqrt();
        for j in 0..n {
            l[(r, j)] = v[(j, i)].conj() * scale;
        }
    }
    Ok(l)
}

/// Solves AᵀP + PA + Q = 0 by a complex Schur (Bartels–Stewart) sweep.
pub fn solve_lyapunov<T: Real>(a: &RealMatrix<T>, q: &RealMatrix<T>) -> Result<RealMatrix<T>, MatError> {
    let n = require_square(a)?;
    if q.nrows() != n || q.ncols() != n {
        return Err(MatError::Dimension(format!(
            "Q is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    let (u, t) = complex_schur(&to_complex(a))?;
    let qt = u.adjoint() * to_complex(q) * &u;
    let p = solve_triangular_lyapunov(&t, &qt, T::one() + max_abs(a))?;
    let p = re_part(&(&u * p * u.adjoint()));
    Ok(symmetrize(&p))
}

/// Solves TᴴP + PT + Q = 0 for upper-triangular T.
pub(crate) fn solve_triangular_lyapunov<T: Real>(
    t: &ComplexMatrix<T>,
    q: &ComplexMatrix<T>,
    scale: T,
) -> Result<ComplexMatrix<T>, MatError> {
    let n = t.nrows();
    let mut p: ComplexMatrix<T> = DMatrix::zeros(n, n);
    let tiny = lit::<T>(1e2) * T::default_epsilon() * scale;
    for i in 0..n {
        for j in 0..n {
            let mut rhs = -q[(i, j)];
            for k in 0..i {
                rhs -= t[(k, i)].conj() * p[(k, j)];
            }
            for k in 0..j {
                rhs -= p[(i, k)] * t[(k, j)];
            }
            let d = t[(i, i)].conj() + t[(j, j)];
            if cabs(d) <= tiny {
                return Err(MatError::SingularSylvester);
            }
            p[(i, j)] = rhs / d;
        }
    }
    Ok(p)
}
