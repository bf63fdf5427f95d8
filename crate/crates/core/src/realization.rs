//! Physical realization of controller triples: as an open quantum harmonic
//! oscillator, as a classical system driven by a displaced vacuum, or as a
//! mixture of both through an augmentation.

use crate::matops::{
    self, cplx, diag_j, diag_m, hermitian_eigen, permutation_matrix, psd_factor, selection_matrix,
    to_complex, MatError,
};
use crate::qsde::{canonical_ito, CommutationMatrix, ItoMatrix, LinearQsde, QsdeError, ThetaKind};
use crate::realizability::{augment_degenerate, oscillator_input, OscillatorParams, RealizabilityError};
use crate::scalar::{lit, Real};
use crate::synthesis::ControllerTriple;
use crate::{ComplexMatrix, RealMatrix};
use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RealizationError {
    #[error("odd dimension: {0}")]
    OddDimension(String),
    #[error("commutation matrix of the wrong kind: {0}")]
    ThetaKind(String),
    #[error(transparent)]
    Realizability(#[from] RealizabilityError),
    #[error(transparent)]
    Qsde(#[from] QsdeError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// dξ = A_K ξ dt + B_K1 dv_K + B_K dy, du = C_K ξ dt + B_K0 dv_K.
#[derive(Clone, Debug, PartialEq)]
pub struct FullController<T: Real> {
    pub triple: ControllerTriple<T>,
    pub b_k0: RealMatrix<T>,
    pub b_k1: RealMatrix<T>,
    pub theta: CommutationMatrix<T>,
    pub f_vk: ItoMatrix<T>,
    /// Hamiltonian and coupling when Θ_K is canonical.
    pub oscillator: Option<OscillatorParams<T>>,
}

impl<T: Real> FullController<T> {
    pub fn n_vk(&self) -> usize {
        self.b_k1.ncols()
    }

    /// The controller as a QSDE driven by (v_K, y) with output u; the output
    /// window is the leading v_K columns.
    pub fn as_qsde(&self) -> Result<LinearQsde<T>, QsdeError> {
        let t = &self.triple;
        let (nu, ny) = (t.n_u(), t.n_y());
        let f_y = if ny % 2 == 0 {
            canonical_ito(ny)?
        } else {
            ItoMatrix::from_parts(DMatrix::identity(ny, ny), DMatrix::zeros(ny, ny))?
        };
        LinearQsde::new(
            t.a_k.clone(),
            matops::hstack(&[&self.b_k1, &t.b_k]),
            t.c_k.clone(),
            matops::hstack(&[&self.b_k0, &DMatrix::zeros(nu, ny)]),
            self.theta.clone(),
            ItoMatrix::block_diag(&[&self.f_vk, &f_y]),
            0,
        )
    }

    /// True when the output has no direct term in y.
    pub fn no_feedthrough(&self) -> bool {
        self.as_qsde()
            .map(|s| s.d.columns(self.n_vk(), self.triple.n_y()).iter().all(|v| *v == T::zero()))
            .unwrap_or(false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealizationChoice<T> {
    /// Added on top of the smallest shift making Ξ₂ positive semidefinite.
    pub xi_margin: T,
    /// Eigenvalues of Ξ₂ at or below this count as zero when factoring.
    pub rank_tol: T,
}

impl<T: Real> Default for RealizationChoice<T> {
    fn default() -> Self {
        RealizationChoice {
            xi_margin: lit(1e-6),
            rank_tol: lit(1e-10),
        }
    }
}

fn require_even(what: &str, k: usize) -> Result<(), RealizationError> {
    if k % 2 != 0 {
        return Err(RealizationError::OddDimension(format!("{what} = {k}")));
    }
    Ok(())
}

fn selector<T: Real>(rows: usize, cols: usize) -> RealMatrix<T> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows.min(cols) {
        m[(i, i)] = T::one();
    }
    m
}

/// Shifted Hermitian matrix Ξ₂ = αI + iH with the smallest α ≥ 0 (plus
/// margin) that makes it positive semidefinite.
fn shifted_xi<T: Real>(h: &RealMatrix<T>, margin: T) -> ComplexMatrix<T> {
    let n = h.nrows();
    let xi = h.map(|v| cplx(T::zero(), v));
    let (eig, _) = hermitian_eigen(&xi);
    let lo = eig.first().copied().unwrap_or(T::zero());
    let alpha = (-lo).max(T::zero()) + margin;
    xi + DMatrix::<Complex<T>>::identity(n, n) * cplx(alpha, T::zero())
}

/// Realizes the triple as an oscillator with Θ_K = diag(J, …, J).
pub fn realize_quantum_controller<T: Real>(
    triple: &ControllerTriple<T>,
    choice: &RealizationChoice<T>,
) -> Result<FullController<T>, RealizationError> {
    let (nk, ny, nu) = (triple.n_k(), triple.n_y(), triple.n_u());
    require_even("n_K", nk)?;
    require_even("n_y", ny)?;
    require_even("n_u", nu)?;
    let theta = CommutationMatrix::<T>::canonical(nk)?;
    let th = theta.matrix();
    let half = lit::<T>(0.5);
    let quarter = lit::<T>(0.25);
    let (a_k, b_k, c_k) = (&triple.a_k, &triple.b_k, &triple.c_k);
    let z = -(th * a_k) * half;
    let r = (&z + z.transpose()) * half;
    let (ny2, nu2) = (ny / 2, nu / 2);
    let lam_b2 = to_complex(&selector::<T>(ny2, ny))
        * to_complex(&permutation_matrix::<T>(ny2))
        * diag_m::<T>(ny2)
        * to_complex(&(b_k.transpose() * th))
        * cplx(T::zero(), -T::one());
    let lb2 = lam_b2.adjoint() * &lam_b2;
    let h = (&z - z.transpose()) * half
        - c_k.transpose() * diag_j::<T>(nu2) * c_k * quarter
        - matops::im_part(&lb2);
    let xi2 = shifted_xi(&h, choice.xi_margin);
    let lam_b1 = psd_factor(&xi2, choice.rank_tol)?;
    let rows = lam_b1.nrows();
    let b_k11 = th * c_k.transpose() * diag_j::<T>(nu2);
    let b_k12 = oscillator_input(th, &lam_b1)?;
    let mut top = DMatrix::<T>::zeros(nu2, nu);
    let mut im_sel = DMatrix::<T>::zeros(nu2, nu);
    for i in 0..nu2 {
        top[(i, i)] = T::one();
        im_sel[(i, nu2 + i)] = T::one();
    }
    let pc = permutation_matrix::<T>(nu2) * c_k;
    let lam_top = (to_complex(&(&top * &pc)) + to_complex(&(&im_sel * &pc)) * cplx(T::zero(), T::one()))
        * cplx(half, T::zero());
    let lambda = matops::vstack(&[&lam_top, &lam_b1, &lam_b2]);
    let n_vk = nu + 2 * rows;
    Ok(FullController {
        triple: triple.clone(),
        b_k0: selector(nu, n_vk),
        b_k1: matops::hstack(&[&b_k11, &b_k12]),
        theta,
        f_vk: canonical_ito(n_vk)?,
        oscillator: Some(OscillatorParams { r, lambda }),
    })
}

/// Realizes the triple as a classical system (Θ_K = 0). The noise
/// v_K = (u-window, y-copy) enters through B_K1 = [0, B_K·Π], where Π swaps
/// the two columns of each quadrature pair, cancelling B_K's skew part.
pub fn realize_classical_controller<T: Real>(
    triple: &ControllerTriple<T>,
) -> Result<FullController<T>, RealizationError> {
    let (nk, ny, nu) = (triple.n_k(), triple.n_y(), triple.n_u());
    require_even("n_y", ny)?;
    require_even("n_u", nu)?;
    let swap: Vec<usize> = (0..ny).map(|i| i ^ 1).collect();
    let pi = selection_matrix::<T>(&swap, ny);
    let b_k1 = matops::hstack(&[&DMatrix::zeros(nk, nu), &(&triple.b_k * pi)]);
    let n_vk = nu + ny;
    Ok(FullController {
        triple: triple.clone(),
        b_k0: selector(nu, n_vk),
        b_k1,
        theta: CommutationMatrix::from_matrix(DMatrix::zeros(nk, nk))?,
        f_vk: canonical_ito(n_vk)?,
        oscillator: None,
    })
}

/// Realizes the triple with a commutation matrix that is canonical up to
/// permutation and may have classical (zero) rows. The system is first
/// embedded in an augmentation with canonical commutation matrix, that is
/// realized as an oscillator, and the original rows are read back.
pub fn realize_mixed_controller<T: Real>(
    triple: &ControllerTriple<T>,
    theta: &CommutationMatrix<T>,
    choice: &RealizationChoice<T>,
) -> Result<FullController<T>, RealizationError> {
    let (nk, ny, nu) = (triple.n_k(), triple.n_y(), triple.n_u());
    if theta.n() != nk {
        return Err(RealizationError::ThetaKind(format!(
            "commutation matrix is {0}x{0}, controller has n_K = {nk}",
            theta.n()
        )));
    }
    require_even("n_y", ny)?;
    require_even("n_u", nu)?;
    let np = theta.nprime();
    let order = theta.canonicalizing_order();
    if np == 0 {
        let mut q = realize_quantum_controller(&reorder(triple, &order), choice)?;
        return Ok(restore(triple, theta, &mut q, &order));
    }
    let hat = reorder(triple, &order);
    let hat_theta = CommutationMatrix::<T>::degenerate(nk, np)?;
    let b_win = hat_theta.matrix() * hat.c_k.transpose() * diag_j::<T>(nu / 2);
    let mut d = DMatrix::zeros(nu, nu + ny);
    for i in 0..nu {
        d[(i, i)] = T::one();
    }
    let sys = LinearQsde::new(
        hat.a_k.clone(),
        matops::hstack(&[&b_win, &hat.b_k]),
        hat.c_k.clone(),
        d,
        hat_theta,
        canonical_ito(nu + ny)?,
        0,
    )?;
    let aug = augment_degenerate(&sys)?;
    let canon = &aug.canonical;
    let aug_triple = ControllerTriple {
        a_k: canon.a.clone(),
        b_k: canon.b.columns(nu, ny).into_owned(),
        c_k: canon.c.clone(),
    };
    let q = realize_quantum_controller(&aug_triple, choice)?;
    let s = aug.permutation();
    let b_k1_aug = s.transpose() * &q.b_k1;
    let b_k1_hat = b_k1_aug.rows(0, nk).into_owned();
    let back = selection_matrix::<T>(&order, nk).transpose();
    Ok(FullController {
        triple: triple.clone(),
        b_k0: q.b_k0,
        b_k1: back * b_k1_hat,
        theta: theta.clone(),
        f_vk: q.f_vk,
        oscillator: None,
    })
}

fn reorder<T: Real>(triple: &ControllerTriple<T>, order: &[usize]) -> ControllerTriple<T> {
    let q = selection_matrix::<T>(order, triple.n_k());
    ControllerTriple {
        a_k: &q * &triple.a_k * q.transpose(),
        b_k: &q * &triple.b_k,
        c_k: &triple.c_k * q.transpose(),
    }
}

fn restore<T: Real>(
    triple: &ControllerTriple<T>,
    theta: &CommutationMatrix<T>,
    q: &mut FullController<T>,
    order: &[usize],
) -> FullController<T> {
    let back = selection_matrix::<T>(order, triple.n_k()).transpose();
    let oscillator = match theta.kind() {
        ThetaKind::Canonical => q.oscillator.take(),
        _ => None,
    };
    FullController {
        triple: triple.clone(),
        b_k0: q.b_k0.clone(),
        b_k1: back * &q.b_k1,
        theta: theta.clone(),
        f_vk: q.f_vk.clone(),
        oscillator,
    }
}

/// B_K0·F_vK·B_K0ᵀ is the canonical Ito matrix.
pub fn check_compatibility<T: Real>(ctrl: &FullController<T>, tol: T) -> bool {
    if ctrl.b_k0.ncols() != ctrl.f_vk.dim() {
        return false;
    }
    ctrl.f_vk.transform(&ctrl.b_k0).is_canonical(tol)
}
