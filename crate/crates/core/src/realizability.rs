//! Physical realizability of linear QSDEs as open quantum harmonic
//! oscillators: the two structural conditions, extraction and construction
//! of the Hamiltonian matrix R and coupling matrix Λ, and augmentation of
//! systems with classical (commuting) variables.

use crate::matops::{
    self, diag_j, gamma_inverse, gamma_matrix, im_part, max_abs, max_abs_c, op_norm,
    permutation_matrix, re_part, selection_matrix, to_complex, MatError,
};
use crate::qsde::{
    canonical_ito, commutation_residual_matrix, default_structure_tol, CommutationMatrix,
    LinearQsde, QsdeError, ThetaKind,
};
use crate::scalar::{lit, to_f64, Real, Tolerances};
use crate::{ComplexMatrix, RealMatrix};
use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RealizabilityError {
    #[error("convention violated: {0}")]
    Convention(String),
    #[error("commutation matrix is degenerate; augment the system first")]
    DegenerateTheta,
    #[error("commutation matrix has no classical block to augment")]
    NotDegenerate,
    #[error("Hamiltonian matrix R is not symmetric")]
    NonSymmetricR,
    #[error("coupling extraction is inconsistent (deviation {0:.3e})")]
    InconsistentCoupling(f64),
    #[error("imaginary residue {0:.3e} in a matrix that must be real")]
    ImaginaryResidue(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Qsde(#[from] QsdeError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Hamiltonian H = xᵀRx and coupling L = Λx of an oscillator.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorParams<T: Real> {
    pub r: RealMatrix<T>,
    /// N_w × n, one row per noise quadrature pair.
    pub lambda: ComplexMatrix<T>,
}

/// Degenerate system embedded in a larger one whose commutation matrix is
/// canonical up to the permutation `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSystem<T: Real> {
    /// Augmented system in coordinates (x, z).
    pub sys: LinearQsde<T>,
    /// Position of each original variable inside the augmented state.
    pub embed: Vec<usize>,
    /// Row i of P is e_{order[i]}; P·Θ̃·Pᵀ = diag(J, …, J).
    pub order: Vec<usize>,
    /// The augmented system in the permuted, canonical coordinates.
    pub canonical: LinearQsde<T>,
}

impl<T: Real> AugmentedSystem<T> {
    pub fn permutation(&self) -> RealMatrix<T> {
        selection_matrix(&self.order, self.order.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealizabilityReport<T: Real> {
    pub realizable: bool,
    pub residual_a: T,
    pub residual_b: T,
    /// Largest deviation of D from [I 0] after the output-window permutation.
    pub d_residual: T,
    pub d_conforms: bool,
    pub tolerance: T,
    /// Oscillator parameters, in canonical coordinates (of the augmentation
    /// when the commutation matrix is degenerate).
    pub params: Option<OscillatorParams<T>>,
    pub augmentation: Option<AugmentedSystem<T>>,
}

/// Noise-column permutation Π with B·Π placing the output window first.
fn window_perm<T: Real>(sys: &LinearQsde<T>) -> RealMatrix<T> {
    selection_matrix::<T>(&sys.window_first_order(), sys.n_w()).transpose()
}

/// System expressed in coordinates where Θ is degenerate canonical.
fn to_canonical_coordinates<T: Real>(sys: &LinearQsde<T>) -> Result<(LinearQsde<T>, Vec<usize>), RealizabilityError> {
    let order = sys.theta.canonicalizing_order();
    let n = sys.n();
    let q: RealMatrix<T> = selection_matrix(&order, n);
    let theta = CommutationMatrix::degenerate(n, sys.theta.nprime())?;
    let out = LinearQsde::new(
        &q * &sys.a * q.transpose(),
        &q * &sys.b,
        &sys.c * q.transpose(),
        sys.d.clone(),
        theta,
        sys.ito.clone(),
        sys.output_offset,
    )?;
    Ok((out, order))
}

/// Decides physical realizability from the two structural conditions and
/// the form of D; `tol` defaults to 1e-8·(1 + ‖A‖ + ‖B‖²).
pub fn check_physical_realizability<T: Real>(
    sys: &LinearQsde<T>,
    tol: Option<T>,
) -> Result<RealizabilityReport<T>, RealizabilityError> {
    sys.check_conventions()
        .map_err(|e| RealizabilityError::Convention(e.to_string()))?;
    if !sys.ito.is_canonical(lit::<T>(1e-9)) {
        return Err(RealizabilityError::Convention(
            "noise Ito matrix must be canonical".to_string(),
        ));
    }
    let tolerance = tol.unwrap_or_else(|| default_structure_tol(&sys.a, &sys.b, &Tolerances::default()));
    let ny = sys.n_y();
    let theta = sys.theta.matrix();
    let residual_a = op_norm(&commutation_residual_matrix(&sys.a, &sys.b, theta, &sys.ito.tim));
    let b_win = sys.b.columns(sys.output_offset, ny).into_owned();
    let target = theta * sys.c.transpose() * diag_j::<T>(ny / 2);
    let residual_b = op_norm(&(b_win - target));
    let d_perm = &sys.d * window_perm(sys);
    let mut d_ref = DMatrix::<T>::zeros(ny, sys.n_w());
    for i in 0..ny {
        d_ref[(i, i)] = T::one();
    }
    let d_residual = max_abs(&(d_perm - d_ref));
    let d_conforms = d_residual <= tolerance;
    let realizable = residual_a <= tolerance && residual_b <= tolerance && d_conforms;
    let mut report = RealizabilityReport {
        realizable,
        residual_a,
        residual_b,
        d_residual,
        d_conforms,
        tolerance,
        params: None,
        augmentation: None,
    };
    if realizable {
        let (hat, _) = to_canonical_coordinates(sys)?;
        if hat.theta.is_canonical() {
            report.params = Some(extract_hamiltonian_coupling(&hat)?);
        } else {
            let aug = augment_degenerate(&hat)?;
            report.params = Some(extract_hamiltonian_coupling(&aug.canonical)?);
            report.augmentation = Some(aug);
        }
    }
    Ok(report)
}

/// R = ¼(−ΘA + AᵀΘ) and Λ = −½i·[0 I]·(Γ⁻¹)ᵀ·Bᵀ·Θ, with B's columns taken
/// in output-window-first order.
pub fn extract_hamiltonian_coupling<T: Real>(
    sys: &LinearQsde<T>,
) -> Result<OscillatorParams<T>, RealizabilityError> {
    match sys.theta.kind() {
        ThetaKind::Canonical => {}
        _ => return Err(RealizabilityError::DegenerateTheta),
    }
    if sys.n_w() % 2 != 0 {
        return Err(RealizabilityError::Convention("n_w must be even".to_string()));
    }
    let theta = sys.theta.matrix();
    let quarter = lit::<T>(0.25);
    let r = matops::symmetrize(&((-(theta * &sys.a) + sys.a.transpose() * theta) * quarter));
    let nw2 = sys.n_w() / 2;
    let b = &sys.b * window_perm(sys);
    let g = gamma_inverse::<T>(nw2).transpose() * to_complex(&b.transpose()) * to_complex(theta);
    let top = g.rows(0, nw2).into_owned();
    let bottom = g.rows(nw2, nw2).into_owned();
    let dev = max_abs_c(&(top - bottom.conjugate()));
    if dev > lit::<T>(1e-10) * (T::one() + op_norm(&sys.b)) {
        return Err(RealizabilityError::InconsistentCoupling(to_f64(dev)));
    }
    let lambda = bottom * Complex::new(T::zero(), lit::<T>(-0.5));
    Ok(OscillatorParams { r, lambda })
}

/// C = P_{N_y}ᵀ·[2·Re Λ_y; 2·Im Λ_y] for the first N_y rows of Λ.
fn oscillator_output<T: Real>(lambda: &ComplexMatrix<T>, n_y: usize) -> RealMatrix<T> {
    let ny2 = n_y / 2;
    let ly = lambda.rows(0, ny2).into_owned();
    let two = lit::<T>(2.0);
    let stacked = matops::vstack(&[&(re_part(&ly) * two), &(im_part(&ly) * two)]);
    permutation_matrix::<T>(ny2).transpose() * stacked
}

/// B = 2iΘ·[−Λ† Λᵀ]·Γ, verified real.
pub(crate) fn oscillator_input<T: Real>(
    theta: &RealMatrix<T>,
    lambda: &ComplexMatrix<T>,
) -> Result<RealMatrix<T>, RealizabilityError> {
    let nw2 = lambda.nrows();
    let blk = matops::hstack(&[&(-lambda.adjoint()), &lambda.transpose()]);
    let bc = to_complex(theta) * blk * gamma_matrix::<T>(nw2) * Complex::new(T::zero(), lit::<T>(2.0));
    let residue = max_abs(&im_part(&bc));
    if residue > lit::<T>(1e-12) * (T::one() + max_abs_c(&bc)) {
        return Err(RealizabilityError::ImaginaryResidue(to_f64(residue)));
    }
    Ok(re_part(&bc))
}

/// The oscillator with Hamiltonian matrix R and coupling Λ:
/// A = 2Θ(R + Im(Λ†Λ)), B = 2iΘ[−Λ† Λᵀ]Γ, D = [I 0].
pub fn build_oscillator<T: Real>(
    params: &OscillatorParams<T>,
    n_y: usize,
) -> Result<LinearQsde<T>, RealizabilityError> {
    let n = params.r.nrows();
    let r = &params.r;
    if r.ncols() != n || params.lambda.ncols() != n {
        return Err(RealizabilityError::Dimension("R and Λ disagree on n".to_string()));
    }
    if max_abs(&(r - r.transpose())) > lit::<T>(1e-10) * (T::one() + max_abs(r)) {
        return Err(RealizabilityError::NonSymmetricR);
    }
    let nw2 = params.lambda.nrows();
    if n % 2 != 0 || n_y % 2 != 0 || n_y / 2 > nw2 {
        return Err(RealizabilityError::Convention(format!(
            "need even n and n_y with n_y/2 ≤ N_w (n={n}, n_y={n_y}, N_w={nw2})"
        )));
    }
    let theta = CommutationMatrix::canonical(n)?;
    let l = &params.lambda;
    let ll = l.adjoint() * l;
    let a = theta.matrix() * (r + im_part(&ll)) * lit::<T>(2.0);
    let b = oscillator_input(theta.matrix(), l)?;
    let c = oscillator_output(l, n_y);
    let mut d = DMatrix::zeros(n_y, 2 * nw2);
    for i in 0..n_y {
        d[(i, i)] = T::one();
    }
    Ok(LinearQsde::new(a, b, c, d, theta, canonical_ito(2 * nw2)?, 0)?)
}

/// Embeds a system with Θ = diag(0_{n′}, θ) into one with state (x, z),
/// z ∈ ℝ^{n′}, whose commutation matrix [[0,0,I],[0,θ,0],[−I,0,0]] is
/// canonical up to permutation. The new rows are
/// dz = (A′₁x_c + A′₂x_q + A″z)dt + B′dw with B′ = [−C_cᵀ·diag(J), 0] on the
/// output window.
pub fn augment_degenerate<T: Real>(
    sys: &LinearQsde<T>,
) -> Result<AugmentedSystem<T>, RealizabilityError> {
    let np = match sys.theta.kind() {
        ThetaKind::Degenerate { nprime } => nprime,
        ThetaKind::Canonical => return Err(RealizabilityError::NotDegenerate),
        ThetaKind::Permuted { .. } => {
            return Err(RealizabilityError::Convention(
                "commutation matrix must be in degenerate canonical order".to_string(),
            ))
        }
    };
    sys.check_conventions()
        .map_err(|e| RealizabilityError::Convention(e.to_string()))?;
    let n = sys.n();
    let nq = n - np;
    let nw = sys.n_w();
    let ny = sys.n_y();
    let theta_q = diag_j::<T>(nq / 2);
    let tim = &sys.ito.tim;
    let cc = sys.c.columns(0, np).into_owned();
    let b1p = -(cc.transpose() * diag_j::<T>(ny / 2));
    let mut bp = DMatrix::<T>::zeros(np, nw);
    bp.columns_mut(sys.output_offset, ny).copy_from(&b1p);
    let half = lit::<T>(0.5);
    let a1p = -(&bp * tim * bp.transpose()) * half;
    let a11 = sys.a.view((0, 0), (np, np)).into_owned();
    let a21 = sys.a.view((np, 0), (nq, np)).into_owned();
    let w = -matops::hstack(&[&a11.transpose(), &a21.transpose()]) + &bp * tim * sys.b.transpose();
    let app = w.columns(0, np).into_owned();
    let a2p = w.columns(np, nq).into_owned() * &theta_q;
    let nt = n + np;
    let mut at = DMatrix::<T>::zeros(nt, nt);
    at.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    at.view_mut((n, 0), (np, np)).copy_from(&a1p);
    at.view_mut((n, np), (np, nq)).copy_from(&a2p);
    at.view_mut((n, n), (np, np)).copy_from(&app);
    let bt = matops::vstack(&[&sys.b, &bp]);
    let ct = matops::hstack(&[&sys.c, &DMatrix::zeros(ny, np)]);
    let mut theta_t = DMatrix::<T>::zeros(nt, nt);
    for i in 0..np {
        theta_t[(i, n + i)] = T::one();
        theta_t[(n + i, i)] = -T::one();
    }
    theta_t.view_mut((np, np), (nq, nq)).copy_from(&theta_q);
    let aug = LinearQsde::new(
        at,
        bt,
        ct,
        sys.d.clone(),
        CommutationMatrix::from_matrix(theta_t)?,
        sys.ito.clone(),
        sys.output_offset,
    )?;
    let mut order = Vec::with_capacity(nt);
    for i in 0..np {
        order.push(i);
        order.push(n + i);
    }
    order.extend(np..n);
    let p: RealMatrix<T> = selection_matrix(&order, nt);
    let canonical = LinearQsde::new(
        &p * &aug.a * p.transpose(),
        &p * &aug.b,
        &aug.c * p.transpose(),
        aug.d.clone(),
        CommutationMatrix::canonical(nt)?,
        aug.ito.clone(),
        aug.output_offset,
    )?;
    Ok(AugmentedSystem {
        sys: aug,
        embed: (0..n).collect(),
        order,
        canonical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsde::ItoMatrix;
    use approx::assert_relative_eq;

    fn i2() -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    fn controller_71() -> LinearQsde<f64> {
        let b = matops::hstack(&[&(i2() * -0.447), &(i2() * -1.342), &(i2() * -0.447)]);
        let d = matops::hstack(&[&i2(), &DMatrix::zeros(2, 4)]);
        LinearQsde::new(
            i2() * -1.1,
            b,
            // output read before the −I phase shifter
            i2() * 0.447,
            d,
            CommutationMatrix::canonical(2).unwrap(),
            canonical_ito(6).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn printed_controller_residuals() {
        let rep = check_physical_realizability(&controller_71(), Some(1e-2)).unwrap();
        // (0.447² + 1.342² + 0.447²) − 2.2 with rounded coefficients.
        assert!(rep.residual_a < 1e-2);
        assert!(rep.residual_b < 1e-2);
        assert!(rep.realizable);
        let p = rep.params.unwrap();
        assert!(p.r.norm() < 1e-12);
    }

    #[test]
    fn zero_system() {
        let sys = LinearQsde::new(
            DMatrix::<f64>::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            i2(),
            CommutationMatrix::canonical(2).unwrap(),
            canonical_ito(2).unwrap(),
            0,
        )
        .unwrap();
        let rep = check_physical_realizability(&sys, None).unwrap();
        assert!(rep.realizable);
        let p = rep.params.unwrap();
        assert_eq!(p.r.norm(), 0.0);
        assert_eq!(p.lambda.norm(), 0.0);
    }

    #[test]
    fn detuned_cavity_hamiltonian() {
        let (delta, gamma) = (0.7, 2.0);
        let a = matops::j2::<f64>() * delta - i2() * (gamma / 2.0);
        let sys = LinearQsde::new(
            a,
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            i2(),
            CommutationMatrix::canonical(2).unwrap(),
            canonical_ito(2).unwrap(),
            0,
        )
        .unwrap();
        let p = extract_hamiltonian_coupling(&sys).unwrap();
        assert!((p.r - i2() * (delta / 2.0)).norm() < 1e-14);
    }

    #[test]
    fn single_coupling_oscillator() {
        let kappa: f64 = 0.8;
        let h = kappa.sqrt() / 2.0;
        let lambda = DMatrix::from_row_slice(1, 2, &[Complex::new(h, 0.0), Complex::new(0.0, h)]);
        let sys = build_oscillator(&OscillatorParams { r: DMatrix::zeros(2, 2), lambda }, 2).unwrap();
        assert!((&sys.a + i2() * (kappa / 2.0)).norm() < 1e-14);
        let rep = check_physical_realizability(&sys, Some(1e-10)).unwrap();
        assert!(rep.realizable);
    }

    #[test]
    fn degenerate_needs_augmentation() {
        let sys = LinearQsde::new(
            DMatrix::<f64>::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            i2(),
            CommutationMatrix::degenerate(2, 2).unwrap(),
            canonical_ito(2).unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(extract_hamiltonian_coupling(&sys), Err(RealizabilityError::DegenerateTheta));
    }

    #[test]
    fn classical_augmentation() {
        // Classical filter driven by a measured quadrature, realized with a
        // cancelling noise pair.
        let bk = DMatrix::from_row_slice(2, 2, &[-0.447, 0.0, 0.0, 0.0]);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = matops::hstack(&[&DMatrix::zeros(2, 2), &(&bk * swap), &bk]);
        let d = matops::hstack(&[&i2(), &DMatrix::zeros(2, 4)]);
        let sys = LinearQsde::new(
            DMatrix::from_diagonal(&nalgebra::dvector![-1.1, -1.3]),
            b,
            i2() * -0.447,
            d,
            CommutationMatrix::degenerate(2, 2).unwrap(),
            canonical_ito(6).unwrap(),
            0,
        )
        .unwrap();
        let rep = check_physical_realizability(&sys, None).unwrap();
        assert!(rep.realizable, "{rep:?}");
        let aug = rep.augmentation.unwrap();
        assert_eq!(aug.sys.n(), 4);
        let res = commutation_residual_matrix(&aug.sys.a, &aug.sys.b, aug.sys.theta.matrix(), &aug.sys.ito.tim);
        assert!(res.norm() < 1e-10);
        let p = aug.permutation();
        assert_eq!(&p * aug.sys.theta.matrix() * p.transpose(), diag_j::<f64>(2));
        let sub = aug.sys.a.view((0, 0), (2, 2)).into_owned();
        assert_eq!(sub, sys.a);
    }

    #[test]
    fn ito_must_be_canonical() {
        let mut sys = controller_71();
        sys.ito = ItoMatrix::from_parts(DMatrix::identity(6, 6) * 2.0, diag_j(3)).unwrap();
        assert!(matches!(
            check_physical_realizability(&sys, None),
            Err(RealizabilityError::Convention(_))
        ));
    }

    #[test]
    fn round_trip_simple() {
        let lambda = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(0.3, -0.1),
                Complex::new(0.2, 0.5),
                Complex::new(-0.4, 0.0),
                Complex::new(0.1, 0.7),
            ],
        );
        let r = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, -0.3]);
        let params = OscillatorParams { r, lambda };
        let sys = build_oscillator(&params, 2).unwrap();
        let back = extract_hamiltonian_coupling(&sys).unwrap();
        assert!((back.r - &params.r).norm() < 1e-12);
        assert!((back.lambda - &params.lambda).norm() < 1e-12);
        assert_relative_eq!(
            check_physical_realizability(&sys, None).unwrap().residual_a,
            0.0,
            epsilon = 1e-12
        );
    }
}
