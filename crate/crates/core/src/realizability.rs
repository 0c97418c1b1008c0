//! Conversion between SLH parameters `(R, Λ)` of an open harmonic oscillator
//! and its quadrature coefficients `(A, B, C, D)`, plus the algebraic
//! realizability and detectability tests.

use nalgebra::{Complex, DMatrix};

use crate::error::{dim_err, Error, Result};
use crate::quadrature::{
    antisymmetric_part, eigenvalues, imag_part, perm, real_part, standard_feedthrough, symmetric_part, theta,
    to_complex, QuadratureSystem, DEFAULT_HURWITZ_MARGIN,
};
use crate::scalar::{cplx, lit, to_f64, Scalar};

/// Default absolute tolerance on the Frobenius residuals of the
/// realizability identities.
pub const DEFAULT_REALIZABILITY_TOL: f64 = 1e-8;

/// Largest imaginary residue tolerated when a complex construction is
/// expected to produce a real matrix.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-10;

/// Hamiltonian matrix `R` (`H = ½ xᵀ R x`) and coupling matrix `Λ` (`L = Λ x`).
#[derive(Debug, Clone, PartialEq)]
pub struct SlhParams<T: Scalar> {
    r: DMatrix<T>,
    lambda: DMatrix<Complex<T>>,
}

impl<T: Scalar> SlhParams<T> {
    pub fn new(r: DMatrix<T>, lambda: DMatrix<Complex<T>>, tol: T) -> Result<Self> {
        let n = r.nrows();
        if !r.is_square() || n == 0 || !n.is_multiple_of(2) {
            return dim_err(format!("R must be square with positive even size, got {}x{}", r.nrows(), r.ncols()));
        }
        if lambda.ncols() != n || lambda.nrows() == 0 {
            return dim_err(format!(
                "Λ must be (n_w/2)x{n} with n_w/2 >= 1, got {}x{}",
                lambda.nrows(),
                lambda.ncols()
            ));
        }
        let asym = antisymmetric_part(&r).norm();
        if asym > tol {
            return Err(Error::NotRealizable(format!(
                "R is not symmetric (antisymmetric part norm {:e})",
                to_f64(asym)
            )));
        }
        Ok(Self { r, lambda })
    }

    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }
    pub fn lambda(&self) -> &DMatrix<Complex<T>> {
        &self.lambda
    }
    pub fn n(&self) -> usize {
        self.r.nrows()
    }
    pub fn n_w(&self) -> usize {
        2 * self.lambda.nrows()
    }
}

/// Residuals of the two realizability identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizabilityReport<T> {
    pub passed: bool,
    /// `‖AΘ + ΘAᵀ + BΘBᵀ‖_F`
    pub residual_a: T,
    /// `‖BDᵀ − ΘCᵀΘ‖_F`
    pub residual_b: T,
    pub tolerance: T,
}

/// `2iΘ_n [−Λ†, Λᵀ] Γ_{n_w}` for a coupling matrix with `n_w/2` rows.
/// Returns an `n × 0` matrix when `Λ` has no rows.
pub fn noise_matrix_from_coupling<T: Scalar>(lambda: &DMatrix<Complex<T>>) -> Result<DMatrix<T>> {
    let n = lambda.ncols();
    let n_w = 2 * lambda.nrows();
    if !n.is_multiple_of(2) {
        return dim_err(format!("coupling matrix has odd column count {n}"));
    }
    if n_w == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let mut stacked = DMatrix::<Complex<T>>::zeros(n, n_w);
    stacked.view_mut((0, 0), (n, n_w / 2)).copy_from(&(-lambda.adjoint()));
    stacked.view_mut((0, n_w / 2), (n, n_w / 2)).copy_from(&lambda.transpose());
    let two_i = cplx(T::zero(), lit(2.0));
    let b = to_complex(&theta::<T>(n)) * stacked * crate::quadrature::gamma::<T>(n_w) * two_i;
    let residue = imag_part(&b).norm();
    if residue > lit::<T>(IMAGINARY_RESIDUE_TOL) * (T::one() + real_part(&b).norm()) {
        return Err(Error::Consistency(format!("noise matrix has imaginary residue {:e}", to_f64(residue))));
    }
    Ok(real_part(&b))
}

/// Output matrix `C` generated by `Λ` when only the first `n_y/2` field
/// channels are measured.
fn output_matrix<T: Scalar>(lambda: &DMatrix<Complex<T>>, n_y: usize) -> DMatrix<T> {
    let n = lambda.ncols();
    let half = n_y / 2;
    let two = lit::<T>(2.0);
    let mut stacked = DMatrix::<T>::zeros(n_y, n);
    // Λ + Λ♯ = 2 Re Λ and −iΛ + iΛ♯ = 2 Im Λ, truncated to measured channels
    for i in 0..half {
        for j in 0..n {
            stacked[(i, j)] = lambda[(i, j)].re * two;
            stacked[(half + i, j)] = lambda[(i, j)].im * two;
        }
    }
    perm::<T>(n_y).transpose() * stacked
}

/// Builds `(A, B, C, D)` from SLH parameters, measuring `n_y` of the `n_w`
/// field quadratures.
pub fn abcd_from_slh<T: Scalar>(slh: &SlhParams<T>, n_y: usize) -> Result<QuadratureSystem<T>> {
    let n = slh.n();
    let n_w = slh.n_w();
    if n_y == 0 || !n_y.is_multiple_of(2) || n_y > n_w {
        return dim_err(format!("n_y = {n_y} must be even, positive and at most n_w = {n_w}"));
    }
    let th = theta::<T>(n);
    let gram = slh.lambda.adjoint() * &slh.lambda;
    let a = &th * (&slh.r + imag_part(&gram)) * lit::<T>(2.0);
    let b = noise_matrix_from_coupling(&slh.lambda)?;
    let c = output_matrix(&slh.lambda, n_y);
    QuadratureSystem::new(a, b, c, standard_feedthrough(n_y, n_w))
}

pub(crate) fn realizability_residuals<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
) -> (T, T) {
    let th = theta::<T>(a.nrows());
    let th_w = theta::<T>(b.ncols());
    let th_y = theta::<T>(c.nrows());
    let ra = a * &th + &th * a.transpose() + b * th_w * b.transpose();
    let rb = b * d.transpose() - &th * c.transpose() * th_y;
    (ra.norm(), rb.norm())
}

/// Evaluates `AΘ + ΘAᵀ + BΘBᵀ = 0` and `BDᵀ = ΘCᵀΘ`.
pub fn check_physical_realizability<T: Scalar>(sys: &QuadratureSystem<T>, tol: T) -> RealizabilityReport<T> {
    let (residual_a, residual_b) = realizability_residuals(sys.a(), sys.b(), sys.c(), sys.d());
    RealizabilityReport { passed: residual_a <= tol && residual_b <= tol, residual_a, residual_b, tolerance: tol }
}

/// Inverse of `Γ_m`: `(I ⊗ M⁻¹) P_mᵀ` with `M⁻¹ = [[1, 1], [−i, i]]`.
fn gamma_inverse<T: Scalar>(m: usize) -> DMatrix<Complex<T>> {
    let one = T::one();
    let zero = T::zero();
    let mut blocks = DMatrix::<Complex<T>>::zeros(m, m);
    for k in (0..m).step_by(2) {
        blocks[(k, k)] = cplx(one, zero);
        blocks[(k, k + 1)] = cplx(one, zero);
        blocks[(k + 1, k)] = cplx(zero, -one);
        blocks[(k + 1, k + 1)] = cplx(zero, one);
    }
    blocks * to_complex(&perm::<T>(m).transpose())
}

/// Recovers `(R, Λ)` from a realizable quadrature system.
///
/// `Λ` is read off the noise matrix (which carries every field channel,
/// measured or not); the output matrix is then required to agree with it.
pub fn recover_slh<T: Scalar>(sys: &QuadratureSystem<T>, tol: T) -> Result<SlhParams<T>> {
    let n = sys.n_x();
    let n_w = sys.n_w();
    let half = n_w / 2;
    let th = theta::<T>(n);
    let half_i = cplx(T::zero(), lit(0.5));
    // B = 2iΘ[−Λ†, Λᵀ]Γ  ⇒  [−Λ†, Λᵀ] = (i/2) Θ B Γ⁻¹
    let stacked = to_complex(&th) * to_complex(sys.b()) * gamma_inverse::<T>(n_w) * half_i;
    let lambda = stacked.view((0, half), (n, half)).transpose();
    let left = stacked.view((0, 0), (n, half)).into_owned();
    let mismatch = (left + lambda.adjoint()).norm();
    if mismatch > tol {
        return Err(Error::Inversion(format!(
            "noise matrix is not of the form 2iΘ[−Λ†, Λᵀ]Γ (residual {:e})",
            to_f64(mismatch)
        )));
    }
    let c_mismatch = (output_matrix(&lambda, sys.n_y()) - sys.c()).norm();
    if c_mismatch > tol {
        return Err(Error::Inversion(format!(
            "output matrix is inconsistent with the coupling read from B (residual {:e})",
            to_f64(c_mismatch)
        )));
    }
    let h = &th * sys.a() * lit::<T>(-0.5);
    let r = symmetric_part(&h);
    let gram = lambda.adjoint() * &lambda;
    let defect = (antisymmetric_part(&h) - imag_part(&gram)).norm();
    if defect > tol {
        return Err(Error::NotRealizable(format!(
            "antisymmetric part of -ΘA/2 differs from Im(Λ†Λ) by {:e}",
            to_f64(defect)
        )));
    }
    SlhParams::new(r, lambda, tol)
}

/// PBH detectability test: every eigenvalue with real part `>= -margin`
/// must leave `[λI − A; C]` with full column rank.
pub fn detectability_check<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>, margin: T) -> Result<bool> {
    let n = a.nrows();
    if !a.is_square() || c.ncols() != n {
        return dim_err(format!("A is {}x{}, C is {}x{}: incompatible", a.nrows(), a.ncols(), c.nrows(), c.ncols()));
    }
    let scale = T::one() + a.norm() + c.norm();
    let rank_tol = lit::<T>(1e-9) * scale;
    for lam in eigenvalues(a)?.iter() {
        if lam.re < -margin {
            continue;
        }
        let mut pbh = DMatrix::<Complex<T>>::zeros(n + c.nrows(), n);
        pbh.view_mut((0, 0), (n, n)).copy_from(&(-to_complex(a)));
        for i in 0..n {
            pbh[(i, i)] += *lam;
        }
        pbh.view_mut((n, 0), (c.nrows(), n)).copy_from(&to_complex(c));
        let sv = pbh.singular_values();
        let smallest = sv.iter().fold(scale, |m, &s| m.min(s));
        if smallest <= rank_tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// [`detectability_check`] with the default stability margin.
pub fn is_detectable<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<bool> {
    detectability_check(a, c, lit(DEFAULT_HURWITZ_MARGIN))
}
