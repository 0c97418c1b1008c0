//! Gaussian-state analytics in the vacuum = I covariance convention.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::quadrature::{eigenvalues, theta};
use crate::scalar::{cplx, lit, to_f64, Scalar};

pub const DEFAULT_STATE_TOL: f64 = 1e-9;

/// Mean vector and symmetric covariance of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState<T: Scalar> {
    mu: DVector<T>,
    sigma: DMatrix<T>,
}

impl<T: Scalar> GaussianState<T> {
    /// Validates symmetry and the uncertainty relation `σ + iΘ ⪰ 0`. With
    /// `strict` unset a violation of the latter is only logged.
    pub fn new(mu: DVector<T>, sigma: DMatrix<T>, tol: T, strict: bool) -> Result<Self> {
        let n = sigma.nrows();
        if !sigma.is_square() || n == 0 || !n.is_multiple_of(2) || mu.len() != n {
            return dim_err(format!(
                "state needs an even square covariance and matching mean, got {}x{} and {}",
                sigma.nrows(),
                sigma.ncols(),
                mu.len()
            ));
        }
        check_symmetric(&sigma, tol)?;
        let floor = heisenberg_min_eigenvalue(&sigma);
        if floor < -tol {
            let msg = format!("covariance violates the uncertainty relation (min eigenvalue {:e})", to_f64(floor));
            if strict {
                return Err(Error::InvalidState(msg));
            }
            log::warn!("{msg}");
        }
        Ok(Self { mu, sigma })
    }

    pub fn vacuum(n: usize) -> Result<Self> {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n), lit(DEFAULT_STATE_TOL), true)
    }

    pub fn mu(&self) -> &DVector<T> {
        &self.mu
    }
    pub fn sigma(&self) -> &DMatrix<T> {
        &self.sigma
    }
    pub fn n(&self) -> usize {
        self.mu.len()
    }
}

fn check_symmetric<T: Scalar>(sigma: &DMatrix<T>, tol: T) -> Result<()> {
    let asym = (sigma - sigma.transpose()).amax();
    if asym > tol * (T::one() + sigma.amax()) {
        return Err(Error::InvalidState(format!("covariance is not symmetric ({:e})", to_f64(asym))));
    }
    Ok(())
}

/// Smallest eigenvalue of the Hermitian matrix `σ + iΘ`.
pub fn heisenberg_min_eigenvalue<T: Scalar>(sigma: &DMatrix<T>) -> T {
    let n = sigma.nrows();
    let th = theta::<T>(n);
    let h = DMatrix::from_fn(n, n, |i, j| cplx((sigma[(i, j)] + sigma[(j, i)]) * lit(0.5), th[(i, j)]));
    SymmetricEigen::new(h).eigenvalues.iter().fold(T::max_value().unwrap_or(T::one()), |m, &x| m.min(x))
}

/// Moduli of the eigenvalues of `iΘσ`, paired into `n/2` values, ascending.
pub fn symplectic_eigenvalues<T: Scalar>(sigma: &DMatrix<T>) -> Result<Vec<T>> {
    let n = sigma.nrows();
    if !sigma.is_square() || n == 0 || !n.is_multiple_of(2) {
        return dim_err(format!("covariance must be even and square, got {}x{}", n, sigma.ncols()));
    }
    check_symmetric(sigma, lit(DEFAULT_STATE_TOL))?;
    let ev = eigenvalues(&(theta::<T>(n) * sigma))?;
    let mut moduli: Vec<T> = ev.iter().map(|z: &Complex<T>| z.re.hypot(z.im)).collect();
    moduli.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(moduli.chunks(2).map(|p| (p[0] + p[1]) * lit(0.5)).collect())
}

/// Smallest symplectic eigenvalue of the partial transpose of a two-mode
/// covariance; the state is entangled iff this is below one.
pub fn ppt_nu_minus<T: Scalar>(sigma: &DMatrix<T>) -> Result<T> {
    if sigma.shape() != (4, 4) {
        return dim_err(format!("two-mode covariance must be 4x4, got {}x{}", sigma.nrows(), sigma.ncols()));
    }
    check_symmetric(sigma, lit(DEFAULT_STATE_TOL))?;
    let det2 = |r: usize, c: usize| sigma[(r, c)] * sigma[(r + 1, c + 1)] - sigma[(r, c + 1)] * sigma[(r + 1, c)];
    let delta = det2(0, 0) + det2(2, 2) - det2(0, 2) * lit(2.0);
    let det = sigma.determinant();
    let tol = lit::<T>(DEFAULT_STATE_TOL) * (T::one() + delta * delta);
    let disc = delta * delta - det * lit(4.0);
    if disc < -tol {
        return Err(Error::InvalidState(format!("negative discriminant {:e}", to_f64(disc))));
    }
    let inner = (delta - disc.max(T::zero()).sqrt()) * lit(0.5);
    if inner < -tol {
        return Err(Error::InvalidState(format!("negative squared symplectic eigenvalue {:e}", to_f64(inner))));
    }
    Ok(inner.max(T::zero()).sqrt())
}

/// `T σ T` with `T = diag(1, 1, 1, −1)`: momentum reflection on the second mode.
pub fn partial_transpose<T: Scalar>(sigma: &DMatrix<T>) -> DMatrix<T> {
    let mut out = sigma.clone();
    let last = sigma.nrows() - 1;
    for k in 0..sigma.nrows() {
        if k != last {
            out[(k, last)] = -out[(k, last)];
            out[(last, k)] = -out[(last, k)];
        }
    }
    out
}

/// Fidelity of two single-mode Gaussian states.
pub fn gaussian_fidelity_single_mode<T: Scalar>(s1: &GaussianState<T>, s2: &GaussianState<T>) -> Result<T> {
    if s1.n() != 2 || s2.n() != 2 {
        return dim_err("fidelity is defined here for single-mode states only");
    }
    let d = s1.mu() - s2.mu();
    let sum = s1.sigma() + s2.sigma();
    let big = sum.determinant();
    if big.partial_cmp(&T::default_epsilon()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidState("Σ₁ + Σ₂ is singular".into()));
    }
    let inv = sum.try_inverse().ok_or_else(|| Error::InvalidState("Σ₁ + Σ₂ is singular".into()))?;
    let quad = (d.transpose() * inv * &d)[(0, 0)];
    let small = ((s1.sigma().determinant() - T::one()) * (s2.sigma().determinant() - T::one())).max(T::zero());
    let f = lit::<T>(2.0) * (-quad * lit(0.5)).exp() / ((big + small).sqrt() - small.sqrt());
    Ok(f.min(T::one()))
}

/// `‖σ_p − σ_o‖_F`
pub fn covariance_error_norm<T: Scalar>(sigma_p: &DMatrix<T>, sigma_o: &DMatrix<T>) -> Result<T> {
    if sigma_p.shape() != sigma_o.shape() {
        return dim_err(format!("covariances differ in shape: {:?} vs {:?}", sigma_p.shape(), sigma_o.shape()));
    }
    Ok((sigma_p - sigma_o).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn single_mode_spectra() {
        assert_relative_eq!(symplectic_eigenvalues(&DMatrix::<f64>::identity(2, 2)).unwrap()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(
            symplectic_eigenvalues(&(DMatrix::<f64>::identity(2, 2) * 2.0)).unwrap()[0],
            2.0,
            epsilon = 1e-14
        );
        let nu = symplectic_eigenvalues(&dmatrix![1.25, 0.0; 0.0, 0.8333]).unwrap()[0];
        assert_relative_eq!(nu, (1.25f64 * 0.8333).sqrt(), epsilon = 1e-12);
        assert!(symplectic_eigenvalues(&dmatrix![1.0, 0.5; 0.0, 1.0]).is_err());
        assert!(symplectic_eigenvalues(&DMatrix::<f64>::identity(3, 3)).is_err());
    }

    #[test]
    fn nu_minus_examples() {
        assert_relative_eq!(ppt_nu_minus(&DMatrix::<f64>::identity(4, 4)).unwrap(), 1.0, epsilon = 1e-12);
        let sep = DMatrix::from_diagonal(&dvector![1.1, 1.1, 2.0, 2.0]);
        assert_relative_eq!(ppt_nu_minus(&sep).unwrap(), 1.1, epsilon = 1e-12);

        let r: f64 = 0.5;
        let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let tms = dmatrix![
            c, 0.0, s, 0.0;
            0.0, c, 0.0, -s;
            s, 0.0, c, 0.0;
            0.0, -s, 0.0, c
        ];
        let nu = ppt_nu_minus(&tms).unwrap();
        assert_relative_eq!(nu, (-2.0 * r).exp(), epsilon = 1e-12);
        let oracle = symplectic_eigenvalues(&partial_transpose(&tms)).unwrap()[0];
        assert_relative_eq!(nu, oracle, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_examples() {
        let vac = GaussianState::<f64>::vacuum(2).unwrap();
        assert_relative_eq!(gaussian_fidelity_single_mode(&vac, &vac).unwrap(), 1.0, epsilon = 1e-14);
        let shifted = GaussianState::new(dvector![2.0, 0.0], DMatrix::identity(2, 2), 1e-9, true).unwrap();
        assert_relative_eq!(gaussian_fidelity_single_mode(&vac, &shifted).unwrap(), (-1.0f64).exp(), epsilon = 1e-14);
        let thermal = GaussianState::new(dvector![0.0, 0.0], DMatrix::identity(2, 2) * 3.0, 1e-9, true).unwrap();
        assert_relative_eq!(gaussian_fidelity_single_mode(&vac, &thermal).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn state_validation() {
        let squeezed_too_far = dmatrix![0.5, 0.0; 0.0, 0.5];
        assert!(matches!(
            GaussianState::new(dvector![0.0, 0.0], squeezed_too_far.clone(), 1e-9, true),
            Err(Error::InvalidState(_))
        ));
        assert!(GaussianState::new(dvector![0.0, 0.0], squeezed_too_far, 1e-9, false).is_ok());
        assert!(GaussianState::new(dvector![0.0], DMatrix::<f64>::identity(2, 2), 1e-9, false).is_err());
    }

    #[test]
    fn error_norm() {
        let a = DMatrix::from_diagonal(&dvector![1.1, 1.1]);
        let b = DMatrix::from_diagonal(&dvector![2.0, 2.0]);
        assert_relative_eq!(covariance_error_norm(&a, &b).unwrap(), 0.9 * 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(covariance_error_norm(&a, &a).unwrap(), 0.0);
        assert!(covariance_error_norm(&a, &DMatrix::identity(4, 4)).is_err());
    }
}
