//! Quadrature-form building blocks shared by every other module: the
//! symplectic form, the quadrature permutation, the field-to-quadrature map,
//! the [`QuadratureSystem`] container and a few spectral/norm utilities.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::scalar::{cplx, lit, Scalar};

/// Default margin used when testing strict stability of a spectrum.
pub const DEFAULT_HURWITZ_MARGIN: f64 = 1e-9;

/// `I_{n/2} ⊗ J` without the evenness/positivity checks. Accepts `n = 0`.
pub(crate) fn theta<T: Scalar>(n: usize) -> DMatrix<T> {
    debug_assert!(n.is_multiple_of(2));
    let mut m = DMatrix::zeros(n, n);
    for k in (0..n).step_by(2) {
        m[(k, k + 1)] = T::one();
        m[(k + 1, k)] = -T::one();
    }
    m
}

fn check_even(n: usize, what: &str) -> Result<()> {
    if n == 0 || !n.is_multiple_of(2) {
        return dim_err(format!("{what} must be a positive even integer, got {n}"));
    }
    Ok(())
}

/// Block-diagonal symplectic form with `n/2` copies of `J = [[0, 1], [-1, 0]]`.
pub fn symplectic_form<T: Scalar>(n: usize) -> Result<DMatrix<T>> {
    check_even(n, "symplectic form size")?;
    Ok(theta(n))
}

pub(crate) fn perm<T: Scalar>(m: usize) -> DMatrix<T> {
    let half = m / 2;
    let mut p = DMatrix::zeros(m, m);
    for k in 0..half {
        // odd-numbered entries (1-based) first, then the even-numbered ones
        p[(k, 2 * k)] = T::one();
        p[(half + k, 2 * k + 1)] = T::one();
    }
    p
}

/// Permutation `P_m` with `P_m a = (a1, a3, …, a_{m-1}, a2, a4, …, a_m)`.
pub fn permutation_matrix<T: Scalar>(m: usize) -> Result<DMatrix<T>> {
    check_even(m, "permutation size")?;
    Ok(perm(m))
}

pub(crate) fn gamma<T: Scalar>(m: usize) -> DMatrix<Complex<T>> {
    let half = lit::<T>(0.5);
    let zero = T::zero();
    let mut blocks = DMatrix::<Complex<T>>::zeros(m, m);
    for k in (0..m).step_by(2) {
        blocks[(k, k)] = cplx(half, zero);
        blocks[(k, k + 1)] = cplx(zero, half);
        blocks[(k + 1, k)] = cplx(half, zero);
        blocks[(k + 1, k + 1)] = cplx(zero, -half);
    }
    to_complex(&perm::<T>(m)) * blocks
}

/// `Γ_m = P_m (I_{m/2} ⊗ M)` with `M = ½[[1, i], [1, -i]]`.
pub fn gamma_matrix<T: Scalar>(m: usize) -> Result<DMatrix<Complex<T>>> {
    check_even(m, "gamma matrix size")?;
    Ok(gamma(m))
}

/// Outcome of a strict-stability test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzCheck<T> {
    pub stable: bool,
    /// Largest real part over the spectrum.
    pub max_real_part: T,
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues<T: Scalar>(a: &DMatrix<T>) -> Result<DVector<Complex<T>>> {
    if !a.is_square() {
        return dim_err(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols()));
    }
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    Ok(a.complex_eigenvalues())
}

/// Checks whether every eigenvalue of `a` has real part `< -margin`.
pub fn is_hurwitz<T: Scalar>(a: &DMatrix<T>, margin: T) -> Result<HurwitzCheck<T>> {
    let eig = eigenvalues(a)?;
    let max_real_part =
        eig.iter().map(|z| z.re).fold(T::min_value().unwrap_or(-T::one() / T::default_epsilon()), |m, r| m.max(r));
    Ok(HurwitzCheck { stable: !eig.is_empty() && max_real_part < -margin, max_real_part })
}

/// `sqrt(sum of squared entries)`.
pub fn frobenius_norm<T: Scalar>(a: &DMatrix<T>) -> T {
    a.norm()
}

/// `[I_{n_y} 0]`, the only feed-through matrix a quadrature system may carry.
pub fn standard_feedthrough<T: Scalar>(n_y: usize, n_w: usize) -> DMatrix<T> {
    DMatrix::identity(n_y, n_w)
}

/// Column-stacking vectorisation.
pub fn vec_of<T: Scalar>(a: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvec<T: Scalar>(v: &DVector<T>, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn to_complex<T: Scalar>(a: &DMatrix<T>) -> DMatrix<Complex<T>> {
    a.map(|x| cplx(x, T::zero()))
}

pub fn real_part<T: Scalar>(a: &DMatrix<Complex<T>>) -> DMatrix<T> {
    a.map(|z| z.re)
}

pub fn imag_part<T: Scalar>(a: &DMatrix<Complex<T>>) -> DMatrix<T> {
    a.map(|z| z.im)
}

pub(crate) fn symmetric_part<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * lit::<T>(0.5)
}

pub(crate) fn antisymmetric_part<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    (a - a.transpose()) * lit::<T>(0.5)
}

/// Linear QSDE coefficients `dx = A x dt + B dw`, `dy = C x dt + D dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSystem<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    d: DMatrix<T>,
}

impl<T: Scalar> QuadratureSystem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n_x = a.nrows();
        if !a.is_square() {
            return dim_err(format!("A must be square, got {}x{}", a.nrows(), a.ncols()));
        }
        check_even(n_x, "n_x")?;
        if b.nrows() != n_x {
            return dim_err(format!("B has {} rows, expected n_x = {n_x}", b.nrows()));
        }
        let n_w = b.ncols();
        check_even(n_w, "n_w")?;
        let n_y = c.nrows();
        check_even(n_y, "n_y")?;
        if c.ncols() != n_x {
            return dim_err(format!("C has {} columns, expected n_x = {n_x}", c.ncols()));
        }
        if n_y > n_w {
            return dim_err(format!("n_y = {n_y} exceeds n_w = {n_w}"));
        }
        if d.shape() != (n_y, n_w) {
            return dim_err(format!("D is {}x{}, expected {n_y}x{n_w}", d.nrows(), d.ncols()));
        }
        if d != standard_feedthrough(n_y, n_w) {
            return Err(Error::Dimension("D must equal [I_{n_y} 0]".into()));
        }
        let finite = |m: &DMatrix<T>| m.iter().all(|x| x.is_finite());
        if !(finite(&a) && finite(&b) && finite(&c)) {
            return Err(Error::Dimension("matrix entries must be finite".into()));
        }
        Ok(Self { a, b, c, d })
    }

    /// Builds the system with `D = [I 0]`.
    pub fn with_standard_feedthrough(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>) -> Result<Self> {
        let d = standard_feedthrough(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_w(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }
}
