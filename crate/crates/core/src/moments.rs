//! First- and second-moment dynamics of the cascaded plant/observer system.
//!
//! The joint covariance obeys `Σ̇ = AΣ + ΣAᵀ + BBᵀ` with the block
//! lower-triangular joint coefficients built by [`build_joint_system`].
//! Steady states come from a Bartels–Stewart Sylvester solver running on the
//! complex Schur forms of the two coefficient matrices.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::quadrature::{
    eigenvalues, imag_part, is_hurwitz, real_part, symmetric_part, to_complex, vec_of, QuadratureSystem,
    DEFAULT_HURWITZ_MARGIN,
};
use crate::scalar::{lit, to_f64, Scalar};
use crate::synthesis::ObserverModel;

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Eigenvalues of the sampled `Σ_p`, `Σ_o` below this floor are reported.
pub const PSD_WARNING_FLOOR: f64 = -1e-8;

/// `Acoef·X + X·Bcoef + Q = 0`.
pub fn solve_sylvester<T: Scalar>(acoef: &DMatrix<T>, bcoef: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = acoef.nrows();
    let m = bcoef.nrows();
    if !acoef.is_square() || !bcoef.is_square() || q.shape() != (n, m) {
        return dim_err(format!(
            "Sylvester shapes incompatible: A {:?}, B {:?}, Q {:?}",
            acoef.shape(),
            bcoef.shape(),
            q.shape()
        ));
    }
    if n == 0 || m == 0 {
        return Ok(DMatrix::zeros(n, m));
    }
    let (u, ta) = complex_schur(acoef)?;
    let (v, tb) = complex_schur(bcoef)?;

    let scale = T::one() + acoef.norm() + bcoef.norm();
    let pivot_floor = lit::<T>(1e3) * T::default_epsilon() * scale;
    let mut min_gap = scale;
    for i in 0..n {
        for j in 0..m {
            min_gap = min_gap.min((ta[(i, i)] + tb[(j, j)]).modulus());
        }
    }
    if min_gap <= pivot_floor {
        return Err(Error::NoUniqueSolution(format!(
            "spectra of A and -B overlap (min |λ_A + λ_B| = {:e})",
            to_f64(min_gap)
        )));
    }

    // Ta Y + Y Tb = F with Y = U* X V, F = -U* Q V; columns of Y in order.
    let f = -(u.adjoint() * to_complex(q) * &v);
    let mut y = DMatrix::<Complex<T>>::zeros(n, m);
    for j in 0..m {
        let mut rhs = f.column(j).into_owned();
        for k in 0..j {
            let coeff = tb[(k, j)];
            rhs -= y.column(k) * coeff;
        }
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..n {
                acc -= ta[(i, l)] * y[(l, j)];
            }
            y[(i, j)] = acc / (ta[(i, i)] + tb[(j, j)]);
        }
    }
    let xc = &u * y * v.adjoint();
    let x = real_part(&xc);
    let imag = imag_part(&xc).norm();

    let residual = (acoef * &x + &x * bcoef + q).norm();
    let bound = lit::<T>(1e-8) * (T::one() + q.norm());
    if residual > bound || imag > bound {
        return Err(Error::NoUniqueSolution(format!(
            "ill-conditioned Sylvester equation: residual {:e}, imaginary residue {:e}",
            to_f64(residual),
            to_f64(imag)
        )));
    }
    Ok(x)
}

type ComplexPair<T> = (DMatrix<Complex<T>>, DMatrix<Complex<T>>);

/// Complex Schur form `M = U T U*` with `T` upper triangular.
fn complex_schur<T: Scalar>(m: &DMatrix<T>) -> Result<ComplexPair<T>> {
    let schur = Schur::try_new(to_complex(m), T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::Singular("Schur decomposition did not converge".into()))?;
    let (u, mut t) = schur.unpack();
    // strictly lower part is zero up to rounding; drop it
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = Complex::new(T::zero(), T::zero());
        }
    }
    Ok((u, t))
}

/// Solution of `AX + XAᵀ + N = 0` for Hurwitz `A`.
pub fn steady_state_covariance<T: Scalar>(a: &DMatrix<T>, noise: &DMatrix<T>) -> Result<DMatrix<T>> {
    let h = is_hurwitz(a, lit(DEFAULT_HURWITZ_MARGIN))?;
    if !h.stable {
        return Err(Error::NotHurwitz { max_real_part: to_f64(h.max_real_part) });
    }
    let x = solve_sylvester(a, &a.transpose(), noise)?;
    Ok(symmetric_part(&x))
}

/// Coefficients of the cascaded plant/observer system
/// `A = [A_p, 0; K C_p, A_p − K C_p]`, `B = [B_p, 0; K D_p, B_o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSystem<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    n_x: usize,
}

impl<T: Scalar> JointSystem<T> {
    /// Assembles the joint coefficients from a plant, a gain and a noise matrix.
    pub fn from_parts(plant: &QuadratureSystem<T>, k: &DMatrix<T>, b_o: &DMatrix<T>) -> Result<Self> {
        let n_x = plant.n_x();
        if k.shape() != (n_x, plant.n_y()) {
            return dim_err(format!("gain K is {}x{}, expected {}x{}", k.nrows(), k.ncols(), n_x, plant.n_y()));
        }
        if b_o.nrows() != n_x {
            return dim_err(format!("B_o has {} rows, expected {n_x}", b_o.nrows()));
        }
        let kc = k * plant.c();
        let mut a = DMatrix::zeros(2 * n_x, 2 * n_x);
        a.view_mut((0, 0), (n_x, n_x)).copy_from(plant.a());
        a.view_mut((n_x, 0), (n_x, n_x)).copy_from(&kc);
        a.view_mut((n_x, n_x), (n_x, n_x)).copy_from(&(plant.a() - &kc));

        let n_wp = plant.n_w();
        let n_wo = b_o.ncols();
        let mut b = DMatrix::zeros(2 * n_x, n_wp + n_wo);
        b.view_mut((0, 0), (n_x, n_wp)).copy_from(plant.b());
        b.view_mut((n_x, 0), (n_x, n_wp)).copy_from(&(k * plant.d()));
        b.view_mut((n_x, n_wp), (n_x, n_wo)).copy_from(b_o);
        Ok(Self { a, b, n_x })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// `BBᵀ`, the joint diffusion.
    pub fn diffusion(&self) -> DMatrix<T> {
        &self.b * self.b.transpose()
    }

    /// Steady-state joint covariance (requires a Hurwitz joint `A`).
    pub fn steady_state(&self) -> Result<DMatrix<T>> {
        steady_state_covariance(&self.a, &self.diffusion())
    }
}

/// Joint system for a plant and an observer.
pub fn build_joint_system<T: Scalar>(plant: &QuadratureSystem<T>, obs: &ObserverModel<T>) -> Result<JointSystem<T>> {
    JointSystem::from_parts(plant, obs.k(), obs.b_o())
}

/// Plant and observer moments at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState<T: Scalar> {
    pub t: T,
    pub mu_p: DVector<T>,
    pub mu_o: DVector<T>,
    pub sigma_p: DMatrix<T>,
    pub sigma_po: DMatrix<T>,
    pub sigma_o: DMatrix<T>,
}

impl<T: Scalar> MomentState<T> {
    pub fn new(
        t: T,
        mu_p: DVector<T>,
        mu_o: DVector<T>,
        sigma_p: DMatrix<T>,
        sigma_po: DMatrix<T>,
        sigma_o: DMatrix<T>,
        tol: T,
    ) -> Result<Self> {
        let n = mu_p.len();
        let sq = (n, n);
        if mu_o.len() != n || sigma_p.shape() != sq || sigma_po.shape() != sq || sigma_o.shape() != sq {
            return dim_err(format!("moment blocks must all be sized for n_x = {n}"));
        }
        for (name, s) in [("sigma_p", &sigma_p), ("sigma_o", &sigma_o)] {
            let asym = (s - s.transpose()).norm();
            if asym > tol {
                return Err(Error::InvalidState(format!("{name} is not symmetric ({:e})", to_f64(asym))));
            }
        }
        Ok(Self { t, mu_p, mu_o, sigma_p, sigma_po, sigma_o })
    }

    pub fn n_x(&self) -> usize {
        self.mu_p.len()
    }

    pub fn joint_mean(&self) -> DVector<T> {
        let n = self.n_x();
        let mut mu = DVector::zeros(2 * n);
        mu.rows_mut(0, n).copy_from(&self.mu_p);
        mu.rows_mut(n, n).copy_from(&self.mu_o);
        mu
    }

    /// `[Σ_p, Σ_po; Σ_poᵀ, Σ_o]`.
    pub fn joint_covariance(&self) -> DMatrix<T> {
        let n = self.n_x();
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        s.view_mut((0, 0), (n, n)).copy_from(&self.sigma_p);
        s.view_mut((0, n), (n, n)).copy_from(&self.sigma_po);
        s.view_mut((n, 0), (n, n)).copy_from(&self.sigma_po.transpose());
        s.view_mut((n, n), (n, n)).copy_from(&self.sigma_o);
        s
    }

    fn from_joint(t: T, mu: &DVector<T>, sigma: &DMatrix<T>, n: usize) -> Self {
        Self {
            t,
            mu_p: mu.rows(0, n).into_owned(),
            mu_o: mu.rows(n, n).into_owned(),
            sigma_p: sigma.view((0, 0), (n, n)).into_owned(),
            sigma_po: sigma.view((0, n), (n, n)).into_owned(),
            sigma_o: sigma.view((n, n), (n, n)).into_owned(),
        }
    }

    /// `e_μ = μ_p − μ_o`.
    pub fn mean_error(&self) -> DVector<T> {
        &self.mu_p - &self.mu_o
    }

    /// `e_Σ = Σ_p − Σ_o`.
    pub fn covariance_error(&self) -> DMatrix<T> {
        &self.sigma_p - &self.sigma_o
    }
}

/// Step size and sampling of a fixed-step integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions<T> {
    pub t_final: T,
    pub dt: T,
    /// Keep every `sample_stride`-th step (the final state is always kept).
    pub sample_stride: usize,
}

/// Sampled states plus the number of covariance-floor warnings raised.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub states: Vec<MomentState<T>>,
    pub psd_warnings: usize,
}

fn min_symmetric_eigenvalue<T: Scalar>(s: &DMatrix<T>) -> T {
    if s.nrows() == 0 {
        return T::zero();
    }
    s.clone().symmetric_eigenvalues().iter().fold(T::max_value().unwrap_or(T::one()), |m, &x| m.min(x))
}

/// Fixed-step RK4 on `μ̇ = Aμ` and `Σ̇ = AΣ + ΣAᵀ + BBᵀ` for the joint system.
pub fn integrate_joint_moments<T: Scalar>(
    joint: &JointSystem<T>,
    init: &MomentState<T>,
    opts: IntegrationOptions<T>,
) -> Result<Trajectory<T>> {
    let n = joint.n_x();
    if init.n_x() != n {
        return dim_err(format!("initial state has n_x = {}, system has {n}", init.n_x()));
    }
    if opts.dt.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater)
        || opts.t_final < T::zero()
        || opts.sample_stride == 0
    {
        return Err(Error::Precondition("need dt > 0, t_final >= 0 and sample_stride >= 1".into()));
    }
    let a = joint.a();
    let at = a.transpose();
    let q = joint.diffusion();
    let drift = |s: &DMatrix<T>| a * s + s * &at + &q;

    let ratio = to_f64(opts.t_final / opts.dt);
    let steps = (ratio - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { opts.dt } else { opts.t_final / lit::<T>(steps as f64) };
    let half = h * lit(0.5);
    let sixth = h / lit(6.0);
    let two = lit::<T>(2.0);

    let mut mu = init.joint_mean();
    let mut sigma = init.joint_covariance();
    let mut states = vec![MomentState { t: init.t, ..init.clone() }];
    let mut psd_warnings = 0usize;
    let floor = lit::<T>(PSD_WARNING_FLOOR);

    for step in 1..=steps {
        let k1 = a * &mu;
        let k2 = a * (&mu + &k1 * half);
        let k3 = a * (&mu + &k2 * half);
        let k4 = a * (&mu + &k3 * h);
        mu += (k1 + k2 * two + k3 * two + k4) * sixth;

        let s1 = drift(&sigma);
        let s2 = drift(&(&sigma + &s1 * half));
        let s3 = drift(&(&sigma + &s2 * half));
        let s4 = drift(&(&sigma + &s3 * h));
        sigma += (s1 + s2 * two + s3 * two + s4) * sixth;
        sigma = symmetric_part(&sigma);

        let t = init.t + h * lit(step as f64);
        if !(mu.iter().all(|x| x.is_finite()) && sigma.iter().all(|x| x.is_finite())) {
            return Err(Error::Divergence { t: to_f64(t) });
        }
        if step % opts.sample_stride == 0 || step == steps {
            let state = MomentState::from_joint(t, &mu, &sigma, n);
            for (name, blk) in [("sigma_p", &state.sigma_p), ("sigma_o", &state.sigma_o)] {
                let lo = min_symmetric_eigenvalue(blk);
                if lo < floor {
                    psd_warnings += 1;
                    log::warn!("{name} has eigenvalue {:e} at t = {}", to_f64(lo), to_f64(t));
                }
            }
            states.push(state);
        }
    }
    Ok(Trajectory { states, psd_warnings })
}

/// Evaluated final-value expression of the CMT existence test.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Limit<T: Scalar> {
    /// `lim_{s→0} (E_o⊗E_o − E_p⊗E_p)(sI − I⊗A − A⊗I)⁻¹ vec(BBᵀ)`, length `n_x²`.
    pub value: DVector<T>,
    pub converged: bool,
    /// True when the Kronecker sum was invertible and `s = 0` was used directly.
    pub direct: bool,
}

impl<T: Scalar> Theorem1Limit<T> {
    /// Zero within `tol` and converged.
    pub fn is_satisfied(&self, tol: T) -> bool {
        self.converged && self.value.norm() <= tol
    }
}

pub const LIMIT_PROBES: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Evaluates the limit in the CMT existence condition.
///
/// With `𝒜 = I⊗A + A⊗I` nonsingular this is `vec(Σ_o − Σ_p)` of the joint
/// steady state. Otherwise the resolvent is probed at [`LIMIT_PROBES`] and the
/// samples are Richardson-extrapolated against a first-order error in `s`.
pub fn theorem1_limit<T: Scalar>(joint: &JointSystem<T>) -> Result<Theorem1Limit<T>> {
    let n = joint.n_x();
    let big = 2 * n;
    let a = joint.a();
    let id = DMatrix::<T>::identity(big, big);
    let kron_sum = id.kronecker(a) + a.kronecker(&id);
    let rhs = vec_of(&joint.diffusion());

    let observer_minus_plant = |x: &DVector<T>| -> DVector<T> {
        let sigma = DMatrix::from_column_slice(big, big, x.as_slice());
        let diff = sigma.view((n, n), (n, n)) - sigma.view((0, 0), (n, n));
        vec_of(&diff)
    };

    let eig = eigenvalues(a)?;
    let mut min_pair = T::max_value().unwrap_or(T::one());
    for li in eig.iter() {
        for lj in eig.iter() {
            min_pair = min_pair.min((li + lj).modulus());
        }
    }
    let scale = T::one() + a.norm();
    let resolvent = |s: T| -> Option<DVector<T>> {
        let m = &id.kronecker(&id) * s - &kron_sum;
        m.lu().solve(&rhs)
    };

    if min_pair > lit::<T>(1e-8) * scale {
        if let Some(x) = resolvent(T::zero()) {
            return Ok(Theorem1Limit { value: observer_minus_plant(&x), converged: true, direct: true });
        }
    }

    let samples: Vec<Option<DVector<T>>> =
        LIMIT_PROBES.iter().map(|&s| resolvent(lit(s)).map(|x| observer_minus_plant(&x))).collect();
    if samples.iter().all(Option::is_none) {
        return Err(Error::Singular("resolvent singular at every probe point".into()));
    }
    let Some(samples) = samples.into_iter().collect::<Option<Vec<_>>>() else {
        // partial failure: report the last usable sample, unconverged
        let value = LIMIT_PROBES
            .iter()
            .rev()
            .find_map(|&s| resolvent(lit(s)).map(|x| observer_minus_plant(&x)))
            .unwrap_or_else(|| DVector::zeros(n * n));
        return Ok(Theorem1Limit { value, converged: false, direct: false });
    };

    let ratio = lit::<T>(10.0);
    let extrapolated: Vec<DVector<T>> =
        samples.windows(2).map(|w| (&w[1] * ratio - &w[0]) / (ratio - T::one())).collect();
    let last = extrapolated.last().cloned().unwrap_or_else(|| samples[samples.len() - 1].clone());
    let prev = &extrapolated[extrapolated.len() - 2];
    let converged = (&last - prev).norm() <= lit::<T>(1e-6) * (T::one() + last.norm());
    Ok(Theorem1Limit { value: last, converged, direct: false })
}
