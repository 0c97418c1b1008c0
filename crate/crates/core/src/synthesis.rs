//! Mean-tracking (MT) and covariance-matrix-tracking (CMT) coherent observer
//! synthesis.
//!
//! An observer is `dx_o = (A_p − K C_p) x_o dt + K dy_p + B_o dw_o` with output
//! `dy_o = C_o x_o dt + D_o [dy_p; dw_o]`. Given a gain `K`, the MT route picks
//! any `B_o` satisfying the commutation-preservation constraint; the CMT route
//! additionally fixes `B_o B_oᵀ` so that the steady-state covariances agree,
//! which is only possible when a certain Hermitian matrix is positive
//! semidefinite.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{Complex, DMatrix};

use crate::error::{dim_err, Error, Result};
use crate::moments::solve_sylvester;
use crate::quadrature::{
    is_hurwitz, standard_feedthrough, theta, HurwitzCheck, QuadratureSystem, DEFAULT_HURWITZ_MARGIN,
};
use crate::realizability::{
    check_physical_realizability, noise_matrix_from_coupling, realizability_residuals, RealizabilityReport,
    DEFAULT_REALIZABILITY_TOL,
};
use crate::scalar::{cplx, lit, to_f64, Scalar};

/// Tolerances and options shared by the synthesis routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Absolute tolerance on realizability residuals.
    pub tol: f64,
    /// Eigenvalues of the coupling Gram matrix in `[-psd_tol, 0)` are clipped to zero.
    pub psd_tol: f64,
    /// Eigenvalues below `rank_rel * λ_max` are dropped when factoring.
    pub rank_rel: f64,
    /// Tolerance of the post-construction cross-checks on `B_o`.
    pub cross_check_tol: f64,
    pub hurwitz_margin: f64,
    /// Observer output width; defaults to the plant output width.
    pub n_yo: Option<usize>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_REALIZABILITY_TOL,
            psd_tol: 1e-8,
            rank_rel: 1e-10,
            cross_check_tol: 1e-6,
            hurwitz_margin: DEFAULT_HURWITZ_MARGIN,
            n_yo: None,
        }
    }
}

/// A cascaded coherent observer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverModel<T: Scalar> {
    k: DMatrix<T>,
    b_o: DMatrix<T>,
    c_o: DMatrix<T>,
    d_o: DMatrix<T>,
    lambda_o: Option<DMatrix<Complex<T>>>,
}

impl<T: Scalar> ObserverModel<T> {
    /// Builds an observer from `K` and `B_o`, deriving `(C_o, D_o)` and
    /// checking both realizability identities against `tol`.
    pub fn new(
        plant: &QuadratureSystem<T>,
        k: DMatrix<T>,
        b_o: DMatrix<T>,
        n_yo: usize,
        lambda_o: Option<DMatrix<Complex<T>>>,
        tol: T,
    ) -> Result<Self> {
        let n_x = plant.n_x();
        if k.shape() != (n_x, plant.n_y()) {
            return dim_err(format!("K is {}x{}, expected {}x{}", k.nrows(), k.ncols(), n_x, plant.n_y()));
        }
        if b_o.nrows() != n_x || !b_o.ncols().is_multiple_of(2) {
            return dim_err(format!(
                "B_o is {}x{}, expected {n_x} rows and an even column count",
                b_o.nrows(),
                b_o.ncols()
            ));
        }
        if let Some(l) = &lambda_o {
            if l.ncols() != n_x || 2 * l.nrows() != b_o.ncols() {
                return dim_err(format!("Λ_o is {}x{}, inconsistent with B_o", l.nrows(), l.ncols()));
            }
            let implied = noise_matrix_from_coupling(l)?;
            let gap = (implied - &b_o).norm();
            if gap > tol {
                return Err(Error::Consistency(format!("B_o differs from the Λ_o construction by {:e}", to_f64(gap))));
            }
        }
        let (c_o, d_o) = derive_observer_output(&k, &b_o, n_yo)?;
        let obs = Self { k, b_o, c_o, d_o, lambda_o };
        let rep = obs.realizability(plant);
        if !(rep.residual_a <= tol && rep.residual_b <= tol) {
            return Err(Error::NotRealizable(format!(
                "observer residuals {:e} / {:e} exceed {:e}",
                to_f64(rep.residual_a),
                to_f64(rep.residual_b),
                to_f64(tol)
            )));
        }
        Ok(obs)
    }

    pub fn k(&self) -> &DMatrix<T> {
        &self.k
    }
    pub fn b_o(&self) -> &DMatrix<T> {
        &self.b_o
    }
    pub fn c_o(&self) -> &DMatrix<T> {
        &self.c_o
    }
    pub fn d_o(&self) -> &DMatrix<T> {
        &self.d_o
    }
    pub fn lambda_o(&self) -> Option<&DMatrix<Complex<T>>> {
        self.lambda_o.as_ref()
    }
    pub fn n_wo(&self) -> usize {
        self.b_o.ncols()
    }
    pub fn n_yo(&self) -> usize {
        self.c_o.nrows()
    }

    /// `([K B_o])`, the observer's full input matrix.
    pub fn input_matrix(&self) -> DMatrix<T> {
        hstack(&self.k, &self.b_o)
    }

    /// The observer as a quadrature system `(A_p − K C_p, [K B_o], C_o, D_o)`.
    pub fn as_system(&self, plant: &QuadratureSystem<T>) -> Result<QuadratureSystem<T>> {
        QuadratureSystem::new(plant.a() - &self.k * plant.c(), self.input_matrix(), self.c_o.clone(), self.d_o.clone())
    }

    /// Residuals of the observer realizability identities.
    pub fn realizability(&self, plant: &QuadratureSystem<T>) -> RealizabilityReport<T> {
        let a = plant.a() - &self.k * plant.c();
        let (ra, rb) = realizability_residuals(&a, &self.input_matrix(), &self.c_o, &self.d_o);
        let tol = lit(DEFAULT_REALIZABILITY_TOL);
        RealizabilityReport { passed: ra <= tol && rb <= tol, residual_a: ra, residual_b: rb, tolerance: tol }
    }
}

fn hstack<T: Scalar>(l: &DMatrix<T>, r: &DMatrix<T>) -> DMatrix<T> {
    let mut m = DMatrix::zeros(l.nrows(), l.ncols() + r.ncols());
    m.view_mut((0, 0), l.shape()).copy_from(l);
    m.view_mut((0, l.ncols()), r.shape()).copy_from(r);
    m
}

/// Observer output pair from `[K B_o] D_oᵀ = Θ C_oᵀ Θ` with `D_o = [I 0]`.
pub fn derive_observer_output<T: Scalar>(
    k: &DMatrix<T>,
    b_o: &DMatrix<T>,
    n_yo: usize,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if k.nrows() != b_o.nrows() {
        return dim_err(format!("K has {} rows but B_o has {}", k.nrows(), b_o.nrows()));
    }
    let n_x = k.nrows();
    let n_in = k.ncols() + b_o.ncols();
    if !n_x.is_multiple_of(2) || n_yo == 0 || !n_yo.is_multiple_of(2) || n_yo > n_in {
        return dim_err(format!("n_yo = {n_yo} must be even, positive and at most {n_in}"));
    }
    let d_o = standard_feedthrough::<T>(n_yo, n_in);
    let selected = hstack(k, b_o) * d_o.transpose();
    let c_o = (theta::<T>(n_x) * selected * theta::<T>(n_yo)).transpose();
    Ok((c_o, d_o))
}

/// Error dynamics matrix and its stability verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCheck<T: Scalar> {
    /// `A_p − K C_p`
    pub a_err: DMatrix<T>,
    pub hurwitz: HurwitzCheck<T>,
}

/// Forms `A_p − K C_p` and tests it for stability.
pub fn validate_gain<T: Scalar>(plant: &QuadratureSystem<T>, k: &DMatrix<T>) -> Result<GainCheck<T>> {
    if k.shape() != (plant.n_x(), plant.n_y()) {
        return dim_err(format!("K is {}x{}, expected {}x{}", k.nrows(), k.ncols(), plant.n_x(), plant.n_y()));
    }
    let a_err = plant.a() - k * plant.c();
    let hurwitz = is_hurwitz(&a_err, lit(DEFAULT_HURWITZ_MARGIN))?;
    Ok(GainCheck { a_err, hurwitz })
}

/// `−(A_p − K C_p)Θ − Θ(A_p − K C_p)ᵀ − K Θ Kᵀ`, the value `B_o Θ B_oᵀ` must take.
pub fn commutator_target<T: Scalar>(plant: &QuadratureSystem<T>, k: &DMatrix<T>) -> DMatrix<T> {
    let th = theta::<T>(plant.n_x());
    let a_err = plant.a() - k * plant.c();
    -(&a_err * &th) - &th * a_err.transpose() - k * theta::<T>(plant.n_y()) * k.transpose()
}

/// Real `B` with `B Θ Bᵀ = Z` for antisymmetric `Z`, from the real Schur form
/// `Z = U blockdiag(β_i J) Uᵀ`. Blocks with `|β_i| <= drop_tol` are omitted.
pub fn realize_antisymmetric<T: Scalar>(z: &DMatrix<T>, drop_tol: T) -> Result<DMatrix<T>> {
    let n = z.nrows();
    if !z.is_square() {
        return dim_err("target must be square");
    }
    let asym = (z + z.transpose()).norm();
    if asym > lit::<T>(1e-10) * (T::one() + z.norm()) {
        return Err(Error::Consistency(format!("target is not antisymmetric ({:e})", to_f64(asym))));
    }
    if n == 0 || z.norm() <= drop_tol {
        return Ok(DMatrix::zeros(n, 0));
    }
    let (u, t) = Schur::try_new(z.clone(), T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::Singular("real Schur form did not converge".into()))?
        .unpack();
    let sub_floor = T::default_epsilon() * z.norm();
    let mut cols: Vec<DMatrix<T>> = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > sub_floor {
            let beta = (t[(i, i + 1)] - t[(i + 1, i)]) * lit(0.5);
            if beta.abs() > drop_tol {
                cols.push(DMatrix::from_column_slice(n, 1, u.column(i).as_slice()));
                cols.push(DMatrix::from_column_slice(n, 1, (u.column(i + 1) * beta).as_slice()));
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    let mut b = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        b.set_column(j, &c.column(0));
    }
    let th = theta::<T>(b.ncols());
    let residual = (&b * th * b.transpose() - z).norm();
    if residual > lit::<T>(1e-10) * (T::one() + z.norm()) {
        return Err(Error::Consistency(format!("antisymmetric factorization residual {:e}", to_f64(residual))));
    }
    Ok(b)
}

/// MT observer for gain `K`: `A_p − K C_p` Hurwitz and a realizable `B_o`.
pub fn mt_synthesize<T: Scalar>(
    plant: &QuadratureSystem<T>,
    k: &DMatrix<T>,
    opts: &SynthesisOptions,
) -> Result<ObserverModel<T>> {
    let gain = validate_gain(plant, k)?;
    if !gain.hurwitz.stable {
        return Err(Error::Infeasible(format!(
            "A_p - K C_p is not Hurwitz (max real part {:e})",
            to_f64(gain.hurwitz.max_real_part)
        )));
    }
    let z = commutator_target(plant, k);
    let b_o = realize_antisymmetric(&z, lit(opts.tol * 1e-2))?;
    let n_yo = opts.n_yo.unwrap_or(plant.n_y());
    ObserverModel::new(plant, k.clone(), b_o, n_yo, None, lit(opts.tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    Mt,
    Cmt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    PreconditionFailed,
}

/// Residuals of every constraint checked during synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisResiduals<T> {
    /// Observer commutation identity.
    pub realizability_a: Option<T>,
    /// Observer output identity.
    pub realizability_b: Option<T>,
    /// `‖B_oB_oᵀ − (K C_p G + Gᵀ(K C_p)ᵀ + B_pB_pᵀ − KKᵀ)‖_F`
    pub noise_gram: Option<T>,
    /// `‖B_oΘB_oᵀ − target‖_F`
    pub commutator: Option<T>,
    /// `‖M − M†‖_F` for the coupling Gram matrix.
    pub hermiticity: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisReport<T: Scalar> {
    pub mode: SynthesisMode,
    pub verdict: Verdict,
    pub feasible: bool,
    /// `−max Re λ(A_p − K C_p)`; positive when the error dynamics are stable.
    pub hurwitz_margin: T,
    /// Smallest eigenvalue of the coupling Gram matrix (CMT only).
    pub psd_min_eigenvalue: Option<T>,
    /// `Σ_p − Σ_po` at steady state (CMT only).
    pub sigma_gap: Option<DMatrix<T>>,
    /// Required `B_oB_oᵀ` (CMT only); indefinite when infeasible.
    pub required_noise_gram: Option<DMatrix<T>>,
    /// Required `Λ_o†Λ_o` (CMT only).
    pub coupling_gram: Option<DMatrix<Complex<T>>>,
    pub residuals: SynthesisResiduals<T>,
    pub message: Option<String>,
}

impl<T: Scalar> SynthesisReport<T> {
    fn new(mode: SynthesisMode, hurwitz_margin: T) -> Self {
        Self {
            mode,
            verdict: Verdict::PreconditionFailed,
            feasible: false,
            hurwitz_margin,
            psd_min_eigenvalue: None,
            sigma_gap: None,
            required_noise_gram: None,
            coupling_gram: None,
            residuals: SynthesisResiduals {
                realizability_a: None,
                realizability_b: None,
                noise_gram: None,
                commutator: None,
                hermiticity: None,
            },
            message: None,
        }
    }

    fn reject(mut self, verdict: Verdict, msg: String) -> Self {
        self.verdict = verdict;
        self.feasible = false;
        self.message = Some(msg);
        self
    }
}

/// Report for an MT observer.
pub fn mt_report<T: Scalar>(plant: &QuadratureSystem<T>, obs: &ObserverModel<T>) -> SynthesisReport<T> {
    let gain = plant.a() - obs.k() * plant.c();
    let margin = is_hurwitz(&gain, lit(DEFAULT_HURWITZ_MARGIN)).map(|h| -h.max_real_part).unwrap_or(-T::one());
    let rep = obs.realizability(plant);
    let target = commutator_target(plant, obs.k());
    let th = theta::<T>(obs.n_wo());
    let mut report = SynthesisReport::new(SynthesisMode::Mt, margin);
    report.verdict = Verdict::Feasible;
    report.feasible = true;
    report.residuals.realizability_a = Some(rep.residual_a);
    report.residuals.realizability_b = Some(rep.residual_b);
    report.residuals.commutator = Some((obs.b_o() * th * obs.b_o().transpose() - target).norm());
    report
}

/// MT synthesis that reports, rather than fails, when the gain leaves the
/// error dynamics unstable. A given `b_o` is validated and used as-is.
pub fn mt_design<T: Scalar>(
    plant: &QuadratureSystem<T>,
    k: &DMatrix<T>,
    b_o: Option<DMatrix<T>>,
    opts: &SynthesisOptions,
) -> Result<(Option<ObserverModel<T>>, SynthesisReport<T>)> {
    let gain = validate_gain(plant, k)?;
    if !gain.hurwitz.stable {
        let msg = format!("A_p - K C_p is not Hurwitz (max real part {:e})", to_f64(gain.hurwitz.max_real_part));
        let report = SynthesisReport::new(SynthesisMode::Mt, -gain.hurwitz.max_real_part);
        return Ok((None, report.reject(Verdict::Infeasible, msg)));
    }
    let obs = match b_o {
        Some(b) => ObserverModel::new(plant, k.clone(), b, opts.n_yo.unwrap_or(plant.n_y()), None, lit(opts.tol))?,
        None => mt_synthesize(plant, k, opts)?,
    };
    let report = mt_report(plant, &obs);
    Ok((Some(obs), report))
}

/// CMT synthesis outcome; `observer` is present exactly when feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct CmtDesign<T: Scalar> {
    pub observer: Option<ObserverModel<T>>,
    pub report: SynthesisReport<T>,
}

/// Steady-state `Σ_p − Σ_po` from `A_p G + G(A_p − K C_p)ᵀ + B_pB_pᵀ − B_pKᵀ = 0`.
pub fn steady_sigma_gap<T: Scalar>(plant: &QuadratureSystem<T>, k: &DMatrix<T>) -> Result<DMatrix<T>> {
    let a_err = plant.a() - k * plant.c();
    let bp = plant.b();
    let q = bp * bp.transpose() - bp * plant.d().transpose() * k.transpose();
    solve_sylvester(plant.a(), &a_err.transpose(), &q)
}

/// Runs the CMT construction and always returns a report. Only dimension
/// mismatches and numerical breakdowns surface as `Err`.
pub fn cmt_design<T: Scalar>(
    plant: &QuadratureSystem<T>,
    k: &DMatrix<T>,
    opts: &SynthesisOptions,
) -> Result<CmtDesign<T>> {
    let gain = validate_gain(plant, k)?;
    let mut report = SynthesisReport::new(SynthesisMode::Cmt, -gain.hurwitz.max_real_part);
    let tol = lit::<T>(opts.tol);

    let plant_rep = check_physical_realizability(plant, tol);
    if !plant_rep.passed {
        let msg = format!(
            "plant is not physically realizable (residuals {:e}, {:e})",
            to_f64(plant_rep.residual_a),
            to_f64(plant_rep.residual_b)
        );
        return Ok(CmtDesign { observer: None, report: report.reject(Verdict::PreconditionFailed, msg) });
    }
    let plant_stab = is_hurwitz(plant.a(), lit(opts.hurwitz_margin))?;
    if !plant_stab.stable {
        let msg = format!(
            "A_p is not Hurwitz (max real part {:e}); use the final-value limit test instead",
            to_f64(plant_stab.max_real_part)
        );
        return Ok(CmtDesign { observer: None, report: report.reject(Verdict::PreconditionFailed, msg) });
    }
    if !gain.hurwitz.stable {
        let msg = format!("A_p - K C_p is not Hurwitz (max real part {:e})", to_f64(gain.hurwitz.max_real_part));
        return Ok(CmtDesign { observer: None, report: report.reject(Verdict::Infeasible, msg) });
    }

    let n_x = plant.n_x();
    let th = theta::<T>(n_x);
    let th_y = theta::<T>(plant.n_y());
    let a_err = &gain.a_err;
    let kc = k * plant.c();
    let g = steady_sigma_gap(plant, k)?;
    let bp = plant.b();
    let quarter = lit::<T>(0.25);

    let required = &kc * &g + g.transpose() * kc.transpose() + bp * bp.transpose() - k * k.transpose();
    let target = commutator_target(plant, k);
    // Λ_o†Λ_o = −¼ΘRΘ + i·¼ΘZΘ where R, Z are the required B_oB_oᵀ, B_oΘB_oᵀ
    let re = -(&th * &required * &th) * quarter;
    let im = (-(&th * a_err) - a_err.transpose() * &th + &th * k * &th_y * k.transpose() * &th) * quarter;
    let gram = DMatrix::from_fn(n_x, n_x, |i, j| cplx(re[(i, j)], im[(i, j)]));

    report.sigma_gap = Some(g.clone());
    report.required_noise_gram = Some(required.clone());
    report.coupling_gram = Some(gram.clone());
    let herm = (&gram - gram.adjoint()).norm();
    report.residuals.hermiticity = Some(herm);
    if herm > tol {
        return Err(Error::Consistency(format!("coupling Gram matrix is not Hermitian ({:e})", to_f64(herm))));
    }

    let eig = SymmetricEigen::new(gram.clone());
    let min_eig = eig.eigenvalues.iter().fold(T::max_value().unwrap_or(T::one()), |m, &x| m.min(x));
    let max_eig = eig.eigenvalues.iter().fold(T::min_value().unwrap_or(-T::one()), |m, &x| m.max(x));
    report.psd_min_eigenvalue = Some(min_eig);
    let psd_tol = lit::<T>(opts.psd_tol);
    if min_eig < -psd_tol {
        let diag: Vec<String> = (0..n_x).map(|i| format!("{:.4}", to_f64(required[(i, i)]))).collect();
        let msg = format!(
            "coupling Gram matrix has eigenvalue {:e} < 0; required B_o B_o^T diagonal [{}]",
            to_f64(min_eig),
            diag.join(", ")
        );
        return Ok(CmtDesign { observer: None, report: report.reject(Verdict::Infeasible, msg) });
    }

    // Λ_o rows: √λ_i v_i† for the numerically nonzero eigenvalues
    let cutoff = lit::<T>(opts.rank_rel) * max_eig.max(T::zero());
    let kept: Vec<usize> =
        (0..n_x).filter(|&i| eig.eigenvalues[i] > cutoff && eig.eigenvalues[i] > T::zero()).collect();
    let mut lambda_o = DMatrix::<Complex<T>>::zeros(kept.len(), n_x);
    for (row, &i) in kept.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        for j in 0..n_x {
            lambda_o[(row, j)] = eig.eigenvectors[(j, i)].conj() * cplx(scale, T::zero());
        }
    }
    let b_o = noise_matrix_from_coupling(&lambda_o)?;

    let noise_res = (&b_o * b_o.transpose() - &required).norm();
    let comm_res = (&b_o * theta::<T>(b_o.ncols()) * b_o.transpose() - &target).norm();
    report.residuals.noise_gram = Some(noise_res);
    report.residuals.commutator = Some(comm_res);
    let cross = lit::<T>(opts.cross_check_tol);
    if noise_res > cross || comm_res > cross {
        return Err(Error::Consistency(format!(
            "constructed B_o misses its targets (noise {:e}, commutator {:e})",
            to_f64(noise_res),
            to_f64(comm_res)
        )));
    }

    let n_yo = opts.n_yo.unwrap_or(plant.n_y());
    let obs = ObserverModel::new(plant, k.clone(), b_o, n_yo, Some(lambda_o), tol)?;
    let rep = obs.realizability(plant);
    report.residuals.realizability_a = Some(rep.residual_a);
    report.residuals.realizability_b = Some(rep.residual_b);
    report.verdict = Verdict::Feasible;
    report.feasible = true;
    Ok(CmtDesign { observer: Some(obs), report })
}

/// CMT observer for gain `K`, or an error describing why none exists.
pub fn cmt_synthesize<T: Scalar>(
    plant: &QuadratureSystem<T>,
    k: &DMatrix<T>,
    opts: &SynthesisOptions,
) -> Result<(ObserverModel<T>, SynthesisReport<T>)> {
    let design = cmt_design(plant, k, opts)?;
    match (design.observer, design.report.verdict) {
        (Some(obs), _) => Ok((obs, design.report)),
        (None, Verdict::PreconditionFailed) => Err(Error::Precondition(design.report.message.unwrap_or_default())),
        (None, _) => Err(Error::Infeasible(design.report.message.unwrap_or_default())),
    }
}

/// Runs CMT synthesis for every candidate gain, most stable error dynamics first.
pub fn gain_grid_search<T: Scalar>(
    plant: &QuadratureSystem<T>,
    candidates: &[DMatrix<T>],
    opts: &SynthesisOptions,
) -> Result<Vec<(DMatrix<T>, SynthesisReport<T>)>> {
    let mut out = candidates
        .iter()
        .map(|k| cmt_design(plant, k, opts).map(|d| (k.clone(), d.report)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.1.hurwitz_margin.partial_cmp(&a.1.hurwitz_margin).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}
