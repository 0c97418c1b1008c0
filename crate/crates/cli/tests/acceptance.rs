//! End-to-end acceptance checks. Runs without the libtest harness so that each
//! criterion prints exactly one PASS/FAIL line.

use std::process::ExitCode;
use std::time::Instant;

use cohobs::config::ExperimentConfig;
use cohobs::reproduce::{builtin, ex3_gain_grid, limit_diagnostics, EX1_CMT, EX1_MT, EX2_CMT, EX3_MT};
use cohobs::simulate::simulate;
use cohobs_core::gaussian::partial_transpose;
use cohobs_core::quadrature::symplectic_form;
use cohobs_core::synthesis::{commutator_target, steady_sigma_gap};
use cohobs_core::*;
use nalgebra::{dmatrix, Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn core<T>(r: cohobs_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn cli<T>(r: cohobs::error::CliResult<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn opts() -> SynthesisOptions {
    SynthesisOptions::default()
}

fn ex1() -> ExperimentConfig {
    builtin(EX1_CMT, "ex1_cmt")
}

fn sylvester_reproduction() -> Outcome {
    let cfg = ex1();
    let start = Instant::now();
    let g = core(steady_sigma_gap(&cfg.plant, &DMatrix::identity(2, 2)))?;
    let elapsed = start.elapsed().as_secs_f64();
    let expected = dmatrix![1.1111, 0.0; 0.0, 0.9091];
    let err = (&g - &expected).amax();
    ensure(err < 1e-3, format!("Σ_p − Σ_po off by {err:.2e}"))?;
    ensure(elapsed < 1.0, format!("took {elapsed:.3} s"))?;
    Ok(format!("diag({:.4}, {:.4}), max err {err:.1e}, {:.1} ms", g[(0, 0)], g[(1, 1)], elapsed * 1e3))
}

fn infeasibility_reproduction() -> Outcome {
    let cfg = ex1();
    let design = core(cmt_design(&cfg.plant, &(DMatrix::identity(2, 2) * 3.0), &opts()))?;
    ensure(design.observer.is_none() && design.report.verdict == Verdict::Infeasible, "K = 3I was not rejected")?;
    let req = design.report.required_noise_gram.ok_or("no required noise Gram in report")?;
    let err = (&req - dmatrix![-1.6842, 0.0; 0.0, -2.2857]).amax();
    ensure(err < 1e-3, format!("required B_oB_oᵀ off by {err:.2e}"))?;
    Ok(format!("infeasible, B_oB_oᵀ = diag({:.4}, {:.4})", req[(0, 0)], req[(1, 1)]))
}

fn coupling_invariants() -> Outcome {
    let cfg = ex1();
    let k = DMatrix::identity(2, 2);
    let (obs, _) = core(cmt_synthesize(&cfg.plant, &k, &opts()))?;
    let c = |re: f64, im: f64| Complex::new(re, im);
    let published = dmatrix![c(0.6742, 0.0), c(0.0, 0.7416); c(0.0, 0.0), c(0.0745, 0.0)];
    let lam = obs.lambda_o().ok_or("no Λ_o")?;
    let gram_err = (lam.adjoint() * lam - published.adjoint() * &published).norm();
    ensure(gram_err < 2e-3, format!("‖Λ_o†Λ_o − published‖_F = {gram_err:.2e}"))?;
    let bbt = obs.b_o() * obs.b_o().transpose();
    let bbt_err = (&bbt - dmatrix![2.2222, 0.0; 0.0, 1.8182]).amax();
    ensure(bbt_err < 1e-3, format!("B_oB_oᵀ off by {bbt_err:.2e}"))?;
    let th = symplectic_form::<f64>(obs.n_wo()).map_err(|e| e.to_string())?;
    let comm_err = (obs.b_o() * th * obs.b_o().transpose() - commutator_target(&cfg.plant, &k)).amax();
    ensure(comm_err < 1e-8, format!("B_oΘB_oᵀ off by {comm_err:.2e}"))?;
    Ok(format!("gram err {gram_err:.1e}, B_oB_oᵀ err {bbt_err:.1e}, commutator err {comm_err:.1e}"))
}

/// Two-exponential least-squares fit by linear prediction; returns
/// `(rates, coefficients)` sorted by rate, fastest first.
fn prony2(samples: &[f64], h: f64) -> Result<([f64; 2], [f64; 2]), String> {
    let m = samples.len() - 2;
    let lhs = DMatrix::from_fn(m, 2, |i, j| samples[i + 1 - j]);
    let rhs = DVector::from_fn(m, |i, _| samples[i + 2]);
    let p = lhs.svd(true, true).solve(&rhs, 1e-14)?;
    let disc = p[0] * p[0] + 4.0 * p[1];
    ensure(disc > 0.0, "complex modes in fit")?;
    let z = [(p[0] - disc.sqrt()) / 2.0, (p[0] + disc.sqrt()) / 2.0];
    ensure(z[0] > 0.0 && z[1] > 0.0, "non-positive roots in fit")?;
    let design = DMatrix::from_fn(samples.len(), 2, |i, j| z[j].powi(i as i32));
    let coef = design.svd(true, true).solve(&DVector::from_column_slice(samples), 1e-14)?;
    Ok(([z[0].ln() / h, z[1].ln() / h], [coef[0], coef[1]]))
}

fn error_dynamics_rates() -> Outcome {
    let cfg = ex1();
    let sim = cli(simulate(&cfg, &opts()))?;
    let h = sim.states[1].t - sim.states[0].t;
    ensure((h - 0.1).abs() < 1e-12, format!("sample step {h}"))?;
    let k = 1.0;
    let g0 = cfg.simulation.as_ref().unwrap().init.sigma_p[(0, 0)];
    let e0 = g0 - cfg.simulation.as_ref().unwrap().init.sigma_o[(0, 0)];
    let mut detail = Vec::new();
    for (i, a, expected) in [(0usize, -0.4, [-2.8, -1.8]), (1, -0.6, [-3.2, -2.2])] {
        let samples: Vec<f64> = sim.states.iter().map(|s| s.sigma_p[(i, i)] - s.sigma_o[(i, i)]).collect();
        let (rates, coef) = prony2(&samples, h)?;
        for (r, e) in rates.iter().zip(expected) {
            ensure(((r - e) / e).abs() < 0.02, format!("entry {i}: rate {r:.4} vs {e}"))?;
        }
        // e(t) = c_slow e^{(2a−k)t} + (e0 − c_slow) e^{2(a−k)t} with G∞ = 2/(k − 2a)
        let c_slow = 2.0 * (g0 - 2.0 / (k - 2.0 * a));
        let oracle = [e0 - c_slow, c_slow];
        for (c, o) in coef.iter().zip(oracle) {
            ensure((c - o).abs() < 1e-3, format!("entry {i}: coefficient {c:.5} vs {o:.5}"))?;
        }
        detail.push(format!("rates ({:.3}, {:.3}) coefs ({:.4}, {:.4})", rates[0], rates[1], coef[0], coef[1]));
    }
    Ok(detail.join("; "))
}

fn steady_state_gap(plant: &QuadratureSystemF64, obs: &ObserverModelF64) -> Result<(f64, f64), String> {
    let joint = core(build_joint_system(plant, obs))?;
    let ss = core(joint.steady_state())?;
    let n = plant.n_x();
    let gap = (ss.view((0, 0), (n, n)) - ss.view((n, n), (n, n))).norm();
    let eig = core(quadrature::eigenvalues(joint.a()))?;
    let slowest = eig.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
    let fastest = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let init = core(MomentState::new(
        0.0,
        DVector::from_element(n, 1.0),
        DVector::zeros(n),
        DMatrix::identity(n, n) * 1.5,
        DMatrix::zeros(n, n),
        DMatrix::identity(n, n) * 2.0,
        1e-12,
    ))?;
    let io = IntegrationOptions { t_final: 15.0 / slowest, dt: (0.1 / fastest).min(1e-2), sample_stride: usize::MAX };
    let traj = core(integrate_joint_moments(&joint, &init, io))?;
    let end = traj.states.last().unwrap().joint_covariance();
    Ok((gap, (end - ss).norm()))
}

fn random_feasible(rng: &mut ChaCha8Rng) -> Option<(QuadratureSystemF64, ObserverModelF64)> {
    let modes = rng.random_range(1..=2);
    let n = 2 * modes;
    let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let r = (&r + r.transpose()) * 0.5;
    let lambda = DMatrix::from_fn(n, n, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let slh = SlhParams::new(r, lambda, 1e-12).ok()?;
    let plant = abcd_from_slh(&slh, n).ok()?;
    if !is_hurwitz(plant.a(), 1e-2).ok()?.stable {
        return None;
    }
    let k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
    cmt_synthesize(&plant, &k, &opts()).ok().map(|(obs, _)| (plant, obs))
}

fn steady_state_tracking() -> Outcome {
    let mut cases = Vec::new();
    for text in [EX1_CMT, EX2_CMT] {
        let cfg = builtin(text, "builtin");
        let k = cfg.observer.as_ref().unwrap().k.clone();
        let (obs, _) = core(cmt_synthesize(&cfg.plant, &k, &opts()))?;
        cases.push((cfg.plant, obs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut attempts = 0;
    while cases.len() < 22 {
        attempts += 1;
        ensure(attempts < 5000, "could not generate 20 feasible instances")?;
        if let Some(c) = random_feasible(&mut rng) {
            cases.push(c);
        }
    }
    let (mut worst_gap, mut worst_sim) = (0.0f64, 0.0f64);
    for (i, (plant, obs)) in cases.iter().enumerate() {
        let (gap, sim) = steady_state_gap(plant, obs)?;
        ensure(gap < 1e-6, format!("instance {i}: steady gap {gap:.2e}"))?;
        ensure(sim < 1e-5, format!("instance {i}: integration differs by {sim:.2e}"))?;
        worst_gap = worst_gap.max(gap);
        worst_sim = worst_sim.max(sim);
    }
    Ok(format!(
        "{} instances ({attempts} draws), worst gap {worst_gap:.1e}, worst integration mismatch {worst_sim:.1e}",
        cases.len()
    ))
}

fn entanglement() -> Outcome {
    let sim = cli(simulate(&ex1(), &opts()))?;
    let nu: Vec<(f64, f64)> = sim.rows.iter().map(|r| (r.t, r.nu_minus.unwrap())).collect();
    let onset = nu.iter().rposition(|&(_, v)| v >= 1.0).map_or(0, |i| i + 1);
    ensure(onset < nu.len(), "ν₋ never drops below 1")?;
    let t_onset = nu[onset].0;

    let sim2 = cli(simulate(&builtin(EX2_CMT, "ex2_cmt"), &opts()))?;
    let last = sim2.rows.last().unwrap();
    ensure((last.t - 10.0).abs() < 1e-9, "ex2 horizon is not t = 10")?;
    let diff = (last.nu_minus_plant.unwrap() - last.nu_minus_observer.unwrap()).abs();
    ensure(diff < 1e-3, format!("|ν₋ᵒ − ν₋ᵖ| = {diff:.2e} at t = 10"))?;
    Ok(format!(
        "ex1 ν₋ < 1 from t = {t_onset:.1} (final {:.4}); ex2 |ν₋ᵒ − ν₋ᵖ| = {diff:.1e} at t = 10",
        nu.last().unwrap().1
    ))
}

fn fidelity_ordering() -> Outcome {
    let cmt = cli(simulate(&ex1(), &opts()))?;
    let mt = cli(simulate(&builtin(EX1_MT, "ex1_mt"), &opts()))?;
    ensure(cmt.rows.len() == mt.rows.len(), "sample grids differ")?;
    let ahead: Vec<bool> = cmt.rows.iter().zip(&mt.rows).map(|(c, m)| c.fidelity > m.fidelity).collect();
    let crossover = ahead.iter().rposition(|&a| !a).map_or(0, |i| i + 1);
    ensure(crossover < ahead.len(), "CMT never overtakes MT")?;
    let f_cmt = cmt.rows.last().unwrap().fidelity.unwrap();
    let f_mt = mt.rows.last().unwrap().fidelity.unwrap();
    ensure((1.0 - f_cmt) < 1e-3, format!("CMT fidelity {f_cmt} at horizon"))?;
    Ok(format!("CMT ahead from t = {:.1}; at horizon F_cmt = {f_cmt:.6}, F_mt = {f_mt:.4}", cmt.rows[crossover].t))
}

fn negative_result() -> Outcome {
    let cfg = builtin(EX3_MT, "ex3_mt");
    let grid = ex3_gain_grid();
    ensure(grid.len() >= 25, "grid too small")?;
    let id = DMatrix::identity(2, 2);
    for s in [1.0, 0.5, 2.0] {
        ensure(grid.iter().any(|k| *k == &id * s), format!("grid lacks {s}·I"))?;
    }
    let rows = cli(limit_diagnostics(&cfg.plant, &grid, &opts()))?;
    let bad = rows.iter().filter(|r| r.satisfied).count();
    ensure(bad == 0, format!("{bad} gains satisfy the covariance limit"))?;
    let obs = core(mt_synthesize(&cfg.plant, &id, &opts()))?;
    ensure(obs.realizability(&cfg.plant).passed, "MT observer for K = I is not realizable")?;
    let min = rows.iter().map(|r| r.limit_norm).fold(f64::INFINITY, f64::min);
    Ok(format!("{} gains, none tracks the covariance (smallest gap {min:.3}); MT with K = I built", rows.len()))
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let n = 2 * rng.random_range(1..=3);
        let fields = rng.random_range(1..=4);
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let r = (&r + r.transpose()) * 0.5;
        let lambda =
            DMatrix::from_fn(fields, n, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let slh = core(SlhParams::new(r, lambda, 1e-12))?;
        let sys = core(abcd_from_slh(&slh, 2 * rng.random_range(1..=fields)))?;
        let back = core(recover_slh(&sys, 1e-8))?;
        let err: f64 = (back.r() - slh.r()).amax();
        let err = err.max((back.lambda() - slh.lambda()).map(|z| z.norm()).amax());
        worst[0] = worst[0].max(err);
    }
    ensure(worst[0] < 1e-10, format!("SLH round trip error {:.2e}", worst[0]))?;

    for _ in 0..100 {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5)) - DMatrix::identity(n, n) * 2.0;
        let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-0.5..0.5)) - DMatrix::identity(m, m) * 2.0;
        let q = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let x = core(solve_sylvester(&a, &b, &q))?;
        worst[1] = worst[1].max((&a * &x + &x * &b + &q).amax());
    }
    ensure(worst[1] < 1e-8, format!("Sylvester residual {:.2e}", worst[1]))?;

    let th = symplectic_form::<f64>(4).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let h = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.4..0.4));
        let s = (&th * (&h + h.transpose()) * 0.5).exp();
        let nus = [1.0 + rng.random_range(0.0..1.5), 1.0 + rng.random_range(0.0..1.5)];
        let d = DMatrix::from_diagonal(&nalgebra::dvector![nus[0], nus[0], nus[1], nus[1]]);
        let sigma = &s * d * s.transpose();
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let closed = core(ppt_nu_minus(&sigma))?;
        let oracle = core(symplectic_eigenvalues(&partial_transpose(&sigma)))?[0];
        worst[2] = worst[2].max((closed - oracle).abs());
    }
    ensure(worst[2] < 1e-10, format!("ν₋ closed form vs oracle {:.2e}", worst[2]))?;

    let cfg = ex1();
    let (obs, _) = core(cmt_synthesize(&cfg.plant, &DMatrix::identity(2, 2), &opts()))?;
    let joint = core(build_joint_system(&cfg.plant, &obs))?;
    let init = &cfg.simulation.as_ref().unwrap().init;
    let run = |dt: f64| {
        let io = IntegrationOptions { t_final: 2.0, dt, sample_stride: usize::MAX };
        core(integrate_joint_moments(&joint, init, io)).map(|t| t.states.last().unwrap().joint_covariance())
    };
    let (c1, c2, c3) = (run(0.05)?, run(0.025)?, run(0.0125)?);
    let order = ((&c1 - &c2).norm() / (&c2 - &c3).norm()).log2();
    ensure((order - 4.0).abs() < 0.25, format!("observed RK4 order {order:.3}"))?;

    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, format!("property suites took {elapsed:.1} s"))?;
    Ok(format!(
        "round trip {:.1e}, Sylvester {:.1e}, ν₋ {:.1e}, RK4 order {order:.2}, {elapsed:.1} s",
        worst[0], worst[1], worst[2]
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("Sylvester reproduction", sylvester_reproduction),
        ("infeasibility reproduction", infeasibility_reproduction),
        ("coupling invariants", coupling_invariants),
        ("error-dynamics rates", error_dynamics_rates),
        ("steady-state tracking", steady_state_tracking),
        ("entanglement tracking", entanglement),
        ("fidelity ordering", fidelity_ordering),
        ("squeezing plant negative result", negative_result),
        ("property suites", property_suites),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
