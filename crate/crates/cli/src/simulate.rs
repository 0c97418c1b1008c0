//! Joint moment simulation and CSV time series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cohobs_core::gaussian::heisenberg_min_eigenvalue;
use cohobs_core::{
    build_joint_system, covariance_error_norm, gaussian_fidelity_single_mode, integrate_joint_moments, ppt_nu_minus,
    GaussianStateF64, IntegrationOptions, MomentStateF64, ObserverModelF64, SynthesisOptions,
};
use nalgebra::DMatrix;

use crate::artifact::synthesize;
use crate::config::{ExperimentConfig, Metrics};
use crate::error::{CliError, CliResult};

const HEISENBERG_TOL: f64 = 1e-8;

/// One sampled instant. Cells that do not apply to the plant size are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub e_mu_norm: f64,
    pub e_sigma_fro: f64,
    /// Joint plant-observer entanglement (single-mode plants).
    pub nu_minus: Option<f64>,
    /// Internal entanglement of plant and observer (two-mode plants).
    pub nu_minus_plant: Option<f64>,
    pub nu_minus_observer: Option<f64>,
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub observer: ObserverModelF64,
    pub rows: Vec<TimeSeriesRow>,
    pub states: Vec<MomentStateF64>,
    pub psd_warnings: usize,
    /// Samples whose covariance blocks violate `σ + iΘ ⪰ 0`.
    pub heisenberg_warnings: usize,
}

fn numerical(e: cohobs_core::Error) -> CliError {
    CliError::from_core("simulation", e)
}

/// Metrics for one sampled state.
pub fn row_for(state: &MomentStateF64) -> CliResult<TimeSeriesRow> {
    let n = state.n_x();
    let e_sigma_fro = covariance_error_norm(&state.sigma_p, &state.sigma_o).map_err(numerical)?;
    let mut row = TimeSeriesRow {
        t: state.t,
        e_mu_norm: state.mean_error().norm(),
        e_sigma_fro,
        nu_minus: None,
        nu_minus_plant: None,
        nu_minus_observer: None,
        fidelity: None,
    };
    match n {
        2 => {
            row.nu_minus = Some(ppt_nu_minus(&state.joint_covariance()).map_err(numerical)?);
            let p = GaussianStateF64::new(state.mu_p.clone(), state.sigma_p.clone(), HEISENBERG_TOL, false)
                .map_err(numerical)?;
            let o = GaussianStateF64::new(state.mu_o.clone(), state.sigma_o.clone(), HEISENBERG_TOL, false)
                .map_err(numerical)?;
            row.fidelity = Some(gaussian_fidelity_single_mode(&p, &o).map_err(numerical)?);
        }
        4 => {
            row.nu_minus_plant = Some(ppt_nu_minus(&state.sigma_p).map_err(numerical)?);
            row.nu_minus_observer = Some(ppt_nu_minus(&state.sigma_o).map_err(numerical)?);
        }
        _ => {}
    }
    Ok(row)
}

fn heisenberg_violations(state: &MomentStateF64) -> usize {
    [&state.sigma_p, &state.sigma_o, &state.joint_covariance()]
        .iter()
        .filter(|s: &&&DMatrix<f64>| heisenberg_min_eigenvalue(s) < -HEISENBERG_TOL)
        .count()
}

/// Synthesises (or validates) the configured observer and integrates the
/// joint moments over the configured horizon.
pub fn simulate(cfg: &ExperimentConfig, opts: &SynthesisOptions) -> CliResult<SimulationOutput> {
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| CliError::validation("simulation", "configuration has no simulation section"))?;
    let synthesis = synthesize(cfg, None, opts)?;
    let observer = synthesis.observer.ok_or_else(|| {
        CliError::Infeasible(synthesis.report.message.clone().unwrap_or_else(|| "no observer".into()))
    })?;
    let joint = build_joint_system(&cfg.plant, &observer).map_err(numerical)?;
    let traj = integrate_joint_moments(
        &joint,
        &sim.init,
        IntegrationOptions { t_final: sim.t_final, dt: sim.dt, sample_stride: sim.sample_stride },
    )
    .map_err(numerical)?;
    let rows = traj.states.iter().map(row_for).collect::<CliResult<Vec<_>>>()?;
    let heisenberg_warnings = traj.states.iter().map(heisenberg_violations).sum();
    if heisenberg_warnings > 0 {
        log::warn!("{heisenberg_warnings} sampled covariance blocks violate the uncertainty relation");
    }
    Ok(SimulationOutput { observer, rows, states: traj.states, psd_warnings: traj.psd_warnings, heisenberg_warnings })
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(x) = v {
        write!(out, "{x:.11e}").expect("writing to a String");
    }
}

/// CSV text with a header row; columns follow `metrics` in a fixed order.
pub fn to_csv(rows: &[TimeSeriesRow], metrics: &Metrics) -> String {
    let mut out = String::from("t");
    let columns = [
        (metrics.e_mu_norm, "e_mu_norm"),
        (metrics.e_sigma_norm, "e_sigma_fro"),
        (metrics.nu_minus, "nu_minus"),
        (metrics.nu_minus, "nu_minus_plant"),
        (metrics.nu_minus, "nu_minus_observer"),
        (metrics.fidelity, "fidelity"),
    ];
    for (on, name) in columns {
        if on {
            out.push(',');
            out.push_str(name);
        }
    }
    out.push('\n');
    for r in rows {
        write!(out, "{:.11e}", r.t).expect("writing to a String");
        let values =
            [Some(r.e_mu_norm), Some(r.e_sigma_fro), r.nu_minus, r.nu_minus_plant, r.nu_minus_observer, r.fidelity];
        for ((on, _), v) in columns.iter().zip(values) {
            if *on {
                cell(&mut out, v);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rows: &[TimeSeriesRow], metrics: &Metrics) -> CliResult<()> {
    fs::write(path, to_csv(rows, metrics)).map_err(|e| CliError::io(path, e))
}
