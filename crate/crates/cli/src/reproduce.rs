//! Built-in example configurations and the `reproduce` bundles.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cohobs_core::{
    build_joint_system, mt_synthesize, theorem1_limit, validate_gain, QuadratureSystemF64, SynthesisOptions,
};
use nalgebra::DMatrix;

use crate::artifact::{synthesize, write_artifact};
use crate::config::{parse_config, ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};
use crate::simulate::{simulate, write_csv};

pub const EX1_CMT: &str = include_str!("../configs/ex1_cmt.json");
pub const EX1_MT: &str = include_str!("../configs/ex1_mt.json");
pub const EX1_CMT_K3: &str = include_str!("../configs/ex1_cmt_k3.json");
pub const EX2_CMT: &str = include_str!("../configs/ex2_cmt.json");
pub const EX3_MT: &str = include_str!("../configs/ex3_mt.json");

/// Diagonal gain entries for the Example 3 grid.
pub const EX3_GAIN_LEVELS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

/// Parses one of the embedded configurations.
pub fn builtin(text: &str, name: &str) -> ExperimentConfig {
    parse_config(text, name).unwrap_or_else(|e| panic!("embedded config {name} is invalid: {e}"))
}

/// `diag(a, b)` over every pair of levels, which includes `I` and its multiples.
pub fn ex3_gain_grid() -> Vec<DMatrix<f64>> {
    EX3_GAIN_LEVELS
        .iter()
        .flat_map(|&a| EX3_GAIN_LEVELS.iter().map(move |&b| DMatrix::from_diagonal(&nalgebra::dvector![a, b])))
        .collect()
}

/// Final-value diagnostics of `Σ_o − Σ_p` for one MT observer.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub k: DMatrix<f64>,
    pub hurwitz_margin: f64,
    pub limit_norm: f64,
    pub converged: bool,
    pub direct: bool,
    pub satisfied: bool,
}

pub fn limit_diagnostics(
    plant: &QuadratureSystemF64,
    gains: &[DMatrix<f64>],
    opts: &SynthesisOptions,
) -> CliResult<Vec<LimitRow>> {
    gains
        .iter()
        .map(|k| {
            let gain = validate_gain(plant, k).map_err(|e| CliError::from_core("K", e))?;
            let obs = mt_synthesize(plant, k, opts).map_err(|e| CliError::from_core("K", e))?;
            let joint = build_joint_system(plant, &obs).map_err(|e| CliError::from_core("K", e))?;
            let lim = theorem1_limit(&joint).map_err(|e| CliError::from_core("K", e))?;
            Ok(LimitRow {
                k: k.clone(),
                hurwitz_margin: -gain.hurwitz.max_real_part,
                limit_norm: lim.value.norm(),
                converged: lim.converged,
                direct: lim.direct,
                satisfied: lim.is_satisfied(1e-6),
            })
        })
        .collect()
}

pub fn limit_csv(rows: &[LimitRow]) -> String {
    let mut out = String::from("k11,k12,k21,k22,hurwitz_margin,limit_norm,converged,direct,satisfied\n");
    for r in rows {
        writeln!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{},{},{}",
            r.k[(0, 0)],
            r.k[(0, 1)],
            r.k[(1, 0)],
            r.k[(1, 1)],
            r.hurwitz_margin,
            r.limit_norm,
            r.converged,
            r.direct,
            r.satisfied
        )
        .expect("writing to a String");
    }
    out
}

fn write(path: PathBuf, text: &str) -> CliResult<()> {
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Writes config, synthesis artifact and (when simulated) CSV for one run.
fn run_bundle(
    out_dir: &Path,
    stem: &str,
    text: &str,
    dt: Option<f64>,
    opts: &SynthesisOptions,
    log: &mut Vec<String>,
) -> CliResult<()> {
    write(out_dir.join(format!("{stem}.json")), text)?;
    let cfg = builtin(text, stem).with_dt(dt)?;
    let synth = synthesize(&cfg, None, opts)?;
    write_artifact(&out_dir.join(format!("{stem}_synthesis.json")), &synth.artifact)?;
    log.push(format!("{stem}: synthesis {}", synth.artifact.verdict));
    if let Some(msg) = &synth.artifact.message {
        log.push(format!("{stem}:   {msg}"));
    }
    if cfg.simulation.is_some() && synth.observer.is_some() {
        let sim = simulate(&cfg, opts)?;
        write_csv(&out_dir.join(format!("{stem}.csv")), &sim.rows, &cfg.metrics)?;
        let last = sim.rows.last().expect("at least the initial sample");
        log.push(format!(
            "{stem}: t = {:.3}, |e_mu| = {:.3e}, |e_sigma|_F = {:.3e}, {} samples",
            last.t,
            last.e_mu_norm,
            last.e_sigma_fro,
            sim.rows.len()
        ));
    }
    Ok(())
}

/// Regenerates every artifact of one example into `out_dir` and returns a
/// human-readable summary.
pub fn reproduce(example: Example, out_dir: &Path, dt: Option<f64>, opts: &SynthesisOptions) -> CliResult<Vec<String>> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut log = Vec::new();
    match example {
        Example::Ex1 => {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            let (ra, rb) = std::thread::scope(|s| {
                let ha = s.spawn(|| run_bundle(out_dir, "ex1_cmt", EX1_CMT, dt, opts, &mut a));
                let hb = s.spawn(|| run_bundle(out_dir, "ex1_mt", EX1_MT, dt, opts, &mut b));
                (ha.join().expect("ex1 cmt run"), hb.join().expect("ex1 mt run"))
            });
            ra?;
            rb?;
            log.append(&mut a);
            log.append(&mut b);
            run_bundle(out_dir, "ex1_cmt_k3", EX1_CMT_K3, dt, opts, &mut log)?;
        }
        Example::Ex2 => run_bundle(out_dir, "ex2_cmt", EX2_CMT, dt, opts, &mut log)?,
        Example::Ex3 => {
            run_bundle(out_dir, "ex3_mt", EX3_MT, dt, opts, &mut log)?;
            let cfg = builtin(EX3_MT, "ex3_mt");
            let cmt = synthesize(&cfg, Some(Mode::Cmt), opts)?;
            write_artifact(&out_dir.join("ex3_cmt_synthesis.json"), &cmt.artifact)?;
            log.push(format!("ex3_cmt: synthesis {}", cmt.artifact.verdict));
            if let Some(msg) = &cmt.artifact.message {
                log.push(format!("ex3_cmt:   {msg}"));
            }
            let rows = limit_diagnostics(&cfg.plant, &ex3_gain_grid(), opts)?;
            write(out_dir.join("ex3_limit_grid.csv"), &limit_csv(&rows))?;
            let unsatisfied = rows.iter().filter(|r| !r.satisfied).count();
            log.push(format!(
                "ex3_limit_grid: {unsatisfied} of {} gains leave a nonzero covariance gap (min norm {:.3e})",
                rows.len(),
                rows.iter().map(|r| r.limit_norm).fold(f64::INFINITY, f64::min)
            ));
        }
    }
    Ok(log)
}
