//! JSON experiment configuration.
//!
//! Real matrices are row-major arrays of arrays. Validation errors carry the
//! dotted path of the offending field.

use std::fs;
use std::path::Path;

use cohobs_core::{MomentStateF64, QuadratureSystem, QuadratureSystemF64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SAMPLE_STRIDE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mt,
    Cmt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub plant: RawPlant,
    #[serde(default)]
    pub observer: Option<RawObserver>,
    #[serde(default)]
    pub simulation: Option<RawSimulation>,
    #[serde(default)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPlant {
    pub n_x: usize,
    pub n_w: usize,
    pub n_y: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D", default)]
    pub d: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObserver {
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub mode: Mode,
    #[serde(default)]
    pub n_yo: Option<usize>,
    #[serde(rename = "B_o", default)]
    pub b_o: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    pub t_final: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub sample_stride: Option<usize>,
    pub mu_p0: Vec<f64>,
    pub mu_o0: Vec<f64>,
    pub sigma_p0: Vec<Vec<f64>>,
    pub sigma_o0: Vec<Vec<f64>>,
    #[serde(default)]
    pub sigma_po0: Option<Vec<Vec<f64>>>,
}

/// Which CSV columns to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Metrics {
    pub e_sigma_norm: bool,
    pub e_mu_norm: bool,
    pub nu_minus: bool,
    pub fidelity: bool,
}

impl Default for Metrics {
    fn default() -> Self {
        Self { e_sigma_norm: true, e_mu_norm: true, nu_minus: true, fidelity: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverSpec {
    pub k: DMatrix<f64>,
    pub mode: Mode,
    pub n_yo: Option<usize>,
    pub b_o: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub t_final: f64,
    pub dt: f64,
    pub sample_stride: usize,
    pub init: MomentStateF64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub plant: QuadratureSystemF64,
    pub observer: Option<ObserverSpec>,
    pub simulation: Option<SimulationSpec>,
    pub metrics: Metrics,
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// Parses configuration text; `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> CliResult<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    raw.validate()
}

pub fn matrix_from_rows(path: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> CliResult<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(CliError::validation(path, format!("expected {nrows} rows, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(CliError::validation(
                format!("{path}[{i}]"),
                format!("expected {ncols} columns, found {}", row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(CliError::validation(format!("{path}[{i}][{j}]"), "entry is not finite"));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Matrix whose column count is taken from the data.
fn matrix_with_rows(path: &str, rows: &[Vec<f64>], nrows: usize) -> CliResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    matrix_from_rows(path, rows, nrows, ncols)
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector(path: &str, v: &[f64], n: usize) -> CliResult<DVector<f64>> {
    if v.len() != n {
        return Err(CliError::validation(path, format!("expected length {n}, found {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::validation(path, "entry is not finite"));
    }
    Ok(DVector::from_column_slice(v))
}

fn symmetric(path: &str, rows: &[Vec<f64>], n: usize) -> CliResult<DMatrix<f64>> {
    let m = matrix_from_rows(path, rows, n, n)?;
    let asym = (&m - m.transpose()).amax();
    if asym > 1e-12 * (1.0 + m.amax()) {
        return Err(CliError::validation(path, format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(m)
}

impl RawConfig {
    pub fn validate(&self) -> CliResult<ExperimentConfig> {
        let p = &self.plant;
        for (field, v) in [("plant.n_x", p.n_x), ("plant.n_w", p.n_w), ("plant.n_y", p.n_y)] {
            if v == 0 || v % 2 != 0 {
                return Err(CliError::validation(field, format!("must be even and positive, got {v}")));
            }
        }
        let a = matrix_from_rows("plant.A", &p.a, p.n_x, p.n_x)?;
        let b = matrix_from_rows("plant.B", &p.b, p.n_x, p.n_w)?;
        let c = matrix_from_rows("plant.C", &p.c, p.n_y, p.n_x)?;
        let plant = match &p.d {
            Some(d) => QuadratureSystem::new(a, b, c, matrix_from_rows("plant.D", d, p.n_y, p.n_w)?),
            None => QuadratureSystem::with_standard_feedthrough(a, b, c),
        }
        .map_err(|e| CliError::validation("plant", e.to_string()))?;

        let observer = match &self.observer {
            None => None,
            Some(o) => {
                let k = matrix_from_rows("observer.K", &o.k, p.n_x, p.n_y)?;
                if let Some(n) = o.n_yo {
                    if n == 0 || n % 2 != 0 {
                        return Err(CliError::validation(
                            "observer.n_yo",
                            format!("must be even and positive, got {n}"),
                        ));
                    }
                }
                let b_o = match &o.b_o {
                    Some(rows) => {
                        let m = matrix_with_rows("observer.B_o", rows, p.n_x)?;
                        if m.ncols() % 2 != 0 {
                            return Err(CliError::validation("observer.B_o", "column count must be even"));
                        }
                        Some(m)
                    }
                    None => None,
                };
                Some(ObserverSpec { k, mode: o.mode, n_yo: o.n_yo, b_o })
            }
        };

        let simulation = match &self.simulation {
            None => None,
            Some(s) => {
                let n = p.n_x;
                let dt = s.dt.unwrap_or(DEFAULT_DT);
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(CliError::validation("simulation.dt", format!("must be positive, got {dt}")));
                }
                if !(s.t_final >= 0.0 && s.t_final.is_finite()) {
                    return Err(CliError::validation("simulation.t_final", "must be finite and non-negative"));
                }
                let stride = s.sample_stride.unwrap_or(DEFAULT_SAMPLE_STRIDE);
                if stride == 0 {
                    return Err(CliError::validation("simulation.sample_stride", "must be at least 1"));
                }
                let sigma_po = match &s.sigma_po0 {
                    Some(rows) => matrix_from_rows("simulation.sigma_po0", rows, n, n)?,
                    None => DMatrix::zeros(n, n),
                };
                let init = MomentStateF64::new(
                    0.0,
                    vector("simulation.mu_p0", &s.mu_p0, n)?,
                    vector("simulation.mu_o0", &s.mu_o0, n)?,
                    symmetric("simulation.sigma_p0", &s.sigma_p0, n)?,
                    sigma_po,
                    symmetric("simulation.sigma_o0", &s.sigma_o0, n)?,
                    1e-12,
                )
                .map_err(|e| CliError::validation("simulation", e.to_string()))?;
                Some(SimulationSpec { t_final: s.t_final, dt, sample_stride: stride, init })
            }
        };

        Ok(ExperimentConfig { name: self.name.clone(), plant, observer, simulation, metrics: self.metrics })
    }
}

impl ExperimentConfig {
    pub fn with_dt(mut self, dt: Option<f64>) -> CliResult<Self> {
        if let Some(dt) = dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::validation("--dt", format!("must be positive, got {dt}")));
            }
            if let Some(sim) = self.simulation.as_mut() {
                sim.dt = dt;
            }
        }
        Ok(self)
    }
}
