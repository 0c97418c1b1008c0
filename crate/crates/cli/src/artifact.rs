//! Synthesis artifacts: the observer matrices and the feasibility report as JSON.

use std::fs;
use std::path::Path;

use cohobs_core::{
    cmt_design, mt_design, ObserverModelF64, QuadratureSystemF64, SynthesisOptions, SynthesisReportF64, Verdict,
};
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::config::{matrix_from_rows, rows_of, ExperimentConfig, Mode, RawPlant};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ComplexMatrixJson {
    pub fn from_matrix(m: &DMatrix<Complex<f64>>) -> Self {
        Self { re: rows_of(&m.map(|z| z.re)), im: rows_of(&m.map(|z| z.im)) }
    }

    pub fn to_matrix(&self, path: &str, nrows: usize, ncols: usize) -> CliResult<DMatrix<Complex<f64>>> {
        let re = matrix_from_rows(&format!("{path}.re"), &self.re, nrows, ncols)?;
        let im = matrix_from_rows(&format!("{path}.im"), &self.im, nrows, ncols)?;
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| Complex::new(re[(i, j)], im[(i, j)])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictJson {
    Feasible,
    Infeasible,
    PreconditionFailed,
}

impl std::fmt::Display for VerdictJson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Feasible => "feasible",
            Self::Infeasible => "infeasible",
            Self::PreconditionFailed => "precondition failed",
        })
    }
}

impl From<Verdict> for VerdictJson {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Feasible => Self::Feasible,
            Verdict::Infeasible => Self::Infeasible,
            Verdict::PreconditionFailed => Self::PreconditionFailed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverJson {
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "B_o")]
    pub b_o: Vec<Vec<f64>>,
    #[serde(rename = "C_o")]
    pub c_o: Vec<Vec<f64>>,
    #[serde(rename = "D_o")]
    pub d_o: Vec<Vec<f64>>,
    #[serde(rename = "Lambda_o", default, skip_serializing_if = "Option::is_none")]
    pub lambda_o: Option<ComplexMatrixJson>,
    pub n_wo: usize,
    pub n_yo: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualsJson {
    pub realizability_a: Option<f64>,
    pub realizability_b: Option<f64>,
    pub noise_gram: Option<f64>,
    pub commutator: Option<f64>,
    pub hermiticity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisArtifact {
    pub name: Option<String>,
    pub mode: Mode,
    pub verdict: VerdictJson,
    pub feasible: bool,
    pub hurwitz_margin: f64,
    pub psd_min_eigenvalue: Option<f64>,
    pub sigma_gap: Option<Vec<Vec<f64>>>,
    pub required_noise_gram: Option<Vec<Vec<f64>>>,
    pub coupling_gram: Option<ComplexMatrixJson>,
    pub residuals: ResidualsJson,
    pub message: Option<String>,
    pub plant: RawPlant,
    pub observer: Option<ObserverJson>,
}

pub fn plant_json(plant: &QuadratureSystemF64) -> RawPlant {
    RawPlant {
        n_x: plant.n_x(),
        n_w: plant.n_w(),
        n_y: plant.n_y(),
        a: rows_of(plant.a()),
        b: rows_of(plant.b()),
        c: rows_of(plant.c()),
        d: Some(rows_of(plant.d())),
    }
}

fn observer_json(obs: &ObserverModelF64) -> ObserverJson {
    ObserverJson {
        k: rows_of(obs.k()),
        b_o: rows_of(obs.b_o()),
        c_o: rows_of(obs.c_o()),
        d_o: rows_of(obs.d_o()),
        lambda_o: obs.lambda_o().map(ComplexMatrixJson::from_matrix),
        n_wo: obs.n_wo(),
        n_yo: obs.n_yo(),
    }
}

fn artifact(
    cfg: &ExperimentConfig,
    mode: Mode,
    report: &SynthesisReportF64,
    obs: Option<&ObserverModelF64>,
) -> SynthesisArtifact {
    let r = &report.residuals;
    SynthesisArtifact {
        name: cfg.name.clone(),
        mode,
        verdict: report.verdict.into(),
        feasible: report.feasible,
        hurwitz_margin: report.hurwitz_margin,
        psd_min_eigenvalue: report.psd_min_eigenvalue,
        sigma_gap: report.sigma_gap.as_ref().map(rows_of),
        required_noise_gram: report.required_noise_gram.as_ref().map(rows_of),
        coupling_gram: report.coupling_gram.as_ref().map(ComplexMatrixJson::from_matrix),
        residuals: ResidualsJson {
            realizability_a: r.realizability_a,
            realizability_b: r.realizability_b,
            noise_gram: r.noise_gram,
            commutator: r.commutator,
            hermiticity: r.hermiticity,
        },
        message: report.message.clone(),
        plant: plant_json(&cfg.plant),
        observer: obs.map(observer_json),
    }
}

/// Outcome of a synthesis run; `observer` is present exactly when feasible.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub observer: Option<ObserverModelF64>,
    pub report: SynthesisReportF64,
    pub artifact: SynthesisArtifact,
}

/// Synthesises an observer for the configured gain. A user-supplied `B_o`
/// is validated and used as-is in MT mode.
pub fn synthesize(cfg: &ExperimentConfig, mode: Option<Mode>, opts: &SynthesisOptions) -> CliResult<Synthesis> {
    let spec = cfg
        .observer
        .as_ref()
        .ok_or_else(|| CliError::validation("observer", "configuration has no observer section"))?;
    let mode = mode.unwrap_or(spec.mode);
    let opts = SynthesisOptions { n_yo: spec.n_yo.or(opts.n_yo), ..*opts };
    let plant = &cfg.plant;
    let (observer, report) = match mode {
        Mode::Mt => {
            mt_design(plant, &spec.k, spec.b_o.clone(), &opts).map_err(|e| CliError::from_core("observer", e))?
        }
        Mode::Cmt => {
            if spec.b_o.is_some() {
                log::warn!("observer.B_o is ignored in cmt mode; the noise matrix is synthesised");
            }
            let design = cmt_design(plant, &spec.k, &opts).map_err(|e| CliError::from_core("observer", e))?;
            (design.observer, design.report)
        }
    };
    let artifact = artifact(cfg, mode, &report, observer.as_ref());
    Ok(Synthesis { observer, report, artifact })
}

pub fn write_artifact(path: &Path, artifact: &SynthesisArtifact) -> CliResult<()> {
    let text = serde_json::to_string_pretty(artifact).expect("artifact serialises");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_artifact(path: &Path) -> CliResult<SynthesisArtifact> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })
}

/// Rebuilds the plant and observer from an artifact, re-checking the
/// observer realizability identities at `tol`.
pub fn reload_observer(artifact: &SynthesisArtifact, tol: f64) -> CliResult<(QuadratureSystemF64, ObserverModelF64)> {
    let p = &artifact.plant;
    let a = matrix_from_rows("plant.A", &p.a, p.n_x, p.n_x)?;
    let b = matrix_from_rows("plant.B", &p.b, p.n_x, p.n_w)?;
    let c = matrix_from_rows("plant.C", &p.c, p.n_y, p.n_x)?;
    let plant = match &p.d {
        Some(d) => QuadratureSystemF64::new(a, b, c, matrix_from_rows("plant.D", d, p.n_y, p.n_w)?),
        None => QuadratureSystemF64::with_standard_feedthrough(a, b, c),
    }
    .map_err(|e| CliError::validation("plant", e.to_string()))?;
    let o =
        artifact.observer.as_ref().ok_or_else(|| CliError::validation("observer", "artifact carries no observer"))?;
    let k = matrix_from_rows("observer.K", &o.k, p.n_x, p.n_y)?;
    let b_o = matrix_from_rows("observer.B_o", &o.b_o, p.n_x, o.n_wo)?;
    let lambda_o = match &o.lambda_o {
        Some(l) => Some(l.to_matrix("observer.Lambda_o", o.n_wo / 2, p.n_x)?),
        None => None,
    };
    let obs =
        ObserverModelF64::new(&plant, k, b_o, o.n_yo, lambda_o, tol).map_err(|e| CliError::from_core("observer", e))?;
    let stored_c = matrix_from_rows("observer.C_o", &o.c_o, o.n_yo, p.n_x)?;
    if (obs.c_o() - stored_c).amax() > tol {
        return Err(CliError::validation("observer.C_o", "does not match the matrix derived from K and B_o"));
    }
    Ok((plant, obs))
}
