use cohobs_core::quadrature::DEFAULT_HURWITZ_MARGIN;
use cohobs_core::{check_physical_realizability, detectability_check, is_hurwitz, QuadratureSystemF64};
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub n_x: usize,
    pub n_w: usize,
    pub n_y: usize,
    pub realizable: bool,
    pub residual_a: f64,
    pub residual_b: f64,
    pub tolerance: f64,
    pub detectable: bool,
    pub hurwitz: bool,
    pub max_real_part: f64,
}

pub fn check_plant(plant: &QuadratureSystemF64, tol: f64) -> CliResult<CheckSummary> {
    let rep = check_physical_realizability(plant, tol);
    let detectable = detectability_check(plant.a(), plant.c(), DEFAULT_HURWITZ_MARGIN)
        .map_err(|e| CliError::from_core("plant", e))?;
    let h = is_hurwitz(plant.a(), DEFAULT_HURWITZ_MARGIN).map_err(|e| CliError::from_core("plant", e))?;
    Ok(CheckSummary {
        n_x: plant.n_x(),
        n_w: plant.n_w(),
        n_y: plant.n_y(),
        realizable: rep.passed,
        residual_a: rep.residual_a,
        residual_b: rep.residual_b,
        tolerance: rep.tolerance,
        detectable,
        hurwitz: h.stable,
        max_real_part: h.max_real_part,
    })
}

impl CheckSummary {
    pub fn render(&self) -> String {
        let yn = |b: bool| if b { "pass" } else { "FAIL" };
        format!(
            "plant: n_x = {}, n_w = {}, n_y = {}\n\
             realizability: {} (residual_a = {:.3e}, residual_b = {:.3e}, tol = {:.1e})\n\
             detectable: {}\n\
             hurwitz: {} (max real part {:.6})\n",
            self.n_x,
            self.n_w,
            self.n_y,
            yn(self.realizable),
            self.residual_a,
            self.residual_b,
            self.tolerance,
            yn(self.detectable),
            if self.hurwitz { "yes" } else { "no" },
            self.max_real_part
        )
    }
}
