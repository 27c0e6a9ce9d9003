use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::verify::ConvergenceReport;

use super::config::{ConvergeQuantity, ScenarioConfig};
use super::run::{simulate, RunData};

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub level: u32,
    pub n: Vec<usize>,
    pub dx: f64,
    pub dt: f64,
    pub error: f64,
    pub seconds: f64,
}

/// Per-level errors and the fitted order for one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceOutcome {
    pub scenario: String,
    pub quantity: String,
    pub levels: Vec<LevelResult>,
    pub report: ConvergenceReport,
}

fn quantity_label(q: ConvergeQuantity) -> String {
    match q {
        ConvergeQuantity::Residual(c) => format!("residual_{}", c.tag()),
        ConvergeQuantity::OracleError => "oracle_error".into(),
    }
}

fn measure(q: ConvergeQuantity, data: &RunData) -> Result<f64> {
    let name = match q {
        ConvergeQuantity::Residual(c) => format!("residual_L2_{}", c.tag()),
        ConvergeQuantity::OracleError => "oracle_error".into(),
    };
    let (_, values) = data.series.present(&name);
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!("run recorded no `{name}` values")));
    }
    Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Runs the scenario at `levels` resolutions, each halving `dx` and `dt`,
/// and fits the observed order of the configured quantity.
pub fn converge(cfg: &ScenarioConfig, levels: u32) -> Result<ConvergenceOutcome> {
    if levels < 3 {
        return Err(Error::config("--levels", "need at least 3 resolutions"));
    }
    let configs: Vec<ScenarioConfig> = (0..levels).map(|l| cfg.refined(l)).collect();
    for c in &configs {
        c.check_stability()?;
    }
    let q = cfg.converge_quantity;
    let results = exec::map_jobs(configs, |c| -> Result<(ScenarioConfig, f64, f64)> {
        let data = simulate(&c)?;
        Ok((c, measure(q, &data)?, data.seconds))
    });
    let mut levels_out = Vec::new();
    for (level, r) in results.into_iter().enumerate() {
        let (c, error, seconds) = r?;
        let grid = c.grid.build()?;
        levels_out.push(LevelResult {
            level: level as u32,
            n: c.grid.n[..c.grid.dim].to_vec(),
            dx: grid.min_spacing(),
            dt: c.dt,
            error,
            seconds,
        });
    }
    let report = ConvergenceReport::fit(
        levels_out.iter().map(|l| l.dx).collect(),
        levels_out.iter().map(|l| l.error).collect(),
        cfg.converge_target,
    )?;
    Ok(ConvergenceOutcome {
        scenario: cfg.id.clone(),
        quantity: quantity_label(q),
        levels: levels_out,
        report,
    })
}

impl ConvergenceOutcome {
    /// Writes `convergence.csv` and `convergence.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("level,dx,dt,error\n");
        for l in &self.levels {
            let _ = writeln!(csv, "{},{},{},{}", l.level, l.dx, l.dt, l.error);
        }
        std::fs::write(dir.join("convergence.csv"), csv)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("convergence.json"), json + "\n")?;
        Ok(())
    }
}
