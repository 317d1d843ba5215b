//! Scenario files, seeded sweeps over (h, T, seed), metric frames and their outputs.

mod frame;
mod run;
mod scenario;

use std::path::Path;

use thiserror::Error;

pub use frame::{quantile, Aggregate, MetricFrame, MetricRecord};
pub use run::{run_convergence_study, run_scenario, CellResult, ConvergenceStudy, ExceedanceRow};
pub use scenario::{
    load_instance, scenario_hash, Grid, InstanceRef, Metric, Outputs, PolicySpec, ReferenceSpec, Scenario, ScenarioPlan,
    SeedGrid,
};

use crate::engine::{write_trajectories_csv, EngineError};
use crate::indices::IndexError;
use crate::lp::LpError;
use crate::model::ValidationReport;
use crate::qlearn::QError;

/// Git-describe-style tag of the build, stamped on every record.
pub const VERSION: &str = env!("WCG_VERSION");

fn line_suffix(line: &Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}{}: {message}", line_suffix(.line))]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("instance failed validation:\n{0}")]
    Instance(ValidationReport),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for bad input, 3 for solver failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } | HarnessError::Invalid { .. } | HarnessError::Instance(_) => 2,
            HarnessError::Solver(_) => 3,
            HarnessError::Engine(_) | HarnessError::Io(_) => 1,
        }
    }
}

impl From<LpError> for HarnessError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Engine(e) => HarnessError::Engine(e),
            other => HarnessError::Solver(other.to_string()),
        }
    }
}

impl From<IndexError> for HarnessError {
    fn from(e: IndexError) -> Self {
        HarnessError::Solver(e.to_string())
    }
}

impl From<QError> for HarnessError {
    fn from(e: QError) -> Self {
        HarnessError::Solver(e.to_string())
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Writes the records CSV, the aggregates JSON and, when configured, the trajectories.
pub fn write_outputs(
    dir: &Path,
    outputs: &Outputs,
    frame: &MetricFrame,
    cells: &[CellResult],
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let records = dir.join(&outputs.records);
    let file = std::fs::File::create(&records).map_err(|e| io(&records, e))?;
    frame.write_csv(std::io::BufWriter::new(file)).map_err(|e| io(&records, e))?;
    let aggregates = dir.join(&outputs.aggregates);
    std::fs::write(&aggregates, frame.aggregates_json()).map_err(|e| io(&aggregates, e))?;
    if let Some(name) = &outputs.trajectories {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| io(&path, e))?;
        let runs: Vec<(usize, &crate::engine::Trajectory)> = cells.iter().map(|c| &c.trajectory).enumerate().collect();
        write_trajectories_csv(std::io::BufWriter::new(file), &runs).map_err(|e| io(&path, e))?;
    }
    Ok(())
}
