use std::process::Command;

use thiserror::Error;

use crate::milp::MilpModel;
use crate::solver::{export_lp, import_solution, LpParseError, Solution};

/// Command template with `{lp}` and `{sol}` placeholders.
pub const EXTERNAL_SOLVER_ENV: &str = "HETMAP_EXTERNAL_SOLVER";

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("{EXTERNAL_SOLVER_ENV} is not set")]
    Unset,
    #[error("solver template lacks {0}")]
    Placeholder(&'static str),
    #[error("solver command failed: {0}")]
    Failed(String),
    #[error("cannot read solver output: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] LpParseError),
}

/// Writes the model to a temporary LP file, runs the command named by
/// [`EXTERNAL_SOLVER_ENV`] through the shell and imports its solution file.
pub fn run_external(model: &MilpModel) -> Result<Solution, ExternalError> {
    let template = std::env::var(EXTERNAL_SOLVER_ENV).map_err(|_| ExternalError::Unset)?;
    run_template(model, &template)
}

pub(crate) fn run_template(model: &MilpModel, template: &str) -> Result<Solution, ExternalError> {
    for key in ["{lp}", "{sol}"] {
        if !template.contains(key) {
            return Err(ExternalError::Placeholder(key));
        }
    }
    let dir = std::env::temp_dir().join(format!("hetmap-{}-{}", std::process::id(), unique()));
    std::fs::create_dir_all(&dir)?;
    let lp = dir.join("model.lp");
    let sol = dir.join("model.sol");
    std::fs::write(&lp, export_lp(model))?;
    let command = template.replace("{lp}", &lp.display().to_string()).replace("{sol}", &sol.display().to_string());
    let result = (|| {
        let out = Command::new("sh").arg("-c").arg(&command).output()?;
        if !out.status.success() {
            return Err(ExternalError::Failed(String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        let text = std::fs::read_to_string(&sol)?;
        Ok(import_solution(&text, model)?)
    })();
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn unique() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static NEXT: AtomicU64 = AtomicU64::new(0);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, VarKind};
    use crate::solver::Status;

    fn tiny() -> MilpModel {
        let mut m = MilpModel::default();
        let a = m.add_var("a", VarKind::Binary, 0.0, 1.0).unwrap();
        m.add_constraint("one", vec![(a, 1.0)], Sense::Ge, 1.0).unwrap();
        m.set_objective(vec![(a, 2.0)]).unwrap();
        m
    }

    #[test]
    fn shell_template_round_trip() {
        let sol = run_template(&tiny(), "grep -q one {lp} && echo 'a 1' > {sol}").unwrap();
        assert_eq!(sol.status, Status::Feasible);
        assert_eq!(sol.objective, 2.0);
    }

    #[test]
    fn missing_placeholder_and_failure() {
        assert!(matches!(run_template(&tiny(), "true {lp}"), Err(ExternalError::Placeholder("{sol}"))));
        assert!(matches!(run_template(&tiny(), "false {lp} {sol}"), Err(ExternalError::Failed(_))));
    }
}
