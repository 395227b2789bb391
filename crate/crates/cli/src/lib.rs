//! Library side of the `ecolayout` command: file loading, the offline solve
//! chain, SVG and log rendering, benchmarks and the oracle comparison.

pub mod bench;
pub mod oracle;
pub mod render;

use ecolayout_core::layout::LayoutError;
use ecolayout_core::model::validate_session;
use ecolayout_core::{DisplayEcology, EngineParams, LayoutEngine, LayoutResult, QualityWeights, SessionModel, StepInput};
use std::fmt;
use std::path::Path;

/// Exit code for unreadable or invalid input.
pub const EXIT_INVALID: i32 = 1;
/// Exit code when no feasible layout exists.
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;
/// Exit code when the engine falls short of the oracle.
pub const EXIT_ORACLE: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<LayoutError> for CliError {
    fn from(e: LayoutError) -> Self {
        let code = match &e {
            LayoutError::NoConnectedDisplay | LayoutError::InfeasibleStep(_) | LayoutError::InfeasibleDisplay(_) => {
                EXIT_INFEASIBLE
            }
            LayoutError::TooLarge { .. } | LayoutError::Model(_) | LayoutError::Quality(_) => EXIT_INVALID,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

/// Reads and validates a session file.
pub fn load_session(path: &Path) -> Result<SessionModel, CliError> {
    let mut model =
        SessionModel::from_json(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    let report = validate_session(&model);
    if !report.is_valid() {
        return Err(CliError::invalid(format!("{}:\n{report}", path.display())));
    }
    model.normalize();
    Ok(model)
}

/// Reads and validates an ecology file.
pub fn load_ecology(path: &Path) -> Result<DisplayEcology, CliError> {
    let eco =
        DisplayEcology::from_json(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    eco.validate()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    Ok(eco)
}

/// Parses `a,b,g`.
pub fn parse_weights(text: &str) -> Result<QualityWeights, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::invalid(format!("weights {text:?}: {e}")))?;
    let [a, b, g] = parts[..] else {
        return Err(CliError::invalid(format!("weights {text:?}: expected three values a,b,g")));
    };
    let w = QualityWeights::new(a, b, g);
    w.validate().map_err(|e| CliError::invalid(format!("weights {text:?}: {e}")))?;
    Ok(w)
}

/// Solves steps `1..=step`, each anchored on the previous one, and returns
/// the layout of `step`.
pub fn solve_chain(
    model: &SessionModel,
    ecology: &DisplayEcology,
    weights: &QualityWeights,
    step: usize,
    params: EngineParams,
) -> Result<LayoutResult, CliError> {
    let layers = model.layer_count();
    if step == 0 || step > layers {
        return Err(CliError::invalid(format!("step {step} out of range (session has {layers} layers)")));
    }
    let engine = LayoutEngine::new(params);
    let mut prev: Option<LayoutResult> = None;
    for s in 1..=step {
        let input = StepInput::new(model, s, ecology, weights).with_prev(prev.as_ref());
        prev = Some(engine.solve_step(&input)?);
    }
    Ok(prev.expect("at least one step"))
}
