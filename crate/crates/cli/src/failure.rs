use std::fmt;

use pilotwave::constraints::ConstraintError;
use pilotwave::equilibrium::EquilibriumError;
use pilotwave::io::ConfigLoadError;
use pilotwave::{DynamicsError, EvalError, ParamError};

/// A command failure, split by exit code: bad input (1) or a numerical
/// failure during an otherwise valid run (2).
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Failure::Validation(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Failure::Numerical(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<ConfigLoadError> for Failure {
    fn from(e: ConfigLoadError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Validation(format!("json: {e}"))
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::WrongKind { .. } | EvalError::OutOfBox { .. } | EvalError::SlitSingularity { .. } => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidSettings(_) | DynamicsError::KindMismatch { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<ConstraintError> for Failure {
    fn from(e: ConstraintError) -> Self {
        match e {
            ConstraintError::Param(p) => p.into(),
            ConstraintError::Eval(ev) => ev.into(),
            ConstraintError::Dynamics(d) => d.into(),
            ConstraintError::GridTooCoarse { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<EquilibriumError> for Failure {
    fn from(e: EquilibriumError) -> Self {
        match e {
            EquilibriumError::Dynamics(d) => d.into(),
            EquilibriumError::Constraint(c) => c.into(),
            EquilibriumError::TooManyFailures { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}
