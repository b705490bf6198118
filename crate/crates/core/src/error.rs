use std::fmt;

use thiserror::Error;

/// Solvability condition a design step can fail on.
///
/// The data-driven labels follow the leader (`i*`) and follower (`ii*`)
/// conditions: rank, stabilizability, regulator equations. The model-based
/// labels cover stabilizability of `(A_i, B_i)`, the leader and follower
/// regulator equations, and the two observer designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Condition {
    Ia,
    Ib,
    Ic,
    IIa,
    IIb,
    IIc,
    ModelStabilizable,
    ModelLeaderRegulator,
    ModelFollowerRegulator,
    ObserverL,
    ObserverH,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Ia => "ia",
            Condition::Ib => "ib",
            Condition::Ic => "ic",
            Condition::IIa => "iia",
            Condition::IIb => "iib",
            Condition::IIc => "iic",
            Condition::ModelStabilizable => "model-i (stabilizable pair)",
            Condition::ModelLeaderRegulator => "model-ii (leader regulator equations)",
            Condition::ModelFollowerRegulator => "model-iii (follower regulator equations)",
            Condition::ObserverL => "observer-L (S+LR Schur)",
            Condition::ObserverH => "observer-H (S-lambda*HR Schur)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("no stabilizing gain found: {0}")]
    NotStabilizable(String),
    #[error("agent {agent}: data not informative, condition {condition} fails ({detail})")]
    NotInformative {
        agent: usize,
        condition: Condition,
        detail: String,
    },
    #[error("agent {agent}: regulator equations infeasible, condition {condition} fails (residual {residual:.3e})")]
    Infeasible {
        agent: usize,
        condition: Condition,
        residual: f64,
    },
    #[error("agent {agent}: {condition} failed: {detail}")]
    Synthesis {
        agent: usize,
        condition: Condition,
        detail: String,
    },
    #[error("observer design failed: {0}")]
    DesignFailed(String),
    #[error("{condition} failed: {detail}")]
    Observer { condition: Condition, detail: String },
    #[error("rank precondition unmet: {0}")]
    RankPrecondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Solvability condition attached to the error, if any.
    pub fn condition(&self) -> Option<Condition> {
        match self {
            Error::NotInformative { condition, .. }
            | Error::Infeasible { condition, .. }
            | Error::Synthesis { condition, .. }
            | Error::Observer { condition, .. } => Some(*condition),
            _ => None,
        }
    }
}

impl Error {
    /// Sets the agent label on per-agent variants.
    pub fn at_agent(self, label: usize) -> Self {
        match self {
            Error::NotInformative { condition, detail, .. } => Error::NotInformative {
                agent: label,
                condition,
                detail,
            },
            Error::Infeasible { condition, residual, .. } => Error::Infeasible {
                agent: label,
                condition,
                residual,
            },
            Error::Synthesis { condition, detail, .. } => Error::Synthesis {
                agent: label,
                condition,
                detail,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
