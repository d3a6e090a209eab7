//! The five published index models.

use thiserror::Error;

use super::{parse, Expr};

/// Index labels with a published model, in model order.
pub const PAPER_INDICES: [&str; 5] = ["CPC1", "CPC2", "NPC", "IPC1", "IPC2"];

const MODEL_TEXT: [&str; 5] = [
    "6.31 + 14.73/t + 14.59/t^2 + 6.63*cos(t)/t^3 - 1.63e-6*t^4",
    // negative frequency kept; cos is even
    "1.62 + 0.08*t + 5.79e-5*t^3 + 0.04*cos(-12.96*t) - 0.004*t^2",
    "9.32 + 0.16*t + 0.02*t^2 - 0.0005*t^3",
    "1.479 + 0.10*t - 0.12*log(t) - 6.72e-5*t^3 - 0.0002*t^2*sin(0.39*t)",
    "0.78 + 0.006*t^2 + 1.08e-7*t^5 - 0.10*t - 6.59e-6*t^4",
];

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no published model for index `{0}` (expected one of CPC1, CPC2, NPC, IPC1, IPC2)")]
pub struct UnknownIndex(pub String);

/// Published model for an index label, case-insensitive.
pub fn paper_model(index: &str) -> Result<Expr, UnknownIndex> {
    let pos = PAPER_INDICES
        .iter()
        .position(|id| id.eq_ignore_ascii_case(index.trim()))
        .ok_or_else(|| UnknownIndex(index.to_string()))?;
    Ok(parse(MODEL_TEXT[pos]).expect("built-in model text parses"))
}
