use serde::Serialize;

use crate::expr::Expr;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontEntry {
    #[serde(rename = "expression")]
    pub expr: Expr,
    pub mse: f64,
    pub complexity: u32,
}

impl FrontEntry {
    /// No worse on both axes and strictly better on at least one.
    pub fn dominates(&self, other: &FrontEntry) -> bool {
        self.mse <= other.mse
            && self.complexity <= other.complexity
            && (self.mse < other.mse || self.complexity < other.complexity)
    }
}

/// Mutually nondominated (mse, complexity) archive, ordered by ascending
/// complexity and therefore strictly descending mse.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ParetoFront {
    entries: Vec<FrontEntry>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[FrontEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best_mse(&self) -> Option<f64> {
        self.entries.last().map(|e| e.mse)
    }

    /// Adds `candidate` unless an existing entry is at least as good on both
    /// axes; drops every entry the candidate dominates. Returns whether the
    /// candidate was kept. Non-finite errors are never admitted.
    pub fn insert(&mut self, candidate: FrontEntry) -> bool {
        if !candidate.mse.is_finite() {
            return false;
        }
        if self
            .entries
            .iter()
            .any(|e| e.mse <= candidate.mse && e.complexity <= candidate.complexity)
        {
            return false;
        }
        self.entries.retain(|e| !candidate.dominates(e));
        let at = self.entries.partition_point(|e| e.complexity < candidate.complexity);
        self.entries.insert(at, candidate);
        true
    }
}

impl FromIterator<FrontEntry> for ParetoFront {
    fn from_iter<I: IntoIterator<Item = FrontEntry>>(iter: I) -> Self {
        let mut front = ParetoFront::new();
        for entry in iter {
            front.insert(entry);
        }
        front
    }
}

pub fn pareto_update(mut front: ParetoFront, candidate: FrontEntry) -> ParetoFront {
    front.insert(candidate);
    front
}
