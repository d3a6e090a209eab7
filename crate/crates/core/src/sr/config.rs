use serde::{Deserialize, Serialize};

use crate::expr::{BinaryOp, ComplexityWeights, UnaryOp, DEFAULT_MAX_DEPTH, MAX_EXPONENT, MIN_EXPONENT};

use super::SrError;

/// Primitives available to the search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSet {
    pub unary: Vec<UnaryOp>,
    pub binary: Vec<BinaryOp>,
    /// Allowed integer exponents; empty disables powers.
    pub exponents: Vec<u8>,
}

impl Default for OperatorSet {
    fn default() -> Self {
        Self {
            unary: UnaryOp::ALL.to_vec(),
            binary: BinaryOp::ALL.to_vec(),
            exponents: (MIN_EXPONENT..=MAX_EXPONENT).collect(),
        }
    }
}

impl OperatorSet {
    /// Number of distinct function choices when growing a tree; all powers count as one.
    pub(crate) fn function_count(&self) -> usize {
        self.unary.len() + self.binary.len() + usize::from(!self.exponents.is_empty())
    }
}

/// Relative weights of the three mutation kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationWeights {
    pub subtree: f64,
    pub point: f64,
    pub constant: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        Self { subtree: 0.5, point: 0.3, constant: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrConfig {
    pub seed: u64,
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mutation_weights: MutationWeights,
    pub init_depth_min: usize,
    pub init_depth_max: usize,
    pub max_depth: usize,
    /// Uniform range for fresh constants.
    pub constant_min: f64,
    pub constant_max: f64,
    pub operators: OperatorSet,
    /// Archive members get their constants tuned every this many generations; 0 disables.
    pub constant_tune_every: usize,
    /// Objective evaluations per constant for each tuning pass.
    pub constant_tune_budget: usize,
    /// Best distinct population members tuned alongside the archive.
    pub constant_tune_population: usize,
    pub complexity_weights: ComplexityWeights,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            population_size: 500,
            generations: 200,
            tournament_size: 5,
            crossover_prob: 0.9,
            mutation_prob: 0.15,
            mutation_weights: MutationWeights::default(),
            init_depth_min: 2,
            init_depth_max: 6,
            max_depth: DEFAULT_MAX_DEPTH,
            constant_min: -20.0,
            constant_max: 20.0,
            operators: OperatorSet::default(),
            constant_tune_every: 10,
            constant_tune_budget: 100,
            constant_tune_population: 10,
            complexity_weights: ComplexityWeights::default(),
        }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<(), SrError> {
        let bad = |msg: String| Err(SrError::InvalidConfig(msg));
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        let w = self.mutation_weights;
        if [w.subtree, w.point, w.constant].iter().any(|x| !(x.is_finite() && *x >= 0.0))
            || w.subtree + w.point + w.constant <= 0.0
        {
            return bad("mutation weights must be non-negative with a positive sum".into());
        }
        if self.population_size < 2 {
            return bad(format!("population_size must be at least 2, got {}", self.population_size));
        }
        if self.generations < 1 {
            return bad("generations must be at least 1".into());
        }
        if self.tournament_size < 1 {
            return bad("tournament_size must be at least 1".into());
        }
        if self.init_depth_min < 1
            || self.init_depth_min > self.init_depth_max
            || self.init_depth_max > self.max_depth
        {
            return bad(format!(
                "depth bounds must satisfy 1 <= {} <= {} <= {}",
                self.init_depth_min, self.init_depth_max, self.max_depth
            ));
        }
        if !(self.constant_min.is_finite() && self.constant_max.is_finite())
            || self.constant_min > self.constant_max
        {
            return bad("constant range must be finite and ordered".into());
        }
        if let Some(k) = self
            .operators
            .exponents
            .iter()
            .find(|k| !(MIN_EXPONENT..=MAX_EXPONENT).contains(*k))
        {
            return bad(format!("exponent {k} outside {MIN_EXPONENT}..={MAX_EXPONENT}"));
        }
        let w = self.complexity_weights;
        if w.constant < 1 || w.time < 1 {
            return bad("leaf complexity weights must be at least 1".into());
        }
        Ok(())
    }
}
