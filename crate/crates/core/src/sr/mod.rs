//! Symbolic regression by genetic programming.
//!
//! Individuals are ranked by the MSE of their best affine rescaling
//! `a + b*f(t)`, so the search looks for shape while scale and offset come
//! for free. Every candidate that evaluates finitely on all training points
//! is offered to an (MSE, complexity) Pareto archive both as is and with the
//! rescaling written out; archive MSEs are always those of the stored tree.
//! Periodically archive members and the best individuals get their constants
//! refined, and the refined archive is reinjected in place of the worst
//! individuals. The final model is picked from the archive.

mod config;
pub mod pareto;
pub mod rng;
mod tune;
pub mod variation;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{simplify, Expr};
use crate::ingest::{IngestError, TimeIndexMap};
use crate::metrics::{self, compute_metrics, FitMetrics, MetricsError};
use crate::pca::ScoreSeries;

pub use config::{MutationWeights, OperatorSet, SrConfig};
pub use pareto::{pareto_update, FrontEntry, ParetoFront};
pub use tune::optimize_constants;
pub use variation::{crossover, init_individual, mutate};

use rng::{stream_rng, SearchRng};

#[derive(Debug, Error)]
pub enum SrError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),
    #[error("no candidate evaluated finitely on the training data")]
    EmptyFront,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    TimeIndex(#[from] IngestError),
}

/// `(t, y)` pairs to fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingSet {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl TrainingSet {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self, SrError> {
        let bad = |m: &str| Err(SrError::InvalidTrainingSet(m.to_string()));
        if t.len() != y.len() {
            return bad("t and y lengths differ");
        }
        if t.len() < 3 {
            return bad("need at least 3 points");
        }
        if t.iter().chain(&y).any(|v| !v.is_finite()) {
            return bad("all values must be finite");
        }
        let mut sorted = t.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("t values must be distinct");
        }
        Ok(Self { t, y })
    }

    /// Maps a score series' years to time indices.
    pub fn from_series(series: &ScoreSeries, map: TimeIndexMap) -> Result<Self, SrError> {
        let t = series
            .years
            .iter()
            .map(|&y| map.to_time_index(y).map(f64::from))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(t, series.scores.clone())
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Model values at every training point, or `None` if any evaluation fails.
pub fn predict(e: &Expr, data: &TrainingSet) -> Option<Vec<f64>> {
    e.eval_batch(&data.t).ok()
}

/// Training MSE, or `None` when the candidate is rejected because some
/// training point hits a domain error.
pub fn evaluate_fitness(e: &Expr, data: &TrainingSet) -> Option<f64> {
    let predicted = predict(e, data)?;
    let mse = metrics::mse(&data.y, &predicted);
    mse.is_finite().then_some(mse)
}

/// Least-squares `(a, b)` minimising `sum (y - a - b*f)^2`; `b = 0` when
/// `f` is constant.
pub fn linear_scaling(f: &[f64], y: &[f64]) -> (f64, f64) {
    let n = f.len() as f64;
    let mf = f.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sfy, mut sff) = (0.0, 0.0);
    for (fi, yi) in f.iter().zip(y) {
        sfy += (fi - mf) * (yi - my);
        sff += (fi - mf) * (fi - mf);
    }
    let b = if sff > 0.0 { sfy / sff } else { 0.0 };
    let b = if b.is_finite() { b } else { 0.0 };
    (my - b * mf, b)
}

/// `a + b*e`, omitting a zero offset or unit factor.
pub fn rescaled(e: &Expr, a: f64, b: f64) -> Expr {
    if b == 0.0 {
        return Expr::constant(a);
    }
    let scaled = if b == 1.0 { e.clone() } else { Expr::mul(Expr::constant(b), e.clone()) };
    if a == 0.0 {
        scaled
    } else {
        Expr::add(Expr::constant(a), scaled)
    }
}

/// MSE after the best affine rescaling, or `None` if `e` is rejected.
pub fn scaled_fitness(e: &Expr, data: &TrainingSet) -> Option<f64> {
    let f = predict(e, data)?;
    let (a, b) = linear_scaling(&f, &data.y);
    let fitted: Vec<f64> = f.iter().map(|v| a + b * v).collect();
    let mse = metrics::mse(&data.y, &fitted);
    mse.is_finite().then_some(mse)
}

#[derive(Clone, Debug)]
struct Individual {
    expr: Expr,
    /// Rescaled MSE.
    mse: Option<f64>,
    complexity: u32,
}

impl Individual {
    fn new(expr: Expr, data: &TrainingSet, cfg: &SrConfig) -> Self {
        let mse = scaled_fitness(&expr, data);
        let complexity = expr.complexity(&cfg.complexity_weights);
        Self { expr, mse, complexity }
    }

    /// Lower is better; rejected candidates sort last.
    fn key(&self) -> (f64, u32) {
        (self.mse.unwrap_or(f64::INFINITY), self.complexity)
    }

    fn better_than(&self, other: &Individual) -> bool {
        let (a, b) = (self.key(), other.key());
        a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
    }
}

fn evaluate_all(exprs: Vec<Expr>, data: &TrainingSet, cfg: &SrConfig) -> Vec<Individual> {
    exprs.into_par_iter().map(|e| Individual::new(e, data, cfg)).collect()
}

/// A search in progress. [`run_search`] drives one to completion; stepping
/// manually exposes the archive between generations.
pub struct SearchRun<'a> {
    data: &'a TrainingSet,
    cfg: SrConfig,
    population: Vec<Individual>,
    front: ParetoFront,
    generation: usize,
}

impl<'a> SearchRun<'a> {
    pub fn new(data: &'a TrainingSet, cfg: SrConfig) -> Result<Self, SrError> {
        cfg.validate()?;
        let exprs = init_population(&cfg);
        let population = evaluate_all(exprs, data, &cfg);
        let mut run = Self { data, cfg, population, front: ParetoFront::new(), generation: 0 };
        run.archive_population();
        Ok(run)
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn front(&self) -> &ParetoFront {
        &self.front
    }

    pub fn is_finished(&self) -> bool {
        self.generation >= self.cfg.generations
    }

    /// Breeds and evaluates one generation.
    pub fn step(&mut self) {
        self.generation += 1;
        let g = self.generation as u64;
        let n = self.cfg.population_size;
        let elite = self.best_index();

        let mut children = Vec::with_capacity(n);
        children.push(self.population[elite].expr.clone());
        for i in 1..n {
            let mut rng = stream_rng(self.cfg.seed, g, i as u64);
            children.push(self.breed(&mut rng));
        }
        self.population = evaluate_all(children, self.data, &self.cfg);
        self.archive_population();

        let every = self.cfg.constant_tune_every;
        if every > 0 && self.generation.is_multiple_of(every) {
            self.tune_archive();
        }
    }

    pub fn finish(mut self) -> Result<ParetoFront, SrError> {
        while !self.is_finished() {
            self.step();
        }
        if self.front.is_empty() {
            return Err(SrError::EmptyFront);
        }
        Ok(self.front)
    }

    fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, ind) in self.population.iter().enumerate() {
            if ind.better_than(&self.population[best]) {
                best = i;
            }
        }
        best
    }

    fn tournament(&self, rng: &mut SearchRng) -> &Individual {
        let n = self.population.len();
        let mut best = &self.population[rng.random_range(0..n)];
        for _ in 1..self.cfg.tournament_size {
            let other = &self.population[rng.random_range(0..n)];
            if other.better_than(best) {
                best = other;
            }
        }
        best
    }

    fn breed(&self, rng: &mut SearchRng) -> Expr {
        let first = self.tournament(rng).expr.clone();
        let child = if rng.random_bool(self.cfg.crossover_prob) {
            let second = self.tournament(rng).expr.clone();
            crossover(&first, &second, self.cfg.max_depth, rng).0
        } else {
            first
        };
        if rng.random_bool(self.cfg.mutation_prob) {
            mutate(&child, &self.cfg, rng)
        } else {
            child
        }
    }

    /// The simplified form of `expr` if it is no worse, else `expr`.
    fn archive_candidate(&self, expr: &Expr, mse: f64) -> FrontEntry {
        let simple = simplify(expr);
        match evaluate_fitness(&simple, self.data) {
            Some(m) if m <= mse || simple == *expr => FrontEntry {
                complexity: simple.complexity(&self.cfg.complexity_weights),
                expr: simple,
                mse: m,
            },
            _ => FrontEntry {
                complexity: expr.complexity(&self.cfg.complexity_weights),
                expr: expr.clone(),
                mse,
            },
        }
    }

    /// Archive candidates for one individual: the tree itself and its
    /// explicit rescaling.
    fn archive_candidates(&self, expr: &Expr) -> Vec<FrontEntry> {
        let Some(f) = predict(expr, self.data) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(2);
        let raw = metrics::mse(&self.data.y, &f);
        if raw.is_finite() {
            out.push(self.archive_candidate(expr, raw));
        }
        let (a, b) = linear_scaling(&f, &self.data.y);
        let scaled = rescaled(expr, a, b);
        if scaled != *expr {
            if let Some(m) = evaluate_fitness(&scaled, self.data) {
                out.push(self.archive_candidate(&scaled, m));
            }
        }
        out
    }

    fn archive_population(&mut self) {
        // identical trees share (fitness, complexity); offer each pair once
        let mut seen = std::collections::HashSet::new();
        let distinct: Vec<&Individual> = self
            .population
            .iter()
            .filter(|ind| ind.mse.is_some_and(|m| seen.insert((m.to_bits(), ind.complexity))))
            .collect();
        let candidates: Vec<FrontEntry> =
            distinct.par_iter().flat_map_iter(|ind| self.archive_candidates(&ind.expr)).collect();
        for entry in candidates {
            self.front.insert(entry);
        }
    }

    /// Refines the constants of every archive member and of the best
    /// distinct population members. Improved population members are updated
    /// in place; refined archive members replace the worst individuals.
    fn tune_archive(&mut self) {
        let budget = self.cfg.constant_tune_budget;
        let leaders = self.leaders(self.cfg.constant_tune_population);
        let refined_leaders: Vec<(usize, Option<FrontEntry>)> = leaders
            .par_iter()
            .map(|&i| {
                let ind = &self.population[i];
                let entry = predict(&ind.expr, self.data).and_then(|f| {
                    let (a, b) = linear_scaling(&f, &self.data.y);
                    let start = rescaled(&ind.expr, a, b);
                    let before = evaluate_fitness(&start, self.data)?;
                    let refined = optimize_constants(&start, self.data, budget);
                    let after = evaluate_fitness(&refined, self.data)?;
                    (after < before).then(|| self.archive_candidate(&refined, after))
                });
                (i, entry)
            })
            .collect();
        let tuned: Vec<FrontEntry> = self
            .front
            .entries()
            .par_iter()
            .map(|entry| {
                let refined = optimize_constants(&entry.expr, self.data, budget);
                match evaluate_fitness(&refined, self.data) {
                    Some(m) if m <= entry.mse => self.archive_candidate(&refined, m),
                    _ => entry.clone(),
                }
            })
            .collect();

        let mut front: ParetoFront = tuned.iter().cloned().collect();
        for (i, entry) in refined_leaders {
            if let Some(entry) = entry {
                front.insert(entry.clone());
                if entry.expr.depth() <= self.cfg.max_depth {
                    self.population[i] = Individual::new(entry.expr, self.data, &self.cfg);
                }
            }
        }
        self.front = front;

        let mut order: Vec<usize> = (0..self.population.len()).collect();
        order.sort_by(|&a, &b| {
            let (ka, kb) = (self.population[a].key(), self.population[b].key());
            kb.0.total_cmp(&ka.0).then(kb.1.cmp(&ka.1)).then(a.cmp(&b))
        });
        for (slot, entry) in order.into_iter().zip(tuned) {
            if entry.expr.depth() <= self.cfg.max_depth {
                self.population[slot] = Individual::new(entry.expr, self.data, &self.cfg);
            }
        }
    }

    /// Indices of the `k` best evaluated individuals with distinct trees.
    fn leaders(&self, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.population.len()).filter(|&i| self.population[i].mse.is_some()).collect();
        order.sort_by(|&a, &b| {
            let (ka, kb) = (self.population[a].key(), self.population[b].key());
            ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1)).then(a.cmp(&b))
        });
        let mut picked: Vec<usize> = Vec::with_capacity(k);
        for i in order {
            if picked.len() == k {
                break;
            }
            if picked.iter().all(|&j| self.population[j].expr != self.population[i].expr) {
                picked.push(i);
            }
        }
        picked
    }
}

/// Ramped half-and-half initial population; individual `i` draws from
/// stream `(0, i)`.
pub fn init_population(cfg: &SrConfig) -> Vec<Expr> {
    (0..cfg.population_size)
        .map(|i| init_individual(&mut stream_rng(cfg.seed, 0, i as u64), cfg, i))
        .collect()
}

/// Runs the whole search and returns the final archive.
pub fn run_search(data: &TrainingSet, cfg: &SrConfig) -> Result<ParetoFront, SrError> {
    SearchRun::new(data, cfg.clone())?.finish()
}

/// How [`select_model`] picks from the archive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Criterion {
    /// Simplest entry whose R² reaches the threshold; best R² if none does.
    MinComplexityAboveR2(f64),
    BestR2,
}

impl Default for Criterion {
    fn default() -> Self {
        Criterion::MinComplexityAboveR2(0.99)
    }
}

/// A model with its training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub expr: Expr,
    pub metrics: FitMetrics,
    pub complexity: u32,
}

impl Serialize for FitReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FitReport", 7)?;
        st.serialize_field("expression", &self.expr)?;
        st.serialize_field("r2", &self.metrics.r2)?;
        st.serialize_field("r", &self.metrics.r)?;
        st.serialize_field("mse", &self.metrics.mse)?;
        st.serialize_field("mae", &self.metrics.mae)?;
        st.serialize_field("complexity", &self.complexity)?;
        st.serialize_field("n", &self.metrics.n)?;
        st.end()
    }
}

pub fn fit_report(
    expr: &Expr,
    data: &TrainingSet,
    complexity: u32,
) -> Result<FitReport, SrError> {
    let predicted = predict(expr, data).ok_or(SrError::EmptyFront)?;
    let metrics = compute_metrics(&data.y, &predicted)?;
    Ok(FitReport { expr: expr.clone(), metrics, complexity })
}

pub fn select_model(
    front: &ParetoFront,
    data: &TrainingSet,
    criterion: Criterion,
) -> Result<FitReport, SrError> {
    let reports = front
        .entries()
        .iter()
        .map(|e| fit_report(&e.expr, data, e.complexity))
        .collect::<Result<Vec<_>, _>>()?;
    let best_r2 = || {
        reports.iter().reduce(|best, r| {
            let better = r.metrics.r2 > best.metrics.r2
                || (r.metrics.r2 == best.metrics.r2 && r.complexity < best.complexity);
            if better {
                r
            } else {
                best
            }
        })
    };
    let chosen = match criterion {
        Criterion::MinComplexityAboveR2(threshold) => reports
            .iter()
            .filter(|r| r.metrics.r2 >= threshold)
            .min_by(|a, b| {
                a.complexity
                    .cmp(&b.complexity)
                    .then(a.metrics.mse.total_cmp(&b.metrics.mse))
            })
            .or_else(best_r2),
        Criterion::BestR2 => best_r2(),
    };
    chosen.cloned().ok_or(SrError::EmptyFront)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn series(f: impl Fn(f64) -> f64) -> TrainingSet {
        let t: Vec<f64> = (1..=27).map(f64::from).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        TrainingSet::new(t, y).unwrap()
    }

    #[test]
    fn training_set_validation() {
        assert!(TrainingSet::new(vec![1.0, 2.0], vec![1.0, 2.0]).is_err());
        assert!(TrainingSet::new(vec![1.0, 2.0, 2.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(TrainingSet::new(vec![1.0, 2.0, 3.0], vec![1.0, f64::NAN, 3.0]).is_err());
        assert!(TrainingSet::new(vec![1.0, 2.0, 3.0], vec![1.0, 3.0]).is_err());
    }

    #[test]
    fn fitness_cases() {
        let data = series(|t| 3.0 + 2.0 * t);
        assert!(evaluate_fitness(&parse("3 + 2*t").unwrap(), &data).unwrap() < 1e-12);
        assert_eq!(evaluate_fitness(&parse("log(t - 5)").unwrap(), &data), None);
        // the mean predictor scores the population variance of y
        let mean = data.y().iter().sum::<f64>() / 27.0;
        let var = data.y().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 27.0;
        let m = evaluate_fitness(&Expr::Const(mean), &data).unwrap();
        assert!((m - var).abs() < 1e-9 * var);
    }

    #[test]
    fn init_population_shape() {
        let cfg = SrConfig { population_size: 10, ..SrConfig::default() };
        let pop = init_population(&cfg);
        assert_eq!(pop.len(), 10);
        assert!(pop.iter().all(|e| e.depth() <= 6));
        assert_eq!(pop, init_population(&cfg));
        let leaves = SrConfig { init_depth_min: 1, init_depth_max: 1, ..cfg };
        assert!(init_population(&leaves).iter().all(Expr::is_leaf));
    }

    fn front_of(items: &[(&str, u32)]) -> ParetoFront {
        items
            .iter()
            .enumerate()
            .map(|(i, (text, cx))| FrontEntry {
                expr: parse(text).unwrap(),
                mse: 100.0 - i as f64,
                complexity: *cx,
            })
            .collect()
    }

    #[test]
    fn selection_prefers_simplest_passing() {
        // y = t^2: "t^2 + 3*sin(t)/t" reaches R² 0.999+, the exact model 1
        let data = series(|t| t * t);
        let front = front_of(&[("t^2 + 3*sin(t)/t", 5), ("t^2", 30)]);
        let r = select_model(&front, &data, Criterion::default()).unwrap();
        assert!(r.metrics.r2 > 0.999 && r.metrics.r2 < 1.0);
        assert_eq!(r.complexity, 5);
    }

    #[test]
    fn selection_fallbacks() {
        let data = series(|t| t * t);
        let single = front_of(&[("t", 3)]);
        let r = select_model(&single, &data, Criterion::default()).unwrap();
        assert!(r.metrics.r2 < 0.99);
        assert_eq!(r.expr, Expr::Time);

        // only the complexity-9 entry passes
        let front = front_of(&[("10*t - 60", 3), ("t^2 + 20*sin(t)", 9)]);
        let scores: Vec<f64> = front
            .entries()
            .iter()
            .map(|e| fit_report(&e.expr, &data, e.complexity).unwrap().metrics.r2)
            .collect();
        assert!(scores[0] < 0.99 && scores[1] >= 0.99, "{scores:?}");
        let r = select_model(&front, &data, Criterion::default()).unwrap();
        assert_eq!(r.complexity, 9);

        assert!(matches!(
            select_model(&ParetoFront::new(), &data, Criterion::default()),
            Err(SrError::EmptyFront)
        ));
    }

    #[test]
    fn small_search_is_deterministic() {
        let data = series(|t| 1.0 + 0.5 * t);
        let cfg = SrConfig { population_size: 60, generations: 12, seed: 7, ..SrConfig::default() };
        let a = run_search(&data, &cfg).unwrap();
        let b = run_search(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }
}
