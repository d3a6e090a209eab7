//! Correlation-matrix principal component analysis.
//!
//! The eigensolver is a cyclic Jacobi iteration. Groups here have at most a
//! handful of causes, so the O(p^3) per sweep cost is irrelevant and the
//! method's accuracy on symmetric input is what matters.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{Group, StandardizedMatrix};

/// Off-diagonal magnitude below which a Jacobi sweep is considered converged.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues in `[-NEGATIVE_CLAMP, 0)` are rounding noise and are set to 0.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("eigenvalue {value} is negative beyond rounding tolerance")]
    NegativeEigenvalue { value: f64 },
    #[error("cannot orient a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix has a non-finite entry")]
    NonFinite,
}

/// Dense symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from rows, rejecting asymmetric or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, PcaError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(PcaError::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        let m = Self { dim, data };
        for i in 0..dim {
            for j in 0..dim {
                if !m.get(i, j).is_finite() {
                    return Err(PcaError::NonFinite);
                }
                if m.get(i, j) != m.get(j, i) {
                    return Err(PcaError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// Correlation matrix of standardized columns: `R = Z'Z / (n - 1)`.
pub fn correlation_matrix(z: &StandardizedMatrix) -> Result<SymMatrix, PcaError> {
    let n = z.n_rows();
    if n < 3 {
        return Err(PcaError::TooFewRows { needed: 3, got: n });
    }
    let p = z.n_cols();
    let mut data = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let s: f64 = z.rows().iter().map(|row| row[i] * row[j]).sum();
            let r = s / (n - 1) as f64;
            data[i * p + j] = r;
            data[j * p + i] = r;
        }
    }
    Ok(SymMatrix { dim: p, data })
}

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector for `values[k]`, sign-oriented.
    pub vectors: Vec<Vec<f64>>,
}

impl Eigen {
    /// `V diag(values) V'`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let p = self.values.len();
        let mut out = vec![vec![0.0; p]; p];
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..p {
                for j in 0..p {
                    out[i][j] += lambda * v[i] * v[j];
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn eigen_decompose(m: &SymMatrix) -> Result<Eigen, PcaError> {
    let p = m.dim;
    let mut a = m.to_rows();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let tol = JACOBI_TOLERANCE * scale;

    let max_off = |a: &[Vec<f64>]| {
        let mut off = 0.0_f64;
        for i in 0..p {
            for j in (i + 1)..p {
                off = off.max(a[i][j].abs());
            }
        }
        off
    };

    let mut converged = max_off(&a) < tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(PcaError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for ip in 0..p {
            for iq in (ip + 1)..p {
                let apq = a[ip][iq];
                if apq.abs() < tol * 1e-3 {
                    a[ip][iq] = 0.0;
                    a[iq][ip] = 0.0;
                    continue;
                }
                let theta = (a[iq][iq] - a[ip][ip]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, ip, iq, c, s);
            }
        }
        converged = max_off(&a) < tol;
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let col: Vec<f64> = v.iter().map(|row| row[k]).collect();
            orient_sign(&col)
        })
        .collect::<Result<_, _>>()?;
    Ok(Eigen { values, vectors })
}

/// Applies the rotation in the (p, q) plane that annihilates `a[p][q]`.
fn rotate(a: &mut [Vec<f64>], v: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let n = a.len();
    for k in 0..n {
        let akp = a[k][p];
        let akq = a[k][q];
        a[k][p] = c * akp - s * akq;
        a[k][q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p][k];
        let aqk = a[q][k];
        a[p][k] = c * apk - s * aqk;
        a[q][k] = s * apk + c * aqk;
    }
    a[p][q] = 0.0;
    a[q][p] = 0.0;
    for row in v.iter_mut() {
        let vp = row[p];
        let vq = row[q];
        row[p] = c * vp - s * vq;
        row[q] = s * vp + c * vq;
    }
}

/// Flips `v` so its largest-magnitude entry is positive. Ties go to the
/// lowest index.
pub fn orient_sign(v: &[f64]) -> Result<Vec<f64>, PcaError> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    match v.get(best) {
        None => Err(PcaError::ZeroVector),
        Some(x) if *x == 0.0 || !x.is_finite() => Err(PcaError::ZeroVector),
        Some(x) if *x < 0.0 => Ok(v.iter().map(|e| -e).collect()),
        Some(_) => Ok(v.to_vec()),
    }
}

/// Per-component fraction `lambda_k / p` and its running sum.
pub fn explained_variance(eigenvalues: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let fractions: Vec<f64> = eigenvalues.iter().map(|l| l / p as f64).collect();
    let cumulative = fractions
        .iter()
        .scan(0.0, |acc, f| {
            *acc += f;
            Some(*acc)
        })
        .collect();
    (fractions, cumulative)
}

/// How many leading components to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "rule", content = "value")]
pub enum Retention {
    /// Components with eigenvalue strictly above 1, at least one.
    #[default]
    Kaiser,
    /// Smallest count whose cumulative explained fraction reaches the threshold.
    CumVar(f64),
    Fixed(usize),
}

impl fmt::Display for Retention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Retention::Kaiser => f.write_str("kaiser"),
            Retention::CumVar(x) => write!(f, "cumvar={x}"),
            Retention::Fixed(k) => write!(f, "fixed={k}"),
        }
    }
}

impl FromStr for Retention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("kaiser") {
            return Ok(Retention::Kaiser);
        }
        if let Some(f) = s.strip_prefix("cumvar=") {
            let f: f64 = f.parse().map_err(|_| format!("bad cumvar fraction `{f}`"))?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(format!("cumvar fraction must be in (0, 1], got {f}"));
            }
            return Ok(Retention::CumVar(f));
        }
        if let Some(k) = s.strip_prefix("fixed=") {
            let k: usize = k.parse().map_err(|_| format!("bad fixed count `{k}`"))?;
            return Ok(Retention::Fixed(k));
        }
        Err(format!("unknown retention rule `{s}` (kaiser | cumvar=<f> | fixed=<k>)"))
    }
}

/// Number of components kept under `rule`; always in `1..=len` for non-empty input.
pub fn retain_components(eigenvalues: &[f64], rule: Retention) -> usize {
    let p = eigenvalues.len();
    if p == 0 {
        return 0;
    }
    match rule {
        Retention::Kaiser => eigenvalues.iter().filter(|&&l| l > 1.0).count().max(1),
        Retention::CumVar(target) => {
            let (_, cumulative) = explained_variance(eigenvalues, p);
            // tolerate rounding on the final partial sum
            cumulative
                .iter()
                .position(|&c| c >= target - 1e-12)
                .map_or(p, |k| k + 1)
        }
        Retention::Fixed(k) => k.clamp(1, p),
    }
}

/// Result of PCA on one cause group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PcaModel {
    pub group: Group,
    pub columns: Vec<String>,
    pub eigenvalues: Vec<f64>,
    /// `loadings[k]` is the unit eigenvector of component `k`, one entry per column.
    pub loadings: Vec<Vec<f64>>,
    pub retained: usize,
    pub explained_fraction: Vec<f64>,
    pub cumulative_fraction: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Index labels for the retained components of this group.
    pub fn labels(&self) -> Vec<String> {
        index_labels(self.group, self.retained)
    }
}

/// CPC1.., NPC (or NPC1.. when several are kept), IPC1..
pub fn index_labels(group: Group, retained: usize) -> Vec<String> {
    let prefix = match group {
        Group::Communicable => "CPC",
        Group::Noncommunicable => "NPC",
        Group::Injury => "IPC",
    };
    if group == Group::Noncommunicable && retained == 1 {
        return vec!["NPC".to_string()];
    }
    (1..=retained).map(|k| format!("{prefix}{k}")).collect()
}

/// Correlation PCA of one standardized group.
pub fn fit_pca(z: &StandardizedMatrix, group: Group, rule: Retention) -> Result<PcaModel, PcaError> {
    let corr = correlation_matrix(z)?;
    let eigen = eigen_decompose(&corr)?;
    let mut eigenvalues = eigen.values;
    for value in eigenvalues.iter_mut() {
        if *value < 0.0 {
            if *value < -NEGATIVE_CLAMP {
                return Err(PcaError::NegativeEigenvalue { value: *value });
            }
            *value = 0.0;
        }
    }
    let p = corr.dim();
    let (explained_fraction, cumulative_fraction) = explained_variance(&eigenvalues, p);
    let retained = retain_components(&eigenvalues, rule);
    Ok(PcaModel {
        group,
        columns: z.column_names().to_vec(),
        eigenvalues,
        loadings: eigen.vectors,
        retained,
        explained_fraction,
        cumulative_fraction,
    })
}

/// A component index as an annual series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreSeries {
    pub index_id: String,
    pub years: Vec<i32>,
    pub scores: Vec<f64>,
}

/// Projects every row of `z` on each retained loading vector.
pub fn component_scores(
    z: &StandardizedMatrix,
    model: &PcaModel,
    years: &[i32],
) -> Result<Vec<ScoreSeries>, PcaError> {
    if z.n_cols() != model.dim() {
        return Err(PcaError::DimensionMismatch { expected: model.dim(), got: z.n_cols() });
    }
    if years.len() != z.n_rows() {
        return Err(PcaError::DimensionMismatch { expected: z.n_rows(), got: years.len() });
    }
    let labels = model.labels();
    Ok(model
        .loadings
        .iter()
        .take(model.retained)
        .zip(labels)
        .map(|(loading, index_id)| ScoreSeries {
            index_id,
            years: years.to_vec(),
            scores: z
                .rows()
                .iter()
                .map(|row| row.iter().zip(loading).map(|(a, b)| a * b).sum())
                .collect(),
        })
        .collect())
}

/// `(component number, eigenvalue)` pairs, numbered from 1.
pub fn scree_data(model: &PcaModel) -> Vec<(usize, f64)> {
    model.eigenvalues.iter().enumerate().map(|(k, l)| (k + 1, *l)).collect()
}
