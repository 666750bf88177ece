//! Application heads built on fitted local components: a generative
//! classifier, an anomaly-monitoring statistic with a control limit, and
//! subspace clustering of sources.
//!
//! All three work on the same principle: once the shared global component
//! is removed, per-source differences live in the local subspaces, so
//! projecting data onto a local factor set measures how well that source
//! explains it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::PerTuckerModel;
use crate::error::{Error, Result};
use crate::linalg::{subspace_error, top_eigvecs, FactorMatrix};
use crate::seeding;
use crate::tensor::{kron_chain, Matrix, Tensor};

/// Per-class local factor sets kept from a personalized fit; everything
/// else (global factors, cores) is discarded after training.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub labels: Vec<String>,
    pub local_factors: Vec<Vec<FactorMatrix>>,
    pub shared_dims: Vec<usize>,
}

impl ClassifierModel {
    pub fn from_model(model: &PerTuckerModel, labels: Vec<String>) -> Result<Self> {
        if labels.len() != model.num_sources() {
            return Err(Error::arg("one label per source required"));
        }
        Ok(ClassifierModel {
            labels,
            local_factors: model.local_factors.clone(),
            shared_dims: model.shared_dims(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    /// Index of the winning class (lowest index on exact ties).
    pub label: usize,
    /// Squared norm of the local-core projection per class.
    pub scores: Vec<f64>,
    /// True when the maximum score is attained by more than one class.
    pub tie: bool,
}

/// Accept a bare K-mode sample or a (K+1)-mode stack with one sample.
fn as_sample(dims: &[usize], y: &Tensor) -> Result<Tensor> {
    if y.dims() == dims {
        return Ok(y.clone());
    }
    if y.ndim() == dims.len() + 1 && &y.dims()[..dims.len()] == dims && y.dims()[dims.len()] == 1 {
        return y.squeeze_last();
    }
    Err(Error::arg(format!(
        "sample dims {:?} do not match model dims {:?}",
        y.dims(),
        dims
    )))
}

/// Projection statistic: ‖y ×₁ V₁ᵀ … ×_K V_Kᵀ‖², the squared norm of the
/// local core a factor set assigns to `y`.
pub fn projection_score(factors: &[FactorMatrix], y: &Tensor) -> Result<f64> {
    let mut acc = y.clone();
    for (k, f) in factors.iter().enumerate() {
        acc = acc.mode_product(&f.t(), k)?;
    }
    Ok(acc.frob_norm_sq())
}

/// Classify a sample by the class whose local subspace captures the most
/// energy.
pub fn classify(model: &ClassifierModel, y: &Tensor) -> Result<Classification> {
    let sample = as_sample(&model.shared_dims, y)?;
    let mut scores = Vec::with_capacity(model.num_classes());
    for factors in &model.local_factors {
        scores.push(projection_score(factors, &sample)?);
    }
    let mut label = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[label] {
            label = i;
        }
    }
    let tie = scores
        .iter()
        .enumerate()
        .any(|(i, &s)| i != label && s == scores[label]);
    Ok(Classification { label, scores, tie })
}

/// How the control limit is derived from training statistics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum LimitPolicy {
    /// limit = mean + k·std of the raw statistic.
    MeanPlusKSigma { k: f64 },
    /// limit = exp(mean + k·std of the log statistic).
    LogMeanPlusKSigma { k: f64 },
}

impl Default for LimitPolicy {
    fn default() -> Self {
        LimitPolicy::MeanPlusKSigma { k: 3.0 }
    }
}

/// Fitted control limit plus the training summary it came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub control_limit: f64,
    pub train_mean: f64,
    pub train_std: f64,
    pub policy: LimitPolicy,
}

/// Monitoring statistic of a frame: the squared norm of its local core.
pub fn monitor_statistic(local_factors: &[FactorMatrix], y: &Tensor) -> Result<f64> {
    let dims: Vec<usize> = local_factors.iter().map(FactorMatrix::rows).collect();
    let sample = as_sample(&dims, y)?;
    projection_score(local_factors, &sample)
}

/// Derive a control limit from in-control training statistics.
pub fn fit_control_limit(train_stats: &[f64], policy: LimitPolicy) -> Result<MonitorConfig> {
    if train_stats.is_empty() {
        return Err(Error::arg("empty training statistics"));
    }
    if !train_stats.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("training statistics".into()));
    }
    let transformed: Vec<f64> = match policy {
        LimitPolicy::MeanPlusKSigma { .. } => train_stats.to_vec(),
        LimitPolicy::LogMeanPlusKSigma { .. } => train_stats
            .iter()
            .map(|&v| v.max(f64::MIN_POSITIVE).ln())
            .collect(),
    };
    let n = transformed.len() as f64;
    let mean = transformed.iter().sum::<f64>() / n;
    let var = transformed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let control_limit = match policy {
        LimitPolicy::MeanPlusKSigma { k } => mean + k * std,
        LimitPolicy::LogMeanPlusKSigma { k } => (mean + k * std).exp(),
    };
    if !control_limit.is_finite() {
        return Err(Error::NonFinite("control limit".into()));
    }
    Ok(MonitorConfig {
        control_limit,
        train_mean: mean,
        train_std: std,
        policy,
    })
}

/// Alarm decision: statistic strictly above the control limit.
pub fn detect(cfg: &MonitorConfig, stat: f64) -> bool {
    stat > cfg.control_limit
}

/// Cluster analysis output: pairwise projector distances, assignments, and
/// a 2-D embedding for plotting.
#[derive(Debug, Clone)]
pub struct ClusterReport {
    pub distances: Matrix,
    pub assignments: Vec<usize>,
    pub embedding: Matrix,
}

/// Pairwise squared projector distances between the Kronecker chains of the
/// clients' local factor sets (chains in reverse-mode order, as in the
/// matrixized Tucker identity; the distance itself is order-invariant given
/// a consistent convention).
pub fn subspace_distance_matrix(clients: &[Vec<FactorMatrix>]) -> Result<Matrix> {
    let (first, rest) = clients
        .split_first()
        .ok_or_else(|| Error::arg("no clients given"))?;
    for c in rest {
        if c.len() != first.len() {
            return Err(Error::arg("clients must share the number of modes"));
        }
        for (a, b) in c.iter().zip(first) {
            if a.rows() != b.rows() || a.cols() != b.cols() {
                return Err(Error::arg(
                    "clients must share ambient dimensions and ranks per mode",
                ));
            }
        }
    }
    let chains: Vec<FactorMatrix> = clients
        .iter()
        .map(|factors| {
            let rev: Vec<&Matrix> = factors.iter().rev().map(FactorMatrix::matrix).collect();
            FactorMatrix::new(kron_chain(&rev)?)
        })
        .collect::<Result<_>>()?;
    let n = chains.len();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let rho = subspace_error(&chains[i], &chains[j])?;
            d.set(i, j, rho);
            d.set(j, i, rho);
        }
    }
    Ok(d)
}

fn check_distance_matrix(d: &Matrix) -> Result<usize> {
    let n = d.rows();
    if d.cols() != n || n == 0 {
        return Err(Error::arg("distance matrix must be square and nonempty"));
    }
    if !d.is_finite() {
        return Err(Error::NonFinite("distance matrix".into()));
    }
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(Error::arg("distance matrix must have a zero diagonal"));
        }
        for j in 0..n {
            if d.get(i, j) < 0.0 || (d.get(i, j) - d.get(j, i)).abs() > 1e-9 {
                return Err(Error::arg("distance matrix must be symmetric nonnegative"));
            }
        }
    }
    Ok(n)
}

/// Spectral clustering on the affinity exp(−d/σ) with σ the median nonzero
/// distance: normalized-Laplacian embedding, row normalization, then seeded
/// k-means.
pub fn spectral_cluster(d: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = check_distance_matrix(d)?;
    if k < 2 || k > n {
        return Err(Error::arg(format!(
            "cluster count {} out of range 2..={}",
            k, n
        )));
    }

    let mut nonzero: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if d.get(i, j) > 0.0 {
                nonzero.push(d.get(i, j));
            }
        }
    }
    nonzero.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sigma = if nonzero.is_empty() {
        1.0
    } else {
        nonzero[nonzero.len() / 2]
    };

    let mut affinity = Matrix::from_fn(n, n, |i, j| (-d.get(i, j) / sigma).exp());
    for i in 0..n {
        affinity.set(i, i, 0.0); // zero self-affinity
    }
    // D^{-1/2} A D^{-1/2}; its top-k eigenvectors span the same embedding as
    // the bottom of the normalized Laplacian
    let degree: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| affinity.get(i, j)).sum::<f64>().max(1e-300))
        .collect();
    let sym = Matrix::from_fn(n, n, |i, j| {
        affinity.get(i, j) / (degree[i].sqrt() * degree[j].sqrt())
    });
    let (vecs, _) = top_eigvecs(&sym, k)?;

    // row-normalized spectral embedding
    let mut rows = Matrix::zeros(n, k);
    for i in 0..n {
        let mut norm = 0.0;
        for j in 0..k {
            norm += vecs.matrix().get(i, j) * vecs.matrix().get(i, j);
        }
        let norm = norm.sqrt().max(1e-300);
        for j in 0..k {
            rows.set(i, j, vecs.matrix().get(i, j) / norm);
        }
    }
    Ok(kmeans(&rows, k, seed))
}

/// Lloyd's algorithm with greedy farthest-point seeding from a seeded start.
fn kmeans(points: &Matrix, k: usize, seed: u64) -> Vec<usize> {
    let n = points.rows();
    let dim = points.cols();
    let mut rng = seeding::stream(seed, 0);
    let dist_sq = |a: usize, centroid: &[f64]| -> f64 {
        (0..dim)
            .map(|j| {
                let d = points.get(a, j) - centroid[j];
                d * d
            })
            .sum()
    };

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centroids.push((0..dim).map(|j| points.get(first, j)).collect());
    while centroids.len() < k {
        let mut best = (0, f64::NEG_INFINITY);
        for p in 0..n {
            let nearest = centroids
                .iter()
                .map(|c| dist_sq(p, c))
                .fold(f64::INFINITY, f64::min);
            if nearest > best.1 {
                best = (p, nearest);
            }
        }
        centroids.push((0..dim).map(|j| points.get(best.0, j)).collect());
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for p in 0..n {
            let mut best = 0;
            let mut best_d = dist_sq(p, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let dd = dist_sq(p, centroid);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if assignments[p] != best {
                assignments[p] = best;
                changed = true;
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&p| assignments[p] == c).collect();
            if members.is_empty() {
                continue;
            }
            for (j, slot) in centroid.iter_mut().enumerate() {
                *slot = members.iter().map(|&p| points.get(p, j)).sum::<f64>()
                    / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    assignments
}

/// Classical multidimensional scaling of a matrix of *squared* distances:
/// double-center B = −½·J·D·J and embed with the top eigenpairs.
pub fn mds_embed(d: &Matrix, dim: usize) -> Result<Matrix> {
    let n = check_distance_matrix(d)?;
    if dim == 0 || dim > n {
        return Err(Error::arg("embedding dimension out of range"));
    }
    let mut b = Matrix::zeros(n, n);
    let row_means: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| d.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let total: f64 = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b.set(i, j, -0.5 * (d.get(i, j) - row_means[i] - row_means[j] + total));
        }
    }
    let (vecs, vals) = top_eigvecs(&b, dim)?;
    let mut coords = Matrix::zeros(n, dim);
    for j in 0..dim {
        let scale = vals[j].max(0.0).sqrt();
        for i in 0..n {
            coords.set(i, j, vecs.matrix().get(i, j) * scale);
        }
    }
    Ok(coords)
}
