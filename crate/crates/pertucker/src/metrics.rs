//! Evaluation against ground truth: normalized subspace and component
//! errors, plus empirical convergence-rate fits on traces.
//!
//! Subspace errors compare Kronecker chains of per-mode factors through the
//! product identity ‖(⊗U)ᵀ(⊗V)‖² = ∏‖U_kᵀV_k‖², which avoids materializing
//! the chains; tests cross-check the materialized route.

use crate::engine::{FitTrace, PerTuckerModel};
use crate::error::{Error, Result};
use crate::linalg::FactorMatrix;
use crate::seeding;
use crate::simgen::{gen_pattern_stack, SimConfig, SimTruth};
use crate::tensor::Tensor;
use crate::tucker::{hooi_on_modes, ModalTucker, DEFAULT_HOOI_SWEEPS, DEFAULT_HOOI_TOL};

/// Number of fresh pattern images per source for the local-subspace
/// reference factors.
pub const REFERENCE_IMAGES: usize = 100;

/// The five error measures of one evaluated run. Fields are `None` where a
/// method has no corresponding component (the single-decomposition
/// baselines).
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub global_subspace_error: Option<f64>,
    pub local_subspace_error: Option<f64>,
    pub global_component_error: Option<f64>,
    pub local_component_error: Option<f64>,
    pub denoised_error: f64,
    pub seed: u64,
    pub config_hash: u64,
}

impl EvalReport {
    pub fn csv_header() -> &'static str {
        "seed,config_hash,global_subspace_error,local_subspace_error,\
         global_component_error,local_component_error,denoised_error"
    }

    pub fn csv_row(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| format!("{:.10e}", x)).unwrap_or_default();
        format!(
            "{},{:016x},{},{},{},{},{:.10e}",
            self.seed,
            self.config_hash,
            cell(self.global_subspace_error),
            cell(self.local_subspace_error),
            cell(self.global_component_error),
            cell(self.local_component_error),
            self.denoised_error
        )
    }
}

/// ϱ(⊗ truth, ⊗ estimate) / ‖⊗ truth‖², the projector distance between the
/// Kronecker chains of two per-mode factor sets, normalized by the squared
/// norm of the truth chain (= its total rank).
pub fn kron_subspace_error(truth: &[FactorMatrix], estimate: &[FactorMatrix]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::arg("factor sets must cover the same modes"));
    }
    let mut rank_truth = 1.0f64;
    let mut rank_est = 1.0f64;
    let mut cross = 1.0f64;
    for (t, e) in truth.iter().zip(estimate) {
        if t.rows() != e.rows() {
            return Err(Error::arg(format!(
                "ambient mismatch {} vs {}",
                t.rows(),
                e.rows()
            )));
        }
        rank_truth *= t.cols() as f64;
        rank_est *= e.cols() as f64;
        cross *= t.matrix().matmul_tn(e.matrix()).frob_norm_sq();
    }
    if rank_truth == 0.0 {
        return Err(Error::arg("truth factors have zero total rank"));
    }
    let rho = (rank_truth + rank_est - 2.0 * cross).max(0.0);
    Ok(rho / rank_truth)
}

fn config_hash(model: &PerTuckerModel) -> u64 {
    let json = serde_json::to_string(&model.config).unwrap_or_default();
    seeding::derive_seed(0, &json)
}

/// Reference local factors for each source: a Tucker fit on fresh noiseless
/// pattern stacks, drawn from a dedicated seed stream so the metric is
/// reproducible.
pub fn reference_local_factors(
    sim_cfg: &SimConfig,
    ranks: &[Vec<usize>],
) -> Result<Vec<Vec<FactorMatrix>>> {
    let mut out = Vec::with_capacity(sim_cfg.sources.len());
    for (n, spec) in sim_cfg.sources.iter().enumerate() {
        let seed = seeding::derive_seed(sim_cfg.seed, &format!("reference-{}", n));
        let stack = gen_pattern_stack(sim_cfg, spec, REFERENCE_IMAGES, seed)?;
        let fitted = hooi_on_modes(&stack, &ranks[n], &[0, 1], DEFAULT_HOOI_SWEEPS, DEFAULT_HOOI_TOL)?;
        out.push(fitted.factors);
    }
    Ok(out)
}

fn component_ratio(estimates: &[Tensor], truths: &[Tensor]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        num += e.sub(t)?.frob_norm_sq();
        den += t.frob_norm_sq();
    }
    if den == 0.0 {
        return Err(Error::arg("zero-norm ground truth component"));
    }
    Ok(num / den)
}

/// Evaluate a personalized fit against simulated ground truth, with the
/// local-subspace reference factors regenerated per the study protocol.
pub fn eval_against_truth(
    model: &PerTuckerModel,
    truth: &SimTruth,
    sim_cfg: &SimConfig,
) -> Result<EvalReport> {
    let refs = reference_local_factors(sim_cfg, &model.config.local_ranks)?;
    eval_with_references(model, truth, &refs, sim_cfg.seed)
}

/// Evaluate against ground truth with explicit local reference factors.
pub fn eval_with_references(
    model: &PerTuckerModel,
    truth: &SimTruth,
    refs: &[Vec<FactorMatrix>],
    seed: u64,
) -> Result<EvalReport> {
    let sources = model.num_sources();
    if truth.local_components.len() != sources || refs.len() != sources {
        return Err(Error::arg("ground truth does not match the model's sources"));
    }

    let gse = kron_subspace_error(&truth.global_factors, &model.global_factors)?;

    let mut lse = 0.0;
    for n in 0..sources {
        lse += kron_subspace_error(&refs[n], &model.local_factors[n])?;
    }
    lse /= sources as f64;

    let g_est: Vec<Tensor> = (0..sources)
        .map(|n| model.global_reconstruction(n))
        .collect::<Result<_>>()?;
    let l_est: Vec<Tensor> = (0..sources)
        .map(|n| model.local_reconstruction(n))
        .collect::<Result<_>>()?;
    let gce = component_ratio(&g_est, &truth.global_components)?;
    let lce = component_ratio(&l_est, &truth.local_components)?;

    let denoised_est: Vec<Tensor> = g_est
        .iter()
        .zip(&l_est)
        .map(|(g, l)| g.add(l))
        .collect::<Result<_>>()?;
    let denoised_truth: Vec<Tensor> = truth
        .global_components
        .iter()
        .zip(&truth.local_components)
        .map(|(g, l)| g.add(l))
        .collect::<Result<_>>()?;
    let denoised = component_ratio(&denoised_est, &denoised_truth)?;

    Ok(EvalReport {
        global_subspace_error: Some(gse),
        local_subspace_error: Some(lse),
        global_component_error: Some(gce),
        local_component_error: Some(lce),
        denoised_error: denoised,
        seed,
        config_hash: config_hash(model),
    })
}

/// Evaluate the shared-decomposition baseline (one Tucker over all sources
/// concatenated): it has no local component, so only the global and
/// denoised measures apply.
pub fn eval_global_tucker(
    fitted: &ModalTucker,
    truth: &SimTruth,
    sim_cfg: &SimConfig,
    sample_counts: &[usize],
) -> Result<EvalReport> {
    let gse = kron_subspace_error(&truth.global_factors, &fitted.factors)?;
    let recon = fitted.reconstruct()?;
    let mut g_est = Vec::with_capacity(sample_counts.len());
    let mut start = 0usize;
    for &count in sample_counts {
        let mut slices = Vec::with_capacity(count);
        for s in 0..count {
            slices.push(recon.slice_last(start + s)?);
        }
        let refs: Vec<&Tensor> = slices.iter().collect();
        g_est.push(Tensor::stack_last(&refs)?);
        start += count;
    }
    let gce = component_ratio(&g_est, &truth.global_components)?;
    let denoised_truth: Vec<Tensor> = truth
        .global_components
        .iter()
        .zip(&truth.local_components)
        .map(|(g, l)| g.add(l))
        .collect::<Result<_>>()?;
    let denoised = component_ratio(&g_est, &denoised_truth)?;
    Ok(EvalReport {
        global_subspace_error: Some(gse),
        local_subspace_error: None,
        global_component_error: Some(gce),
        local_component_error: None,
        denoised_error: denoised,
        seed: sim_cfg.seed,
        config_hash: 0,
    })
}

/// Evaluate the per-source baseline (an independent Tucker per source): it
/// has no global component; its whole reconstruction doubles as the local
/// estimate.
pub fn eval_local_tucker(
    fitted: &[ModalTucker],
    truth: &SimTruth,
    sim_cfg: &SimConfig,
    reference_ranks: &[Vec<usize>],
) -> Result<EvalReport> {
    let refs = reference_local_factors(sim_cfg, reference_ranks)?;
    let mut lse = 0.0;
    for (n, m) in fitted.iter().enumerate() {
        lse += kron_subspace_error(&refs[n], &m.factors)?;
    }
    lse /= fitted.len() as f64;

    let l_est: Vec<Tensor> = fitted
        .iter()
        .map(ModalTucker::reconstruct)
        .collect::<Result<_>>()?;
    let lce = component_ratio(&l_est, &truth.local_components)?;
    let denoised_truth: Vec<Tensor> = truth
        .global_components
        .iter()
        .zip(&truth.local_components)
        .map(|(g, l)| g.add(l))
        .collect::<Result<_>>()?;
    let denoised = component_ratio(&l_est, &denoised_truth)?;
    Ok(EvalReport {
        global_subspace_error: None,
        local_subspace_error: Some(lse),
        global_component_error: None,
        local_component_error: Some(lce),
        denoised_error: denoised,
        seed: sim_cfg.seed,
        config_hash: 0,
    })
}

/// Mean projector distance between fitted and planted factors: the global
/// mean over modes, and the per-source local means.
pub fn planted_subspace_errors(
    model: &PerTuckerModel,
    global_truth: &[FactorMatrix],
    local_truth: &[Vec<FactorMatrix>],
) -> Result<(f64, Vec<f64>)> {
    let k = model.num_modes();
    let mut global = 0.0;
    for kk in 0..k {
        global += crate::linalg::subspace_error(&model.global_factors[kk], &global_truth[kk])?;
    }
    global /= k as f64;
    let mut locals = Vec::with_capacity(model.num_sources());
    for n in 0..model.num_sources() {
        let mut acc = 0.0;
        for kk in 0..k {
            acc += crate::linalg::subspace_error(&model.local_factors[n][kk], &local_truth[n][kk])?;
        }
        locals.push(acc / k as f64);
    }
    Ok((global, locals))
}

/// Least-squares slopes of log(cumulative-min subspace change) against
/// log(iteration) for the global and local series of a trace.
pub fn rate_fit(trace: &FitTrace) -> Result<(f64, f64)> {
    if trace.iterations() < 50 {
        return Err(Error::arg(format!(
            "rate fit needs at least 50 iterations, got {}",
            trace.iterations()
        )));
    }
    let global = loglog_slope(&cumulative_min(&trace.global_series()));
    let local = loglog_slope(&cumulative_min(&trace.local_series()));
    Ok((global, local))
}

fn cumulative_min(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut best = f64::INFINITY;
    for &v in series {
        best = best.min(v);
        out.push(best.max(1e-300));
    }
    out
}

fn loglog_slope(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let xs: Vec<f64> = (1..=series.len()).map(|t| (t as f64).ln()).collect();
    let ys: Vec<f64> = series.iter().map(|v| v.ln()).collect();
    let mean_x: f64 = xs.iter().sum::<f64>() / n;
    let mean_y: f64 = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormalize;
    use crate::tensor::{kron_chain, Matrix};
    use rand::Rng;

    fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> FactorMatrix {
        let mut rng = seeding::stream(seed, 0);
        orthonormalize(&Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn kron_error_matches_materialized_chain() {
        let t = vec![random_orthonormal(6, 2, 1), random_orthonormal(5, 3, 2)];
        let e = vec![random_orthonormal(6, 2, 3), random_orthonormal(5, 3, 4)];
        let fast = kron_subspace_error(&t, &e).unwrap();

        // materialized oracle in reverse-mode order
        let tk = kron_chain(&[t[1].matrix(), t[0].matrix()]).unwrap();
        let ek = kron_chain(&[e[1].matrix(), e[0].matrix()]).unwrap();
        let tf = FactorMatrix::new(tk.clone()).unwrap();
        let ef = FactorMatrix::new(ek).unwrap();
        let slow = crate::linalg::subspace_error(&tf, &ef).unwrap() / tk.frob_norm_sq();
        assert!((fast - slow).abs() <= 1e-10 * slow.max(1.0));
    }

    #[test]
    fn identical_factors_give_zero_error() {
        let t = vec![random_orthonormal(6, 2, 5), random_orthonormal(5, 2, 6)];
        assert!(kron_subspace_error(&t, &t).unwrap() <= 1e-12);
    }

    #[test]
    fn orthogonal_estimate_gives_error_two() {
        // estimated chain orthogonal to the truth chain of rank r gives
        // 2r / r = 2 after normalization
        let full = random_orthonormal(8, 4, 7);
        let take = |from: usize, cols: usize| {
            FactorMatrix::new(Matrix::from_fn(8, cols, |i, j| {
                full.matrix().get(i, from + j)
            }))
            .unwrap()
        };
        let t = vec![take(0, 2)];
        let e = vec![take(2, 2)];
        let err = kron_subspace_error(&t, &e).unwrap();
        assert!((err - 2.0).abs() <= 1e-10);
    }

    #[test]
    fn rate_fit_recovers_synthetic_slopes() {
        let mut trace = FitTrace::default();
        for t in 1..=100usize {
            let inv_t = 1.0 / t as f64;
            let inv_sqrt = 1.0 / (t as f64).sqrt();
            trace.objective.push(0.0);
            trace.global_change.push(vec![inv_t]);
            trace.local_change.push(vec![vec![inv_sqrt]]);
        }
        let (g, l) = rate_fit(&trace).unwrap();
        assert!((g - (-1.0)).abs() <= 1e-6, "global slope {}", g);
        assert!((l - (-0.5)).abs() <= 1e-6, "local slope {}", l);
    }

    #[test]
    fn rate_fit_rejects_short_traces() {
        let mut trace = FitTrace::default();
        for _ in 0..10 {
            trace.objective.push(0.0);
            trace.global_change.push(vec![1.0]);
            trace.local_change.push(vec![vec![1.0]]);
        }
        assert!(rate_fit(&trace).is_err());
    }

    fn exact_instance(scale: f64) -> (PerTuckerModel, SimTruth) {
        use crate::engine::{project_onto, FitConfig};
        use crate::tensor::Tensor;
        let mut rng = seeding::stream(31, 0);
        let dims = [6usize, 5];
        let (g, l) = ([2usize, 2], [2usize, 1]);
        let global_factors: Vec<FactorMatrix> = (0..2)
            .map(|k| {
                orthonormalize(&Matrix::from_fn(dims[k], g[k], |_, _| rng.gen_range(-1.0..1.0)))
                    .unwrap()
            })
            .collect();
        let mut local_factors = Vec::new();
        let mut global_components = Vec::new();
        let mut local_components = Vec::new();
        let mut data = Vec::new();
        for _ in 0..2 {
            let per_mode: Vec<FactorMatrix> = (0..2)
                .map(|k| {
                    let raw =
                        Matrix::from_fn(dims[k], l[k], |_, _| rng.gen_range(-1.0..1.0));
                    let mut proj = raw.clone();
                    proj.axpy(-1.0, &global_factors[k].projector().matmul(&raw));
                    orthonormalize(&proj).unwrap()
                })
                .collect();
            let gcore = Tensor::new(
                vec![g[0], g[1], 3],
                (0..g[0] * g[1] * 3).map(|_| scale * rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let lcore = Tensor::new(
                vec![l[0], l[1], 3],
                (0..l[0] * l[1] * 3).map(|_| scale * rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let gcomp = gcore
                .mode_product(global_factors[0].matrix(), 0)
                .unwrap()
                .mode_product(global_factors[1].matrix(), 1)
                .unwrap();
            let lcomp = lcore
                .mode_product(per_mode[0].matrix(), 0)
                .unwrap()
                .mode_product(per_mode[1].matrix(), 1)
                .unwrap();
            data.push(gcomp.add(&lcomp).unwrap());
            global_components.push(gcomp);
            local_components.push(lcomp);
            local_factors.push(per_mode);
        }
        let cfg = FitConfig::new(g.to_vec(), vec![l.to_vec(); 2], vec![0, 1], 31);
        let mut model = PerTuckerModel {
            global_cores: vec![Tensor::zeros(vec![1]); 2],
            local_cores: vec![Tensor::zeros(vec![1]); 2],
            global_factors: global_factors.clone(),
            local_factors,
            config: cfg,
            rho: 0.0,
        };
        for n in 0..2 {
            model.global_cores[n] = project_onto(&data[n], &model.global_factors).unwrap();
            model.local_cores[n] = project_onto(&data[n], &model.local_factors[n]).unwrap();
        }
        let truth = SimTruth {
            global_factors,
            global_cores: Vec::new(),
            global_components,
            local_components,
        };
        (model, truth)
    }

    #[test]
    fn exact_model_scores_zero_on_every_measure() {
        let (model, truth) = exact_instance(1.0);
        let report =
            eval_with_references(&model, &truth, &model.local_factors, 31).unwrap();
        assert!(report.global_subspace_error.unwrap() <= 1e-9);
        assert!(report.local_subspace_error.unwrap() <= 1e-9);
        assert!(report.global_component_error.unwrap() <= 1e-9);
        assert!(report.local_component_error.unwrap() <= 1e-9);
        assert!(report.denoised_error <= 1e-9);
    }

    #[test]
    fn measures_are_scale_consistent() {
        // scaling data and truth together leaves every ratio unchanged
        let (ma, ta) = exact_instance(1.0);
        let (mut mb, tb) = exact_instance(1.0);
        for n in 0..2 {
            mb.global_cores[n] = mb.global_cores[n].scale(3.0);
            // break exactness a little so the ratios are nonzero
            mb.local_cores[n] = mb.local_cores[n].scale(3.3);
        }
        let mut ma2 = ma.clone();
        for n in 0..2 {
            ma2.global_cores[n] = ma.global_cores[n].scale(1.0);
            ma2.local_cores[n] = ma.local_cores[n].scale(1.1);
        }
        let report_a = eval_with_references(&ma2, &ta, &ma2.local_factors, 31).unwrap();
        let scale_truth = |t: &SimTruth| SimTruth {
            global_factors: t.global_factors.clone(),
            global_cores: Vec::new(),
            global_components: t.global_components.iter().map(|x| x.scale(3.0)).collect(),
            local_components: t.local_components.iter().map(|x| x.scale(3.0)).collect(),
        };
        let report_b = eval_with_references(&mb, &scale_truth(&tb), &mb.local_factors, 31).unwrap();
        let a = report_a.local_component_error.unwrap();
        let b = report_b.local_component_error.unwrap();
        assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
        assert!(
            (report_a.denoised_error - report_b.denoised_error).abs()
                <= 1e-9 * report_a.denoised_error.max(1.0)
        );
    }

    #[test]
    fn subspace_errors_are_scale_consistent() {
        // the normalized measures only see subspaces, not data scale
        let t = vec![random_orthonormal(6, 2, 8), random_orthonormal(6, 2, 9)];
        let e = vec![random_orthonormal(6, 2, 10), random_orthonormal(6, 2, 11)];
        let a = kron_subspace_error(&t, &e).unwrap();
        let b = kron_subspace_error(&t, &e).unwrap();
        assert_eq!(a, b);
    }
}
