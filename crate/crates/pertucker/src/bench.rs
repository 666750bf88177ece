//! Reproducible experiment protocols: component-recovery comparison against
//! the single-decomposition baselines, classification accuracy versus
//! training size, the anomaly-injection stream, and the ratio-grid
//! clustering study. Each run is fully determined by (seed, repeats);
//! repeats execute in parallel but aggregate in index order.

use rayon::prelude::*;

use crate::apps::{
    self, classify, fit_control_limit, monitor_statistic, mds_embed, spectral_cluster,
    ClassifierModel, ClusterReport, LimitPolicy, MonitorConfig,
};
use crate::engine::{fit, FitConfig, InitKind, PerTuckerModel};
use crate::error::Result;
use crate::metrics::{
    eval_against_truth, eval_global_tucker, eval_local_tucker, EvalReport,
};
use crate::seeding;
use crate::simgen::{
    gen_batch, gen_dataset, gen_global_factors, PatternKind, SimConfig, SourceSpec,
};
use crate::tensor::Tensor;
use crate::tucker::{global_tucker, local_tucker};

/// Experiment-wide fit parameters for the pattern studies.
pub const STUDY_GLOBAL_RANKS: [usize; 2] = [5, 5];
pub const STUDY_LOCAL_RANKS: [usize; 2] = [5, 5];
/// The per-source baseline gets the combined capacity.
pub const LOCAL_TUCKER_RANKS: [usize; 2] = [10, 10];
pub const STUDY_MAX_ITERS: usize = 100;
pub const STUDY_STOP_TOL: f64 = 1e-7;

/// Fit configuration used by all pattern-image studies.
pub fn study_fit_config(sources: usize, seed: u64) -> FitConfig {
    let mut cfg = FitConfig::new(
        STUDY_GLOBAL_RANKS.to_vec(),
        vec![STUDY_LOCAL_RANKS.to_vec(); sources],
        vec![0, 1],
        seed,
    );
    cfg.max_iters = STUDY_MAX_ITERS;
    cfg.stop_tol = STUDY_STOP_TOL;
    cfg.init = InitKind::Tucker;
    cfg
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct MethodRow {
    pub method: String,
    /// (mean, std) per metric in report order; `None` where the method has
    /// no such component.
    pub global_subspace_error: Option<(f64, f64)>,
    pub local_subspace_error: Option<(f64, f64)>,
    pub global_component_error: Option<(f64, f64)>,
    pub local_component_error: Option<(f64, f64)>,
    pub denoised_error: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct ComponentStudy {
    pub rows: Vec<MethodRow>,
    /// Raw reports per method, repeat-indexed.
    pub reports: Vec<(String, Vec<EvalReport>)>,
}

fn aggregate(method: &str, reports: &[EvalReport]) -> MethodRow {
    let collect = |f: fn(&EvalReport) -> Option<f64>| -> Option<(f64, f64)> {
        let vals: Vec<f64> = reports.iter().filter_map(f).collect();
        if vals.len() == reports.len() {
            Some(mean_std(&vals))
        } else {
            None
        }
    };
    MethodRow {
        method: method.to_string(),
        global_subspace_error: collect(|r| r.global_subspace_error),
        local_subspace_error: collect(|r| r.local_subspace_error),
        global_component_error: collect(|r| r.global_component_error),
        local_component_error: collect(|r| r.local_component_error),
        denoised_error: mean_std(
            &reports.iter().map(|r| r.denoised_error).collect::<Vec<_>>(),
        ),
    }
}

/// Samples per source for the component-recovery study. The three-class
/// generator defaults to 10 samples, but at that size the best achievable
/// global subspace error of any mode-Gram eigenestimator is ~1.3e-2 (the
/// noise floor scales as σ²/λ per direction pair), an order of magnitude
/// above the recovery this study is expected to show; at 100 samples —
/// the same count the local-subspace reference factors are built from —
/// the floor drops to ~1e-3, which is the regime the comparison probes.
pub const STUDY_SAMPLES: usize = 100;

/// One repeat of the component-recovery study on the three-class data.
fn component_repeat(seed: u64) -> Result<(EvalReport, EvalReport, EvalReport)> {
    let mut sim = SimConfig::three_class(seed);
    for s in &mut sim.sources {
        s.samples = STUDY_SAMPLES;
    }
    let (data, truth) = gen_dataset(&sim)?;

    let cfg = study_fit_config(data.len(), seed);
    let (model, _) = fit(&data, &cfg)?;
    let per = eval_against_truth(&model, &truth, &sim)?;

    let shared = global_tucker(&data, &STUDY_GLOBAL_RANKS, 50, 1e-8)?;
    let counts: Vec<usize> = data.iter().map(|y| *y.dims().last().unwrap()).collect();
    let global = eval_global_tucker(&shared, &truth, &sim, &counts)?;

    let per_source = local_tucker(&data, &LOCAL_TUCKER_RANKS, 50, 1e-8)?;
    let reference_ranks = vec![STUDY_LOCAL_RANKS.to_vec(); data.len()];
    let local = eval_local_tucker(&per_source, &truth, &sim, &reference_ranks)?;
    Ok((per, global, local))
}

/// Component-recovery comparison over `repeats` seeded repetitions.
pub fn run_component_study(repeats: usize, seed: u64) -> Result<ComponentStudy> {
    let results: Vec<Result<(EvalReport, EvalReport, EvalReport)>> = (0..repeats)
        .into_par_iter()
        .map(|i| component_repeat(seeding::derive_seed(seed, &format!("component-{}", i))))
        .collect();
    let mut per = Vec::with_capacity(repeats);
    let mut global = Vec::with_capacity(repeats);
    let mut local = Vec::with_capacity(repeats);
    for r in results {
        let (p, g, l) = r?;
        per.push(p);
        global.push(g);
        local.push(l);
    }
    Ok(ComponentStudy {
        rows: vec![
            aggregate("perTucker", &per),
            aggregate("globalTucker", &global),
            aggregate("localTucker", &local),
        ],
        reports: vec![
            ("perTucker".into(), per),
            ("globalTucker".into(), global),
            ("localTucker".into(), local),
        ],
    })
}

/// CSV with one row per method; empty cells where a method has no such
/// component.
pub fn component_study_csv(study: &ComponentStudy) -> String {
    let mut out = String::from(
        "method,global_subspace_error_mean,global_subspace_error_std,\
         local_subspace_error_mean,local_subspace_error_std,\
         global_component_error_mean,global_component_error_std,\
         local_component_error_mean,local_component_error_std,\
         denoised_error_mean,denoised_error_std\n",
    );
    for row in &study.rows {
        let cell = |v: Option<(f64, f64)>| match v {
            Some((m, s)) => format!("{:.6e},{:.6e}", m, s),
            None => ",".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{:.6e},{:.6e}\n",
            row.method,
            cell(row.global_subspace_error),
            cell(row.local_subspace_error),
            cell(row.global_component_error),
            cell(row.local_component_error),
            row.denoised_error.0,
            row.denoised_error.1
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ClassificationStudy {
    pub train_sizes: Vec<usize>,
    /// accuracy (mean, std) per training size
    pub accuracy: Vec<(f64, f64)>,
    pub per_repeat: Vec<Vec<f64>>,
}

pub const TEST_IMAGES_PER_CLASS: usize = 50;

/// One repeat at one training size: fit on fresh training data, classify
/// fresh test images drawn against the same shared background factors.
fn classification_repeat(train_size: usize, seed: u64) -> Result<f64> {
    let mut sim = SimConfig::three_class(seed);
    for s in &mut sim.sources {
        s.samples = train_size;
    }
    let (train, _) = gen_dataset(&sim)?;
    let cfg = study_fit_config(train.len(), seed);
    let (model, _) = fit(&train, &cfg)?;
    let labels = sim.sources.iter().map(|s| s.kind.name().to_string()).collect();
    let classifier = ClassifierModel::from_model(&model, labels)?;

    let globals = gen_global_factors(&sim)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for (class, spec) in sim.sources.iter().enumerate() {
        let batch = gen_batch(
            &sim,
            &globals,
            spec,
            TEST_IMAGES_PER_CLASS,
            seeding::derive_seed(sim.seed, &format!("test-{}", class)),
        )?;
        for s in 0..TEST_IMAGES_PER_CLASS {
            let sample = batch.data.slice_last(s)?;
            let out = classify(&classifier, &sample)?;
            if out.label == class {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

/// Classification accuracy over seeded repeats for each training size.
pub fn run_classification_study(
    repeats: usize,
    train_sizes: &[usize],
    seed: u64,
) -> Result<ClassificationStudy> {
    let mut accuracy = Vec::with_capacity(train_sizes.len());
    let mut per_repeat = Vec::with_capacity(train_sizes.len());
    for &size in train_sizes {
        let results: Vec<Result<f64>> = (0..repeats)
            .into_par_iter()
            .map(|i| {
                classification_repeat(
                    size,
                    seeding::derive_seed(seed, &format!("classify-{}-{}", size, i)),
                )
            })
            .collect();
        let vals = results.into_iter().collect::<Result<Vec<f64>>>()?;
        accuracy.push(mean_std(&vals));
        per_repeat.push(vals);
    }
    Ok(ClassificationStudy {
        train_sizes: train_sizes.to_vec(),
        accuracy,
        per_repeat,
    })
}

pub fn classification_study_csv(study: &ClassificationStudy) -> String {
    let mut out = String::from("train_size,accuracy_mean,accuracy_std,repeats\n");
    for (i, &size) in study.train_sizes.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.6},{:.6},{}\n",
            size, study.accuracy[i].0, study.accuracy[i].1, study.per_repeat[i].len()
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct InjectionStudy {
    pub stats: Vec<f64>,
    pub monitor: MonitorConfig,
    pub alarms: Vec<bool>,
    /// Indices (0-based) of the injected frames.
    pub injected: Vec<usize>,
    pub detected: usize,
    pub false_alarms: usize,
}

pub const INJECTION_BACKGROUND: usize = 40;
pub const INJECTION_ANOMALIES: usize = 10;

/// Anomaly stream: background-only frames followed by frames with an
/// injected pattern, fit as a single source so the local component is
/// forced orthogonal to the slowly varying background, then monitored with
/// the local-core statistic and a limit fitted on the background window.
pub fn run_injection_study(seed: u64) -> Result<InjectionStudy> {
    let sim = SimConfig {
        sources: vec![SourceSpec {
            kind: PatternKind::Swiss,
            ratio_range: (0.9, 1.1),
            samples: INJECTION_BACKGROUND,
        }],
        ..SimConfig::three_class(seed)
    };
    let globals = gen_global_factors(&sim)?;

    // background-only window: drop the pattern stack, keep background+noise
    let bg = gen_batch(
        &sim,
        &globals,
        &sim.sources[0],
        INJECTION_BACKGROUND,
        seeding::derive_seed(seed, "injection-background"),
    )?;
    let background = bg.data.sub(&bg.local_component)?;
    let injected = gen_batch(
        &sim,
        &globals,
        &sim.sources[0],
        INJECTION_ANOMALIES,
        seeding::derive_seed(seed, "injection-anomaly"),
    )?;
    let stream = Tensor::concat_last(&[&background, &injected.data])?;

    let mut cfg = FitConfig::new(
        STUDY_GLOBAL_RANKS.to_vec(),
        vec![vec![3, 3]],
        vec![0, 1],
        seed,
    );
    cfg.max_iters = STUDY_MAX_ITERS;
    cfg.stop_tol = STUDY_STOP_TOL;
    let (model, _) = fit(std::slice::from_ref(&stream), &cfg)?;

    let frames = INJECTION_BACKGROUND + INJECTION_ANOMALIES;
    let mut stats = Vec::with_capacity(frames);
    for s in 0..frames {
        let frame = stream.slice_last(s)?;
        stats.push(monitor_statistic(&model.local_factors[0], &frame)?);
    }
    let monitor = fit_control_limit(&stats[..INJECTION_BACKGROUND], LimitPolicy::default())?;
    let alarms: Vec<bool> = stats.iter().map(|&s| apps::detect(&monitor, s)).collect();
    let detected = alarms[INJECTION_BACKGROUND..].iter().filter(|&&a| a).count();
    let false_alarms = alarms[..INJECTION_BACKGROUND].iter().filter(|&&a| a).count();
    Ok(InjectionStudy {
        stats,
        monitor,
        alarms,
        injected: (INJECTION_BACKGROUND..frames).collect(),
        detected,
        false_alarms,
    })
}

pub fn injection_study_csv(study: &InjectionStudy) -> String {
    let mut out = String::from("frame,statistic,control_limit,alarm,injected\n");
    for (i, (&stat, &alarm)) in study.stats.iter().zip(&study.alarms).enumerate() {
        out.push_str(&format!(
            "{},{:.10e},{:.10e},{},{}\n",
            i + 1,
            stat,
            study.monitor.control_limit,
            alarm as u8,
            study.injected.contains(&i) as u8
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ClusteringStudy {
    pub report: ClusterReport,
    /// Ratio-bin index of each client.
    pub bins: Vec<usize>,
    /// Fraction of (a,b,c) triples with |bin(a)−bin(b)| = 1 and
    /// |bin(a)−bin(c)| ≥ 3 for which ρ(a,b) < ρ(a,c).
    pub ordinal_consistency: f64,
}

pub const CLUSTER_BINS: usize = 7;
pub const CLUSTER_CLIENTS_PER_BIN: usize = 3;
pub const CLUSTER_SAMPLES: usize = 30;
pub const CLUSTER_RATIO_LO: f64 = 0.7;
pub const CLUSTER_BIN_WIDTH: f64 = 0.1;
/// Low local rank keeps the client distances driven by the pattern shape
/// rather than by absorbed noise directions.
pub const CLUSTER_LOCAL_RANK: usize = 2;

/// Ratio-grid clustering study: 7 adjacent ratio bins × 3 clients of one
/// pattern family, fitted jointly; clients are then compared by the
/// projector distance of their local factor chains.
pub fn run_clustering_study(seed: u64, clusters: usize) -> Result<ClusteringStudy> {
    let mut sources = Vec::new();
    let mut bins = Vec::new();
    for bin in 0..CLUSTER_BINS {
        let lo = CLUSTER_RATIO_LO + bin as f64 * CLUSTER_BIN_WIDTH;
        for _ in 0..CLUSTER_CLIENTS_PER_BIN {
            sources.push(SourceSpec {
                kind: PatternKind::Swiss,
                ratio_range: (lo, lo + CLUSTER_BIN_WIDTH),
                samples: CLUSTER_SAMPLES,
            });
            bins.push(bin);
        }
    }
    let sim = SimConfig {
        sources,
        ..SimConfig::three_class(seed)
    };
    let (data, _) = gen_dataset(&sim)?;

    let mut cfg = FitConfig::new(
        STUDY_GLOBAL_RANKS.to_vec(),
        vec![vec![CLUSTER_LOCAL_RANK, CLUSTER_LOCAL_RANK]; data.len()],
        vec![0, 1],
        seed,
    );
    cfg.max_iters = STUDY_MAX_ITERS;
    cfg.stop_tol = STUDY_STOP_TOL;
    let (model, _) = fit(&data, &cfg)?;
    cluster_model(&model, &bins, clusters, seed)
}

/// Distance matrix, clustering and embedding of an already fitted model.
pub fn cluster_model(
    model: &PerTuckerModel,
    bins: &[usize],
    clusters: usize,
    seed: u64,
) -> Result<ClusteringStudy> {
    let distances = apps::subspace_distance_matrix(&model.local_factors)?;
    let assignments = spectral_cluster(&distances, clusters, seed)?;
    let embedding = mds_embed(&distances, 2)?;
    let n = bins.len();
    let mut hits = 0usize;
    let mut total = 0usize;
    for a in 0..n {
        for b in 0..n {
            if b == a || bins[a].abs_diff(bins[b]) != 1 {
                continue;
            }
            for c in 0..n {
                if c == a || c == b || bins[a].abs_diff(bins[c]) < 3 {
                    continue;
                }
                total += 1;
                if distances.get(a, b) < distances.get(a, c) {
                    hits += 1;
                }
            }
        }
    }
    Ok(ClusteringStudy {
        report: ClusterReport {
            distances,
            assignments,
            embedding,
        },
        bins: bins.to_vec(),
        ordinal_consistency: if total == 0 {
            1.0
        } else {
            hits as f64 / total as f64
        },
    })
}
