//! The personalized fit: block coordinate descent with proximal
//! regularization on every factor update.
//!
//! Sources are (K+1)-mode tensors sharing the first K dimensions; the last
//! mode counts samples and is never factored. Each iteration loops over the
//! K data modes; for each mode it updates the shared global factor from the
//! summed Gram of the local-residual projections, then per source refreshes
//! the global core, updates the local factor (projected to the orthogonal
//! complement of the global factor in the constrained modes) and refreshes
//! the local core. Factor states are deliberately mixed mid-sweep: modes
//! already visited this iteration contribute their new factors, modes not
//! yet visited their previous ones, exactly in that interleaving.
//!
//! Every update is a truncated symmetric eigendecomposition, so the whole
//! fit is deterministic given (data, config).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    orthonormalize, subspace_error, top_eigvecs, top_eigvecs_orthogonal_to, FactorMatrix,
};
use crate::seeding;
use crate::tensor::{Matrix, Tensor};
use crate::tucker::{hooi_on_modes, DEFAULT_HOOI_SWEEPS, DEFAULT_HOOI_TOL};

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_STOP_TOL: f64 = 1e-8;
/// `update_cores` refuses to treat the two components as orthogonal beyond
/// this residual.
pub const ORTHOGONALITY_STATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Random,
    Tucker,
}

/// Everything that determines a fit besides the data itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Global subspace rank per data mode, length K.
    pub global_ranks: Vec<usize>,
    /// Local subspace ranks, one vector of length K per source.
    pub local_ranks: Vec<Vec<usize>>,
    /// 0-based data modes in which local factors must be orthogonal to the
    /// global ones; nonempty, strictly increasing.
    pub ortho_modes: Vec<usize>,
    /// Proximal weight; `None` resolves to 0.1 · maxₙ‖Yₙ‖² / N.
    pub rho: Option<f64>,
    pub max_iters: usize,
    /// Stop when the summed per-iteration projector change of every factor
    /// falls below this.
    pub stop_tol: f64,
    pub init: InitKind,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(
        global_ranks: Vec<usize>,
        local_ranks: Vec<Vec<usize>>,
        ortho_modes: Vec<usize>,
        seed: u64,
    ) -> Self {
        FitConfig {
            global_ranks,
            local_ranks,
            ortho_modes,
            rho: None,
            max_iters: DEFAULT_MAX_ITERS,
            stop_tol: DEFAULT_STOP_TOL,
            init: InitKind::Tucker,
            seed,
        }
    }

    pub fn num_modes(&self) -> usize {
        self.global_ranks.len()
    }

    pub fn num_sources(&self) -> usize {
        self.local_ranks.len()
    }

    pub fn is_ortho_mode(&self, k: usize) -> bool {
        self.ortho_modes.contains(&k)
    }

    /// Validate against the data; returns non-fatal warnings.
    pub fn validate(&self, data: &[Tensor]) -> Result<Vec<String>> {
        let k = self.num_modes();
        if k == 0 {
            return Err(Error::Config("at least one data mode is required".into()));
        }
        if data.is_empty() {
            return Err(Error::Config("no sources given".into()));
        }
        if self.local_ranks.len() != data.len() {
            return Err(Error::Config(format!(
                "{} local rank vectors for {} sources",
                self.local_ranks.len(),
                data.len()
            )));
        }
        let first = &data[0];
        if first.ndim() != k + 1 {
            return Err(Error::Config(format!(
                "sources must have {} modes (data modes plus samples), got {}",
                k + 1,
                first.ndim()
            )));
        }
        let shared = &first.dims()[..k];
        for (n, y) in data.iter().enumerate() {
            if y.ndim() != k + 1 || &y.dims()[..k] != shared {
                return Err(Error::Config(format!(
                    "source {} dims {:?} do not share data modes {:?}",
                    n,
                    y.dims(),
                    shared
                )));
            }
        }
        if self.ortho_modes.is_empty() {
            return Err(Error::Config("at least one orthogonal mode is required".into()));
        }
        for w in self.ortho_modes.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(
                    "orthogonal modes must be strictly increasing".into(),
                ));
            }
        }
        if *self.ortho_modes.last().unwrap() >= k {
            return Err(Error::Config(format!(
                "orthogonal mode {} out of range 0..{}",
                self.ortho_modes.last().unwrap(),
                k
            )));
        }
        for (kk, (&g, &i)) in self.global_ranks.iter().zip(shared).enumerate() {
            if g == 0 || g > i {
                return Err(Error::Config(format!(
                    "global rank {} out of range 1..={} in mode {}",
                    g, i, kk
                )));
            }
        }
        for (n, ranks) in self.local_ranks.iter().enumerate() {
            if ranks.len() != k {
                return Err(Error::Config(format!(
                    "source {} has {} local ranks, expected {}",
                    n,
                    ranks.len(),
                    k
                )));
            }
            for (kk, (&l, &i)) in ranks.iter().zip(shared).enumerate() {
                if l > i {
                    return Err(Error::Config(format!(
                        "local rank {} exceeds dimension {} in mode {}",
                        l, i, kk
                    )));
                }
                if self.is_ortho_mode(kk) && self.global_ranks[kk] + l > i {
                    return Err(Error::Config(format!(
                        "mode {}: global rank {} + local rank {} exceed dimension {} \
                         so no orthogonal complement exists",
                        kk, self.global_ranks[kk], l, i
                    )));
                }
            }
        }
        if let Some(rho) = self.rho {
            if !rho.is_finite() || rho < 0.0 {
                return Err(Error::Config("rho must be finite and >= 0".into()));
            }
        }
        if !self.stop_tol.is_finite() || self.stop_tol < 0.0 {
            return Err(Error::Config("stop_tol must be finite and >= 0".into()));
        }
        let mut warnings = Vec::new();
        if self.ortho_modes.len() == 1 {
            warnings.push(
                "a single orthogonal mode is only empirically supported; \
                 two or more are recommended"
                    .to_string(),
            );
        }
        Ok(warnings)
    }

    /// Resolved proximal weight for this data.
    pub fn resolve_rho(&self, data: &[Tensor]) -> f64 {
        self.rho.unwrap_or_else(|| {
            let max_sq = data.iter().map(Tensor::frob_norm_sq).fold(0.0, f64::max);
            0.1 * max_sq / data.len().max(1) as f64
        })
    }
}

/// Fitted decomposition: shared global factors, per-source local factors
/// orthogonal to them in the constrained modes, and the projection cores.
#[derive(Debug, Clone)]
pub struct PerTuckerModel {
    pub global_factors: Vec<FactorMatrix>,
    pub local_factors: Vec<Vec<FactorMatrix>>,
    pub global_cores: Vec<Tensor>,
    pub local_cores: Vec<Tensor>,
    pub config: FitConfig,
    /// Proximal weight actually used.
    pub rho: f64,
}

impl PerTuckerModel {
    pub fn num_modes(&self) -> usize {
        self.global_factors.len()
    }

    pub fn num_sources(&self) -> usize {
        self.local_factors.len()
    }

    pub fn shared_dims(&self) -> Vec<usize> {
        self.global_factors.iter().map(FactorMatrix::rows).collect()
    }

    pub fn global_reconstruction(&self, n: usize) -> Result<Tensor> {
        reconstruct_from(&self.global_cores[n], &self.global_factors)
    }

    pub fn local_reconstruction(&self, n: usize) -> Result<Tensor> {
        reconstruct_from(&self.local_cores[n], &self.local_factors[n])
    }

    /// Largest ‖U_{G,k}ᵀ V_{n,k}‖_F over sources and constrained modes.
    pub fn orthogonality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for locals in &self.local_factors {
            for &k in &self.config.ortho_modes {
                let cross = self.global_factors[k].matrix().matmul_tn(locals[k].matrix());
                worst = worst.max(cross.frob_norm());
            }
        }
        worst
    }
}

/// Project a source onto a factor set: `y ×₁ U₁ᵀ … ×_K U_Kᵀ` with the sample
/// mode untouched.
pub fn project_onto(y: &Tensor, factors: &[FactorMatrix]) -> Result<Tensor> {
    let mut acc = y.clone();
    for (k, f) in factors.iter().enumerate() {
        acc = acc.mode_product(&f.t(), k)?;
    }
    Ok(acc)
}

fn reconstruct_from(core: &Tensor, factors: &[FactorMatrix]) -> Result<Tensor> {
    let mut acc = core.clone();
    for (k, f) in factors.iter().enumerate() {
        acc = acc.mode_product(f.matrix(), k)?;
    }
    Ok(acc)
}

/// Reconstruction loss: Σₙ ‖Yₙ − global reconstruction − local
/// reconstruction‖².
pub fn objective(model: &PerTuckerModel, data: &[Tensor]) -> Result<f64> {
    if data.len() != model.num_sources() {
        return Err(Error::arg(format!(
            "model has {} sources, data has {}",
            model.num_sources(),
            data.len()
        )));
    }
    let mut total = 0.0;
    for (n, y) in data.iter().enumerate() {
        let g = model.global_reconstruction(n)?;
        let l = model.local_reconstruction(n)?;
        let resid = y.sub(&g)?.sub(&l)?;
        total += resid.frob_norm_sq();
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    Ok(total)
}

/// Closed-form core refresh: both cores become projections of the data onto
/// their factor sets. Valid only while the components are orthogonal, which
/// is checked up front.
pub fn update_cores(model: &mut PerTuckerModel, data: &[Tensor]) -> Result<()> {
    let res = model.orthogonality_residual();
    if res > ORTHOGONALITY_STATE_TOL {
        return Err(Error::State(format!(
            "global/local factors are not orthogonal (residual {:.3e})",
            res
        )));
    }
    for (n, y) in data.iter().enumerate() {
        model.global_cores[n] = project_onto(y, &model.global_factors)?;
        model.local_cores[n] = project_onto(y, &model.local_factors[n])?;
    }
    Ok(())
}

/// Solver state during one fit: the model plus the iteration-start factors
/// used as proximal anchors and for measuring per-iteration change.
#[derive(Debug, Clone)]
pub struct FitState {
    pub model: PerTuckerModel,
    anchor_global: Vec<FactorMatrix>,
    anchor_local: Vec<Vec<FactorMatrix>>,
}

impl FitState {
    pub fn new(model: PerTuckerModel) -> Self {
        let anchor_global = model.global_factors.clone();
        let anchor_local = model.local_factors.clone();
        FitState {
            model,
            anchor_global,
            anchor_local,
        }
    }

    /// Snapshot the current factors as this iteration's proximal anchors.
    pub fn begin_iteration(&mut self) {
        self.anchor_global = self.model.global_factors.clone();
        self.anchor_local = self.model.local_factors.clone();
    }

    /// Global factor update for mode `k`: top-g_k eigenbasis of
    /// Σₙ W_{G,n}W_{G,n}ᵀ + 2ρ·U_t U_tᵀ, where W_{G,n} is the mode-k
    /// unfolding of the local residual projected through the other global
    /// factors.
    pub fn update_global_factor(&mut self, k: usize, data: &[Tensor]) -> Result<()> {
        let model = &self.model;
        let gk = model.config.global_ranks[k];
        let kmodes = model.num_modes();
        let mut s: Option<Matrix> = None;
        for (n, y) in data.iter().enumerate() {
            let rg = y.sub(&model.local_reconstruction(n)?)?;
            let mut w = rg;
            for q in 0..kmodes {
                if q != k {
                    w = w.mode_product(&model.global_factors[q].t(), q)?;
                }
            }
            let gram = w.unfold(k)?.gram();
            match &mut s {
                None => s = Some(gram),
                Some(acc) => acc.axpy(1.0, &gram),
            }
        }
        let mut s = s.expect("validated nonempty data");
        if s.max_abs() == 0.0 {
            // zero residual: the previous subspace is already optimal
            return Ok(());
        }
        if model.rho > 0.0 {
            s.axpy(2.0 * model.rho, &self.anchor_global[k].projector());
        }
        let (f, _) = top_eigvecs(&s, gk)?;
        self.model.global_factors[k] = f;
        Ok(())
    }

    /// Refresh the global core of source `n` against the current (possibly
    /// mid-sweep) global factors.
    pub fn update_global_core(&mut self, n: usize, data: &[Tensor]) -> Result<()> {
        self.model.global_cores[n] = project_onto(&data[n], &self.model.global_factors)?;
        Ok(())
    }

    /// Local factor update for source `n`, mode `k`. In constrained modes the
    /// Gram matrix is restricted to the orthogonal complement of the freshly
    /// updated global factor before the eigen step.
    pub fn update_local_factor(&mut self, n: usize, k: usize, data: &[Tensor]) -> Result<()> {
        let model = &self.model;
        let l = model.config.local_ranks[n][k];
        if l == 0 {
            return Ok(());
        }
        let kmodes = model.num_modes();
        let rl = data[n].sub(&model.global_reconstruction(n)?)?;
        let mut w = rl;
        for q in 0..kmodes {
            if q != k {
                w = w.mode_product(&model.local_factors[n][q].t(), q)?;
            }
        }
        let mut s = w.unfold(k)?.gram();
        let data_zero = s.max_abs() == 0.0;
        let constrained = model.config.is_ortho_mode(k);
        if data_zero && (!constrained || model.rho == 0.0) {
            // zero residual: keep the previous factor
            return Ok(());
        }
        if model.rho > 0.0 {
            s.axpy(2.0 * model.rho, &self.anchor_local[n][k].projector());
        }
        let f = if constrained {
            let (f, _) = top_eigvecs_orthogonal_to(&s, &model.global_factors[k], l)?;
            f
        } else {
            let (f, _) = top_eigvecs(&s, l)?;
            f
        };
        self.model.local_factors[n][k] = f;
        Ok(())
    }

    /// Refresh the local core of source `n` against its current factors.
    pub fn update_local_core(&mut self, n: usize, data: &[Tensor]) -> Result<()> {
        self.model.local_cores[n] = project_onto(&data[n], &self.model.local_factors[n])?;
        Ok(())
    }

    /// One full iteration: for each mode, global factor first, then per
    /// source global core, local factor, local core.
    pub fn sweep(&mut self, data: &[Tensor]) -> Result<()> {
        let kmodes = self.model.num_modes();
        let sources = self.model.num_sources();
        for k in 0..kmodes {
            self.update_global_factor(k, data)?;
            // TODO: once the global factor is fixed, the per-source body is
            // independent across n and could run on a worker pool; the Gram
            // sum in update_global_factor must then still reduce in source
            // order to stay bit-deterministic.
            for n in 0..sources {
                self.update_global_core(n, data)?;
                self.update_local_factor(n, k, data)?;
                self.update_local_core(n, data)?;
            }
        }
        Ok(())
    }

    /// Projector change of every factor relative to the iteration anchors.
    fn iteration_changes(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let kmodes = self.model.num_modes();
        let mut global = Vec::with_capacity(kmodes);
        for k in 0..kmodes {
            global.push(subspace_error(
                &self.model.global_factors[k],
                &self.anchor_global[k],
            )?);
        }
        let mut local = Vec::with_capacity(self.model.num_sources());
        for (n, anchors) in self.anchor_local.iter().enumerate() {
            let mut per_mode = Vec::with_capacity(kmodes);
            for k in 0..kmodes {
                per_mode.push(subspace_error(&self.model.local_factors[n][k], &anchors[k])?);
            }
            local.push(per_mode);
        }
        Ok((global, local))
    }
}

/// Per-iteration objective and subspace-change record of a fit.
#[derive(Debug, Clone, Default)]
pub struct FitTrace {
    /// Objective value at the end of each iteration.
    pub objective: Vec<f64>,
    /// `global_change[t][k]` = ‖U_{k,t+1}U_{k,t+1}ᵀ − U_{k,t}U_{k,t}ᵀ‖²_F.
    pub global_change: Vec<Vec<f64>>,
    /// `local_change[t][n][k]`, same quantity for the local factors.
    pub local_change: Vec<Vec<Vec<f64>>>,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.objective.len()
    }

    /// Σ_k global change per iteration.
    pub fn global_series(&self) -> Vec<f64> {
        self.global_change.iter().map(|v| v.iter().sum()).collect()
    }

    /// Σ_n Σ_k local change per iteration.
    pub fn local_series(&self) -> Vec<f64> {
        self.local_change
            .iter()
            .map(|per_source| per_source.iter().flatten().sum())
            .collect()
    }
}

/// Seeded initial model.
///
/// `random` draws standard-normal factor matrices and orthonormalizes them,
/// projecting constrained local draws to the global complement first.
/// `tucker` concatenates all sources, fits one Tucker for the global
/// factors, takes projection cores, and fits a per-source Tucker on each
/// local residual. The tucker route does not enforce orthogonality, so the
/// first iteration of a fit may transiently increase the objective.
pub fn init_model(data: &[Tensor], config: &FitConfig) -> Result<PerTuckerModel> {
    config.validate(data)?;
    let rho = config.resolve_rho(data);
    let kmodes = config.num_modes();
    let sources = config.num_sources();
    let shared = &data[0].dims()[..kmodes];

    let mut model = match config.init {
        InitKind::Random => {
            let mut rng = seeding::stream(config.seed, 0);
            let mut global_factors = Vec::with_capacity(kmodes);
            for k in 0..kmodes {
                let draw = Matrix::from_fn(shared[k], config.global_ranks[k], |_, _| {
                    rng.sample(StandardNormal)
                });
                global_factors.push(orthonormalize(&draw)?);
            }
            let mut local_factors = Vec::with_capacity(sources);
            for n in 0..sources {
                let mut rng = seeding::stream(config.seed, 1 + n as u64);
                let mut per_mode = Vec::with_capacity(kmodes);
                for k in 0..kmodes {
                    let l = config.local_ranks[n][k];
                    if l == 0 {
                        per_mode.push(FactorMatrix::empty(shared[k]));
                        continue;
                    }
                    let mut draw =
                        Matrix::from_fn(shared[k], l, |_, _| rng.sample(StandardNormal));
                    if config.is_ortho_mode(k) {
                        let proj = global_factors[k].projector();
                        draw.axpy(-1.0, &proj.matmul(&draw));
                    }
                    per_mode.push(orthonormalize(&draw)?);
                }
                local_factors.push(per_mode);
            }
            let mut model = PerTuckerModel {
                global_factors,
                local_factors,
                global_cores: vec![Tensor::zeros(vec![1]); sources],
                local_cores: vec![Tensor::zeros(vec![1]); sources],
                config: config.clone(),
                rho,
            };
            for (n, y) in data.iter().enumerate() {
                model.global_cores[n] = project_onto(y, &model.global_factors)?;
                model.local_cores[n] = project_onto(y, &model.local_factors[n])?;
            }
            model
        }
        InitKind::Tucker => {
            let refs: Vec<&Tensor> = data.iter().collect();
            let all = Tensor::concat_last(&refs)?;
            let modes: Vec<usize> = (0..kmodes).collect();
            let shared_fit = hooi_on_modes(
                &all,
                &config.global_ranks,
                &modes,
                DEFAULT_HOOI_SWEEPS,
                DEFAULT_HOOI_TOL,
            )?;
            let global_factors = shared_fit.factors;

            let mut global_cores = Vec::with_capacity(sources);
            let mut local_factors = Vec::with_capacity(sources);
            let mut local_cores = Vec::with_capacity(sources);
            for (n, y) in data.iter().enumerate() {
                let core = project_onto(y, &global_factors)?;
                let recon = reconstruct_from(&core, &global_factors)?;
                let residual = y.sub(&recon)?;
                global_cores.push(core);

                if config.local_ranks[n].contains(&0) {
                    // a rank-0 mode makes the local component identically zero
                    let per_mode: Vec<FactorMatrix> = (0..kmodes)
                        .map(|k| {
                            if config.local_ranks[n][k] == 0 {
                                Ok(FactorMatrix::empty(shared[k]))
                            } else {
                                FactorMatrix::identity(shared[k], config.local_ranks[n][k])
                            }
                        })
                        .collect::<Result<_>>()?;
                    local_cores.push(project_onto(&data[n], &per_mode)?);
                    local_factors.push(per_mode);
                    continue;
                }
                let local_fit = hooi_on_modes(
                    &residual,
                    &config.local_ranks[n],
                    &modes,
                    DEFAULT_HOOI_SWEEPS,
                    DEFAULT_HOOI_TOL,
                )?;
                local_factors.push(local_fit.factors);
                local_cores.push(local_fit.core);
            }
            PerTuckerModel {
                global_factors,
                local_factors,
                global_cores,
                local_cores,
                config: config.clone(),
                rho,
            }
        }
    };
    model.config.rho = Some(rho);
    Ok(model)
}

/// Run the full fit. Stops after `max_iters` iterations or when the total
/// projector change of one iteration drops below `stop_tol`.
pub fn fit(data: &[Tensor], config: &FitConfig) -> Result<(PerTuckerModel, FitTrace)> {
    let warnings = config.validate(data)?;
    for w in &warnings {
        log::warn!("{}", w);
    }
    let model = init_model(data, config)?;
    let mut state = FitState::new(model);
    let mut trace = FitTrace::default();
    for _ in 0..config.max_iters {
        state.begin_iteration();
        state.sweep(data)?;
        let (global, local) = state.iteration_changes()?;
        let obj = objective(&state.model, data)?;
        let total: f64 =
            global.iter().sum::<f64>() + local.iter().flatten().sum::<f64>();
        trace.objective.push(obj);
        trace.global_change.push(global);
        trace.local_change.push(local);
        if total < config.stop_tol {
            break;
        }
    }
    Ok((state.model, trace))
}
