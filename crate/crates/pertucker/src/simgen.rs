//! Synthetic data: pattern images over a shared low-rank background, and
//! noiseless planted models for convergence studies.
//!
//! Each simulated sample is a `side × side` grayscale image equal to
//! (global background) + (pattern) + (noise). The background is a random
//! rank-(g₁,g₂) Tucker component shared across sources; the pattern is a
//! binary-support shape scaled by `amplitude`; the noise is i.i.d. normal.
//!
//! Pattern geometry, parametrized by a per-sample `ratio` drawn uniformly
//! from the source's range (valid ratios are 0.5..=2.0, sizes below are
//! fractions of `side`). The three families sit at different positions so
//! their mode profiles stay distinguishable, and their supports are kept
//! small enough that the shared background dominates every mode-Gram
//! direction:
//!
//! - `swiss`: a plus shape centered at (0.34, 0.34)·side; both arms have
//!   half-length (0.04 + 0.12·ratio)·side and a half-thickness that tapers
//!   elliptically from 0.018·ratio·side at the middle to zero at the tips,
//!   so thickness (and length, slightly) grow with `ratio`.
//! - `oval`: a filled ellipse centered at (0.66, 0.66)·side with horizontal
//!   semi-axis 0.05·ratio·side and vertical semi-axis 0.05·side: tall for
//!   ratio < 1, circular at 1, wide for ratio > 1; the support count grows
//!   with `ratio`.
//! - `rectangle`: a filled axis-aligned rectangle at the image center with
//!   half-width 0.042·√ratio·side and half-height 0.042/√ratio·side:
//!   constant area, square (and 4-fold symmetric about the image center) at
//!   ratio 1.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, FactorMatrix};
use crate::seeding;
use crate::tensor::{Matrix, Tensor};

pub const RATIO_MIN: f64 = 0.5;
pub const RATIO_MAX: f64 = 2.0;
pub const DEFAULT_SIDE: usize = 50;
pub const DEFAULT_AMPLITUDE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Swiss,
    Oval,
    Rectangle,
}

impl PatternKind {
    pub fn name(&self) -> &'static str {
        match self {
            PatternKind::Swiss => "swiss",
            PatternKind::Oval => "oval",
            PatternKind::Rectangle => "rectangle",
        }
    }
}

/// One concrete pattern image: kind, shape ratio, image side, amplitude.
#[derive(Debug, Clone)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub ratio: f64,
    pub side: usize,
    pub amplitude: f64,
}

impl PatternSpec {
    pub fn new(kind: PatternKind, ratio: f64) -> Self {
        PatternSpec {
            kind,
            ratio,
            side: DEFAULT_SIDE,
            amplitude: DEFAULT_AMPLITUDE,
        }
    }
}

/// Render the binary-support pattern scaled by its amplitude as a 2-mode
/// `side × side` tensor (mode 1 = image row, mode 2 = image column).
pub fn gen_pattern_image(spec: &PatternSpec) -> Result<Tensor> {
    if !(spec.ratio >= RATIO_MIN && spec.ratio <= RATIO_MAX) {
        return Err(Error::arg(format!(
            "ratio {} outside the valid range [{}, {}]",
            spec.ratio, RATIO_MIN, RATIO_MAX
        )));
    }
    if spec.side == 0 {
        return Err(Error::arg("image side must be positive"));
    }
    if !(spec.amplitude > 0.0) {
        return Err(Error::arg("amplitude must be positive"));
    }
    let s = spec.side;
    let scale = s as f64;
    let image_center = (scale - 1.0) / 2.0;
    let (cx, cy) = match spec.kind {
        PatternKind::Swiss => (0.34 * scale, 0.34 * scale),
        PatternKind::Oval => (0.66 * scale, 0.66 * scale),
        PatternKind::Rectangle => (image_center, image_center),
    };
    let inside = |dx: f64, dy: f64| -> bool {
        match spec.kind {
            PatternKind::Swiss => {
                let arm_len = (0.04 + 0.12 * spec.ratio) * scale;
                let half_w = 0.018 * scale * spec.ratio;
                let taper = |along: f64| -> f64 {
                    let u = along / arm_len;
                    if u.abs() >= 1.0 {
                        0.0
                    } else {
                        half_w * (1.0 - u * u).sqrt()
                    }
                };
                (dy.abs() <= arm_len && dx.abs() <= taper(dy))
                    || (dx.abs() <= arm_len && dy.abs() <= taper(dx))
            }
            PatternKind::Oval => {
                let a = 0.05 * scale * spec.ratio;
                let b = 0.05 * scale;
                (dx / a) * (dx / a) + (dy / b) * (dy / b) <= 1.0
            }
            PatternKind::Rectangle => {
                let a = 0.042 * scale * spec.ratio.sqrt();
                let b = 0.042 * scale / spec.ratio.sqrt();
                dx.abs() <= a && dy.abs() <= b
            }
        }
    };
    // canonical layout: mode-1 (row) index fastest
    let mut data = vec![0.0; s * s];
    for col in 0..s {
        for row in 0..s {
            // dx spans columns, dy rows
            let dx = col as f64 - cx;
            let dy = row as f64 - cy;
            if inside(dx, dy) {
                data[col * s + row] = spec.amplitude;
            }
        }
    }
    Tensor::new(vec![s, s], data)
}

/// One simulated source: its pattern family and sampling window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: PatternKind,
    pub ratio_range: (f64, f64),
    pub samples: usize,
}

/// Full simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub sources: Vec<SourceSpec>,
    pub side: usize,
    pub amplitude: f64,
    /// Ranks of the shared background in the two image modes.
    pub global_ranks: (usize, usize),
    /// Standard deviation of the background core entries.
    pub global_core_std: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl SimConfig {
    /// The default three-class setup: swiss, oval and rectangle sources with
    /// 10 samples each over 50×50 images, background rank (5,5) with core
    /// std 10, unit noise.
    pub fn three_class(seed: u64) -> Self {
        let default_range = (0.7, 1.4);
        SimConfig {
            sources: [PatternKind::Swiss, PatternKind::Oval, PatternKind::Rectangle]
                .into_iter()
                .map(|kind| SourceSpec {
                    kind,
                    ratio_range: default_range,
                    samples: 10,
                })
                .collect(),
            side: DEFAULT_SIDE,
            amplitude: DEFAULT_AMPLITUDE,
            global_ranks: (5, 5),
            global_core_std: 10.0,
            noise_std: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("at least one source is required".into()));
        }
        if self.side == 0 {
            return Err(Error::Config("image side must be positive".into()));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config("amplitude must be positive".into()));
        }
        let (g1, g2) = self.global_ranks;
        if g1 == 0 || g2 == 0 || g1 > self.side || g2 > self.side {
            return Err(Error::Config(format!(
                "global ranks {:?} out of range for side {}",
                self.global_ranks, self.side
            )));
        }
        if !(self.global_core_std.is_finite() && self.global_core_std >= 0.0)
            || !(self.noise_std.is_finite() && self.noise_std >= 0.0)
        {
            return Err(Error::Config("scales must be finite and >= 0".into()));
        }
        for (n, src) in self.sources.iter().enumerate() {
            if src.samples == 0 {
                return Err(Error::Config(format!("source {} has no samples", n)));
            }
            let (lo, hi) = src.ratio_range;
            if !(lo >= RATIO_MIN && hi <= RATIO_MAX && lo <= hi) {
                return Err(Error::Config(format!(
                    "source {} ratio range {:?} outside [{}, {}]",
                    n, src.ratio_range, RATIO_MIN, RATIO_MAX
                )));
            }
        }
        Ok(())
    }
}

/// Ground truth accompanying a simulated dataset.
#[derive(Debug, Clone)]
pub struct SimTruth {
    pub global_factors: Vec<FactorMatrix>,
    pub global_cores: Vec<Tensor>,
    /// Per-source background stacks `side × side × samples`.
    pub global_components: Vec<Tensor>,
    /// Per-source noiseless pattern stacks.
    pub local_components: Vec<Tensor>,
}

/// One freshly drawn batch from a single source.
pub struct SampleBatch {
    pub data: Tensor,
    pub global_core: Tensor,
    pub global_component: Tensor,
    pub local_component: Tensor,
}

/// Draw `count` samples of one source against the given shared background
/// factors, deterministically from `seed` (independent substreams for core,
/// ratios and noise).
pub fn gen_batch(
    cfg: &SimConfig,
    global_factors: &[FactorMatrix],
    spec: &SourceSpec,
    count: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let s = cfg.side;
    let (g1, g2) = cfg.global_ranks;
    let mut core_rng = seeding::stream(seed, 0);
    let mut ratio_rng = seeding::stream(seed, 1);
    let mut noise_rng = seeding::stream(seed, 2);

    let core_len = g1 * g2 * count;
    let core_data: Vec<f64> = (0..core_len)
        .map(|_| cfg.global_core_std * core_rng.sample::<f64, _>(StandardNormal))
        .collect();
    let global_core = Tensor::new(vec![g1, g2, count], core_data)?;
    let global_component = global_core
        .mode_product(global_factors[0].matrix(), 0)?
        .mode_product(global_factors[1].matrix(), 1)?;

    let local_component = sample_patterns(s, cfg.amplitude, spec, count, &mut ratio_rng)?;

    let mut data = global_component.add(&local_component)?;
    if cfg.noise_std > 0.0 {
        let noise: Vec<f64> = (0..data.len())
            .map(|_| cfg.noise_std * noise_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let noise = Tensor::new(data.dims().to_vec(), noise)?;
        data = data.add(&noise)?;
    }
    Ok(SampleBatch {
        data,
        global_core,
        global_component,
        local_component,
    })
}

fn sample_patterns(
    side: usize,
    amplitude: f64,
    spec: &SourceSpec,
    count: usize,
    ratio_rng: &mut rand_chacha::ChaCha12Rng,
) -> Result<Tensor> {
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let ratio = if spec.ratio_range.0 == spec.ratio_range.1 {
            spec.ratio_range.0
        } else {
            ratio_rng.gen_range(spec.ratio_range.0..spec.ratio_range.1)
        };
        images.push(gen_pattern_image(&PatternSpec {
            kind: spec.kind,
            ratio,
            side,
            amplitude,
        })?);
    }
    let refs: Vec<&Tensor> = images.iter().collect();
    Tensor::stack_last(&refs)
}

/// A stack of `count` noiseless pattern images from one source family,
/// deterministic from `seed` (same ratio substream as [`gen_batch`]).
pub fn gen_pattern_stack(
    cfg: &SimConfig,
    spec: &SourceSpec,
    count: usize,
    seed: u64,
) -> Result<Tensor> {
    let mut ratio_rng = seeding::stream(seed, 1);
    sample_patterns(cfg.side, cfg.amplitude, spec, count, &mut ratio_rng)
}

/// Generate the full dataset plus ground truth, seed-deterministic.
pub fn gen_dataset(cfg: &SimConfig) -> Result<(Vec<Tensor>, SimTruth)> {
    cfg.validate()?;
    let global_factors = gen_global_factors(cfg)?;
    let mut data = Vec::with_capacity(cfg.sources.len());
    let mut truth = SimTruth {
        global_factors,
        global_cores: Vec::new(),
        global_components: Vec::new(),
        local_components: Vec::new(),
    };
    for (n, spec) in cfg.sources.iter().enumerate() {
        let batch_seed = seeding::derive_seed(cfg.seed, &format!("source-{}", n));
        let batch = gen_batch(cfg, &truth.global_factors, spec, spec.samples, batch_seed)?;
        data.push(batch.data);
        truth.global_cores.push(batch.global_core);
        truth.global_components.push(batch.global_component);
        truth.local_components.push(batch.local_component);
    }
    Ok((data, truth))
}

/// The shared background factors of a configuration (also used to draw
/// fresh test batches consistent with a dataset).
pub fn gen_global_factors(cfg: &SimConfig) -> Result<Vec<FactorMatrix>> {
    let mut rng = seeding::stream(seeding::derive_seed(cfg.seed, "global-factors"), 0);
    let (g1, g2) = cfg.global_ranks;
    let mut out = Vec::with_capacity(2);
    for rank in [g1, g2] {
        let draw = Matrix::from_fn(cfg.side, rank, |_, _| rng.sample(StandardNormal));
        out.push(orthonormalize(&draw)?);
    }
    Ok(out)
}

/// Planted-model configuration: noiseless data drawn exactly from a known
/// factor set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub sources: usize,
    pub shared_dims: Vec<usize>,
    pub samples_per_source: usize,
    pub global_ranks: Vec<usize>,
    pub local_ranks: Vec<usize>,
    /// 0-based modes with the orthogonality constraint.
    pub ortho_modes: Vec<usize>,
    pub seed: u64,
}

impl PlantedConfig {
    /// 5 sources of 10 samples over 50³ with all ranks 5, constraints in
    /// modes 1 and 2.
    pub fn large(seed: u64) -> Self {
        PlantedConfig {
            sources: 5,
            shared_dims: vec![50, 50, 50],
            samples_per_source: 10,
            global_ranks: vec![5, 5, 5],
            local_ranks: vec![5, 5, 5],
            ortho_modes: vec![0, 1],
            seed,
        }
    }

    /// Shrunk variant for fast runs: 5 sources of 4 samples over 12³ with
    /// all ranks 2.
    pub fn small(seed: u64) -> Self {
        PlantedConfig {
            sources: 5,
            shared_dims: vec![12, 12, 12],
            samples_per_source: 4,
            global_ranks: vec![2, 2, 2],
            local_ranks: vec![2, 2, 2],
            ortho_modes: vec![0, 1],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.shared_dims.len();
        if k == 0 || self.sources == 0 || self.samples_per_source == 0 {
            return Err(Error::Config("empty planted configuration".into()));
        }
        if self.global_ranks.len() != k || self.local_ranks.len() != k {
            return Err(Error::Config("one rank per data mode required".into()));
        }
        if self.ortho_modes.is_empty() || self.ortho_modes.iter().any(|&m| m >= k) {
            return Err(Error::Config("invalid orthogonal mode set".into()));
        }
        for kk in 0..k {
            let i = self.shared_dims[kk];
            let (g, l) = (self.global_ranks[kk], self.local_ranks[kk]);
            if g == 0 || l == 0 || g > i || l > i {
                return Err(Error::Config(format!("ranks out of range in mode {}", kk)));
            }
            if self.ortho_modes.contains(&kk) && g + l > i {
                return Err(Error::Config(format!(
                    "mode {}: no orthogonal complement for ranks {}+{} in dimension {}",
                    kk, g, l, i
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlantedTruth {
    pub global_factors: Vec<FactorMatrix>,
    pub local_factors: Vec<Vec<FactorMatrix>>,
    pub global_cores: Vec<Tensor>,
    pub local_cores: Vec<Tensor>,
}

/// Noiseless planted data: standard-normal factor draws orthonormalized by
/// SVD, local draws in constrained modes first projected onto the global
/// complement; standard-normal cores.
pub fn gen_planted(cfg: &PlantedConfig) -> Result<(Vec<Tensor>, PlantedTruth)> {
    cfg.validate()?;
    let k = cfg.shared_dims.len();
    let mut rng = seeding::stream(seeding::derive_seed(cfg.seed, "planted-global"), 0);
    let mut global_factors = Vec::with_capacity(k);
    for kk in 0..k {
        let draw = Matrix::from_fn(cfg.shared_dims[kk], cfg.global_ranks[kk], |_, _| {
            rng.sample(StandardNormal)
        });
        global_factors.push(orthonormalize(&draw)?);
    }

    let mut local_factors = Vec::with_capacity(cfg.sources);
    let mut global_cores = Vec::with_capacity(cfg.sources);
    let mut local_cores = Vec::with_capacity(cfg.sources);
    let mut data = Vec::with_capacity(cfg.sources);
    for n in 0..cfg.sources {
        let mut rng = seeding::stream(
            seeding::derive_seed(cfg.seed, &format!("planted-source-{}", n)),
            0,
        );
        let mut per_mode = Vec::with_capacity(k);
        for kk in 0..k {
            let mut draw = Matrix::from_fn(cfg.shared_dims[kk], cfg.local_ranks[kk], |_, _| {
                rng.sample(StandardNormal)
            });
            if cfg.ortho_modes.contains(&kk) {
                let proj = global_factors[kk].projector();
                draw.axpy(-1.0, &proj.matmul(&draw));
            }
            per_mode.push(orthonormalize(&draw)?);
        }

        let mut gdims = cfg.global_ranks.clone();
        gdims.push(cfg.samples_per_source);
        let glen: usize = gdims.iter().product();
        let gcore = Tensor::new(
            gdims,
            (0..glen).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        )?;
        let mut ldims = cfg.local_ranks.clone();
        ldims.push(cfg.samples_per_source);
        let llen: usize = ldims.iter().product();
        let lcore = Tensor::new(
            ldims,
            (0..llen).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        )?;

        let mut global = gcore.clone();
        let mut local = lcore.clone();
        for kk in 0..k {
            global = global.mode_product(global_factors[kk].matrix(), kk)?;
            local = local.mode_product(per_mode[kk].matrix(), kk)?;
        }
        data.push(global.add(&local)?);
        local_factors.push(per_mode);
        global_cores.push(gcore);
        local_cores.push(lcore);
    }
    Ok((
        data,
        PlantedTruth {
            global_factors,
            local_factors,
            global_cores,
            local_cores,
        },
    ))
}
