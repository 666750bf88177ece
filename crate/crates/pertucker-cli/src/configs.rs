//! JSON config schemas. Every file carries `schema_version: 1` and unknown
//! keys are rejected. Mode indices in config files are 1-based (the first
//! data mode is 1); the library uses 0-based modes internally.

use pertucker::engine::{FitConfig, InitKind};
use pertucker::simgen::{PatternKind, PlantedConfig, SimConfig, SourceSpec};
use pertucker::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {} (expected {})",
            v, SCHEMA_VERSION
        )));
    }
    Ok(())
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {}", what, e)))
}

/// Simulation config: exactly one of `patterns` / `planted`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub patterns: Option<PatternsSection>,
    pub planted: Option<PlantedSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternsSection {
    pub sources: Option<Vec<SourceFile>>,
    pub side: Option<usize>,
    pub amplitude: Option<f64>,
    pub global_ranks: Option<(usize, usize)>,
    pub global_core_std: Option<f64>,
    pub noise_std: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFile {
    pub kind: PatternKind,
    pub ratio_range: Option<(f64, f64)>,
    pub samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSection {
    pub sources: usize,
    pub shared_dims: Vec<usize>,
    pub samples_per_source: usize,
    pub global_ranks: Vec<usize>,
    pub local_ranks: Vec<usize>,
    /// 1-based data modes.
    pub ortho_modes: Vec<usize>,
}

pub enum SimulatePlan {
    Patterns(SimConfig),
    Planted(PlantedConfig),
}

fn to_zero_based(modes: &[usize]) -> Result<Vec<usize>> {
    modes
        .iter()
        .map(|&m| {
            if m == 0 {
                Err(Error::Config(
                    "ortho_modes are 1-based; mode 0 does not exist".into(),
                ))
            } else {
                Ok(m - 1)
            }
        })
        .collect()
}

impl SimulateFile {
    pub fn into_plan(self, seed_override: Option<u64>) -> Result<SimulatePlan> {
        check_version(self.schema_version)?;
        let seed = seed_override.or(self.seed).unwrap_or(0);
        match (self.patterns, self.planted) {
            (Some(_), Some(_)) => Err(Error::Config(
                "config must set either 'patterns' or 'planted', not both".into(),
            )),
            (None, Some(p)) => Ok(SimulatePlan::Planted(PlantedConfig {
                sources: p.sources,
                shared_dims: p.shared_dims,
                samples_per_source: p.samples_per_source,
                global_ranks: p.global_ranks,
                local_ranks: p.local_ranks,
                ortho_modes: to_zero_based(&p.ortho_modes)?,
                seed,
            })),
            (patterns, None) => {
                let mut cfg = SimConfig::three_class(seed);
                if let Some(p) = patterns {
                    if let Some(sources) = p.sources {
                        cfg.sources = sources
                            .into_iter()
                            .map(|s| SourceSpec {
                                kind: s.kind,
                                ratio_range: s.ratio_range.unwrap_or((0.7, 1.4)),
                                samples: s.samples.unwrap_or(10),
                            })
                            .collect();
                    }
                    if let Some(v) = p.side {
                        cfg.side = v;
                    }
                    if let Some(v) = p.amplitude {
                        cfg.amplitude = v;
                    }
                    if let Some(v) = p.global_ranks {
                        cfg.global_ranks = v;
                    }
                    if let Some(v) = p.global_core_std {
                        cfg.global_core_std = v;
                    }
                    if let Some(v) = p.noise_std {
                        cfg.noise_std = v;
                    }
                }
                Ok(SimulatePlan::Patterns(cfg))
            }
        }
    }
}

/// Fit config file; `local_ranks` is either one vector shared by all
/// sources or one vector per source.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub schema_version: u32,
    pub global_ranks: Vec<usize>,
    pub local_ranks: LocalRanks,
    /// 1-based data modes with the orthogonality constraint.
    pub ortho_modes: Vec<usize>,
    pub rho: Option<f64>,
    pub max_iters: Option<usize>,
    pub stop_tol: Option<f64>,
    pub init: Option<InitKind>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum LocalRanks {
    Shared(Vec<usize>),
    PerSource(Vec<Vec<usize>>),
}

impl FitFile {
    pub fn into_config(self, sources: usize, seed_override: Option<u64>) -> Result<FitConfig> {
        check_version(self.schema_version)?;
        let local_ranks = match self.local_ranks {
            LocalRanks::Shared(v) => vec![v; sources],
            LocalRanks::PerSource(v) => v,
        };
        let mut cfg = FitConfig::new(
            self.global_ranks,
            local_ranks,
            to_zero_based(&self.ortho_modes)?,
            seed_override.or(self.seed).unwrap_or(0),
        );
        cfg.rho = self.rho;
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.stop_tol {
            cfg.stop_tol = v;
        }
        if let Some(v) = self.init {
            cfg.init = v;
        }
        Ok(cfg)
    }
}

/// Dataset manifest written by `simulate` and consumed by `fit --truth`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub kind: String,
    pub sim_config: Option<SimConfig>,
    pub planted_config: Option<PlantedConfig>,
    pub sources: Vec<String>,
    pub truth: TruthFiles,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFiles {
    pub global_factors: Vec<String>,
    #[serde(default)]
    pub local_factors: Vec<Vec<String>>,
    #[serde(default)]
    pub global_components: Vec<String>,
    #[serde(default)]
    pub local_components: Vec<String>,
}

impl DatasetManifest {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {}", path.display(), e))
        })?;
        let m: DatasetManifest = parse_json(&text, "dataset manifest")?;
        check_version(m.schema_version)?;
        Ok(m)
    }
}
