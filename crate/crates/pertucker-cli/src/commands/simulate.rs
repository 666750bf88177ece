//! `pertucker simulate`: write a synthetic dataset as PTEN files plus a
//! ground-truth manifest.

use std::path::PathBuf;

use clap::Args as ClapArgs;
use pertucker::simgen::{gen_dataset, gen_planted};
use pertucker::tensor::{Matrix, Tensor};
use pertucker::{pten, FactorMatrix, Result};

use crate::configs::{parse_json, DatasetManifest, SimulateFile, SimulatePlan, TruthFiles};
use crate::manifest::{read_config_text, RunRecorder};

#[derive(ClapArgs)]
pub struct Args {
    /// Simulation config (JSON); defaults to the three-class pattern setup.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "sim_out")]
    pub out_dir: PathBuf,
}

/// Store a factor matrix as a 2-mode tensor file.
fn factor_tensor(f: &FactorMatrix) -> Tensor {
    matrix_tensor(f.matrix())
}

fn matrix_tensor(m: &Matrix) -> Tensor {
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            data.push(m.get(i, j));
        }
    }
    Tensor::new(vec![m.rows(), m.cols()], data).expect("factor payload")
}

pub fn run(args: Args) -> Result<()> {
    let mut rec = RunRecorder::new("simulate", &args.out_dir)?;
    let file: SimulateFile = match &args.config {
        Some(path) => {
            rec.config(path);
            parse_json(&read_config_text(path)?, "simulation config")?
        }
        None => SimulateFile {
            schema_version: 1,
            seed: None,
            patterns: None,
            planted: None,
        },
    };
    let plan = file.into_plan(args.seed)?;

    let mut manifest = DatasetManifest {
        schema_version: 1,
        kind: String::new(),
        sim_config: None,
        planted_config: None,
        sources: Vec::new(),
        truth: TruthFiles::default(),
    };

    match plan {
        SimulatePlan::Patterns(cfg) => {
            rec.seed(cfg.seed);
            let (data, truth) = gen_dataset(&cfg)?;
            manifest.kind = "patterns".into();
            for (n, y) in data.iter().enumerate() {
                let path = rec.out(&format!("source_{}.pten", n));
                pten::write_tensor_file(&path, y)?;
                manifest.sources.push(format!("source_{}.pten", n));
            }
            for (k, f) in truth.global_factors.iter().enumerate() {
                let name = format!("truth_global_factor_{}.pten", k);
                pten::write_tensor_file(rec.out(&name), &factor_tensor(f))?;
                manifest.truth.global_factors.push(name);
            }
            for (n, t) in truth.global_components.iter().enumerate() {
                let name = format!("truth_global_component_{}.pten", n);
                pten::write_tensor_file(rec.out(&name), t)?;
                manifest.truth.global_components.push(name);
            }
            for (n, t) in truth.local_components.iter().enumerate() {
                let name = format!("truth_local_component_{}.pten", n);
                pten::write_tensor_file(rec.out(&name), t)?;
                manifest.truth.local_components.push(name);
            }
            manifest.sim_config = Some(cfg);
        }
        SimulatePlan::Planted(cfg) => {
            rec.seed(cfg.seed);
            let (data, truth) = gen_planted(&cfg)?;
            manifest.kind = "planted".into();
            for (n, y) in data.iter().enumerate() {
                let path = rec.out(&format!("source_{}.pten", n));
                pten::write_tensor_file(&path, y)?;
                manifest.sources.push(format!("source_{}.pten", n));
            }
            for (k, f) in truth.global_factors.iter().enumerate() {
                let name = format!("truth_global_factor_{}.pten", k);
                pten::write_tensor_file(rec.out(&name), &factor_tensor(f))?;
                manifest.truth.global_factors.push(name);
            }
            for (n, fs) in truth.local_factors.iter().enumerate() {
                let mut names = Vec::new();
                for (k, f) in fs.iter().enumerate() {
                    let name = format!("truth_local_factor_{}_{}.pten", n, k);
                    pten::write_tensor_file(rec.out(&name), &factor_tensor(f))?;
                    names.push(name);
                }
                manifest.truth.local_factors.push(names);
            }
            manifest.planted_config = Some(cfg);
        }
    }

    let manifest_path = rec.out("dataset.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| pertucker::Error::Format(e.to_string()))?,
    )?;
    println!(
        "wrote {} sources and ground truth to {}",
        manifest.sources.len(),
        args.out_dir.display()
    );
    rec.finish()
}
