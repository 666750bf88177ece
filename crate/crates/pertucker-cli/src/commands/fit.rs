//! `pertucker fit`: run the personalized decomposition and serialize the
//! model container and trace; optionally score against ground truth.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args as ClapArgs;
use pertucker::container::{write_model_file, write_trace_csv};
use pertucker::engine::fit;
use pertucker::metrics::{eval_against_truth, planted_subspace_errors, EvalReport};
use pertucker::simgen::SimTruth;
use pertucker::tensor::{Matrix, Tensor};
use pertucker::{pten, Error, FactorMatrix, Result};

use crate::configs::{parse_json, DatasetManifest, FitFile};
use crate::manifest::{read_config_text, RunRecorder};

#[derive(ClapArgs)]
pub struct Args {
    /// Fit config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Source tensors (PTEN), one per source, in source order.
    #[arg(long, num_args = 1.., required_unless_present = "dataset")]
    pub data: Vec<PathBuf>,
    /// Dataset manifest to take the sources from (written by `simulate`).
    #[arg(long, conflicts_with = "data")]
    pub dataset: Option<PathBuf>,
    /// Dataset manifest with ground truth to evaluate against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "fit_out")]
    pub out_dir: PathBuf,
}

pub fn load_factor(path: &Path) -> Result<FactorMatrix> {
    let t = pten::read_tensor_file(path)?;
    if t.ndim() != 2 {
        return Err(Error::Format(format!(
            "{} is not a 2-mode factor tensor",
            path.display()
        )));
    }
    let (rows, cols) = (t.dims()[0], t.dims()[1]);
    let mut m = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m.set(i, j, t.data()[j * rows + i]);
        }
    }
    FactorMatrix::new(m)
}

fn resolve_sources(args: &Args, rec: &mut RunRecorder) -> Result<(Vec<PathBuf>, Option<DatasetManifest>)> {
    if let Some(ds) = &args.dataset {
        rec.input(ds);
        let manifest = DatasetManifest::load(ds)?;
        let base = ds.parent().unwrap_or_else(|| Path::new("."));
        let paths = manifest.sources.iter().map(|s| base.join(s)).collect();
        Ok((paths, Some(manifest)))
    } else {
        Ok((args.data.clone(), None))
    }
}

pub fn run(args: Args) -> Result<()> {
    let mut rec = RunRecorder::new("fit", &args.out_dir)?;
    rec.config(&args.config);
    let (paths, _) = resolve_sources(&args, &mut rec)?;
    let mut data = Vec::with_capacity(paths.len());
    for p in &paths {
        rec.input(p);
        data.push(pten::read_tensor_file(p)?);
    }

    let file: FitFile = parse_json(&read_config_text(&args.config)?, "fit config")?;
    let cfg = file.into_config(data.len(), args.seed)?;
    rec.seed(cfg.seed);

    // fit() validates and logs warnings itself
    let (model, trace) = fit(&data, &cfg)?;
    write_model_file(rec.out("model.ptmc"), &model)?;
    let mut tw = BufWriter::new(File::create(rec.out("trace.csv"))?);
    write_trace_csv(&mut tw, &trace, &model.config)?;
    tw.flush()?;

    println!(
        "fit: {} sources, {} iterations, final objective {:.6e}",
        data.len(),
        trace.iterations(),
        trace.objective.last().copied().unwrap_or(f64::NAN)
    );

    if let Some(truth_path) = &args.truth {
        rec.input(truth_path);
        let manifest = DatasetManifest::load(truth_path)?;
        let base = truth_path.parent().unwrap_or_else(|| Path::new("."));
        let mut ew = BufWriter::new(File::create(rec.out("eval.csv"))?);
        match manifest.kind.as_str() {
            "patterns" => {
                let sim = manifest.sim_config.as_ref().ok_or_else(|| {
                    Error::Config("pattern manifest lacks its sim_config echo".into())
                })?;
                let truth = load_sim_truth(&manifest, base)?;
                let report = eval_against_truth(&model, &truth, sim)?;
                writeln!(ew, "{}", EvalReport::csv_header())?;
                writeln!(ew, "{}", report.csv_row())?;
                println!(
                    "eval: global_subspace_error {:.3e}, local_component_error {:.3e}",
                    report.global_subspace_error.unwrap_or(f64::NAN),
                    report.local_component_error.unwrap_or(f64::NAN)
                );
            }
            "planted" => {
                let global: Vec<FactorMatrix> = manifest
                    .truth
                    .global_factors
                    .iter()
                    .map(|f| load_factor(&base.join(f)))
                    .collect::<Result<_>>()?;
                let locals: Vec<Vec<FactorMatrix>> = manifest
                    .truth
                    .local_factors
                    .iter()
                    .map(|fs| fs.iter().map(|f| load_factor(&base.join(f))).collect())
                    .collect::<Result<_>>()?;
                let (g, l) = planted_subspace_errors(&model, &global, &locals)?;
                writeln!(ew, "global_subspace_error,{}", header_locals(l.len()))?;
                write!(ew, "{:.10e}", g)?;
                for v in &l {
                    write!(ew, ",{:.10e}", v)?;
                }
                writeln!(ew)?;
                println!("eval: global subspace error {:.3e}", g);
            }
            other => {
                return Err(Error::Config(format!("unknown dataset kind '{}'", other)));
            }
        }
        ew.flush()?;
    }
    rec.finish()
}

fn header_locals(n: usize) -> String {
    (0..n)
        .map(|i| format!("local_subspace_error_{}", i + 1))
        .collect::<Vec<_>>()
        .join(",")
}

fn load_sim_truth(manifest: &DatasetManifest, base: &Path) -> Result<SimTruth> {
    let global_factors = manifest
        .truth
        .global_factors
        .iter()
        .map(|f| load_factor(&base.join(f)))
        .collect::<Result<Vec<_>>>()?;
    let load_all = |names: &[String]| -> Result<Vec<Tensor>> {
        names.iter().map(|f| pten::read_tensor_file(base.join(f))).collect()
    };
    Ok(SimTruth {
        global_factors,
        global_cores: Vec::new(),
        global_components: load_all(&manifest.truth.global_components)?,
        local_components: load_all(&manifest.truth.local_components)?,
    })
}
