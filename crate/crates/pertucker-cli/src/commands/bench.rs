//! `pertucker bench-table1` / `bench-table2`: the seeded benchmark studies
//! with mean ± std CSV summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args as ClapArgs;
use pertucker::bench::{
    classification_study_csv, component_study_csv, run_classification_study,
    run_component_study,
};
use pertucker::metrics::EvalReport;
use pertucker::Result;

use crate::manifest::RunRecorder;

#[derive(ClapArgs)]
pub struct Table1Args {
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "table1_out")]
    pub out_dir: PathBuf,
}

pub fn run_table1(args: Table1Args) -> Result<()> {
    let mut rec = RunRecorder::new("bench-table1", &args.out_dir)?;
    rec.seed(args.seed);
    let study = run_component_study(args.repeats, args.seed)?;
    std::fs::write(rec.out("table1.csv"), component_study_csv(&study))?;

    let mut w = BufWriter::new(File::create(rec.out("table1_runs.csv"))?);
    writeln!(w, "method,repeat,{}", EvalReport::csv_header())?;
    for (method, reports) in &study.reports {
        for (i, r) in reports.iter().enumerate() {
            writeln!(w, "{},{},{}", method, i + 1, r.csv_row())?;
        }
    }
    w.flush()?;

    for row in &study.rows {
        println!(
            "{:13} denoised {:.3e} ± {:.1e}",
            row.method, row.denoised_error.0, row.denoised_error.1
        );
    }
    rec.finish()
}

#[derive(ClapArgs)]
pub struct Table2Args {
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training sizes per class.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 30, 40, 50])]
    pub train_sizes: Vec<usize>,
    #[arg(long, default_value = "table2_out")]
    pub out_dir: PathBuf,
}

pub fn run_table2(args: Table2Args) -> Result<()> {
    let mut rec = RunRecorder::new("bench-table2", &args.out_dir)?;
    rec.seed(args.seed);
    let study = run_classification_study(args.repeats, &args.train_sizes, args.seed)?;
    std::fs::write(rec.out("table2.csv"), classification_study_csv(&study))?;
    for (i, &size) in study.train_sizes.iter().enumerate() {
        println!(
            "train size {:3}: accuracy {:.1}% ± {:.1}%",
            size,
            100.0 * study.accuracy[i].0,
            100.0 * study.accuracy[i].1
        );
    }
    rec.finish()
}
