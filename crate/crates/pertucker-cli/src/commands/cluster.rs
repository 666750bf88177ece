//! `pertucker cluster`: subspace distances between the sources of a fitted
//! model, spectral clustering, and a 2-D embedding for plotting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args as ClapArgs;
use pertucker::apps::{mds_embed, spectral_cluster, subspace_distance_matrix};
use pertucker::container::read_model_file;
use pertucker::Result;

use crate::manifest::RunRecorder;

#[derive(ClapArgs)]
pub struct Args {
    /// Model container written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "cluster_out")]
    pub out_dir: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let mut rec = RunRecorder::new("cluster", &args.out_dir)?;
    rec.input(&args.model);
    rec.seed(args.seed);
    let model = read_model_file(&args.model)?;

    let distances = subspace_distance_matrix(&model.local_factors)?;
    let assignments = spectral_cluster(&distances, args.clusters, args.seed)?;
    let embedding = mds_embed(&distances, 2)?;

    let n = distances.rows();
    let mut w = BufWriter::new(File::create(rec.out("distances.csv"))?);
    let header: Vec<String> = (1..=n).map(|j| format!("source_{}", j)).collect();
    writeln!(w, "source,{}", header.join(","))?;
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.10e}", distances.get(i, j))).collect();
        writeln!(w, "source_{},{}", i + 1, row.join(","))?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(rec.out("assignments.csv"))?);
    writeln!(w, "source,cluster")?;
    for (i, c) in assignments.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, c)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(rec.out("embedding.csv"))?);
    writeln!(w, "source,x,y")?;
    for i in 0..n {
        writeln!(
            w,
            "{},{:.10e},{:.10e}",
            i + 1,
            embedding.get(i, 0),
            embedding.get(i, 1)
        )?;
    }
    w.flush()?;

    println!(
        "clustered {} sources into {} clusters; reports in {}",
        n,
        args.clusters,
        args.out_dir.display()
    );
    rec.finish()
}
