//! `pertucker monitor`: the local-core monitoring statistic over a sample
//! stream, with a control limit fitted on a training window.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args as ClapArgs;
use pertucker::apps::{detect, fit_control_limit, monitor_statistic, LimitPolicy};
use pertucker::container::read_model_file;
use pertucker::{pten, Error, Result};

use crate::manifest::RunRecorder;

#[derive(ClapArgs)]
pub struct Args {
    /// Model container written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Sample stream: one (K+1)-mode PTEN tensor, last mode = frames.
    #[arg(long)]
    pub data: PathBuf,
    /// 1-based index of the source whose local subspace is monitored.
    #[arg(long, default_value_t = 1)]
    pub source: usize,
    /// Number of leading in-control frames the limit is fitted on.
    #[arg(long)]
    pub train_window: usize,
    /// Sigma multiplier of the control-limit policy.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    /// Apply the policy to the log of the statistic.
    #[arg(long)]
    pub log_statistic: bool,
    #[arg(long, default_value = "monitor_out")]
    pub out_dir: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let mut rec = RunRecorder::new("monitor", &args.out_dir)?;
    rec.input(&args.model);
    rec.input(&args.data);
    let model = read_model_file(&args.model)?;
    if args.source == 0 || args.source > model.num_sources() {
        return Err(Error::Config(format!(
            "source {} out of range 1..={}",
            args.source,
            model.num_sources()
        )));
    }
    let factors = &model.local_factors[args.source - 1];

    let stream = pten::read_tensor_file(&args.data)?;
    let kmodes = model.num_modes();
    if stream.ndim() != kmodes + 1 {
        return Err(Error::Arg(format!(
            "stream must have {} modes (data modes plus frames)",
            kmodes + 1
        )));
    }
    let frames = *stream.dims().last().unwrap();
    if args.train_window == 0 || args.train_window > frames {
        return Err(Error::Config(format!(
            "train window {} out of range 1..={}",
            args.train_window, frames
        )));
    }

    let mut stats = Vec::with_capacity(frames);
    for s in 0..frames {
        stats.push(monitor_statistic(factors, &stream.slice_last(s)?)?);
    }
    let policy = if args.log_statistic {
        LimitPolicy::LogMeanPlusKSigma { k: args.sigma }
    } else {
        LimitPolicy::MeanPlusKSigma { k: args.sigma }
    };
    let monitor = fit_control_limit(&stats[..args.train_window], policy)?;

    let mut w = BufWriter::new(File::create(rec.out("monitor.csv"))?);
    writeln!(w, "frame,statistic,control_limit,alarm,in_train_window")?;
    let mut alarms = 0usize;
    for (s, &stat) in stats.iter().enumerate() {
        let alarm = detect(&monitor, stat);
        alarms += alarm as usize;
        writeln!(
            w,
            "{},{:.10e},{:.10e},{},{}",
            s + 1,
            stat,
            monitor.control_limit,
            alarm as u8,
            (s < args.train_window) as u8
        )?;
    }
    w.flush()?;
    std::fs::write(
        rec.out("monitor.json"),
        serde_json::to_string_pretty(&monitor)
            .map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!(
        "monitored {} frames, control limit {:.6e}, {} alarms",
        frames, monitor.control_limit, alarms
    );
    rec.finish()
}
