//! `pertucker classify`: per-sample class scores and labels from a fitted
//! model's local subspaces.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args as ClapArgs;
use pertucker::apps::{classify, ClassifierModel};
use pertucker::container::read_model_file;
use pertucker::{pten, Error, Result};

use crate::manifest::RunRecorder;

#[derive(ClapArgs)]
pub struct Args {
    /// Model container written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Sample tensors (PTEN); stacks are classified sample by sample.
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Class names, one per model source (default: class_1, class_2, ...).
    #[arg(long, value_delimiter = ',')]
    pub class_names: Option<Vec<String>>,
    #[arg(long, default_value = "classify_out")]
    pub out_dir: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let mut rec = RunRecorder::new("classify", &args.out_dir)?;
    rec.input(&args.model);
    let model = read_model_file(&args.model)?;
    let labels = match args.class_names {
        Some(names) => {
            if names.len() != model.num_sources() {
                return Err(Error::Config(format!(
                    "{} class names for {} sources",
                    names.len(),
                    model.num_sources()
                )));
            }
            names
        }
        None => (1..=model.num_sources())
            .map(|n| format!("class_{}", n))
            .collect(),
    };
    let classifier = ClassifierModel::from_model(&model, labels)?;

    let mut w = BufWriter::new(File::create(rec.out("classify.csv"))?);
    let mut header = String::from("file,sample,label_index,label,tie");
    for l in &classifier.labels {
        header.push_str(&format!(",score_{}", l));
    }
    writeln!(w, "{}", header)?;

    let kmodes = classifier.shared_dims.len();
    for path in &args.data {
        rec.input(path);
        let t = pten::read_tensor_file(path)?;
        let samples: Vec<pertucker::Tensor> = if t.ndim() == kmodes {
            vec![t]
        } else if t.ndim() == kmodes + 1 {
            (0..*t.dims().last().unwrap())
                .map(|s| t.slice_last(s))
                .collect::<Result<_>>()?
        } else {
            return Err(Error::Arg(format!(
                "{} has {} modes; expected {} or {}",
                path.display(),
                t.ndim(),
                kmodes,
                kmodes + 1
            )));
        };
        for (s, sample) in samples.iter().enumerate() {
            let out = classify(&classifier, sample)?;
            let mut line = format!(
                "{},{},{},{},{}",
                path.display(),
                s + 1,
                out.label + 1,
                classifier.labels[out.label],
                out.tie as u8
            );
            for score in &out.scores {
                line.push_str(&format!(",{:.10e}", score));
            }
            writeln!(w, "{}", line)?;
        }
    }
    w.flush()?;
    println!("classification written to {}", args.out_dir.display());
    rec.finish()
}
