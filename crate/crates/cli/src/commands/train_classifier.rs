//! Train the strided convolutional classifier on a labeled patch manifest
//! and emit a checkpoint, per-epoch CSV trace, and the resolved config.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use embryoforge_core::dataio::{read_manifest, save_checkpoint, Checkpoint};
use embryoforge_core::error::Error as CoreError;
use embryoforge_core::gan::{train_classifier, LabeledPatchSet};
use embryoforge_core::nn::AdamState;
use embryoforge_core::rng::RngStreams;
use embryoforge_core::tensor::Elem;

use crate::config::TrainOverrides;
use crate::util::{load_patches, NumericalFailure};

#[derive(Debug, Args)]
pub struct TrainClassifierArgs {
    /// Labeled patch manifest for training.
    #[arg(long)]
    pub data: PathBuf,
    /// Labeled patch manifest for testing; if omitted, every 5th training
    /// patch is held out instead.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Element type: f32 (fast) or f64 (bit-exact reproducibility).
    #[arg(long, default_value = "f32")]
    pub dtype: String,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

pub fn run(args: &TrainClassifierArgs) -> Result<()> {
    match args.dtype.as_str() {
        "f32" => run_typed::<f32>(args),
        "f64" => run_typed::<f64>(args),
        other => anyhow::bail!("unknown dtype `{other}` (expected f32 or f64)"),
    }
}

fn run_typed<T: Elem>(args: &TrainClassifierArgs) -> Result<()> {
    let mut cfg = args.overrides.resolve()?;
    std::fs::create_dir_all(&args.out)?;

    let entries = read_manifest(&args.data, None)?;
    let all = load_patches(&args.data, &entries)?;
    anyhow::ensure!(
        all.iter().all(|p| p.label.is_some()),
        "classifier training needs labels on every patch"
    );
    let n_classes = all.iter().filter_map(|p| p.label).max().unwrap() as usize + 1;
    let (train_patches, test_patches) = match &args.test {
        Some(path) => {
            let test_entries = read_manifest(path, None)?;
            (all, load_patches(path, &test_entries)?)
        }
        None => {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, p) in all.into_iter().enumerate() {
                if i % 5 == 4 {
                    test.push(p);
                } else {
                    train.push(p);
                }
            }
            (train, test)
        }
    };
    cfg.network.input_size = train_patches[0].size;
    cfg.write_resolved(&args.out)?;
    let train_set = LabeledPatchSet::new(train_patches, n_classes);
    let test_set = LabeledPatchSet::new(test_patches, n_classes);

    let outcome = match train_classifier::<T>(&train_set, &test_set, &cfg.network, &cfg.train, None) {
        Ok(o) => o,
        Err(CoreError::TrainAborted { iter, reason }) => {
            eprintln!("aborted at epoch {iter}: {reason}");
            return Err(NumericalFailure(reason).into());
        }
        Err(e) => return Err(e.into()),
    };

    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(args.out.join("trace.csv"))?);
    writeln!(f, "epoch,train_loss,train_acc,test_acc")?;
    for r in &outcome.trace {
        writeln!(
            f,
            "{},{:.17e},{:.6},{:.6}",
            r.epoch, r.train_loss, r.train_acc, r.test_acc
        )?;
    }
    drop(f);

    let streams = RngStreams::new(cfg.train.seed);
    let opt: AdamState<T> = AdamState::new(cfg.train.adam_classifier());
    let ck = Checkpoint::capture(&outcome.net, &opt, &streams, outcome.trace.len() as u64);
    save_checkpoint(&args.out.join("classifier.ck"), &ck)?;

    let last = outcome.trace.last().unwrap();
    println!(
        "done: {} epochs, train acc {:.4}, test acc {:.4}",
        outcome.trace.len(),
        last.train_acc,
        last.test_acc
    );
    Ok(())
}
