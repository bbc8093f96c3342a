//! Small-dataset overfitting experiment: trains full- and half-width
//! classifiers on a deliberately tiny labeled set across several seeds and
//! reports the test-accuracy comparison.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use embryoforge_core::dataio::labeled_patches;
use embryoforge_core::gan::{overfit_demo, LabeledPatchSet, OverfitConfig};
use embryoforge_core::rng::{stream, StreamId};
use embryoforge_core::tensor::Elem;

use crate::config::TrainOverrides;

#[derive(Debug, Args)]
pub struct OverfitArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Training set size (the deliberately small corpus).
    #[arg(long, default_value_t = 198)]
    pub train_size: usize,
    #[arg(long, default_value_t = 100)]
    pub test_size: usize,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Patch edge length for the synthesized task.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Element type: f32 (fast) or f64 (bit-exact reproducibility).
    #[arg(long, default_value = "f32")]
    pub dtype: String,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

pub fn run(args: &OverfitArgs) -> Result<()> {
    match args.dtype.as_str() {
        "f32" => run_typed::<f32>(args),
        "f64" => run_typed::<f64>(args),
        other => anyhow::bail!("unknown dtype `{other}` (expected f32 or f64)"),
    }
}

fn run_typed<T: Elem>(args: &OverfitArgs) -> Result<()> {
    let mut cfg = args.overrides.resolve()?;
    cfg.network.input_size = args.size;
    std::fs::create_dir_all(&args.out)?;
    cfg.write_resolved(&args.out)?;

    let mut rng = stream(cfg.train.seed, StreamId::Synth);
    let train = LabeledPatchSet::new(labeled_patches(args.train_size, args.size, &mut rng), 2);
    let test = LabeledPatchSet::new(labeled_patches(args.test_size, args.size, &mut rng), 2);

    let report = overfit_demo::<T>(
        &train,
        &test,
        &OverfitConfig {
            train_size: args.train_size,
            seeds: args.seeds,
            net: cfg.network,
            train: cfg.train.clone(),
        },
    )?;

    let table = report.render_table();
    print!("{table}");
    std::fs::write(args.out.join("report.txt"), &table)?;
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(args.out.join("report.csv"))?);
    writeln!(f, "width_scale,seed,train_acc,test_acc")?;
    for r in &report.rows {
        writeln!(f, "{},{},{:.6},{:.6}", r.width_scale, r.seed, r.train_acc, r.test_acc)?;
    }
    Ok(())
}
