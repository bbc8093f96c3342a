//! Adversarial training on a patch corpus: builds the convolutional
//! generator/critic pair, runs the alternating loop, and emits checkpoints,
//! a CSV loss trace, sample montages, and the resolved config.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;

use embryoforge_core::dataio::{load_checkpoint, read_manifest, save_checkpoint, Checkpoint};
use embryoforge_core::error::Error as CoreError;
use embryoforge_core::gan::{write_trace_csv, GanDataset, GanTrainer, TraceRow};
use embryoforge_core::models::{build_critic, build_generator};
use embryoforge_core::rng::RngStreams;
use embryoforge_core::tensor::Elem;

use crate::config::{RunConfig, TrainOverrides};
use crate::util::{load_patches, tensor_to_patches, write_montage, NumericalFailure};

#[derive(Debug, Args)]
pub struct TrainGanArgs {
    /// Patch manifest (JSON Lines) produced by `preprocess` or `synth`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Resume from checkpoints in a previous output directory.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Element type: f32 (fast) or f64 (bit-exact reproducibility).
    #[arg(long, default_value = "f32")]
    pub dtype: String,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

pub fn run(args: &TrainGanArgs) -> Result<()> {
    let mut cfg = args.overrides.resolve()?;
    match args.dtype.as_str() {
        "f32" => run_typed::<f32>(args, &mut cfg),
        "f64" => run_typed::<f64>(args, &mut cfg),
        other => anyhow::bail!("unknown dtype `{other}` (expected f32 or f64)"),
    }
}

fn save_pair<T: Elem>(dir: &Path, trainer: &GanTrainer<T>) -> Result<()> {
    let mut gen_ck = Checkpoint::capture(&trainer.gen, &trainer.opt_gen, &trainer.streams, trainer.iter);
    gen_ck
        .meta
        .push(("latent_dim".to_string(), trainer.cfg.latent_dim as u64));
    save_checkpoint(&dir.join("gen.ck"), &gen_ck)?;
    let critic_ck = Checkpoint::capture(&trainer.critic, &trainer.opt_critic, &trainer.streams, trainer.iter);
    save_checkpoint(&dir.join("critic.ck"), &critic_ck)?;
    Ok(())
}

fn restore_pair<T: Elem>(dir: &Path, trainer: &mut GanTrainer<T>) -> Result<()> {
    let gen_ck: Checkpoint<T> = load_checkpoint(&dir.join("gen.ck"))?;
    let critic_ck: Checkpoint<T> = load_checkpoint(&dir.join("critic.ck"))?;
    trainer.gen = gen_ck.restore_network()?;
    trainer.critic = critic_ck.restore_network()?;
    trainer.opt_gen = gen_ck.restore_optimizer(trainer.cfg.adam_gan())?;
    trainer.opt_critic = critic_ck.restore_optimizer(trainer.cfg.adam_gan())?;
    trainer.streams = gen_ck.restore_streams()?;
    trainer.iter = gen_ck
        .meta_value("iter")
        .context("checkpoint missing iteration counter")?;
    Ok(())
}

fn emit_samples<T: Elem>(out: &Path, trainer: &mut GanTrainer<T>, iter: u64) -> Result<()> {
    let grid = trainer.sample_images(64, trainer.cfg.seed)?;
    let patches = tensor_to_patches(&grid);
    write_montage(&out.join(format!("samples_{iter:06}.pgm")), &patches, 8)
}

fn run_typed<T: Elem>(args: &TrainGanArgs, cfg: &mut RunConfig) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let entries = read_manifest(&args.data, None)?;
    let patches = load_patches(&args.data, &entries)?;
    let size = patches[0].size;
    anyhow::ensure!(
        size.is_power_of_two() && size >= 16,
        "patch size {size} unsupported: need a power of two >= 16"
    );
    cfg.network.input_size = size;
    cfg.write_resolved(&args.out)?;
    let data: GanDataset<T> = GanDataset::from_patches(&patches);

    let mut streams = RngStreams::new(cfg.train.seed);
    let gen = build_generator(cfg.train.latent_dim, &cfg.network, &mut streams.init)?;
    let critic = build_critic(&cfg.network, &mut streams.init)?;
    let mut trainer = GanTrainer::new(gen, critic, cfg.train.clone())?;
    trainer.streams = streams;
    if let Some(dir) = &args.resume {
        restore_pair(dir, &mut trainer)?;
        println!("resumed at iteration {}", trainer.iter);
    }

    let trace_path = args.out.join("trace.csv");
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut last_good = args.out.join("gen.ck");
    save_pair(&args.out, &trainer)?; // iteration-0 state is the first last-good
    while trainer.iter < trainer.cfg.iterations {
        match trainer.step(&data) {
            Ok(row) => {
                if trainer.cfg.sample_every > 0 && trainer.iter % trainer.cfg.sample_every == 0 {
                    let it = trainer.iter;
                    emit_samples(&args.out, &mut trainer, it)?;
                    save_pair(&args.out, &trainer)?;
                    last_good = args.out.join("gen.ck");
                }
                trace.push(row);
            }
            Err(CoreError::TrainAborted { iter, reason }) => {
                write_trace_csv(&trace_path, &trace)?;
                eprintln!("aborted at iteration {iter}: {reason}");
                eprintln!("last good checkpoint: {}", last_good.display());
                return Err(NumericalFailure(reason).into());
            }
            Err(e) => return Err(e.into()),
        }
    }
    save_pair(&args.out, &trainer)?;
    let it = trainer.iter;
    emit_samples(&args.out, &mut trainer, it)?;
    write_trace_csv(&trace_path, &trace)?;
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        println!(
            "done: {} iterations, Wasserstein estimate {:.4} -> {:.4}",
            trainer.iter,
            first.wasserstein_estimate(),
            last.wasserstein_estimate()
        );
    }
    Ok(())
}
