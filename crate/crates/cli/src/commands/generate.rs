//! Sample images from a trained generator checkpoint: writes N individual
//! patches plus an 8-column montage, deterministically in the seed.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use embryoforge_core::dataio::load_checkpoint;
use embryoforge_core::models::Mode;
use embryoforge_core::rng::{stream, StreamId};
use embryoforge_core::tensor::{Elem, Tensor};

use crate::util::{tensor_to_patches, write_montage, write_patch, write_resolved_args};

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Generator checkpoint from `train-gan`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Element type; must match the checkpoint.
    #[arg(long, default_value = "f32")]
    pub dtype: String,
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    match args.dtype.as_str() {
        "f32" => run_typed::<f32>(args),
        "f64" => run_typed::<f64>(args),
        other => anyhow::bail!("unknown dtype `{other}` (expected f32 or f64)"),
    }
}

fn run_typed<T: Elem>(args: &GenerateArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let ck = load_checkpoint::<T>(&args.checkpoint)?;
    let latent_dim = ck
        .meta_value("latent_dim")
        .context("checkpoint lacks a latent_dim entry; is this a generator?")?
        as usize;
    let mut gen = ck.restore_network()?;

    let mut rng = stream(args.seed, StreamId::Latent);
    let data: Vec<T> = (0..args.n * latent_dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::from_f64(z)
        })
        .collect();
    let z = Tensor::from_vec(data, &[args.n, latent_dim]);
    let images = gen.forward(&z, Mode::Eval, None)?;
    let patches = tensor_to_patches(&images);
    for (i, p) in patches.iter().enumerate() {
        write_patch(&args.out.join(format!("sample_{i:04}.pgm")), p)?;
    }
    write_montage(&args.out.join("montage.pgm"), &patches, 8)?;
    write_resolved_args(&args.out, "generate", args)?;
    println!("wrote {} samples and montage.pgm to {}", args.n, args.out.display());
    Ok(())
}
