//! Generate the procedural membrane-texture corpus: either raw stacks with
//! a manifest (for `preprocess`) or labeled patches (for the classifier).

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use embryoforge_core::dataio::{labeled_patches, write_manifest, SynthConfig};
use embryoforge_core::dataio::manifest::{EntryRole, ManifestEntry};
use embryoforge_core::dataio::synth::write_corpus;
use embryoforge_core::rng::{stream, StreamId};

use crate::util::{write_patch, write_resolved_args};

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub embryos: usize,
    /// Stacks per embryo (one per timepoint).
    #[arg(long, default_value_t = 3)]
    pub stacks: usize,
    /// Slice edge length in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 5)]
    pub slices: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instead of raw stacks, write this many labeled patches
    /// (alternating non-rosette / rosette classes).
    #[arg(long)]
    pub labeled: Option<usize>,
    /// Patch edge length for --labeled.
    #[arg(long, default_value_t = 32)]
    pub patch_size: usize,
}

pub fn run(args: &SynthArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    if let Some(n) = args.labeled {
        let mut rng = stream(args.seed, StreamId::Synth);
        let patches = labeled_patches(n, args.patch_size, &mut rng);
        let mut entries = Vec::with_capacity(n);
        for (i, p) in patches.iter().enumerate() {
            let path = format!("patch_{i:05}.pgm");
            write_patch(&args.out.join(&path), p)?;
            entries.push(ManifestEntry {
                path,
                role: EntryRole::Patch,
                embryo_id: 0,
                time_min: 0,
                slice_index: None,
                bbox: None,
                label: p.label,
                seed_used: args.seed,
            });
        }
        write_manifest(&args.out.join("manifest.jsonl"), &entries)?;
        println!("wrote {n} labeled patches to {}", args.out.display());
    } else {
        let cfg = SynthConfig {
            n_embryos: args.embryos,
            stacks_per: args.stacks,
            size: args.size,
            n_slices: args.slices,
            seed: args.seed,
        };
        let entries = write_corpus(&args.out, &cfg)?;
        println!(
            "wrote {} stacks ({} slice files) to {}",
            args.embryos * args.stacks,
            entries.len(),
            args.out.display()
        );
    }
    write_resolved_args(&args.out, "synth", args)?;
    Ok(())
}
