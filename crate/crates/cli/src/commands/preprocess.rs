//! Raw stacks -> training patches: 3-D median filter, percentile brightness
//! adjustment, random crops inside each stack's bounding box. Stacks are
//! processed in parallel; failures are reported per stack without stopping
//! the others.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use embryoforge_core::dataio::manifest::{read_manifest, write_manifest, EntryRole, ManifestEntry};
use embryoforge_core::dataio::read_pgm;
use embryoforge_core::imaging::{
    adjust_brightness_range, extract_patches, median_filter_3d, BoundingBox, ImageStack, StackMeta,
};
use embryoforge_core::rng::{stream, StreamId};

use crate::util::{write_patch, write_resolved_args};

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    /// Directory holding the raw slice files.
    #[arg(long)]
    pub input: PathBuf,
    /// Manifest listing raw stacks with bounding boxes.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Patch edge length.
    #[arg(long, default_value_t = 128)]
    pub patch: usize,
    /// Inclusive slice range `lo:hi` to crop from.
    #[arg(long, default_value = "9:13")]
    pub slices: String,
    #[arg(long, default_value_t = 1)]
    pub per_slice: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Median filter radius (0 disables).
    #[arg(long, default_value_t = 1)]
    pub median_radius: usize,
    /// Percentile mapped to black during brightness adjustment.
    #[arg(long, default_value_t = 0.35)]
    pub p_low: f64,
    /// Percentile mapped to white during brightness adjustment.
    #[arg(long, default_value_t = 99.65)]
    pub p_high: f64,
}

fn parse_slice_range(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s
        .split_once(':')
        .context("slice range must look like `9:13`")?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

struct StackJob {
    meta: StackMeta,
    bbox: BoundingBox,
    /// (slice_index, relative path) sorted by slice.
    slices: Vec<(usize, String)>,
}

fn load_stack(args: &PreprocessArgs, job: &StackJob) -> Result<ImageStack> {
    let mut voxels = Vec::new();
    let mut dims = None;
    for (z, rel) in &job.slices {
        let path = args.input.join(rel);
        let img = read_pgm(&path).with_context(|| format!("reading {}", path.display()))?;
        match dims {
            None => dims = Some((img.width, img.height, img.maxval)),
            Some(d) => anyhow::ensure!(
                d == (img.width, img.height, img.maxval),
                "slice {z} of embryo {} t{} has mismatched dimensions",
                job.meta.embryo_id,
                job.meta.time_min
            ),
        }
        voxels.extend(img.pixels);
    }
    let (w, h, maxval) = dims.context("stack has no slices")?;
    let depth = if maxval == 255 { 8 } else { 16 };
    Ok(ImageStack::new(w, h, job.slices.len(), depth, voxels, job.meta))
}

fn process_stack(args: &PreprocessArgs, job: &StackJob) -> Result<Vec<embryoforge_core::imaging::Patch>> {
    let (slice_lo, slice_hi) = parse_slice_range(&args.slices)?;
    let stack = load_stack(args, job)?;
    let filtered = if args.median_radius > 0 {
        median_filter_3d(&stack, args.median_radius)?
    } else {
        stack
    };
    let adjusted = ImageStack::new(
        filtered.width,
        filtered.height,
        filtered.n_slices,
        filtered.bit_depth,
        adjust_brightness_range(&filtered.voxels, filtered.bit_depth, args.p_low, args.p_high),
        filtered.meta,
    );
    // per-stack stream so parallel scheduling cannot affect the draws
    let stack_seed = args
        .seed
        .wrapping_add(job.meta.embryo_id as u64)
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(job.meta.time_min as u64);
    let mut rng = stream(stack_seed, StreamId::DataOrder);
    let patches = extract_patches(
        &adjusted,
        job.bbox,
        slice_lo,
        slice_hi,
        args.per_slice,
        args.patch,
        &mut rng,
    )?;
    Ok(patches)
}

pub fn run(args: &PreprocessArgs) -> Result<()> {
    parse_slice_range(&args.slices)?;
    std::fs::create_dir_all(&args.out)?;
    let entries = read_manifest(&args.manifest, None)?;

    // group raw slices into stacks keyed by (embryo, timepoint)
    let mut groups: BTreeMap<(u32, u32), StackJob> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.role == EntryRole::RawStack) {
        let key = (e.embryo_id, e.time_min);
        let job = groups.entry(key).or_insert_with(|| StackJob {
            meta: StackMeta {
                embryo_id: e.embryo_id,
                time_min: e.time_min,
            },
            bbox: BoundingBox { x: 0, y: 0, w: 0, h: 0 },
            slices: Vec::new(),
        });
        if let Some(b) = e.bbox {
            job.bbox = b;
        }
        job.slices
            .push((e.slice_index.unwrap_or(job.slices.len()), e.path.clone()));
    }
    anyhow::ensure!(!groups.is_empty(), "manifest has no raw stack entries");
    let mut jobs: Vec<StackJob> = groups.into_values().collect();
    for j in &mut jobs {
        j.slices.sort();
    }

    let results: Vec<(StackMeta, Result<Vec<_>>)> = jobs
        .par_iter()
        .map(|job| {
            let r = if job.bbox.w == 0 {
                Err(anyhow::anyhow!(
                    "embryo {} t{}: manifest provides no bounding box",
                    job.meta.embryo_id,
                    job.meta.time_min
                ))
            } else {
                process_stack(args, job)
            };
            (job.meta, r)
        })
        .collect();

    let mut out_entries = Vec::new();
    let mut failures = Vec::new();
    for (meta, result) in results {
        match result {
            Ok(patches) => {
                for (k, p) in patches.iter().enumerate() {
                    let path = format!(
                        "patch_e{:02}_t{:03}_z{:02}_{k}.pgm",
                        meta.embryo_id, meta.time_min, p.provenance.slice_index
                    );
                    write_patch(&args.out.join(&path), p)?;
                    out_entries.push(ManifestEntry {
                        path,
                        role: EntryRole::Patch,
                        embryo_id: meta.embryo_id,
                        time_min: meta.time_min,
                        slice_index: Some(p.provenance.slice_index),
                        bbox: Some(BoundingBox {
                            x: p.provenance.origin_x,
                            y: p.provenance.origin_y,
                            w: p.size,
                            h: p.size,
                        }),
                        label: None,
                        seed_used: args.seed,
                    });
                }
            }
            Err(e) => failures.push(format!(
                "embryo {} t{}: {e:#}",
                meta.embryo_id, meta.time_min
            )),
        }
    }

    write_manifest(&args.out.join("manifest.jsonl"), &out_entries)?;
    write_resolved_args(&args.out, "preprocess", args)?;
    println!("wrote {} patches to {}", out_entries.len(), args.out.display());
    if !failures.is_empty() {
        eprintln!("{} stack(s) failed:", failures.len());
        for f in &failures {
            eprintln!("  {f}");
        }
        anyhow::bail!("{} stack(s) failed during preprocessing", failures.len());
    }
    Ok(())
}
