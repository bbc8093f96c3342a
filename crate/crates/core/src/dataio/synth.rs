//! Procedural membrane-texture corpus: elliptical embryo outlines filled
//! with Voronoi-style cell walls, rendered as bright ridges on a dark
//! background with shot-like noise. Stands in for real microscopy data in
//! tests and demos.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imaging::{BoundingBox, ImageStack, Patch, Provenance, StackMeta};
use crate::rng::Stream;

use super::manifest::{EntryRole, ManifestEntry};

const BACKGROUND: f64 = 10.0;
const RIDGE: f64 = 230.0;
/// Wall half-width in pixels.
const WALL_W: f64 = 1.2;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_embryos: usize,
    pub stacks_per: usize,
    /// Square slice edge in pixels.
    pub size: usize,
    pub n_slices: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_embryos: 2,
            stacks_per: 3,
            size: 128,
            n_slices: 5,
            seed: 0,
        }
    }
}

fn shot_noise(value: f64, rng: &mut Stream) -> u16 {
    let z: f64 = StandardNormal.sample(rng);
    (value + value.sqrt() * z).round().clamp(0.0, 255.0) as u16
}

/// Render one slice: ellipse boundary plus interior cell walls where the
/// two nearest Voronoi sites are nearly equidistant.
fn render_slice(
    size: usize,
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
    sites: &[(f64, f64)],
    rng: &mut Stream,
) -> Vec<u16> {
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let r = ((fx - cx) / ax).powi(2) + ((fy - cy) / ay).powi(2);
            let mut v = BACKGROUND;
            if r <= 1.0 {
                // distance to the two nearest sites
                let mut d1 = f64::INFINITY;
                let mut d2 = f64::INFINITY;
                for &(sx, sy) in sites {
                    let d = ((fx - sx).powi(2) + (fy - sy).powi(2)).sqrt();
                    if d < d1 {
                        d2 = d1;
                        d1 = d;
                    } else if d < d2 {
                        d2 = d;
                    }
                }
                let gap = d2 - d1;
                if gap < WALL_W {
                    v = RIDGE * (1.0 - gap / WALL_W) + BACKGROUND * (gap / WALL_W);
                } else {
                    v = BACKGROUND + 20.0; // faint cytoplasm
                }
            }
            // ellipse boundary ridge
            if (r - 1.0).abs() < 0.06 {
                v = RIDGE;
            }
            out.push(shot_noise(v, rng));
        }
    }
    out
}

/// One embryo stack: sites drift slightly between slices, mimicking a
/// pseudo-3D acquisition.
fn render_stack(cfg: &SynthConfig, meta: StackMeta, rng: &mut Stream) -> (ImageStack, BoundingBox) {
    let s = cfg.size as f64;
    let cx = s * rng.gen_range(0.45..0.55);
    let cy = s * rng.gen_range(0.45..0.55);
    let ax = s * rng.gen_range(0.38..0.46);
    let ay = s * rng.gen_range(0.30..0.40);
    let n_sites = rng.gen_range(6..12);
    let mut sites = Vec::with_capacity(n_sites);
    while sites.len() < n_sites {
        let fx = rng.gen_range(0.0..s);
        let fy = rng.gen_range(0.0..s);
        if ((fx - cx) / ax).powi(2) + ((fy - cy) / ay).powi(2) < 0.9 {
            sites.push((fx, fy));
        }
    }
    let mut voxels = Vec::with_capacity(cfg.size * cfg.size * cfg.n_slices);
    let mut drifted = sites.clone();
    for _ in 0..cfg.n_slices {
        voxels.extend(render_slice(cfg.size, cx, cy, ax, ay, &drifted, rng));
        for p in &mut drifted {
            p.0 += rng.gen_range(-0.5..0.5);
            p.1 += rng.gen_range(-0.5..0.5);
        }
    }
    let stack = ImageStack::new(cfg.size, cfg.size, cfg.n_slices, 8, voxels, meta);
    let x0 = ((cx - ax).floor().max(0.0)) as usize;
    let y0 = ((cy - ay).floor().max(0.0)) as usize;
    let x1 = ((cx + ax).ceil().min(s)) as usize;
    let y1 = ((cy + ay).ceil().min(s)) as usize;
    let bbox = BoundingBox {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    };
    (stack, bbox)
}

/// Generate `n_embryos x stacks_per` stacks plus manifest entries, one entry
/// per slice file. Deterministic in the seed.
pub fn synth_corpus(cfg: &SynthConfig) -> (Vec<ImageStack>, Vec<ManifestEntry>) {
    let mut rng = crate::rng::stream(cfg.seed, crate::rng::StreamId::Synth);
    let mut stacks = Vec::new();
    let mut entries = Vec::new();
    for e in 0..cfg.n_embryos {
        for t in 0..cfg.stacks_per {
            let meta = StackMeta {
                embryo_id: e as u32,
                time_min: t as u32,
            };
            let (stack, bbox) = render_stack(cfg, meta, &mut rng);
            for z in 0..cfg.n_slices {
                entries.push(ManifestEntry {
                    path: format!("e{e:02}_t{t:03}_z{z:02}.pgm"),
                    role: EntryRole::RawStack,
                    embryo_id: e as u32,
                    time_min: t as u32,
                    slice_index: Some(z),
                    bbox: Some(bbox),
                    label: None,
                    seed_used: cfg.seed,
                });
            }
            stacks.push(stack);
        }
    }
    (stacks, entries)
}

/// Write a corpus to `dir` as per-slice PGM files plus `manifest.jsonl`.
pub fn write_corpus(dir: &std::path::Path, cfg: &SynthConfig) -> Result<Vec<ManifestEntry>> {
    use super::pgm::{write_pgm, GrayImage};
    std::fs::create_dir_all(dir)?;
    let (stacks, entries) = synth_corpus(cfg);
    let mut it = entries.iter();
    for stack in &stacks {
        for z in 0..stack.n_slices {
            let e = it.next().expect("entry per slice");
            let img = GrayImage::new(stack.width, stack.height, 255, stack.slice(z).to_vec());
            write_pgm(&dir.join(&e.path), &img)?;
        }
    }
    super::manifest::write_manifest(&dir.join("manifest.jsonl"), &entries)?;
    Ok(entries)
}

fn blank_patch(size: usize, label: u32) -> Patch {
    Patch {
        size,
        bit_depth: 8,
        pixels: vec![0; size * size],
        provenance: Provenance {
            embryo_id: 0,
            time_min: 0,
            slice_index: 0,
            origin_x: 0,
            origin_y: 0,
        },
        label: Some(label),
    }
}

/// Distance from point p to the ray from `v` along unit direction `d`.
fn ray_distance(px: f64, py: f64, vx: f64, vy: f64, dx: f64, dy: f64) -> f64 {
    let (rx, ry) = (px - vx, py - vy);
    let t = (rx * dx + ry * dy).max(0.0);
    let (qx, qy) = (rx - t * dx, ry - t * dy);
    (qx * qx + qy * qy).sqrt()
}

fn draw_rays(p: &mut Patch, vx: f64, vy: f64, angles: &[f64], rng: &mut Stream) {
    let size = p.size;
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut d = f64::INFINITY;
            for &a in angles {
                d = d.min(ray_distance(fx, fy, vx, vy, a.cos(), a.sin()));
            }
            let v = if d < WALL_W {
                RIDGE * (1.0 - d / WALL_W) + BACKGROUND * (d / WALL_W)
            } else {
                BACKGROUND + 20.0
            };
            p.pixels[y * size + x] = shot_noise(v, rng);
        }
    }
}

/// Labeled two-class patch set: label 1 patches contain a vertex where at
/// least five walls meet (a rosette-like junction); label 0 patches contain
/// at most three. Labels alternate, so classes stay balanced.
pub fn labeled_patches(n: usize, size: usize, rng: &mut Stream) -> Vec<Patch> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u32;
        let mut p = blank_patch(size, label);
        let s = size as f64;
        let vx = s * rng.gen_range(0.35..0.65);
        let vy = s * rng.gen_range(0.35..0.65);
        let k = if label == 1 {
            rng.gen_range(5..8)
        } else {
            rng.gen_range(2..4)
        };
        let base: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut angles = Vec::with_capacity(k);
        for j in 0..k {
            let jitter = rng.gen_range(-0.2..0.2);
            angles.push(base + j as f64 * std::f64::consts::TAU / k as f64 + jitter);
        }
        draw_rays(&mut p, vx, vy, &angles, rng);
        out.push(p);
    }
    out
}
