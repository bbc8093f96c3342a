//! Grayscale stack preprocessing and classical augmentations: 3-D median
//! filtering, percentile brightness adjustment, random patch extraction,
//! flips and brightness/contrast jitter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::tensor::{Elem, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackMeta {
    pub embryo_id: u32,
    pub time_min: u32,
}

/// Pseudo-3D microscopy volume, row-major [slice][y][x].
#[derive(Debug, Clone)]
pub struct ImageStack {
    pub width: usize,
    pub height: usize,
    pub n_slices: usize,
    pub bit_depth: u8,
    pub voxels: Vec<u16>,
    pub meta: StackMeta,
}

impl ImageStack {
    pub fn new(
        width: usize,
        height: usize,
        n_slices: usize,
        bit_depth: u8,
        voxels: Vec<u16>,
        meta: StackMeta,
    ) -> Self {
        assert!(bit_depth == 8 || bit_depth == 16);
        assert_eq!(voxels.len(), width * height * n_slices);
        ImageStack {
            width,
            height,
            n_slices,
            bit_depth,
            voxels,
            meta,
        }
    }

    #[inline]
    pub fn at(&self, s: usize, y: usize, x: usize) -> u16 {
        self.voxels[(s * self.height + y) * self.width + x]
    }

    pub fn slice(&self, s: usize) -> &[u16] {
        let n = self.width * self.height;
        &self.voxels[s * n..(s + 1) * n]
    }

    pub fn max_value(&self) -> u16 {
        if self.bit_depth == 8 {
            255
        } else {
            65535
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub embryo_id: u32,
    pub time_min: u32,
    pub slice_index: usize,
    pub origin_x: usize,
    pub origin_y: usize,
}

/// Square grayscale training crop with provenance and optional label.
#[derive(Debug, Clone)]
pub struct Patch {
    pub size: usize,
    pub bit_depth: u8,
    pub pixels: Vec<u16>,
    pub provenance: Provenance,
    pub label: Option<u32>,
}

impl Patch {
    pub fn max_value(&self) -> u16 {
        if self.bit_depth == 8 {
            255
        } else {
            65535
        }
    }
}

/// Replace each voxel by the median of its (2r+1)^3 neighborhood,
/// clamping coordinates at the borders (replicate policy).
pub fn median_filter_3d(stack: &ImageStack, radius: usize) -> Result<ImageStack> {
    assert!(radius >= 1, "radius must be >= 1");
    if stack.n_slices < 1 {
        return Err(Error::Config("median filter needs at least one slice".into()));
    }
    let (w, h, d) = (stack.width, stack.height, stack.n_slices);
    let r = radius as isize;
    let win = 2 * radius + 1;
    let mut window = vec![0u16; win * win * win];
    let mut out = vec![0u16; stack.voxels.len()];
    for s in 0..d {
        for y in 0..h {
            for x in 0..w {
                let mut i = 0;
                for ds in -r..=r {
                    let ss = (s as isize + ds).clamp(0, d as isize - 1) as usize;
                    for dy in -r..=r {
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        let row = (ss * h + yy) * w;
                        for dx in -r..=r {
                            let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                            window[i] = stack.voxels[row + xx];
                            i += 1;
                        }
                    }
                }
                let mid = window.len() / 2;
                let (_, med, _) = window.select_nth_unstable(mid);
                out[(s * h + y) * w + x] = *med;
            }
        }
    }
    Ok(ImageStack {
        voxels: out,
        ..stack.clone()
    })
}

/// Round half away from zero; the fixed rounding rule for all pixel math.
pub fn round_half_away(x: f64) -> i64 {
    if x >= 0.0 {
        (x + 0.5).floor() as i64
    } else {
        (x - 0.5).ceil() as i64
    }
}

/// Nearest-rank percentile of `sorted` (ascending), p in [0, 100].
fn nearest_rank(sorted: &[u16], p: f64) -> u16 {
    let n = sorted.len();
    let rank = ((p / 100.0 * n as f64).ceil() as usize).max(1).min(n);
    sorted[rank - 1]
}

/// Map the [p_low, p_high] percentile intensity window linearly onto the
/// full dynamic range, clamping outside. A constant image maps to all zeros.
pub fn adjust_brightness_range(pixels: &[u16], bit_depth: u8, p_low: f64, p_high: f64) -> Vec<u16> {
    assert!((0.0..=100.0).contains(&p_low) && p_low < p_high && p_high <= 100.0);
    let maxv = if bit_depth == 8 { 255u16 } else { 65535 };
    let mut sorted = pixels.to_vec();
    sorted.sort_unstable();
    let lo = nearest_rank(&sorted, p_low);
    let hi = nearest_rank(&sorted, p_high);
    if lo >= hi {
        return vec![0; pixels.len()];
    }
    let span = (hi - lo) as f64;
    pixels
        .iter()
        .map(|&v| {
            let clamped = v.clamp(lo, hi);
            let mapped = (clamped - lo) as f64 * maxv as f64 / span;
            round_half_away(mapped).clamp(0, maxv as i64) as u16
        })
        .collect()
}

/// Random patches with origins uniform over valid positions inside `bbox`,
/// one batch of `n_per_slice` per slice in [slice_lo, slice_hi].
pub fn extract_patches(
    stack: &ImageStack,
    bbox: BoundingBox,
    slice_lo: usize,
    slice_hi: usize,
    n_per_slice: usize,
    patch: usize,
    rng: &mut Stream,
) -> Result<Vec<Patch>> {
    if bbox.w < patch || bbox.h < patch {
        return Err(Error::BboxTooSmall {
            bbox: (bbox.x as u32, bbox.y as u32, bbox.w as u32, bbox.h as u32),
            patch,
        });
    }
    if slice_lo > slice_hi || slice_hi >= stack.n_slices {
        return Err(Error::Config(format!(
            "slice range {slice_lo}:{slice_hi} invalid for {} slices",
            stack.n_slices
        )));
    }
    assert!(bbox.x + bbox.w <= stack.width && bbox.y + bbox.h <= stack.height);
    let mut patches = Vec::with_capacity((slice_hi - slice_lo + 1) * n_per_slice);
    for s in slice_lo..=slice_hi {
        for _ in 0..n_per_slice {
            let ox = bbox.x + rng.gen_range(0..=bbox.w - patch);
            let oy = bbox.y + rng.gen_range(0..=bbox.h - patch);
            let mut pixels = Vec::with_capacity(patch * patch);
            for y in 0..patch {
                let row = (s * stack.height + oy + y) * stack.width + ox;
                pixels.extend_from_slice(&stack.voxels[row..row + patch]);
            }
            patches.push(Patch {
                size: patch,
                bit_depth: stack.bit_depth,
                pixels,
                provenance: Provenance {
                    embryo_id: stack.meta.embryo_id,
                    time_min: stack.meta.time_min,
                    slice_index: s,
                    origin_x: ox,
                    origin_y: oy,
                },
                label: None,
            });
        }
    }
    Ok(patches)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub flips: bool,
    /// Max brightness shift as a fraction of the dynamic range.
    pub brightness: f64,
    /// Max contrast deviation: factor drawn from [1-c, 1+c].
    pub contrast: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flips: true,
            brightness: 0.1,
            contrast: 0.2,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        AugmentConfig {
            flips: false,
            brightness: 0.0,
            contrast: 0.0,
        }
    }
}

fn flip_vertical(pixels: &mut [u16], size: usize) {
    for y in 0..size / 2 {
        for x in 0..size {
            pixels.swap(y * size + x, (size - 1 - y) * size + x);
        }
    }
}

fn flip_horizontal(pixels: &mut [u16], size: usize) {
    for row in pixels.chunks_mut(size) {
        row.reverse();
    }
}

/// Deterministic augmentation core: optional flips, then contrast about the
/// patch mean, then an absolute brightness shift, clamped to the valid range.
pub fn augment_with(
    p: &Patch,
    flip_v: bool,
    flip_h: bool,
    brightness_delta: f64,
    contrast_factor: f64,
) -> Patch {
    let mut pixels = p.pixels.clone();
    if flip_v {
        flip_vertical(&mut pixels, p.size);
    }
    if flip_h {
        flip_horizontal(&mut pixels, p.size);
    }
    let maxv = p.max_value() as f64;
    let mean = pixels.iter().map(|&v| v as f64).sum::<f64>() / pixels.len() as f64;
    for v in pixels.iter_mut() {
        let adjusted = mean + contrast_factor * (*v as f64 - mean) + brightness_delta;
        *v = round_half_away(adjusted).clamp(0, maxv as i64) as u16;
    }
    Patch {
        pixels,
        ..p.clone()
    }
}

/// Random flips plus brightness/contrast jitter drawn from `cfg`'s ranges.
pub fn augment(p: &Patch, rng: &mut Stream, cfg: &AugmentConfig) -> Patch {
    let flip_v = cfg.flips && rng.gen_bool(0.5);
    let flip_h = cfg.flips && rng.gen_bool(0.5);
    let delta = if cfg.brightness > 0.0 {
        let span = cfg.brightness * p.max_value() as f64;
        rng.gen_range(-span..=span)
    } else {
        0.0
    };
    let factor = if cfg.contrast > 0.0 {
        rng.gen_range(1.0 - cfg.contrast..=1.0 + cfg.contrast)
    } else {
        1.0
    };
    augment_with(p, flip_v, flip_h, delta, factor)
}

/// Linear map [0, 2^bit_depth - 1] -> [-1, 1], shaped [1, H, W].
pub fn normalize_for_net<T: Elem>(p: &Patch) -> Tensor<T> {
    let maxv = p.max_value() as f64;
    let data: Vec<T> = p
        .pixels
        .iter()
        .map(|&v| T::from_f64(v as f64 / maxv * 2.0 - 1.0))
        .collect();
    Tensor::from_vec(data, &[1, p.size, p.size])
}

/// Inverse of `normalize_for_net`: [-1, 1] -> pixel values.
pub fn denormalize(value: f64, bit_depth: u8) -> u16 {
    let maxv = if bit_depth == 8 { 255u16 } else { 65535 };
    let v = (value.clamp(-1.0, 1.0) + 1.0) / 2.0 * maxv as f64;
    round_half_away(v).clamp(0, maxv as i64) as u16
}
