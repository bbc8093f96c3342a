//! Shared helpers: exit-code plumbing, patch I/O, montage rendering.

use std::path::Path;

use anyhow::{Context, Result};

use embryoforge_core::dataio::{montage, read_pgm, write_pgm, EntryRole, GrayImage, ManifestEntry};
use embryoforge_core::imaging::{denormalize, Patch, Provenance};
use embryoforge_core::tensor::{Elem, Tensor};

/// Marker for numerical failures (non-finite losses); maps to exit code 2.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numerical failure: {}", self.0)
    }
}

impl std::error::Error for NumericalFailure {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<NumericalFailure>().is_some() {
        2
    } else {
        1
    }
}

/// Load every patch entry in a manifest, pixels from the referenced PGMs.
pub fn load_patches(manifest_path: &Path, entries: &[ManifestEntry]) -> Result<Vec<Patch>> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut patches = Vec::new();
    for e in entries.iter().filter(|e| e.role == EntryRole::Patch) {
        let path = base.join(&e.path);
        let img = read_pgm(&path).with_context(|| format!("reading {}", path.display()))?;
        anyhow::ensure!(
            img.width == img.height,
            "patch {} is not square ({}x{})",
            e.path,
            img.width,
            img.height
        );
        patches.push(Patch {
            size: img.width,
            bit_depth: if img.maxval == 255 { 8 } else { 16 },
            pixels: img.pixels,
            provenance: Provenance {
                embryo_id: e.embryo_id,
                time_min: e.time_min,
                slice_index: e.slice_index.unwrap_or(0),
                origin_x: e.bbox.map_or(0, |b| b.x),
                origin_y: e.bbox.map_or(0, |b| b.y),
            },
            label: e.label,
        });
    }
    anyhow::ensure!(!patches.is_empty(), "no patch entries in manifest");
    Ok(patches)
}

/// Convert a generated batch [N, 1, H, W] in [-1, 1] back to 8-bit patches.
pub fn tensor_to_patches<T: Elem>(t: &Tensor<T>) -> Vec<Patch> {
    let n = t.shape()[0];
    let h = t.shape()[2];
    let w = t.shape()[3];
    assert_eq!(h, w);
    let stride = h * w;
    (0..n)
        .map(|i| Patch {
            size: h,
            bit_depth: 8,
            pixels: t.data()[i * stride..(i + 1) * stride]
                .iter()
                .map(|&v| denormalize(v.to_f64(), 8))
                .collect(),
            provenance: Provenance {
                embryo_id: 0,
                time_min: 0,
                slice_index: 0,
                origin_x: 0,
                origin_y: 0,
            },
            label: None,
        })
        .collect()
}

pub fn write_montage(path: &Path, patches: &[Patch], cols: usize) -> Result<()> {
    write_pgm(path, &montage(patches, cols))?;
    Ok(())
}

pub fn write_patch(path: &Path, p: &Patch) -> Result<()> {
    let maxval = if p.bit_depth == 8 { 255 } else { 65535 };
    write_pgm(path, &GrayImage::new(p.size, p.size, maxval, p.pixels.clone()))?;
    Ok(())
}

/// Serialize any flags struct as the run's resolved-config file.
pub fn write_resolved_args<A: serde::Serialize>(out_dir: &Path, section: &str, args: &A) -> Result<()> {
    let mut root = toml::map::Map::new();
    root.insert(section.to_string(), toml::Value::try_from(args)?);
    std::fs::write(
        out_dir.join("resolved-config.toml"),
        toml::to_string_pretty(&toml::Value::Table(root))?,
    )?;
    Ok(())
}
