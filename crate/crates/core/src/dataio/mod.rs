//! Bit-exact artifact formats (PGM rasters, JSON Lines manifests, binary
//! checkpoints) and the procedural membrane-texture corpus used for tests
//! and demos.

pub mod checkpoint;
pub mod manifest;
pub mod pgm;
pub mod synth;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use manifest::{read_manifest, write_manifest, EntryRole, ManifestEntry};
pub use pgm::{montage, read_pgm, read_pgm_bytes, write_pgm, write_pgm_bytes, GrayImage};
pub use synth::{labeled_patches, synth_corpus, SynthConfig};
