//! Desk-scale deep-learning engine for membrane-texture microscopy:
//! tensor autodiff with double backprop, strided convolutional networks,
//! WGAN-GP training, preprocessing, and bit-exact file formats.

pub mod dataio;
pub mod error;
pub mod gan;
pub mod gradcheck;
pub mod imaging;
pub mod models;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
