pub mod generate;
pub mod gradcheck;
pub mod overfit;
pub mod preprocess;
pub mod synth;
pub mod train_classifier;
pub mod train_gan;
