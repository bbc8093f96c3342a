//! `embryoforge`: preprocess grayscale microscopy stacks into training
//! patches, train a strided convolutional classifier, and train a
//! gradient-penalty Wasserstein GAN that synthesizes membrane-texture
//! images.
//!
//! Exit codes: 0 success, 1 input/config error, 2 numerical failure.

mod commands;
mod config;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "embryoforge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic membrane-texture corpus (raw stacks or labeled patches).
    Synth(commands::synth::SynthArgs),
    /// Median-filter, brightness-adjust, and crop raw stacks into patches.
    Preprocess(commands::preprocess::PreprocessArgs),
    /// Train the WGAN-GP (or minimax GAN) on a patch corpus.
    TrainGan(commands::train_gan::TrainGanArgs),
    /// Train the convolutional classifier on labeled patches.
    TrainClassifier(commands::train_classifier::TrainClassifierArgs),
    /// Sample images from a trained generator checkpoint.
    Generate(commands::generate::GenerateArgs),
    /// Compare full- vs half-width classifiers on a tiny training set.
    OverfitDemo(commands::overfit::OverfitArgs),
    /// Finite-difference check of every differentiable op.
    Gradcheck(commands::gradcheck::GradcheckArgs),
}

fn main() -> std::process::ExitCode {
    // EMBRYOFORGE_THREADS caps the preprocessing worker pool
    if let Ok(v) = std::env::var("EMBRYOFORGE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    // flag/usage errors are input errors (exit 1), not numerical (exit 2)
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return std::process::ExitCode::from(code as u8);
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Preprocess(args) => commands::preprocess::run(args),
        Command::TrainGan(args) => commands::train_gan::run(args),
        Command::TrainClassifier(args) => commands::train_classifier::run(args),
        Command::Generate(args) => commands::generate::run(args),
        Command::OverfitDemo(args) => commands::overfit::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::from(util::exit_code(&e))
        }
    }
}
