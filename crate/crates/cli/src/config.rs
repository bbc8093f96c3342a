//! Layered run configuration: built-in defaults, then an optional TOML
//! config file, then command-line flag overrides. Every artifact-producing
//! command writes the fully-resolved config next to its outputs so the run
//! can be reproduced from that file alone.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use embryoforge_core::gan::{LossKind, TrainConfig};
use embryoforge_core::models::{CriticNorm, NetworkConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Optional-field mirror of `RunConfig` for partial TOML files.
#[derive(Debug, Default, Deserialize)]
pub struct PartialConfig {
    #[serde(default)]
    pub network: PartialNetwork,
    #[serde(default)]
    pub train: PartialTrain,
}

#[derive(Debug, Default, Deserialize)]
pub struct PartialNetwork {
    pub input_size: Option<usize>,
    pub base_filters: Option<usize>,
    pub width_scale: Option<f64>,
    pub hidden: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub leaky_slope: Option<f64>,
    pub critic_norm: Option<CriticNorm>,
}

#[derive(Debug, Default, Deserialize)]
pub struct PartialTrain {
    pub batch_size: Option<usize>,
    pub iterations: Option<u64>,
    pub epochs: Option<usize>,
    pub lr_classifier: Option<f64>,
    pub lr_gan: Option<f64>,
    pub betas_classifier: Option<(f64, f64)>,
    pub betas_gan: Option<(f64, f64)>,
    pub n_critic: Option<usize>,
    pub penalty_weight: Option<f64>,
    pub latent_dim: Option<usize>,
    pub seed: Option<u64>,
    pub loss_kind: Option<LossKind>,
    pub dropout_rate: Option<f64>,
    pub augment: Option<bool>,
    pub sample_every: Option<u64>,
    pub saturating_generator: Option<bool>,
}

macro_rules! merge {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

impl RunConfig {
    pub fn apply(&mut self, p: PartialConfig) {
        merge!(
            self.network, p.network,
            input_size, base_filters, width_scale, hidden, dropout_rate, leaky_slope, critic_norm,
        );
        merge!(
            self.train, p.train,
            batch_size, iterations, epochs, lr_classifier, lr_gan, betas_classifier, betas_gan,
            n_critic, penalty_weight, latent_dim, seed, loss_kind, dropout_rate, augment,
            sample_every, saturating_generator,
        );
    }

    /// Defaults, overlaid with the config file if given.
    pub fn load(config_path: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let partial: PartialConfig = toml::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            cfg.apply(partial);
        }
        Ok(cfg)
    }

    /// Write the fully-resolved config beside the run's outputs.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing resolved config")?;
        std::fs::write(out_dir.join("resolved-config.toml"), text)?;
        Ok(())
    }
}

/// Flags shared by the training commands; each maps onto one config field.
#[derive(Debug, Clone, clap::Args)]
pub struct TrainOverrides {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_classifier: Option<f64>,
    #[arg(long)]
    pub lr_gan: Option<f64>,
    #[arg(long)]
    pub n_critic: Option<usize>,
    #[arg(long)]
    pub penalty_weight: Option<f64>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub sample_every: Option<u64>,
    /// Input edge length the networks are built for.
    #[arg(long)]
    pub input_size: Option<usize>,
    #[arg(long)]
    pub base_filters: Option<usize>,
    #[arg(long)]
    pub width_scale: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Adversarial objective: wgan_gp or minimax.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub no_augment: bool,
}

impl TrainOverrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        let t = &mut cfg.train;
        macro_rules! set {
            ($($field:ident),+ $(,)?) => {
                $(if let Some(v) = self.$field { t.$field = v; })+
            };
        }
        set!(seed, batch_size, iterations, epochs, lr_classifier, lr_gan, n_critic,
             penalty_weight, latent_dim, sample_every);
        if self.no_augment {
            t.augment = false;
        }
        if let Some(loss) = &self.loss {
            t.loss_kind = match loss.as_str() {
                "wgan_gp" => LossKind::WganGp,
                "minimax" => LossKind::Minimax,
                other => anyhow::bail!("unknown loss `{other}` (expected wgan_gp or minimax)"),
            };
        }
        let n = &mut cfg.network;
        if let Some(v) = self.input_size {
            n.input_size = v;
        }
        if let Some(v) = self.base_filters {
            n.base_filters = v;
        }
        if let Some(v) = self.width_scale {
            n.width_scale = v;
        }
        if let Some(v) = self.hidden {
            n.hidden = v;
        }
        Ok(cfg)
    }
}
