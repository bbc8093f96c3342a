//! Network topologies: the strided classifier, the WGAN critic, and the
//! transposed-convolution generator, plus a generic layer-spec runner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{init_params, Init, ParamInit, ParamSet};
use crate::rng::Stream;
use crate::tensor::{batch_norm, dropout, layer_norm, Elem, NormMode, Padding, RunningStats, Tensor};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum LayerSpec {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
    },
    ConvTranspose {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        in_f: usize,
        out_f: usize,
    },
    BatchNorm {
        ch: usize,
    },
    LayerNorm {
        ch: usize,
    },
    LeakyRelu {
        slope: f64,
    },
    Tanh,
    Dropout {
        rate: f64,
    },
    Flatten,
    /// Per-sample reshape; shape excludes the batch dim.
    Reshape {
        shape: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticNorm {
    None,
    LayerNorm,
    BatchNorm,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Square input edge; power of two >= 16.
    pub input_size: usize,
    pub base_filters: usize,
    pub width_scale: f64,
    pub hidden: usize,
    pub dropout_rate: f64,
    pub leaky_slope: f64,
    pub critic_norm: CriticNorm,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_size: 128,
            base_filters: 32,
            width_scale: 1.0,
            hidden: 1024,
            dropout_rate: 0.5,
            leaky_slope: 0.2,
            critic_norm: CriticNorm::None,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let s = self.input_size;
        if s < 16 || !s.is_power_of_two() {
            return Err(Error::Config(format!(
                "input_size must be a power of two >= 16, got {s}"
            )));
        }
        if !(0.0..=1.0).contains(&self.width_scale) || self.width_scale == 0.0 {
            return Err(Error::Config(format!(
                "width_scale must be in (0,1], got {}",
                self.width_scale
            )));
        }
        Ok(())
    }

    /// Number of stride-2 conv layers needed to reach a 4x4 feature map.
    pub fn n_conv(&self) -> usize {
        (self.input_size as f64).log2() as usize - 2
    }

    fn scaled(&self, ch: usize) -> usize {
        ((ch as f64 * self.width_scale).round() as usize).max(1)
    }

    /// Conv channel progression: base, 2*base, ... scaled by width_scale.
    pub fn conv_channels(&self) -> Vec<usize> {
        (0..self.n_conv())
            .map(|i| self.scaled(self.base_filters << i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Immutable topology plus its parameters and batch-norm running stats.
pub struct Network<T: Elem> {
    pub specs: Vec<LayerSpec>,
    pub params: ParamSet<T>,
    /// Indexed in parallel with `specs`; Some for BatchNorm layers.
    pub bn_stats: Vec<Option<RunningStats<T>>>,
}

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

fn param_descs(specs: &[LayerSpec]) -> Result<Vec<ParamInit>> {
    let mut descs = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        match spec {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => {
                if *in_ch == 0 || *out_ch == 0 {
                    return Err(Error::LayerSpec {
                        layer: format!("conv{i}"),
                        reason: "zero channels".into(),
                    });
                }
                descs.push(ParamInit {
                    name: format!("conv{i}.kernel"),
                    shape: vec![*out_ch, *in_ch, *kernel, *kernel],
                    init: Init::HeNormal {
                        fan_in: in_ch * kernel * kernel,
                    },
                });
                descs.push(ParamInit {
                    name: format!("conv{i}.bias"),
                    shape: vec![*out_ch],
                    init: Init::Zeros,
                });
            }
            LayerSpec::ConvTranspose {
                in_ch,
                out_ch,
                kernel,
                ..
            } => {
                descs.push(ParamInit {
                    name: format!("convt{i}.kernel"),
                    shape: vec![*in_ch, *out_ch, *kernel, *kernel],
                    init: Init::HeNormal {
                        fan_in: in_ch * kernel * kernel,
                    },
                });
                descs.push(ParamInit {
                    name: format!("convt{i}.bias"),
                    shape: vec![*out_ch],
                    init: Init::Zeros,
                });
            }
            LayerSpec::Dense { in_f, out_f } => {
                if *in_f == 0 || *out_f == 0 {
                    return Err(Error::LayerSpec {
                        layer: format!("dense{i}"),
                        reason: "zero width".into(),
                    });
                }
                descs.push(ParamInit {
                    name: format!("dense{i}.weight"),
                    shape: vec![*in_f, *out_f],
                    init: Init::HeNormal { fan_in: *in_f },
                });
                descs.push(ParamInit {
                    name: format!("dense{i}.bias"),
                    shape: vec![*out_f],
                    init: Init::Zeros,
                });
            }
            LayerSpec::BatchNorm { ch } | LayerSpec::LayerNorm { ch } => {
                let kind = if matches!(spec, LayerSpec::BatchNorm { .. }) {
                    "bn"
                } else {
                    "ln"
                };
                descs.push(ParamInit {
                    name: format!("{kind}{i}.gamma"),
                    shape: vec![*ch],
                    init: Init::Ones,
                });
                descs.push(ParamInit {
                    name: format!("{kind}{i}.beta"),
                    shape: vec![*ch],
                    init: Init::Zeros,
                });
            }
            _ => {}
        }
    }
    Ok(descs)
}

impl<T: Elem> Network<T> {
    pub fn from_specs(specs: Vec<LayerSpec>, rng: &mut Stream) -> Result<Self> {
        let descs = param_descs(&specs)?;
        let params = init_params(&descs, rng);
        let bn_stats = specs
            .iter()
            .map(|s| match s {
                LayerSpec::BatchNorm { ch } => {
                    Some(RunningStats::new(*ch, T::from_f64(BN_MOMENTUM)))
                }
                _ => None,
            })
            .collect();
        Ok(Network {
            specs,
            params,
            bn_stats,
        })
    }

    pub fn has_batch_norm(&self) -> bool {
        self.specs
            .iter()
            .any(|s| matches!(s, LayerSpec::BatchNorm { .. }))
    }

    pub fn param_count(&self) -> usize {
        self.params.total_scalars()
    }

    /// Forward pass. `rng` is only consulted by dropout in train mode.
    pub fn forward(
        &mut self,
        input: &Tensor<T>,
        mode: Mode,
        mut rng: Option<&mut Stream>,
    ) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for i in 0..self.specs.len() {
            x = match &self.specs[i] {
                LayerSpec::Conv { stride, .. } => {
                    let k = self.params.get(&format!("conv{i}.kernel"));
                    let b = self.params.get(&format!("conv{i}.bias"));
                    let y = x.conv2d(k, *stride, Padding::Half)?;
                    let shape = y.shape().to_vec();
                    y.add(&b.channel_bcast(&shape))
                }
                LayerSpec::ConvTranspose { stride, .. } => {
                    let k = self.params.get(&format!("convt{i}.kernel"));
                    let b = self.params.get(&format!("convt{i}.bias"));
                    let y = x.conv2d_transpose(k, *stride)?;
                    let shape = y.shape().to_vec();
                    y.add(&b.channel_bcast(&shape))
                }
                LayerSpec::Dense { .. } => {
                    let w = self.params.get(&format!("dense{i}.weight"));
                    let b = self.params.get(&format!("dense{i}.bias"));
                    x.dense(w, b)?
                }
                LayerSpec::BatchNorm { .. } => {
                    let gamma = self.params.get(&format!("bn{i}.gamma")).clone();
                    let beta = self.params.get(&format!("bn{i}.beta")).clone();
                    let norm_mode = match mode {
                        Mode::Train => NormMode::Train,
                        Mode::Eval => NormMode::Eval,
                    };
                    let stats = self.bn_stats[i].as_mut().expect("bn stats present");
                    batch_norm(&x, &gamma, &beta, T::from_f64(BN_EPS), norm_mode, stats)?
                }
                LayerSpec::LayerNorm { .. } => {
                    let gamma = self.params.get(&format!("ln{i}.gamma"));
                    let beta = self.params.get(&format!("ln{i}.beta"));
                    layer_norm(&x, gamma, beta, T::from_f64(BN_EPS))?
                }
                LayerSpec::LeakyRelu { slope } => x.leaky_relu(T::from_f64(*slope)),
                LayerSpec::Tanh => x.tanh(),
                LayerSpec::Dropout { rate } => {
                    if mode == Mode::Train && *rate > 0.0 {
                        let r = rng.as_deref_mut().ok_or_else(|| {
                            Error::Config("dropout in train mode requires an rng stream".into())
                        })?;
                        dropout(&x, *rate, true, r)
                    } else {
                        x
                    }
                }
                LayerSpec::Flatten => {
                    let n = x.shape()[0];
                    let rest: usize = x.shape()[1..].iter().product();
                    x.reshape(&[n, rest])
                }
                LayerSpec::Reshape { shape } => {
                    let mut full = vec![x.shape()[0]];
                    full.extend_from_slice(shape);
                    x.reshape(&full)
                }
            };
        }
        Ok(x)
    }
}

fn conv_stack(cfg: &NetworkConfig, specs: &mut Vec<LayerSpec>, norm: CriticNorm) {
    let channels = cfg.conv_channels();
    let mut in_ch = 1;
    for &out_ch in &channels {
        specs.push(LayerSpec::Conv {
            in_ch,
            out_ch,
            kernel: 4,
            stride: 2,
        });
        match norm {
            CriticNorm::BatchNorm => specs.push(LayerSpec::BatchNorm { ch: out_ch }),
            CriticNorm::LayerNorm => specs.push(LayerSpec::LayerNorm { ch: out_ch }),
            CriticNorm::None => {}
        }
        specs.push(LayerSpec::LeakyRelu {
            slope: cfg.leaky_slope,
        });
        in_ch = out_ch;
    }
}

/// Strided classifier: n_conv 4x4/stride-2 conv layers with batch norm and
/// leaky ReLU, two dense layers, dropout after the first, raw logits out.
pub fn build_classifier<T: Elem>(
    cfg: &NetworkConfig,
    n_classes: usize,
    rng: &mut Stream,
) -> Result<Network<T>> {
    cfg.validate()?;
    if n_classes < 2 {
        return Err(Error::Config(format!(
            "classifier needs n_classes >= 2, got {n_classes}"
        )));
    }
    let mut specs = Vec::new();
    conv_stack(cfg, &mut specs, CriticNorm::BatchNorm);
    specs.push(LayerSpec::Flatten);
    let last_ch = *cfg.conv_channels().last().unwrap();
    let feat = last_ch * 4 * 4;
    let hidden = ((cfg.hidden as f64 * cfg.width_scale).round() as usize).max(1);
    specs.push(LayerSpec::Dense {
        in_f: feat,
        out_f: hidden,
    });
    specs.push(LayerSpec::BatchNorm { ch: hidden });
    specs.push(LayerSpec::LeakyRelu {
        slope: cfg.leaky_slope,
    });
    specs.push(LayerSpec::Dropout {
        rate: cfg.dropout_rate,
    });
    specs.push(LayerSpec::Dense {
        in_f: hidden,
        out_f: n_classes,
    });
    Network::from_specs(specs, rng)
}

/// Critic: classifier topology with a single unbounded output score and
/// normalization per `cfg.critic_norm` (default none, so the per-sample
/// gradient penalty stays well-defined). No dropout: scores stay
/// deterministic given the input.
pub fn build_critic<T: Elem>(cfg: &NetworkConfig, rng: &mut Stream) -> Result<Network<T>> {
    cfg.validate()?;
    let mut specs = Vec::new();
    conv_stack(cfg, &mut specs, cfg.critic_norm);
    specs.push(LayerSpec::Flatten);
    let last_ch = *cfg.conv_channels().last().unwrap();
    let feat = last_ch * 4 * 4;
    let hidden = ((cfg.hidden as f64 * cfg.width_scale).round() as usize).max(1);
    specs.push(LayerSpec::Dense {
        in_f: feat,
        out_f: hidden,
    });
    match cfg.critic_norm {
        CriticNorm::BatchNorm => specs.push(LayerSpec::BatchNorm { ch: hidden }),
        CriticNorm::LayerNorm => specs.push(LayerSpec::LayerNorm { ch: hidden }),
        CriticNorm::None => {}
    }
    specs.push(LayerSpec::LeakyRelu {
        slope: cfg.leaky_slope,
    });
    specs.push(LayerSpec::Dense {
        in_f: hidden,
        out_f: 1,
    });
    Network::from_specs(specs, rng)
}

/// Generator: dense from latent to a 4x4 feature map, then stride-2
/// transposed convolutions halving channels, tanh output in [-1, 1].
pub fn build_generator<T: Elem>(
    latent_dim: usize,
    cfg: &NetworkConfig,
    rng: &mut Stream,
) -> Result<Network<T>> {
    cfg.validate()?;
    if latent_dim < 1 {
        return Err(Error::Config("latent_dim must be >= 1".into()));
    }
    let n_conv = cfg.n_conv();
    let mut channels = cfg.conv_channels();
    channels.reverse(); // widest first: e.g. 512, 256, ..., 32
    let c0 = channels[0];

    let mut specs = Vec::new();
    specs.push(LayerSpec::Dense {
        in_f: latent_dim,
        out_f: c0 * 4 * 4,
    });
    specs.push(LayerSpec::BatchNorm { ch: c0 * 4 * 4 });
    specs.push(LayerSpec::LeakyRelu {
        slope: cfg.leaky_slope,
    });
    specs.push(LayerSpec::Reshape {
        shape: vec![c0, 4, 4],
    });
    for i in 0..n_conv {
        let in_ch = channels[i];
        let out_ch = if i + 1 < n_conv { channels[i + 1] } else { 1 };
        specs.push(LayerSpec::ConvTranspose {
            in_ch,
            out_ch,
            kernel: 4,
            stride: 2,
        });
        if i + 1 < n_conv {
            specs.push(LayerSpec::BatchNorm { ch: out_ch });
            specs.push(LayerSpec::LeakyRelu {
                slope: cfg.leaky_slope,
            });
        } else {
            specs.push(LayerSpec::Tanh);
        }
    }
    Network::from_specs(specs, rng)
}

/// Dense-only network, used for 1-D toy GAN experiments.
pub fn build_mlp<T: Elem>(widths: &[usize], slope: f64, rng: &mut Stream) -> Result<Network<T>> {
    let mut specs = Vec::new();
    for i in 0..widths.len() - 1 {
        specs.push(LayerSpec::Dense {
            in_f: widths[i],
            out_f: widths[i + 1],
        });
        if i + 2 < widths.len() {
            specs.push(LayerSpec::LeakyRelu { slope });
        }
    }
    Network::from_specs(specs, rng)
}
