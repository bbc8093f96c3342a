//! Adversarial objectives and training loops: the classic minimax loss, the
//! Wasserstein objective with gradient penalty, the alternating GAN loop,
//! the classifier loop, and the small-dataset overfitting experiment.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{augment, normalize_for_net, AugmentConfig, Patch};
use crate::models::{Mode, Network, NetworkConfig};
use crate::nn::{adam_step, AdamConfig, AdamState};
use crate::rng::RngStreams;
use crate::tensor::{backward, Elem, Tensor};

pub const MINIMAX_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Minimax,
    WganGp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: u64,
    pub epochs: usize,
    pub lr_classifier: f64,
    pub lr_gan: f64,
    pub betas_classifier: (f64, f64),
    pub betas_gan: (f64, f64),
    pub n_critic: usize,
    pub penalty_weight: f64,
    pub latent_dim: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub dropout_rate: f64,
    pub augment: bool,
    /// Emit a sample grid every this many iterations (0 disables).
    pub sample_every: u64,
    /// Literal E[log(1-D)] generator loss instead of the non-saturating form.
    pub saturating_generator: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            iterations: 3000,
            epochs: 30,
            lr_classifier: 1e-5,
            lr_gan: 1e-4,
            betas_classifier: (0.9, 0.999),
            betas_gan: (0.0, 0.9),
            n_critic: 5,
            penalty_weight: 10.0,
            latent_dim: 128,
            seed: 0,
            loss_kind: LossKind::WganGp,
            dropout_rate: 0.5,
            augment: true,
            sample_every: 500,
            saturating_generator: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_critic < 1 {
            return Err(Error::Config("n_critic must be >= 1".into()));
        }
        if self.penalty_weight < 0.0 {
            return Err(Error::Config("penalty_weight must be >= 0".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be >= 2".into()));
        }
        Ok(())
    }

    pub fn adam_gan(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_gan,
            beta1: self.betas_gan.0,
            beta2: self.betas_gan.1,
            eps: 1e-8,
        }
    }

    pub fn adam_classifier(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_classifier,
            beta1: self.betas_classifier.0,
            beta2: self.betas_classifier.1,
            eps: 1e-8,
        }
    }
}

// ----- objectives -----

fn check_probability<T: Elem>(t: &Tensor<T>, name: &'static str) -> Result<()> {
    for &v in t.data() {
        let v = v.to_f64();
        if !(-MINIMAX_EPS..=1.0 + MINIMAX_EPS).contains(&v) {
            return Err(Error::Config(format!(
                "{name} value {v} outside (0,1): minimax loss expects sigmoid outputs"
            )));
        }
    }
    Ok(())
}

/// Minimax GAN losses from sigmoid-activated discriminator outputs.
///
/// The discriminator maximizes E[log D(x)] + E[log(1-D(x~))], so its loss is
/// the negation. The generator loss defaults to the non-saturating
/// -E[log D(x~)]; the literal E[log(1-D(x~))] form is available.
pub fn minimax_loss<T: Elem>(
    d_real: &Tensor<T>,
    d_fake: &Tensor<T>,
    saturating: bool,
) -> Result<(Tensor<T>, Tensor<T>)> {
    check_probability(d_real, "d_real")?;
    check_probability(d_fake, "d_fake")?;
    let eps = T::from_f64(MINIMAX_EPS);
    let hi = T::from_f64(1.0 - MINIMAX_EPS);
    let real = d_real.clamp(eps, hi);
    let fake = d_fake.clamp(eps, hi);
    let one_minus_fake = fake.neg().add_scalar(T::one());
    let d_loss = real
        .ln()
        .mean_all()
        .add(&one_minus_fake.ln().mean_all())
        .neg();
    let g_loss = if saturating {
        one_minus_fake.ln().mean_all()
    } else {
        fake.ln().mean_all().neg()
    };
    Ok((d_loss, g_loss))
}

pub struct WassersteinLosses<T: Elem> {
    pub critic_loss: Tensor<T>,
    pub gen_loss: Tensor<T>,
    /// mean(D(real)) - mean(D(fake)), the logged Wasserstein estimate.
    pub estimate: f64,
}

/// Wasserstein critic and generator objectives from unbounded scores.
pub fn wasserstein_objective<T: Elem>(
    d_real: &Tensor<T>,
    d_fake: &Tensor<T>,
    penalty: &Tensor<T>,
) -> Result<WassersteinLosses<T>> {
    if !d_real.all_finite() || !d_fake.all_finite() {
        return Err(Error::NonFinite("critic scores".into()));
    }
    let mean_real = d_real.mean_all();
    let mean_fake = d_fake.mean_all();
    let estimate = mean_real.item().to_f64() - mean_fake.item().to_f64();
    let critic_loss = mean_fake.sub(&mean_real).add(penalty);
    let gen_loss = mean_fake.neg();
    Ok(WassersteinLosses {
        critic_loss,
        gen_loss,
        estimate,
    })
}

/// Gradient penalty P = lambda * mean_n (||grad_{x^_n} D(x^_n)||_2 - 1)^2 at
/// per-sample interpolates x^ = eps*real + (1-eps)*fake, eps ~ U[0,1].
///
/// The returned scalar stays attached to the graph through a higher-order
/// backward pass, so differentiating it w.r.t. critic parameters works.
pub fn gradient_penalty<T: Elem>(
    critic: &mut Network<T>,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    lambda: f64,
    rng: &mut crate::rng::Stream,
) -> Result<Tensor<T>> {
    if real.shape() != fake.shape() {
        return Err(Error::Shape {
            context: "gradient_penalty",
            lhs: real.shape().to_vec(),
            rhs: fake.shape().to_vec(),
        });
    }
    if critic.has_batch_norm() {
        return Err(Error::BatchCoupledCritic);
    }
    use rand::Rng;
    let n = real.shape()[0];
    let inner: usize = real.shape()[1..].iter().product();
    let mut mixed = Vec::with_capacity(n * inner);
    for i in 0..n {
        let eps = T::from_f64(rng.gen::<f64>());
        let rem = T::one().sub(eps);
        for j in 0..inner {
            let idx = i * inner + j;
            mixed.push(eps.mul(real.data()[idx]).add(rem.mul(fake.data()[idx])));
        }
    }
    let x_hat = Tensor::var(mixed, real.shape());
    let scores = critic.forward(&x_hat, Mode::Train, None)?;
    let total = scores.sum_all();
    let grads = backward(&total, &[&x_hat], true)?;
    let g = grads.get(&x_hat).expect("interpolate gradient");
    let norms = g.square().sample_sum().sqrt();
    Ok(norms
        .add_scalar(T::one().neg())
        .square()
        .mean_all()
        .scale(T::from_f64(lambda)))
}

// ----- datasets -----

/// Flat store of fixed-shape samples for GAN training.
pub struct GanDataset<T: Elem> {
    data: Vec<T>,
    sample_shape: Vec<usize>,
    n: usize,
}

impl<T: Elem> GanDataset<T> {
    pub fn new(data: Vec<T>, sample_shape: &[usize]) -> Self {
        let stride: usize = sample_shape.iter().product();
        assert!(stride > 0 && data.len() % stride == 0);
        let n = data.len() / stride;
        GanDataset {
            data,
            sample_shape: sample_shape.to_vec(),
            n,
        }
    }

    pub fn from_patches(patches: &[Patch]) -> Self {
        assert!(!patches.is_empty());
        let size = patches[0].size;
        let maxv = patches[0].max_value() as f64;
        let mut data = Vec::with_capacity(patches.len() * size * size);
        for p in patches {
            assert_eq!(p.size, size);
            data.extend(
                p.pixels
                    .iter()
                    .map(|&v| T::from_f64(v as f64 / maxv * 2.0 - 1.0)),
            );
        }
        GanDataset {
            data,
            sample_shape: vec![1, size, size],
            n: patches.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn mean_value(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64()).sum::<f64>() / self.data.len() as f64
    }

    pub fn batch(&self, indices: &[usize]) -> Tensor<T> {
        let stride: usize = self.sample_shape.iter().product();
        let mut out = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            out.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        Tensor::from_vec(out, &shape)
    }
}

// ----- GAN trainer -----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: u64,
    pub critic_obj: f64,
    pub gen_obj: f64,
    pub penalty: f64,
    pub wall_ms: f64,
}

impl TraceRow {
    /// The logged Wasserstein estimate mean(D(real)) - mean(D(fake)).
    pub fn wasserstein_estimate(&self) -> f64 {
        self.penalty - self.critic_obj
    }
}

pub const TRACE_HEADER: &str = "iter,critic_obj,gen_obj,penalty,wall_ms";

pub fn write_trace_csv(path: &std::path::Path, rows: &[TraceRow]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            f,
            "{},{:.17e},{:.17e},{:.17e},{:.3}",
            r.iter, r.critic_obj, r.gen_obj, r.penalty, r.wall_ms
        )?;
    }
    Ok(())
}

/// One GAN training session: networks, optimizer states, RNG streams, trace.
pub struct GanTrainer<T: Elem> {
    pub gen: Network<T>,
    pub critic: Network<T>,
    pub opt_gen: AdamState<T>,
    pub opt_critic: AdamState<T>,
    pub streams: RngStreams,
    pub iter: u64,
    pub cfg: TrainConfig,
}

/// Called after each iteration; lets the CLI emit sample grids.
pub type SampleHook<'a, T> = dyn FnMut(u64, &mut Network<T>) + 'a;

impl<T: Elem> GanTrainer<T> {
    pub fn new(gen: Network<T>, critic: Network<T>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let streams = RngStreams::new(cfg.seed);
        let opt = cfg.adam_gan();
        Ok(GanTrainer {
            gen,
            critic,
            opt_gen: AdamState::new(opt),
            opt_critic: AdamState::new(opt),
            streams,
            iter: 0,
            cfg,
        })
    }

    fn latent_batch(&mut self, n: usize) -> Tensor<T> {
        let d = self.cfg.latent_dim;
        let data: Vec<T> = (0..n * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.streams.latent);
                T::from_f64(z)
            })
            .collect();
        Tensor::from_vec(data, &[n, d])
    }

    fn sample_indices(&mut self, n: usize, len: usize) -> Vec<usize> {
        use rand::Rng;
        (0..n)
            .map(|_| self.streams.data_order.gen_range(0..len))
            .collect()
    }

    /// One alternating iteration: n_critic critic steps, one generator step.
    pub fn step(&mut self, data: &GanDataset<T>) -> Result<TraceRow> {
        let start = std::time::Instant::now();
        let b = self.cfg.batch_size;
        let mut critic_obj = 0.0;
        let mut penalty_val = 0.0;

        for _ in 0..self.cfg.n_critic {
            let idx = self.sample_indices(b, data.len());
            let real = data.batch(&idx);
            let z = self.latent_batch(b);
            let fake = self
                .gen
                .forward(&z, Mode::Train, Some(&mut self.streams.dropout))?
                .detach();

            let d_real = self.critic.forward(&real, Mode::Train, None)?;
            let d_fake = self.critic.forward(&fake, Mode::Train, None)?;

            let loss = match self.cfg.loss_kind {
                LossKind::WganGp => {
                    let penalty = gradient_penalty(
                        &mut self.critic,
                        &real,
                        &fake,
                        self.cfg.penalty_weight,
                        &mut self.streams.epsilon,
                    )?;
                    penalty_val = penalty.item().to_f64();
                    let w = wasserstein_objective(&d_real, &d_fake, &penalty)?;
                    w.critic_loss
                }
                LossKind::Minimax => {
                    let (d_loss, _) =
                        minimax_loss(&d_real.sigmoid(), &d_fake.sigmoid(), false)?;
                    penalty_val = 0.0;
                    d_loss
                }
            };
            critic_obj = loss.item().to_f64();
            if !critic_obj.is_finite() {
                return Err(Error::TrainAborted {
                    iter: self.iter,
                    reason: "non-finite critic loss".into(),
                });
            }
            let grads = backward(&loss, &self.critic.params.tensors(), false)?;
            adam_step(&mut self.critic.params, &grads, &mut self.opt_critic)?;
        }

        let z = self.latent_batch(b);
        let fake = self
            .gen
            .forward(&z, Mode::Train, Some(&mut self.streams.dropout))?;
        let d_fake = self.critic.forward(&fake, Mode::Train, None)?;
        let gen_loss = match self.cfg.loss_kind {
            LossKind::WganGp => d_fake.mean_all().neg(),
            LossKind::Minimax => {
                let probs = d_fake.sigmoid();
                let eps = T::from_f64(MINIMAX_EPS);
                let clamped = probs.clamp(eps, T::from_f64(1.0 - MINIMAX_EPS));
                if self.cfg.saturating_generator {
                    clamped.neg().add_scalar(T::one()).ln().mean_all()
                } else {
                    clamped.ln().mean_all().neg()
                }
            }
        };
        let gen_obj = gen_loss.item().to_f64();
        if !gen_obj.is_finite() {
            return Err(Error::TrainAborted {
                iter: self.iter,
                reason: "non-finite generator loss".into(),
            });
        }
        let grads = backward(&gen_loss, &self.gen.params.tensors(), false)?;
        adam_step(&mut self.gen.params, &grads, &mut self.opt_gen)?;

        let row = TraceRow {
            iter: self.iter,
            critic_obj,
            gen_obj,
            penalty: penalty_val,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        self.iter += 1;
        Ok(row)
    }

    /// Run until `cfg.iterations` total iterations, appending to `trace`.
    pub fn run(
        &mut self,
        data: &GanDataset<T>,
        trace: &mut Vec<TraceRow>,
        hook: Option<&mut SampleHook<'_, T>>,
    ) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset("gan training set"));
        }
        let mut hook = hook;
        while self.iter < self.cfg.iterations {
            let row = self.step(data)?;
            trace.push(row);
            if self.cfg.sample_every > 0 && self.iter % self.cfg.sample_every == 0 {
                if let Some(h) = hook.as_deref_mut() {
                    h(self.iter, &mut self.gen);
                }
            }
        }
        Ok(())
    }

    /// Sample a grid of generated images in eval mode, deterministically
    /// from a dedicated seed (does not consume the training streams).
    pub fn sample_images(&mut self, n: usize, seed: u64) -> Result<Tensor<T>> {
        let mut rng = crate::rng::stream(seed, crate::rng::StreamId::Latent);
        let d = self.cfg.latent_dim;
        let data: Vec<T> = (0..n * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::from_f64(z)
            })
            .collect();
        let z = Tensor::from_vec(data, &[n, d]);
        self.gen.forward(&z, Mode::Eval, None)
    }
}

// ----- classifier training -----

/// Labeled patch collection for classifier training.
pub struct LabeledPatchSet {
    pub patches: Vec<Patch>,
    pub n_classes: usize,
}

impl LabeledPatchSet {
    pub fn new(patches: Vec<Patch>, n_classes: usize) -> Self {
        for p in &patches {
            let l = p.label.expect("labeled patch set requires labels") as usize;
            assert!(l < n_classes, "label {l} out of range");
        }
        LabeledPatchSet { patches, n_classes }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Mean cross-entropy of logits [N, K] against integer labels.
pub fn cross_entropy<T: Elem>(logits: &Tensor<T>, labels: &[usize]) -> Tensor<T> {
    let n = logits.shape()[0];
    let k = logits.shape()[1];
    assert_eq!(labels.len(), n);
    // row max as a constant for numerical stability
    let rowmax: Vec<T> = (0..n)
        .map(|i| {
            let row = &logits.data()[i * k..(i + 1) * k];
            row.iter().fold(row[0], |a, &b| if b > a { b } else { a })
        })
        .collect();
    let shape = logits.shape().to_vec();
    let z = logits.sub(&Tensor::from_vec(rowmax, &[n]).sample_bcast(&shape));
    let lse = z.exp().sample_sum().ln();
    let mut onehot = vec![T::zero(); n * k];
    for (i, &l) in labels.iter().enumerate() {
        onehot[i * k + l] = T::one();
    }
    let picked = z.mul(&Tensor::from_vec(onehot, &shape)).sample_sum();
    lse.sub(&picked).mean_all()
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy<T: Elem>(logits: &Tensor<T>, labels: &[usize]) -> f64 {
    let n = logits.shape()[0];
    let k = logits.shape()[1];
    let mut correct = 0usize;
    for i in 0..n {
        let row = &logits.data()[i * k..(i + 1) * k];
        let mut best = 0;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

fn batch_tensors<T: Elem>(
    patches: &[Patch],
    indices: &[usize],
    augment_cfg: Option<&AugmentConfig>,
    rng: &mut crate::rng::Stream,
) -> (Tensor<T>, Vec<usize>) {
    let size = patches[0].size;
    let mut data = Vec::with_capacity(indices.len() * size * size);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let p = match augment_cfg {
            Some(cfg) => augment(&patches[i], rng, cfg),
            None => patches[i].clone(),
        };
        let t: Tensor<T> = normalize_for_net(&p);
        data.extend_from_slice(t.data());
        labels.push(patches[i].label.unwrap() as usize);
    }
    (
        Tensor::from_vec(data, &[indices.len(), 1, size, size]),
        labels,
    )
}

fn eval_accuracy<T: Elem>(net: &mut Network<T>, set: &LabeledPatchSet, batch: usize) -> Result<f64> {
    let mut correct_weighted = 0.0;
    let mut total = 0usize;
    let mut rng = crate::rng::stream(0, crate::rng::StreamId::Augment); // unused in eval
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch) {
        let (x, labels) = batch_tensors::<T>(&set.patches, chunk, None, &mut rng);
        let logits = net.forward(&x, Mode::Eval, None)?;
        correct_weighted += accuracy(&logits, &labels) * labels.len() as f64;
        total += labels.len();
    }
    Ok(correct_weighted / total as f64)
}

pub struct ClassifierOutcome<T: Elem> {
    pub net: Network<T>,
    pub trace: Vec<EpochRow>,
}

/// Cross-entropy training with per-epoch test accuracy; augmentations are
/// applied to training batches only. Stops early once `stop_at_train_acc`
/// is reached (1.0 never stops early unless perfectly memorized).
pub fn train_classifier<T: Elem>(
    train: &LabeledPatchSet,
    test: &LabeledPatchSet,
    net_cfg: &NetworkConfig,
    cfg: &TrainConfig,
    stop_at_train_acc: Option<f64>,
) -> Result<ClassifierOutcome<T>> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset("classifier split"));
    }
    let mut streams = RngStreams::new(cfg.seed);
    let mut net: Network<T> = crate::models::build_classifier(
        &NetworkConfig {
            dropout_rate: cfg.dropout_rate,
            ..*net_cfg
        },
        train.n_classes,
        &mut streams.init,
    )?;
    let mut opt = AdamState::new(cfg.adam_classifier());
    let aug = AugmentConfig::default();
    let augment_cfg = if cfg.augment { Some(&aug) } else { None };

    let mut trace = Vec::with_capacity(cfg.epochs);
    let n = train.len();
    for epoch in 0..cfg.epochs {
        // shuffled epoch order from the data stream
        let mut order: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut streams.data_order);

        let mut loss_sum = 0.0;
        let mut batches = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // batch norm needs N >= 2
            }
            let (x, labels) =
                batch_tensors::<T>(&train.patches, chunk, augment_cfg, &mut streams.augment);
            let logits = net.forward(&x, Mode::Train, Some(&mut streams.dropout))?;
            let loss = cross_entropy(&logits, &labels);
            let loss_val = loss.item().to_f64();
            if !loss_val.is_finite() {
                return Err(Error::TrainAborted {
                    iter: epoch as u64,
                    reason: "non-finite classifier loss".into(),
                });
            }
            loss_sum += loss_val;
            batches += 1.0;
            let grads = backward(&loss, &net.params.tensors(), false)?;
            adam_step(&mut net.params, &grads, &mut opt)?;
        }

        let train_acc = eval_accuracy(&mut net, train, cfg.batch_size)?;
        let test_acc = eval_accuracy(&mut net, test, cfg.batch_size)?;
        trace.push(EpochRow {
            epoch,
            train_loss: loss_sum / batches.max(1.0),
            train_acc,
            test_acc,
        });
        if let Some(target) = stop_at_train_acc {
            if train_acc >= target {
                break;
            }
        }
    }
    Ok(ClassifierOutcome { net, trace })
}

// ----- overfitting experiment -----

#[derive(Debug, Clone)]
pub struct OverfitConfig {
    pub train_size: usize,
    pub seeds: u64,
    pub net: NetworkConfig,
    pub train: TrainConfig,
}

impl Default for OverfitConfig {
    fn default() -> Self {
        OverfitConfig {
            train_size: 198,
            seeds: 10,
            net: NetworkConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OverfitRow {
    pub width_scale: f64,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverfitReport {
    pub rows: Vec<OverfitRow>,
    pub full_mean: f64,
    pub full_std: f64,
    pub half_mean: f64,
    pub half_std: f64,
    /// Fraction of seeds where the half-width net's test accuracy was >= full.
    pub frac_half_ge_full: f64,
}

impl OverfitReport {
    pub fn render_table(&self) -> String {
        let mut s = String::from("width  seed  train_acc  test_acc\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<6} {:<5} {:<10.4} {:<.4}\n",
                r.width_scale, r.seed, r.train_acc, r.test_acc
            ));
        }
        s.push_str(&format!(
            "full-width  test acc mean {:.4} std {:.4}\n",
            self.full_mean, self.full_std
        ));
        s.push_str(&format!(
            "half-width  test acc mean {:.4} std {:.4}\n",
            self.half_mean, self.half_std
        ));
        s.push_str(&format!(
            "half >= full in {:.0}% of seeds\n",
            self.frac_half_ge_full * 100.0
        ));
        s
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Train full- and half-width classifiers on a deliberately small training
/// set across seeds and report the test-accuracy comparison.
pub fn overfit_demo<T: Elem>(
    train: &LabeledPatchSet,
    test: &LabeledPatchSet,
    cfg: &OverfitConfig,
) -> Result<OverfitReport> {
    let subset: Vec<Patch> = train
        .patches
        .iter()
        .take(cfg.train_size)
        .cloned()
        .collect();
    if subset.len() < cfg.train_size {
        return Err(Error::Config(format!(
            "train set has {} patches, need {}",
            train.len(),
            cfg.train_size
        )));
    }
    let small = LabeledPatchSet::new(subset, train.n_classes);

    let mut rows = Vec::new();
    for &width in &[1.0f64, 0.5] {
        for seed in 0..cfg.seeds {
            let net_cfg = NetworkConfig {
                width_scale: width,
                ..cfg.net
            };
            let train_cfg = TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            let out: ClassifierOutcome<T> =
                train_classifier(&small, test, &net_cfg, &train_cfg, Some(0.999))?;
            let last = out.trace.last().expect("at least one epoch");
            rows.push(OverfitRow {
                width_scale: width,
                seed,
                train_acc: last.train_acc,
                test_acc: last.test_acc,
            });
        }
    }

    let full: Vec<f64> = rows
        .iter()
        .filter(|r| r.width_scale == 1.0)
        .map(|r| r.test_acc)
        .collect();
    let half: Vec<f64> = rows
        .iter()
        .filter(|r| r.width_scale == 0.5)
        .map(|r| r.test_acc)
        .collect();
    let (full_mean, full_std) = mean_std(&full);
    let (half_mean, half_std) = mean_std(&half);
    let wins = half
        .iter()
        .zip(&full)
        .filter(|(h, f)| h >= f)
        .count() as f64;
    Ok(OverfitReport {
        rows,
        full_mean,
        full_std,
        half_mean,
        half_std,
        frac_half_ge_full: wins / cfg.seeds as f64,
    })
}
