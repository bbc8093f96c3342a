//! Parameter containers, initialization, and the Adam optimizer.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::tensor::{Elem, GradMap, Tensor};

/// Ordered, named trainable parameters. Iteration order is insertion order.
pub struct ParamSet<T: Elem> {
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Elem> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<T>) {
        assert!(
            tensor.requires_grad(),
            "parameter `{name}` must be grad-enabled"
        );
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name `{name}`"
        );
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push((name.to_string(), tensor));
    }

    pub fn get(&self, name: &str) -> &Tensor<T> {
        let i = self.index[name];
        &self.entries[i].1
    }

    pub fn replace(&mut self, name: &str, tensor: Tensor<T>) {
        let i = self.index[name];
        self.entries[i].1 = tensor;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.entries.iter().map(|(_, t)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }
}

impl<T: Elem> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// How a single named parameter is initialized.
#[derive(Debug, Clone)]
pub enum Init {
    /// He-normal: std = sqrt(2 / fan_in).
    HeNormal { fan_in: usize },
    Zeros,
    Ones,
}

#[derive(Debug, Clone)]
pub struct ParamInit {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Build a ParamSet from init descriptors, drawing from the init stream.
pub fn init_params<T: Elem>(descs: &[ParamInit], rng: &mut Stream) -> ParamSet<T> {
    let mut params = ParamSet::new();
    for d in descs {
        let n: usize = d.shape.iter().product();
        let data: Vec<T> = match d.init {
            Init::HeNormal { fan_in } => {
                let std = (2.0 / fan_in as f64).sqrt();
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        T::from_f64(z * std)
                    })
                    .collect()
            }
            Init::Zeros => vec![T::zero(); n],
            Init::Ones => vec![T::one(); n],
        };
        params.insert(&d.name, Tensor::var(data, &d.shape));
    }
    params
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moments plus the shared step counter.
pub struct AdamState<T: Elem> {
    pub cfg: AdamConfig,
    pub t: u64,
    moments: HashMap<String, (Vec<T>, Vec<T>)>,
}

impl<T: Elem> AdamState<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        AdamState {
            cfg,
            t: 0,
            moments: HashMap::new(),
        }
    }

    pub fn moment_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.moments.keys().map(|s| s.as_str()).collect();
        names.sort_unstable();
        names
    }

    pub fn moments_of(&self, name: &str) -> Option<&(Vec<T>, Vec<T>)> {
        self.moments.get(name)
    }

    pub fn set_moments(&mut self, name: &str, m: Vec<T>, v: Vec<T>) {
        self.moments.insert(name.to_string(), (m, v));
    }
}

/// One Adam step with bias correction over every parameter in `params`.
pub fn adam_step<T: Elem>(
    params: &mut ParamSet<T>,
    grads: &GradMap<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64(state.cfg.beta1);
    let b2 = T::from_f64(state.cfg.beta2);
    let lr = T::from_f64(state.cfg.lr);
    let eps = T::from_f64(state.cfg.eps);
    let one = T::one();
    let bc1 = T::from_f64(1.0 - state.cfg.beta1.powi(t));
    let bc2 = T::from_f64(1.0 - state.cfg.beta2.powi(t));

    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let p = params.get(&name).clone();
        let g = grads
            .get(&p)
            .ok_or_else(|| Error::MissingGradient(name.clone()))?;
        let (m, v) = state
            .moments
            .entry(name.clone())
            .or_insert_with(|| (vec![T::zero(); p.numel()], vec![T::zero(); p.numel()]));
        let gd = g.data();
        let pd = p.data();
        let mut new = Vec::with_capacity(pd.len());
        for i in 0..pd.len() {
            m[i] = b1.mul(m[i]).add(one.sub(b1).mul(gd[i]));
            v[i] = b2.mul(v[i]).add(one.sub(b2).mul(gd[i]).mul(gd[i]));
            let m_hat = m[i].div(bc1);
            let v_hat = v[i].div(bc2);
            new.push(pd[i].sub(lr.mul(m_hat).div(v_hat.sqrt().add(eps))));
        }
        params.replace(&name, Tensor::var(new, p.shape()));
    }
    Ok(())
}
