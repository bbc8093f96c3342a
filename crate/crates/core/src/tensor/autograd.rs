//! Reverse-mode differentiation over the eager op graph.
//!
//! Every backward rule is written in terms of public tensor ops, so the
//! gradients it produces carry graph nodes of their own. Calling `backward`
//! with `higher_order = true` keeps those nodes alive, which makes the
//! returned gradients differentiable again.

use std::collections::{HashMap, HashSet};

use super::elem::Elem;
use super::Tensor;
use crate::error::{Error, Result};

pub(crate) enum Op<T: Elem> {
    Add(Tensor<T>, Tensor<T>),
    Sub(Tensor<T>, Tensor<T>),
    Mul(Tensor<T>, Tensor<T>),
    Neg(Tensor<T>),
    Scale(Tensor<T>, T),
    AddScalar(Tensor<T>),
    Recip(Tensor<T>),
    Ln(Tensor<T>),
    Exp(Tensor<T>),
    Sqrt(Tensor<T>),
    Tanh(Tensor<T>),
    Sigmoid(Tensor<T>),
    Clamp(Tensor<T>, T, T),
    SumAll(Tensor<T>),
    ScalarBcast(Tensor<T>),
    ChannelSum(Tensor<T>),
    ChannelBcast(Tensor<T>),
    SampleSum(Tensor<T>),
    SampleBcast(Tensor<T>),
    Matmul(Tensor<T>, Tensor<T>),
    Transpose(Tensor<T>),
    Reshape(Tensor<T>),
    Conv2d {
        x: Tensor<T>,
        k: Tensor<T>,
        stride: usize,
        pad: usize,
    },
    ConvDInput {
        gy: Tensor<T>,
        k: Tensor<T>,
        stride: usize,
        pad: usize,
    },
    ConvDKernel {
        x: Tensor<T>,
        gy: Tensor<T>,
        stride: usize,
        pad: usize,
    },
}

impl<T: Elem> Op<T> {
    fn inputs(&self) -> Vec<&Tensor<T>> {
        match self {
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Matmul(a, b) => vec![a, b],
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Recip(a)
            | Op::Ln(a)
            | Op::Exp(a)
            | Op::Sqrt(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Clamp(a, _, _)
            | Op::SumAll(a)
            | Op::ScalarBcast(a)
            | Op::ChannelSum(a)
            | Op::ChannelBcast(a)
            | Op::SampleSum(a)
            | Op::SampleBcast(a)
            | Op::Transpose(a)
            | Op::Reshape(a) => vec![a],
            Op::Conv2d { x, k, .. } => vec![x, k],
            Op::ConvDInput { gy, k, .. } => vec![gy, k],
            Op::ConvDKernel { x, gy, .. } => vec![x, gy],
        }
    }

    /// Input cotangents for output cotangent `g`; `out` is the op's result.
    fn vjp(&self, out: &Tensor<T>, g: &Tensor<T>) -> Vec<(Tensor<T>, Tensor<T>)> {
        match self {
            Op::Add(a, b) => vec![(a.clone(), g.clone()), (b.clone(), g.clone())],
            Op::Sub(a, b) => vec![(a.clone(), g.clone()), (b.clone(), g.neg())],
            Op::Mul(a, b) => vec![(a.clone(), g.mul(b)), (b.clone(), g.mul(a))],
            Op::Neg(a) => vec![(a.clone(), g.neg())],
            Op::Scale(a, c) => vec![(a.clone(), g.scale(*c))],
            Op::AddScalar(a) => vec![(a.clone(), g.clone())],
            // d(1/a) = -out^2
            Op::Recip(a) => vec![(a.clone(), g.mul(&out.square()).neg())],
            Op::Ln(a) => vec![(a.clone(), g.mul(&a.recip()))],
            Op::Exp(a) => vec![(a.clone(), g.mul(out))],
            // d(sqrt a) = 1/(2 out)
            Op::Sqrt(a) => vec![(a.clone(), g.mul(&out.recip().scale(T::from_f64(0.5))))],
            Op::Tanh(a) => {
                let one_minus = out.square().neg().add_scalar(T::one());
                vec![(a.clone(), g.mul(&one_minus))]
            }
            Op::Sigmoid(a) => {
                let d = out.mul(&out.neg().add_scalar(T::one()));
                vec![(a.clone(), g.mul(&d))]
            }
            Op::Clamp(a, lo, hi) => {
                let mask: Vec<T> = a
                    .data()
                    .iter()
                    .map(|&v| {
                        if v < *lo || v > *hi {
                            T::zero()
                        } else {
                            T::one()
                        }
                    })
                    .collect();
                vec![(a.clone(), g.mul(&Tensor::from_vec(mask, a.shape())))]
            }
            Op::SumAll(a) => vec![(a.clone(), g.scalar_bcast(a.shape()))],
            Op::ScalarBcast(a) => vec![(a.clone(), g.sum_all())],
            Op::ChannelSum(a) => vec![(a.clone(), g.channel_bcast(a.shape()))],
            Op::ChannelBcast(a) => vec![(a.clone(), g.channel_sum())],
            Op::SampleSum(a) => vec![(a.clone(), g.sample_bcast(a.shape()))],
            Op::SampleBcast(a) => vec![(a.clone(), g.sample_sum())],
            Op::Matmul(a, b) => vec![
                (a.clone(), g.matmul(&b.t())),
                (b.clone(), a.t().matmul(g)),
            ],
            Op::Transpose(a) => vec![(a.clone(), g.t())],
            Op::Reshape(a) => vec![(a.clone(), g.reshape(a.shape()))],
            Op::Conv2d { x, k, stride, pad } => {
                let (h, w) = (x.shape()[2], x.shape()[3]);
                let (kh, kw) = (k.shape()[2], k.shape()[3]);
                vec![
                    (x.clone(), Tensor::conv_dinput_raw(g, k, *stride, *pad, h, w)),
                    (k.clone(), Tensor::conv_dkernel_raw(x, g, *stride, *pad, kh, kw)),
                ]
            }
            Op::ConvDInput { gy, k, stride, pad } => {
                let (kh, kw) = (k.shape()[2], k.shape()[3]);
                vec![
                    (gy.clone(), Tensor::conv2d_raw(g, k, *stride, *pad)),
                    (k.clone(), Tensor::conv_dkernel_raw(g, gy, *stride, *pad, kh, kw)),
                ]
            }
            Op::ConvDKernel { x, gy, stride, pad } => {
                let (h, w) = (x.shape()[2], x.shape()[3]);
                vec![
                    (x.clone(), Tensor::conv_dinput_raw(gy, g, *stride, *pad, h, w)),
                    (gy.clone(), Tensor::conv2d_raw(x, g, *stride, *pad)),
                ]
            }
        }
    }
}

/// Gradients keyed by the identity of the tensors they belong to.
pub struct GradMap<T: Elem> {
    by_id: HashMap<u64, Tensor<T>>,
}

impl<T: Elem> GradMap<T> {
    pub fn get(&self, t: &Tensor<T>) -> Option<&Tensor<T>> {
        self.by_id.get(&t.id())
    }
}

fn topo_order<T: Elem>(root: &Tensor<T>) -> Vec<Tensor<T>> {
    let mut order = Vec::new();
    let mut visited: HashSet<u64> = HashSet::new();
    // (tensor, children_expanded)
    let mut stack: Vec<(Tensor<T>, bool)> = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !visited.insert(t.id()) {
            continue;
        }
        let inputs: Vec<Tensor<T>> = match t.op() {
            Some(op) => op.inputs().into_iter().cloned().collect(),
            None => vec![],
        };
        stack.push((t, true));
        for inp in inputs {
            if inp.requires_grad() && !visited.contains(&inp.id()) {
                stack.push((inp, false));
            }
        }
    }
    order
}

/// Reverse-mode gradients of a scalar `loss` with respect to `wrt`.
///
/// Tensors in `wrt` that the loss does not reach get a zero gradient. With
/// `higher_order = true` the returned gradients stay attached to the graph
/// and can themselves be differentiated.
pub fn backward<T: Elem>(
    loss: &Tensor<T>,
    wrt: &[&Tensor<T>],
    higher_order: bool,
) -> Result<GradMap<T>> {
    if loss.numel() != 1 {
        return Err(Error::NonScalarLoss(loss.shape().to_vec()));
    }
    for t in wrt {
        if !t.requires_grad() {
            return Err(Error::NotGradEnabled);
        }
    }

    let order = topo_order(loss);
    let mut cot: HashMap<u64, Tensor<T>> = HashMap::new();
    cot.insert(loss.id(), Tensor::ones(loss.shape()));

    for node in order.iter().rev() {
        let g = match cot.get(&node.id()) {
            Some(g) => g.clone(),
            None => continue,
        };
        if let Some(op) = node.op() {
            for (input, grad) in op.vjp(node, &g) {
                if !input.requires_grad() {
                    continue;
                }
                match cot.remove(&input.id()) {
                    Some(acc) => {
                        cot.insert(input.id(), acc.add(&grad));
                    }
                    None => {
                        cot.insert(input.id(), grad);
                    }
                }
            }
        }
    }

    let mut by_id = HashMap::new();
    for t in wrt {
        let g = match cot.get(&t.id()) {
            Some(g) => {
                if higher_order {
                    g.clone()
                } else {
                    g.detach()
                }
            }
            None => Tensor::zeros(t.shape()),
        };
        by_id.insert(t.id(), g);
    }
    Ok(GradMap { by_id })
}
