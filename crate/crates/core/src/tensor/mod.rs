//! N-dimensional tensors with reverse-mode automatic differentiation.
//!
//! Execution is eager: every op computes its value immediately and, when any
//! input is grad-enabled, records a graph node. Backward rules are expressed
//! in terms of these same ops, so gradients are themselves graph nodes and a
//! gradient computation can be differentiated again (double backprop).

mod autograd;
pub mod conv;
mod elem;

pub use autograd::{backward, GradMap};
pub use elem::{Dtype, Elem};

use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::rng::Stream;
use autograd::Op;
use rand::Rng;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

pub(crate) struct Inner<T: Elem> {
    id: u64,
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    op: Option<Op<T>>,
}

/// Handle to an immutable tensor value, cheap to clone.
pub struct Tensor<T: Elem>(Rc<Inner<T>>);

impl<T: Elem> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<T: Elem> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.0.id)
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    /// One pixel per side for 4x4 kernels: stride-2 exactly halves even dims.
    Half,
}

impl Padding {
    fn pixels(self, kernel: usize) -> usize {
        match self {
            Padding::Valid => 0,
            Padding::Half => (kernel - 1) / 2,
        }
    }
}

impl<T: Elem> Tensor<T> {
    fn build(data: Vec<T>, shape: Vec<usize>, requires_grad: bool, op: Option<Op<T>>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor(Rc::new(Inner {
            id: next_id(),
            shape,
            data,
            requires_grad,
            op,
        }))
    }

    fn node(data: Vec<T>, shape: Vec<usize>, op: Op<T>, any_grad: bool) -> Self {
        if any_grad {
            Tensor::build(data, shape, true, Some(op))
        } else {
            Tensor::build(data, shape, false, None)
        }
    }

    /// Constant tensor (not a differentiation target).
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor::build(data, shape.to_vec(), false, None)
    }

    /// Grad-enabled leaf.
    pub fn var(data: Vec<T>, shape: &[usize]) -> Self {
        assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor::build(data, shape.to_vec(), true, None)
    }

    pub fn scalar(v: T) -> Self {
        Tensor::build(vec![v], vec![], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::from_vec(vec![T::zero(); shape.iter().product()], shape)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Tensor::from_vec(vec![T::one(); shape.iter().product()], shape)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.0.data
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub(crate) fn op(&self) -> Option<&Op<T>> {
        self.0.op.as_ref()
    }

    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.0.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.0.data.iter().all(|v| v.is_finite())
    }

    /// Same values, cut loose from the graph.
    pub fn detach(&self) -> Self {
        Tensor::build(self.0.data.clone(), self.0.shape.clone(), false, None)
    }

    /// Same values as a fresh grad-enabled leaf.
    pub fn to_var(&self) -> Self {
        Tensor::build(self.0.data.clone(), self.0.shape.clone(), true, None)
    }

    // ----- elementwise -----

    fn zip(&self, o: &Self, f: impl Fn(T, T) -> T, ctx: &'static str) -> Vec<T> {
        assert_eq!(
            self.shape(),
            o.shape(),
            "{ctx}: shape {:?} vs {:?}",
            self.shape(),
            o.shape()
        );
        self.data()
            .iter()
            .zip(o.data())
            .map(|(&a, &b)| f(a, b))
            .collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        let data = self.zip(o, |a, b| a.add(b), "add");
        Tensor::node(
            data,
            self.0.shape.clone(),
            Op::Add(self.clone(), o.clone()),
            self.requires_grad() || o.requires_grad(),
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        let data = self.zip(o, |a, b| a.sub(b), "sub");
        Tensor::node(
            data,
            self.0.shape.clone(),
            Op::Sub(self.clone(), o.clone()),
            self.requires_grad() || o.requires_grad(),
        )
    }

    pub fn mul(&self, o: &Self) -> Self {
        let data = self.zip(o, |a, b| a.mul(b), "mul");
        Tensor::node(
            data,
            self.0.shape.clone(),
            Op::Mul(self.clone(), o.clone()),
            self.requires_grad() || o.requires_grad(),
        )
    }

    fn unary(&self, f: impl Fn(T) -> T, op: Op<T>) -> Self {
        let data = self.data().iter().map(|&v| f(v)).collect();
        Tensor::node(data, self.0.shape.clone(), op, self.requires_grad())
    }

    pub fn neg(&self) -> Self {
        self.unary(|v| v.neg(), Op::Neg(self.clone()))
    }

    pub fn scale(&self, c: T) -> Self {
        self.unary(|v| v.mul(c), Op::Scale(self.clone(), c))
    }

    pub fn add_scalar(&self, c: T) -> Self {
        self.unary(|v| v.add(c), Op::AddScalar(self.clone()))
    }

    pub fn recip(&self) -> Self {
        self.unary(|v| T::one().div(v), Op::Recip(self.clone()))
    }

    pub fn ln(&self) -> Self {
        self.unary(|v| v.ln(), Op::Ln(self.clone()))
    }

    pub fn exp(&self) -> Self {
        self.unary(|v| v.exp(), Op::Exp(self.clone()))
    }

    pub fn sqrt(&self) -> Self {
        self.unary(|v| v.sqrt(), Op::Sqrt(self.clone()))
    }

    pub fn tanh(&self) -> Self {
        self.unary(|v| v.tanh(), Op::Tanh(self.clone()))
    }

    pub fn sigmoid(&self) -> Self {
        self.unary(
            |v| T::one().div(T::one().add(v.neg().exp())),
            Op::Sigmoid(self.clone()),
        )
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// Elementwise max(x, slope*x); subgradient at exactly 0 is `slope`.
    pub fn leaky_relu(&self, slope: T) -> Self {
        assert!(
            slope >= T::zero() && slope < T::one(),
            "leaky_relu slope must be in [0,1)"
        );
        let mask: Vec<T> = self
            .data()
            .iter()
            .map(|&v| if v > T::zero() { T::one() } else { slope })
            .collect();
        self.mul(&Tensor::from_vec(mask, self.shape()))
    }

    /// Clamp with zero gradient outside [lo, hi].
    pub fn clamp(&self, lo: T, hi: T) -> Self {
        let data = self
            .data()
            .iter()
            .map(|&v| {
                if v < lo {
                    lo
                } else if v > hi {
                    hi
                } else {
                    v
                }
            })
            .collect();
        Tensor::node(
            data,
            self.0.shape.clone(),
            Op::Clamp(self.clone(), lo, hi),
            self.requires_grad(),
        )
    }

    // ----- reductions and broadcasts -----

    pub fn sum_all(&self) -> Self {
        let mut acc = T::zero();
        for &v in self.data() {
            acc += v;
        }
        Tensor::node(vec![acc], vec![], Op::SumAll(self.clone()), self.requires_grad())
    }

    pub fn mean_all(&self) -> Self {
        let n = self.numel();
        self.sum_all().scale(T::from_f64(1.0 / n as f64))
    }

    /// Broadcast a scalar to `shape`.
    pub fn scalar_bcast(&self, shape: &[usize]) -> Self {
        assert_eq!(self.numel(), 1, "scalar_bcast on non-scalar");
        let v = self.0.data[0];
        Tensor::node(
            vec![v; shape.iter().product()],
            shape.to_vec(),
            Op::ScalarBcast(self.clone()),
            self.requires_grad(),
        )
    }

    /// [N, C, ...] -> [C]: sum over batch and trailing axes.
    pub fn channel_sum(&self) -> Self {
        assert!(self.shape().len() >= 2, "channel_sum needs rank >= 2");
        let n = self.shape()[0];
        let c = self.shape()[1];
        let inner: usize = self.shape()[2..].iter().product();
        let mut out = vec![T::zero(); c];
        let data = self.data();
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * inner;
                let mut acc = T::zero();
                for i in 0..inner {
                    acc += data[base + i];
                }
                out[ci] += acc;
            }
        }
        Tensor::node(out, vec![c], Op::ChannelSum(self.clone()), self.requires_grad())
    }

    /// [C] -> [N, C, ...]: replicate along batch and trailing axes.
    pub fn channel_bcast(&self, shape: &[usize]) -> Self {
        assert!(shape.len() >= 2 && shape[1] == self.numel());
        let n = shape[0];
        let c = shape[1];
        let inner: usize = shape[2..].iter().product();
        let mut out = Vec::with_capacity(n * c * inner);
        for _ in 0..n {
            for ci in 0..c {
                let v = self.0.data[ci];
                out.extend(std::iter::repeat(v).take(inner));
            }
        }
        Tensor::node(
            out,
            shape.to_vec(),
            Op::ChannelBcast(self.clone()),
            self.requires_grad(),
        )
    }

    /// [N, ...] -> [N]: sum per sample over trailing axes.
    pub fn sample_sum(&self) -> Self {
        assert!(!self.shape().is_empty(), "sample_sum needs rank >= 1");
        let n = self.shape()[0];
        let inner: usize = self.shape()[1..].iter().product();
        let data = self.data();
        let mut out = Vec::with_capacity(n);
        for ni in 0..n {
            let mut acc = T::zero();
            for i in 0..inner {
                acc += data[ni * inner + i];
            }
            out.push(acc);
        }
        Tensor::node(out, vec![n], Op::SampleSum(self.clone()), self.requires_grad())
    }

    /// [N] -> [N, ...]: replicate per sample over trailing axes.
    pub fn sample_bcast(&self, shape: &[usize]) -> Self {
        assert!(!shape.is_empty() && shape[0] == self.numel());
        let inner: usize = shape[1..].iter().product();
        let mut out = Vec::with_capacity(shape.iter().product());
        for &v in self.data() {
            out.extend(std::iter::repeat(v).take(inner));
        }
        Tensor::node(
            out,
            shape.to_vec(),
            Op::SampleBcast(self.clone()),
            self.requires_grad(),
        )
    }

    // ----- linear algebra -----

    pub fn matmul(&self, o: &Self) -> Self {
        assert_eq!(self.shape().len(), 2, "matmul lhs must be 2-D");
        assert_eq!(o.shape().len(), 2, "matmul rhs must be 2-D");
        let (m, k) = (self.shape()[0], self.shape()[1]);
        let (k2, n) = (o.shape()[0], o.shape()[1]);
        assert_eq!(k, k2, "matmul inner dims: {:?} vs {:?}", self.shape(), o.shape());
        let a = self.data();
        let b = o.data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for p in 0..k {
                let av = a[i * k + p];
                let brow = &b[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += av.mul(brow[j]);
                }
            }
        }
        Tensor::node(
            out,
            vec![m, n],
            Op::Matmul(self.clone(), o.clone()),
            self.requires_grad() || o.requires_grad(),
        )
    }

    pub fn t(&self) -> Self {
        assert_eq!(self.shape().len(), 2, "transpose needs rank 2");
        let (m, n) = (self.shape()[0], self.shape()[1]);
        let data = self.data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = data[i * n + j];
            }
        }
        Tensor::node(out, vec![n, m], Op::Transpose(self.clone()), self.requires_grad())
    }

    pub fn reshape(&self, shape: &[usize]) -> Self {
        assert_eq!(
            self.numel(),
            shape.iter().product::<usize>(),
            "reshape {:?} -> {:?}",
            self.shape(),
            shape
        );
        Tensor::node(
            self.0.data.clone(),
            shape.to_vec(),
            Op::Reshape(self.clone()),
            self.requires_grad(),
        )
    }

    // ----- convolution -----

    fn shape4(&self, ctx: &'static str) -> Result<[usize; 4]> {
        if self.shape().len() != 4 {
            return Err(Error::Shape {
                context: ctx,
                lhs: self.shape().to_vec(),
                rhs: vec![],
            });
        }
        Ok([
            self.shape()[0],
            self.shape()[1],
            self.shape()[2],
            self.shape()[3],
        ])
    }

    /// 2-D convolution; kernel layout [C_out, C_in, kH, kW].
    pub fn conv2d(&self, kernel: &Self, stride: usize, padding: Padding) -> Result<Self> {
        let xs = self.shape4("conv2d input")?;
        let ks = kernel.shape4("conv2d kernel")?;
        if xs[1] != ks[1] {
            return Err(Error::Shape {
                context: "conv2d channels",
                lhs: xs.to_vec(),
                rhs: ks.to_vec(),
            });
        }
        assert!(stride >= 1, "conv2d stride must be >= 1");
        let pad = padding.pixels(ks[2]);
        if xs[2] + 2 * pad < ks[2] || xs[3] + 2 * pad < ks[3] {
            return Err(Error::Shape {
                context: "conv2d kernel larger than padded input",
                lhs: xs.to_vec(),
                rhs: ks.to_vec(),
            });
        }
        Ok(Self::conv2d_raw(self, kernel, stride, pad))
    }

    pub(crate) fn conv2d_raw(x: &Self, k: &Self, stride: usize, pad: usize) -> Self {
        let xs = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let ks = [k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]];
        let (data, os) = conv::forward(x.data(), xs, k.data(), ks, stride, pad);
        Tensor::node(
            data,
            os.to_vec(),
            Op::Conv2d {
                x: x.clone(),
                k: k.clone(),
                stride,
                pad,
            },
            x.requires_grad() || k.requires_grad(),
        )
    }

    pub(crate) fn conv_dinput_raw(gy: &Self, k: &Self, stride: usize, pad: usize, h: usize, w: usize) -> Self {
        let gys = [gy.shape()[0], gy.shape()[1], gy.shape()[2], gy.shape()[3]];
        let ks = [k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]];
        let (data, os) = conv::dinput(gy.data(), gys, k.data(), ks, stride, pad, h, w);
        Tensor::node(
            data,
            os.to_vec(),
            Op::ConvDInput {
                gy: gy.clone(),
                k: k.clone(),
                stride,
                pad,
            },
            gy.requires_grad() || k.requires_grad(),
        )
    }

    pub(crate) fn conv_dkernel_raw(x: &Self, gy: &Self, stride: usize, pad: usize, kh: usize, kw: usize) -> Self {
        let xs = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let gys = [gy.shape()[0], gy.shape()[1], gy.shape()[2], gy.shape()[3]];
        let (data, os) = conv::dkernel(x.data(), xs, gy.data(), gys, stride, pad, kh, kw);
        Tensor::node(
            data,
            os.to_vec(),
            Op::ConvDKernel {
                x: x.clone(),
                gy: gy.clone(),
                stride,
                pad,
            },
            x.requires_grad() || gy.requires_grad(),
        )
    }

    /// Transposed convolution; kernel layout [C_in, C_out, kH, kW].
    /// Output spatial dims are exactly input * stride.
    pub fn conv2d_transpose(&self, kernel: &Self, stride: usize) -> Result<Self> {
        let xs = self.shape4("conv2d_transpose input")?;
        let ks = kernel.shape4("conv2d_transpose kernel")?;
        if xs[1] != ks[0] {
            return Err(Error::Shape {
                context: "conv2d_transpose channels",
                lhs: xs.to_vec(),
                rhs: ks.to_vec(),
            });
        }
        let pad = (ks[2] - 1) / 2;
        Ok(Self::conv_dinput_raw(
            self,
            kernel,
            stride,
            pad,
            xs[2] * stride,
            xs[3] * stride,
        ))
    }

    /// out[n,g] = sum_f in[n,f] * w[f,g] + b[g]
    pub fn dense(&self, weight: &Self, bias: &Self) -> Result<Self> {
        if self.shape().len() != 2
            || weight.shape().len() != 2
            || self.shape()[1] != weight.shape()[0]
        {
            return Err(Error::Shape {
                context: "dense",
                lhs: self.shape().to_vec(),
                rhs: weight.shape().to_vec(),
            });
        }
        if bias.shape() != [weight.shape()[1]] {
            return Err(Error::Shape {
                context: "dense bias",
                lhs: bias.shape().to_vec(),
                rhs: vec![weight.shape()[1]],
            });
        }
        let y = self.matmul(weight);
        let shape = y.shape().to_vec();
        Ok(y.add(&bias.channel_bcast(&shape)))
    }
}

// ----- batch norm -----

#[derive(Debug, Clone)]
pub struct RunningStats<T: Elem> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub momentum: T,
}

impl<T: Elem> RunningStats<T> {
    pub fn new(channels: usize, momentum: T) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            momentum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Train,
    Eval,
}

/// Per-channel batch normalization over batch + spatial axes.
/// Biased variance estimator in train mode; running stats updated in place.
pub fn batch_norm<T: Elem>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
    mode: NormMode,
    stats: &mut RunningStats<T>,
) -> Result<Tensor<T>> {
    let shape = x.shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::Shape {
            context: "batch_norm",
            lhs: shape,
            rhs: vec![],
        });
    }
    let c = shape[1];
    if gamma.numel() != c || beta.numel() != c || stats.mean.len() != c {
        return Err(Error::Shape {
            context: "batch_norm params",
            lhs: vec![c],
            rhs: vec![gamma.numel(), beta.numel()],
        });
    }
    match mode {
        NormMode::Train => {
            let n = shape[0];
            if n < 2 {
                return Err(Error::BatchTooSmall(n));
            }
            let m = T::from_f64((x.numel() / c) as f64);
            let inv_m = T::one().div(m);
            let mean = x.channel_sum().scale(inv_m);
            let centered = x.sub(&mean.channel_bcast(&shape));
            let var = centered.square().channel_sum().scale(inv_m);

            let mom = stats.momentum;
            let rem = T::one().sub(mom);
            for i in 0..c {
                stats.mean[i] = stats.mean[i].mul(mom).add(mean.data()[i].mul(rem));
                stats.var[i] = stats.var[i].mul(mom).add(var.data()[i].mul(rem));
            }

            let inv_std = var.add_scalar(eps).sqrt().recip();
            Ok(centered
                .mul(&inv_std.channel_bcast(&shape))
                .mul(&gamma.channel_bcast(&shape))
                .add(&beta.channel_bcast(&shape)))
        }
        NormMode::Eval => {
            let mean = Tensor::from_vec(stats.mean.clone(), &[c]);
            let inv_std = Tensor::from_vec(stats.var.clone(), &[c])
                .add_scalar(eps)
                .sqrt()
                .recip();
            Ok(x.sub(&mean.channel_bcast(&shape))
                .mul(&inv_std.channel_bcast(&shape))
                .mul(&gamma.channel_bcast(&shape))
                .add(&beta.channel_bcast(&shape)))
        }
    }
}

/// Per-sample normalization over all non-batch axes, with per-channel affine.
pub fn layer_norm<T: Elem>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>> {
    let shape = x.shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::Shape {
            context: "layer_norm",
            lhs: shape,
            rhs: vec![],
        });
    }
    let n = shape[0];
    let m = T::from_f64((x.numel() / n) as f64);
    let inv_m = T::one().div(m);
    let mean = x.sample_sum().scale(inv_m);
    let centered = x.sub(&mean.sample_bcast(&shape));
    let var = centered.square().sample_sum().scale(inv_m);
    let inv_std = var.add_scalar(eps).sqrt().recip();
    Ok(centered
        .mul(&inv_std.sample_bcast(&shape))
        .mul(&gamma.channel_bcast(&shape))
        .add(&beta.channel_bcast(&shape)))
}

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// 1/(1-rate) in training mode; identity in eval mode.
pub fn dropout<T: Elem>(x: &Tensor<T>, rate: f64, training: bool, rng: &mut Stream) -> Tensor<T> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
    if !training || rate == 0.0 {
        return x.clone();
    }
    let keep_scale = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.numel())
        .map(|_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep_scale
            }
        })
        .collect();
    x.mul(&Tensor::from_vec(mask, x.shape()))
}

#[cfg(test)]
mod tests;
