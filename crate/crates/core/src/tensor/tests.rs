use super::*;
use crate::rng::{stream, StreamId};
use rand::Rng;

fn randn(rng: &mut crate::rng::Stream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
}

#[test]
fn conv2d_hand_example() {
    // input [[1,2],[3,4]], kernel [[1,0],[0,1]] -> [[5]]
    let x = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
    let k = Tensor::from_vec(vec![1.0, 0.0, 0.0, 1.0], &[1, 1, 2, 2]);
    let y = x.conv2d(&k, 1, Padding::Valid).unwrap();
    assert_eq!(y.shape(), &[1, 1, 1, 1]);
    assert_eq!(y.item(), 5.0);
}

#[test]
fn conv2d_half_padding_shape() {
    let x = Tensor::<f32>::zeros(&[1, 1, 128, 128]);
    let k = Tensor::<f32>::zeros(&[32, 1, 4, 4]);
    let y = x.conv2d(&k, 2, Padding::Half).unwrap();
    assert_eq!(y.shape(), &[1, 32, 64, 64]);
}

#[test]
fn conv2d_channel_mismatch_reports_shapes() {
    let x = Tensor::<f64>::zeros(&[1, 2, 8, 8]);
    let k = Tensor::<f64>::zeros(&[4, 3, 4, 4]);
    let err = x.conv2d(&k, 1, Padding::Valid).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[1, 2, 8, 8]") && msg.contains("[4, 3, 4, 4]"), "{msg}");
}

/// Brute-force quadruple-loop convolution, independent of the conv kernels.
fn conv_oracle(
    x: &[f64],
    (n, cin, h, w): (usize, usize, usize, usize),
    k: &[f64],
    (cout, kh, kw): (usize, usize, usize),
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * cout * oh * ow];
    for ni in 0..n {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let y = (oy * stride + ky) as isize - pad as isize;
                                let xx = (ox * stride + kx) as isize - pad as isize;
                                if y >= 0 && (y as usize) < h && xx >= 0 && (xx as usize) < w {
                                    acc += x[((ni * cin + ci) * h + y as usize) * w + xx as usize]
                                        * k[((co * cin + ci) * kh + ky) * kw + kx];
                                }
                            }
                        }
                    }
                    out[((ni * cout + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

#[test]
fn conv2d_matches_nested_loop_oracle() {
    let mut rng = stream(11, StreamId::Init);
    for &(stride, pad) in &[(1usize, 0usize), (2, 1), (1, 1)] {
        let x = randn(&mut rng, 2 * 3 * 8 * 8);
        let k = randn(&mut rng, 4 * 3 * 4 * 4);
        let xt = Tensor::from_vec(x.clone(), &[2, 3, 8, 8]);
        let kt = Tensor::from_vec(k.clone(), &[4, 3, 4, 4]);
        let y = Tensor::conv2d_raw(&xt, &kt, stride, pad);
        let expect = conv_oracle(&x, (2, 3, 8, 8), &k, (4, 4, 4), stride, pad);
        for (a, b) in y.data().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn conv2d_transpose_shape_and_zero() {
    let x = Tensor::<f32>::zeros(&[1, 512, 4, 4]);
    let k = Tensor::<f32>::zeros(&[512, 256, 4, 4]);
    let y = x.conv2d_transpose(&k, 2).unwrap();
    assert_eq!(y.shape(), &[1, 256, 8, 8]);
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn conv2d_transpose_adjoint_to_conv2d() {
    let mut rng = stream(12, StreamId::Init);
    let x = Tensor::var(randn(&mut rng, 2 * 2 * 8 * 8), &[2, 2, 8, 8]);
    let k = Tensor::from_vec(randn(&mut rng, 3 * 2 * 4 * 4), &[3, 2, 4, 4]);
    let y = Tensor::from_vec(randn(&mut rng, 2 * 3 * 4 * 4), &[2, 3, 4, 4]);
    // <conv(x,k), y> vs <x, conv_t(y,k)>
    let cx = x.conv2d(&k, 2, Padding::Half).unwrap();
    let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
    let ty = y.conv2d_transpose(&k, 2).unwrap();
    let rhs: f64 = x.data().iter().zip(ty.data()).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
}

#[test]
fn conv_then_transpose_restores_spatial_dims() {
    let x = Tensor::<f64>::zeros(&[1, 2, 16, 16]);
    let k = Tensor::<f64>::zeros(&[4, 2, 4, 4]);
    let y = x.conv2d(&k, 2, Padding::Half).unwrap();
    assert_eq!(&y.shape()[2..], &[8, 8]);
    let kt = Tensor::<f64>::zeros(&[4, 2, 4, 4]);
    let back = y.conv2d_transpose(&kt, 2).unwrap();
    assert_eq!(&back.shape()[2..], &[16, 16]);
}

#[test]
fn dense_examples() {
    let x = Tensor::from_vec(vec![1.0, 2.0], &[1, 2]);
    let w = Tensor::from_vec(vec![1.0, 1.0], &[2, 1]);
    let b = Tensor::from_vec(vec![0.0], &[1]);
    assert_eq!(x.dense(&w, &b).unwrap().item(), 3.0);

    // identity weight, zero bias
    let x = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
    let eye = Tensor::from_vec(
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        &[3, 3],
    );
    let y = x.dense(&eye, &Tensor::zeros(&[3])).unwrap();
    assert_eq!(y.data(), x.data());

    let bad = Tensor::<f64>::zeros(&[3, 5]).dense(&Tensor::zeros(&[4, 2]), &Tensor::zeros(&[2]));
    let msg = bad.unwrap_err().to_string();
    assert!(msg.contains("[3, 5]") && msg.contains("[4, 2]"), "{msg}");
}

#[test]
fn matmul_matches_naive_triple_loop() {
    let mut rng = stream(13, StreamId::Init);
    let a = randn(&mut rng, 15);
    let b = randn(&mut rng, 10);
    let at = Tensor::from_vec(a.clone(), &[3, 5]);
    let bt = Tensor::from_vec(b.clone(), &[5, 2]);
    let y = at.matmul(&bt);
    for i in 0..3 {
        for j in 0..2 {
            let mut acc = 0.0;
            for p in 0..5 {
                acc += a[i * 5 + p] * b[p * 2 + j];
            }
            assert!((y.data()[i * 2 + j] - acc).abs() < 1e-12);
        }
    }
}

#[test]
fn leaky_relu_values() {
    let x = Tensor::from_vec(vec![-1.0, 3.0, 0.0], &[3]);
    let y = x.leaky_relu(0.2);
    assert_eq!(y.data(), &[-0.2, 3.0, 0.0]);
    // subgradient at 0 is the slope
    let x0 = Tensor::var(vec![0.0], &[1]);
    let y0 = x0.leaky_relu(0.2).sum_all();
    let g = backward(&y0, &[&x0], false).unwrap();
    assert_eq!(g.get(&x0).unwrap().data(), &[0.2]);
}

#[test]
fn batch_norm_standardizes() {
    // constant input -> zeros
    let x = Tensor::from_vec(vec![5.0; 8], &[4, 2]);
    let mut st = RunningStats::new(2, 0.9);
    let y = batch_norm(
        &x,
        &Tensor::ones(&[2]),
        &Tensor::zeros(&[2]),
        1e-5,
        NormMode::Train,
        &mut st,
    )
    .unwrap();
    for &v in y.data() {
        assert!(v.abs() < 1e-6);
    }

    // x = {1,3} per channel -> {-1,+1} with eps = 0
    let x = Tensor::from_vec(vec![1.0, 3.0], &[2, 1]);
    let mut st = RunningStats::new(1, 0.9);
    let y = batch_norm(
        &x,
        &Tensor::ones(&[1]),
        &Tensor::zeros(&[1]),
        0.0,
        NormMode::Train,
        &mut st,
    )
    .unwrap();
    assert!((y.data()[0] + 1.0).abs() < 1e-12);
    assert!((y.data()[1] - 1.0).abs() < 1e-12);
}

#[test]
fn batch_norm_output_statistics() {
    let mut rng = stream(14, StreamId::Init);
    let shape = [8, 3, 5, 5];
    let x = Tensor::from_vec(randn(&mut rng, shape.iter().product()), &shape);
    let mut st = RunningStats::new(3, 0.9);
    let y = batch_norm(
        &x,
        &Tensor::ones(&[3]),
        &Tensor::zeros(&[3]),
        1e-12,
        NormMode::Train,
        &mut st,
    )
    .unwrap();
    // recompute per-channel stats from the output
    let m = (shape[0] * shape[2] * shape[3]) as f64;
    for c in 0..3 {
        let mut sum = 0.0;
        let mut sq = 0.0;
        for n in 0..shape[0] {
            for i in 0..25 {
                let v = y.data()[((n * 3 + c) * 25) + i];
                sum += v;
                sq += v * v;
            }
        }
        let mean = sum / m;
        let var = sq / m - mean * mean;
        assert!(mean.abs() < 1e-6, "channel {c} mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "channel {c} var {var}");
    }
}

#[test]
fn batch_norm_rejects_single_sample_batch() {
    let x = Tensor::<f64>::zeros(&[1, 2]);
    let mut st = RunningStats::new(2, 0.9);
    let err = batch_norm(
        &x,
        &Tensor::ones(&[2]),
        &Tensor::zeros(&[2]),
        1e-5,
        NormMode::Train,
        &mut st,
    );
    assert!(matches!(err, Err(crate::Error::BatchTooSmall(1))));
}

#[test]
fn dropout_contracts() {
    let mut rng = stream(15, StreamId::Dropout);
    let x = Tensor::from_vec(vec![1.0; 100], &[100]);
    // rate 0 and eval are identities
    assert_eq!(dropout(&x, 0.0, true, &mut rng).data(), x.data());
    assert_eq!(dropout(&x, 0.5, false, &mut rng).data(), x.data());

    // law of large numbers on survivors and mean
    let n = 100_000;
    let big = Tensor::from_vec(vec![1.0f64; n], &[n]);
    let y = dropout(&big, 0.5, true, &mut rng);
    let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
    assert!((survivors - 0.5).abs() < 0.01, "survivor fraction {survivors}");
    let mean = y.data().iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
}

#[test]
fn dropout_deterministic_under_seed() {
    let x = Tensor::from_vec(vec![1.0f64; 64], &[64]);
    let mut a = stream(99, StreamId::Dropout);
    let mut b = stream(99, StreamId::Dropout);
    let ya = dropout(&x, 0.3, true, &mut a);
    let yb = dropout(&x, 0.3, true, &mut b);
    assert_eq!(ya.data(), yb.data());
}

#[test]
fn backward_simple_cases() {
    // loss = sum x^2, x = [1,2] -> grad [2,4]
    let x = Tensor::var(vec![1.0, 2.0], &[2]);
    let loss = x.square().sum_all();
    let g = backward(&loss, &[&x], false).unwrap();
    assert_eq!(g.get(&x).unwrap().data(), &[2.0, 4.0]);

    // constant loss -> zero grads
    let c = Tensor::scalar(7.0);
    let loss = c.add_scalar(1.0);
    let g = backward(&loss, &[&x], false).unwrap();
    assert_eq!(g.get(&x).unwrap().data(), &[0.0, 0.0]);

    // non-scalar loss is an error
    assert!(backward(&x.square(), &[&x], false).is_err());

    // non-grad target is an error
    let frozen = Tensor::from_vec(vec![1.0], &[1]);
    assert!(matches!(
        backward(&loss, &[&frozen], false),
        Err(crate::Error::NotGradEnabled)
    ));
}

/// Central finite differences of `f` at `x`.
fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut buf = x.to_vec();
    for i in 0..x.len() {
        let orig = buf[i];
        buf[i] = orig + h;
        let fp = f(&buf);
        buf[i] = orig - h;
        let fm = f(&buf);
        buf[i] = orig;
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

#[test]
fn composed_network_grad_matches_finite_differences() {
    let mut rng = stream(16, StreamId::Init);
    let w1v = randn(&mut rng, 4 * 2 * 3 * 3);
    let w2v = randn(&mut rng, 18 * 4);
    let xv = randn(&mut rng, 2 * 2 * 6 * 6);

    let eval = |w1: &[f64], w2: &[f64]| -> f64 {
        let x = Tensor::from_vec(xv.clone(), &[2, 2, 6, 6]);
        let k = Tensor::from_vec(w1.to_vec(), &[4, 2, 3, 3]);
        let w = Tensor::from_vec(w2.to_vec(), &[18, 4]);
        let h = x
            .conv2d(&k, 2, Padding::Half)
            .unwrap()
            .leaky_relu(0.2)
            .reshape(&[2, 36])
            .tanh()
            .reshape(&[4, 18])
            .matmul(&w);
        h.square().mean_all().item()
    };

    let w1 = Tensor::var(w1v.clone(), &[4, 2, 3, 3]);
    let w2 = Tensor::var(w2v.clone(), &[18, 4]);
    let x = Tensor::from_vec(xv.clone(), &[2, 2, 6, 6]);
    let loss = x
        .conv2d(&w1, 2, Padding::Half)
        .unwrap()
        .leaky_relu(0.2)
        .reshape(&[2, 36])
        .tanh()
        .reshape(&[4, 18])
        .matmul(&w2)
        .square()
        .mean_all();
    let g = backward(&loss, &[&w1, &w2], false).unwrap();

    let fd1 = fd_grad(|w| eval(w, &w2v), &w1v, 1e-5);
    for (a, b) in g.get(&w1).unwrap().data().iter().zip(&fd1) {
        assert!((a - b).abs() / b.abs().max(1.0) < 1e-5, "{a} vs {b}");
    }
    let fd2 = fd_grad(|w| eval(&w1v, w), &w2v, 1e-5);
    for (a, b) in g.get(&w2).unwrap().data().iter().zip(&fd2) {
        assert!((a - b).abs() / b.abs().max(1.0) < 1e-5, "{a} vs {b}");
    }
}

#[test]
fn double_backprop_through_gradient_norm() {
    // g(w) = || d/dx (sum tanh(w*x)) ||^2; check dg/dw against finite differences
    let mut rng = stream(17, StreamId::Init);
    let wv = randn(&mut rng, 6);
    let xv = randn(&mut rng, 6);

    let g_of_w = |w: &[f64]| -> f64 {
        let wt = Tensor::var(w.to_vec(), &[6]);
        let xt = Tensor::var(xv.clone(), &[6]);
        let y = wt.mul(&xt).tanh().sum_all();
        let gx = backward(&y, &[&xt], true).unwrap();
        gx.get(&xt).unwrap().square().sum_all().item()
    };

    let wt = Tensor::var(wv.clone(), &[6]);
    let xt = Tensor::var(xv.clone(), &[6]);
    let y = wt.mul(&xt).tanh().sum_all();
    let gx = backward(&y, &[&xt], true).unwrap();
    let gnorm = gx.get(&xt).unwrap().square().sum_all();
    let gw = backward(&gnorm, &[&wt], false).unwrap();

    let fd = fd_grad(g_of_w, &wv, 1e-5);
    for (a, b) in gw.get(&wt).unwrap().data().iter().zip(&fd) {
        assert!((a - b).abs() / b.abs().max(1.0) < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn linearity_of_linear_ops() {
    let mut rng = stream(18, StreamId::Init);
    for _ in 0..5 {
        let a = randn(&mut rng, 2 * 2 * 6 * 6);
        let b = randn(&mut rng, 2 * 2 * 6 * 6);
        let k = Tensor::from_vec(randn(&mut rng, 3 * 2 * 4 * 4), &[3, 2, 4, 4]);
        let at = Tensor::from_vec(a.clone(), &[2, 2, 6, 6]);
        let bt = Tensor::from_vec(b.clone(), &[2, 2, 6, 6]);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let st = Tensor::from_vec(sum, &[2, 2, 6, 6]);

        let ya = at.conv2d(&k, 2, Padding::Half).unwrap();
        let yb = bt.conv2d(&k, 2, Padding::Half).unwrap();
        let ys = st.conv2d(&k, 2, Padding::Half).unwrap();
        for i in 0..ys.numel() {
            assert!((ys.data()[i] - ya.data()[i] - yb.data()[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn tensor_invariant_data_length() {
    let t = Tensor::<f32>::zeros(&[3, 4, 5]);
    assert_eq!(t.numel(), 60);
    assert_eq!(t.data().len(), t.shape().iter().product::<usize>());
}
