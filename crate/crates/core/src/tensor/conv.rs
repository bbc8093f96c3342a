//! Raw convolution kernels on flat row-major buffers.
//!
//! Three maps cover forward and both adjoints; the set is closed under
//! differentiation, which is what lets conv layers participate in double
//! backprop. Summation order is fixed so outputs are bit-reproducible.

use super::elem::Elem;

#[inline]
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// y[n,co,oy,ox] = sum_{ci,ky,kx} x[n,ci,oy*s+ky-p,ox*s+kx-p] * k[co,ci,ky,kx]
pub fn forward<T: Elem>(
    x: &[T],
    xs: [usize; 4],
    k: &[T],
    ks: [usize; 4],
    stride: usize,
    pad: usize,
) -> (Vec<T>, [usize; 4]) {
    let [n, cin, h, w] = xs;
    let [cout, kcin, kh, kw] = ks;
    debug_assert_eq!(cin, kcin);
    let oh = conv_out_dim(h, kh, stride, pad);
    let ow = conv_out_dim(w, kw, stride, pad);
    let mut out = vec![T::zero(); n * cout * oh * ow];

    for ni in 0..n {
        for co in 0..cout {
            let out_plane = (ni * cout + co) * oh * ow;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = T::zero();
                    for ci in 0..cin {
                        let x_plane = (ni * cin + ci) * h * w;
                        let k_plane = (co * cin + ci) * kh * kw;
                        for ky in 0..kh {
                            let y = (oy * stride + ky) as isize - pad as isize;
                            if y < 0 || y >= h as isize {
                                continue;
                            }
                            let x_row = x_plane + y as usize * w;
                            let k_row = k_plane + ky * kw;
                            for kx in 0..kw {
                                let xx = (ox * stride + kx) as isize - pad as isize;
                                if xx < 0 || xx >= w as isize {
                                    continue;
                                }
                                acc += x[x_row + xx as usize].mul(k[k_row + kx]);
                            }
                        }
                    }
                    out[out_plane + oy * ow + ox] = acc;
                }
            }
        }
    }
    (out, [n, cout, oh, ow])
}

/// Adjoint of `forward` in its first argument: maps an output-shaped
/// cotangent back to input shape. Also serves as the transposed convolution.
pub fn dinput<T: Elem>(
    gy: &[T],
    gys: [usize; 4],
    k: &[T],
    ks: [usize; 4],
    stride: usize,
    pad: usize,
    h: usize,
    w: usize,
) -> (Vec<T>, [usize; 4]) {
    let [n, cout, oh, ow] = gys;
    let [kcout, cin, kh, kw] = ks;
    debug_assert_eq!(cout, kcout);
    let mut out = vec![T::zero(); n * cin * h * w];

    for ni in 0..n {
        for ci in 0..cin {
            let out_plane = (ni * cin + ci) * h * w;
            for y in 0..h {
                for x in 0..w {
                    let mut acc = T::zero();
                    for ky in 0..kh {
                        let ty = y as isize + pad as isize - ky as isize;
                        if ty < 0 || ty % stride as isize != 0 {
                            continue;
                        }
                        let oy = (ty / stride as isize) as usize;
                        if oy >= oh {
                            continue;
                        }
                        for kx in 0..kw {
                            let tx = x as isize + pad as isize - kx as isize;
                            if tx < 0 || tx % stride as isize != 0 {
                                continue;
                            }
                            let ox = (tx / stride as isize) as usize;
                            if ox >= ow {
                                continue;
                            }
                            for co in 0..cout {
                                let g = gy[((ni * cout + co) * oh + oy) * ow + ox];
                                let kk = k[((co * cin + ci) * kh + ky) * kw + kx];
                                acc += g.mul(kk);
                            }
                        }
                    }
                    out[out_plane + y * w + x] = acc;
                }
            }
        }
    }
    (out, [n, cin, h, w])
}

/// Adjoint of `forward` in the kernel argument.
pub fn dkernel<T: Elem>(
    x: &[T],
    xs: [usize; 4],
    gy: &[T],
    gys: [usize; 4],
    stride: usize,
    pad: usize,
    kh: usize,
    kw: usize,
) -> (Vec<T>, [usize; 4]) {
    let [n, cin, h, w] = xs;
    let [gn, cout, oh, ow] = gys;
    debug_assert_eq!(n, gn);
    let mut out = vec![T::zero(); cout * cin * kh * kw];

    for co in 0..cout {
        for ci in 0..cin {
            let k_plane = (co * cin + ci) * kh * kw;
            for ky in 0..kh {
                for kx in 0..kw {
                    let mut acc = T::zero();
                    for ni in 0..n {
                        let x_plane = (ni * cin + ci) * h * w;
                        let g_plane = (ni * cout + co) * oh * ow;
                        for oy in 0..oh {
                            let y = (oy * stride + ky) as isize - pad as isize;
                            if y < 0 || y >= h as isize {
                                continue;
                            }
                            let x_row = x_plane + y as usize * w;
                            for ox in 0..ow {
                                let xx = (ox * stride + kx) as isize - pad as isize;
                                if xx < 0 || xx >= w as isize {
                                    continue;
                                }
                                acc += x[x_row + xx as usize].mul(gy[g_plane + oy * ow + ox]);
                            }
                        }
                    }
                    out[k_plane + ky * kw + kx] = acc;
                }
            }
        }
    }
    (out, [cout, cin, kh, kw])
}
