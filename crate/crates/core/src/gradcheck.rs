//! Central finite-difference verification of every differentiable op,
//! runnable both as a test and from the command line.

use rand::Rng;

use crate::rng::Stream;
use crate::tensor::{backward, batch_norm, dropout, layer_norm, NormMode, Padding, RunningStats, Tensor};

pub const REL_TOL: f64 = 1e-5;
const H: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct OpReport {
    pub op: &'static str,
    pub cases: usize,
    pub max_rel_err: f64,
}

impl OpReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < REL_TOL
    }
}

/// |autodiff - fd| / max(1, |fd|), elementwise max over all inputs.
fn check_case(
    inputs: &[(&str, Vec<f64>, Vec<usize>)],
    f: &dyn Fn(&[Tensor<f64>]) -> Tensor<f64>,
) -> f64 {
    let vars: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|(_, d, s)| Tensor::var(d.clone(), s))
        .collect();
    let loss = f(&vars);
    assert!(loss.shape().is_empty(), "check target must be scalar");
    let refs: Vec<&Tensor<f64>> = vars.iter().collect();
    let grads = backward(&loss, &refs, false).expect("backward");

    let mut worst = 0.0f64;
    for (vi, (_, data, _shape)) in inputs.iter().enumerate() {
        let g = grads.get(&vars[vi]).expect("grad present");
        for i in 0..data.len() {
            let eval = |delta: f64| {
                let rebuilt: Vec<Tensor<f64>> = inputs
                    .iter()
                    .enumerate()
                    .map(|(vj, (_, d, s))| {
                        let mut d = d.clone();
                        if vj == vi {
                            d[i] += delta;
                        }
                        Tensor::from_vec(d, s)
                    })
                    .collect();
                f(&rebuilt).item()
            };
            let fd = (eval(H) - eval(-H)) / (2.0 * H);
            let rel = (g.data()[i] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}

fn uniform(rng: &mut Stream, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Uniform in [lo, hi] excluding a margin around the given kink points, so
/// finite differences never straddle a non-smooth point.
fn away_from(rng: &mut Stream, n: usize, lo: f64, hi: f64, kinks: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let v = rng.gen_range(lo..hi);
            if kinks.iter().all(|k| (v - k).abs() > 0.05) {
                break v;
            }
        })
        .collect()
}

/// Fold any output to a scalar through a fixed random-looking projection,
/// so gradients are exercised at every output coordinate.
fn project(t: &Tensor<f64>) -> Tensor<f64> {
    let n = t.numel();
    let w: Vec<f64> = (0..n).map(|i| ((i * 2654435761 + 1) % 97) as f64 / 97.0 - 0.5).collect();
    t.reshape(&[n]).mul(&Tensor::from_vec(w, &[n])).sum_all()
}

struct OpCheck {
    op: &'static str,
    run: Box<dyn Fn(&mut Stream) -> f64>,
}

fn elementwise(
    op: &'static str,
    lo: f64,
    hi: f64,
    kinks: &'static [f64],
    f: &'static (dyn Fn(&Tensor<f64>) -> Tensor<f64> + Sync),
) -> OpCheck {
    OpCheck {
        op,
        run: Box::new(move |rng| {
            let n = rng.gen_range(3..12);
            let data = away_from(rng, n, lo, hi, kinks);
            check_case(&[("x", data, vec![n])], &|v| project(&f(&v[0])))
        }),
    }
}

fn all_checks() -> Vec<OpCheck> {
    let mut checks = vec![
        OpCheck {
            op: "add",
            run: Box::new(|rng| {
                let n = rng.gen_range(2..10);
                let a = uniform(rng, n, -2.0, 2.0);
                let b = uniform(rng, n, -2.0, 2.0);
                check_case(&[("a", a, vec![n]), ("b", b, vec![n])], &|v| {
                    project(&v[0].add(&v[1]))
                })
            }),
        },
        OpCheck {
            op: "sub",
            run: Box::new(|rng| {
                let n = rng.gen_range(2..10);
                let a = uniform(rng, n, -2.0, 2.0);
                let b = uniform(rng, n, -2.0, 2.0);
                check_case(&[("a", a, vec![n]), ("b", b, vec![n])], &|v| {
                    project(&v[0].sub(&v[1]))
                })
            }),
        },
        OpCheck {
            op: "mul",
            run: Box::new(|rng| {
                let n = rng.gen_range(2..10);
                let a = uniform(rng, n, -2.0, 2.0);
                let b = uniform(rng, n, -2.0, 2.0);
                check_case(&[("a", a, vec![n]), ("b", b, vec![n])], &|v| {
                    project(&v[0].mul(&v[1]))
                })
            }),
        },
        elementwise("neg", -2.0, 2.0, &[], &|x| x.neg()),
        elementwise("scale", -2.0, 2.0, &[], &|x| x.scale(1.7)),
        elementwise("add_scalar", -2.0, 2.0, &[], &|x| x.add_scalar(0.3)),
        elementwise("recip", 0.4, 2.0, &[], &|x| x.recip()),
        elementwise("ln", 0.3, 3.0, &[], &|x| x.ln()),
        elementwise("exp", -2.0, 2.0, &[], &|x| x.exp()),
        elementwise("sqrt", 0.2, 3.0, &[], &|x| x.sqrt()),
        elementwise("tanh", -2.0, 2.0, &[], &|x| x.tanh()),
        elementwise("sigmoid", -3.0, 3.0, &[], &|x| x.sigmoid()),
        elementwise("square", -2.0, 2.0, &[], &|x| x.square()),
        elementwise("leaky_relu", -2.0, 2.0, &[0.0], &|x| x.leaky_relu(0.2)),
        elementwise("clamp", -2.0, 2.0, &[-1.0, 1.0], &|x| x.clamp(-1.0, 1.0)),
        elementwise("sum_all", -2.0, 2.0, &[], &|x| x.sum_all()),
        elementwise("mean_all", -2.0, 2.0, &[], &|x| x.mean_all()),
        OpCheck {
            op: "scalar_bcast",
            run: Box::new(|rng| {
                let x = uniform(rng, 1, -2.0, 2.0);
                check_case(&[("x", x, vec![])], &|v| {
                    project(&v[0].scalar_bcast(&[2, 3]))
                })
            }),
        },
        OpCheck {
            op: "channel_sum",
            run: Box::new(|rng| {
                let x = uniform(rng, 2 * 3 * 4, -2.0, 2.0);
                check_case(&[("x", x, vec![2, 3, 2, 2])], &|v| {
                    project(&v[0].channel_sum())
                })
            }),
        },
        OpCheck {
            op: "channel_bcast",
            run: Box::new(|rng| {
                let x = uniform(rng, 3, -2.0, 2.0);
                check_case(&[("x", x, vec![3])], &|v| {
                    project(&v[0].channel_bcast(&[2, 3, 2, 2]))
                })
            }),
        },
        OpCheck {
            op: "sample_sum",
            run: Box::new(|rng| {
                let x = uniform(rng, 3 * 4, -2.0, 2.0);
                check_case(&[("x", x, vec![3, 4])], &|v| project(&v[0].sample_sum()))
            }),
        },
        OpCheck {
            op: "sample_bcast",
            run: Box::new(|rng| {
                let x = uniform(rng, 3, -2.0, 2.0);
                check_case(&[("x", x, vec![3])], &|v| {
                    project(&v[0].sample_bcast(&[3, 4]))
                })
            }),
        },
        OpCheck {
            op: "matmul",
            run: Box::new(|rng| {
                let (m, k, n) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4));
                let a = uniform(rng, m * k, -2.0, 2.0);
                let b = uniform(rng, k * n, -2.0, 2.0);
                check_case(&[("a", a, vec![m, k]), ("b", b, vec![k, n])], &|v| {
                    project(&v[0].matmul(&v[1]))
                })
            }),
        },
        OpCheck {
            op: "transpose",
            run: Box::new(|rng| {
                let x = uniform(rng, 6, -2.0, 2.0);
                check_case(&[("x", x, vec![2, 3])], &|v| project(&v[0].t()))
            }),
        },
        OpCheck {
            op: "reshape",
            run: Box::new(|rng| {
                let x = uniform(rng, 12, -2.0, 2.0);
                check_case(&[("x", x, vec![3, 4])], &|v| {
                    project(&v[0].reshape(&[2, 6]))
                })
            }),
        },
        OpCheck {
            op: "conv2d",
            run: Box::new(|rng| {
                let stride = rng.gen_range(1..3);
                let x = uniform(rng, 2 * 2 * 6 * 6, -1.0, 1.0);
                let k = uniform(rng, 3 * 2 * 3 * 3, -1.0, 1.0);
                check_case(
                    &[("x", x, vec![2, 2, 6, 6]), ("k", k, vec![3, 2, 3, 3])],
                    &move |v| project(&v[0].conv2d(&v[1], stride, Padding::Valid).unwrap()),
                )
            }),
        },
        OpCheck {
            op: "conv2d_half_pad",
            run: Box::new(|rng| {
                let x = uniform(rng, 2 * 4 * 4, -1.0, 1.0);
                let k = uniform(rng, 2 * 2 * 4 * 4, -1.0, 1.0);
                check_case(
                    &[("x", x, vec![1, 2, 4, 4]), ("k", k, vec![2, 2, 4, 4])],
                    &|v| project(&v[0].conv2d(&v[1], 2, Padding::Half).unwrap()),
                )
            }),
        },
        OpCheck {
            op: "conv2d_transpose",
            run: Box::new(|rng| {
                let x = uniform(rng, 2 * 3 * 3, -1.0, 1.0);
                let k = uniform(rng, 2 * 3 * 4 * 4, -1.0, 1.0);
                check_case(
                    &[("x", x, vec![1, 2, 3, 3]), ("k", k, vec![2, 3, 4, 4])],
                    &|v| project(&v[0].conv2d_transpose(&v[1], 2).unwrap()),
                )
            }),
        },
        OpCheck {
            op: "dense",
            run: Box::new(|rng| {
                let x = uniform(rng, 2 * 3, -2.0, 2.0);
                let w = uniform(rng, 3 * 4, -2.0, 2.0);
                let b = uniform(rng, 4, -2.0, 2.0);
                check_case(
                    &[
                        ("x", x, vec![2, 3]),
                        ("w", w, vec![3, 4]),
                        ("b", b, vec![4]),
                    ],
                    &|v| project(&v[0].dense(&v[1], &v[2]).unwrap()),
                )
            }),
        },
        OpCheck {
            op: "batch_norm",
            run: Box::new(|rng| {
                let x = uniform(rng, 4 * 2 * 2 * 2, -2.0, 2.0);
                let g = uniform(rng, 2, 0.5, 1.5);
                let b = uniform(rng, 2, -0.5, 0.5);
                check_case(
                    &[
                        ("x", x, vec![4, 2, 2, 2]),
                        ("gamma", g, vec![2]),
                        ("beta", b, vec![2]),
                    ],
                    &|v| {
                        let mut stats = RunningStats::new(2, 0.9);
                        project(
                            &batch_norm(&v[0], &v[1], &v[2], 1e-5, NormMode::Train, &mut stats)
                                .unwrap(),
                        )
                    },
                )
            }),
        },
        OpCheck {
            op: "layer_norm",
            run: Box::new(|rng| {
                let x = uniform(rng, 3 * 2 * 2 * 2, -2.0, 2.0);
                let g = uniform(rng, 2, 0.5, 1.5);
                let b = uniform(rng, 2, -0.5, 0.5);
                check_case(
                    &[
                        ("x", x, vec![3, 2, 2, 2]),
                        ("gamma", g, vec![2]),
                        ("beta", b, vec![2]),
                    ],
                    &|v| project(&layer_norm(&v[0], &v[1], &v[2], 1e-5).unwrap()),
                )
            }),
        },
        OpCheck {
            op: "dropout",
            run: Box::new(|rng| {
                use rand::SeedableRng;
                let n = rng.gen_range(4..12);
                let x = uniform(rng, n, -2.0, 2.0);
                let mask_seed: u64 = rng.gen();
                check_case(&[("x", x, vec![n])], &move |v| {
                    // fixed seed: the same mask on every FD re-evaluation
                    let mut mask_rng = Stream::seed_from_u64(mask_seed);
                    project(&dropout(&v[0], 0.5, true, &mut mask_rng))
                })
            }),
        },
    ];
    checks.sort_by_key(|c| c.op);
    checks
}

/// Run `cases` random checks per op and report the worst relative error.
pub fn run_suite(cases: usize, seed: u64) -> Vec<OpReport> {
    let mut rng = crate::rng::stream(seed, crate::rng::StreamId::Synth);
    all_checks()
        .into_iter()
        .map(|c| {
            let mut worst = 0.0f64;
            for _ in 0..cases {
                worst = worst.max((c.run)(&mut rng));
            }
            OpReport {
                op: c.op,
                cases,
                max_rel_err: worst,
            }
        })
        .collect()
}
