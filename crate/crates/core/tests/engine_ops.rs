mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xvmpc_core::engine::{MatDims, Scheme, TruncMode};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn linear_ops_are_free() {
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Deterministic);
        let out = run_op(&cfg, &OpTask { op: Op::Add, x: vec![3], y: vec![5], frac: 0 });
        assert_eq!(out.opened, vec![8]);
        assert_eq!(out.bytes, 0);
        let out = run_op(&cfg, &unary(Op::AddPublic(4), vec![3], 0));
        assert_eq!(out.opened, vec![7]);
        assert_eq!(out.bytes, 0);
        let out = run_op(&cfg, &unary(Op::MulPublic(3u64.wrapping_neg()), vec![5], 0));
        assert_eq!(out.opened, vec![15u64.wrapping_neg()]);
        assert_eq!(out.bytes, 0);
        let out = run_op(&cfg, &unary(Op::Identity, vec![42, 0, u64::MAX], 0));
        assert_eq!(out.opened, vec![42, 0, u64::MAX]);
    }
}

#[test]
fn multiplication_matches_wide_integers_in_one_round() {
    let mut r = rng(1);
    let n = 1000;
    let x: Vec<u64> = (0..n).map(|_| r.gen()).collect();
    let y: Vec<u64> = (0..n).map(|_| r.gen()).collect();
    let want: Vec<u64> = x
        .iter()
        .zip(&y)
        .map(|(a, b)| ((*a as u128 * *b as u128) % (1u128 << 64)) as u64)
        .collect();
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Deterministic);
        let out = run_op(&cfg, &OpTask { op: Op::Mul, x: x.clone(), y: y.clone(), frac: 0 });
        assert_eq!(out.opened, want, "{scheme:?}");
        assert_eq!(out.rounds, 1, "k multiplications batch into one round");
        let per_party = match scheme {
            Scheme::Additive2 => 2 * 8 * n as u64 + 6,
            Scheme::Rss3 => 8 * n as u64 + 6,
        };
        assert_eq!(out.bytes, per_party);

        let out = run_op(&cfg, &OpTask { op: Op::Mul, x: vec![3], y: vec![5], frac: 0 });
        assert_eq!(out.opened, vec![15]);
    }
}

#[test]
fn fixed_point_product() {
    for scheme in SCHEMES {
        for mode in [TruncMode::Deterministic, TruncMode::Probabilistic] {
            let cfg = config(scheme, mode);
            let out = run_op(
                &cfg,
                &OpTask { op: Op::MulFixed, x: vec![enc(1.5), enc(-1.25)], y: vec![enc(2.0), enc(0.5)], frac: 15 },
            );
            assert!((dec(out.opened[0], 15) - 3.0).abs() <= 2f64.powi(-14));
            assert!((dec(out.opened[1], 15) + 0.625).abs() <= 2f64.powi(-14));
            let one = run_op(&cfg, &OpTask { op: Op::MulFixed, x: vec![enc(1.0)], y: vec![enc(1.0)], frac: 15 });
            assert_eq!(one.opened, vec![enc(1.0)]);
        }
    }
}

#[test]
fn dot_products() {
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Deterministic);
        let out = run_op(&cfg, &OpTask { op: Op::Dot(3), x: vec![1, 2, 3], y: vec![4, 5, 6], frac: 0 });
        assert_eq!(out.opened, vec![32]);
        assert_eq!(out.rounds, 1);
    }

    // replicated inner products cost one reshared element, whatever the length
    let cfg = config(Scheme::Rss3, TruncMode::Deterministic);
    let out = run_op(&cfg, &OpTask { op: Op::Dot(512), x: vec![1; 512], y: vec![2; 512], frac: 0 });
    assert_eq!(out.opened, vec![1024]);
    assert_eq!(out.bytes, 8 + 6);
    // the additive backend opens e and f for every term, in one frame
    let cfg = config(Scheme::Additive2, TruncMode::Deterministic);
    let out = run_op(&cfg, &OpTask { op: Op::Dot(512), x: vec![1; 512], y: vec![2; 512], frac: 0 });
    assert_eq!(out.bytes, 2 * 512 * 8 + 6);
}

#[test]
fn fixed_point_dot_error_bound() {
    let mut r = rng(2);
    let len = 100;
    let xs: Vec<f64> = (0..len).map(|_| r.gen_range(-4.0..4.0)).collect();
    let ys: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
    let q = |v: f64| dec(enc(v), 15);
    let exact: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let max_y = ys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = len as f64 * 2f64.powi(-15) * max_y.max(4.0) + 2f64.powi(-15);
    for scheme in SCHEMES {
        for mode in [TruncMode::Deterministic, TruncMode::Probabilistic] {
            let cfg = config(scheme, mode);
            let task = OpTask {
                op: Op::DotFixed(len),
                x: xs.iter().map(|v| enc(*v)).collect(),
                y: ys.iter().map(|v| enc(*v)).collect(),
                frac: 15,
            };
            let got = dec(run_op(&cfg, &task).opened[0], 15);
            assert!((got - exact).abs() <= bound, "{got} vs {exact}");
            // against the quantized inputs the only error is the final truncation
            let qexact: f64 = xs.iter().zip(&ys).map(|(a, b)| q(*a) * q(*b)).sum();
            assert!((got - qexact).abs() < 2f64.powi(-15) + 1e-12);
        }
    }
}

#[test]
fn matmul_matches_plain_product() {
    let mut r = rng(3);
    let d = MatDims { rows: 7, inner: 5, cols: 6 };
    let x: Vec<u64> = (0..d.rows * d.inner).map(|_| r.gen()).collect();
    let w: Vec<u64> = (0..d.cols * d.inner).map(|_| r.gen()).collect();
    let mut want = vec![0u64; d.rows * d.cols];
    for i in 0..d.rows {
        for j in 0..d.cols {
            for k in 0..d.inner {
                want[i * d.cols + j] =
                    want[i * d.cols + j].wrapping_add(x[i * d.inner + k].wrapping_mul(w[j * d.inner + k]));
            }
        }
    }
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Deterministic);
        let out = run_op(&cfg, &OpTask { op: Op::Matmul(d), x: x.clone(), y: w.clone(), frac: 0 });
        assert_eq!(out.opened, want);
        assert_eq!(out.rounds, 1);
    }
}

fn trunc_inputs(seed: u64, n: usize) -> Vec<u64> {
    let mut r = rng(seed);
    let limit = 1i64 << 62;
    let mut v: Vec<u64> = vec![0, 1, u64::MAX, (limit - 1) as u64, (1 - limit) as u64];
    v.extend((0..n).map(|i| {
        // mix full-range and small magnitudes
        let bits = 1 + (i % 62) as u32;
        let m = 1i64 << bits;
        r.gen_range(-m + 1..m) as u64
    }));
    v
}

#[test]
fn deterministic_truncation_is_exact() {
    let x = trunc_inputs(4, 2000);
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Deterministic);
        for shift in [1u32, 2, 15, 30, 31, 47, 61, 62] {
            let out = run_op(&cfg, &unary(Op::Trunc(shift, TruncMode::Deterministic), x.clone(), 62));
            for (v, got) in x.iter().zip(&out.opened) {
                assert_eq!(*got as i64, (*v as i64) >> shift, "x={} shift={shift}", *v as i64);
            }
            assert_eq!(out.rounds as u32, shift, "one opening plus the borrow ripple");
        }
        let out = run_op(&cfg, &unary(Op::Trunc(0, TruncMode::Deterministic), x.clone(), 62));
        assert_eq!(out.opened, x);
        assert_eq!(out.bytes, 0);
    }
}

#[test]
fn probabilistic_truncation_rounds_stochastically() {
    let x = trunc_inputs(5, 20_000);
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Probabilistic);
        for shift in [1u32, 15, 40, 62] {
            let out = run_op(&cfg, &unary(Op::Trunc(shift, TruncMode::Probabilistic), x.clone(), 62));
            assert_eq!(out.rounds, 1);
            let mut sum_abs = 0.0;
            for (v, got) in x.iter().zip(&out.opened) {
                let floor = (*v as i64) >> shift;
                let diff = (*got as i64).wrapping_sub(floor);
                assert!(diff == 0 || diff == 1, "x={} shift={shift} diff={diff}", *v as i64);
                // error against the rational x / 2^shift, computed exactly
                let scaled = ((*got as i64 as i128) << shift) - *v as i64 as i128;
                assert!(scaled.abs() < 1i128 << shift);
                sum_abs += scaled.abs() as f64 / (shift as f64).exp2();
            }
            let mean = sum_abs / x.len() as f64;
            assert!(mean <= 0.5, "shift {shift}: mean |error| {mean}");
        }
        let zero = run_op(&cfg, &unary(Op::Trunc(15, TruncMode::Probabilistic), vec![0; 100], 30));
        assert!(zero.opened.iter().all(|v| *v == 0));
    }
}

#[test]
fn probabilistic_truncation_is_unbiased() {
    // a value halfway between two integers rounds up about half the time
    let x = vec![(3u64 << 15) + (1 << 14); 20_000];
    let cfg = config(Scheme::Rss3, TruncMode::Probabilistic);
    let out = run_op(&cfg, &unary(Op::Trunc(15, TruncMode::Probabilistic), x, 30));
    let ups = out.opened.iter().filter(|v| **v == 4).count() as f64 / 20_000.0;
    assert!((ups - 0.5).abs() < 0.02, "{ups}");
}

#[test]
fn less_than_zero() {
    let mut r = rng(6);
    let lim = 1i64 << 31;
    let mut xs: Vec<i64> = vec![0, 1, -1, lim - 1, -lim + 1, (1 << 32) - 1, -(1 << 32) + 1];
    xs.push(enc(-2.5) as i64);
    xs.extend((0..3000).map(|_| r.gen_range(-lim..lim)));
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Probabilistic);
        let out = run_op(&cfg, &unary(Op::Ltz, xs.iter().map(|v| *v as u64).collect(), 15));
        for (v, got) in xs.iter().zip(&out.opened) {
            assert_eq!(*got, (*v < 0) as u64, "x={v}");
        }
    }
}

#[test]
fn relu_is_exact() {
    let mut r = rng(7);
    let lim = 1i64 << 31;
    let mut xs: Vec<i64> = vec![0, 1, -1, enc(-1.0) as i64, enc(2.5) as i64];
    xs.extend((0..3000).map(|_| r.gen_range(-lim..lim)));
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Probabilistic);
        let out = run_op(&cfg, &unary(Op::Relu, xs.iter().map(|v| *v as u64).collect(), 15));
        for (v, got) in xs.iter().zip(&out.opened) {
            assert_eq!(*got as i64, (*v).max(0), "x={v}");
        }
    }
}

fn sqrt_of(cfg: &xvmpc_core::engine::EngineConfig, xs: &[f64]) -> Vec<f64> {
    let out = run_op(cfg, &unary(Op::Sqrt, xs.iter().map(|v| enc(*v)).collect(), 15));
    out.opened.iter().map(|v| dec(*v, 15)).collect()
}

#[test]
fn sqrt_examples() {
    for scheme in SCHEMES {
        for mode in [TruncMode::Deterministic, TruncMode::Probabilistic] {
            let cfg = config(scheme, mode);
            let got = sqrt_of(&cfg, &[4.0, 2.0, 0.0, 2f64.powi(-15), 65535.0, 1.0]);
            assert!((got[0] - 2.0).abs() <= 1e-3, "{got:?}");
            assert!((got[1] - 2f64.sqrt()).abs() <= 1e-3);
            assert_eq!(got[2], 0.0);
            // the eps floor used by pooling: one unit of 2^-15
            assert!((got[3] - 2f64.powf(-7.5)).abs() <= 2f64.powi(-15), "{mode:?} {got:?}");
            assert!((got[4] / 65535f64.sqrt() - 1.0).abs() <= 1e-3);
            assert!((got[5] - 1.0).abs() <= 1e-3);
        }
    }
}

#[test]
fn sqrt_relative_error_on_uniform_grid() {
    let lo = 2f64.powi(-15);
    let hi = 2f64.powi(16);
    let n = 2000;
    let xs: Vec<f64> = (0..n)
        .map(|i| dec(enc(lo + (hi - lo) * i as f64 / n as f64), 15))
        .collect();
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Probabilistic);
        let got = sqrt_of(&cfg, &xs);
        for (x, y) in xs.iter().zip(&got) {
            let rel = (y - x.sqrt()).abs() / x.sqrt();
            assert!(rel <= 1e-3, "x={x} got {y} rel {rel}");
        }
    }
}

#[test]
fn sqrt_on_log_grid_is_within_output_resolution() {
    // near 2^-15 the output grid itself is coarser than 1e-3 relative
    let xs: Vec<f64> = (0..=31 * 8)
        .map(|i| dec(enc(2f64.powf(-15.0 + i as f64 / 8.0).min(65535.0)), 15))
        .collect();
    for scheme in SCHEMES {
        let cfg = config(scheme, TruncMode::Deterministic);
        let got = sqrt_of(&cfg, &xs);
        for (x, y) in xs.iter().zip(&got) {
            let err = (y - x.sqrt()).abs();
            assert!(err <= (1e-3 * x.sqrt()).max(2f64.powi(-15)), "x={x} got {y}");
        }
    }
}
