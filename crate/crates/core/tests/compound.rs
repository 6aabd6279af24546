// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

use acam_core::{
    attention_head, softmax_fixed, AttentionHeadConfig, AttentionUnits, CodeMatrix, FixedPointFormat, GeluUnit,
    Mult8Unit, SoftmaxConfig, SoftmaxUnitSet, StageQuant,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn fmt(s: &str) -> FixedPointFormat {
    s.parse().unwrap()
}

#[test]
fn mult8_matches_integer_product() {
    let m = Mult8Unit::new().unwrap();
    for a in -128..=127 {
        for b in -128..=127 {
            assert_eq!(m.raw_product(a, b), a * b, "{a} x {b}");
        }
    }
    for a in (0..=255).step_by(3) {
        for b in 0..=255 {
            assert_eq!(m.raw_product(a, -b), -(a * b));
        }
    }
}

#[test]
fn mult8_nibble_unit_is_small() {
    let m = Mult8Unit::new().unwrap();
    let l = m.nibble_unit().layout();
    assert!(l.encoded);
    assert_eq!(l.allocated_rows(), 38);
}

fn ln_error_bound(cfg: &SoftmaxConfig, c_min: f64) -> f64 {
    // half a step on every requantization between input and output
    let ln2 = std::f64::consts::LN_2;
    let half_pot = |fb: u32| ln2 / f64::from(1u32 << (fb + 1));
    let (exp_fb, log_fb) = match (cfg.exp_output, cfg.log_input) {
        (acam_core::Coding::Pot { format: e }, acam_core::Coding::Pot { format: l }) => {
            (e.exp_frac_bits(), l.exp_frac_bits())
        }
        _ => unreachable!("pot config"),
    };
    let log_out = cfg.x_format.step::<f64>() / 2.0;
    let acc = 0.5 / f64::from(1u32 << cfg.acc_frac_bits) / c_min.exp();
    2.0 * half_pot(exp_fb) + half_pot(log_fb) + log_out + acc
}

#[test]
fn constant_vectors_give_one_over_len() {
    let s = SoftmaxUnitSet::new(SoftmaxConfig::pot()).unwrap();
    let cfg = s.config().clone();
    let xf = cfg.x_format;
    let c_min = -4.0;
    let bound = ln_error_bound(&cfg, c_min);
    // exp saturates above this input, and the log output above its format max
    let exp_sat = match cfg.exp_output {
        acam_core::Coding::Pot { format } => format.max_exp::<f64>() * std::f64::consts::LN_2,
        _ => unreachable!(),
    };
    let log_max = xf.max_value::<f64>();
    let mut worst: f64 = 0.0;
    for l in [1usize, 2, 3, 5, 8, 16, 31, 64, 100, 128, 200, 256] {
        for raw in xf.quantize_raw(c_min)..=xf.max_raw() {
            let c: f64 = xf.raw_to_value(raw);
            if c > exp_sat || c + (l as f64).ln() + bound > log_max {
                continue;
            }
            let y: Vec<f64> = s.decode(&s.softmax_raw(&vec![raw; l]).unwrap());
            assert!(y.windows(2).all(|w| w[0] == w[1]));
            let e = (y[0] * l as f64).ln().abs();
            worst = worst.max(e);
            assert!(e <= bound, "L={l} c={c}: |ln(pL)| = {e} > {bound}");
        }
    }
    eprintln!("constant vectors: worst |ln(pL)| = {worst:.4}, bound {bound:.4}");
}

#[test]
fn outputs_are_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for quant in [StageQuant::Pot, StageQuant::Uniform] {
        let s = SoftmaxUnitSet::new(SoftmaxConfig::with_quant(quant)).unwrap();
        let xf = s.config().x_format;
        for _ in 0..200 {
            let l = rng.random_range(1..=256);
            let x: Vec<i32> = (0..l).map(|_| rng.random_range(xf.min_raw()..=xf.max_raw())).collect();
            let y: Vec<f64> = s.decode(&s.softmax_raw(&x).unwrap());
            assert!(y.iter().all(|&p| (0.0..=1.0).contains(&p)));
            // larger logits never get smaller probabilities
            for i in 0..l {
                for j in 0..l {
                    if x[i] > x[j] {
                        assert!(y[i] >= y[j]);
                    }
                }
            }
        }
    }
}

#[test]
fn dominant_logit_takes_everything() {
    let s = SoftmaxUnitSet::new(SoftmaxConfig::pot()).unwrap();
    let xf = s.config().x_format;
    for l in [2usize, 64, 256] {
        for pos in [0, l / 2, l - 1] {
            let mut x = vec![xf.quantize_raw(-6.0f64); l];
            x[pos] = xf.quantize_raw(6.0f64);
            let y: Vec<f64> = s.decode(&s.softmax_raw(&x).unwrap());
            assert!(y[pos] >= 0.95, "L={l}: {}", y[pos]);
            let codes: Vec<_> = x.iter().map(|&r| acam_core::FixedCode::from_raw(xf, r)).collect();
            assert_eq!(softmax_fixed(&codes, &s).unwrap(), s.softmax_raw(&x).unwrap());
        }
    }
}

fn max_set(v: &[f64]) -> Vec<bool> {
    let top = v.iter().cloned().fold(f64::MIN, f64::max);
    v.iter().map(|&x| x == top).collect()
}

/// Vectors whose output maxima sit exactly where a double-precision softmax
/// of the same quantized logits puts them.
fn argmax_hits(s: &SoftmaxUnitSet, xs: &[Vec<f64>]) -> usize {
    let xf = s.config().x_format;
    xs.iter()
        .filter(|x| {
            let q: Vec<f64> = x.iter().map(|&v| xf.raw_to_value(xf.quantize_raw(v))).collect();
            let y: Vec<f64> = s.softmax_values(x).unwrap();
            max_set(&q) == max_set(&y)
        })
        .count()
}

#[test]
fn pot_beats_uniform_on_argmax() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<Vec<f64>> = (0..200).map(|_| (0..128).map(|_| normal.sample(&mut rng)).collect()).collect();
    let pot = argmax_hits(&SoftmaxUnitSet::new(SoftmaxConfig::pot()).unwrap(), &xs);
    let uni = argmax_hits(&SoftmaxUnitSet::new(SoftmaxConfig::uniform()).unwrap(), &xs);
    assert!(pot >= 198, "{pot}");
    assert!(pot > uni, "{pot} vs {uni}");
}

#[test]
fn f32_and_f64_softmax_agree() {
    let s = SoftmaxUnitSet::new(SoftmaxConfig::pot()).unwrap();
    let x = [0.5, -1.25, 2.0, 0.0, 3.5];
    let a: Vec<f64> = s.softmax_values(&x).unwrap();
    let b: Vec<f32> = s.softmax_values(&x.map(|v| v as f32)).unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert!((p - f64::from(*q)).abs() < 1e-6);
    }
}

#[test]
fn gelu8_matches_reference_and_is_monotone_above_zero() {
    let f = fmt("1-3-4");
    let g = GeluUnit::new(f).unwrap();
    let reference = |x: f64| 0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let mut prev = i32::MIN;
    for raw in f.min_raw()..=f.max_raw() {
        let x: f64 = f.raw_to_value(raw);
        let bits = f.level_to_bits(f.raw_to_level(raw));
        let y = f.bits_to_raw(g.gelu8(bits));
        assert_eq!(y, f.quantize_raw(reference(x)), "x={x}");
        if raw >= 0 {
            assert!(y >= prev);
            prev = y;
        }
    }
    let g3 = GeluUnit::new(fmt("1-0-3")).unwrap();
    let m1 = fmt("1-0-3").level_to_bits(0);
    assert_eq!(fmt("1-0-3").bits_to_raw(g3.gelu8(m1)), -1);
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, f: FixedPointFormat, lim: f64) -> CodeMatrix {
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-lim..=lim)).collect();
    CodeMatrix::quantize(rows, cols, f, &v).unwrap()
}

fn attention_oracle(q: &CodeMatrix, k: &CodeMatrix, v: &CodeMatrix) -> Vec<f64> {
    let (l, d) = (q.rows, q.cols);
    let (qv, kv, vv): (Vec<f64>, Vec<f64>, Vec<f64>) = (q.values(), k.values(), v.values());
    let mut out = vec![0.0; l * d];
    for i in 0..l {
        let s: Vec<f64> =
            (0..l).map(|j| (0..d).map(|c| qv[i * d + c] * kv[j * d + c]).sum::<f64>() / (d as f64).sqrt()).collect();
        let m = s.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for c in 0..d {
            out[i * d + c] = (0..l).map(|j| e[j] / z * vv[j * d + c]).sum();
        }
    }
    out
}

#[test]
fn attention_tracks_double_precision() {
    let cfg = AttentionHeadConfig::new(16, 8);
    let units = AttentionUnits::new(&cfg).unwrap();
    let step: f64 = cfg.out_format.step();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_matrix(&mut rng, 8, 16, cfg.qkv_format, 1.0);
        let k = random_matrix(&mut rng, 8, 16, cfg.qkv_format, 1.0);
        let v = random_matrix(&mut rng, 8, 16, cfg.qkv_format, 1.0);
        let got: Vec<f64> = attention_head(&q, &k, &v, &cfg, &units).unwrap().values();
        for (a, b) in got.iter().zip(attention_oracle(&q, &k, &v)) {
            worst = worst.max((a - b).abs() / step);
        }
    }
    eprintln!("attention: worst deviation {worst:.3} output steps");
    assert!(worst <= 4.0, "{worst}");
}

#[test]
fn identical_keys_average_the_values() {
    let cfg = AttentionHeadConfig::new(8, 8);
    let units = AttentionUnits::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q = random_matrix(&mut rng, 8, 8, cfg.qkv_format, 1.0);
    let k1 = random_matrix(&mut rng, 1, 8, cfg.qkv_format, 1.0);
    let k = CodeMatrix::from_raw(8, 8, cfg.qkv_format, k1.raw.repeat(8)).unwrap();
    let v = random_matrix(&mut rng, 8, 8, cfg.qkv_format, 1.0);
    let out: Vec<f64> = attention_head(&q, &k, &v, &cfg, &units).unwrap().values();
    let vv: Vec<f64> = v.values();
    let step: f64 = cfg.out_format.step();
    let rel = ln_error_bound(&SoftmaxConfig::pot(), -8.0).exp_m1();
    for i in 0..8 {
        // uniform weights within a row, so each output is the column mean up
        // to the softmax error and the final rounding
        for c in 0..8 {
            let col: Vec<f64> = (0..8).map(|j| vv[j * 8 + c]).collect();
            let mean = col.iter().sum::<f64>() / 8.0;
            let abs_mean = col.iter().map(|v| v.abs()).sum::<f64>() / 8.0;
            let tol = rel * abs_mean + step;
            let got = out[i * 8 + c];
            assert!((got - mean).abs() <= tol, "row {i} col {c}: {got} vs {mean}");
        }
    }
}

#[test]
fn attention_rejects_bad_shapes() {
    let cfg = AttentionHeadConfig::new(4, 4);
    let units = AttentionUnits::new(&cfg).unwrap();
    let m = CodeMatrix::from_raw(4, 4, cfg.qkv_format, vec![0; 16]).unwrap();
    let bad = CodeMatrix::from_raw(3, 4, cfg.qkv_format, vec![0; 12]).unwrap();
    assert!(attention_head(&m, &bad, &m, &cfg, &units).is_err());
    let other = CodeMatrix::from_raw(4, 4, fmt("1-3-4"), vec![0; 16]).unwrap();
    assert!(attention_head(&m, &m, &other, &cfg, &units).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mult8_quantized_product_is_nearest(a in -128i32..=127, b in -128i32..=127) {
        let m = Mult8Unit::new().unwrap();
        let f = fmt("1-3-4");
        let out = fmt("1-3-4");
        let c = m.multiply(acam_core::FixedCode::from_raw(f, a), acam_core::FixedCode::from_raw(f, b), out);
        let exact = f64::from(a * b) / 256.0;
        prop_assert_eq!(c.raw(), out.quantize_raw(exact));
    }

    #[test]
    fn softmax_is_shift_monotone(x in proptest::collection::vec(-128i32..=127, 1..64)) {
        let s = SoftmaxUnitSet::new(SoftmaxConfig::pot()).unwrap();
        let y = s.softmax_raw(&x).unwrap();
        let top = x.iter().enumerate().max_by_key(|(i, v)| (**v, std::cmp::Reverse(*i))).unwrap().0;
        prop_assert_eq!(y[top], *y.iter().max().unwrap());
    }
}
