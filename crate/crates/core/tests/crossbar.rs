// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

use acam_core::crossbar::{adc_error_bound, matvec_reference, offset_correct, offset_weights};
use acam_core::{mvm, mvm_exact, program_weights, AdcUnit, CrossbarConfig, IntMatrix, Readout};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, width: u32) -> IntMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(0..1u32 << width)).collect();
    IntMatrix::new(rows, cols, width, data).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, width: u32) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(0..1u32 << width)).collect()
}

#[test]
fn slices_of_one_weight() {
    let cfg = CrossbarConfig::default();
    let w = IntMatrix::new(1, 1, 8, vec![0b1011_0111]).unwrap();
    let s = program_weights(&w, &cfg).unwrap();
    let planes: Vec<u8> = s.slices.iter().map(|p| p[0]).collect();
    assert_eq!(planes, vec![0b10, 0b11, 0b01, 0b11]);
    assert_eq!(s.shifts, vec![6, 4, 2, 0]);
    let z = program_weights(&IntMatrix::zeros(3, 5, 8), &cfg).unwrap();
    assert!(z.slices.iter().flatten().all(|&v| v == 0));
}

#[test]
fn bad_weights_and_inputs_are_rejected() {
    let cfg = CrossbarConfig::default();
    assert!(program_weights(&IntMatrix::zeros(129, 1, 8), &cfg).is_err());
    assert!(IntMatrix::new(1, 1, 8, vec![256]).is_err());
    let s = program_weights(&IntMatrix::zeros(4, 4, 8), &cfg).unwrap();
    assert!(mvm_exact(&s, &[0, 0, 0], &cfg).is_err());
    assert!(mvm_exact(&s, &[0, 0, 0, 256], &cfg).is_err());
    let odd = CrossbarConfig { weight_bits: 7, ..cfg };
    assert!(odd.validate().is_err());
}

#[test]
fn random_full_size_instances_are_exact() {
    let cfg = CrossbarConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let w = random_matrix(&mut rng, 128, 128, 8);
        let x = random_vec(&mut rng, 128, 8);
        let s = program_weights(&w, &cfg).unwrap();
        assert_eq!(s.reconstruct(), w.data);
        assert_eq!(mvm_exact(&s, &x, &cfg).unwrap(), matvec_reference(&w, &x));
        let r = mvm::<f64>(&s, &x, &cfg, Readout::Ideal).unwrap();
        let want: Vec<f64> = matvec_reference(&w, &x).into_iter().map(|v| v as f64).collect();
        assert_eq!(r.y, want);
    }
}

#[test]
fn miniature_config_exhaustive_inputs() {
    let cfg = CrossbarConfig::mini();
    assert_eq!((cfg.slices(), cfg.cycles()), (2, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let w = random_matrix(&mut rng, 4, 4, 4);
        let s = program_weights(&w, &cfg).unwrap();
        for code in 0..256u32 {
            let x: Vec<u32> = (0..4).map(|i| code >> (2 * i) & 3).collect();
            assert_eq!(mvm_exact(&s, &x, &cfg).unwrap(), matvec_reference(&w, &x));
        }
    }
}

#[test]
fn scaled_identity_selects_inputs() {
    let cfg = CrossbarConfig::default();
    let mut data = vec![0; 16 * 16];
    for i in 0..16 {
        data[i * 16 + i] = 3;
    }
    let w = IntMatrix::new(16, 16, 8, data).unwrap();
    let x: Vec<u32> = (0..16).map(|i| i * 15).collect();
    let s = program_weights(&w, &cfg).unwrap();
    let y = mvm_exact(&s, &x, &cfg).unwrap();
    assert_eq!(y, x.iter().map(|&v| 3 * i64::from(v)).collect::<Vec<_>>());
}

#[test]
fn adc_readout_respects_bound() {
    let cfg = CrossbarConfig::default();
    let unit = AdcUnit::ideal();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gain = f64::from(unit.max_level()) / cfg.max_column_sum() as f64;
    for _ in 0..5 {
        let w = random_matrix(&mut rng, 128, 128, 8);
        let x = random_vec(&mut rng, 128, 8);
        let s = program_weights(&w, &cfg).unwrap();
        let r = mvm(&s, &x, &cfg, Readout::Adc { unit: &unit, gain, rng: None }).unwrap();
        assert_eq!(r.saturated, 0);
        assert_eq!(r.error_bound, adc_error_bound(&cfg, gain));
        for (got, want) in r.y.iter().zip(matvec_reference(&w, &x)) {
            assert!((got - want as f64).abs() <= r.error_bound + 1e-6, "{got} vs {want}");
        }
    }
    // unit gain on a full-scale column saturates
    let w = IntMatrix::new(128, 1, 8, vec![255; 128]).unwrap();
    let s = program_weights(&w, &cfg).unwrap();
    let r = mvm(&s, &[255; 128], &cfg, Readout::Adc { unit: &unit, gain: 1.0, rng: None }).unwrap();
    assert!(r.saturated > 0);
}

#[test]
fn unit_gain_small_sums_are_exact() {
    // per-cycle sums stay within 255 on a 28-row crossbar: 28 * 1 * 3 = 84
    let cfg = CrossbarConfig { rows: 28, cols: 8, ..CrossbarConfig::default() };
    let unit = AdcUnit::ideal();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = random_matrix(&mut rng, 28, 8, 8);
    let x = random_vec(&mut rng, 28, 8);
    let s = program_weights(&w, &cfg).unwrap();
    let r = mvm(&s, &x, &cfg, Readout::Adc { unit: &unit, gain: 1.0, rng: None }).unwrap();
    let want: Vec<f64> = matvec_reference(&w, &x).into_iter().map(|v| v as f64).collect();
    assert_eq!(r.y, want);
}

#[test]
fn signed_weights_via_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (rows, cols) = (32, 16);
    let w: Vec<i32> = (0..rows * cols).map(|_| rng.random_range(-128..128)).collect();
    let x = random_vec(&mut rng, rows, 8);
    let (m, off) = offset_weights(&w, rows, cols, 8).unwrap();
    let cfg = CrossbarConfig::default();
    let mut y = mvm_exact(&program_weights(&m, &cfg).unwrap(), &x, &cfg).unwrap();
    offset_correct(&mut y, &x, off);
    for c in 0..cols {
        let want: i64 = (0..rows).map(|r| i64::from(w[r * cols + c]) * i64::from(x[r])).sum();
        assert_eq!(y[c], want);
    }
    assert!(offset_weights(&[128], 1, 1, 8).is_err());
}

#[test]
fn matrix_files_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let w = random_matrix(&mut rng, 5, 7, 8);
    let mut buf = Vec::new();
    w.write_csv(&mut buf).unwrap();
    assert_eq!(IntMatrix::read_csv(buf.as_slice()).unwrap(), w);
    let mut bin = Vec::new();
    w.write_bin(&mut bin).unwrap();
    assert_eq!(IntMatrix::read_bin(bin.as_slice()).unwrap(), w);
    assert!(IntMatrix::read_bin(&b"XBM0"[..]).is_err());
    assert!(IntMatrix::read_csv(&b"rows,cols,width\n2,2,8\n1,2\n"[..]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reconstruction_is_exact(seed in any::<u64>(), rows in 1usize..32, cols in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_matrix(&mut rng, rows, cols, 8);
        let s = program_weights(&w, &CrossbarConfig::default()).unwrap();
        prop_assert!(s.slices.iter().flatten().all(|&v| v <= 3));
        prop_assert_eq!(s.reconstruct(), w.data);
    }

    #[test]
    fn ideal_mvm_is_linear(seed in any::<u64>(), a in 0u32..4) {
        let cfg = CrossbarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_matrix(&mut rng, 64, 16, 8);
        let s = program_weights(&w, &cfg).unwrap();
        let x1 = random_vec(&mut rng, 64, 6);
        let x2 = random_vec(&mut rng, 64, 6);
        let mix: Vec<u32> = x1.iter().zip(&x2).map(|(p, q)| a * p + q).collect();
        let y1 = mvm_exact(&s, &x1, &cfg).unwrap();
        let y2 = mvm_exact(&s, &x2, &cfg).unwrap();
        let ym = mvm_exact(&s, &mix, &cfg).unwrap();
        for c in 0..16 {
            prop_assert_eq!(ym[c], i64::from(a) * y1[c] + y2[c]);
        }
    }
}
