// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! `adc`, `softmax-eval` and `mvm`.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use acam_core::crossbar::matvec_reference;
use acam_core::{
    mvm as crossbar_mvm, program_weights, AdcUnit, CrossbarConfig, IntMatrix, Readout, SoftmaxConfig, SoftmaxUnitSet,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::manifest::Run;

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

#[derive(Args)]
pub struct AdcArgs {
    /// Gaussian noise per pass, in 8-bit level units.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Conversions per level.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// CSV: level,sample,code,error.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct AdcSummary {
    noise: f64,
    samples: usize,
    conversions: usize,
    exact: usize,
    within_one: usize,
    max_abs_error: u32,
}

pub fn adc(a: &AdcArgs, run: &mut Run) -> Result<()> {
    let unit = AdcUnit::new(a.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed());
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["level", "sample", "code", "error"])?;
    let mut s =
        AdcSummary { noise: a.noise, samples: a.samples, conversions: 0, exact: 0, within_one: 0, max_abs_error: 0 };
    for level in 0..=unit.max_level() {
        for k in 0..a.samples {
            let code = unit.convert_noisy(f64::from(level), &mut rng);
            let err = code as i64 - i64::from(level);
            s.conversions += 1;
            s.exact += usize::from(err == 0);
            s.within_one += usize::from(err.abs() <= 1);
            s.max_abs_error = s.max_abs_error.max(err.unsigned_abs() as u32);
            out.write_record([level.to_string(), k.to_string(), code.to_string(), err.to_string()])?;
        }
    }
    println!(
        "adc noise {}: exact {}/{n}, within +-1 {}/{n}, max error {}",
        a.noise,
        s.exact,
        s.within_one,
        s.max_abs_error,
        n = s.conversions
    );
    run.write(&a.out, &csv_bytes(out)?)?;
    if let Some(p) = &a.summary {
        run.write_json(p, &s)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct SoftmaxArgs {
    #[arg(long, default_value_t = 1000)]
    vectors: usize,
    #[arg(long, default_value_t = 128)]
    len: usize,
    /// Standard deviation of the Gaussian logits.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-vector CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize, Default)]
struct SoftmaxStats {
    quant: String,
    argmax_preserved: usize,
    max_abs_error: f64,
    mean_abs_error: f64,
}

#[derive(Serialize)]
struct SoftmaxReport {
    vectors: usize,
    len: usize,
    sigma: f64,
    seed: u64,
    results: Vec<SoftmaxStats>,
}

fn max_set(v: &[f64]) -> Vec<bool> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|&x| x == m).collect()
}

pub fn softmax(a: &SoftmaxArgs, run: &mut Run) -> Result<()> {
    if a.vectors == 0 {
        bail!("--vectors must be at least 1");
    }
    let normal = Normal::new(0.0, a.sigma).map_err(|e| anyhow!("sigma {}: {e}", a.sigma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed());
    let xs: Vec<Vec<f64>> = (0..a.vectors).map(|_| (0..a.len).map(|_| normal.sample(&mut rng)).collect()).collect();

    let mut per_vec = csv::Writer::from_writer(Vec::new());
    per_vec.write_record(["vector", "quant", "argmax_preserved", "max_abs_error"])?;
    let mut results = Vec::new();
    for (name, cfg) in [("pot", SoftmaxConfig::pot()), ("uniform", SoftmaxConfig::uniform())] {
        let units = SoftmaxUnitSet::new(cfg)?;
        let xf = units.config().x_format;
        let mut st = SoftmaxStats { quant: name.into(), ..Default::default() };
        let mut err_sum = 0.0;
        for (i, x) in xs.iter().enumerate() {
            // reference on the same quantized logits
            let q: Vec<f64> = x.iter().map(|&v| xf.raw_to_value(xf.quantize_raw(v))).collect();
            let top = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = q.iter().map(|v| (v - top).exp()).sum();
            let reference: Vec<f64> = q.iter().map(|v| (v - top).exp() / z).collect();
            let y: Vec<f64> = units.softmax_values(x)?;
            let hit = max_set(&reference) == max_set(&y);
            let err = y.iter().zip(&reference).map(|(p, r)| (p - r).abs()).fold(0.0, f64::max);
            st.argmax_preserved += usize::from(hit);
            st.max_abs_error = st.max_abs_error.max(err);
            err_sum += y.iter().zip(&reference).map(|(p, r)| (p - r).abs()).sum::<f64>();
            per_vec.write_record([i.to_string(), name.into(), hit.to_string(), format!("{err:.6}")])?;
        }
        st.mean_abs_error = err_sum / (a.vectors * a.len) as f64;
        println!(
            "{name}: argmax preserved {}/{}, max |err| {:.4}, mean |err| {:.5}",
            st.argmax_preserved, a.vectors, st.max_abs_error, st.mean_abs_error
        );
        results.push(st);
    }
    let report = SoftmaxReport { vectors: a.vectors, len: a.len, sigma: a.sigma, seed: run.seed(), results };
    run.write_json(&a.out, &report)?;
    if let Some(p) = &a.csv {
        run.write(p, &csv_bytes(per_vec)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CrossbarPreset {
    /// 128x128, 2-bit cells, 1-bit DAC, 8-bit weights and inputs
    Default,
    /// 4x4, 2-bit cells, 1-bit DAC, 4-bit weights, 2-bit inputs
    Mini,
}

#[derive(Args)]
pub struct MvmArgs {
    /// Weight matrix, CSV or `.bin`.
    #[arg(long, required_unless_present = "instances", requires = "input")]
    weights: Option<PathBuf>,
    /// Input vector: integers separated by commas or newlines.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Check this many random full-size instances instead.
    #[arg(long, conflicts_with = "weights")]
    instances: Option<usize>,
    #[arg(long, value_enum, default_value = "default")]
    crossbar: CrossbarPreset,
    /// Read columns through the folded ADC instead of exactly.
    #[arg(long)]
    adc: bool,
    /// Column-sum to ADC-level gain; defaults to full scale.
    #[arg(long, requires = "adc")]
    gain: Option<f64>,
    /// ADC noise in level units.
    #[arg(long, requires = "adc")]
    noise: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn read_matrix(path: &Path) -> Result<IntMatrix> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let m = match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => IntMatrix::read_bin(f),
        _ => IntMatrix::read_csv(f),
    };
    m.with_context(|| format!("reading matrix {}", path.display()))
}

fn read_vector(path: &Path) -> Result<Vec<u32>> {
    let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u32>().with_context(|| format!("{}: {t:?} is not a non-negative integer", path.display())))
        .collect()
}

struct Reader {
    unit: Option<AdcUnit>,
    gain: f64,
    rng: ChaCha8Rng,
}

impl Reader {
    fn read(&mut self, w: &IntMatrix, x: &[u32], cfg: &CrossbarConfig) -> Result<acam_core::MvmResult> {
        let s = program_weights(w, cfg)?;
        let readout = match &self.unit {
            None => Readout::Ideal,
            Some(unit) => {
                let rng = (unit.noise_sigma > 0.0).then_some(&mut self.rng as &mut dyn rand::RngCore);
                Readout::Adc { unit, gain: self.gain, rng }
            }
        };
        Ok(crossbar_mvm(&s, x, cfg, readout)?)
    }
}

pub fn mvm(a: &MvmArgs, run: &mut Run) -> Result<()> {
    let cfg = match a.crossbar {
        CrossbarPreset::Default => CrossbarConfig::default(),
        CrossbarPreset::Mini => CrossbarConfig::mini(),
    };
    let unit = a.adc.then(|| AdcUnit::new(a.noise.unwrap_or(0.0))).transpose()?;
    let full_scale = unit.as_ref().map_or(1.0, |u| f64::from(u.max_level()) / cfg.max_column_sum() as f64);
    let mut reader = Reader { unit, gain: a.gain.unwrap_or(full_scale), rng: ChaCha8Rng::seed_from_u64(run.seed()) };
    let noisy = a.noise.is_some_and(|n| n > 0.0);

    let mut out = csv::Writer::from_writer(Vec::new());
    let failed = if let Some(n) = a.instances {
        out.write_record(["instance", "max_abs_error", "error_bound", "saturated", "pass"])?;
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed());
        let mut passed = 0;
        for i in 0..n {
            let data = (0..cfg.rows * cfg.cols).map(|_| rng.random_range(0..1u32 << cfg.weight_bits)).collect();
            let w = IntMatrix::new(cfg.rows, cfg.cols, cfg.weight_bits, data)?;
            let x: Vec<u32> = (0..cfg.rows).map(|_| rng.random_range(0..1u32 << cfg.input_bits)).collect();
            let r = reader.read(&w, &x, &cfg)?;
            let err = max_error(&r.y, &matvec_reference(&w, &x));
            let ok = noisy || (r.saturated == 0 && err <= r.error_bound + 1e-9);
            passed += usize::from(ok);
            out.write_record([
                i.to_string(),
                err.to_string(),
                r.error_bound.to_string(),
                r.saturated.to_string(),
                ok.to_string(),
            ])?;
        }
        println!("{} {passed}/{n}", if passed == n { "PASS" } else { "FAIL" });
        n - passed
    } else {
        let (Some(wp), Some(xp)) = (&a.weights, &a.input) else { bail!("--weights and --input go together") };
        let w = read_matrix(wp)?;
        let x = read_vector(xp)?;
        let r = reader.read(&w, &x, &cfg)?;
        let reference = matvec_reference(&w, &x);
        out.write_record(["col", "y", "reference"])?;
        for (c, (y, want)) in r.y.iter().zip(&reference).enumerate() {
            out.write_record([c.to_string(), y.to_string(), want.to_string()])?;
        }
        let err = max_error(&r.y, &reference);
        println!("{} columns, max |error| {err} (bound {}), saturated reads {}", w.cols, r.error_bound, r.saturated);
        usize::from(!noisy && r.saturated == 0 && err > r.error_bound + 1e-9)
    };
    run.write(&a.out, &csv_bytes(out)?)?;
    if failed > 0 {
        bail!("{failed} result(s) outside the readout error bound");
    }
    Ok(())
}

fn max_error(y: &[f64], reference: &[i64]) -> f64 {
    y.iter().zip(reference).map(|(&a, &b)| (a - b as f64).abs()).fold(0.0, f64::max)
}
