// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Operators composed from ACAM instances and adders: 8-bit multiply,
//! softmax, GeLU and a single attention head.

use serde::{Deserialize, Serialize};

use crate::acam::AcamInstance;
use crate::error::{Error, Result};
use crate::fixedpoint::{Coding, FixedCode, FixedPointFormat, PotFormat};
use crate::functions::{FunctionKind, FunctionSpec};
use crate::scalar::{round_shift, Real};

fn fmt(s: &str) -> FixedPointFormat {
    s.parse().expect("static format literal")
}

/// Rescale an integer mantissa from `from` to `to` fractional bits.
fn rescale(raw: i64, from: u32, to: u32) -> i64 {
    if from >= to {
        round_shift(raw, from - to)
    } else {
        raw << (to - from)
    }
}

fn saturate(raw: i64, f: FixedPointFormat) -> i32 {
    raw.clamp(i64::from(f.min_raw()), i64::from(f.max_raw())) as i32
}

/// 8x8 multiply from four 4x4 ACAM multiplies and three adds.
///
/// Operands are split as sign and magnitude; the magnitude (at most 255)
/// is cut into nibbles that feed an unsigned 4-bit x 4-bit -> 8-bit table.
#[derive(Debug, Clone)]
pub struct Mult8Unit {
    nibble: AcamInstance,
}

impl Mult8Unit {
    pub fn new() -> Result<Self> {
        let u4 = FixedPointFormat::unsigned(4)?;
        let spec = FunctionSpec::multiply(u4, u4, FixedPointFormat::unsigned(8)?)?;
        let nibble = AcamInstance::from_table_named(&spec.table::<f64>()?, true, Some("mult4x4"))?;
        Ok(Self { nibble })
    }

    pub fn nibble_unit(&self) -> &AcamInstance {
        &self.nibble
    }

    fn nib(&self, x: u32, y: u32) -> i32 {
        self.nibble.eval_unchecked(x, Some(y)) as i32
    }

    /// Exact product of two mantissas with `|a|, |b| <= 255`.
    pub fn raw_product(&self, a: i32, b: i32) -> i32 {
        assert!(a.abs() <= 255 && b.abs() <= 255, "operands exceed 8-bit magnitude");
        let (ma, mb) = (a.unsigned_abs(), b.unsigned_abs());
        let (ah, al, bh, bl) = (ma >> 4, ma & 15, mb >> 4, mb & 15);
        let hh = self.nib(ah, bh);
        let mid = self.nib(ah, bl) + self.nib(al, bh);
        let ll = self.nib(al, bl);
        let mag = (hh << 8) + (mid << 4) + ll;
        if (a < 0) != (b < 0) {
            -mag
        } else {
            mag
        }
    }

    /// Product quantized (round half away, saturating) into `out`.
    pub fn multiply(&self, a: FixedCode, b: FixedCode, out: FixedPointFormat) -> FixedCode {
        let p = self.raw_product(a.raw(), b.raw());
        let from = a.format().frac_bits() + b.format().frac_bits();
        let r = rescale(i64::from(p), from, out.frac_bits());
        FixedCode::from_raw(out, saturate(r, out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageQuant {
    /// Exponential outputs on a uniform fixed-point grid.
    Uniform,
    /// Exponential outputs on a logarithmic grid.
    Pot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    pub quant: StageQuant,
    /// Logits and log outputs share this format so stage 4 is a plain subtract.
    pub x_format: FixedPointFormat,
    pub exp_output: Coding,
    /// Adder accumulator: total bits and fractional bits.
    pub acc_bits: u32,
    pub acc_frac_bits: u32,
    /// How the sum is presented to the log unit.
    pub log_input: Coding,
    pub max_len: usize,
}

impl SoftmaxConfig {
    pub fn pot() -> Self {
        Self {
            quant: StageQuant::Pot,
            x_format: fmt("1-3-4"),
            exp_output: PotFormat::new(8, 4, -12).expect("valid").into(),
            acc_bits: 24,
            acc_frac_bits: 12,
            log_input: PotFormat::new(8, 3, -12).expect("valid").into(),
            max_len: 256,
        }
    }

    pub fn uniform() -> Self {
        Self {
            quant: StageQuant::Uniform,
            exp_output: fmt("0-4-4").into(),
            log_input: fmt("0-8-0").into(),
            ..Self::pot()
        }
    }

    pub fn with_quant(quant: StageQuant) -> Self {
        match quant {
            StageQuant::Pot => Self::pot(),
            StageQuant::Uniform => Self::uniform(),
        }
    }
}

/// Exp and log instances plus the adder-side conversions for softmax.
#[derive(Debug, Clone)]
pub struct SoftmaxUnitSet {
    cfg: SoftmaxConfig,
    exp: AcamInstance,
    log: AcamInstance,
    // exp output code -> accumulator mantissa
    to_acc: Vec<u64>,
}

impl SoftmaxUnitSet {
    pub fn new(cfg: SoftmaxConfig) -> Result<Self> {
        if cfg.max_len == 0 {
            return Err(Error::Config("softmax max_len must be >= 1".into()));
        }
        let frac = cfg.acc_frac_bits;
        if cfg.acc_bits > 48 || frac > cfg.acc_bits {
            return Err(Error::Config("accumulator wider than 48 bits".into()));
        }
        let to_acc: Vec<u64> = (0..cfg.exp_output.levels())
            .map(|lvl| {
                let v: f64 = cfg.exp_output.decode_level(lvl);
                (v * (1u64 << frac) as f64).round() as u64
            })
            .collect();
        let peak = *to_acc.iter().max().unwrap_or(&0);
        if peak * cfg.max_len as u64 >= 1 << cfg.acc_bits {
            return Err(Error::Config(format!(
                "a {}-bit accumulator can overflow at length {}",
                cfg.acc_bits, cfg.max_len
            )));
        }
        let exp_spec = FunctionSpec::new(FunctionKind::Exp { scale: 1.0 }, vec![cfg.x_format.into()], cfg.exp_output)?;
        let log_spec = FunctionSpec::unary(FunctionKind::Log { scale: 1.0 }, cfg.log_input, cfg.x_format)?;
        let exp = AcamInstance::from_table_named(&exp_spec.table::<f64>()?, true, Some("exp"))?;
        let log = AcamInstance::from_table_named(&log_spec.table::<f64>()?, true, Some("log"))?;
        Ok(Self { cfg, exp, log, to_acc })
    }

    pub fn config(&self) -> &SoftmaxConfig {
        &self.cfg
    }

    pub fn exp_unit(&self) -> &AcamInstance {
        &self.exp
    }

    pub fn log_unit(&self) -> &AcamInstance {
        &self.log
    }

    pub fn output_coding(&self) -> Coding {
        self.cfg.exp_output
    }

    fn exp_of_raw(&self, raw: i32) -> u32 {
        self.exp.eval_unchecked(self.cfg.x_format.raw_to_level(raw), None)
    }

    /// Softmax over logit mantissas in `x_format`; returns exp-output codes.
    pub fn softmax_raw(&self, x: &[i32]) -> Result<Vec<u32>> {
        if x.is_empty() || x.len() > self.cfg.max_len {
            return Err(Error::Shape(format!("softmax length {} outside 1..={}", x.len(), self.cfg.max_len)));
        }
        let xf = self.cfg.x_format;
        if let Some(&bad) = x.iter().find(|&&r| r < xf.min_raw() || r > xf.max_raw()) {
            return Err(Error::InputRange { value: bad as u32, width: xf.width() });
        }
        // 1: exp
        let e: Vec<u32> = x.iter().map(|&r| self.exp_of_raw(r)).collect();
        // 2: sum
        let out = self.cfg.exp_output;
        let acc: u64 = e.iter().map(|&c| self.to_acc[out.bits_to_level(c) as usize]).sum();
        // 3: log; the sum is requantized onto the log unit's input grid
        let sum = acc as f64 / (1u64 << self.cfg.acc_frac_bits) as f64;
        let lvl = self.cfg.log_input.encode_level(sum);
        let log_raw = xf.bits_to_raw(self.log.eval_unchecked(lvl, None));
        // 4: subtract, clamped so every probability stays <= 1
        // 5: exp
        Ok(x.iter()
            .map(|&r| {
                let d = (r - log_raw).clamp(xf.min_raw(), 0);
                self.exp_of_raw(d)
            })
            .collect())
    }

    pub fn softmax_fixed(&self, x: &[FixedCode]) -> Result<Vec<u32>> {
        let raws: Vec<i32> = x.iter().map(|c| c.raw()).collect();
        self.softmax_raw(&raws)
    }

    pub fn decode<T: Real>(&self, codes: &[u32]) -> Vec<T> {
        codes.iter().map(|&c| self.cfg.exp_output.decode_bits(c)).collect()
    }

    /// Quantize real logits onto the input grid, run, and decode.
    pub fn softmax_values<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let raws: Vec<i32> = x.iter().map(|&v| self.cfg.x_format.quantize_raw(v)).collect();
        Ok(self.decode(&self.softmax_raw(&raws)?))
    }

    /// (exp evaluations, log evaluations, adds) for one vector of length `len`.
    pub fn op_counts(len: usize) -> (usize, usize, usize) {
        (2 * len, 1, 2 * len - 1)
    }
}

pub fn softmax_fixed(x: &[FixedCode], units: &SoftmaxUnitSet) -> Result<Vec<u32>> {
    units.softmax_fixed(x)
}

/// 8-bit GeLU on one ACAM instance.
#[derive(Debug, Clone)]
pub struct GeluUnit {
    format: FixedPointFormat,
    inst: AcamInstance,
}

impl GeluUnit {
    pub fn new(format: FixedPointFormat) -> Result<Self> {
        let spec = FunctionSpec::unary(FunctionKind::Gelu, format, format)?;
        let inst = AcamInstance::from_table_named(&spec.table::<f64>()?, true, Some("gelu"))?;
        Ok(Self { format, inst })
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn instance(&self) -> &AcamInstance {
        &self.inst
    }

    /// Input and output are two's-complement bit patterns.
    pub fn gelu8(&self, bits: u32) -> u32 {
        self.inst.eval_unchecked(self.format.bits_to_level(bits), None)
    }
}

/// Row-major matrix of mantissas sharing one format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    pub rows: usize,
    pub cols: usize,
    pub format: FixedPointFormat,
    pub raw: Vec<i32>,
}

impl CodeMatrix {
    pub fn from_raw(rows: usize, cols: usize, format: FixedPointFormat, raw: Vec<i32>) -> Result<Self> {
        if raw.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", raw.len())));
        }
        if raw.iter().any(|&r| r < format.min_raw() || r > format.max_raw()) {
            return Err(Error::Shape(format!("mantissa outside {format}")));
        }
        Ok(Self { rows, cols, format, raw })
    }

    pub fn quantize<T: Real>(rows: usize, cols: usize, format: FixedPointFormat, values: &[T]) -> Result<Self> {
        let raw = values.iter().map(|&v| format.quantize_raw(v)).collect();
        Self::from_raw(rows, cols, format, raw)
    }

    pub fn get(&self, r: usize, c: usize) -> i32 {
        self.raw[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[i32] {
        &self.raw[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values<T: Real>(&self) -> Vec<T> {
        self.raw.iter().map(|&r| self.format.raw_to_value(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHeadConfig {
    pub d_k: usize,
    pub seq_len: usize,
    /// Format of Q, K and V.
    pub qkv_format: FixedPointFormat,
    pub score_format: FixedPointFormat,
    pub prob_format: FixedPointFormat,
    pub out_format: FixedPointFormat,
    pub quant: StageQuant,
}

impl AttentionHeadConfig {
    pub fn new(d_k: usize, seq_len: usize) -> Self {
        Self {
            d_k,
            seq_len,
            qkv_format: fmt("1-2-5"),
            score_format: fmt("1-3-4"),
            prob_format: fmt("0-1-7"),
            out_format: fmt("1-2-5"),
            quant: StageQuant::Pot,
        }
    }

    /// `1/sqrt(d_k)` as a 0-1-7 constant.
    pub fn scale_raw(&self) -> i64 {
        (128.0 / (self.d_k as f64).sqrt()).round() as i64
    }
}

/// Every unit one attention head needs.
#[derive(Debug, Clone)]
pub struct AttentionUnits {
    pub mult: Mult8Unit,
    pub softmax: SoftmaxUnitSet,
    /// softmax output code -> `prob_format` bits
    pub requant: AcamInstance,
}

impl AttentionUnits {
    pub fn new(cfg: &AttentionHeadConfig) -> Result<Self> {
        let smx = SoftmaxConfig {
            x_format: cfg.score_format,
            max_len: cfg.seq_len.max(1),
            ..SoftmaxConfig::with_quant(cfg.quant)
        };
        let softmax = SoftmaxUnitSet::new(smx)?;
        let spec = FunctionSpec::new(FunctionKind::Identity, vec![softmax.output_coding()], cfg.prob_format.into())?;
        let requant = AcamInstance::from_table_named(&spec.table::<f64>()?, true, Some("requant"))?;
        Ok(Self { mult: Mult8Unit::new()?, softmax, requant })
    }
}

/// `softmax(Q K^T / sqrt(d_k)) V` on fixed-point codes.
pub fn attention_head(
    q: &CodeMatrix,
    k: &CodeMatrix,
    v: &CodeMatrix,
    cfg: &AttentionHeadConfig,
    units: &AttentionUnits,
) -> Result<CodeMatrix> {
    let (l, d) = (cfg.seq_len, cfg.d_k);
    if l == 0 || d == 0 {
        return Err(Error::Config("d_k and seq_len must be >= 1".into()));
    }
    for (name, m) in [("Q", q), ("K", k), ("V", v)] {
        if m.rows != l || m.cols != d {
            return Err(Error::Shape(format!("{name} is {}x{}, expected {l}x{d}", m.rows, m.cols)));
        }
        if m.format != cfg.qkv_format {
            return Err(Error::Shape(format!("{name} is {}, expected {}", m.format, cfg.qkv_format)));
        }
    }
    let fq = cfg.qkv_format.frac_bits();
    let sf = cfg.score_format;
    let pf = cfg.prob_format;
    let of = cfg.out_format;
    let scale = cfg.scale_raw();
    let out_coding = units.softmax.output_coding();
    let mut out = Vec::with_capacity(l * d);
    for i in 0..l {
        let scores: Vec<i32> = (0..l)
            .map(|j| {
                let dot: i64 =
                    q.row(i).iter().zip(k.row(j)).map(|(&a, &b)| i64::from(units.mult.raw_product(a, b))).sum();
                saturate(rescale(dot * scale, 2 * fq + 7, sf.frac_bits()), sf)
            })
            .collect();
        let probs: Vec<i32> = units
            .softmax
            .softmax_raw(&scores)?
            .into_iter()
            .map(|c| pf.bits_to_raw(units.requant.eval_unchecked(out_coding.bits_to_level(c), None)))
            .collect();
        for c in 0..d {
            let acc: i64 = (0..l).map(|j| i64::from(units.mult.raw_product(probs[j], v.get(j, c)))).sum();
            out.push(saturate(rescale(acc, pf.frac_bits() + fq, of.frac_bits()), of));
        }
    }
    CodeMatrix::from_raw(l, d, of, out)
}
