// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Functional model of programmed Compute-ACAM arrays and the folded ADC.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{gray_decode, GrayCode};
use crate::functions::TruthTable;
use crate::scalar::Real;
use crate::synthesis::{pack, synthesize_named, PackedLayout, RangeBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcamMode {
    OneVar8bit,
    OneVar4bit,
    TwoVar4bit,
}

impl AcamMode {
    pub fn for_widths(inputs: &[u32]) -> Result<Self> {
        match inputs {
            [w] if *w <= 4 => Ok(AcamMode::OneVar4bit),
            [w] if *w <= 8 => Ok(AcamMode::OneVar8bit),
            [w] => Err(Error::UnsupportedWidth { what: "input", width: *w, limit: 8 }),
            [w, _] | [_, w] if *w > 4 => {
                Err(Error::UnsupportedWidth { what: "two-variable input", width: *w, limit: 4 })
            }
            [_, _] => Ok(AcamMode::TwoVar4bit),
            _ => Err(Error::Arity { expected: 2, got: inputs.len() }),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            AcamMode::TwoVar4bit => 2,
            _ => 1,
        }
    }
}

/// A packed layout ready to be searched.
#[derive(Debug, Clone, PartialEq)]
pub struct AcamInstance {
    layout: PackedLayout,
    mode: AcamMode,
    // cells gathered per output bit from the match-line wiring
    lines: Vec<Vec<RangeBox>>,
}

impl AcamInstance {
    pub fn new(layout: PackedLayout) -> Result<Self> {
        let mode = AcamMode::for_widths(&layout.widths.inputs)?;
        let program = layout.to_program();
        program.validate()?;
        Ok(Self { lines: program.bits, layout, mode })
    }

    /// Synthesize, pack and load a table in one go.
    pub fn from_table(table: &TruthTable, encoded: bool) -> Result<Self> {
        Self::from_table_named(table, encoded, None)
    }

    pub fn from_table_named(table: &TruthTable, encoded: bool, name: Option<&str>) -> Result<Self> {
        AcamMode::for_widths(table.in_widths())?;
        Self::new(pack(&synthesize_named(table, encoded, name)?)?)
    }

    pub fn layout(&self) -> &PackedLayout {
        &self.layout
    }

    pub fn mode(&self) -> AcamMode {
        self.mode
    }

    pub fn encoded(&self) -> bool {
        self.layout.encoded
    }

    pub fn in_widths(&self) -> &[u32] {
        &self.layout.widths.inputs
    }

    pub fn out_width(&self) -> u32 {
        self.layout.widths.output
    }

    fn finish(&self, raw: u32) -> u32 {
        if self.encoded() {
            gray_decode(GrayCode { bits: raw, width: self.out_width() })
        } else {
            raw
        }
    }

    fn search(&self, hit: impl Fn(&RangeBox) -> bool) -> u32 {
        let raw = self
            .lines
            .iter()
            .enumerate()
            .filter(|(_, cells)| cells.iter().any(&hit))
            .fold(0, |acc, (i, _)| acc | 1 << i);
        self.finish(raw)
    }

    /// Output bits for digital input levels.
    pub fn evaluate(&self, in1: u32, in2: Option<u32>) -> Result<u32> {
        let widths = self.in_widths();
        let got = 1 + usize::from(in2.is_some());
        if got != self.mode.arity() {
            return Err(Error::Arity { expected: self.mode.arity(), got });
        }
        for (v, &w) in [Some(in1), in2].into_iter().flatten().zip(widths) {
            if v >> w != 0 {
                return Err(Error::InputRange { value: v, width: w });
            }
        }
        Ok(self.eval_unchecked(in1, in2))
    }

    /// [`evaluate`](Self::evaluate) without arity/range checks.
    pub fn eval_unchecked(&self, in1: u32, in2: Option<u32>) -> u32 {
        self.search(|b| b.contains(in1, in2))
    }

    /// Analog search: a stored `[lo, hi)` accepts a data-line level `v` with
    /// `lo - 0.5 <= v < hi - 0.5`. Data-line levels saturate at the rails.
    pub fn evaluate_analog<T: Real>(&self, in1: T, in2: Option<T>) -> Result<u32> {
        let got = 1 + usize::from(in2.is_some());
        if got != self.mode.arity() {
            return Err(Error::Arity { expected: self.mode.arity(), got });
        }
        let clamp = |v: T, w: u32| v.max(T::zero()).min(T::lit(f64::from((1u32 << w) - 1)));
        let widths = self.in_widths();
        let x = clamp(in1, widths[0]);
        let y = in2.map(|v| clamp(v, widths[1]));
        let half = T::lit(0.5);
        let inside = |v: T, lo: u32, hi: u32| v >= T::lit(f64::from(lo)) - half && v < T::lit(f64::from(hi)) - half;
        Ok(self.search(|b| {
            inside(x, b.x.lo, b.x.hi)
                && match (b.y, y) {
                    (Some(s), Some(v)) => inside(v, s.lo, s.hi),
                    (None, _) => true,
                    (Some(_), None) => false,
                }
        }))
    }
}

/// Two-pass folded converter built on one 4-bit identity instance.
///
/// Levels are in units of the 8-bit output LSB. Pass one reads the coarse
/// nibble, the residue `a - 16 * msb` is rescaled onto the same instance for
/// the fine nibble. `noise_sigma` is added independently on each pass.
#[derive(Debug, Clone)]
pub struct AdcUnit<T: Real> {
    identity: AcamInstance,
    pub gain: T,
    pub offset: T,
    pub noise_sigma: T,
}

impl<T: Real> AdcUnit<T> {
    pub const FOLD: u32 = 16;

    pub fn new(noise_sigma: T) -> Result<Self> {
        if !(noise_sigma >= T::zero()) {
            return Err(Error::Config(format!("noise sigma {noise_sigma} must be >= 0")));
        }
        let table = TruthTable::from_fn(vec![4], 4, |l| l[0])?;
        let identity = AcamInstance::from_table_named(&table, false, Some("identity4"))?;
        Ok(Self { identity, gain: T::one(), offset: T::zero(), noise_sigma })
    }

    pub fn ideal() -> Self {
        Self::new(T::zero()).expect("zero noise is valid")
    }

    pub fn identity(&self) -> &AcamInstance {
        &self.identity
    }

    pub fn max_level(&self) -> u32 {
        Self::FOLD * Self::FOLD - 1
    }

    fn two_pass(&self, analog: T, n1: T, n2: T) -> u32 {
        let fold = T::lit(f64::from(Self::FOLD));
        let half = T::lit(0.5);
        let a = analog.max(T::zero()).min(T::lit(f64::from(self.max_level())));
        let coarse = (a + n1 + half) / fold - half;
        let msb = self.identity.evaluate_analog(coarse, None).expect("one-variable instance");
        let residue = (a - fold * T::lit(f64::from(msb))) * self.gain + self.offset + n2;
        let lsb = self.identity.evaluate_analog(residue, None).expect("one-variable instance");
        msb * Self::FOLD + lsb
    }

    /// Noise-free conversion; out-of-range inputs saturate to 0 / 255.
    pub fn convert(&self, analog: T) -> u32 {
        self.two_pass(analog, T::zero(), T::zero())
    }

    pub fn convert_noisy<R: Rng + ?Sized>(&self, analog: T, rng: &mut R) -> u32 {
        if self.noise_sigma == T::zero() {
            return self.convert(analog);
        }
        let normal = Normal::new(0.0, self.noise_sigma.as_f64()).expect("sigma checked at construction");
        let n1 = T::lit(normal.sample(rng));
        let n2 = T::lit(normal.sample(rng));
        self.two_pass(analog, n1, n2)
    }
}
