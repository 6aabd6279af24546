// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Bit-sliced crossbar matrix-vector multiply.
//!
//! Weights are cut into `bits_per_cell` slices across columns, inputs are
//! streamed `dac_bits` at a time over cycles, and per-cycle column sums go
//! through a readout model before shift-and-add.

use std::io::{Read, Write};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::acam::AdcUnit;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossbarConfig {
    pub rows: usize,
    pub cols: usize,
    pub bits_per_cell: u32,
    pub dac_bits: u32,
    pub weight_bits: u32,
    pub input_bits: u32,
}

impl Default for CrossbarConfig {
    fn default() -> Self {
        Self { rows: 128, cols: 128, bits_per_cell: 2, dac_bits: 1, weight_bits: 8, input_bits: 8 }
    }
}

impl CrossbarConfig {
    /// 4x4 array, 2-bit inputs, 4-bit weights.
    pub fn mini() -> Self {
        Self { rows: 4, cols: 4, bits_per_cell: 2, dac_bits: 1, weight_bits: 4, input_bits: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rows > 0
            && self.cols > 0
            && self.bits_per_cell > 0
            && self.dac_bits > 0
            && self.weight_bits <= 16
            && self.input_bits <= 16
            && self.weight_bits % self.bits_per_cell == 0
            && self.input_bits % self.dac_bits == 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent crossbar config {self:?}")))
        }
    }

    pub fn slices(&self) -> u32 {
        self.weight_bits / self.bits_per_cell
    }

    pub fn cycles(&self) -> u32 {
        self.input_bits / self.dac_bits
    }

    /// Largest possible per-cycle column sum.
    pub fn max_column_sum(&self) -> u64 {
        self.rows as u64 * ((1 << self.dac_bits) - 1) * ((1 << self.bits_per_cell) - 1)
    }
}

/// Unsigned integer matrix, row-major, entries below `2^width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub width: u32,
    pub data: Vec<u32>,
}

const BIN_MAGIC: &[u8; 4] = b"XBM1";

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, width: u32, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        if width == 0 || width > 16 {
            return Err(Error::UnsupportedWidth { what: "matrix entry", width, limit: 16 });
        }
        if let Some(&v) = data.iter().find(|&&v| v >> width != 0) {
            return Err(Error::InputRange { value: v, width });
        }
        Ok(Self { rows, cols, width, data })
    }

    pub fn zeros(rows: usize, cols: usize, width: u32) -> Self {
        Self { rows, cols, width, data: vec![0; rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
        out.write_record(["rows", "cols", "width"])?;
        out.write_record([self.rows.to_string(), self.cols.to_string(), self.width.to_string()])?;
        for r in 0..self.rows {
            out.write_record(self.data[r * self.cols..(r + 1) * self.cols].iter().map(u32::to_string))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let bad = |m: &str| Error::parse("matrix csv", m);
        let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(r);
        let mut recs = rdr.records();
        let dims = recs.next().ok_or_else(|| bad("missing dimension line"))??;
        let num = |i: usize| -> Result<usize> {
            dims.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad dimension"))
        };
        let (rows, cols, width) = (num(0)?, num(1)?, num(2)? as u32);
        let mut data = Vec::with_capacity(rows * cols);
        for rec in recs {
            let rec = rec?;
            if rec.len() != cols {
                return Err(bad("row length differs from cols"));
            }
            for s in rec.iter() {
                data.push(s.trim().parse().map_err(|_| bad("non-integer entry"))?);
            }
        }
        Self::new(rows, cols, width, data)
    }

    /// `XBM1`, then rows, cols, width as little-endian u32, then one
    /// little-endian u16 per entry.
    pub fn write_bin<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BIN_MAGIC)?;
        for v in [self.rows as u32, self.cols as u32, self.width] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &self.data {
            w.write_all(&(v as u16).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_bin<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BIN_MAGIC {
            return Err(Error::parse("matrix binary", "bad magic"));
        }
        let mut word = [0u8; 4];
        let mut hdr = [0u32; 3];
        for h in &mut hdr {
            r.read_exact(&mut word)?;
            *h = u32::from_le_bytes(word);
        }
        let n = hdr[0] as usize * hdr[1] as usize;
        let mut bytes = vec![0u8; n * 2];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(2).map(|b| u32::from(u16::from_le_bytes([b[0], b[1]]))).collect();
        Self::new(hdr[0] as usize, hdr[1] as usize, hdr[2], data)
    }
}

/// Weight planes, most significant slice first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicedWeights {
    pub rows: usize,
    pub cols: usize,
    pub slices: Vec<Vec<u8>>,
    pub shifts: Vec<u32>,
}

impl SlicedWeights {
    pub fn reconstruct(&self) -> Vec<u32> {
        (0..self.rows * self.cols)
            .map(|i| self.slices.iter().zip(&self.shifts).map(|(s, &sh)| u32::from(s[i]) << sh).sum())
            .collect()
    }
}

/// `W` is `rows` (inputs) x `cols` (outputs).
pub fn program_weights(w: &IntMatrix, cfg: &CrossbarConfig) -> Result<SlicedWeights> {
    cfg.validate()?;
    if w.rows > cfg.rows || w.cols > cfg.cols {
        return Err(Error::Shape(format!("{}x{} weights exceed a {}x{} crossbar", w.rows, w.cols, cfg.rows, cfg.cols)));
    }
    if let Some(&v) = w.data.iter().find(|&&v| v >> cfg.weight_bits != 0) {
        return Err(Error::InputRange { value: v, width: cfg.weight_bits });
    }
    let mask = (1u32 << cfg.bits_per_cell) - 1;
    let shifts: Vec<u32> = (0..cfg.slices()).rev().map(|s| s * cfg.bits_per_cell).collect();
    let slices = shifts.iter().map(|&sh| w.data.iter().map(|&v| ((v >> sh) & mask) as u8).collect()).collect();
    Ok(SlicedWeights { rows: w.rows, cols: w.cols, slices, shifts })
}

/// How per-cycle column sums are digitized.
pub enum Readout<'a, T: Real> {
    Ideal,
    /// `gain` maps a column sum onto ADC levels; codes are divided back by it.
    Adc {
        unit: &'a AdcUnit<T>,
        gain: T,
        rng: Option<&'a mut dyn RngCore>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvmResult<T> {
    pub y: Vec<T>,
    /// Column reads whose analog value exceeded the ADC range.
    pub saturated: usize,
    /// Worst-case absolute error of `y` against the exact product when no read saturates.
    pub error_bound: T,
}

fn check_inputs(slices: &SlicedWeights, x: &[u32], cfg: &CrossbarConfig) -> Result<()> {
    if x.len() != slices.rows {
        return Err(Error::Shape(format!("input length {} for {} rows", x.len(), slices.rows)));
    }
    if let Some(&v) = x.iter().find(|&&v| v >> cfg.input_bits != 0) {
        return Err(Error::InputRange { value: v, width: cfg.input_bits });
    }
    Ok(())
}

/// Per-cycle, per-slice column sums: `visit(cycle, slice, col, sum)`.
fn column_sums(slices: &SlicedWeights, x: &[u32], cfg: &CrossbarConfig, mut visit: impl FnMut(u32, usize, usize, u64)) {
    let dmask = (1u32 << cfg.dac_bits) - 1;
    for t in 0..cfg.cycles() {
        let xb: Vec<u64> = x.iter().map(|&v| u64::from((v >> (t * cfg.dac_bits)) & dmask)).collect();
        for (s, plane) in slices.slices.iter().enumerate() {
            for c in 0..slices.cols {
                let sum = xb
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b != 0)
                    .map(|(r, &b)| b * u64::from(plane[r * slices.cols + c]))
                    .sum();
                visit(t, s, c, sum);
            }
        }
    }
}

/// Shift-and-add with an exact digital readout.
pub fn mvm_exact(slices: &SlicedWeights, x: &[u32], cfg: &CrossbarConfig) -> Result<Vec<i64>> {
    check_inputs(slices, x, cfg)?;
    let mut y = vec![0i64; slices.cols];
    column_sums(slices, x, cfg, |t, s, c, sum| {
        y[c] += (sum as i64) << (t * cfg.dac_bits + slices.shifts[s]);
    });
    Ok(y)
}

pub fn mvm<T: Real>(
    slices: &SlicedWeights,
    x: &[u32],
    cfg: &CrossbarConfig,
    readout: Readout<'_, T>,
) -> Result<MvmResult<T>> {
    match readout {
        Readout::Ideal => {
            let y = mvm_exact(slices, x, cfg)?.into_iter().map(|v| T::lit(v as f64)).collect();
            Ok(MvmResult { y, saturated: 0, error_bound: T::zero() })
        }
        Readout::Adc { unit, gain, mut rng } => {
            check_inputs(slices, x, cfg)?;
            if !(gain > T::zero()) {
                return Err(Error::Config("ADC gain must be positive".into()));
            }
            let top = T::lit(f64::from(unit.max_level())) + T::lit(0.5);
            let mut y = vec![T::zero(); slices.cols];
            let mut saturated = 0;
            column_sums(slices, x, cfg, |t, s, c, sum| {
                let analog = T::lit(sum as f64) * gain;
                if analog >= top {
                    saturated += 1;
                }
                let code = match rng.as_deref_mut() {
                    Some(r) => unit.convert_noisy(analog, r),
                    None => unit.convert(analog),
                };
                let weight = T::lit(2f64.powi((t * cfg.dac_bits + slices.shifts[s]) as i32));
                y[c] = y[c] + T::lit(f64::from(code)) / gain * weight;
            });
            Ok(MvmResult { y, saturated, error_bound: adc_error_bound(cfg, gain) })
        }
    }
}

/// Half an ADC step per read, weighted by each read's shift.
pub fn adc_error_bound<T: Real>(cfg: &CrossbarConfig, gain: T) -> T {
    let total: f64 = (0..cfg.cycles())
        .flat_map(|t| (0..cfg.slices()).map(move |s| 2f64.powi((t * cfg.dac_bits + s * cfg.bits_per_cell) as i32)))
        .sum();
    T::lit(total * 0.5) / gain
}

/// Integer oracle `y = W^T x` over the unsliced weights.
pub fn matvec_reference(w: &IntMatrix, x: &[u32]) -> Vec<i64> {
    (0..w.cols).map(|c| (0..w.rows).map(|r| i64::from(w.get(r, c)) * i64::from(x[r])).sum()).collect()
}

/// Signed weights via an offset: program `W + 2^(b-1)`, then subtract
/// `2^(b-1) * sum(x)` from every output.
pub fn offset_weights(w: &[i32], rows: usize, cols: usize, weight_bits: u32) -> Result<(IntMatrix, i64)> {
    let off = 1i32 << (weight_bits - 1);
    let data = w
        .iter()
        .map(|&v| {
            if v < -off || v >= off {
                Err(Error::InputRange { value: v as u32, width: weight_bits })
            } else {
                Ok((v + off) as u32)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((IntMatrix::new(rows, cols, weight_bits, data)?, i64::from(off)))
}

pub fn offset_correct(y: &mut [i64], x: &[u32], offset: i64) {
    let sx: i64 = x.iter().map(|&v| i64::from(v)).sum();
    for v in y {
        *v -= offset * sx;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slicing_example() {
        let cfg = CrossbarConfig::default();
        let w = IntMatrix::new(1, 1, 8, vec![0b1011_0111]).unwrap();
        let s = program_weights(&w, &cfg).unwrap();
        let planes: Vec<u8> = s.slices.iter().map(|p| p[0]).collect();
        assert_eq!(planes, vec![0b10, 0b11, 0b01, 0b11]);
        assert_eq!(s.shifts, vec![6, 4, 2, 0]);
        assert_eq!(s.reconstruct(), w.data);
    }

    #[test]
    fn zero_and_identity_patterns() {
        let cfg = CrossbarConfig::mini();
        let z = program_weights(&IntMatrix::zeros(4, 4, 4), &cfg).unwrap();
        assert!(z.slices.iter().flatten().all(|&v| v == 0));
        let mut d = vec![0; 16];
        for i in 0..4 {
            d[i * 4 + i] = 3;
        }
        let s = program_weights(&IntMatrix::new(4, 4, 4, d).unwrap(), &cfg).unwrap();
        assert_eq!(mvm_exact(&s, &[1, 2, 3, 0], &cfg).unwrap(), vec![3, 6, 9, 0]);
        assert!(mvm_exact(&s, &[4, 0, 0, 0], &cfg).is_err());
    }

    #[test]
    fn adc_readout_within_bound() {
        let cfg = CrossbarConfig::mini();
        let w = IntMatrix::new(4, 4, 4, (0..16).collect()).unwrap();
        let s = program_weights(&w, &cfg).unwrap();
        let adc = AdcUnit::<f64>::ideal();
        let x = [3, 1, 2, 3];
        let r = mvm(&s, &x, &cfg, Readout::Adc { unit: &adc, gain: 0.7, rng: None }).unwrap();
        let exact = matvec_reference(&w, &x);
        assert_eq!(r.saturated, 0);
        for (a, &b) in r.y.iter().zip(&exact) {
            assert!((a - b as f64).abs() <= r.error_bound + 1e-9);
        }
        let sat = mvm(&s, &x, &cfg, Readout::Adc { unit: &adc, gain: 100.0, rng: None }).unwrap();
        assert!(sat.saturated > 0);
    }

    #[test]
    fn matrix_files_roundtrip() {
        let m = IntMatrix::new(2, 3, 8, vec![1, 2, 3, 250, 0, 7]).unwrap();
        let mut csv_buf = Vec::new();
        m.write_csv(&mut csv_buf).unwrap();
        assert!(csv_buf.starts_with(b"rows,cols,width\n2,3,8\n"));
        assert_eq!(IntMatrix::read_csv(csv_buf.as_slice()).unwrap(), m);
        let mut bin = Vec::new();
        m.write_bin(&mut bin).unwrap();
        assert_eq!(IntMatrix::read_bin(bin.as_slice()).unwrap(), m);
        assert!(IntMatrix::read_bin(&b"nope"[..]).is_err());
    }

    #[test]
    fn signed_offset() {
        let w = vec![-3, 5, 7, -8];
        let (m, off) = offset_weights(&w, 2, 2, 4).unwrap();
        let x = [2u32, 3];
        let mut y = matvec_reference(&m, &x);
        offset_correct(&mut y, &x, off);
        assert_eq!(y, vec![-3 * 2 + 7 * 3, 5 * 2 - 8 * 3]);
    }
}
