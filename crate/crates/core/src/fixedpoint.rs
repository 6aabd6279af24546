// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-point formats, codes, the Gray codec and power-of-two quantization.
//!
//! Two orderings of a code exist side by side:
//!
//! * the **bit pattern** (two's complement for signed formats), which is what
//!   match lines drive and what downstream digital logic consumes;
//! * the **level**, the position of the value on the analog data line, where
//!   level 0 is the most negative representable value. For unsigned formats
//!   the two coincide; for signed formats `level = bits ^ sign_bit`.
//!
//! Keeping value-contiguous inputs level-contiguous is what lets a single
//! ACAM cell hold any value interval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{round_half_away, Real};

/// Maximum operand width of a Compute-ACAM cell.
pub const MAX_WIDTH: u32 = 8;

/// Sign-integer-fraction bit allocation (`S-I-F`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FixedPointFormat {
    sign_bits: u8,
    int_bits: u8,
    frac_bits: u8,
}

impl FixedPointFormat {
    pub fn new(sign_bits: u8, int_bits: u8, frac_bits: u8) -> Result<Self> {
        let width = u32::from(sign_bits) + u32::from(int_bits) + u32::from(frac_bits);
        if sign_bits > 1 || width == 0 || width > MAX_WIDTH {
            return Err(Error::InvalidFormat(format!("{sign_bits}-{int_bits}-{frac_bits}")));
        }
        Ok(Self { sign_bits, int_bits, frac_bits })
    }

    /// Unsigned integer format of `width` bits (`0-width-0`).
    pub fn unsigned(width: u8) -> Result<Self> {
        Self::new(0, width, 0)
    }

    pub fn signed(&self) -> bool {
        self.sign_bits == 1
    }

    pub fn int_bits(&self) -> u32 {
        u32::from(self.int_bits)
    }

    pub fn frac_bits(&self) -> u32 {
        u32::from(self.frac_bits)
    }

    pub fn width(&self) -> u32 {
        u32::from(self.sign_bits) + self.int_bits() + self.frac_bits()
    }

    pub fn levels(&self) -> u32 {
        1 << self.width()
    }

    fn mask(&self) -> u32 {
        self.levels() - 1
    }

    pub fn min_raw(&self) -> i32 {
        if self.signed() {
            -(1 << (self.width() - 1))
        } else {
            0
        }
    }

    pub fn max_raw(&self) -> i32 {
        self.min_raw() + self.mask() as i32
    }

    pub fn step<T: Real>(&self) -> T {
        T::lit(2f64.powi(-(self.frac_bits() as i32)))
    }

    pub fn min_value<T: Real>(&self) -> T {
        self.raw_to_value(self.min_raw())
    }

    pub fn max_value<T: Real>(&self) -> T {
        self.raw_to_value(self.max_raw())
    }

    pub fn raw_to_value<T: Real>(&self, raw: i32) -> T {
        T::lit(f64::from(raw)) * self.step::<T>()
    }

    pub fn level_to_raw(&self, level: u32) -> i32 {
        debug_assert!(level < self.levels());
        level as i32 + self.min_raw()
    }

    pub fn raw_to_level(&self, raw: i32) -> u32 {
        debug_assert!((self.min_raw()..=self.max_raw()).contains(&raw));
        (raw - self.min_raw()) as u32
    }

    /// Two's-complement bit pattern of a level.
    pub fn level_to_bits(&self, level: u32) -> u32 {
        (self.level_to_raw(level) as u32) & self.mask()
    }

    pub fn bits_to_level(&self, bits: u32) -> u32 {
        self.raw_to_level(self.bits_to_raw(bits))
    }

    pub fn bits_to_raw(&self, bits: u32) -> i32 {
        let bits = bits & self.mask();
        if self.signed() && bits >> (self.width() - 1) == 1 {
            bits as i32 - self.levels() as i32
        } else {
            bits as i32
        }
    }

    /// Nearest representable integer mantissa, rounding half away from zero
    /// and saturating at the format bounds. NaN maps to zero.
    pub fn quantize_raw<T: Real>(&self, x: T) -> i32 {
        if x.is_nan() {
            return 0.max(self.min_raw());
        }
        let scaled = round_half_away(x / self.step::<T>());
        let lo = T::lit(f64::from(self.min_raw()));
        let hi = T::lit(f64::from(self.max_raw()));
        scaled.max(lo).min(hi).to_i32().expect("clamped to format range")
    }

    pub fn encode<T: Real>(&self, x: T) -> FixedCode {
        FixedCode::from_raw(*self, self.quantize_raw(x))
    }

    pub fn code_from_level(&self, level: u32) -> FixedCode {
        FixedCode::from_level(*self, level)
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.sign_bits, self.int_bits, self.frac_bits)
    }
}

impl FromStr for FixedPointFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidFormat(s.to_string()));
        }
        let mut v = [0u8; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| Error::InvalidFormat(s.to_string()))?;
        }
        Self::new(v[0], v[1], v[2])
    }
}

impl TryFrom<String> for FixedPointFormat {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FixedPointFormat> for String {
    fn from(f: FixedPointFormat) -> String {
        f.to_string()
    }
}

/// An integer code together with the format that gives it meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedCode {
    format: FixedPointFormat,
    bits: u32,
}

impl FixedCode {
    pub fn from_bits(format: FixedPointFormat, bits: u32) -> Self {
        Self { format, bits: bits & format.mask() }
    }

    pub fn from_level(format: FixedPointFormat, level: u32) -> Self {
        Self::from_bits(format, format.level_to_bits(level))
    }

    /// Saturates `raw` into the format range.
    pub fn from_raw(format: FixedPointFormat, raw: i32) -> Self {
        let raw = raw.clamp(format.min_raw(), format.max_raw());
        Self::from_bits(format, raw as u32)
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn level(&self) -> u32 {
        self.format.bits_to_level(self.bits)
    }

    pub fn raw(&self) -> i32 {
        self.format.bits_to_raw(self.bits)
    }

    pub fn decode<T: Real>(&self) -> T {
        self.format.raw_to_value(self.raw())
    }
}

pub fn encode_value<T: Real>(x: T, fmt: FixedPointFormat) -> FixedCode {
    fmt.encode(x)
}

pub fn decode_value<T: Real>(code: FixedCode) -> T {
    code.decode()
}

/// Reflected binary code word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GrayCode {
    pub bits: u32,
    pub width: u32,
}

pub fn gray_encode(v: u32, width: u32) -> GrayCode {
    debug_assert!(width <= 31 && v < (1 << width));
    GrayCode { bits: v ^ (v >> 1), width }
}

/// Binary bit `i` is the XOR of all Gray bits at positions `>= i`; the MSB
/// passes through unchanged.
pub fn gray_decode(g: GrayCode) -> u32 {
    let mut out = 0;
    let mut acc = 0;
    for i in (0..g.width).rev() {
        acc ^= (g.bits >> i) & 1;
        out |= acc << i;
    }
    out
}

/// Logarithmic ("power-of-two") code.
///
/// Code 0 is reserved for exact zero. Code `k >= 1` stands for
/// `2^(min_exp + (k - 1) / 2^exp_frac_bits)`, so with `exp_frac_bits = 0`
/// every non-zero code is an exact power of two and the code is simply an
/// offset exponent. Codes are monotone in value, so for this coding the
/// data-line level and the bit pattern are the same number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PotFormat {
    width: u8,
    exp_frac_bits: u8,
    min_exp: i32,
}

impl PotFormat {
    pub fn new(width: u8, exp_frac_bits: u8, min_exp: i32) -> Result<Self> {
        if width == 0 || u32::from(width) > MAX_WIDTH || exp_frac_bits > 7 {
            return Err(Error::InvalidFormat(format!("pot:{width}:{exp_frac_bits}:{min_exp}")));
        }
        Ok(Self { width, exp_frac_bits, min_exp })
    }

    pub fn width(&self) -> u32 {
        u32::from(self.width)
    }

    pub fn levels(&self) -> u32 {
        1 << self.width()
    }

    pub fn exp_frac_bits(&self) -> u32 {
        u32::from(self.exp_frac_bits)
    }

    pub fn min_exp(&self) -> i32 {
        self.min_exp
    }

    fn exp_scale(&self) -> i32 {
        1 << self.exp_frac_bits
    }

    /// Exponent of the largest code.
    pub fn max_exp<T: Real>(&self) -> T {
        self.exponent(self.levels() - 1)
    }

    fn exponent<T: Real>(&self, code: u32) -> T {
        let steps = self.min_exp * self.exp_scale() + code as i32 - 1;
        T::lit(f64::from(steps)) / T::lit(f64::from(self.exp_scale()))
    }

    pub fn decode<T: Real>(&self, code: u32) -> T {
        if code == 0 {
            T::zero()
        } else {
            T::lit(2.0).powf(self.exponent(code))
        }
    }

    /// Nearest code in the log domain, clamped to `[2^min_exp, max]`.
    pub fn quantize<T: Real>(&self, x: T) -> u32 {
        if x.is_nan() || x <= T::zero() {
            return 0;
        }
        let scaled = round_half_away(x.log2() * T::lit(f64::from(self.exp_scale())));
        let lo = T::lit(f64::from(self.min_exp * self.exp_scale()));
        let hi = lo + T::lit(f64::from(self.levels() - 2));
        let steps = scaled.max(lo).min(hi) - lo;
        steps.to_u32().expect("clamped") + 1
    }
}

impl fmt::Display for PotFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pot:{}:{}:{}", self.width, self.exp_frac_bits, self.min_exp)
    }
}

impl FromStr for PotFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidFormat(s.to_string());
        let rest = s.trim().strip_prefix("pot:").ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let width = parts[0].parse().map_err(|_| bad())?;
        let frac = parts[1].parse().map_err(|_| bad())?;
        let min_exp = parts[2].parse().map_err(|_| bad())?;
        Self::new(width, frac, min_exp)
    }
}

/// A power-of-two quantized value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PotCode {
    pub format: PotFormat,
    pub code: u32,
}

impl PotCode {
    pub fn is_zero(&self) -> bool {
        self.code == 0
    }

    pub fn decode<T: Real>(&self) -> T {
        self.format.decode(self.code)
    }
}

/// Nearest power of two in the log domain, clamped to `[2^min_exp, max]`;
/// zero maps to the reserved zero code.
pub fn quantize_pot<T: Real>(x: T, format: PotFormat) -> PotCode {
    PotCode { format, code: format.quantize(x) }
}

/// How a value is carried on a data line or produced on match lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coding {
    Fixed { format: FixedPointFormat },
    Pot { format: PotFormat },
}

impl Coding {
    pub fn fixed(format: FixedPointFormat) -> Self {
        Coding::Fixed { format }
    }

    pub fn pot(format: PotFormat) -> Self {
        Coding::Pot { format }
    }

    pub fn width(&self) -> u32 {
        match self {
            Coding::Fixed { format } => format.width(),
            Coding::Pot { format } => format.width(),
        }
    }

    pub fn levels(&self) -> u32 {
        1 << self.width()
    }

    pub fn level_to_bits(&self, level: u32) -> u32 {
        match self {
            Coding::Fixed { format } => format.level_to_bits(level),
            Coding::Pot { .. } => level,
        }
    }

    pub fn bits_to_level(&self, bits: u32) -> u32 {
        match self {
            Coding::Fixed { format } => format.bits_to_level(bits),
            Coding::Pot { .. } => bits,
        }
    }

    pub fn decode_level<T: Real>(&self, level: u32) -> T {
        match self {
            Coding::Fixed { format } => format.raw_to_value(format.level_to_raw(level)),
            Coding::Pot { format } => format.decode(level),
        }
    }

    pub fn decode_bits<T: Real>(&self, bits: u32) -> T {
        self.decode_level(self.bits_to_level(bits))
    }

    pub fn encode_level<T: Real>(&self, x: T) -> u32 {
        match self {
            Coding::Fixed { format } => format.raw_to_level(format.quantize_raw(x)),
            Coding::Pot { format } => format.quantize(x),
        }
    }

    /// Bit pattern of the nearest representable value.
    pub fn encode_bits<T: Real>(&self, x: T) -> u32 {
        self.level_to_bits(self.encode_level(x))
    }
}

impl fmt::Display for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coding::Fixed { format } => format.fmt(f),
            Coding::Pot { format } => format.fmt(f),
        }
    }
}

impl FromStr for Coding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().starts_with("pot:") {
            Ok(Coding::pot(s.parse()?))
        } else {
            Ok(Coding::fixed(s.parse()?))
        }
    }
}

impl From<FixedPointFormat> for Coding {
    fn from(format: FixedPointFormat) -> Self {
        Coding::Fixed { format }
    }
}

impl From<PotFormat> for Coding {
    fn from(format: PotFormat) -> Self {
        Coding::Pot { format }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmt(s: &str) -> FixedPointFormat {
        s.parse().unwrap()
    }

    /// Every code of a format, sorted by decoded value (independent of the
    /// level arithmetic under test).
    fn value_sorted(f: FixedPointFormat) -> Vec<(u32, f64)> {
        let mut v: Vec<(u32, f64)> = (0..f.levels())
            .map(|bits| {
                let raw = if f.signed() && bits >= f.levels() / 2 {
                    bits as i64 - i64::from(f.levels())
                } else {
                    i64::from(bits)
                };
                (bits, raw as f64 / f64::from(1u32 << f.frac_bits()))
            })
            .collect();
        v.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        v
    }

    #[test]
    fn rejects_bad_formats() {
        assert!(FixedPointFormat::new(2, 0, 3).is_err());
        assert!(FixedPointFormat::new(0, 0, 0).is_err());
        assert!(FixedPointFormat::new(1, 4, 4).is_err());
        assert!("1-0".parse::<FixedPointFormat>().is_err());
        assert!("a-b-c".parse::<FixedPointFormat>().is_err());
        assert_eq!(fmt("1-3-4").width(), 8);
    }

    #[test]
    fn encode_1_0_3_endpoints_and_zero() {
        let f = fmt("1-0-3");
        assert_eq!(f.encode(-1.0f64).level(), 0);
        assert_eq!(f.encode(0.875f64).level(), 15);
        let sorted = value_sorted(f);
        let zero_pos = sorted.iter().position(|&(_, v)| v == 0.0).unwrap() as u32;
        assert_eq!(zero_pos, 8);
        assert_eq!(f.encode(0.0f64).level(), zero_pos);
    }

    #[test]
    fn level_order_matches_value_order() {
        for s in ["1-0-3", "1-1-2", "1-2-1", "0-4-0", "1-3-4", "0-0-8", "1-0-1"] {
            let f = fmt(s);
            for (level, (bits, value)) in value_sorted(f).into_iter().enumerate() {
                assert_eq!(f.bits_to_level(bits), level as u32, "{s}");
                assert_eq!(f.level_to_bits(level as u32), bits, "{s}");
                assert_eq!(FixedCode::from_level(f, level as u32).decode::<f64>(), value);
            }
        }
    }

    #[test]
    fn decode_examples() {
        assert_eq!(FixedCode::from_level(fmt("1-0-3"), 0).decode::<f64>(), -1.0);
        assert_eq!(FixedCode::from_level(fmt("1-2-1"), 15).decode::<f64>(), 3.5);
        let f = fmt("1-1-2");
        for level in 0..f.levels() {
            let x: f64 = FixedCode::from_level(f, level).decode();
            assert_eq!(decode_value::<f64>(encode_value(x, f)), x);
        }
    }

    #[test]
    fn encode_rounds_half_away_and_saturates() {
        let f = fmt("1-0-3");
        assert_eq!(f.encode(0.0625f64).decode::<f64>(), 0.125);
        assert_eq!(f.encode(-0.0625f64).decode::<f64>(), -0.125);
        assert_eq!(f.encode(1e9f64).decode::<f64>(), 0.875);
        assert_eq!(f.encode(-1e9f64).decode::<f64>(), -1.0);
        assert_eq!(f.encode(f64::NAN).decode::<f64>(), 0.0);
        let u = fmt("0-4-0");
        assert_eq!(u.encode(-3.0f32).level(), 0);
        assert_eq!(u.encode(15.5f32).level(), 15);
    }

    #[test]
    fn gray_table() {
        // Decimal -> Gray column of the 4-bit table.
        let table = [
            0b0000, 0b0001, 0b0011, 0b0010, 0b0110, 0b0111, 0b0101, 0b0100, 0b1100, 0b1101, 0b1111, 0b1110, 0b1010,
            0b1011, 0b1001, 0b1000,
        ];
        for (v, &g) in table.iter().enumerate() {
            assert_eq!(gray_encode(v as u32, 4).bits, g);
            assert_eq!(gray_decode(GrayCode { bits: g, width: 4 }), v as u32);
        }
        assert_eq!(gray_encode(10, 4).bits, 0b1111);
        assert_eq!(gray_decode(GrayCode { bits: 0b1000, width: 4 }), 15);
    }

    #[test]
    fn pot_examples() {
        let f = PotFormat::new(8, 0, -12).unwrap();
        assert_eq!(quantize_pot(0.25f64, f).decode::<f64>(), 0.25);
        assert!(quantize_pot(0.0f64, f).is_zero());
        // |log2 0.2 + 2| = 0.32 < |log2 0.2 + 3| = 0.68
        assert_eq!(quantize_pot(0.2f64, f).decode::<f64>(), 0.25);
        assert_eq!(quantize_pot(1e-9f64, f).decode::<f64>(), 2f64.powi(-12));
        let top = quantize_pot(1e300f64, f);
        assert_eq!(top.code, 255);
        assert_eq!(top.decode::<f64>(), 2f64.powi(-12 + 254));
    }

    #[test]
    fn fractional_pot_grid() {
        let f = PotFormat::new(8, 4, -12).unwrap();
        assert_eq!(f.decode::<f64>(1), 2f64.powi(-12));
        assert_eq!(f.decode::<f64>(193), 1.0);
        assert_eq!(f.quantize(1.0f64), 193);
        assert!((f.max_exp::<f64>() - 3.875).abs() < 1e-12);
        for code in 1..f.levels() {
            let v: f64 = f.decode(code);
            assert_eq!(f.quantize(v), code);
        }
    }

    #[test]
    fn coding_roundtrip_and_parse() {
        let c: Coding = "pot:8:4:-12".parse().unwrap();
        assert_eq!(c.width(), 8);
        let d: Coding = "1-3-4".parse().unwrap();
        assert_eq!(d.encode_bits(-8.0f64), 0x80);
        assert_eq!(d.encode_level(-8.0f64), 0);
        assert_eq!(c.to_string(), "pot:8:4:-12");
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Coding>(&json).unwrap(), d);
    }
}
