// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Real-valued scalar abstraction.
//!
//! Codes are always integers; anything that touches a real value (reference
//! functions, analog data-line levels, costs) is generic over [`Real`] so the
//! same model can run in `f32` or `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every value used here is finite and in range.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Gauss error function.
    fn erf(self) -> Self;
}

impl Real for f32 {
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Real for f64 {
    fn erf(self) -> Self {
        libm::erf(self)
    }
}

/// Round half away from zero.
pub fn round_half_away<T: Real>(x: T) -> T {
    // `Float::round` already rounds half-way cases away from zero.
    x.round()
}

/// Integer division of `num` by `2^shift` rounding half away from zero.
pub fn round_shift(num: i64, shift: u32) -> i64 {
    if shift == 0 {
        return num;
    }
    let half = 1i64 << (shift - 1);
    let mag = (num.unsigned_abs() as i64 + half) >> shift;
    if num < 0 {
        -mag
    } else {
        mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_shift_matches_float_rounding() {
        for num in -1000i64..=1000 {
            for shift in 0..6 {
                let expect = (num as f64 / f64::from(1u32 << shift)).round() as i64;
                assert_eq!(round_shift(num, shift), expect, "{num} >> {shift}");
            }
        }
    }

    #[test]
    fn erf_is_odd_and_bounded() {
        assert!((Real::erf(1.0f64) - 0.842_700_792_949_715).abs() < 1e-12);
        assert!((Real::erf(-1.0f32) + 0.842_700_8).abs() < 1e-6);
        assert_eq!(Real::erf(0.0f64), 0.0);
    }
}
