// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Reference operators and exhaustive truth-table generation.
//!
//! A [`TruthTable`] is indexed by input *levels* (data-line order) and holds
//! the output *bit pattern* each match line must produce, i.e. the two's
//! complement code for fixed-point outputs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{Coding, FixedPointFormat, MAX_WIDTH};
use crate::scalar::Real;

/// Widest operand accepted by the two-variable computing mode.
pub const MAX_WIDTH_2VAR: u32 = 4;

/// `0.5 x (1 + erf(x / sqrt 2))`
pub fn gelu<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    half * x * (T::one() + (x / T::SQRT_2()).erf())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FunctionKind {
    Identity,
    Gelu,
    /// `exp(scale * x)`
    Exp {
        scale: f64,
    },
    /// `ln(scale * x)`; non-positive inputs map to the output minimum.
    Log {
        scale: f64,
    },
    Multiply,
    /// Arbitrary map given as an explicit table.
    Table {
        table: TruthTable,
    },
}

impl FunctionKind {
    pub fn arity(&self) -> usize {
        match self {
            FunctionKind::Multiply => 2,
            FunctionKind::Table { table } => table.arity(),
            _ => 1,
        }
    }

    /// Real-valued reference. `None` marks an input outside the domain
    /// (the logarithm of a non-positive value).
    pub fn apply<T: Real>(&self, args: &[T]) -> Option<T> {
        match self {
            FunctionKind::Identity => Some(args[0]),
            FunctionKind::Gelu => Some(gelu(args[0])),
            FunctionKind::Exp { scale } => Some((T::lit(*scale) * args[0]).exp()),
            FunctionKind::Log { scale } => {
                let v = T::lit(*scale) * args[0];
                (v > T::zero()).then(|| v.ln())
            }
            FunctionKind::Multiply => Some(args[0] * args[1]),
            FunctionKind::Table { .. } => None,
        }
    }
}

/// What to compute and in which codings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    pub inputs: Vec<Coding>,
    pub output: Coding,
}

impl FunctionSpec {
    pub fn new(kind: FunctionKind, inputs: Vec<Coding>, output: Coding) -> Result<Self> {
        let spec = Self { kind, inputs, output };
        spec.validate()?;
        Ok(spec)
    }

    pub fn unary(kind: FunctionKind, input: impl Into<Coding>, output: impl Into<Coding>) -> Result<Self> {
        Self::new(kind, vec![input.into()], output.into())
    }

    pub fn multiply(x: FixedPointFormat, y: FixedPointFormat, z: FixedPointFormat) -> Result<Self> {
        Self::new(FunctionKind::Multiply, vec![x.into(), y.into()], z.into())
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    fn validate(&self) -> Result<()> {
        if self.kind.arity() != self.inputs.len() {
            return Err(Error::Arity { expected: self.kind.arity(), got: self.inputs.len() });
        }
        if let FunctionKind::Table { table } = &self.kind {
            let widths: Vec<u32> = self.inputs.iter().map(Coding::width).collect();
            if widths != table.in_widths || self.output.width() != table.out_width {
                return Err(Error::Config("table widths disagree with codings".into()));
            }
        }
        Ok(())
    }

    /// Output bit pattern for the given input levels.
    fn output_bits<T: Real>(&self, levels: &[u32]) -> u32 {
        if let FunctionKind::Table { table } = &self.kind {
            return table.get(levels);
        }
        let args: Vec<T> = self.inputs.iter().zip(levels).map(|(c, &l)| c.decode_level(l)).collect();
        match self.kind.apply(&args) {
            Some(y) => self.output.encode_bits(y),
            // log(0) := m, the smallest output value
            None => self.output.level_to_bits(0),
        }
    }

    pub fn table<T: Real>(&self) -> Result<TruthTable> {
        match self.arity() {
            1 => build_table_1var_with::<T>(self),
            2 => build_table_2var_with::<T>(self),
            n => Err(Error::Arity { expected: 2, got: n }),
        }
    }
}

/// Exhaustive input-level -> output-code map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruthTable {
    in_widths: Vec<u32>,
    out_width: u32,
    entries: Vec<u32>,
}

impl TruthTable {
    pub fn new(in_widths: Vec<u32>, out_width: u32, entries: Vec<u32>) -> Result<Self> {
        if in_widths.is_empty() || in_widths.len() > 2 {
            return Err(Error::Arity { expected: 2, got: in_widths.len() });
        }
        let limit = if in_widths.len() == 2 { MAX_WIDTH_2VAR } else { MAX_WIDTH };
        for &w in &in_widths {
            if w == 0 || w > limit {
                return Err(Error::UnsupportedWidth { what: "input", width: w, limit });
            }
        }
        if out_width == 0 || out_width > MAX_WIDTH {
            return Err(Error::UnsupportedWidth { what: "output", width: out_width, limit: MAX_WIDTH });
        }
        let total: u32 = in_widths.iter().sum();
        if entries.len() != 1 << total {
            return Err(Error::Shape(format!("{} entries for {} input combinations", entries.len(), 1u32 << total)));
        }
        if let Some(bad) = entries.iter().find(|&&e| e >> out_width != 0) {
            return Err(Error::InputRange { value: *bad, width: out_width });
        }
        Ok(Self { in_widths, out_width, entries })
    }

    pub fn from_fn(in_widths: Vec<u32>, out_width: u32, f: impl Fn(&[u32]) -> u32) -> Result<Self> {
        let total: u32 = in_widths.iter().sum();
        let entries = (0..1u32 << total)
            .map(|idx| {
                let levels = split_index(&in_widths, idx);
                f(&levels)
            })
            .collect();
        Self::new(in_widths, out_width, entries)
    }

    pub fn arity(&self) -> usize {
        self.in_widths.len()
    }

    pub fn in_widths(&self) -> &[u32] {
        &self.in_widths
    }

    pub fn out_width(&self) -> u32 {
        self.out_width
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn index(&self, levels: &[u32]) -> usize {
        match levels {
            [x] => *x as usize,
            [x, y] => ((*x as usize) << self.in_widths[1]) | *y as usize,
            _ => unreachable!("tables have one or two inputs"),
        }
    }

    pub fn get(&self, levels: &[u32]) -> u32 {
        self.entries[self.index(levels)]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
        out.write_record(["arity", "in_widths", "out_width"])?;
        let widths: Vec<String> = self.in_widths.iter().map(u32::to_string).collect();
        out.write_record([self.arity().to_string(), widths.join(";"), self.out_width.to_string()])?;
        for (idx, &e) in self.entries.iter().enumerate() {
            let mut row: Vec<String> = split_index(&self.in_widths, idx as u32).iter().map(u32::to_string).collect();
            row.push(e.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(r);
        let bad = |m: &str| Error::parse("truth table", m);
        let mut records = rdr.records();
        let meta = records.next().ok_or_else(|| bad("missing width line"))??;
        if meta.len() != 3 {
            return Err(bad("width line needs arity,in_widths,out_width"));
        }
        let arity: usize = meta[0].trim().parse().map_err(|_| bad("arity"))?;
        let in_widths = meta[1]
            .split(';')
            .map(|s| s.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("in_widths"))?;
        let out_width: u32 = meta[2].trim().parse().map_err(|_| bad("out_width"))?;
        if in_widths.len() != arity || !(1..=2).contains(&arity) {
            return Err(bad("arity does not match in_widths"));
        }
        let total: u32 = in_widths.iter().sum();
        if total > 2 * MAX_WIDTH {
            return Err(Error::UnsupportedWidth { what: "input", width: total, limit: MAX_WIDTH });
        }
        let mut entries = vec![None; 1 << total];
        for rec in records {
            let rec = rec?;
            if rec.len() != arity + 1 {
                return Err(bad("entry row has wrong column count"));
            }
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("non-integer entry"))?;
            for (&v, &w) in vals.iter().zip(&in_widths) {
                if v >> w != 0 {
                    return Err(Error::InputRange { value: v, width: w });
                }
            }
            let idx = match arity {
                1 => vals[0] as usize,
                _ => ((vals[0] as usize) << in_widths[1]) | vals[1] as usize,
            };
            if entries[idx].replace(vals[arity]).is_some() {
                return Err(bad("duplicate input combination"));
            }
        }
        let entries = entries.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| bad("incomplete table"))?;
        Self::new(in_widths, out_width, entries)
    }
}

fn split_index(in_widths: &[u32], idx: u32) -> Vec<u32> {
    match in_widths {
        [_] => vec![idx],
        [_, wy] => vec![idx >> wy, idx & ((1 << wy) - 1)],
        _ => unreachable!("tables have one or two inputs"),
    }
}

fn build_table_1var_with<T: Real>(spec: &FunctionSpec) -> Result<TruthTable> {
    if spec.arity() != 1 {
        return Err(Error::Arity { expected: 1, got: spec.arity() });
    }
    let w = spec.inputs[0].width();
    TruthTable::from_fn(vec![w], spec.output.width(), |l| spec.output_bits::<T>(l))
}

fn build_table_2var_with<T: Real>(spec: &FunctionSpec) -> Result<TruthTable> {
    if spec.arity() != 2 {
        return Err(Error::Arity { expected: 2, got: spec.arity() });
    }
    let widths: Vec<u32> = spec.inputs.iter().map(Coding::width).collect();
    TruthTable::from_fn(widths, spec.output.width(), |l| spec.output_bits::<T>(l))
}

pub fn build_table_1var(spec: &FunctionSpec) -> Result<TruthTable> {
    build_table_1var_with::<f64>(spec)
}

pub fn build_table_2var(spec: &FunctionSpec) -> Result<TruthTable> {
    build_table_2var_with::<f64>(spec)
}
