// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Truth table -> range program -> packed 4x8 arrays.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::gray_encode;
use crate::functions::TruthTable;

pub const ARRAY_ROWS: usize = 4;
pub const ARRAY_COLS: usize = 8;
pub const GROUP_ARRAYS: usize = 16;
/// Most cells a single output bit may occupy (one group's worth of match-line fan-in).
pub const MAX_CELLS_PER_BIT: usize = 128;

/// Half-open level interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u32; 2]", into = "[u32; 2]")]
pub struct Span {
    pub lo: u32,
    pub hi: u32,
}

impl Span {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Shape(format!("empty span [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn full(width: u32) -> Self {
        Self { lo: 0, hi: 1 << width }
    }

    pub fn len(&self) -> u32 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, level: u32) -> bool {
        self.lo <= level && level < self.hi
    }

    pub fn is_full(&self, width: u32) -> bool {
        self.lo == 0 && self.hi == 1 << width
    }
}

impl TryFrom<[u32; 2]> for Span {
    type Error = Error;
    fn try_from(v: [u32; 2]) -> Result<Self> {
        Span::new(v[0], v[1])
    }
}

impl From<Span> for [u32; 2] {
    fn from(s: Span) -> Self {
        [s.lo, s.hi]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// One ACAM cell's stored range. A full-domain span is a Don't Care side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RangeBox {
    pub x: Span,
    #[serde(default)]
    pub y: Option<Span>,
}

impl RangeBox {
    pub fn one(x: Span) -> Self {
        Self { x, y: None }
    }

    pub fn two(x: Span, y: Span) -> Self {
        Self { x, y: Some(y) }
    }

    pub fn contains(&self, x: u32, y: Option<u32>) -> bool {
        self.x.contains(x)
            && match (self.y, y) {
                (Some(s), Some(v)) => s.contains(v),
                (None, _) => true,
                (Some(_), None) => false,
            }
    }

    pub fn area(&self) -> u32 {
        self.x.len() * self.y.map_or(1, |s| s.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widths {
    pub inputs: Vec<u32>,
    pub output: u32,
}

/// Per-output-bit box lists. `bits[i]` drives output bit `i` (LSB first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeProgram {
    pub bits: Vec<Vec<RangeBox>>,
    pub encoded: bool,
    pub widths: Widths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl RangeProgram {
    pub fn arity(&self) -> usize {
        self.widths.inputs.len()
    }

    pub fn out_width(&self) -> u32 {
        self.widths.output
    }

    /// Box counts indexed by bit (LSB first).
    pub fn box_counts(&self) -> Vec<usize> {
        self.bits.iter().map(Vec::len).collect()
    }

    pub fn total_boxes(&self) -> usize {
        self.bits.iter().map(Vec::len).sum()
    }

    pub fn max_boxes(&self) -> usize {
        self.bits.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Match-line pattern before any Gray decoding.
    pub fn raw_output(&self, x: u32, y: Option<u32>) -> u32 {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, boxes)| boxes.iter().any(|b| b.contains(x, y)))
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    /// Checks structure against the declared widths.
    pub fn validate(&self) -> Result<()> {
        let arity = self.arity();
        if !(1..=2).contains(&arity) {
            return Err(Error::Arity { expected: 2, got: arity });
        }
        if self.bits.len() != self.widths.output as usize {
            return Err(Error::Shape(format!("{} bit lists for a {}-bit output", self.bits.len(), self.widths.output)));
        }
        let bound = |s: Span, w: u32| s.lo < s.hi && s.hi <= 1 << w;
        for b in self.bits.iter().flatten() {
            let ok = bound(b.x, self.widths.inputs[0])
                && match (b.y, arity) {
                    (None, 1) => true,
                    (Some(s), 2) => bound(s, self.widths.inputs[1]),
                    (None, 2) => true,
                    _ => false,
                };
            if !ok {
                return Err(Error::Shape(format!("box {b:?} outside the input domain")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

fn target_bit(table: &TruthTable, entry: u32, bit: u32, encoded: bool) -> bool {
    let v = if encoded { gray_encode(entry, table.out_width()).bits } else { entry };
    v >> bit & 1 == 1
}

/// Maximal runs of 1s in one output column.
pub fn extract_ranges_1d(table: &TruthTable, bit: u32, encoded: bool) -> Vec<RangeBox> {
    assert_eq!(table.arity(), 1, "1D extraction needs a one-input table");
    let mut out = Vec::new();
    let mut start = None;
    for (level, &e) in table.entries().iter().enumerate() {
        let on = target_bit(table, e, bit, encoded);
        match (on, start) {
            (true, None) => start = Some(level as u32),
            (false, Some(lo)) => {
                out.push(RangeBox::one(Span { lo, hi: level as u32 }));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        out.push(RangeBox::one(Span { lo, hi: table.entries().len() as u32 }));
    }
    out
}

/// Greedy rectangle cover of one output bit over the (x, y) level grid.
///
/// Each step takes the largest rectangle lying inside the 1-region that still
/// covers something new; ties go to more newly covered cells, then to the
/// smallest `(x_lo, y_lo, x_hi, y_hi)`.
pub fn cover_rectangles_2d(table: &TruthTable, bit: u32, encoded: bool) -> Vec<RangeBox> {
    assert_eq!(table.arity(), 2, "2D covering needs a two-input table");
    let nx = 1usize << table.in_widths()[0];
    let ny = 1usize << table.in_widths()[1];
    // row masks: bit y of ones[x] set when (x, y) is a 1
    let mut ones = vec![0u32; nx];
    for (x, row) in ones.iter_mut().enumerate() {
        for y in 0..ny {
            if target_bit(table, table.get(&[x as u32, y as u32]), bit, encoded) {
                *row |= 1 << y;
            }
        }
    }
    let rects = inner_rectangles(&ones, ny);
    let mut uncovered = ones.clone();
    let mut out = Vec::new();
    while uncovered.iter().any(|&r| r != 0) {
        let mut best: Option<(u32, u32, &Rect)> = None;
        for r in &rects {
            let mask = r.y_mask();
            let new: u32 = uncovered[r.x0..r.x1].iter().map(|u| (u & mask).count_ones()).sum();
            if new == 0 {
                continue;
            }
            let area = r.area();
            // rects are enumerated in (x0, y0, x1, y1) order so strict > keeps the smallest
            if best.map_or(true, |(ba, bn, _)| (area, new) > (ba, bn)) {
                best = Some((area, new, r));
            }
        }
        let (_, _, r) = best.expect("every 1 cell lies in some rectangle");
        let mask = r.y_mask();
        for u in &mut uncovered[r.x0..r.x1] {
            *u &= !mask;
        }
        out.push(RangeBox::two(Span { lo: r.x0 as u32, hi: r.x1 as u32 }, Span { lo: r.y0 as u32, hi: r.y1 as u32 }));
    }
    out
}

struct Rect {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Rect {
    fn y_mask(&self) -> u32 {
        ((1u32 << (self.y1 - self.y0)) - 1) << self.y0
    }

    fn area(&self) -> u32 {
        ((self.x1 - self.x0) * (self.y1 - self.y0)) as u32
    }
}

/// All rectangles contained in the 1-region, ordered by (x0, y0, x1, y1).
fn inner_rectangles(ones: &[u32], ny: usize) -> Vec<Rect> {
    let nx = ones.len();
    let mut out = Vec::new();
    for x0 in 0..nx {
        for y0 in 0..ny {
            if ones[x0] >> y0 & 1 == 0 {
                continue;
            }
            let mut ymax = ny;
            for x1 in x0 + 1..=nx {
                let mut y = y0;
                while y < ymax && ones[x1 - 1] >> y & 1 == 1 {
                    y += 1;
                }
                ymax = y;
                if ymax == y0 {
                    break;
                }
                out.extend((y0 + 1..=ymax).map(|y1| Rect { x0, x1, y0, y1 }));
            }
        }
    }
    out
}

pub fn synthesize(table: &TruthTable, encoded: bool) -> Result<RangeProgram> {
    synthesize_named(table, encoded, None)
}

pub fn synthesize_named(table: &TruthTable, encoded: bool, source: Option<&str>) -> Result<RangeProgram> {
    let bits = (0..table.out_width())
        .map(|bit| match table.arity() {
            1 => Ok(extract_ranges_1d(table, bit, encoded)),
            2 => Ok(cover_rectangles_2d(table, bit, encoded)),
            n => Err(Error::Arity { expected: 2, got: n }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RangeProgram {
        bits,
        encoded,
        widths: Widths { inputs: table.in_widths().to_vec(), output: table.out_width() },
        source: source.map(str::to_owned),
    })
}

/// One physical row: up to 8 cells, all for the same output bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowAssignment {
    pub bit: u32,
    pub cells: Vec<RangeBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub group: usize,
    /// `None` rows are unprogrammed (all Don't Care, never pulled down).
    pub rows: [Option<RowAssignment>; ARRAY_ROWS],
}

/// Array rows wired onto one global match line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchLine {
    pub bit: u32,
    pub group: usize,
    /// (array index, row index)
    pub rows: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedLayout {
    pub arrays: Vec<ArrayLayout>,
    pub match_lines: Vec<MatchLine>,
    pub encoded: bool,
    pub widths: Widths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl PackedLayout {
    pub fn num_arrays(&self) -> usize {
        self.arrays.len()
    }

    pub fn num_groups(&self) -> usize {
        self.arrays.last().map_or(0, |a| a.group + 1)
    }

    fn rows(&self) -> impl Iterator<Item = &RowAssignment> {
        self.arrays.iter().flat_map(|a| a.rows.iter().flatten())
    }

    pub fn used_cells(&self) -> usize {
        self.rows().map(|r| r.cells.len()).sum()
    }

    pub fn allocated_rows(&self) -> usize {
        self.rows().count()
    }

    pub fn allocated_cells(&self) -> usize {
        self.allocated_rows() * ARRAY_COLS
    }

    /// Used cells over cells in programmed rows.
    pub fn utilization(&self) -> f64 {
        match self.allocated_cells() {
            0 => 0.0,
            n => self.used_cells() as f64 / n as f64,
        }
    }

    pub fn unused_fraction(&self) -> f64 {
        if self.allocated_cells() == 0 {
            0.0
        } else {
            1.0 - self.utilization()
        }
    }

    /// Used cells over every cell of every occupied array.
    pub fn array_utilization(&self) -> f64 {
        match self.num_arrays() {
            0 => 0.0,
            n => self.used_cells() as f64 / (n * ARRAY_ROWS * ARRAY_COLS) as f64,
        }
    }

    /// Reassembles the range program held by the layout.
    pub fn to_program(&self) -> RangeProgram {
        let mut bits = vec![Vec::new(); self.widths.output as usize];
        for ml in &self.match_lines {
            for &(a, r) in &ml.rows {
                if let Some(row) = &self.arrays[a].rows[r] {
                    bits[ml.bit as usize].extend_from_slice(&row.cells);
                }
            }
        }
        RangeProgram { bits, encoded: self.encoded, widths: self.widths.clone(), source: self.source.clone() }
    }
}

/// First-fit packing, MSB first; a bit's rows never straddle two groups.
pub fn pack(program: &RangeProgram) -> Result<PackedLayout> {
    const GROUP_ROWS: usize = GROUP_ARRAYS * ARRAY_ROWS;
    let mut slots: Vec<Option<RowAssignment>> = Vec::new();
    let mut match_lines = Vec::new();
    for bit in (0..program.bits.len()).rev() {
        let boxes = &program.bits[bit];
        if boxes.len() > MAX_CELLS_PER_BIT {
            return Err(Error::Capacity { bit, boxes: boxes.len(), limit: MAX_CELLS_PER_BIT });
        }
        if boxes.is_empty() {
            continue;
        }
        let need = boxes.len().div_ceil(ARRAY_COLS);
        let mut start = slots.len();
        if start % GROUP_ROWS + need > GROUP_ROWS {
            start = start.next_multiple_of(GROUP_ROWS);
            slots.resize(start, None);
        }
        let mut rows = Vec::with_capacity(need);
        for chunk in boxes.chunks(ARRAY_COLS) {
            let r = slots.len();
            rows.push((r / ARRAY_ROWS, r % ARRAY_ROWS));
            slots.push(Some(RowAssignment { bit: bit as u32, cells: chunk.to_vec() }));
        }
        match_lines.push(MatchLine { bit: bit as u32, group: start / GROUP_ROWS, rows });
    }
    slots.resize(slots.len().next_multiple_of(ARRAY_ROWS), None);
    let arrays = slots
        .chunks(ARRAY_ROWS)
        .enumerate()
        .map(|(i, c)| ArrayLayout {
            group: i / GROUP_ARRAYS,
            rows: [c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone()],
        })
        .collect();
    Ok(PackedLayout {
        arrays,
        match_lines,
        encoded: program.encoded,
        widths: program.widths.clone(),
        source: program.source.clone(),
    })
}

/// Utilization of one rectangular array of `bits x max_boxes` cells.
pub fn monolithic_utilization(program: &RangeProgram) -> f64 {
    let cells = program.bits.len() * program.max_boxes();
    if cells == 0 {
        return 0.0;
    }
    program.total_boxes() as f64 / cells as f64
}
