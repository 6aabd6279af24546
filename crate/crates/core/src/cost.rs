// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Area / power bookkeeping for operators and the core-tile-chip hierarchy.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::{PackedLayout, ARRAY_COLS, ARRAY_ROWS};

pub const ACAM_COMPONENT: &str = "Compute-ACAM Array";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostRecord {
    pub area_um2: f64,
    pub power_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_nj: Option<f64>,
}

impl CostRecord {
    pub fn new(area_um2: f64, power_mw: f64) -> Self {
        Self { area_um2, power_mw, energy_nj: None }
    }

    pub fn from_mm2(area_mm2: f64, power_mw: f64) -> Self {
        Self::new(area_mm2 * 1e6, power_mw)
    }

    pub fn area_mm2(&self) -> f64 {
        self.area_um2 * 1e-6
    }

    /// Attach energy for one invocation lasting `latency_ns`.
    pub fn with_latency_ns(mut self, latency_ns: f64) -> Self {
        // mW * ns = pJ
        self.energy_nj = Some(self.power_mw * latency_ns * 1e-3);
        self
    }
}

impl Add for CostRecord {
    type Output = CostRecord;
    fn add(self, o: CostRecord) -> CostRecord {
        let energy_nj = match (self.energy_nj, o.energy_nj) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0) + b.unwrap_or(0.0)),
        };
        CostRecord { area_um2: self.area_um2 + o.area_um2, power_mw: self.power_mw + o.power_mw, energy_nj }
    }
}

impl Mul<f64> for CostRecord {
    type Output = CostRecord;
    fn mul(self, k: f64) -> CostRecord {
        CostRecord {
            area_um2: self.area_um2 * k,
            power_mw: self.power_mw * k,
            energy_nj: self.energy_nj.map(|e| e * k),
        }
    }
}

impl std::iter::Sum for CostRecord {
    fn sum<I: Iterator<Item = CostRecord>>(iter: I) -> Self {
        iter.fold(CostRecord::default(), Add::add)
    }
}

/// One table row: totals for all `count` instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub count: u32,
    pub power_mw: f64,
    pub area_mm2: f64,
    /// Fraction charged to one owner (a router shared by four tiles is 0.25).
    #[serde(default = "one")]
    pub share: f64,
}

fn one() -> f64 {
    1.0
}

impl Component {
    fn new(name: &str, count: u32, power_mw: f64, area_mm2: f64) -> Self {
        Self { name: name.into(), count, power_mw, area_mm2, share: 1.0 }
    }

    pub fn cost(&self) -> CostRecord {
        CostRecord::from_mm2(self.area_mm2, self.power_mw) * self.share
    }
}

/// Totals printed in the reference table, kept for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListedTotals {
    pub core_power_mw: f64,
    pub core_area_mm2: f64,
    pub tile_power_mw: f64,
    pub tile_area_mm2: f64,
    pub tiles_power_mw: f64,
    pub tiles_area_mm2: f64,
    pub chip_power_mw: f64,
    pub chip_area_mm2: f64,
}

impl Default for ListedTotals {
    fn default() -> Self {
        Self {
            core_power_mw: 35.93175,
            core_area_mm2: 0.14378,
            tile_power_mw: 435.68,
            tile_area_mm2: 1.86087,
            tiles_power_mw: 52_717.0,
            tiles_area_mm2: 225.16573,
            chip_power_mw: 53_602.0,
            chip_area_mm2: 203.17369,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub core: Vec<Component>,
    pub cores_per_tile: u32,
    pub tile: Vec<Component>,
    pub tiles_per_chip: u32,
    pub chip: Vec<Component>,
    pub gce_arrays: u32,
    pub adc_arrays: u32,
    pub adders_per_core: u32,
    pub crossbars_per_core: u32,
    pub listed: ListedTotals,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let mut router = Component::new("Router", 1, 10.03087, 0.06191);
        router.share = 0.25;
        Self {
            core: vec![
                Component::new("DAC", 8 * 128, 0.95532, 0.00006),
                Component::new("S&A", 128, 0.95, 0.02064),
                Component::new("Memristor Array", 8, 2.4, 0.0002),
                Component::new("Adder", 1024, 12.2281, 0.01032),
                Component::new("Register File", 1, 0.01573, 0.00122),
                Component::new("Control", 1, 0.0597, 0.00135),
                Component::new("XOR", 6144, 0.1536, 0.00098),
                Component::new(ACAM_COMPONENT, 1536, 19.16928, 0.10899),
            ],
            cores_per_tile: 12,
            tile: vec![
                Component::new("eDRAM Buffer", 1, 0.17308, 0.08001),
                Component::new("eDRAM-to-IMA bus", 384, 1.67181, 0.0369),
                router,
                Component::new("Inst Mem", 1, 0.02721, 0.0024),
                Component::new("Control", 1, 0.11941, 0.00059),
            ],
            tiles_per_chip: 121,
            chip: vec![Component::new("Hyper Tr", 4, 2483.0, 9.3808)],
            gce_arrays: 1280,
            adc_arrays: 256,
            adders_per_core: 1024,
            crossbars_per_core: 8,
            listed: ListedTotals::default(),
        }
    }
}

impl ArchConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::parse("arch config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("arch config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.core.iter().chain(&self.tile).chain(&self.chip);
        for c in all {
            if c.count == 0 || c.power_mw < 0.0 || c.area_mm2 < 0.0 || !(0.0..=1.0).contains(&c.share) {
                return Err(Error::Config(format!("component {:?} has invalid values", c.name)));
            }
        }
        if self.cores_per_tile == 0 || self.tiles_per_chip == 0 {
            return Err(Error::Config("hierarchy counts must be positive".into()));
        }
        let acam = self.acam()?;
        if self.gce_arrays + self.adc_arrays > acam.count {
            return Err(Error::Config(format!(
                "{} GCE + {} ADC arrays exceed {} per core",
                self.gce_arrays, self.adc_arrays, acam.count
            )));
        }
        Ok(())
    }

    fn acam(&self) -> Result<&Component> {
        self.core
            .iter()
            .find(|c| c.name == ACAM_COMPONENT)
            .ok_or_else(|| Error::Config(format!("no {ACAM_COMPONENT:?} component")))
    }

    pub fn acam_arrays(&self) -> u32 {
        self.acam().map_or(0, |c| c.count)
    }

    /// Area and power of one 4x8 array.
    pub fn per_array(&self) -> CostRecord {
        self.acam().map_or(CostRecord::default(), |c| c.cost() * (1.0 / f64::from(c.count)))
    }

    pub fn per_cell(&self) -> CostRecord {
        self.per_array() * (1.0 / (ARRAY_ROWS * ARRAY_COLS) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Whole arrays.
    #[default]
    PerArray,
    /// Only cells in programmed rows; a calibration, not a measurement.
    PerCell,
}

pub fn operator_cost(layout: &PackedLayout, cfg: &ArchConfig, mode: CostMode) -> CostRecord {
    match mode {
        CostMode::PerArray => cfg.per_array() * layout.num_arrays() as f64,
        CostMode::PerCell => cfg.per_cell() * layout.allocated_cells() as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipCost {
    pub core: CostRecord,
    pub tile: CostRecord,
    /// All tiles without chip-level components.
    pub tiles: CostRecord,
    pub chip: CostRecord,
    pub listed: ListedTotals,
}

impl ChipCost {
    /// (level, computed, listed) power triples.
    pub fn power_rows(&self) -> [(&'static str, f64, f64); 4] {
        let l = &self.listed;
        [
            ("core", self.core.power_mw, l.core_power_mw),
            ("tile", self.tile.power_mw, l.tile_power_mw),
            ("tiles", self.tiles.power_mw, l.tiles_power_mw),
            ("chip", self.chip.power_mw, l.chip_power_mw),
        ]
    }

    pub fn area_rows(&self) -> [(&'static str, f64, f64); 4] {
        let l = &self.listed;
        [
            ("core", self.core.area_mm2(), l.core_area_mm2),
            ("tile", self.tile.area_mm2(), l.tile_area_mm2),
            ("tiles", self.tiles.area_mm2(), l.tiles_area_mm2),
            ("chip", self.chip.area_mm2(), l.chip_area_mm2),
        ]
    }
}

pub fn chip_cost(cfg: &ArchConfig) -> ChipCost {
    let core: CostRecord = cfg.core.iter().map(Component::cost).sum();
    let tile = core * f64::from(cfg.cores_per_tile) + cfg.tile.iter().map(Component::cost).sum();
    let tiles = tile * f64::from(cfg.tiles_per_chip);
    let chip = tiles + cfg.chip.iter().map(Component::cost).sum();
    ChipCost { core, tile, tiles, chip, listed: cfg.listed }
}

/// Published operator figures: (name, encoded, ACAM cost, CMOS cost).
pub fn reference_operators() -> Vec<(&'static str, bool, CostRecord, CostRecord)> {
    let c = CostRecord::new;
    vec![
        ("adc4", false, c(70.9, 0.012), c(116.0, 0.113)),
        ("adc4", true, c(70.9, 0.012), c(116.0, 0.113)),
        ("mult4", false, c(301.0, 0.053), c(1104.0, 0.00225)),
        ("mult4", true, c(195.0, 0.034), c(1104.0, 0.00225)),
        ("gelu8", false, c(443.0, 0.078), c(1054.0, 0.334)),
        ("gelu8", true, c(337.0, 0.059), c(1054.0, 0.334)),
        ("softmax8", false, c(648.0, 0.124), c(1131.0, 0.077)),
        ("softmax8", true, c(506.0, 0.099), c(1131.0, 0.077)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_array_constants() {
        let a = ArchConfig::default().per_array();
        assert!((a.area_um2 - 108_990.0 / 1536.0).abs() < 1e-9);
        // the published figure truncates 70.957 to one decimal
        assert_eq!((a.area_um2 * 10.0).floor() / 10.0, 70.9);
        assert_eq!(format!("{:.3}", a.power_mw), "0.012");
    }

    #[test]
    fn hierarchy_sums() {
        let c = chip_cost(&ArchConfig::default());
        assert!((c.core.power_mw - 35.93173).abs() < 1e-9);
        assert!((c.tile.power_mw - 435.68).abs() / 435.68 < 1e-3);
        assert!((c.tiles.power_mw - 52_717.0).abs() / 52_717.0 < 1e-3);
    }

    #[test]
    fn toml_roundtrip_and_validation() {
        let cfg = ArchConfig::default();
        let s = cfg.to_toml().unwrap();
        assert_eq!(ArchConfig::from_toml(&s).unwrap(), cfg);
        assert_eq!(ArchConfig::from_toml("cores_per_tile = 6").unwrap().cores_per_tile, 6);
        assert!(ArchConfig::from_toml("gce_arrays = 2000").is_err());
    }

    #[test]
    fn record_algebra() {
        let a = CostRecord::new(1.0, 2.0).with_latency_ns(10.0);
        let b = CostRecord::new(3.0, 4.0);
        let s = a + b;
        assert_eq!((s.area_um2, s.power_mw), (4.0, 6.0));
        assert!((s.energy_nj.unwrap() - 0.02).abs() < 1e-12);
    }
}
