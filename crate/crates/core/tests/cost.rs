// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

use acam_core::cost::reference_operators;
use acam_core::{
    chip_cost, operator_cost, pack, synthesize, AcamInstance, ArchConfig, CostMode, CostRecord, FixedPointFormat,
    FunctionKind, FunctionSpec, TruthTable,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn table_totals_within_one_percent() {
    let c = chip_cost(&ArchConfig::default());
    assert!(rel(c.core.power_mw, 35.93175) < 0.01);
    assert!(rel(c.core.area_mm2(), 0.14378) < 0.01);
    assert!(rel(c.tile.power_mw, 435.68) < 0.01);
    assert!(rel(c.tile.area_mm2(), 1.86087) < 0.01);
    assert!(rel(c.tiles.power_mw, 52_717.0) < 0.01);
    assert!(rel(c.tiles.area_mm2(), 225.16573) < 0.01);
    // chip-level components on top of the tiles
    assert!((c.chip.power_mw - (c.tiles.power_mw + 2483.0)).abs() < 1e-6);
    assert!((c.chip.area_mm2() - (c.tiles.area_mm2() + 9.3808)).abs() < 1e-9);
    // the listed chip row is reported, not recomputed
    assert_eq!(c.listed.chip_power_mw, 53_602.0);
    assert_eq!(c.power_rows()[3], ("chip", c.chip.power_mw, 53_602.0));
}

#[test]
fn aggregation_is_additive_and_linear() {
    let a = CostRecord::new(10.0, 1.0);
    let b = CostRecord::new(2.5, 0.25);
    assert_eq!(a + b, CostRecord::new(12.5, 1.25));
    assert_eq!(a * 3.0, CostRecord::new(30.0, 3.0));
    assert_eq!([a, b, a].into_iter().sum::<CostRecord>(), CostRecord::new(22.5, 2.25));
    let mut cfg = ArchConfig::default();
    let base = chip_cost(&cfg);
    cfg.cores_per_tile *= 2;
    let doubled = chip_cost(&cfg);
    assert!((doubled.tile.power_mw - base.tile.power_mw - 12.0 * base.core.power_mw).abs() < 1e-9);
    let e = CostRecord::new(70.9, 0.012).with_latency_ns(2.0);
    assert!((e.energy_nj.unwrap() - 0.024e-3).abs() < 1e-15);
}

#[test]
fn adc_operator_matches_published_figure() {
    let cfg = ArchConfig::default();
    let adc = acam_core::AdcUnit::ideal();
    let c = operator_cost(adc.identity().layout(), &cfg, CostMode::PerArray);
    // 0.10899 mm^2 over 1536 arrays
    assert!((c.area_um2 - 70.957).abs() < 1e-3);
    assert_eq!(format!("{:.1}", (c.area_um2 * 10.0).floor() / 10.0), "70.9");
    assert_eq!(format!("{:.3}", c.power_mw), "0.012");
    let (_, _, published, _) = reference_operators()[0];
    assert!((c.area_um2 - published.area_um2).abs() < 0.1);
}

#[test]
fn empty_layout_costs_nothing() {
    let t = TruthTable::from_fn(vec![4], 2, |_| 0).unwrap();
    let l = pack(&synthesize(&t, false).unwrap()).unwrap();
    assert_eq!(l.num_arrays(), 0);
    assert_eq!(operator_cost(&l, &ArchConfig::default(), CostMode::PerArray), CostRecord::default());
    assert_eq!(operator_cost(&l, &ArchConfig::default(), CostMode::PerCell), CostRecord::default());
}

#[test]
fn encoding_never_costs_more() {
    let f = |s: &str| s.parse::<FixedPointFormat>().unwrap();
    let x = f("1-3-4");
    let specs = [
        FunctionSpec::multiply(f("1-1-2"), f("1-1-2"), f("1-2-1")).unwrap(),
        FunctionSpec::multiply(f("0-4-0"), f("0-4-0"), f("0-8-0")).unwrap(),
        FunctionSpec::unary(FunctionKind::Gelu, x, x).unwrap(),
        FunctionSpec::unary(FunctionKind::Exp { scale: 1.0 }, x, f("0-4-4")).unwrap(),
        FunctionSpec::unary(FunctionKind::Log { scale: 1.0 }, f("0-8-0"), x).unwrap(),
        FunctionSpec::unary(FunctionKind::Identity, f("0-8-0"), f("0-8-0")).unwrap(),
    ];
    let cfg = ArchConfig::default();
    for spec in specs {
        let t = spec.table::<f64>().unwrap();
        let plain = AcamInstance::from_table(&t, false).unwrap();
        let gray = AcamInstance::from_table(&t, true).unwrap();
        for mode in [CostMode::PerArray, CostMode::PerCell] {
            let p = operator_cost(plain.layout(), &cfg, mode);
            let g = operator_cost(gray.layout(), &cfg, mode);
            assert!(g.area_um2 <= p.area_um2 && g.power_mw <= p.power_mw, "{:?} {mode:?}", spec.kind);
        }
    }
}

#[test]
fn per_cell_mode_is_the_calibrated_constant() {
    let cfg = ArchConfig::default();
    assert!((cfg.per_cell().area_um2 - 2.2174).abs() < 1e-3);
    let q: FixedPointFormat = "1-1-2".parse().unwrap();
    let t = FunctionSpec::multiply(q, q, "1-2-1".parse().unwrap()).unwrap().table::<f64>().unwrap();
    let l = pack(&synthesize(&t, true).unwrap()).unwrap();
    let c = operator_cost(&l, &cfg, CostMode::PerCell);
    assert!((c.area_um2 - 80.0 * cfg.per_cell().area_um2).abs() < 1e-9);
}
