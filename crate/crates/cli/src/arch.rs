// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! `cost`, `pipeline` and `sweep-k`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use acam_core::cost::reference_operators;
use acam_core::pipeline::{ffn_latency, mha_latency, write_sweep_csv, AdderPartition, LatencyConfig, SweepPoint};
use acam_core::{
    chip_cost, operator_cost, pack, schedule, sweep_k, synthesize, ArchConfig, Coding, CostMode, CostRecord,
    FunctionSpec, GceConfig, ModelDims, PipelineConfig, UnitRows,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::manifest::Run;
use crate::synth::{function_spec, FnName};

/// The multiplier-to-exp ratio of the published operating point (454 / 16).
pub const OPERATING_K: f64 = 28.375;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Whole 4x8 arrays
    PerArray,
    /// Programmed cells only
    PerCell,
}

#[derive(Args)]
pub struct CostArgs {
    /// Architecture TOML; defaults to the built-in component table.
    #[arg(long)]
    arch: Option<PathBuf>,
    /// How operators are charged.
    #[arg(long, value_enum, default_value = "per-array")]
    mode: ModeArg,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Plot-ready CSV: section,name,computed,listed.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct LevelRow {
    level: String,
    computed: f64,
    listed: f64,
}

#[derive(Serialize)]
struct OperatorRow {
    name: String,
    encoded: bool,
    arrays: usize,
    cells: usize,
    computed: CostRecord,
    published: CostRecord,
    cmos: CostRecord,
}

#[derive(Serialize)]
struct CostReport {
    mode: String,
    power_mw: Vec<LevelRow>,
    area_mm2: Vec<LevelRow>,
    per_array: CostRecord,
    per_cell: CostRecord,
    operators: Vec<OperatorRow>,
}

/// Function units making up a published operator. The softmax row is
/// costed with the uniform 8-bit exp/log pair.
fn operator_parts(name: &str) -> Result<Vec<FunctionSpec>> {
    let c = |s: &str| s.parse::<Coding>().expect("built-in coding");
    let spec = |f, out: Option<&str>, input: Option<&str>| function_spec(f, input.map(c), None, out.map(c), 1.0, None);
    Ok(match name {
        "adc4" => vec![spec(FnName::Adc, None, None)?],
        "mult4" => vec![spec(FnName::Mult4, None, None)?],
        "gelu8" => vec![spec(FnName::Gelu, None, None)?],
        "softmax8" => vec![spec(FnName::Exp, Some("0-4-4"), None)?, spec(FnName::Log, None, Some("0-8-0"))?],
        _ => vec![],
    })
}

pub fn cost(a: &CostArgs, run: &mut Run) -> Result<()> {
    let cfg = match &a.arch {
        Some(p) => ArchConfig::from_toml(&run.read_config(p)?)?,
        None => ArchConfig::default(),
    };
    let mode = match a.mode {
        ModeArg::PerArray => CostMode::PerArray,
        ModeArg::PerCell => CostMode::PerCell,
    };
    let chip = chip_cost(&cfg);
    let rows = |r: [(&str, f64, f64); 4]| {
        r.iter().map(|&(level, computed, listed)| LevelRow { level: level.into(), computed, listed }).collect()
    };
    let mut operators = Vec::new();
    for (name, encoded, published, cmos) in reference_operators() {
        let (mut arrays, mut cells, mut computed) = (0, 0, CostRecord::default());
        for spec in operator_parts(name)? {
            let t = spec.table::<f64>()?;
            let layout = pack(&synthesize(&t, encoded)?)?;
            arrays += layout.num_arrays();
            cells += layout.allocated_cells();
            computed = computed + operator_cost(&layout, &cfg, mode);
        }
        operators.push(OperatorRow { name: name.into(), encoded, arrays, cells, computed, published, cmos });
    }
    let report = CostReport {
        mode: format!("{mode:?}"),
        power_mw: rows(chip.power_rows()),
        area_mm2: rows(chip.area_rows()),
        per_array: cfg.per_array(),
        per_cell: cfg.per_cell(),
        operators,
    };

    println!("{:<8} {:>14} {:>14} {:>12} {:>12}", "level", "power mW", "listed", "area mm2", "listed");
    for (p, ar) in report.power_mw.iter().zip(&report.area_mm2) {
        println!("{:<8} {:>14.5} {:>14.5} {:>12.5} {:>12.5}", p.level, p.computed, p.listed, ar.computed, ar.listed);
    }
    println!(
        "{:<10} {:>4} {:>7} {:>12} {:>10} {:>12} {:>10}",
        "operator", "enc", "arrays", "area um2", "published", "power mW", "published"
    );
    for o in &report.operators {
        println!(
            "{:<10} {:>4} {:>7} {:>12.1} {:>10.1} {:>12.4} {:>10.4}",
            o.name,
            if o.encoded { "yes" } else { "no" },
            o.arrays,
            o.computed.area_um2,
            o.published.area_um2,
            o.computed.power_mw,
            o.published.power_mw
        );
    }

    run.write_json(&a.out, &report)?;
    if let Some(p) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["section", "name", "computed", "listed"])?;
        for r in &report.power_mw {
            w.write_record(["power_mw", &r.level, &r.computed.to_string(), &r.listed.to_string()])?;
        }
        for r in &report.area_mm2 {
            w.write_record(["area_mm2", &r.level, &r.computed.to_string(), &r.listed.to_string()])?;
        }
        for o in &report.operators {
            let name = format!("{}{}", o.name, if o.encoded { "+enc" } else { "" });
            w.write_record([
                "op_area_um2",
                &name,
                &o.computed.area_um2.to_string(),
                &o.published.area_um2.to_string(),
            ])?;
            w.write_record([
                "op_power_mw",
                &name,
                &o.computed.power_mw.to_string(),
                &o.published.power_mw.to_string(),
            ])?;
        }
        run.write(p, &w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    }
    Ok(())
}

/// Pipeline TOML; every key is optional and overrides the operating point.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineFile {
    gce: Option<GceConfig>,
    crossbars: Option<u64>,
    adders: Option<AdderPartition>,
    latency: Option<LatencyConfig>,
    issue_interval: Option<u64>,
    sequences: Option<usize>,
}

fn parse_gce(s: &str) -> Result<(u64, u64), String> {
    let (m, e) = s.split_once(',').ok_or("expected MULTIPLIERS,EXP_UNITS")?;
    let n = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((n(m)?, n(e)?))
}

#[derive(Args)]
struct ModelOpts {
    /// Preset (bert-base, bert-large, gpt2-large) or a workload TOML.
    #[arg(long, default_value = "bert-base")]
    model: String,
    /// Pipeline TOML (gce, crossbars, adders, latency, issue_interval, sequences).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sequences to schedule; default 64.
    #[arg(long)]
    sequences: Option<usize>,
    /// Cycles between sequence issues; default 0.
    #[arg(long)]
    issue_interval: Option<u64>,
}

impl ModelOpts {
    fn load(&self, run: &mut Run, gce: Option<(u64, u64)>) -> Result<(ModelDims, PipelineConfig)> {
        let dims = match ModelDims::preset(&self.model) {
            Ok(d) => d,
            Err(_) => {
                let s = run.read_config(self.model.as_ref()).with_context(|| {
                    format!(
                        "{:?} is neither a preset (bert-base, bert-large, gpt2-large) nor a readable file",
                        self.model
                    )
                })?;
                let d: ModelDims = toml::from_str(&s).with_context(|| format!("parsing workload {}", self.model))?;
                d.validate()?;
                d
            }
        };
        let file = match &self.config {
            Some(p) => {
                let s = run.read_config(p)?;
                toml::from_str::<PipelineFile>(&s)
                    .with_context(|| format!("parsing pipeline config {}", p.display()))?
            }
            None => PipelineFile::default(),
        };
        let mut cfg = PipelineConfig::new(file.gce.unwrap_or_else(GceConfig::operating_point));
        cfg.crossbars = file.crossbars.unwrap_or(cfg.crossbars);
        cfg.adders = file.adders.unwrap_or(cfg.adders);
        cfg.latency = file.latency.unwrap_or(cfg.latency);
        cfg.issue_interval = self.issue_interval.or(file.issue_interval).unwrap_or(cfg.issue_interval);
        cfg.sequences = self.sequences.or(file.sequences).unwrap_or(cfg.sequences);
        if let Some((m, e)) = gce {
            cfg.gce.multipliers = m;
            cfg.gce.exp_units = e;
        }
        if cfg.sequences == 0 {
            bail!("at least one sequence is needed");
        }
        Ok((dims, cfg))
    }
}

#[derive(Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    opts: ModelOpts,
    /// GCE units as MULTIPLIERS,EXP_UNITS (default 454,16).
    #[arg(long, value_parser = parse_gce)]
    gce: Option<(u64, u64)>,
    /// Cycle trace CSV: cycle,lane,sequence,stage.
    #[arg(long)]
    out: PathBuf,
    /// Stage intervals CSV: start,end,lane,sequence,stage.
    #[arg(long)]
    intervals: Option<PathBuf>,
    /// Stall CSV: sequence,stage,resource,ready,start.
    #[arg(long)]
    stalls: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct PipelineSummary {
    model: ModelDims,
    config: PipelineConfig,
    unit_rows: UnitRows,
    arrays_used: u64,
    sequences: usize,
    makespan: u64,
    throughput: f64,
    single_sequence_latency: u64,
    ffn_latency: u64,
    stalls: usize,
    stall_cycles: u64,
    peak_usage: BTreeMap<String, u64>,
}

pub fn pipeline(a: &PipelineArgs, run: &mut Run) -> Result<()> {
    let (dims, cfg) = a.opts.load(run, a.gce)?;
    let rows = UnitRows::derive()?;
    let trace = schedule(&dims, &cfg, &rows)?;
    let summary = PipelineSummary {
        arrays_used: cfg.gce.arrays_used(&rows),
        sequences: cfg.sequences,
        makespan: trace.makespan,
        throughput: trace.throughput(),
        single_sequence_latency: mha_latency(&dims, &cfg)?,
        ffn_latency: ffn_latency(&dims, &cfg),
        stalls: trace.stalls.len(),
        stall_cycles: trace.stalls.iter().map(|s| s.cycles()).sum(),
        peak_usage: cfg.pools().keys().map(|&r| (r.to_string(), trace.peak_usage(r))).collect(),
        model: dims,
        config: cfg,
        unit_rows: rows,
    };
    println!(
        "{}: {} sequences, {} multipliers / {} exp units ({} arrays), makespan {} cycles, throughput {:.6} seq/cycle, {} stalls ({} cycles)",
        summary.model.name,
        summary.sequences,
        cfg.gce.multipliers,
        cfg.gce.exp_units,
        summary.arrays_used,
        summary.makespan,
        summary.throughput,
        summary.stalls,
        summary.stall_cycles
    );
    let mut buf = Vec::new();
    trace.write_cycles_csv(&mut buf)?;
    run.write(&a.out, &buf)?;
    if let Some(p) = &a.intervals {
        let mut buf = Vec::new();
        trace.write_intervals_csv(&mut buf)?;
        run.write(p, &buf)?;
    }
    if let Some(p) = &a.stalls {
        let mut buf = Vec::new();
        trace.write_stalls_csv(&mut buf)?;
        run.write(p, &buf)?;
    }
    if let Some(p) = &a.summary {
        run.write_json(p, &summary)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    opts: ModelOpts,
    /// `LO..HI` for a geometric grid, or a comma-separated list. Ranges
    /// containing the operating point always include k = 28.375.
    #[arg(long, default_value = "1..64")]
    k: String,
    /// Grid points per doubling of k.
    #[arg(long, default_value_t = 4)]
    steps_per_octave: u32,
    /// CSV: k,multipliers,exp_units,arrays,makespan,throughput.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `LO..HI` or `a,b,c`.
pub fn k_grid(spec: &str, steps_per_octave: u32) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().with_context(|| format!("bad k value {s:?}"))?;
        if !(v > 0.0 && v.is_finite()) {
            bail!("k must be positive, got {v}");
        }
        Ok(v)
    };
    let mut ks = match spec.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                bail!("empty k range {spec}");
            }
            if steps_per_octave == 0 {
                bail!("--steps-per-octave must be at least 1");
            }
            let mut v: Vec<f64> = (0..)
                .map(|i| lo * 2f64.powf(f64::from(i) / f64::from(steps_per_octave)))
                .take_while(|&k| k <= hi * (1.0 + 1e-12))
                .collect();
            if v.last().is_some_and(|&k| (k - hi).abs() > 1e-9 * hi) {
                v.push(hi);
            }
            if (lo..=hi).contains(&OPERATING_K) {
                v.push(OPERATING_K);
            }
            v
        }
        None => spec.split(',').map(num).collect::<Result<Vec<_>>>()?,
    };
    ks.sort_by(f64::total_cmp);
    ks.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    Ok(ks)
}

pub fn sweep(a: &SweepArgs, run: &mut Run) -> Result<()> {
    let (dims, base) = a.opts.load(run, None)?;
    let ks = k_grid(&a.k, a.steps_per_octave)?;
    let rows = UnitRows::derive()?;
    let pts = sweep_k(&dims, &ks, &base, &rows)?;
    if pts.is_empty() {
        bail!("no k in {} fits the GCE array budget", a.k);
    }
    let best = pts.iter().map(|p| p.throughput).fold(0.0, f64::max);
    println!("{:>10} {:>6} {:>5} {:>7} {:>9} {:>12}", "k", "mult", "exp", "arrays", "makespan", "seq/cycle");
    for p in &pts {
        println!(
            "{:>10.4} {:>6} {:>5} {:>7} {:>9} {:>12.6}{}",
            p.k,
            p.multipliers,
            p.exp_units,
            p.arrays,
            p.makespan,
            p.throughput,
            marks(p, best)
        );
    }
    let dropped = ks.len() - pts.len();
    if dropped > 0 {
        println!("{dropped} k value(s) dropped: no unit mix fits the array budget");
    }
    let mut buf = Vec::new();
    write_sweep_csv(&pts, &mut buf)?;
    run.write(&a.out, &buf)
}

fn marks(p: &SweepPoint, best: f64) -> String {
    let mut m = String::new();
    if p.throughput == best {
        m.push_str("  best");
    }
    if p.k == OPERATING_K {
        m.push_str("  operating point");
    }
    m
}
