// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Cycle-level model of the five-stage attention pipeline on one core.
//!
//! A computing sequence produces one output row of one head:
//! `mvm -> matmul-1 -> div-add -> softmax -> matmul-2`. Sequences issue in
//! order; a stage starts once its predecessor is done and every resource it
//! asks for has enough free units. A stalled stage keeps its claim, so any
//! later-issued stage wanting one of the same resources waits behind it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{Coding, FixedPointFormat, PotFormat};
use crate::functions::{FunctionKind, FunctionSpec};
use crate::synthesis::{pack, synthesize, ARRAY_ROWS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub name: String,
    pub layers: u32,
    pub heads: u32,
    pub d_model: u32,
    pub d_k: u32,
    pub seq_len: u32,
    pub d_ff: u32,
}

impl ModelDims {
    pub fn preset(name: &str) -> Result<Self> {
        let (layers, heads, d_model, seq_len) = match name {
            "bert-base" => (12, 12, 768, 128),
            "bert-large" => (24, 16, 1024, 128),
            "gpt2-large" => (36, 20, 1280, 1024),
            _ => return Err(Error::Config(format!("unknown model preset {name:?}"))),
        };
        Ok(Self { name: name.into(), layers, heads, d_model, d_k: 64, seq_len, d_ff: 4 * d_model })
    }

    pub fn validate(&self) -> Result<()> {
        if [self.layers, self.heads, self.d_model, self.d_k, self.seq_len].contains(&0) {
            return Err(Error::Config(format!("model {:?} has a zero dimension", self.name)));
        }
        Ok(())
    }

    /// Computing sequences per layer (one per output row per head).
    pub fn sequences_per_layer(&self) -> u64 {
        u64::from(self.heads) * u64::from(self.seq_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Dpe,
    Multiplier,
    Exp,
    Log,
    Activation,
    MatmulAdders,
    DivAddAdders,
    SoftmaxAdders,
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Resource::Dpe => "dpe",
            Resource::Multiplier => "multiplier",
            Resource::Exp => "exp",
            Resource::Log => "log",
            Resource::Activation => "activation",
            Resource::MatmulAdders => "matmul_adders",
            Resource::DivAddAdders => "div_add_adders",
            Resource::SoftmaxAdders => "softmax_adders",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Mvm,
    Matmul1,
    DivAdd,
    Softmax,
    Matmul2,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Mvm, Stage::Matmul1, Stage::DivAdd, Stage::Softmax, Stage::Matmul2];

    pub fn lane(&self) -> &'static str {
        match self {
            Stage::Mvm => "dpe",
            Stage::DivAdd => "adder",
            _ => "gce",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Mvm => "mvm",
            Stage::Matmul1 => "matmul-1",
            Stage::DivAdd => "div-add",
            Stage::Softmax => "softmax",
            Stage::Matmul2 => "matmul-2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyConfig {
    pub acam_cycles: u64,
    pub adder_cycles: u64,
    pub input_bits: u64,
    /// Columns sharing one ADC.
    pub adc_mux: u64,
    /// Conversions per read (two for the folded ADC).
    pub adc_passes: u64,
    pub crossbar_rows: u64,
    pub crossbar_cols: u64,
    pub weight_slices: u64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            acam_cycles: 1,
            adder_cycles: 1,
            input_bits: 8,
            adc_mux: 4,
            adc_passes: 2,
            crossbar_rows: 128,
            crossbar_cols: 128,
            weight_slices: 4,
        }
    }
}

impl LatencyConfig {
    /// Cycles for one crossbar to take one full input vector.
    pub fn crossbar_pass(&self) -> u64 {
        self.input_bits * self.adc_mux * self.adc_passes
    }
}

/// One resource demand of a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub resource: Resource,
    pub work: u64,
    pub unit_latency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDemand {
    pub stage: Stage,
    pub demands: Vec<Demand>,
}

/// Work of one computing sequence.
pub fn computing_sequence(dims: &ModelDims, lat: &LatencyConfig) -> Vec<StageDemand> {
    let l = u64::from(dims.seq_len);
    let d = u64::from(dims.d_k);
    let tiles =
        u64::from(dims.d_model).div_ceil(lat.crossbar_rows) * (d * lat.weight_slices).div_ceil(lat.crossbar_cols);
    let acam = |resource, work| Demand { resource, work, unit_latency: lat.acam_cycles };
    let add = |resource, work| Demand { resource, work, unit_latency: lat.adder_cycles };
    // an 8-bit product is four 4-bit products and three adds
    let mults = 4 * l * d;
    vec![
        StageDemand {
            stage: Stage::Mvm,
            demands: vec![Demand { resource: Resource::Dpe, work: tiles, unit_latency: lat.crossbar_pass() }],
        },
        StageDemand {
            stage: Stage::Matmul1,
            demands: vec![acam(Resource::Multiplier, mults), add(Resource::MatmulAdders, 3 * l * d + l * (d - 1))],
        },
        StageDemand { stage: Stage::DivAdd, demands: vec![add(Resource::DivAddAdders, 2 * l)] },
        StageDemand {
            stage: Stage::Softmax,
            demands: vec![acam(Resource::Exp, 2 * l), acam(Resource::Log, 1), add(Resource::SoftmaxAdders, 2 * l - 1)],
        },
        StageDemand {
            stage: Stage::Matmul2,
            demands: vec![acam(Resource::Multiplier, mults), add(Resource::MatmulAdders, 3 * l * d + d * (l - 1))],
        },
    ]
}

/// Rows each unit kind occupies once synthesized and packed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRows {
    pub multiplier: u64,
    pub exp: u64,
    pub log: u64,
    pub activation: u64,
}

impl UnitRows {
    /// Synthesizes the GCE operators: the 4-bit multiplier, the softmax exp
    /// and log, and the 8-bit GeLU, all Gray-encoded.
    pub fn derive() -> Result<Self> {
        let f = |s: &str| s.parse::<FixedPointFormat>();
        let rows = |spec: FunctionSpec| -> Result<u64> {
            let layout = pack(&synthesize(&spec.table::<f64>()?, true)?)?;
            Ok(layout.allocated_rows() as u64)
        };
        let q = f("1-1-2")?;
        let x = f("1-3-4")?;
        let exp_out: Coding = PotFormat::new(8, 4, -12)?.into();
        let log_in: Coding = PotFormat::new(8, 3, -12)?.into();
        Ok(Self {
            multiplier: rows(FunctionSpec::multiply(q, q, f("1-2-1")?)?)?,
            exp: rows(FunctionSpec::new(FunctionKind::Exp { scale: 1.0 }, vec![x.into()], exp_out)?)?,
            log: rows(FunctionSpec::unary(FunctionKind::Log { scale: 1.0 }, log_in, x)?)?,
            activation: rows(FunctionSpec::unary(FunctionKind::Gelu, x, x)?)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GceConfig {
    pub multipliers: u64,
    pub exp_units: u64,
    #[serde(default = "one")]
    pub log_units: u64,
    #[serde(default = "one")]
    pub activation_units: u64,
    #[serde(default = "gce_budget")]
    pub array_budget: u64,
    #[serde(default = "adc_arrays")]
    pub adc_arrays: u64,
    #[serde(default = "total_arrays")]
    pub total_arrays: u64,
}

fn one() -> u64 {
    1
}
fn gce_budget() -> u64 {
    1280
}
fn adc_arrays() -> u64 {
    256
}
fn total_arrays() -> u64 {
    1536
}

impl GceConfig {
    pub fn new(multipliers: u64, exp_units: u64) -> Self {
        Self {
            multipliers,
            exp_units,
            log_units: 1,
            activation_units: 1,
            array_budget: gce_budget(),
            adc_arrays: adc_arrays(),
            total_arrays: total_arrays(),
        }
    }

    /// The published operating point.
    pub fn operating_point() -> Self {
        Self::new(454, 16)
    }

    pub fn k(&self) -> f64 {
        self.multipliers as f64 / self.exp_units as f64
    }

    /// Arrays used when same-kind units are packed row-contiguously.
    pub fn arrays_used(&self, rows: &UnitRows) -> u64 {
        let a = ARRAY_ROWS as u64;
        [
            self.multipliers * rows.multiplier,
            self.exp_units * rows.exp,
            self.log_units * rows.log,
            self.activation_units * rows.activation,
        ]
        .iter()
        .map(|r| r.div_ceil(a))
        .sum()
    }

    pub fn check_budget(&self, rows: &UnitRows) -> Result<u64> {
        let used = self.arrays_used(rows);
        if used > self.array_budget || used + self.adc_arrays > self.total_arrays {
            return Err(Error::Budget { used: used as f64, budget: self.array_budget as u32 });
        }
        Ok(used)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdderPartition {
    pub matmul: u64,
    pub div_add: u64,
    pub softmax: u64,
}

impl Default for AdderPartition {
    fn default() -> Self {
        Self { matmul: 512, div_add: 256, softmax: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub gce: GceConfig,
    pub crossbars: u64,
    pub adders: AdderPartition,
    pub latency: LatencyConfig,
    /// Cycles between successive sequence issues.
    pub issue_interval: u64,
    pub sequences: usize,
}

impl PipelineConfig {
    pub fn new(gce: GceConfig) -> Self {
        Self {
            gce,
            crossbars: 8,
            adders: AdderPartition::default(),
            latency: LatencyConfig::default(),
            issue_interval: 0,
            sequences: 64,
        }
    }

    pub fn pools(&self) -> BTreeMap<Resource, u64> {
        BTreeMap::from([
            (Resource::Dpe, self.crossbars),
            (Resource::Multiplier, self.gce.multipliers),
            (Resource::Exp, self.gce.exp_units),
            (Resource::Log, self.gce.log_units),
            (Resource::Activation, self.gce.activation_units),
            (Resource::MatmulAdders, self.adders.matmul),
            (Resource::DivAddAdders, self.adders.div_add),
            (Resource::SoftmaxAdders, self.adders.softmax),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub sequence: usize,
    pub stage: Stage,
    pub start: u64,
    pub end: u64,
    /// (resource, units held, work done)
    pub units: Vec<(Resource, u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stall {
    pub sequence: usize,
    pub stage: Stage,
    pub resource: Resource,
    pub ready: u64,
    pub start: u64,
}

impl Stall {
    pub fn cycles(&self) -> u64 {
        self.start - self.ready
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub records: Vec<StageRecord>,
    pub stalls: Vec<Stall>,
    pub makespan: u64,
}

impl PipelineTrace {
    pub fn sequences(&self) -> usize {
        self.records.iter().map(|r| r.sequence + 1).max().unwrap_or(0)
    }

    /// (start of first stage, end of last stage) per sequence.
    pub fn spans(&self) -> Vec<(u64, u64)> {
        let mut out = vec![(u64::MAX, 0); self.sequences()];
        for r in &self.records {
            let s = &mut out[r.sequence];
            s.0 = s.0.min(r.start);
            s.1 = s.1.max(r.end);
        }
        out
    }

    /// Sequences completed per cycle.
    pub fn throughput(&self) -> f64 {
        if self.makespan == 0 {
            0.0
        } else {
            self.sequences() as f64 / self.makespan as f64
        }
    }

    /// Highest number of units of `res` held in any cycle.
    pub fn peak_usage(&self, res: Resource) -> u64 {
        let mut events: Vec<(u64, i64)> = Vec::new();
        for r in &self.records {
            for &(rr, n, _) in &r.units {
                if rr == res {
                    events.push((r.start, n as i64));
                    events.push((r.end, -(n as i64)));
                }
            }
        }
        // releases before acquisitions at the same cycle
        events.sort_by_key(|&(t, d)| (t, d));
        let (mut cur, mut peak) = (0i64, 0i64);
        for (_, d) in events {
            cur += d;
            peak = peak.max(cur);
        }
        peak as u64
    }

    pub fn work_done(&self, res: Resource) -> u64 {
        self.records.iter().flat_map(|r| &r.units).filter(|u| u.0 == res).map(|u| u.2).sum()
    }

    /// One line per stage: `start,end,lane,sequence,stage`.
    pub fn write_intervals_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["start", "end", "lane", "sequence", "stage"])?;
        for r in &self.records {
            out.write_record([
                r.start.to_string(),
                r.end.to_string(),
                r.stage.lane().to_string(),
                r.sequence.to_string(),
                r.stage.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_stalls_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sequence", "stage", "resource", "ready", "start"])?;
        for s in &self.stalls {
            out.write_record([
                s.sequence.to_string(),
                s.stage.to_string(),
                s.resource.to_string(),
                s.ready.to_string(),
                s.start.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// One line per busy cycle per stage: `cycle,lane,sequence,stage`.
    pub fn write_cycles_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut rows: Vec<(u64, &str, usize, Stage)> = self
            .records
            .iter()
            .flat_map(|r| (r.start..r.end).map(move |c| (c, r.stage.lane(), r.sequence, r.stage)))
            .collect();
        rows.sort();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["cycle", "lane", "sequence", "stage"])?;
        for (c, lane, s, st) in rows {
            out.write_record([c.to_string(), lane.to_string(), s.to_string(), st.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn stage_plan(sd: &StageDemand, pools: &BTreeMap<Resource, u64>) -> Result<(u64, Vec<(Resource, u64, u64)>)> {
    let mut latency = 1;
    let mut units = Vec::new();
    for d in sd.demands.iter().filter(|d| d.work > 0) {
        let pool = pools.get(&d.resource).copied().unwrap_or(0);
        if pool == 0 {
            return Err(Error::Config(format!("{} needs {} but none are configured", sd.stage, d.resource)));
        }
        let alloc = pool.min(d.work);
        latency = latency.max(d.work.div_ceil(alloc) * d.unit_latency);
        units.push((d.resource, alloc, d.work));
    }
    Ok((latency, units))
}

/// Runs `n` identical sequences through the stage list.
pub fn schedule_demands(
    stages: &[StageDemand],
    pools: &BTreeMap<Resource, u64>,
    n: usize,
    issue_interval: u64,
) -> Result<PipelineTrace> {
    let plans = stages.iter().map(|s| stage_plan(s, pools)).collect::<Result<Vec<_>>>()?;
    let mut free = pools.clone();
    // per sequence: next stage index, time it became ready, running end
    let mut next = vec![0usize; n];
    let mut ready: Vec<u64> = (0..n as u64).map(|i| i * issue_interval).collect();
    let mut running: Vec<Option<(u64, usize)>> = vec![None; n];
    let mut records = Vec::new();
    let mut stalls = Vec::new();
    let mut t = 0u64;
    let mut stalled_on: Vec<Option<Resource>> = vec![None; n];
    loop {
        // retire
        for s in 0..n {
            if let Some((end, idx)) = running[s] {
                if end <= t {
                    for &(r, a, _) in &plans[idx].1 {
                        *free.get_mut(&r).expect("pool") += a;
                    }
                    running[s] = None;
                    next[s] += 1;
                    ready[s] = end;
                }
            }
        }
        // issue in order
        let mut claimed: Vec<Resource> = Vec::new();
        for s in 0..n {
            if running[s].is_some() || next[s] >= plans.len() || ready[s] > t {
                continue;
            }
            let (lat, units) = &plans[next[s]];
            let blocker = units.iter().find(|(r, a, _)| claimed.contains(r) || free[r] < *a).map(|(r, _, _)| *r);
            match blocker {
                Some(r) => {
                    stalled_on[s].get_or_insert(r);
                    claimed.extend(units.iter().map(|u| u.0));
                }
                None => {
                    for &(r, a, _) in units {
                        *free.get_mut(&r).expect("pool") -= a;
                    }
                    let stage = stages[next[s]].stage;
                    if let Some(r) = stalled_on[s].take() {
                        stalls.push(Stall { sequence: s, stage, resource: r, ready: ready[s], start: t });
                    }
                    records.push(StageRecord { sequence: s, stage, start: t, end: t + lat, units: units.clone() });
                    running[s] = Some((t + lat, next[s]));
                }
            }
        }
        let ends = running.iter().flatten().map(|&(e, _)| e);
        let readies =
            (0..n).filter(|&s| running[s].is_none() && next[s] < plans.len() && ready[s] > t).map(|s| ready[s]);
        match ends.chain(readies).min() {
            Some(nt) => t = nt,
            None => break,
        }
    }
    if next.iter().any(|&i| i < plans.len()) {
        return Err(Error::Config("schedule deadlocked".into()));
    }
    let makespan = records.iter().map(|r| r.end).max().unwrap_or(0);
    Ok(PipelineTrace { records, stalls, makespan })
}

pub fn schedule(dims: &ModelDims, cfg: &PipelineConfig, rows: &UnitRows) -> Result<PipelineTrace> {
    dims.validate()?;
    cfg.gce.check_budget(rows)?;
    let stages = computing_sequence(dims, &cfg.latency);
    schedule_demands(&stages, &cfg.pools(), cfg.sequences, cfg.issue_interval)
}

/// GeLU evaluations of one sequence's share of the feed-forward block, in cycles.
pub fn ffn_latency(dims: &ModelDims, cfg: &PipelineConfig) -> u64 {
    let evals = u64::from(dims.d_ff).div_ceil(u64::from(dims.heads));
    evals.div_ceil(cfg.gce.activation_units.max(1)) * cfg.latency.acam_cycles
}

/// Latency of one sequence running alone.
pub fn mha_latency(dims: &ModelDims, cfg: &PipelineConfig) -> Result<u64> {
    let stages = computing_sequence(dims, &cfg.latency);
    let pools = cfg.pools();
    stages.iter().map(|s| stage_plan(s, &pools).map(|p| p.0)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: f64,
    pub multipliers: u64,
    pub exp_units: u64,
    pub arrays: u64,
    pub makespan: u64,
    pub throughput: f64,
}

/// Largest exp-unit count whose `round(k * e)` multipliers still fit.
pub fn units_for_k(k: f64, base: &GceConfig, rows: &UnitRows) -> Option<GceConfig> {
    if !(k > 0.0) {
        return None;
    }
    let mut best = None;
    for e in 1..=base.array_budget * ARRAY_ROWS as u64 {
        let m = (k * e as f64).round() as u64;
        if m == 0 {
            continue;
        }
        let g = GceConfig { multipliers: m, exp_units: e, ..*base };
        if g.check_budget(rows).is_ok() {
            best = Some(g);
        } else if e as f64 * rows.exp as f64 > (base.array_budget * ARRAY_ROWS as u64) as f64 {
            break;
        }
    }
    best
}

/// Throughput per k; infeasible k values are dropped.
pub fn sweep_k(dims: &ModelDims, ks: &[f64], base: &PipelineConfig, rows: &UnitRows) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &k in ks {
        let Some(gce) = units_for_k(k, &base.gce, rows) else { continue };
        let cfg = PipelineConfig { gce, ..*base };
        let trace = schedule(dims, &cfg, rows)?;
        out.push(SweepPoint {
            k,
            multipliers: gce.multipliers,
            exp_units: gce.exp_units,
            arrays: gce.arrays_used(rows),
            makespan: trace.makespan,
            throughput: trace.throughput(),
        });
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "multipliers", "exp_units", "arrays", "makespan", "throughput"])?;
    for p in points {
        out.write_record([
            format!("{}", p.k),
            p.multipliers.to_string(),
            p.exp_units.to_string(),
            p.arrays.to_string(),
            p.makespan.to_string(),
            format!("{:.9}", p.throughput),
        ])?;
    }
    out.flush()?;
    Ok(())
}
