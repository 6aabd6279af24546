// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! `synth`, `simulate` and `gce`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use acam_core::synthesis::synthesize_named;
use acam_core::{
    monolithic_utilization, pack, AcamInstance, Coding, FixedPointFormat, FunctionKind, FunctionSpec, RangeProgram,
    TruthTable,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::manifest::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FnName {
    /// 0-8-0 -> 0-8-0 unless --in/--out-format say otherwise
    Identity,
    /// 1-3-4 -> 1-3-4
    Gelu,
    /// 1-3-4 -> pot:8:4:-12
    Exp,
    /// pot:8:3:-12 -> 1-3-4
    Log,
    /// 1-1-2 x 1-1-2 -> 1-2-1
    Mult,
    /// Fixed 1-1-2 x 1-1-2 -> 1-2-1
    Mult4,
    /// Fixed 0-4-0 x 0-4-0 -> 0-8-0 (the nibble unit of the 8-bit multiplier)
    Mult4x4,
    /// Fixed 0-4-0 identity (the folded ADC instance)
    Adc,
    /// Explicit truth table from --table
    Table,
}

impl FnName {
    pub fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long = "fn", value_enum)]
    func: FnName,
    /// Input coding, e.g. 1-3-4 or pot:8:3:-12.
    #[arg(long = "in")]
    input: Option<Coding>,
    /// Second input coding for two-variable functions.
    #[arg(long)]
    in2: Option<Coding>,
    #[arg(long)]
    out_format: Option<Coding>,
    /// Argument scale for exp/log.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Truth-table CSV for --fn table.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Gray-code the stored output.
    #[arg(long)]
    encode: bool,
    /// Range-program JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the packed array layout as JSON.
    #[arg(long)]
    layout: Option<PathBuf>,
}

fn coding(s: &str) -> Coding {
    s.parse().expect("built-in coding")
}

fn read_table(path: &Path) -> Result<TruthTable> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    TruthTable::read_csv(f).with_context(|| format!("reading truth table {}", path.display()))
}

pub fn function_spec(
    func: FnName,
    input: Option<Coding>,
    in2: Option<Coding>,
    out: Option<Coding>,
    scale: f64,
    table: Option<&Path>,
) -> Result<FunctionSpec> {
    let fixed = matches!(func, FnName::Mult4 | FnName::Mult4x4 | FnName::Adc | FnName::Table);
    if fixed && (input.is_some() || in2.is_some() || out.is_some()) {
        bail!("--fn {} fixes its codings; --in/--in2/--out-format do not apply", func.name());
    }
    if func != FnName::Mult && in2.is_some() {
        bail!("--in2 only applies to --fn mult");
    }
    let (kind, inputs, output) = match func {
        FnName::Identity => {
            let i = input.unwrap_or(coding("0-8-0"));
            (FunctionKind::Identity, vec![i], out.unwrap_or(i))
        }
        FnName::Gelu => (FunctionKind::Gelu, vec![input.unwrap_or(coding("1-3-4"))], out.unwrap_or(coding("1-3-4"))),
        FnName::Exp => {
            (FunctionKind::Exp { scale }, vec![input.unwrap_or(coding("1-3-4"))], out.unwrap_or(coding("pot:8:4:-12")))
        }
        FnName::Log => {
            (FunctionKind::Log { scale }, vec![input.unwrap_or(coding("pot:8:3:-12"))], out.unwrap_or(coding("1-3-4")))
        }
        FnName::Mult => {
            let x = input.unwrap_or(coding("1-1-2"));
            (FunctionKind::Multiply, vec![x, in2.unwrap_or(x)], out.unwrap_or(coding("1-2-1")))
        }
        FnName::Mult4 => (FunctionKind::Multiply, vec![coding("1-1-2"); 2], coding("1-2-1")),
        FnName::Mult4x4 => (FunctionKind::Multiply, vec![coding("0-4-0"); 2], coding("0-8-0")),
        FnName::Adc => (FunctionKind::Identity, vec![coding("0-4-0")], coding("0-4-0")),
        FnName::Table => {
            let path = table.ok_or_else(|| anyhow!("--fn table needs --table PATH"))?;
            let t = read_table(path)?;
            let unsigned = |w: u32| -> Result<Coding> { Ok(FixedPointFormat::unsigned(w as u8)?.into()) };
            let inputs = t.in_widths().iter().map(|&w| unsigned(w)).collect::<Result<Vec<_>>>()?;
            let output = unsigned(t.out_width())?;
            (FunctionKind::Table { table: t }, inputs, output)
        }
    };
    if !matches!(func, FnName::Table) && table.is_some() {
        bail!("--table only applies to --fn table");
    }
    Ok(FunctionSpec::new(kind, inputs, output)?)
}

fn describe(spec: &FunctionSpec) -> String {
    let ins: Vec<String> = spec.inputs.iter().map(Coding::to_string).collect();
    format!("{} -> {}", ins.join(" x "), spec.output)
}

pub fn synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    let spec = function_spec(a.func, a.input, a.in2, a.out_format, a.scale, a.table.as_deref())?;
    let table = spec.table::<f64>()?;
    let source = serde_json::to_string(&spec)?;
    let program = synthesize_named(&table, a.encode, Some(&source))?;
    let layout = pack(&program)?;

    let mut s = String::new();
    writeln!(s, "fn {}: {}{}", a.func.name(), describe(&spec), if a.encode { ", gray-coded output" } else { "" })?;
    for (bit, n) in program.box_counts().iter().enumerate().rev() {
        writeln!(s, "  bit {bit}: {n} cells")?;
    }
    writeln!(
        s,
        "cells {}, rows {}, arrays {}, groups {}, utilization {:.1}% (unused {:.1}%), monolithic {:.1}%",
        layout.used_cells(),
        layout.allocated_rows(),
        layout.num_arrays(),
        layout.num_groups(),
        100.0 * layout.utilization(),
        100.0 * layout.unused_fraction(),
        100.0 * monolithic_utilization(&program),
    )?;
    print!("{s}");

    let mut json = program.to_json()?;
    json.push('\n');
    run.write(&a.out, json.as_bytes())?;
    if let Some(p) = &a.layout {
        run.write_json(p, &layout)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Range-program JSON written by `synth`.
    #[arg(long)]
    program: PathBuf,
    /// Check every input combination (the default without --input).
    #[arg(long)]
    exhaustive: bool,
    /// Reference truth table; defaults to the function recorded in the program.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Evaluate one input level instead.
    #[arg(long, conflicts_with = "exhaustive")]
    input: Option<u32>,
    #[arg(long, requires = "input")]
    input2: Option<u32>,
    /// JSON equivalence report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct Mismatch {
    inputs: Vec<u32>,
    expected: u32,
    got: u32,
}

#[derive(Serialize)]
struct SimReport {
    program: String,
    encoded: bool,
    in_widths: Vec<u32>,
    out_width: u32,
    checked: usize,
    matched: usize,
    pass: bool,
    /// First few disagreements.
    mismatches: Vec<Mismatch>,
}

fn load_program(path: &Path) -> Result<RangeProgram> {
    let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RangeProgram::from_json(&s).with_context(|| format!("parsing range program {}", path.display()))
}

fn program_spec(p: &RangeProgram) -> Option<FunctionSpec> {
    p.source.as_deref().and_then(|s| serde_json::from_str(s).ok())
}

pub fn simulate(a: &SimulateArgs, run: &mut Run) -> Result<()> {
    let program = load_program(&a.program)?;
    let table = match (&a.table, program_spec(&program)) {
        (Some(p), _) => read_table(p)?,
        (None, Some(spec)) => spec.table::<f64>()?,
        (None, None) => bail!("program carries no function description; pass --table"),
    };
    if table.in_widths() != program.widths.inputs.as_slice() || table.out_width() != program.out_width() {
        bail!(
            "reference table widths {:?} -> {} differ from program {:?} -> {}",
            table.in_widths(),
            table.out_width(),
            program.widths.inputs,
            program.out_width()
        );
    }
    let acam = AcamInstance::new(pack(&program)?)?;

    if let Some(x) = a.input {
        let got = acam.evaluate(x, a.input2)?;
        let levels: Vec<u32> = [Some(x), a.input2].into_iter().flatten().collect();
        let want = table.get(&levels);
        let value = program_spec(&program).map(|s| s.output.decode_bits::<f64>(got));
        let value = value.map(|v| format!(", value {v}")).unwrap_or_default();
        println!(
            "in {levels:?} -> bits {got:#0w$b} (reference {want:#0w$b}){value}",
            w = program.out_width() as usize + 2
        );
        if got != want {
            bail!("output differs from the reference");
        }
        return Ok(());
    }

    let n = table.entries().len();
    let mut matched = 0;
    let mut mismatches = Vec::new();
    for idx in 0..n as u32 {
        let levels = match table.arity() {
            1 => vec![idx],
            _ => {
                let wy = table.in_widths()[1];
                vec![idx >> wy, idx & ((1 << wy) - 1)]
            }
        };
        let got = acam.evaluate(levels[0], levels.get(1).copied())?;
        let expected = table.get(&levels);
        if got == expected {
            matched += 1;
        } else if mismatches.len() < 16 {
            mismatches.push(Mismatch { inputs: levels, expected, got });
        }
    }
    let pass = matched == n;
    println!("{} {matched}/{n}", if pass { "PASS" } else { "FAIL" });
    if let Some(p) = &a.report {
        let report = SimReport {
            program: a.program.display().to_string(),
            encoded: program.encoded,
            in_widths: program.widths.inputs.clone(),
            out_width: program.out_width(),
            checked: n,
            matched,
            pass,
            mismatches,
        };
        run.write_json(p, &report)?;
    }
    if !pass {
        bail!("{} of {n} input combinations disagree with the reference", n - matched);
    }
    Ok(())
}

/// Mirrors the `gce-compute unit-id, src, dest, vec-width` instruction.
#[derive(Args)]
pub struct GceArgs {
    /// Built-in unit with its default codings.
    #[arg(long, value_enum, required_unless_present = "program")]
    unit_id: Option<FnName>,
    /// Or a range program written by `synth`.
    #[arg(long, conflicts_with = "unit_id")]
    program: Option<PathBuf>,
    /// Headerless CSV, one element per line (two columns for two-input units).
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    dest: PathBuf,
    /// Elements to process; defaults to the whole source.
    #[arg(long)]
    vec_width: Option<usize>,
}

pub fn gce(a: &GceArgs, run: &mut Run) -> Result<()> {
    let (spec, acam) = match (&a.program, a.unit_id) {
        (Some(p), _) => {
            let program = load_program(p)?;
            let spec = program_spec(&program).ok_or_else(|| anyhow!("program carries no function description"))?;
            (spec, AcamInstance::new(pack(&program)?)?)
        }
        (None, Some(FnName::Table)) => bail!("--unit-id table needs a program; use --program"),
        (None, Some(u)) => {
            let spec = function_spec(u, None, None, None, 1.0, None)?;
            let acam = AcamInstance::from_table(&spec.table::<f64>()?, true)?;
            (spec, acam)
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(&a.src)
        .with_context(|| format!("opening {}", a.src.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != spec.arity() {
            bail!("{} line {}: expected {} column(s), got {}", a.src.display(), i + 1, spec.arity(), rec.len());
        }
        let vals = rec.iter().map(str::parse).collect::<Result<Vec<f64>, _>>();
        rows.push(vals.with_context(|| format!("{} line {}: not a number", a.src.display(), i + 1))?);
    }
    let width = a.vec_width.unwrap_or(rows.len());
    if width > rows.len() {
        bail!("vec-width {width} exceeds the {} elements in {}", rows.len(), a.src.display());
    }

    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index", "x"];
    if spec.arity() == 2 {
        header.push("y");
    }
    header.extend(["out_bits", "out_value"]);
    out.write_record(&header)?;
    for (i, row) in rows.iter().take(width).enumerate() {
        let levels: Vec<u32> = spec.inputs.iter().zip(row).map(|(c, &v)| c.encode_level(v)).collect();
        let bits = acam.evaluate(levels[0], levels.get(1).copied())?;
        let mut rec = vec![i.to_string()];
        // quantized operands, as the unit sees them
        rec.extend(spec.inputs.iter().zip(&levels).map(|(c, &l)| c.decode_level::<f64>(l).to_string()));
        rec.push(bits.to_string());
        rec.push(spec.output.decode_bits::<f64>(bits).to_string());
        out.write_record(&rec)?;
    }
    let bytes = out.into_inner().map_err(|e| anyhow!("{e}"))?;
    run.write(&a.dest, &bytes)?;
    let unit = a.unit_id.map(FnName::name).unwrap_or_else(|| "program".into());
    println!("gce-compute unit-id={unit} src={} dest={} vec-width={width}", a.src.display(), a.dest.display());
    Ok(())
}
