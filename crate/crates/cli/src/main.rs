// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! `acam`: synthesize, simulate and cost compute-ACAM operators.

mod arch;
mod eval;
mod manifest;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use manifest::Run;

#[derive(Parser)]
#[command(name = "acam", version, about = "Compute-ACAM synthesis, simulation and cost reports")]
struct Cli {
    /// RNG seed for randomized commands.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Directory that relative config paths (--arch, --model, --config) resolve against.
    #[arg(long, global = true, env = "ACAM_CONFIG_DIR")]
    config_dir: Option<PathBuf>,
    /// Manifest path; defaults to `<first output stem>.manifest.json`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a function into a range program.
    Synth(synth::SynthArgs),
    /// Check a range program against its reference table.
    Simulate(synth::SimulateArgs),
    /// Evaluate a GCE unit over a vector of inputs.
    Gce(synth::GceArgs),
    /// Sweep the folded ADC over every level.
    Adc(eval::AdcArgs),
    /// Compare PoT and uniform softmax on random logits.
    SoftmaxEval(eval::SoftmaxArgs),
    /// Bit-sliced crossbar matrix-vector multiply.
    Mvm(eval::MvmArgs),
    /// Area and power of the chip hierarchy and of single operators.
    Cost(arch::CostArgs),
    /// Schedule attention sequences on one core.
    Pipeline(arch::PipelineArgs),
    /// Throughput against the multiplier-to-exp ratio k.
    SweepK(arch::SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Simulate(_) => "simulate",
            Command::Gce(_) => "gce",
            Command::Adc(_) => "adc",
            Command::SoftmaxEval(_) => "softmax-eval",
            Command::Mvm(_) => "mvm",
            Command::Cost(_) => "cost",
            Command::Pipeline(_) => "pipeline",
            Command::SweepK(_) => "sweep-k",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut run = Run::new(cli.command.name(), args, cli.seed, cli.config_dir);
    let result = match &cli.command {
        Command::Synth(a) => synth::synth(a, &mut run),
        Command::Simulate(a) => synth::simulate(a, &mut run),
        Command::Gce(a) => synth::gce(a, &mut run),
        Command::Adc(a) => eval::adc(a, &mut run),
        Command::SoftmaxEval(a) => eval::softmax(a, &mut run),
        Command::Mvm(a) => eval::mvm(a, &mut run),
        Command::Cost(a) => arch::cost(a, &mut run),
        Command::Pipeline(a) => arch::pipeline(a, &mut run),
        Command::SweepK(a) => arch::sweep(a, &mut run),
    };
    // reports written before a failure still get a manifest
    let finished = run.finish(cli.manifest.as_deref());
    result.and(finished)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("acam: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
