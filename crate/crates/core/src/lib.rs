// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Compute-ACAM function synthesis and simulation.
//!
//! Truth tables of quantized functions are compiled into per-bit input
//! ranges, packed into 4x8 arrays and evaluated bit-exactly. Composite
//! operators (8-bit multiply, softmax, attention), a bit-sliced crossbar,
//! an area/power model and a pipeline scheduler sit on top.
//!
//! Real-valued APIs are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix them to `f64`.

pub mod acam;
pub mod compound;
pub mod cost;
pub mod crossbar;
pub mod error;
pub mod fixedpoint;
pub mod functions;
pub mod pipeline;
pub mod scalar;
pub mod synthesis;

pub use acam::{AcamInstance, AcamMode};
pub use compound::{
    attention_head, softmax_fixed, AttentionHeadConfig, AttentionUnits, CodeMatrix, GeluUnit, Mult8Unit, SoftmaxConfig,
    SoftmaxUnitSet, StageQuant,
};
pub use cost::{chip_cost, operator_cost, ArchConfig, ChipCost, CostMode, CostRecord};
pub use crossbar::{mvm, mvm_exact, program_weights, CrossbarConfig, IntMatrix, Readout, SlicedWeights};
pub use error::{Error, Result};
pub use fixedpoint::{
    gray_decode, gray_encode, quantize_pot, Coding, FixedCode, FixedPointFormat, GrayCode, PotCode, PotFormat,
};
pub use functions::{build_table_1var, build_table_2var, FunctionKind, FunctionSpec, TruthTable};
pub use pipeline::{schedule, sweep_k, GceConfig, ModelDims, PipelineConfig, PipelineTrace, UnitRows};
pub use scalar::Real;
pub use synthesis::{
    cover_rectangles_2d, extract_ranges_1d, monolithic_utilization, pack, synthesize, PackedLayout, RangeBox,
    RangeProgram, Span,
};

/// Folded ADC over `f64` levels.
pub type AdcUnit = acam::AdcUnit<f64>;
/// `f32` variant of [`AdcUnit`].
pub type AdcUnitF32 = acam::AdcUnit<f32>;
/// Crossbar readout over `f64`.
pub type MvmResult = crossbar::MvmResult<f64>;
