// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fixed-point format {0}")]
    InvalidFormat(String),

    #[error("unsupported width: {what} is {width} bits, limit is {limit}")]
    UnsupportedWidth { what: &'static str, width: u32, limit: u32 },

    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("input {value} out of range for a {width}-bit operand")]
    InputRange { value: u32, width: u32 },

    #[error("output bit {bit} needs {boxes} cells, group capacity is {limit}")]
    Capacity { bit: usize, boxes: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("inconsistent configuration: {0}")]
    Config(String),

    #[error("array budget exceeded: {used:.2} arrays requested, {budget} available")]
    Budget { used: f64, budget: u32 },

    #[error("malformed {what}: {msg}")]
    Parse { what: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Parse { what, msg: msg.into() }
    }
}
