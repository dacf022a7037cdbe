// Copyright 2026 The qle-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QleError {
    #[error(
        "beam splitter is not unitary: R + T = {sum} (R = {reflectance}, T = {transmittance})"
    )]
    NonUnitary {
        reflectance: f64,
        transmittance: f64,
        sum: f64,
    },
    #[error("mode index {mode} is invalid for a {modes}-mode state")]
    InvalidMode { mode: usize, modes: usize },
    #[error("element acts on the same mode {0} twice")]
    DuplicateMode(usize),
    #[error("state holds {photons} photons, more than the supported maximum of {max}")]
    TooManyPhotons { photons: usize, max: usize },
    #[error("parameter `{name}` = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("distribution is not normalized: total probability {0}")]
    Unnormalized(f64),
    #[error("expected a post-selected two-photon pattern, got {0} photons")]
    NotTwoPhoton(u32),
    #[error("success probability is zero: expected communication cost diverges")]
    DivergentCost,
    #[error("counts table is empty")]
    EmptyTable,
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },
    #[error("fringe scan needs at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("fringe fit failed: {0}")]
    FitFailed(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, QleError>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(QleError::OutOfRange {
            name,
            value,
            expected,
        })
    }
}
