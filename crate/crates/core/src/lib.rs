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

//! Simulation and analysis toolkit for two-party quantum leader election with
//! linear optics.
//!
//! * [`fock`]: exact few-photon circuit simulation, including a labeled-photon
//!   sector for distinguishable pairs, and seeded outcome sampling.
//! * [`analytic`]: closed-form detection probabilities and success metrics.
//! * [`protocol`]: outcome classes, the leader rule, the retry/verification
//!   state machine, and expected communication cost.
//! * [`classical`]: the optimal classical bit-comparison baseline.
//! * [`experiment`]: loss correction, the post-selected success estimate, and
//!   fringe generation and visibility fitting.

pub mod analytic;
pub mod classical;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod montecarlo;
pub mod protocol;

pub use analytic::{
    full_probabilities, p1_suc, p2_suc, p_suc, simplified_probabilities, FullModelParams,
    OpticsParams, PatternProbabilities,
};
pub use classical::{
    classical_success_prob, expected_classical_cost, optimal_p, simulate_classical, ClassicalParams,
};
pub use error::{QleError, Result};
pub use experiment::{
    empirical_success, fit_visibility, generate_fringe, two_photon_fraction, CountsTable,
    FringeScan, LossBudget, SuccessEstimate, VisibilityFit,
};
pub use fock::{
    apply_element, initial_state, outcome_distribution, run_qle_circuit, sample_pattern,
    DetectionPattern, Detector, DetectorPair, FockState, LabeledFockState, OpticalElement,
    OutcomeDistribution,
};
pub use protocol::{
    classify, cost_curve, expected_cost, run_protocol, CostLedger, OutcomeClass, Party,
    PatternClass, TrialResult,
};
