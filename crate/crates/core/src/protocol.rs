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

//! The two-party election state machine and its communication accounting.
//!
//! Each trial exchanges the two guest ports (2 qubits). A party holding both
//! photons knows the election is settled and stops. Otherwise the parties
//! announce their detectors (2 classical bits); a cross success (A1&B2 or
//! A2&B1) settles the election and a cross failure (A1&B1 or A2&B2) starts a
//! new trial.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::analytic::{p1_suc, p2_suc, p_suc, OpticsParams};
use crate::error::{check_range, QleError, Result};
use crate::fock::{outcome_distribution, DetectionPattern, OutcomeDistribution, PatternSampler};
use crate::montecarlo::{rng_from_seed, run_chunked};

/// Qubits sent per trial: each party passes its guest port to the other.
pub const QUBITS_PER_TRIAL: u64 = 2;
/// Classical bits spent verifying a single-photon outcome.
pub const VERIFICATION_BITS: u64 = 2;
pub const DEFAULT_MAX_TRIALS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Self {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "Alice",
            Party::Bob => "Bob",
        })
    }
}

/// Detection classes (i)–(iv) of post-selected two-photon events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PatternClass {
    /// Both photons at a single detector.
    #[serde(rename = "i")]
    I,
    /// Coincidence between the two detectors of one party.
    #[serde(rename = "ii")]
    II,
    /// Cross-party success coincidence, A1&B2 or A2&B1.
    #[serde(rename = "iii")]
    III,
    /// Cross-party failure coincidence, A1&B1 or A2&B2.
    #[serde(rename = "iv")]
    IV,
}

impl PatternClass {
    pub const ALL: [PatternClass; 4] = [
        PatternClass::I,
        PatternClass::II,
        PatternClass::III,
        PatternClass::IV,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            PatternClass::I => "i",
            PatternClass::II => "ii",
            PatternClass::III => "iii",
            PatternClass::IV => "iv",
        }
    }

    /// Whether the class ends the election without classical communication.
    pub fn is_two_photon(self) -> bool {
        matches!(self, PatternClass::I | PatternClass::II)
    }
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct OutcomeClass {
    pub class: PatternClass,
    pub leader: Option<Party>,
}

/// Classifies a two-photon pattern and applies the leader rule: the party
/// that receives two photons, or a single photon at its detector 1, leads.
pub fn classify(pattern: &DetectionPattern) -> Result<OutcomeClass> {
    let total = pattern.total();
    if total != 2 {
        return Err(QleError::NotTwoPhoton(total));
    }
    let owner = |alice: bool| if alice { Party::Alice } else { Party::Bob };
    if let Some(d) = pattern.as_double() {
        return Ok(OutcomeClass {
            class: PatternClass::I,
            leader: Some(owner(d.is_alice())),
        });
    }
    let pair = pattern
        .as_pair()
        .expect("two single counts on distinct detectors");
    let (a, b) = (pair.first(), pair.second());
    let outcome = if a.is_alice() == b.is_alice() {
        OutcomeClass {
            class: PatternClass::II,
            leader: Some(owner(a.is_alice())),
        }
    } else if a.is_port_one() == b.is_port_one() {
        OutcomeClass {
            class: PatternClass::IV,
            leader: None,
        }
    } else {
        let first = if a.is_port_one() { a } else { b };
        OutcomeClass {
            class: PatternClass::III,
            leader: Some(owner(first.is_alice())),
        }
    };
    Ok(outcome)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrialResult {
    /// 1-based.
    pub trial_index: u64,
    pub pattern: DetectionPattern,
    pub outcome: OutcomeClass,
    pub qubits_sent: u64,
    pub classical_bits_sent: u64,
}

/// Running communication totals for one election.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CostLedger {
    pub total_qubits: u64,
    pub total_classical_bits: u64,
    pub trials: u64,
    pub elected: Option<Party>,
    pub history: Vec<TrialResult>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Qubits plus classical bits.
    pub fn total_communication(&self) -> u64 {
        self.total_qubits + self.total_classical_bits
    }

    pub fn is_finished(&self) -> bool {
        self.elected.is_some()
    }

    /// Runs one protocol trial that produced `pattern`. Returns whether the
    /// election is now settled.
    pub fn observe(&mut self, pattern: DetectionPattern) -> Result<bool> {
        let outcome = classify(&pattern)?;
        let classical = if outcome.class.is_two_photon() {
            0
        } else {
            VERIFICATION_BITS
        };
        self.trials += 1;
        self.total_qubits += QUBITS_PER_TRIAL;
        self.total_classical_bits += classical;
        self.history.push(TrialResult {
            trial_index: self.trials,
            pattern,
            outcome,
            qubits_sent: QUBITS_PER_TRIAL,
            classical_bits_sent: classical,
        });
        self.elected = outcome.leader;
        Ok(outcome.leader.is_some())
    }

    /// Feeds trials until the election settles or the patterns run out.
    pub fn replay<I>(patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = DetectionPattern>,
    {
        let mut ledger = Self::new();
        for pattern in patterns {
            if ledger.observe(pattern)? {
                break;
            }
        }
        Ok(ledger)
    }

    /// Ledger for the same run with Alice and Bob relabeled.
    pub fn mirrored(&self) -> Self {
        Self {
            elected: self.elected.map(Party::other),
            history: self
                .history
                .iter()
                .map(|t| TrialResult {
                    pattern: t.pattern.mirrored(),
                    outcome: OutcomeClass {
                        leader: t.outcome.leader.map(Party::other),
                        ..t.outcome
                    },
                    ..*t
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// Samples detection patterns for repeated elections.
#[derive(Clone, Debug)]
pub struct QleProtocol {
    sampler: PatternSampler,
}

impl QleProtocol {
    pub fn new(params: &OpticsParams) -> Result<Self> {
        Self::from_distribution(&outcome_distribution(params)?)
    }

    /// The distribution must cover two-photon patterns only.
    pub fn from_distribution(dist: &OutcomeDistribution) -> Result<Self> {
        for (pattern, &p) in dist.iter() {
            if p > 0.0 {
                classify(pattern)?;
            }
        }
        Ok(Self {
            sampler: PatternSampler::new(dist)?,
        })
    }

    /// Runs trials until the election settles or `max_trials` is exhausted,
    /// in which case `elected` stays `None`.
    pub fn run<R: Rng + ?Sized>(&self, max_trials: u64, rng: &mut R) -> CostLedger {
        let mut ledger = CostLedger::new();
        while ledger.trials < max_trials {
            let settled = ledger
                .observe(self.sampler.sample(rng))
                .expect("sampler only yields two-photon patterns");
            if settled {
                break;
            }
        }
        ledger
    }

    /// Aggregates `runs` independent elections.
    pub fn simulate(&self, runs: u64, max_trials: u64, rng_seed: u64) -> ProtocolStats {
        let partials = run_chunked(runs, rng_seed, |rng, n| {
            let mut acc = ProtocolTally::default();
            for _ in 0..n {
                acc.add(&self.run(max_trials, rng));
            }
            acc
        });
        let mut total = ProtocolTally::default();
        for p in &partials {
            total.merge(p);
        }
        total.finish()
    }
}

fn check_max_trials(max_trials: u64) -> Result<()> {
    check_range(
        "max_trials",
        max_trials as f64,
        max_trials >= 1,
        "max_trials >= 1",
    )
}

/// One election with pattern probabilities from the circuit model.
pub fn run_protocol(params: &OpticsParams, max_trials: u64, rng_seed: u64) -> Result<CostLedger> {
    check_max_trials(max_trials)?;
    let protocol = QleProtocol::new(params)?;
    Ok(protocol.run(max_trials, &mut rng_from_seed(rng_seed)))
}

/// Monte Carlo over `runs` elections.
pub fn simulate_protocol(
    params: &OpticsParams,
    runs: u64,
    max_trials: u64,
    rng_seed: u64,
) -> Result<ProtocolStats> {
    check_max_trials(max_trials)?;
    Ok(QleProtocol::new(params)?.simulate(runs, max_trials, rng_seed))
}

#[derive(Clone, Debug, Default)]
struct ProtocolTally {
    runs: u64,
    cost_sum: u64,
    cost_sq_sum: u128,
    trials: u64,
    alice: u64,
    bob: u64,
    unresolved: u64,
    class_counts: [u64; 4],
}

impl ProtocolTally {
    fn add(&mut self, ledger: &CostLedger) {
        let cost = ledger.total_communication();
        self.runs += 1;
        self.cost_sum += cost;
        self.cost_sq_sum += (cost as u128) * (cost as u128);
        self.trials += ledger.trials;
        match ledger.elected {
            Some(Party::Alice) => self.alice += 1,
            Some(Party::Bob) => self.bob += 1,
            None => self.unresolved += 1,
        }
        for t in &ledger.history {
            self.class_counts[t.outcome.class.index()] += 1;
        }
    }

    fn merge(&mut self, other: &Self) {
        self.runs += other.runs;
        self.cost_sum += other.cost_sum;
        self.cost_sq_sum += other.cost_sq_sum;
        self.trials += other.trials;
        self.alice += other.alice;
        self.bob += other.bob;
        self.unresolved += other.unresolved;
        for (a, b) in self.class_counts.iter_mut().zip(other.class_counts) {
            *a += b;
        }
    }

    fn finish(&self) -> ProtocolStats {
        let (mean, std_error) = mean_and_std_error(self.runs, self.cost_sum, self.cost_sq_sum);
        ProtocolStats {
            runs: self.runs,
            mean_cost: mean,
            std_error,
            trials: self.trials,
            alice: self.alice,
            bob: self.bob,
            unresolved: self.unresolved,
            class_counts: self.class_counts,
        }
    }
}

pub(crate) fn mean_and_std_error(n: u64, sum: u64, sq_sum: u128) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = sum as f64 / nf;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = ((sq_sum as f64) - nf * mean * mean) / (nf - 1.0);
    (mean, (var.max(0.0) / nf).sqrt())
}

/// Summary of a Monte Carlo batch of elections.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolStats {
    pub runs: u64,
    pub mean_cost: f64,
    /// Standard error of `mean_cost`.
    pub std_error: f64,
    /// Trials summed over all runs.
    pub trials: u64,
    pub alice: u64,
    pub bob: u64,
    pub unresolved: u64,
    /// Per-trial class counts, indexed by [`PatternClass::index`].
    pub class_counts: [u64; 4],
}

impl ProtocolStats {
    pub fn class_frequency(&self, class: PatternClass) -> f64 {
        self.class_counts[class.index()] as f64 / self.trials as f64
    }
}

/// Per-trial probability of each class under `dist`.
pub fn class_probabilities(dist: &OutcomeDistribution) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (pattern, &p) in dist.iter() {
        out[classify(pattern)?.class.index()] += p;
    }
    Ok(out)
}

/// Expected total communication (qubits + bits) of the retry protocol,
/// `(2·P⁽²⁾ + 4·P⁽¹⁾ + 4·(1 − P))/P`.
pub fn expected_cost(params: &OpticsParams) -> Result<f64> {
    params.validate()?;
    let success = p_suc(params);
    if success <= 0.0 {
        return Err(QleError::DivergentCost);
    }
    let two = p2_suc(params);
    let one = p1_suc(params);
    Ok((2.0 * two + 4.0 * one + 4.0 * (1.0 - success)) / success)
}

/// Expected cost from the per-trial probabilities of the two success branches.
pub fn cost_from_success(two_photon: f64, single_photon: f64) -> Result<f64> {
    let success = two_photon + single_photon;
    if success <= 0.0 {
        return Err(QleError::DivergentCost);
    }
    Ok((2.0 * two_photon + 4.0 * single_photon + 4.0 * (1.0 - success)) / success)
}

/// Expected cost as a function of visibility at fixed branching ratio.
pub fn cost_curve(gamma: f64, nu_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    nu_grid
        .iter()
        .map(|&nu| {
            let params = OpticsParams::new(gamma, nu, 0.0)?;
            Ok((nu, expected_cost(&params)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{Detector, DetectorPair};

    fn pair(a: Detector, b: Detector) -> DetectionPattern {
        DetectionPattern::coincidence(DetectorPair::new(a, b).unwrap())
    }

    #[test]
    fn classify_table_rows() {
        use Detector::*;
        let c = |p: DetectionPattern| classify(&p).unwrap();
        assert_eq!(
            c(DetectionPattern::double(A1)),
            OutcomeClass {
                class: PatternClass::I,
                leader: Some(Party::Alice)
            }
        );
        assert_eq!(c(DetectionPattern::double(B2)).leader, Some(Party::Bob));
        assert_eq!(
            c(pair(A2, B1)),
            OutcomeClass {
                class: PatternClass::III,
                leader: Some(Party::Bob)
            }
        );
        assert_eq!(c(pair(A1, B2)).leader, Some(Party::Alice));
        assert_eq!(
            c(pair(A1, B1)),
            OutcomeClass {
                class: PatternClass::IV,
                leader: None
            }
        );
        assert_eq!(c(pair(A2, B2)).class, PatternClass::IV);
        assert_eq!(
            c(pair(B1, B2)),
            OutcomeClass {
                class: PatternClass::II,
                leader: Some(Party::Bob)
            }
        );
    }

    #[test]
    fn classes_partition_patterns() {
        let mut sizes = [0; 4];
        for p in DetectionPattern::two_photon_patterns() {
            sizes[classify(&p).unwrap().class.index()] += 1;
        }
        assert_eq!(sizes, [4, 2, 2, 2]);
    }

    #[test]
    fn non_two_photon_rejected() {
        assert_eq!(
            classify(&DetectionPattern::new([1, 0, 0, 0])),
            Err(QleError::NotTwoPhoton(1))
        );
        assert_eq!(
            classify(&DetectionPattern::new([1, 1, 1, 0])),
            Err(QleError::NotTwoPhoton(3))
        );
    }

    #[test]
    fn forced_failure_exhausts() {
        let dist = OutcomeDistribution::point_mass(pair(Detector::A1, Detector::B1));
        let protocol = QleProtocol::from_distribution(&dist).unwrap();
        let ledger = protocol.run(3, &mut rng_from_seed(0));
        assert_eq!(ledger.total_communication(), 12);
        assert_eq!(ledger.trials, 3);
        assert_eq!(ledger.elected, None);
    }

    #[test]
    fn classical_bits_only_after_single_photon_outcomes() {
        let params = OpticsParams::new(0.8, 0.6, 0.0).unwrap();
        for seed in 0..200 {
            let ledger = run_protocol(&params, 50, seed).unwrap();
            for t in &ledger.history {
                assert_eq!(t.qubits_sent, 2);
                assert_eq!(t.classical_bits_sent == 0, t.outcome.class.is_two_photon());
            }
        }
    }

    #[test]
    fn replay_stops_at_settlement() {
        let ledger = CostLedger::replay([
            pair(Detector::A1, Detector::B1),
            pair(Detector::A2, Detector::B1),
            DetectionPattern::double(Detector::A1),
        ])
        .unwrap();
        assert_eq!(ledger.trials, 2);
        assert_eq!(ledger.total_communication(), 8);
        assert_eq!(ledger.elected, Some(Party::Bob));
    }

    #[test]
    fn zero_max_trials_rejected() {
        let params = OpticsParams::default();
        assert!(run_protocol(&params, 0, 1).is_err());
    }

    #[test]
    fn expected_cost_endpoints() {
        let cost = |g, n| expected_cost(&OpticsParams::new(g, n, 0.0).unwrap()).unwrap();
        assert!((cost(1.0, 1.0) - 3.0).abs() < 1e-12);
        assert!((cost(1.0, 0.0) - 4.0).abs() < 1e-12);
        assert!((cost(0.8, 0.845) - 3.17).abs() < 0.005);
    }

    #[test]
    fn divergent_cost_is_signalled() {
        assert_eq!(cost_from_success(0.0, 0.0), Err(QleError::DivergentCost));
        assert_eq!(cost_from_success(0.5, 0.5), Ok(3.0));
    }

    #[test]
    fn cost_curve_endpoints() {
        let curve = cost_curve(1.0, &[0.0, 1.0]).unwrap();
        assert_eq!(curve[0].0, 0.0);
        assert!((curve[0].1 - 4.0).abs() < 1e-12);
        assert!((curve[1].1 - 3.0).abs() < 1e-12);
        let one = cost_curve(1.0, &[0.845]).unwrap();
        let direct = expected_cost(&OpticsParams::new(1.0, 0.845, 0.0).unwrap()).unwrap();
        assert_eq!(one, vec![(0.845, direct)]);
        assert!(cost_curve(1.0, &[1.2]).is_err());
    }
}
