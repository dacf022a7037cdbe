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

//! The optimal classical baseline: both parties draw random `n`-bit strings,
//! exchange them, and repeat until the strings differ. The larger string wins.

use rand::Rng;
use serde::Serialize;

use crate::error::{check_range, Result};
use crate::montecarlo::{derive_seed, rng_from_seed, run_chunked};
use crate::protocol::{mean_and_std_error, CostLedger, Party};

/// Longest bit string the simulator packs into one word.
pub const MAX_SIMULATED_BITS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassicalParams {
    /// Bits compared per round.
    pub n: u32,
    /// Probability of drawing a 1 for each bit.
    pub p: f64,
}

impl ClassicalParams {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        let params = Self { n, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("n", self.n as f64, self.n >= 1, "n >= 1")?;
        check_range("p", self.p, (0.0..=1.0).contains(&self.p), "0 <= p <= 1")
    }
}

/// Per-round success probability `1 − (2p² − 2p + 1)ⁿ`.
pub fn classical_success_prob(params: &ClassicalParams) -> f64 {
    let p = params.p;
    let tie = 2.0 * p * p - 2.0 * p + 1.0;
    1.0 - tie.powi(params.n as i32)
}

/// The bit bias maximizing the success probability.
///
/// The derivative `n(2p² − 2p + 1)ⁿ⁻¹(4p − 2)` vanishes only at `p = 1/2`
/// because the first factor is at least 1/2; the second-order check confirms a
/// maximum.
pub fn optimal_p(n: u32) -> Result<f64> {
    check_range("n", n as f64, n >= 1, "n >= 1")?;
    let root = 0.5;
    let at = |p: f64| classical_success_prob(&ClassicalParams { n, p });
    let h = 1e-4;
    debug_assert!(at(root) > at(root - h) && at(root) > at(root + h));
    Ok(root)
}

/// Expected bits exchanged at the optimal bias, `2n/(1 − 2⁻ⁿ)`.
pub fn expected_classical_cost(n: u32) -> Result<f64> {
    check_range("n", n as f64, n >= 1, "n >= 1")?;
    let n = n as f64;
    Ok(2.0 * n / (1.0 - (-n).exp2()))
}

fn draw_bits<R: Rng + ?Sized>(rng: &mut R, n: u32, p: f64) -> u64 {
    (0..n).fold(0u64, |acc, _| {
        (acc << 1) | u64::from(rng.random::<f64>() < p)
    })
}

fn check_simulated(params: &ClassicalParams, max_rounds: u64) -> Result<()> {
    params.validate()?;
    check_range(
        "n",
        params.n as f64,
        params.n <= MAX_SIMULATED_BITS,
        "n <= 64 for simulation",
    )?;
    check_range(
        "max_rounds",
        max_rounds as f64,
        max_rounds >= 1,
        "max_rounds >= 1",
    )
}

fn run_rounds<A, B>(
    params: &ClassicalParams,
    alice: &mut A,
    bob: &mut B,
    max_rounds: u64,
) -> CostLedger
where
    A: Rng + ?Sized,
    B: Rng + ?Sized,
{
    let mut ledger = CostLedger::new();
    while ledger.trials < max_rounds {
        let a = draw_bits(alice, params.n, params.p);
        let b = draw_bits(bob, params.n, params.p);
        ledger.trials += 1;
        ledger.total_classical_bits += 2 * u64::from(params.n);
        if a != b {
            ledger.elected = Some(if a > b { Party::Alice } else { Party::Bob });
            break;
        }
    }
    ledger
}

/// One election where each party draws from its own seeded stream.
pub fn simulate_classical_with_seeds(
    params: &ClassicalParams,
    alice_seed: u64,
    bob_seed: u64,
    max_rounds: u64,
) -> Result<CostLedger> {
    check_simulated(params, max_rounds)?;
    let mut alice = rng_from_seed(alice_seed);
    let mut bob = rng_from_seed(bob_seed);
    Ok(run_rounds(params, &mut alice, &mut bob, max_rounds))
}

/// One election; the party streams are derived from `rng_seed`. Exhaustion
/// leaves `elected` as `None`.
pub fn simulate_classical(
    params: &ClassicalParams,
    rng_seed: u64,
    max_rounds: u64,
) -> Result<CostLedger> {
    simulate_classical_with_seeds(
        params,
        derive_seed(rng_seed, 0),
        derive_seed(rng_seed, 1),
        max_rounds,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalStats {
    pub runs: u64,
    pub mean_cost: f64,
    pub std_error: f64,
    pub rounds: u64,
    pub alice: u64,
    pub bob: u64,
    pub unresolved: u64,
}

/// Monte Carlo over `runs` classical elections.
pub fn simulate_classical_many(
    params: &ClassicalParams,
    runs: u64,
    max_rounds: u64,
    rng_seed: u64,
) -> Result<ClassicalStats> {
    check_simulated(params, max_rounds)?;
    let partials = run_chunked(runs, rng_seed, |rng, count| {
        let mut t = [0u64; 5];
        let mut sq: u128 = 0;
        let mut bob_rng = rng_from_seed(rng.random());
        for _ in 0..count {
            let ledger = run_rounds(params, rng, &mut bob_rng, max_rounds);
            let cost = ledger.total_communication();
            t[0] += cost;
            sq += (cost as u128) * (cost as u128);
            t[1] += ledger.trials;
            match ledger.elected {
                Some(Party::Alice) => t[2] += 1,
                Some(Party::Bob) => t[3] += 1,
                None => t[4] += 1,
            }
        }
        (t, sq)
    });
    let mut t = [0u64; 5];
    let mut sq = 0u128;
    for (part, part_sq) in partials {
        for (a, b) in t.iter_mut().zip(part) {
            *a += b;
        }
        sq += part_sq;
    }
    let (mean_cost, std_error) = mean_and_std_error(runs, t[0], sq);
    Ok(ClassicalStats {
        runs,
        mean_cost,
        std_error,
        rounds: t[1],
        alice: t[2],
        bob: t[3],
        unresolved: t[4],
    })
}
