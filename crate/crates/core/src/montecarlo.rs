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

//! Seed derivation and chunked parallel Monte Carlo.
//!
//! Work is split into fixed-size chunks, and every chunk draws from its own
//! ChaCha stream keyed by `(seed, chunk index)`. Results therefore depend only
//! on the seed and the number of samples, never on the rayon pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples handled by one chunk (one RNG stream).
pub const CHUNK_SIZE: u64 = 1 << 14;

/// SplitMix64 finalizer applied to `base` offset by `stream`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `work(rng, count)` over `total` samples split into chunks, in parallel,
/// and returns the per-chunk results in chunk order.
pub fn run_chunked<T, F>(total: u64, seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK_SIZE;
            let count = CHUNK_SIZE.min(total - start);
            let mut rng = rng_from_seed(derive_seed(seed, chunk));
            work(&mut rng, count)
        })
        .collect()
}
