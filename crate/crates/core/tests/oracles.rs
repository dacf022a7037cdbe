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

//! Independent oracles: a permanent-based two-photon evaluator, hand-written
//! closed forms, series sums and brute-force optimizations.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use qle::classical::{classical_success_prob, expected_classical_cost, optimal_p, ClassicalParams};
use qle::fock::{outcome_distribution, DetectionPattern, Detector, DetectorPair};
use qle::{cost_curve, expected_cost, p_suc, simplified_probabilities, OpticsParams};

fn pair(a: Detector, b: Detector) -> DetectorPair {
    DetectorPair::new(a, b).unwrap()
}

type Mat = [[Complex64; 4]; 4];

const GAMMAS: [f64; 3] = [0.5, 0.8, 1.0];
const NUS: [f64; 4] = [0.0, 0.5, 0.845, 1.0];

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn identity() -> Mat {
    let mut m = [[c(0.0); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = c(1.0);
    }
    m
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut m = [[c(0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// Beam splitter `u[out][in]`: a → t·a − r·b, b → r·a + t·b.
fn bs(a: usize, b: usize, gamma: f64) -> Mat {
    let r = (gamma / (1.0 + gamma)).sqrt();
    let t = (1.0 / (1.0 + gamma)).sqrt();
    let mut m = identity();
    m[a][a] = c(t);
    m[b][a] = c(-r);
    m[a][b] = c(r);
    m[b][b] = c(t);
    m
}

fn swap(a: usize, b: usize) -> Mat {
    let mut m = identity();
    m[a][a] = c(0.0);
    m[b][b] = c(0.0);
    m[a][b] = c(1.0);
    m[b][a] = c(1.0);
    m
}

fn shift(a: usize, angle: f64) -> Mat {
    let mut m = identity();
    m[a][a] = Complex64::from_polar(1.0, angle);
    m
}

/// Single-photon transfer matrix of the election interferometer. Modes are
/// (Alice host, Alice guest, Bob host, Bob guest); outputs are (A1, A2, B1, B2).
fn interferometer(gamma: f64, phase: f64) -> Mat {
    let (ah, ag, bh, bg) = (0, 1, 2, 3);
    let guest = FRAC_PI_2 + phase / 2.0;
    [
        bs(ah, ag, gamma),
        bs(bh, bg, gamma),
        swap(ag, bg),
        shift(ag, guest),
        shift(bg, guest),
        bs(ag, ah, gamma),
        bs(bg, bh, gamma),
        swap(ah, ag),
        swap(bh, bg),
    ]
    .iter()
    .fold(identity(), |acc, el| mul(el, &acc))
}

/// Probability of (k, l) for photons entering modes 1 and 3, mixing the
/// bosonic permanent with the distinguishable-particle sum.
fn pair_probability(u: &Mat, k: usize, l: usize, nu: f64) -> f64 {
    let (i, j) = (1, 3);
    if k == l {
        let amp = std::f64::consts::SQRT_2 * u[k][i] * u[k][j];
        let dist = (u[k][i] * u[k][j]).norm_sqr();
        nu * amp.norm_sqr() + (1.0 - nu) * dist
    } else {
        let perm = u[k][i] * u[l][j] + u[l][i] * u[k][j];
        let dist =
            u[k][i].norm_sqr() * u[l][j].norm_sqr() + u[l][i].norm_sqr() * u[k][j].norm_sqr();
        nu * perm.norm_sqr() + (1.0 - nu) * dist
    }
}

fn pattern_modes(p: &DetectionPattern) -> (usize, usize) {
    let counts = p.counts();
    let mut modes = counts
        .iter()
        .enumerate()
        .flat_map(|(m, &n)| std::iter::repeat_n(m, n as usize));
    (modes.next().unwrap(), modes.next().unwrap())
}

#[test]
fn permanent_oracle_matches_fock_and_closed_forms_on_grid() {
    for gamma in GAMMAS {
        for nu in NUS {
            let params = OpticsParams::new(gamma, nu, 0.0).unwrap();
            let u = interferometer(gamma, 0.0);
            let dist = outcome_distribution(&params).unwrap();
            let closed = simplified_probabilities(&params).unwrap();
            for p in DetectionPattern::two_photon_patterns() {
                let (k, l) = pattern_modes(&p);
                let want = pair_probability(&u, k, l, nu);
                let got = dist.probability(&p);
                assert!(
                    (got - want).abs() < 1e-10,
                    "{p} at ({gamma}, {nu}): {got} vs {want}"
                );
                let cf = closed.probability(&p);
                assert!((cf - want).abs() < 1e-10, "{p} closed form: {cf} vs {want}");
            }
        }
    }
}

#[test]
fn permanent_oracle_tracks_the_phase() {
    for phase in [0.3, 1.0, 2.5, 4.0] {
        let params = OpticsParams::new(0.8, 0.7, phase).unwrap();
        let u = interferometer(0.8, phase);
        let dist = outcome_distribution(&params).unwrap();
        for p in DetectionPattern::two_photon_patterns() {
            let (k, l) = pattern_modes(&p);
            assert!((dist.probability(&p) - pair_probability(&u, k, l, 0.7)).abs() < 1e-10);
        }
    }
}

/// The closed forms written out from scratch, over (1+γ)⁴.
fn hand_closed_forms(g: f64, nu: f64) -> ([f64; 4], [(DetectorPair, f64); 6]) {
    let z = (1.0 + g).powi(4);
    let double = g * g * (1.0 + nu) / z;
    let same = (g * (1.0 + g * g) - 2.0 * g * g * nu) / z;
    let cross_ok = (g * (1.0 + g * g) + 2.0 * g * g * nu) / z;
    (
        [double; 4],
        [
            (pair(Detector::A1, Detector::A2), same),
            (pair(Detector::B1, Detector::B2), same),
            (
                pair(Detector::A1, Detector::B1),
                (1.0 + g.powi(4) - 2.0 * g * g * nu) / z,
            ),
            (
                pair(Detector::A2, Detector::B2),
                2.0 * g * g * (1.0 - nu) / z,
            ),
            (pair(Detector::A1, Detector::B2), cross_ok),
            (pair(Detector::A2, Detector::B1), cross_ok),
        ],
    )
}

#[test]
fn analytic_matches_hand_written_closed_forms() {
    for gamma in [0.3, 0.5, 0.8, 1.0, 1.7] {
        for nu in NUS {
            let probs =
                simplified_probabilities(&OpticsParams::new(gamma, nu, 0.0).unwrap()).unwrap();
            let (doubles, pairs) = hand_closed_forms(gamma, nu);
            for (d, want) in Detector::ALL.iter().zip(doubles) {
                assert!((probs.two_photon(*d) - want).abs() < 1e-12);
            }
            for (pair, want) in pairs {
                assert!((probs.coincidence(pair) - want).abs() < 1e-12, "{pair}");
            }
        }
    }
}

#[test]
fn ideal_and_classical_limits() {
    let ideal = simplified_probabilities(&OpticsParams::new(1.0, 1.0, 0.0).unwrap()).unwrap();
    for d in Detector::ALL {
        assert!((ideal.two_photon(d) - 0.125).abs() < 1e-12);
    }
    let noint = simplified_probabilities(&OpticsParams::new(1.0, 0.0, 0.0).unwrap()).unwrap();
    for d in Detector::ALL {
        assert!((noint.two_photon(d) - 1.0 / 16.0).abs() < 1e-12);
    }
    for pair in DetectorPair::ALL {
        assert!((noint.coincidence(pair) - 0.125).abs() < 1e-12);
    }
}

/// Expected cost as an explicit series over the trial index.
fn series_cost(params: &OpticsParams) -> f64 {
    let p = simplified_probabilities(params).unwrap();
    let two: f64 = Detector::ALL.iter().map(|d| p.two_photon(*d)).sum::<f64>()
        + p.coincidence(pair(Detector::A1, Detector::A2))
        + p.coincidence(pair(Detector::B1, Detector::B2));
    let one = p.coincidence(pair(Detector::A1, Detector::B2))
        + p.coincidence(pair(Detector::A2, Detector::B1));
    let fail = 1.0 - two - one;
    // Trial k costs 4(k−1) for the failures, then 2 or 4 for the success.
    let mut total = 0.0;
    let mut reach = 1.0;
    for k in 0..10_000 {
        let spent = 4.0 * k as f64;
        total += reach * (two * (spent + 2.0) + one * (spent + 4.0));
        reach *= fail;
        if reach < 1e-300 {
            break;
        }
    }
    total
}

#[test]
fn expected_cost_matches_series_sum() {
    for gamma in [0.5, 0.8, 1.0, 2.0] {
        for nu in NUS {
            let params = OpticsParams::new(gamma, nu, 0.0).unwrap();
            let series = series_cost(&params);
            let closed = expected_cost(&params).unwrap();
            assert!(
                (series - closed).abs() < 1e-9,
                "({gamma}, {nu}): {series} vs {closed}"
            );
        }
    }
}

#[test]
fn cost_curve_decreases_in_visibility() {
    let grid: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
    let curve = cost_curve(0.8, &grid).unwrap();
    for w in curve.windows(2) {
        assert!(w[1].1 < w[0].1, "{:?} then {:?}", w[0], w[1]);
    }
    // Finite-difference slope is negative everywhere.
    let h = 1e-6;
    for nu in [0.01, 0.3, 0.845, 0.99] {
        let at = |v| expected_cost(&OpticsParams::new(0.8, v, 0.0).unwrap()).unwrap();
        assert!((at(nu + h) - at(nu - h)) / (2.0 * h) < 0.0);
    }
}

#[test]
fn success_probability_reference_values() {
    let at = |g, v| p_suc(&OpticsParams::new(g, v, 0.0).unwrap());
    assert!((at(1.0, 1.0) - 1.0).abs() < 1e-12);
    assert!((at(1.0, 0.0) - 0.75).abs() < 1e-12);
    assert!((at(0.8, 0.845) - 0.950).abs() < 1e-3);
}

#[test]
fn classical_optimum_by_grid_search() {
    let steps = 10_000;
    let (best, _) = (0..=steps)
        .map(|k| {
            let p = k as f64 / steps as f64;
            (
                p,
                classical_success_prob(&ClassicalParams::new(3, p).unwrap()),
            )
        })
        .fold((0.0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
    assert!((best - 0.5).abs() <= 1.0 / steps as f64);
    assert_eq!(optimal_p(3).unwrap(), 0.5);
}

#[test]
fn classical_cost_by_series_sum() {
    for n in 1..=6u32 {
        let success = classical_success_prob(&ClassicalParams::new(n, 0.5).unwrap());
        let per_round = 2.0 * n as f64;
        // Σ_k k·per_round·(1−s)^{k−1}·s
        let series: f64 = (1..5000)
            .map(|k| k as f64 * per_round * (1.0 - success).powi(k - 1) * success)
            .sum();
        assert!(
            (series - expected_classical_cost(n).unwrap()).abs() < 1e-9,
            "n = {n}"
        );
    }
    assert!((expected_classical_cost(2).unwrap() - 16.0 / 3.0).abs() < 1e-12);
}
