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

//! Closed-form detection probabilities for imperfect two-photon interference.
//!
//! All probabilities share the normalization `(1 + γ)⁴`, so the four
//! two-photon detections and six coincidences are exhaustive. The relative
//! phase is measured from the protocol's operating point (π/2 on each guest
//! port); at `phase = 0` the cross-party coincidences A1&B1 and A2&B2 are
//! fully suppressed for `ν = γ = 1`.

use serde::Serialize;

use crate::error::{check_range, Result};
use crate::fock::{DetectionPattern, Detector, DetectorPair, OutcomeDistribution};

/// Branching ratio, visibility and relative phase of the interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OpticsParams {
    /// Beam-splitter branching ratio `R/T`.
    pub gamma: f64,
    /// Two-photon interference visibility in `[0, 1]`.
    pub nu: f64,
    /// Relative host/guest phase `ω₀(δt_A + δt_B)/2` in radians.
    pub phase: f64,
}

impl OpticsParams {
    pub fn new(gamma: f64, nu: f64, phase: f64) -> Result<Self> {
        let params = Self { gamma, nu, phase };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("gamma", self.gamma, self.gamma > 0.0, "gamma > 0")?;
        check_range(
            "nu",
            self.nu,
            (0.0..=1.0).contains(&self.nu),
            "0 <= nu <= 1",
        )?;
        check_range("phase", self.phase, true, "a finite angle in radians")
    }

    pub fn reflectance(&self) -> f64 {
        self.gamma / (1.0 + self.gamma)
    }

    pub fn transmittance(&self) -> f64 {
        1.0 / (1.0 + self.gamma)
    }

    /// Interference weight of the cross-party coincidences, `ν·cos(phase)`.
    fn cross_visibility(&self) -> f64 {
        self.nu * self.phase.cos()
    }
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            nu: 1.0,
            phase: 0.0,
        }
    }
}

/// Delays and spectral widths of the photon-pair source and interferometers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FullModelParams {
    /// Host minus guest path delay at Alice (s).
    pub dt_a: f64,
    /// Host minus guest path delay at Bob (s).
    pub dt_b: f64,
    /// Down-converted photon bandwidth Δω (rad/s).
    pub d_omega: f64,
    /// Pump bandwidth Δω_p (rad/s).
    pub d_omega_p: f64,
    /// Center frequency ω₀ (rad/s).
    pub omega_0: f64,
}

impl FullModelParams {
    pub fn validate(&self) -> Result<()> {
        check_range("dt_a", self.dt_a, true, "a finite delay")?;
        check_range("dt_b", self.dt_b, true, "a finite delay")?;
        check_range("d_omega", self.d_omega, self.d_omega >= 0.0, "d_omega >= 0")?;
        check_range(
            "d_omega_p",
            self.d_omega_p,
            self.d_omega_p >= 0.0,
            "d_omega_p >= 0",
        )?;
        check_range("omega_0", self.omega_0, true, "a finite frequency")
    }

    /// Single-party wave-packet overlap `exp(−Δω²δt²/2)` for Alice and Bob.
    pub fn local_visibilities(&self) -> (f64, f64) {
        (
            visibility_from_delay(self.d_omega, self.dt_a),
            visibility_from_delay(self.d_omega, self.dt_b),
        )
    }

    /// Cross-party interference weight: both Gaussian envelopes times the
    /// fringe `cos(ω₀(δt_A + δt_B)/2)`.
    pub fn cross_term(&self) -> f64 {
        let sum = self.dt_a + self.dt_b;
        let diff = self.dt_a - self.dt_b;
        let pump = (-self.d_omega_p.powi(2) * sum.powi(2) / 32.0).exp();
        let pair = (-self.d_omega.powi(2) * diff.powi(2) / 8.0).exp();
        pump * pair * self.fringe_phase().cos()
    }

    pub fn fringe_phase(&self) -> f64 {
        self.omega_0 * (self.dt_a + self.dt_b) / 2.0
    }
}

/// Temporal overlap `exp(−Δω²δt²/2)` of two Gaussian wave packets.
pub fn visibility_from_delay(d_omega: f64, dt: f64) -> f64 {
    (-(d_omega * dt).powi(2) / 2.0).exp()
}

/// The ten two-photon detection probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatternProbabilities {
    /// Two photons at one detector, indexed by [`Detector::index`].
    pub p2: [f64; 4],
    /// Coincidences, indexed by [`DetectorPair::index`].
    pub coin: [f64; 6],
}

impl PatternProbabilities {
    pub fn two_photon(&self, detector: Detector) -> f64 {
        self.p2[detector.index()]
    }

    pub fn coincidence(&self, pair: DetectorPair) -> f64 {
        self.coin[pair.index()]
    }

    /// Probability of a photon-number-resolved two-photon pattern; zero for
    /// anything else.
    pub fn probability(&self, pattern: &DetectionPattern) -> f64 {
        if pattern.is_threshold() {
            return 0.0;
        }
        if let Some(d) = pattern.as_double() {
            self.two_photon(d)
        } else if let Some(pair) = pattern.as_pair() {
            self.coincidence(pair)
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        self.p2.iter().sum::<f64>() + self.coin.iter().sum::<f64>()
    }

    pub fn entries(&self) -> impl Iterator<Item = (DetectionPattern, f64)> + '_ {
        DetectionPattern::two_photon_patterns()
            .into_iter()
            .map(move |p| (p, self.probability(&p)))
    }

    pub fn to_distribution(&self) -> OutcomeDistribution {
        self.entries().collect()
    }
}

/// Assembles the ten probabilities from the local visibilities of each party
/// and the cross-party interference weight.
fn assemble(gamma: f64, nu_a: f64, nu_b: f64, cross: f64) -> PatternProbabilities {
    let g = gamma;
    let g2 = g * g;
    let norm = (1.0 + g).powi(4);
    let double = |nu: f64| g2 * (1.0 + nu) / norm;
    let same_party = |nu: f64| (g * (1.0 + g2) - 2.0 * g2 * nu) / norm;
    let both_one = (1.0 + g2 * g2 - 2.0 * g2 * cross) / norm;
    let both_two = 2.0 * g2 * (1.0 - cross) / norm;
    let success = (g * (1.0 + g2) + 2.0 * g2 * cross) / norm;
    PatternProbabilities {
        p2: [double(nu_a), double(nu_a), double(nu_b), double(nu_b)],
        // A1A2, A1B1, A1B2, A2B1, A2B2, B1B2
        coin: [
            same_party(nu_a),
            both_one,
            success,
            success,
            both_two,
            same_party(nu_b),
        ],
    }
}

/// Probabilities under equal delays for both parties, `Δω_p = 2Δω` and the
/// given relative phase. At `phase = 0` these are the standard ν-parameterized
/// forms; a nonzero phase scales the cross-party interference by `cos(phase)`.
pub fn simplified_probabilities(params: &OpticsParams) -> Result<PatternProbabilities> {
    params.validate()?;
    Ok(assemble(
        params.gamma,
        params.nu,
        params.nu,
        params.cross_visibility(),
    ))
}

/// Probabilities from the unsimplified delay/bandwidth model with Gaussian
/// spectra. The cross-party fringe enters with the sign fixed by the π/2 local
/// operation, so zero delays reproduce the ideal election.
pub fn full_probabilities(gamma: f64, full: &FullModelParams) -> Result<PatternProbabilities> {
    check_range("gamma", gamma, gamma > 0.0, "gamma > 0")?;
    full.validate()?;
    let (nu_a, nu_b) = full.local_visibilities();
    Ok(assemble(gamma, nu_a, nu_b, full.cross_term()))
}

/// Probability that one party receives both photons (two-photon detections
/// and same-party coincidences): `2γ/(1+γ)²`, independent of ν.
pub fn p2_suc(params: &OpticsParams) -> f64 {
    let g = params.gamma;
    2.0 * g / (1.0 + g).powi(2)
}

/// Probability of a cross-party success coincidence (A1&B2 or A2&B1):
/// `2γ(1 + 2νγ + γ²)/(1+γ)⁴`.
pub fn p1_suc(params: &OpticsParams) -> f64 {
    let g = params.gamma;
    let v = params.cross_visibility();
    2.0 * g * (1.0 + 2.0 * v * g + g * g) / (1.0 + g).powi(4)
}

/// Success probability per trial, `4γ/(1+γ)⁴·[1 + (1+ν)γ + γ²]`.
pub fn p_suc(params: &OpticsParams) -> f64 {
    let g = params.gamma;
    let v = params.cross_visibility();
    4.0 * g / (1.0 + g).powi(4) * (1.0 + (1.0 + v) * g + g * g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64, nu: f64) -> OpticsParams {
        OpticsParams::new(gamma, nu, 0.0).unwrap()
    }

    #[test]
    fn ideal_probabilities() {
        let p = simplified_probabilities(&params(1.0, 1.0)).unwrap();
        assert_eq!(p.p2, [0.125; 4]);
        assert_eq!(p.coin, [0.0, 0.0, 0.25, 0.25, 0.0, 0.0]);
    }

    #[test]
    fn no_interference_probabilities() {
        let p = simplified_probabilities(&params(1.0, 0.0)).unwrap();
        assert_eq!(p.p2, [1.0 / 16.0; 4]);
        assert_eq!(p.coin, [0.125; 6]);
    }

    #[test]
    fn experiment_parameters_give_95_percent() {
        let q = params(0.8, 0.845);
        let p = simplified_probabilities(&q).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-12);
        assert!((p_suc(&q) - 0.950).abs() < 5e-4);
        // class (iv) is what remains
        let fail = p.coincidence(DetectorPair::ALL[1]) + p.coincidence(DetectorPair::ALL[4]);
        assert!((1.0 - fail - p_suc(&q)).abs() < 1e-12);
    }

    #[test]
    fn two_photon_success_values() {
        assert_eq!(p2_suc(&params(1.0, 0.3)), 0.5);
        assert!((p2_suc(&params(0.8, 0.3)) - 1.6 / 3.24).abs() < 1e-15);
        assert!((p2_suc(&params(0.8, 0.3)) - 0.4938).abs() < 1e-4);
        assert_eq!(p2_suc(&params(0.7, 0.0)), p2_suc(&params(0.7, 1.0)));
    }

    #[test]
    fn single_photon_success_values() {
        assert!((p1_suc(&params(1.0, 1.0)) - 0.5).abs() < 1e-15);
        assert!((p1_suc(&params(1.0, 0.0)) - 0.25).abs() < 1e-15);
        let q = params(0.8, 0.845);
        assert!((p1_suc(&q) - 0.4560).abs() < 1e-4);
        assert!((p1_suc(&q) + p2_suc(&q) - 0.950).abs() < 5e-4);
    }

    #[test]
    fn success_probability_values() {
        assert!((p_suc(&params(1.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!((p_suc(&params(1.0, 0.0)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn full_model_at_zero_delay_is_ideal() {
        let full = FullModelParams {
            dt_a: 0.0,
            dt_b: 0.0,
            d_omega: 2.0e12,
            d_omega_p: 4.0e12,
            omega_0: 4.66e15,
        };
        for gamma in [0.5, 0.8, 1.0, 1.7] {
            let a = full_probabilities(gamma, &full).unwrap();
            let b = simplified_probabilities(&params(gamma, 1.0)).unwrap();
            for ((_, x), (_, y)) in a.entries().zip(b.entries()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_model_half_overlap() {
        // Δω²δt²/2 = ln 2 gives ν = 1/2; ω₀ chosen so the fringe phase is 2π
        let d_omega = 1.0e13;
        let dt = (2.0 * 2f64.ln()).sqrt() / d_omega;
        let full = FullModelParams {
            dt_a: dt,
            dt_b: dt,
            d_omega,
            d_omega_p: 2.0 * d_omega,
            omega_0: 2.0 * std::f64::consts::PI / dt,
        };
        let a = full_probabilities(0.8, &full).unwrap();
        let b = simplified_probabilities(&params(0.8, 0.5)).unwrap();
        for (x, y) in a.p2.iter().chain(&a.coin).zip(b.p2.iter().chain(&b.coin)) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn full_model_fringe_is_antiphase() {
        let dt = 1.0e-13;
        let mut success = Vec::new();
        let mut failure = Vec::new();
        for k in 0..64 {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            let full = FullModelParams {
                dt_a: dt,
                dt_b: dt,
                d_omega: 1.0e12,
                d_omega_p: 2.0e12,
                omega_0: theta / dt,
            };
            let p = full_probabilities(1.0, &full).unwrap();
            assert!((p.total() - 1.0).abs() < 1e-12);
            success.push(p.coincidence(DetectorPair::ALL[2]));
            failure.push(p.coincidence(DetectorPair::ALL[4]));
        }
        let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
        let argmin = |v: &[f64]| (0..v.len()).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
        assert_eq!(argmax(&success), argmin(&failure));
        assert_eq!(argmin(&success), argmax(&failure));
        assert_eq!(argmax(&success), 0);
        assert_eq!(argmin(&success), 32);
    }

    #[test]
    fn unequal_delays_stay_normalized() {
        let full = FullModelParams {
            dt_a: 3.0e-13,
            dt_b: -1.0e-13,
            d_omega: 4.0e12,
            d_omega_p: 5.0e12,
            omega_0: 2.3e15,
        };
        let p = full_probabilities(0.6, &full).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_range_violations() {
        assert!(OpticsParams::new(0.0, 0.5, 0.0).is_err());
        assert!(OpticsParams::new(1.0, 1.5, 0.0).is_err());
        assert!(OpticsParams::new(1.0, -0.1, 0.0).is_err());
        assert!(OpticsParams::new(f64::NAN, 0.5, 0.0).is_err());
        let bad = OpticsParams {
            gamma: 1.0,
            nu: 2.0,
            phase: 0.0,
        };
        assert!(simplified_probabilities(&bad).is_err());
        let full = FullModelParams {
            dt_a: 0.0,
            dt_b: 0.0,
            d_omega: -1.0,
            d_omega_p: 0.0,
            omega_0: 0.0,
        };
        assert!(full_probabilities(1.0, &full).is_err());
        assert!(full_probabilities(
            -1.0,
            &FullModelParams {
                d_omega: 0.0,
                ..full
            }
        )
        .is_err());
    }
}
