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

//! Exact few-photon simulation of linear-optical circuits.
//!
//! States are stored as sparse maps from occupation tuples to complex
//! amplitudes. An element acts on creation operators (`a_m† → Σ_k U[k][m] a_k†`)
//! and the product over photons is expanded term by term, so bosonic
//! enhancement for double occupation falls out of the `√(n!)` normalization.
//!
//! Mode layout for the four-mode circuit: `0` Alice host, `1` Alice guest,
//! `2` Bob host, `3` Bob guest. After [`run_qle_circuit`] the same indices hold
//! the detector modes `A1, A2, B1, B2`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::analytic::OpticsParams;
use crate::error::{check_range, QleError, Result};
use crate::montecarlo::{rng_from_seed, run_chunked};

/// Largest photon number a state may hold.
pub const MAX_PHOTONS: usize = 2;
/// Spatial modes in the leader-election circuit.
pub const MODES: usize = 4;

pub const ALICE_HOST: usize = 0;
pub const ALICE_GUEST: usize = 1;
pub const BOB_HOST: usize = 2;
pub const BOB_GUEST: usize = 3;

/// Tolerance for unitarity and normalization checks.
pub const UNITARY_TOL: f64 = 1e-12;

/// Photon counts per spatial mode.
pub type Occupation = [u8; MODES];

const PRUNE: f64 = 1e-30;
const LABELED_MODES: usize = MODES * LabeledFockState::LABELS;

#[derive(Clone, Debug, PartialEq)]
struct Amplitudes<const M: usize> {
    amps: BTreeMap<[u8; M], Complex64>,
}

impl<const M: usize> Amplitudes<M> {
    fn basis(occupation: [u8; M]) -> Result<Self> {
        let photons: usize = occupation.iter().map(|&n| n as usize).sum();
        if photons > MAX_PHOTONS {
            return Err(QleError::TooManyPhotons {
                photons,
                max: MAX_PHOTONS,
            });
        }
        let mut amps = BTreeMap::new();
        amps.insert(occupation, Complex64::new(1.0, 0.0));
        Ok(Self { amps })
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    fn photon_numbers(&self) -> impl Iterator<Item = usize> + '_ {
        self.amps
            .keys()
            .map(|occ| occ.iter().map(|&n| n as usize).sum())
    }

    /// Applies a linear map on creation operators. `map(m)` lists the output
    /// modes `k` and coefficients `U[k][m]` for a photon entering mode `m`.
    fn transform<F>(&self, map: F) -> Self
    where
        F: Fn(usize) -> Vec<(usize, Complex64)>,
    {
        let mut out: BTreeMap<[u8; M], Complex64> = BTreeMap::new();
        for (occ, &amp) in &self.amps {
            let mut terms: BTreeMap<[u8; M], Complex64> = BTreeMap::new();
            terms.insert([0; M], Complex64::new(1.0, 0.0));
            for (mode, &n) in occ.iter().enumerate() {
                for _ in 0..n {
                    let mut next = BTreeMap::new();
                    for (acc, coeff) in &terms {
                        for &(k, u) in &map(mode) {
                            let mut grown = *acc;
                            grown[k] += 1;
                            *next.entry(grown).or_insert(Complex64::new(0.0, 0.0)) += coeff * u;
                        }
                    }
                    terms = next;
                }
            }
            let in_norm = factorial_sqrt(occ);
            for (out_occ, coeff) in terms {
                let scale = factorial_sqrt(&out_occ) / in_norm;
                *out.entry(out_occ).or_insert(Complex64::new(0.0, 0.0)) += amp * coeff * scale;
            }
        }
        out.retain(|_, a| a.norm_sqr() > PRUNE);
        Self { amps: out }
    }
}

fn factorial_sqrt(occ: &[u8]) -> f64 {
    occ.iter()
        .map(|&n| (1..=n as u32).product::<u32>() as f64)
        .product::<f64>()
        .sqrt()
}

/// A linear-optical element acting on one or two spatial modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum OpticalElement {
    /// Beam splitter with outputs on the same two modes. Transmission keeps a
    /// photon in its mode with amplitude `+√T`; reflection sends `mode_b` to
    /// `mode_a` with `+√R` and `mode_a` to `mode_b` with `−√R`.
    BeamSplitter {
        mode_a: usize,
        mode_b: usize,
        reflectance: f64,
        transmittance: f64,
    },
    PhaseShift {
        mode: usize,
        angle: f64,
    },
    PortSwap {
        mode_a: usize,
        mode_b: usize,
    },
}

impl OpticalElement {
    /// Lossless beam splitter with `T = 1 − R`.
    pub fn beam_splitter(mode_a: usize, mode_b: usize, reflectance: f64) -> Self {
        Self::BeamSplitter {
            mode_a,
            mode_b,
            reflectance,
            transmittance: 1.0 - reflectance,
        }
    }

    /// Beam splitter with branching ratio `gamma = R/T`.
    pub fn with_branching_ratio(mode_a: usize, mode_b: usize, gamma: f64) -> Self {
        Self::BeamSplitter {
            mode_a,
            mode_b,
            reflectance: gamma / (1.0 + gamma),
            transmittance: 1.0 / (1.0 + gamma),
        }
    }

    pub fn phase_shift(mode: usize, angle: f64) -> Self {
        Self::PhaseShift { mode, angle }
    }

    pub fn port_swap(mode_a: usize, mode_b: usize) -> Self {
        Self::PortSwap { mode_a, mode_b }
    }

    pub fn validate(&self, modes: usize) -> Result<()> {
        let check_mode = |mode: usize| {
            if mode < modes {
                Ok(())
            } else {
                Err(QleError::InvalidMode { mode, modes })
            }
        };
        match *self {
            Self::BeamSplitter {
                mode_a,
                mode_b,
                reflectance,
                transmittance,
            } => {
                check_mode(mode_a)?;
                check_mode(mode_b)?;
                if mode_a == mode_b {
                    return Err(QleError::DuplicateMode(mode_a));
                }
                let sum = reflectance + transmittance;
                let in_unit = |x: f64| (0.0..=1.0).contains(&x);
                if !in_unit(reflectance)
                    || !in_unit(transmittance)
                    || (sum - 1.0).abs() > UNITARY_TOL
                {
                    return Err(QleError::NonUnitary {
                        reflectance,
                        transmittance,
                        sum,
                    });
                }
                Ok(())
            }
            Self::PhaseShift { mode, angle } => {
                check_mode(mode)?;
                check_range("angle", angle, true, "a finite angle in radians")
            }
            Self::PortSwap { mode_a, mode_b } => {
                check_mode(mode_a)?;
                check_mode(mode_b)?;
                if mode_a == mode_b {
                    return Err(QleError::DuplicateMode(mode_a));
                }
                Ok(())
            }
        }
    }

    /// Output modes and amplitudes for a single photon entering `mode`.
    fn propagate(&self, mode: usize) -> Vec<(usize, Complex64)> {
        let real = |x: f64| Complex64::new(x, 0.0);
        match *self {
            Self::BeamSplitter {
                mode_a,
                mode_b,
                reflectance,
                transmittance,
            } => {
                let t = transmittance.sqrt();
                let r = reflectance.sqrt();
                if mode == mode_a {
                    vec![(mode_a, real(t)), (mode_b, real(-r))]
                } else if mode == mode_b {
                    vec![(mode_a, real(r)), (mode_b, real(t))]
                } else {
                    vec![(mode, real(1.0))]
                }
            }
            Self::PhaseShift { mode: m, angle } if m == mode => {
                vec![(mode, Complex64::from_polar(1.0, angle))]
            }
            Self::PortSwap { mode_a, mode_b } if mode == mode_a => vec![(mode_b, real(1.0))],
            Self::PortSwap { mode_a, mode_b } if mode == mode_b => vec![(mode_a, real(1.0))],
            _ => vec![(mode, real(1.0))],
        }
    }

    /// The 2×2 single-photon transform on the element's modes, `u[out][in]`.
    pub fn mode_matrix(&self) -> [[Complex64; 2]; 2] {
        let (a, b) = match *self {
            Self::BeamSplitter { mode_a, mode_b, .. } | Self::PortSwap { mode_a, mode_b } => {
                (mode_a, mode_b)
            }
            Self::PhaseShift { mode, .. } => (mode, usize::MAX),
        };
        let mut u = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (col, input) in [a, b].into_iter().enumerate() {
            if input == usize::MAX {
                u[1][1] = Complex64::new(1.0, 0.0);
                continue;
            }
            for (k, amp) in self.propagate(input) {
                let row = if k == a { 0 } else { 1 };
                u[row][col] = amp;
            }
        }
        u
    }
}

/// Pure state of up to two indistinguishable photons in four spatial modes.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    inner: Amplitudes<MODES>,
}

impl FockState {
    pub fn basis(occupation: Occupation) -> Result<Self> {
        Ok(Self {
            inner: Amplitudes::basis(occupation)?,
        })
    }

    /// Builds a state from explicit amplitudes. The amplitudes are not
    /// renormalized.
    pub fn from_amplitudes<I>(amplitudes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Occupation, Complex64)>,
    {
        let mut amps = BTreeMap::new();
        for (occ, amp) in amplitudes {
            let photons: usize = occ.iter().map(|&n| n as usize).sum();
            if photons > MAX_PHOTONS {
                return Err(QleError::TooManyPhotons {
                    photons,
                    max: MAX_PHOTONS,
                });
            }
            *amps.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        Ok(Self {
            inner: Amplitudes { amps },
        })
    }

    pub fn amplitude(&self, occupation: &Occupation) -> Complex64 {
        self.inner
            .amps
            .get(occupation)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.inner.amps.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner.norm_sqr()
    }

    /// Photon number shared by every basis state in the support, or `None`
    /// for the empty state or a superposition of different photon numbers.
    pub fn photon_number(&self) -> Option<usize> {
        let mut numbers = self.inner.photon_numbers();
        let first = numbers.next()?;
        numbers.all(|n| n == first).then_some(first)
    }

    pub fn apply(&self, element: &OpticalElement) -> Result<Self> {
        element.validate(MODES)?;
        Ok(Self {
            inner: self.inner.transform(|m| element.propagate(m)),
        })
    }

    /// Detection probability of each occupation tuple.
    pub fn probabilities(&self) -> BTreeMap<Occupation, f64> {
        self.inner
            .amps
            .iter()
            .map(|(occ, a)| (*occ, a.norm_sqr()))
            .collect()
    }

    /// Swaps Alice's modes with Bob's (`0 ↔ 2`, `1 ↔ 3`).
    pub fn mirrored(&self) -> Self {
        let amps = self
            .inner
            .amps
            .iter()
            .map(|(occ, a)| ([occ[2], occ[3], occ[0], occ[1]], *a))
            .collect();
        Self {
            inner: Amplitudes { amps },
        }
    }
}

/// Photons carrying an internal label that detectors cannot resolve. Two
/// photons with different labels never interfere, which models perfectly
/// distinguishable wave packets.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFockState {
    // index = mode * LABELS + label
    inner: Amplitudes<LABELED_MODES>,
}

impl LabeledFockState {
    pub const LABELS: usize = 2;

    /// One photon per `(mode, label)` entry.
    pub fn from_photons(photons: &[(usize, usize)]) -> Result<Self> {
        let mut occ = [0u8; LABELED_MODES];
        for &(mode, label) in photons {
            if mode >= MODES {
                return Err(QleError::InvalidMode { mode, modes: MODES });
            }
            if label >= Self::LABELS {
                return Err(QleError::OutOfRange {
                    name: "label",
                    value: label as f64,
                    expected: "0 or 1",
                });
            }
            occ[mode * Self::LABELS + label] += 1;
        }
        Ok(Self {
            inner: Amplitudes::basis(occ)?,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner.norm_sqr()
    }

    pub fn apply(&self, element: &OpticalElement) -> Result<Self> {
        element.validate(MODES)?;
        let inner = self.inner.transform(|index| {
            let (mode, label) = (index / Self::LABELS, index % Self::LABELS);
            element
                .propagate(mode)
                .into_iter()
                .map(|(k, u)| (k * Self::LABELS + label, u))
                .collect()
        });
        Ok(Self { inner })
    }

    /// Probabilities over spatial occupation, summed over internal labels.
    pub fn detection_probabilities(&self) -> BTreeMap<Occupation, f64> {
        let mut out = BTreeMap::new();
        for (occ, a) in &self.inner.amps {
            let mut spatial = [0u8; MODES];
            for (index, &n) in occ.iter().enumerate() {
                spatial[index / Self::LABELS] += n;
            }
            *out.entry(spatial).or_insert(0.0) += a.norm_sqr();
        }
        out
    }
}

/// One photon in each guest port, `|0_h 1_g⟩_A ⊗ |0_h 1_g⟩_B`.
pub fn initial_state() -> FockState {
    let mut occ = [0u8; MODES];
    occ[ALICE_GUEST] = 1;
    occ[BOB_GUEST] = 1;
    FockState::basis(occ).expect("two photons are within the cap")
}

pub fn apply_element(state: &FockState, element: &OpticalElement) -> Result<FockState> {
    state.apply(element)
}

/// Element sequence of the leader-election circuit.
///
/// Both parties split their guest photon (BS1), exchange guest ports, shift
/// each guest mode by `guest_phase`, and recombine host and guest on BS2. BS2
/// takes the guest as its first input, and its first output port feeds
/// detector 1; the closing port swaps route that output to the `A1`/`B1` slot.
pub fn qle_circuit(gamma: f64, guest_phase: f64) -> Result<Vec<OpticalElement>> {
    check_range("gamma", gamma, gamma > 0.0, "gamma > 0")?;
    let splitter = |a, b| OpticalElement::with_branching_ratio(a, b, gamma);
    Ok(vec![
        splitter(ALICE_HOST, ALICE_GUEST),
        splitter(BOB_HOST, BOB_GUEST),
        OpticalElement::port_swap(ALICE_GUEST, BOB_GUEST),
        OpticalElement::phase_shift(ALICE_GUEST, guest_phase),
        OpticalElement::phase_shift(BOB_GUEST, guest_phase),
        splitter(ALICE_GUEST, ALICE_HOST),
        splitter(BOB_GUEST, BOB_HOST),
        OpticalElement::port_swap(ALICE_HOST, ALICE_GUEST),
        OpticalElement::port_swap(BOB_HOST, BOB_GUEST),
    ])
}

pub fn run_circuit(state: &FockState, elements: &[OpticalElement]) -> Result<FockState> {
    elements.iter().try_fold(state.clone(), |s, e| s.apply(e))
}

/// Final state of the circuit, indexed by detector `(A1, A2, B1, B2)`.
pub fn run_qle_circuit(gamma: f64, guest_phase: f64) -> Result<FockState> {
    run_circuit(&initial_state(), &qle_circuit(gamma, guest_phase)?)
}

/// Guest-mode phase that realizes the relative phase `params.phase` on top of
/// the protocol's π/2 local operation. Each photon carries half of it.
pub fn guest_phase_for(params: &OpticsParams) -> f64 {
    FRAC_PI_2 + params.phase / 2.0
}

/// Detection-pattern probabilities for partially distinguishable photons:
/// `ν · P_indistinguishable + (1 − ν) · P_distinguishable`.
pub fn outcome_distribution(params: &OpticsParams) -> Result<OutcomeDistribution> {
    let circuit = qle_circuit(params.gamma, guest_phase_for(params))?;
    let coherent = run_circuit(&initial_state(), &circuit)?.probabilities();
    let labeled = circuit.iter().try_fold(
        LabeledFockState::from_photons(&[(ALICE_GUEST, 0), (BOB_GUEST, 1)])?,
        |s, e| s.apply(e),
    )?;
    let incoherent = labeled.detection_probabilities();
    let nu = params.nu;
    let probs = DetectionPattern::two_photon_patterns()
        .into_iter()
        .map(|p| {
            let occ = p.counts();
            let a = coherent.get(&occ).copied().unwrap_or(0.0);
            let b = incoherent.get(&occ).copied().unwrap_or(0.0);
            (p, nu * a + (1.0 - nu) * b)
        })
        .collect();
    Ok(OutcomeDistribution(probs))
}

/// Detector at the circuit output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Detector {
    A1,
    A2,
    B1,
    B2,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::A1, Detector::A2, Detector::B1, Detector::B2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Detector::A1 => "A1",
            Detector::A2 => "A2",
            Detector::B1 => "B1",
            Detector::B2 => "B2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s.trim())
    }

    pub fn is_alice(self) -> bool {
        matches!(self, Detector::A1 | Detector::A2)
    }

    /// Detector "1" of either party.
    pub fn is_port_one(self) -> bool {
        matches!(self, Detector::A1 | Detector::B1)
    }

    pub fn mirrored(self) -> Self {
        match self {
            Detector::A1 => Detector::B1,
            Detector::A2 => Detector::B2,
            Detector::B1 => Detector::A1,
            Detector::B2 => Detector::A2,
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unordered pair of distinct detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DetectorPair(Detector, Detector);

impl DetectorPair {
    /// The six pairs in lexicographic order.
    pub const ALL: [DetectorPair; 6] = [
        DetectorPair(Detector::A1, Detector::A2),
        DetectorPair(Detector::A1, Detector::B1),
        DetectorPair(Detector::A1, Detector::B2),
        DetectorPair(Detector::A2, Detector::B1),
        DetectorPair(Detector::A2, Detector::B2),
        DetectorPair(Detector::B1, Detector::B2),
    ];

    /// `None` when both detectors are the same.
    pub fn new(a: Detector, b: Detector) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Self(a, b)),
            std::cmp::Ordering::Greater => Some(Self(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn first(self) -> Detector {
        self.0
    }

    pub fn second(self) -> Detector {
        self.1
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&p| p == self).unwrap()
    }

    pub fn mirrored(self) -> Self {
        Self::new(self.0.mirrored(), self.1.mirrored()).unwrap()
    }
}

impl fmt::Display for DetectorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}&{}", self.0, self.1)
    }
}

/// Photon counts registered by the four detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectionPattern {
    counts: [u8; MODES],
    threshold: bool,
}

impl DetectionPattern {
    /// Photon-number-resolved pattern.
    pub fn new(counts: [u8; MODES]) -> Self {
        Self {
            counts,
            threshold: false,
        }
    }

    pub fn double(detector: Detector) -> Self {
        let mut counts = [0; MODES];
        counts[detector.index()] = 2;
        Self::new(counts)
    }

    pub fn coincidence(pair: DetectorPair) -> Self {
        let mut counts = [0; MODES];
        counts[pair.first().index()] = 1;
        counts[pair.second().index()] = 1;
        Self::new(counts)
    }

    /// All ten two-photon patterns: the four double detections in detector
    /// order, then the six coincidences in [`DetectorPair::ALL`] order.
    pub fn two_photon_patterns() -> [DetectionPattern; 10] {
        let mut out = [Self::new([0; MODES]); 10];
        for (slot, d) in out.iter_mut().zip(Detector::ALL) {
            *slot = Self::double(d);
        }
        for (slot, p) in out[4..].iter_mut().zip(DetectorPair::ALL) {
            *slot = Self::coincidence(p);
        }
        out
    }

    pub fn counts(&self) -> [u8; MODES] {
        self.counts
    }

    pub fn count(&self, detector: Detector) -> u8 {
        self.counts[detector.index()]
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().map(|&n| n as u32).sum()
    }

    pub fn is_threshold(&self) -> bool {
        self.threshold
    }

    /// Click/no-click view of the pattern.
    pub fn to_threshold(&self) -> Self {
        Self {
            counts: self.counts.map(|n| n.min(1)),
            threshold: true,
        }
    }

    pub fn fired(&self) -> impl Iterator<Item = Detector> + '_ {
        Detector::ALL.into_iter().filter(|d| self.count(*d) > 0)
    }

    /// Exchanges Alice's detectors with Bob's.
    pub fn mirrored(&self) -> Self {
        let c = self.counts;
        Self {
            counts: [c[2], c[3], c[0], c[1]],
            threshold: self.threshold,
        }
    }

    pub fn as_pair(&self) -> Option<DetectorPair> {
        let fired: Vec<_> = self.fired().collect();
        match fired.as_slice() {
            [a, b] if self.count(*a) == 1 && self.count(*b) == 1 => DetectorPair::new(*a, *b),
            _ => None,
        }
    }

    pub fn as_double(&self) -> Option<Detector> {
        let fired: Vec<_> = self.fired().collect();
        match fired.as_slice() {
            [d] if self.count(*d) == 2 => Some(*d),
            _ => None,
        }
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = self.as_double() {
            return write!(f, "{d}x2");
        }
        if let Some(p) = self.as_pair() {
            return write!(f, "{p}");
        }
        let parts: Vec<String> = self
            .fired()
            .map(|d| format!("{d}:{}", self.count(d)))
            .collect();
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

impl Serialize for DetectionPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Probability assigned to each detection pattern.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct OutcomeDistribution(BTreeMap<DetectionPattern, f64>);

impl OutcomeDistribution {
    pub fn new(probabilities: BTreeMap<DetectionPattern, f64>) -> Self {
        Self(probabilities)
    }

    pub fn point_mass(pattern: DetectionPattern) -> Self {
        Self(BTreeMap::from([(pattern, 1.0)]))
    }

    pub fn probability(&self, pattern: &DetectionPattern) -> f64 {
        self.0.get(pattern).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DetectionPattern, &f64)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Relabels Alice ↔ Bob.
    pub fn mirrored(&self) -> Self {
        Self(self.0.iter().map(|(p, &q)| (p.mirrored(), q)).collect())
    }
}

impl FromIterator<(DetectionPattern, f64)> for OutcomeDistribution {
    fn from_iter<I: IntoIterator<Item = (DetectionPattern, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Inverse-CDF sampler over a normalized pattern distribution.
#[derive(Clone, Debug)]
pub struct PatternSampler {
    patterns: Vec<DetectionPattern>,
    cumulative: Vec<f64>,
}

/// Allowed deviation of a distribution's total from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

impl PatternSampler {
    pub fn new(dist: &OutcomeDistribution) -> Result<Self> {
        let total = dist.total();
        let negative = dist.iter().any(|(_, &p)| p < 0.0 || !p.is_finite());
        if negative || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(QleError::Unnormalized(total));
        }
        let mut patterns = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (pattern, &p) in dist.iter() {
            if p > 0.0 {
                acc += p;
                patterns.push(*pattern);
                cumulative.push(acc);
            }
        }
        Ok(Self {
            patterns,
            cumulative,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DetectionPattern {
        let u: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.patterns[idx.min(self.patterns.len() - 1)]
    }
}

/// Draws one pattern from `dist` using the stream seeded by `rng_seed`.
pub fn sample_pattern(dist: &OutcomeDistribution, rng_seed: u64) -> Result<DetectionPattern> {
    let sampler = PatternSampler::new(dist)?;
    Ok(sampler.sample(&mut rng_from_seed(rng_seed)))
}

/// Histogram of `draws` samples from `dist`. Parallel, and reproducible for a
/// given seed regardless of thread count.
pub fn sample_counts(
    dist: &OutcomeDistribution,
    draws: u64,
    rng_seed: u64,
) -> Result<BTreeMap<DetectionPattern, u64>> {
    let sampler = PatternSampler::new(dist)?;
    let partials = run_chunked(draws, rng_seed, |rng, n| {
        let mut counts: BTreeMap<DetectionPattern, u64> = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(sampler.sample(rng)).or_default() += 1;
        }
        counts
    });
    let mut counts: BTreeMap<DetectionPattern, u64> = dist.iter().map(|(p, _)| (*p, 0)).collect();
    for part in partials {
        for (p, n) in part {
            *counts.entry(p).or_default() += n;
        }
    }
    Ok(counts)
}
