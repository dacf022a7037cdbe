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

//! Two-photon interference fringes: synthetic scans and the shared-visibility
//! sinusoid fit.
//!
//! The class-(iii) series is A1&B2 and the class-(iv) series is A2&B2. Both
//! carry the same cross-party interference term with opposite sign. At
//! branching ratio γ the (iv) series has contrast ν and the (iii) series
//! `2γν/(1+γ²)`, which equals ν for balanced splitters.

use std::fmt::Write as _;
use std::path::Path;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DVector, Dyn, Matrix3, OMatrix, Vector3, Vector5, U5};
use rayon::prelude::*;
use serde::Serialize;

use super::{csv_error, csv_reader, expect_header, line_of, multinomial, parse_error, read_file};
use crate::analytic::{simplified_probabilities, OpticsParams};
use crate::error::{check_range, QleError, Result};
use crate::fock::{Detector, DetectorPair};
use crate::montecarlo::{derive_seed, rng_from_seed};

/// Fewest samples accepted by [`fit_visibility`].
pub const MIN_FIT_SAMPLES: usize = 5;

const FREQUENCY_CANDIDATES: usize = 2000;
// LM evaluation budget, in multiples of (parameters + 1)
const LM_PATIENCE: usize = 500;
/// Amplitude-to-noise ratio below which a scan is treated as flat.
const SIGNIFICANCE: f64 = 4.0;
const REWEIGHT_PASSES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FringeSample {
    /// Phase proxy: radians for generated scans, piezo units for recorded ones.
    pub control: f64,
    pub counts_iii: f64,
    pub counts_iv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FringeScan {
    pub samples: Vec<FringeSample>,
    /// Branching ratio of the splitters the scan was taken with.
    pub gamma: f64,
}

impl FringeScan {
    pub fn new(samples: Vec<FringeSample>, gamma: f64) -> Result<Self> {
        check_range("gamma", gamma, gamma > 0.0, "gamma > 0")?;
        for s in &samples {
            check_range("control", s.control, true, "a finite control value")?;
            for c in [s.counts_iii, s.counts_iv] {
                check_range("counts", c, c >= 0.0, "counts >= 0")?;
            }
        }
        Ok(Self { samples, gamma })
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.samples, gamma)
    }

    /// Parses `control,counts_iii,counts_iv` rows. The branching ratio is
    /// taken as 1; use [`FringeScan::with_gamma`] otherwise.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv_reader(text);
        expect_header(&mut reader, source, &["control", "counts_iii", "counts_iv"])?;
        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(source, e))?;
            let line = line_of(&record);
            if record.len() != 3 {
                return Err(parse_error(
                    source,
                    line,
                    record.len().min(3) + 1,
                    format!("expected 3 cells, found {}", record.len()),
                ));
            }
            let mut values = [0.0; 3];
            for (col, v) in values.iter_mut().enumerate() {
                let cell = &record[col];
                *v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        parse_error(source, line, col + 1, format!("invalid number `{cell}`"))
                    })?;
                if col > 0 && *v < 0.0 {
                    return Err(parse_error(
                        source,
                        line,
                        col + 1,
                        format!("negative count {v}"),
                    ));
                }
            }
            samples.push(FringeSample {
                control: values[0],
                counts_iii: values[1],
                counts_iv: values[2],
            });
        }
        Self::new(samples, 1.0)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("control,counts_iii,counts_iv\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.control, s.counts_iii, s.counts_iv);
        }
        out
    }
}

fn fringe_point(gamma: f64, nu: f64, phase: f64) -> Result<[f64; 10]> {
    let probs = simplified_probabilities(&OpticsParams::new(gamma, nu, phase)?)?;
    let mut out = [0.0; 10];
    for (slot, (_, p)) in out.iter_mut().zip(probs.entries()) {
        *slot = p.max(0.0);
    }
    Ok(out)
}

const III_SLOT: usize = 4 + 2; // A1&B2 in two_photon_patterns order
const IV_SLOT: usize = 4 + 4; // A2&B2

fn check_fringe_args(events_per_point: u64) -> Result<()> {
    debug_assert_eq!(
        DetectorPair::ALL[2],
        DetectorPair::new(Detector::A1, Detector::B2).unwrap()
    );
    debug_assert_eq!(
        DetectorPair::ALL[4],
        DetectorPair::new(Detector::A2, Detector::B2).unwrap()
    );
    check_range(
        "events_per_point",
        events_per_point as f64,
        events_per_point >= 1,
        "events_per_point >= 1",
    )
}

/// Samples `events_per_point` post-selected events at every phase in the
/// grid and records the (iii) and (iv) coincidence counts.
pub fn generate_fringe(
    gamma: f64,
    nu: f64,
    phase_grid: &[f64],
    events_per_point: u64,
    rng_seed: u64,
) -> Result<FringeScan> {
    check_fringe_args(events_per_point)?;
    let samples = phase_grid
        .par_iter()
        .enumerate()
        .map(|(i, &phase)| {
            let probs = fringe_point(gamma, nu, phase)?;
            let mut rng = rng_from_seed(derive_seed(rng_seed, i as u64));
            let counts = multinomial(&mut rng, events_per_point, &probs);
            Ok(FringeSample {
                control: phase,
                counts_iii: counts[III_SLOT] as f64,
                counts_iv: counts[IV_SLOT] as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FringeScan::new(samples, gamma)
}

/// Noiseless scan holding expected counts.
pub fn expected_fringe(
    gamma: f64,
    nu: f64,
    phase_grid: &[f64],
    events_per_point: u64,
) -> Result<FringeScan> {
    check_fringe_args(events_per_point)?;
    let n = events_per_point as f64;
    let samples = phase_grid
        .iter()
        .map(|&phase| {
            let probs = fringe_point(gamma, nu, phase)?;
            Ok(FringeSample {
                control: phase,
                counts_iii: n * probs[III_SLOT],
                counts_iv: n * probs[IV_SLOT],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FringeScan::new(samples, gamma)
}

/// Result of the shared-visibility fit
/// `iii = A₃[1 + cν·cos(ωx + φ)]`, `iv = A₄[1 − ν·cos(ωx + φ)]` with
/// `c = 2γ/(1+γ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VisibilityFit {
    pub nu: f64,
    /// Standard error of `nu` from the scaled fit covariance. For a flat scan,
    /// an upper bound on the contrast instead.
    pub std_error: f64,
    pub amplitude_iii: f64,
    pub amplitude_iv: f64,
    /// Fringe frequency in radians per control unit.
    pub frequency: f64,
    /// Phase offset at `control = 0`, wrapped to (−π, π].
    pub phase_offset: f64,
    pub chi2_per_dof: f64,
    /// No significant modulation was found; `nu` is reported as 0.
    pub degenerate: bool,
    /// Residual evaluations summed over all fit passes.
    pub iterations: usize,
}

struct FitData {
    x: Vec<f64>,
    y3: Vec<f64>,
    y4: Vec<f64>,
    contrast_iii: f64,
    // inverse standard deviations per point
    w3: Vec<f64>,
    w4: Vec<f64>,
    // (amplitude_iii, amplitude_iv, nu, frequency, phase)
    params: Vector5<f64>,
}

impl FitData {
    fn model(&self, p: &Vector5<f64>, x: f64) -> (f64, f64) {
        let co = (p[3] * x + p[4]).cos();
        (
            p[0] * (1.0 + self.contrast_iii * p[2] * co),
            p[1] * (1.0 - p[2] * co),
        )
    }

    /// Poisson weights from the model rather than the data, which removes the
    /// pull toward downward fluctuations.
    fn reweight(&mut self) {
        for i in 0..self.x.len() {
            let (m3, m4) = self.model(&self.params, self.x[i]);
            self.w3[i] = 1.0 / m3.max(1.0).sqrt();
            self.w4[i] = 1.0 / m4.max(1.0).sqrt();
        }
    }

    fn chi2(&self) -> f64 {
        self.residuals().map_or(f64::INFINITY, |r| r.norm_squared())
    }
}

impl LeastSquaresProblem<f64, Dyn, U5> for FitData {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U5>;
    type ParameterStorage = Owned<f64, U5>;

    fn set_params(&mut self, p: &Vector5<f64>) {
        self.params.copy_from(p);
    }

    fn params(&self) -> Vector5<f64> {
        self.params
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let n = self.x.len();
        let mut r = DVector::zeros(2 * n);
        for i in 0..n {
            let (m3, m4) = self.model(&self.params, self.x[i]);
            r[i] = (m3 - self.y3[i]) * self.w3[i];
            r[n + i] = (m4 - self.y4[i]) * self.w4[i];
        }
        Some(r)
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U5>> {
        let n = self.x.len();
        let (a3, a4, nu, w, phi) = (
            self.params[0],
            self.params[1],
            self.params[2],
            self.params[3],
            self.params[4],
        );
        let c = self.contrast_iii;
        let mut j = OMatrix::<f64, Dyn, U5>::zeros(2 * n);
        for i in 0..n {
            let x = self.x[i];
            let (s, co) = (w * x + phi).sin_cos();
            let d3 = [
                1.0 + c * nu * co,
                0.0,
                a3 * c * co,
                -a3 * c * nu * s * x,
                -a3 * c * nu * s,
            ];
            let d4 = [0.0, 1.0 - nu * co, -a4 * co, a4 * nu * s * x, a4 * nu * s];
            for k in 0..5 {
                j[(i, k)] = d3[k] * self.w3[i];
                j[(n + i, k)] = d4[k] * self.w4[i];
            }
        }
        Some(j)
    }
}

struct Seed {
    frequency: f64,
    phase: f64,
    amplitude: f64,
    amplitude_error: f64,
}

/// Linear fit of `a + b·cos ωx + c·sin ωx` to the normalized difference
/// signal over a grid of frequencies, keeping the best one.
fn frequency_scan(x: &[f64], signal: &[f64]) -> Option<Seed> {
    let n = x.len();
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_step = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if span.is_nan() || span <= 0.0 || !min_step.is_finite() {
        return None;
    }
    // at least half a period inside the scan, at most the Nyquist frequency
    let w_min = std::f64::consts::PI / span;
    let w_max = (std::f64::consts::PI / min_step).max(w_min);
    let mut best: Option<(f64, f64, Vector3<f64>, Matrix3<f64>)> = None;
    for k in 0..FREQUENCY_CANDIDATES {
        let w = w_min + (w_max - w_min) * k as f64 / (FREQUENCY_CANDIDATES - 1) as f64;
        let mut xtx = Matrix3::zeros();
        let mut xty = Vector3::zeros();
        for i in 0..n {
            let (s, c) = (w * x[i]).sin_cos();
            let row = Vector3::new(1.0, c, s);
            xtx += row * row.transpose();
            xty += row * signal[i];
        }
        let Some(inv) = xtx.try_inverse() else {
            continue;
        };
        let coef = inv * xty;
        let rss: f64 = (0..n)
            .map(|i| {
                let (s, c) = (w * x[i]).sin_cos();
                (signal[i] - coef[0] - coef[1] * c - coef[2] * s).powi(2)
            })
            .sum();
        if best.as_ref().is_none_or(|b| rss < b.1) {
            best = Some((w, rss, coef, inv));
        }
    }
    let (w, rss, coef, inv) = best?;
    let (a, b) = (coef[1], coef[2]);
    let amplitude = a.hypot(b);
    let sigma2 = rss / (n as f64 - 3.0).max(1.0);
    let amplitude_error = if amplitude > 0.0 {
        ((a * a * inv[(1, 1)] + b * b * inv[(2, 2)] + 2.0 * a * b * inv[(1, 2)]) * sigma2).sqrt()
            / amplitude
    } else {
        (sigma2 * inv[(1, 1)]).sqrt()
    };
    Some(Seed {
        frequency: w,
        phase: -b.atan2(a),
        amplitude,
        amplitude_error,
    })
}

fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut p = phi.rem_euclid(two_pi);
    if p > std::f64::consts::PI {
        p -= two_pi;
    }
    p
}

/// Runs Levenberg–Marquardt from the current parameters; returns the
/// number of residual evaluations.
fn minimize(data: FitData) -> Result<(FitData, usize)> {
    let (data, report) = LevenbergMarquardt::new()
        .with_patience(LM_PATIENCE)
        .minimize(data);
    if !report.termination.was_successful() {
        return Err(QleError::FitFailed(format!(
            "no convergence: {:?} after {} evaluations",
            report.termination, report.number_of_evaluations
        )));
    }
    Ok((data, report.number_of_evaluations))
}

/// Least-squares fit of a shared visibility to both series.
///
/// A frequency scan seeds the fit (the scan must cover at least half a fringe
/// period), then Levenberg–Marquardt refines amplitudes, visibility, frequency
/// and phase with Poisson weights, re-derived from the fitted model. Scans without significant modulation are
/// reported as `nu = 0` with `degenerate = true`.
pub fn fit_visibility(scan: &FringeScan) -> Result<VisibilityFit> {
    let n = scan.samples.len();
    if n < MIN_FIT_SAMPLES {
        return Err(QleError::TooFewSamples {
            required: MIN_FIT_SAMPLES,
            got: n,
        });
    }
    let g = scan.gamma;
    let contrast_iii = 2.0 * g / (1.0 + g * g);
    // center the control axis for conditioning
    let center = scan.samples.iter().map(|s| s.control).sum::<f64>() / n as f64;
    let y3: Vec<f64> = scan.samples.iter().map(|s| s.counts_iii).collect();
    let y4: Vec<f64> = scan.samples.iter().map(|s| s.counts_iv).collect();
    let mut data = FitData {
        x: scan.samples.iter().map(|s| s.control - center).collect(),
        w3: y3.iter().map(|y| 1.0 / y.max(1.0).sqrt()).collect(),
        w4: y4.iter().map(|y| 1.0 / y.max(1.0).sqrt()).collect(),
        y3,
        y4,
        contrast_iii,
        params: Vector5::zeros(),
    };
    let mean3 = data.y3.iter().sum::<f64>() / n as f64;
    let mean4 = data.y4.iter().sum::<f64>() / n as f64;
    if mean3 <= 0.0 || mean4 <= 0.0 {
        return Err(QleError::FitFailed("a series has no counts".into()));
    }
    let signal: Vec<f64> = (0..n)
        .map(|i| data.y3[i] / mean3 - data.y4[i] / mean4)
        .collect();
    let seed = frequency_scan(&data.x, &signal)
        .ok_or_else(|| QleError::FitFailed("control values do not span a range".into()))?;
    let scale = 1.0 + contrast_iii;

    let significant =
        seed.amplitude > 1e-12 && seed.amplitude > SIGNIFICANCE * seed.amplitude_error;
    if !significant {
        return Ok(VisibilityFit {
            nu: 0.0,
            std_error: (seed.amplitude + 2.0 * seed.amplitude_error) / scale,
            amplitude_iii: mean3,
            amplitude_iv: mean4,
            frequency: f64::NAN,
            phase_offset: f64::NAN,
            chi2_per_dof: f64::NAN,
            degenerate: true,
            iterations: 0,
        });
    }

    data.params = Vector5::new(
        mean3,
        mean4,
        seed.amplitude / scale,
        seed.frequency,
        seed.phase,
    );
    let (mut data, mut iterations) = minimize(data)?;
    for _ in 0..REWEIGHT_PASSES {
        data.reweight();
        let (refit, evals) = minimize(data)?;
        data = refit;
        iterations += evals;
    }
    let chi2 = data.chi2();
    let j = data
        .jacobian()
        .ok_or_else(|| QleError::FitFailed("no jacobian".into()))?;
    let mut p = data.params;

    if p[2] < 0.0 {
        p[2] = -p[2];
        p[4] += std::f64::consts::PI;
    }
    if p[3] < 0.0 {
        p[3] = -p[3];
        p[4] = -p[4];
    }
    let dof = (2 * n) as f64 - 5.0;
    let chi2_per_dof = chi2 / dof;
    let jtj = j.transpose() * &j;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| QleError::FitFailed("singular fit covariance".into()))?;
    let std_error = (cov[(2, 2)] * chi2_per_dof).max(0.0).sqrt();
    Ok(VisibilityFit {
        nu: p[2],
        std_error,
        amplitude_iii: p[0],
        amplitude_iv: p[1],
        frequency: p[3],
        phase_offset: wrap_phase(p[4] - p[3] * center),
        chi2_per_dof,
        degenerate: false,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(points: usize, periods: f64) -> Vec<f64> {
        (0..points)
            .map(|k| 2.0 * PI * periods * k as f64 / (points - 1) as f64)
            .collect()
    }

    #[test]
    fn expected_fringe_contrast_matches_visibility() {
        let scan = expected_fringe(1.0, 0.845, &grid(201, 1.0), 10_000).unwrap();
        let contrast = |v: Vec<f64>| {
            let max = v.iter().cloned().fold(f64::MIN, f64::max);
            let min = v.iter().cloned().fold(f64::MAX, f64::min);
            (max - min) / (max + min)
        };
        let iii = contrast(scan.samples.iter().map(|s| s.counts_iii).collect());
        let iv = contrast(scan.samples.iter().map(|s| s.counts_iv).collect());
        assert!((iii - 0.845).abs() < 1e-12, "{iii}");
        assert!((iv - 0.845).abs() < 1e-12, "{iv}");
    }

    #[test]
    fn ideal_fringe_failure_vanishes_at_zero_phase() {
        let scan = expected_fringe(1.0, 1.0, &[0.0, 1.0, 2.0], 1000).unwrap();
        assert!(scan.samples[0].counts_iv.abs() < 1e-12);
        assert!(scan.samples[1].counts_iv > 0.0);
    }

    #[test]
    fn noiseless_unit_visibility_fit() {
        let scan = expected_fringe(1.0, 1.0, &grid(41, 2.0), 10_000).unwrap();
        let fit = fit_visibility(&scan).unwrap();
        assert!((fit.nu - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.frequency - 1.0).abs() < 1e-6);
        assert!(fit.phase_offset.abs() < 1e-6);
    }

    #[test]
    fn noiseless_unbalanced_fit() {
        let scan = expected_fringe(0.8, 0.6, &grid(33, 1.5), 10_000).unwrap();
        let fit = fit_visibility(&scan).unwrap();
        assert!((fit.nu - 0.6).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn flat_scan_is_degenerate() {
        let scan = expected_fringe(1.0, 0.0, &grid(41, 2.0), 10_000).unwrap();
        let fit = fit_visibility(&scan).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.nu, 0.0);
    }

    #[test]
    fn noisy_flat_scan_reports_zero_within_uncertainty() {
        for seed in 0..10 {
            let scan = generate_fringe(1.0, 0.0, &grid(41, 2.0), 10_000, seed).unwrap();
            let fit = fit_visibility(&scan).unwrap();
            assert!(fit.nu <= 3.0 * fit.std_error.max(0.01), "{fit:?}");
        }
    }

    #[test]
    fn sampled_fringe_is_reproducible() {
        let a = generate_fringe(1.0, 0.845, &grid(11, 1.0), 500, 3).unwrap();
        let b = generate_fringe(1.0, 0.845, &grid(11, 1.0), 500, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn too_few_samples_rejected() {
        let scan = expected_fringe(1.0, 0.5, &[0.0, 1.0, 2.0], 100).unwrap();
        assert_eq!(
            fit_visibility(&scan),
            Err(QleError::TooFewSamples {
                required: 5,
                got: 3
            })
        );
    }

    #[test]
    fn zero_events_rejected() {
        assert!(generate_fringe(1.0, 0.5, &[0.0], 0, 0).is_err());
    }

    #[test]
    fn scan_csv_round_trip() {
        let scan = generate_fringe(1.0, 0.7, &grid(9, 1.0), 1000, 1).unwrap();
        let parsed = FringeScan::parse(&scan.to_csv(), "s").unwrap();
        assert_eq!(parsed, scan);
    }

    #[test]
    fn scan_parse_errors() {
        assert!(FringeScan::parse("control,counts_iii,counts_iv\n0,1,-2\n", "s").is_err());
        assert!(FringeScan::parse("control,counts_iii,counts_iv\n0,1\n", "s").is_err());
        assert!(FringeScan::parse("x,y,z\n", "s").is_err());
        assert!(FringeScan::parse("control,counts_iii,counts_iv\n0,abc,1\n", "s").is_err());
    }
}
