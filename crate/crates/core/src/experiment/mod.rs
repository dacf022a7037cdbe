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

//! Analysis of recorded coincidence data: loss correction of single counts,
//! the post-selected success probability, and synthetic count generation.

mod fringe;

pub use fringe::{
    expected_fringe, fit_visibility, generate_fringe, FringeSample, FringeScan, VisibilityFit,
    MIN_FIT_SAMPLES,
};

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::analytic::PatternProbabilities;
use crate::error::{check_range, QleError, Result};
use crate::fock::{DetectionPattern, Detector, DetectorPair};
use crate::montecarlo::rng_from_seed;
use crate::protocol::{classify, PatternClass};

/// Overall transmission assumed when no loss budget is supplied.
pub const DEFAULT_ETA: f64 = 0.02;

/// Fraction of single counts that are really two-photon detections at
/// overall transmission `eta`: `η²/(2(1−η)η + η²)`, roughly `η/2`.
pub fn two_photon_fraction(eta: f64) -> Result<f64> {
    check_range("eta", eta, eta > 0.0 && eta <= 1.0, "0 < eta <= 1")?;
    Ok(eta * eta / (2.0 * (1.0 - eta) * eta + eta * eta))
}

/// Per-component transmittances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossBudget {
    pub components: Vec<(String, f64)>,
    /// A `Total` row from the input, kept for reference and not used in `eta`.
    pub stated_total: Option<f64>,
}

impl LossBudget {
    pub fn new(components: Vec<(String, f64)>) -> Result<Self> {
        for (_, t) in &components {
            check_range("transmittance", *t, (0.0..=1.0).contains(t), "0 <= T <= 1")?;
        }
        Ok(Self {
            components,
            stated_total: None,
        })
    }

    /// Overall transmission, the product of all component transmittances.
    pub fn eta(&self) -> f64 {
        self.components.iter().map(|(_, t)| t).product()
    }

    /// Parses `component,transmittance` rows.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv_reader(text);
        expect_header(&mut reader, source, &["component", "transmittance"])?;
        let mut components = Vec::new();
        let mut stated_total = None;
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(source, e))?;
            let line = line_of(&record);
            if record.len() != 2 {
                return Err(parse_error(
                    source,
                    line,
                    record.len().min(2) + 1,
                    format!("expected 2 cells, found {}", record.len()),
                ));
            }
            let name = record[0].trim().to_string();
            let t: f64 = record[1].trim().parse().map_err(|_| {
                parse_error(
                    source,
                    line,
                    2,
                    format!("invalid transmittance `{}`", &record[1]),
                )
            })?;
            if !(0.0..=1.0).contains(&t) {
                return Err(parse_error(
                    source,
                    line,
                    2,
                    format!("transmittance {t} outside [0, 1]"),
                ));
            }
            if name.eq_ignore_ascii_case("total") {
                stated_total = Some(t);
            } else {
                components.push((name, t));
            }
        }
        if components.is_empty() {
            return Err(parse_error(source, 1, 1, "no components".into()));
        }
        Ok(Self {
            components,
            stated_total,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }
}

/// Single counts per detector and coincidence counts per detector pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CountsTable {
    /// Indexed by [`Detector::index`].
    pub singles: [u64; 4],
    /// Indexed by [`DetectorPair::index`].
    pub coincidences: [u64; 6],
}

impl CountsTable {
    pub fn single(&self, detector: Detector) -> u64 {
        self.singles[detector.index()]
    }

    pub fn coincidence(&self, pair: DetectorPair) -> u64 {
        self.coincidences[pair.index()]
    }

    pub fn is_empty(&self) -> bool {
        self.singles
            .iter()
            .chain(&self.coincidences)
            .all(|&n| n == 0)
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            singles: self.singles.map(|n| n * factor),
            coincidences: self.coincidences.map(|n| n * factor),
        }
    }

    /// Coincidence total of one class, (ii)–(iv).
    pub fn class_coincidences(&self, class: PatternClass) -> u64 {
        DetectorPair::ALL
            .iter()
            .filter(|p| {
                classify(&DetectionPattern::coincidence(**p))
                    .map(|o| o.class == class)
                    .unwrap_or(false)
            })
            .map(|p| self.coincidence(*p))
            .sum()
    }

    /// Parses the lower-triangular layout:
    ///
    /// ```text
    /// detector,A1,A2,B1,B2
    /// A1,3918,,,
    /// A2,18,3896,,
    /// B1,16,137,3831,
    /// B2,160,8,11,3920
    /// ```
    ///
    /// Diagonal cells are single counts. Cells above the diagonal must be
    /// empty or `-`.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv_reader(text);
        expect_header(&mut reader, source, &["detector", "A1", "A2", "B1", "B2"])?;
        let mut table = CountsTable::default();
        let mut rows = 0;
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(source, e))?;
            let line = line_of(&record);
            if rows == 4 {
                return Err(parse_error(
                    source,
                    line,
                    1,
                    "more than four detector rows".into(),
                ));
            }
            let row = Detector::ALL[rows];
            if record.get(0).map(str::trim) != Some(row.name()) {
                return Err(parse_error(
                    source,
                    line,
                    1,
                    format!(
                        "expected row label {row}, found `{}`",
                        record.get(0).unwrap_or("")
                    ),
                ));
            }
            if record.len() > 5 {
                return Err(parse_error(source, line, 6, "too many cells".into()));
            }
            for (col, column) in Detector::ALL.into_iter().enumerate() {
                let cell = record.get(col + 1).map(str::trim).unwrap_or("");
                if col > rows {
                    if !(cell.is_empty() || cell == "-") {
                        return Err(parse_error(
                            source,
                            line,
                            col + 2,
                            format!("cell above the diagonal must be empty, found `{cell}`"),
                        ));
                    }
                    continue;
                }
                if cell.is_empty() || cell == "-" {
                    return Err(parse_error(source, line, col + 2, "missing count".into()));
                }
                let value: i64 = cell.parse().map_err(|_| {
                    parse_error(source, line, col + 2, format!("invalid count `{cell}`"))
                })?;
                if value < 0 {
                    return Err(parse_error(
                        source,
                        line,
                        col + 2,
                        format!("negative count {value}"),
                    ));
                }
                if col == rows {
                    table.singles[row.index()] = value as u64;
                } else {
                    let pair = DetectorPair::new(row, column).expect("distinct detectors");
                    table.coincidences[pair.index()] = value as u64;
                }
            }
            rows += 1;
        }
        if rows < 4 {
            return Err(parse_error(
                source,
                rows as u64 + 2,
                1,
                format!("expected four detector rows, found {rows}"),
            ));
        }
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }

    /// Serializes in the layout accepted by [`CountsTable::parse`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("detector,A1,A2,B1,B2\n");
        for (r, row) in Detector::ALL.into_iter().enumerate() {
            out.push_str(row.name());
            for (c, col) in Detector::ALL.into_iter().enumerate() {
                out.push(',');
                if c == r {
                    let _ = write!(out, "{}", self.single(row));
                } else if c < r {
                    let _ = write!(
                        out,
                        "{}",
                        self.coincidence(DetectorPair::new(row, col).unwrap())
                    );
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Loss-corrected class counts and the resulting success probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuccessEstimate {
    pub eta: f64,
    /// Estimated two-photon detections among the single counts.
    pub n_i: f64,
    pub n_ii: u64,
    pub n_iii: u64,
    pub n_iv: u64,
    pub probability: f64,
    /// Binomial standard error of the failure fraction.
    pub std_error: f64,
}

impl SuccessEstimate {
    pub fn total(&self) -> f64 {
        self.n_i + (self.n_ii + self.n_iii + self.n_iv) as f64
    }

    /// Class counts in (i)–(iv) order, for histogram output.
    pub fn class_counts(&self) -> [f64; 4] {
        [
            self.n_i,
            self.n_ii as f64,
            self.n_iii as f64,
            self.n_iv as f64,
        ]
    }
}

/// Post-selected success probability `1 − N_iv/(N_i + N_ii + N_iii + N_iv)`,
/// with `N_i` recovered from the single counts at transmission `eta`.
pub fn empirical_success(table: &CountsTable, eta: f64) -> Result<SuccessEstimate> {
    if table.is_empty() {
        return Err(QleError::EmptyTable);
    }
    let fraction = two_photon_fraction(eta)?;
    let n_i = fraction * table.singles.iter().sum::<u64>() as f64;
    let n_ii = table.class_coincidences(PatternClass::II);
    let n_iii = table.class_coincidences(PatternClass::III);
    let n_iv = table.class_coincidences(PatternClass::IV);
    let total = n_i + (n_ii + n_iii + n_iv) as f64;
    if total <= 0.0 {
        return Err(QleError::EmptyTable);
    }
    let failure = n_iv as f64 / total;
    Ok(SuccessEstimate {
        eta,
        n_i,
        n_ii,
        n_iii,
        n_iv,
        probability: 1.0 - failure,
        std_error: (failure * (1.0 - failure) / total).sqrt(),
    })
}

/// Draws `n` events over `probs` and returns per-category counts.
pub(crate) fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(remaining);
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = if remaining == 0 || q == 0.0 {
            0
        } else {
            Binomial::new(remaining, q)
                .expect("probability within [0, 1]")
                .sample(rng)
        };
        out.push(k);
        remaining -= k;
        mass -= p;
    }
    out
}

/// Synthetic counts for `events` post-selected two-photon events. Two-photon
/// detections are inflated into single counts by `1/two_photon_fraction(eta)`,
/// so that [`empirical_success`] recovers them.
pub fn synthesize_counts(
    probs: &PatternProbabilities,
    events: u64,
    eta: f64,
    rng_seed: u64,
) -> Result<CountsTable> {
    let fraction = two_photon_fraction(eta)?;
    let mut rng = rng_from_seed(rng_seed);
    let weights: Vec<f64> = probs.entries().map(|(_, p)| p.max(0.0)).collect();
    let drawn = multinomial(&mut rng, events, &weights);
    let mut table = CountsTable::default();
    for ((pattern, _), n) in probs.entries().zip(drawn) {
        if let Some(d) = pattern.as_double() {
            table.singles[d.index()] = (n as f64 / fraction).round() as u64;
        } else if let Some(pair) = pattern.as_pair() {
            table.coincidences[pair.index()] = n;
        }
    }
    Ok(table)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn expect_header(reader: &mut csv::Reader<&[u8]>, source: &str, expected: &[&str]) -> Result<()> {
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(source, e))?,
        None => return Err(parse_error(source, 1, 1, "empty file".into())),
    };
    let cells: Vec<&str> = header.iter().collect();
    if cells != expected {
        return Err(parse_error(
            source,
            line_of(&header),
            1,
            format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                cells.join(",")
            ),
        ));
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_error(source: &str, e: csv::Error) -> QleError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_error(source, line, 1, e.to_string())
}

pub(crate) fn parse_error(source: &str, line: u64, column: usize, message: String) -> QleError {
    QleError::Parse {
        path: source.to_string(),
        line,
        column,
        message,
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| QleError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{simplified_probabilities, OpticsParams};

    const TABLE: &str =
        "detector,A1,A2,B1,B2\nA1,3918,,,\nA2,18,3896,,\nB1,16,137,3831,\nB2,160,8,11,3920\n";

    #[test]
    fn loss_fraction_values() {
        assert!((two_photon_fraction(0.02).unwrap() - 0.02 / 1.98).abs() < 1e-15);
        assert!((two_photon_fraction(0.02).unwrap() - 0.01).abs() < 2e-4);
        assert_eq!(two_photon_fraction(1.0).unwrap(), 1.0);
        assert!((two_photon_fraction(0.018).unwrap() - 0.00908).abs() < 1e-5);
        assert!(two_photon_fraction(0.0).is_err());
        assert!(two_photon_fraction(1.5).is_err());
    }

    #[test]
    fn parses_lower_triangle() {
        let t = CountsTable::parse(TABLE, "t").unwrap();
        assert_eq!(t.singles, [3918, 3896, 3831, 3920]);
        use Detector::*;
        let c = |a, b| t.coincidence(DetectorPair::new(a, b).unwrap());
        assert_eq!(c(A1, A2), 18);
        assert_eq!(c(A1, B1), 16);
        assert_eq!(c(A2, B1), 137);
        assert_eq!(c(A1, B2), 160);
        assert_eq!(c(A2, B2), 8);
        assert_eq!(c(B1, B2), 11);
        assert_eq!(t.class_coincidences(PatternClass::II), 29);
        assert_eq!(t.class_coincidences(PatternClass::III), 297);
        assert_eq!(t.class_coincidences(PatternClass::IV), 24);
        assert_eq!(CountsTable::parse(&t.to_csv(), "t").unwrap(), t);
    }

    #[test]
    fn accepts_dash_placeholders() {
        let text = "detector,A1,A2,B1,B2\nA1,1,-,-,-\nA2,2,3,-,-\nB1,4,5,6,-\nB2,7,8,9,10\n";
        assert!(CountsTable::parse(text, "t").is_ok());
    }

    #[test]
    fn parse_errors_carry_position() {
        let negative = TABLE.replace("16,137", "-16,137");
        match CountsTable::parse(&negative, "neg.csv") {
            Err(QleError::Parse {
                line, column, path, ..
            }) => {
                assert_eq!((path.as_str(), line, column), ("neg.csv", 4, 2));
            }
            other => panic!("{other:?}"),
        }
        let missing = TABLE.replace("B2,160,8,11,3920", "B2,160,,11,3920");
        match CountsTable::parse(&missing, "m") {
            Err(QleError::Parse { line, column, .. }) => assert_eq!((line, column), (5, 3)),
            other => panic!("{other:?}"),
        }
        assert!(CountsTable::parse("", "e").is_err());
        assert!(CountsTable::parse("detector,A1,A2,B1,B2\n", "e").is_err());
        assert!(CountsTable::parse(&TABLE.replace("A1,3918,,,", "A1,3918,5,,"), "u").is_err());
        assert!(CountsTable::parse(&TABLE.replace("B1,16", "X1,16"), "l").is_err());
    }

    #[test]
    fn paper_counts_give_95_percent() {
        let t = CountsTable::parse(TABLE, "t").unwrap();
        let est = empirical_success(&t, 0.02).unwrap();
        assert!((est.n_i - 15565.0 * 0.02 / 1.98).abs() < 1e-9);
        assert!((est.probability - 0.95).abs() < 0.01, "{}", est.probability);
        assert!(est.std_error > 0.0 && est.std_error < 0.02);
    }

    #[test]
    fn no_failures_is_certain_success() {
        let mut t = CountsTable::parse(TABLE, "t").unwrap();
        t.coincidences[DetectorPair::ALL[1].index()] = 0;
        t.coincidences[DetectorPair::ALL[4].index()] = 0;
        let est = empirical_success(&t, 0.02).unwrap();
        assert_eq!(est.probability, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn empty_table_rejected() {
        assert_eq!(
            empirical_success(&CountsTable::default(), 0.02),
            Err(QleError::EmptyTable)
        );
    }

    #[test]
    fn scaling_counts_leaves_estimate_unchanged() {
        let t = CountsTable::parse(TABLE, "t").unwrap();
        let base = empirical_success(&t, 0.02).unwrap().probability;
        for k in [2, 7, 1000] {
            let scaled = empirical_success(&t.scaled(k), 0.02).unwrap().probability;
            assert!((scaled - base).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_budget_product() {
        let text =
            "component,transmittance\nfilter,0.1\nsmf,0.5\nbs,0.9\nmmf,0.8\nqe,0.5\nTotal,0.02\n";
        let budget = LossBudget::parse(text, "loss").unwrap();
        assert_eq!(budget.components.len(), 5);
        assert!((budget.eta() - 0.018).abs() < 1e-9);
        assert_eq!(budget.stated_total, Some(0.02));
        assert!(LossBudget::parse("component,transmittance\nx,1.5\n", "l").is_err());
        assert!(LossBudget::parse("component,transmittance\n", "l").is_err());
        assert!(LossBudget::new(vec![("x".into(), -0.1)]).is_err());
    }

    #[test]
    fn multinomial_conserves_events() {
        let mut rng = rng_from_seed(5);
        let counts = multinomial(&mut rng, 12345, &[0.1, 0.0, 0.6, 0.3]);
        assert_eq!(counts.iter().sum::<u64>(), 12345);
        assert_eq!(counts[1], 0);
    }

    #[test]
    fn synthesized_counts_recover_success() {
        let params = OpticsParams::new(0.8, 0.845, 0.0).unwrap();
        let probs = simplified_probabilities(&params).unwrap();
        let table = synthesize_counts(&probs, 100_000, 0.02, 9).unwrap();
        let est = empirical_success(&table, 0.02).unwrap();
        let expected = crate::analytic::p_suc(&params);
        assert!((est.probability - expected).abs() < 3.0 * est.std_error + 1e-4);
    }
}
