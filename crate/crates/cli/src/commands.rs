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

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use qle::classical::{simulate_classical_many, MAX_SIMULATED_BITS};
use qle::experiment::{expected_fringe, DEFAULT_ETA};
use qle::fock::sample_counts;
use qle::protocol::{cost_from_success, simulate_protocol};
use qle::{
    classical_success_prob, classify, cost_curve, empirical_success, expected_classical_cost,
    expected_cost, fit_visibility, generate_fringe, optimal_p, outcome_distribution, p1_suc,
    p2_suc, p_suc, simplified_probabilities, ClassicalParams, CountsTable, DetectionPattern,
    FringeScan, LossBudget, OpticsParams, Party, PatternClass,
};
use serde_json::{json, Value};

use crate::render::{num, Report, Table};
use crate::{parse_grid, AnalyzeArgs, ClassicalArgs, CostArgs, FringeArgs, SimulateArgs};

/// Classical rows always shown, plus the requested `n`.
const CLASSICAL_TABLE_MAX_N: u32 = 8;
/// Range searched for the cheapest classical protocol.
const CLASSICAL_SEARCH_MAX_N: u32 = 32;
/// Default fringe scan: two periods of the control phase.
const FRINGE_POINTS: usize = 41;

fn party_name(p: Option<Party>) -> &'static str {
    match p {
        Some(Party::Alice) => "alice",
        Some(Party::Bob) => "bob",
        None => "none",
    }
}

fn binomial_error(p: f64, n: u64) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Report> {
    let params = OpticsParams::new(args.optics.gamma, args.optics.nu, args.phase)?;
    let dist = outcome_distribution(&params)?;
    let closed = simplified_probabilities(&params)?;
    let sampled = if args.trials > 0 {
        Some(sample_counts(&dist, args.trials, args.seed)?)
    } else {
        None
    };

    let mut table = Table::new(&[
        "class",
        "pattern",
        "leader",
        "circuit_probability",
        "closed_form_probability",
        "sampled_frequency",
        "std_error",
    ]);
    let mut rows = Vec::new();
    let mut entries: Vec<_> = dist.iter().map(|(p, q)| (*p, *q)).collect();
    let order = DetectionPattern::two_photon_patterns();
    entries.sort_by_key(|(p, _)| {
        let rank = order.iter().position(|q| q == p);
        (classify(p).map(|c| c.class).ok(), rank)
    });
    for (pattern, prob) in entries {
        let outcome = classify(&pattern)?;
        let freq = sampled
            .as_ref()
            .map(|c| c.get(&pattern).copied().unwrap_or(0) as f64 / args.trials as f64);
        let err = freq.map(|f| binomial_error(f, args.trials));
        table.row(vec![
            outcome.class.label().to_owned(),
            pattern.to_string(),
            party_name(outcome.leader).to_owned(),
            num(prob),
            num(closed.probability(&pattern)),
            num(freq.unwrap_or(f64::NAN)),
            num(err.unwrap_or(f64::NAN)),
        ]);
        rows.push(json!({
            "class": outcome.class.label(),
            "pattern": pattern.to_string(),
            "leader": outcome.leader.map(|p| party_name(Some(p))),
            "circuit_probability": prob,
            "closed_form_probability": closed.probability(&pattern),
            "sampled_frequency": freq,
            "std_error": err,
        }));
    }

    let mut text = format!(
        "gamma = {}  nu = {}  phase = {}  trials = {}  seed = {}\n\n",
        params.gamma, params.nu, params.phase, args.trials, args.seed
    );
    text.push_str(&table.to_text());
    text.push_str(&format!(
        "\ntotal probability {:.12}\nsuccess probability {:.6}\n",
        dist.total(),
        p_suc(&params)
    ));
    Ok(Report {
        table: text,
        csv: table.to_csv(),
        json: json!({
            "gamma": params.gamma,
            "nu": params.nu,
            "phase": params.phase,
            "trials": args.trials,
            "seed": args.seed,
            "patterns": rows,
            "total_probability": dist.total(),
            "p_suc": p_suc(&params),
        }),
    })
}

pub fn cmd_cost(args: &CostArgs) -> Result<Report> {
    if let Some(spec) = &args.grid {
        return cost_grid(args.optics.gamma, spec);
    }
    let params = OpticsParams::new(args.optics.gamma, args.optics.nu, 0.0)?;
    let quantum = expected_cost(&params)?;
    let classical = expected_classical_cost(1)?;
    let mc = if args.trials > 0 {
        Some(simulate_protocol(
            &params,
            args.trials,
            args.max_trials,
            args.seed,
        )?)
    } else {
        None
    };

    let mut table = Table::new(&[
        "gamma",
        "nu",
        "p2_suc",
        "p1_suc",
        "p_suc",
        "n_quantum",
        "n_classical",
        "mc_runs",
        "mc_mean",
        "mc_std_error",
    ]);
    table.row(vec![
        num(params.gamma),
        num(params.nu),
        num(p2_suc(&params)),
        num(p1_suc(&params)),
        num(p_suc(&params)),
        num(quantum),
        num(classical),
        args.trials.to_string(),
        num(mc.as_ref().map_or(f64::NAN, |s| s.mean_cost)),
        num(mc.as_ref().map_or(f64::NAN, |s| s.std_error)),
    ]);

    let mut text = format!(
        "gamma = {}  nu = {}\n\
         per-trial success     P    = {:.6}\n\
         \x20 two-photon branch   P(2) = {:.6}\n\
         \x20 coincidence branch  P(1) = {:.6}\n\
         expected cost (quantum)     = {:.6}\n\
         expected cost (classical)   = {:.6}\n",
        params.gamma,
        params.nu,
        p_suc(&params),
        p2_suc(&params),
        p1_suc(&params),
        quantum,
        classical
    );
    let mut mc_json = Value::Null;
    if let Some(s) = &mc {
        text.push_str(&format!(
            "simulated cost              = {:.6} ± {:.6}  ({} runs, seed {}, {} unresolved)\n\
             leader split                = alice {}  bob {}\n",
            s.mean_cost, s.std_error, s.runs, args.seed, s.unresolved, s.alice, s.bob
        ));
        mc_json = json!({
            "runs": s.runs,
            "seed": args.seed,
            "mean_cost": s.mean_cost,
            "std_error": s.std_error,
            "trials": s.trials,
            "alice": s.alice,
            "bob": s.bob,
            "unresolved": s.unresolved,
            "class_frequency": PatternClass::ALL
                .iter()
                .map(|c| (c.label().to_owned(), json!(s.class_frequency(*c))))
                .collect::<serde_json::Map<_, _>>(),
        });
    }
    Ok(Report {
        table: text,
        csv: table.to_csv(),
        json: json!({
            "gamma": params.gamma,
            "nu": params.nu,
            "p2_suc": p2_suc(&params),
            "p1_suc": p1_suc(&params),
            "p_suc": p_suc(&params),
            "n_quantum": quantum,
            "n_classical": classical,
            "monte_carlo": mc_json,
        }),
    })
}

fn cost_grid(gamma: f64, spec: &str) -> Result<Report> {
    let grid = parse_grid(spec)?;
    let curve = cost_curve(gamma, &grid)?;
    let mut table = Table::new(&["nu", "n_quantum"]);
    for (nu, n) in &curve {
        table.row(vec![num(*nu), num(*n)]);
    }
    let text = format!("gamma = {gamma}\n\n{}", table.to_text());
    Ok(Report {
        table: text,
        csv: table.to_csv(),
        json: json!({
            "gamma": gamma,
            "curve": curve.iter().map(|(nu, n)| json!({"nu": nu, "n_quantum": n})).collect::<Vec<_>>(),
        }),
    })
}

pub fn cmd_classical(args: &ClassicalArgs) -> Result<Report> {
    let params = ClassicalParams::new(args.n, args.p)?;
    let mut ns: Vec<u32> = (1..=CLASSICAL_TABLE_MAX_N).collect();
    if !ns.contains(&args.n) {
        ns.push(args.n);
    }
    let mut table = Table::new(&["n", "p", "success_prob", "optimal_p", "expected_cost"]);
    let mut rows = Vec::new();
    for &n in &ns {
        let row = ClassicalParams::new(n, args.p)?;
        let success = classical_success_prob(&row);
        let opt = optimal_p(n)?;
        let cost = expected_classical_cost(n)?;
        table.row(vec![
            n.to_string(),
            num(args.p),
            num(success),
            num(opt),
            num(cost),
        ]);
        rows.push(json!({
            "n": n, "p": args.p, "success_prob": success, "optimal_p": opt, "expected_cost": cost,
        }));
    }
    let (best_n, best_cost) = (1..=CLASSICAL_SEARCH_MAX_N)
        .map(|n| expected_classical_cost(n).map(|c| (n, c)))
        .collect::<qle::Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty search range");

    let mut text = table.to_text();
    text.push_str(&format!(
        "\ncheapest protocol over n = 1..{CLASSICAL_SEARCH_MAX_N}: n = {best_n}, cost {best_cost:.6} bits\n"
    ));
    let mut mc_json = Value::Null;
    if args.trials > 0 {
        if args.n > MAX_SIMULATED_BITS {
            bail!("simulation supports at most {MAX_SIMULATED_BITS} bits per round");
        }
        let s = simulate_classical_many(&params, args.trials, args.max_rounds, args.seed)?;
        text.push_str(&format!(
            "simulated cost (n = {}, p = {}) = {:.6} ± {:.6}  ({} runs, seed {}, {} unresolved)\n",
            args.n, args.p, s.mean_cost, s.std_error, s.runs, args.seed, s.unresolved
        ));
        mc_json = json!({
            "n": args.n, "p": args.p, "runs": s.runs, "seed": args.seed,
            "mean_cost": s.mean_cost, "std_error": s.std_error, "rounds": s.rounds,
            "alice": s.alice, "bob": s.bob, "unresolved": s.unresolved,
        });
    }
    Ok(Report {
        table: text,
        csv: table.to_csv(),
        json: json!({
            "rows": rows,
            "optimum": {"n": best_n, "expected_cost": best_cost},
            "monte_carlo": mc_json,
        }),
    })
}

/// Resolves the overall transmission: explicit value, then loss budget, then default.
pub fn resolve_eta(args: &AnalyzeArgs) -> Result<(f64, &'static str)> {
    if let Some(eta) = args.eta {
        return Ok((eta, "--eta"));
    }
    if let Some(path) = &args.loss {
        let budget = LossBudget::from_path(path)?;
        return Ok((budget.eta(), "loss budget"));
    }
    Ok((DEFAULT_ETA, "default"))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Report> {
    let table_in = CountsTable::from_path(&args.counts)?;
    let (eta, eta_source) = resolve_eta(args)?;
    let est = empirical_success(&table_in, eta)?;
    let counts = est.class_counts();
    let total = est.total();
    let implied = cost_from_success(
        (est.n_i + est.n_ii as f64) / total,
        est.n_iii as f64 / total,
    )
    .context("no successful events in the counts table")?;

    let mut table = Table::new(&["class", "count", "fraction"]);
    let mut classes = serde_json::Map::new();
    for class in PatternClass::ALL {
        let c = counts[class.index()];
        table.row(vec![
            class.label().to_owned(),
            format!("{c:.1}"),
            num(c / total),
        ]);
        classes.insert(
            class.label().to_owned(),
            json!({"count": c, "fraction": c / total}),
        );
    }
    let mut text = format!(
        "counts: {}\neta = {eta} ({eta_source})\n\n",
        args.counts.display()
    );
    text.push_str(&table.to_text());
    text.push_str(&format!(
        "\nsuccess probability P = {:.4} ± {:.4}\nimplied expected cost N = {:.4}\n",
        est.probability, est.std_error, implied
    ));
    Ok(Report {
        table: text,
        csv: table.to_csv(),
        json: json!({
            "eta": eta,
            "eta_source": eta_source,
            "classes": classes,
            "total": total,
            "p_suc": est.probability,
            "std_error": est.std_error,
            "implied_cost": implied,
        }),
    })
}

fn default_fringe_grid() -> Vec<f64> {
    let step = 4.0 * PI / (FRINGE_POINTS - 1) as f64;
    (0..FRINGE_POINTS).map(|k| k as f64 * step).collect()
}

pub fn cmd_fringe(args: &FringeArgs) -> Result<Report> {
    let gamma = args.optics.gamma;
    let scan = match &args.scan {
        Some(path) => FringeScan::from_path(path)?.with_gamma(gamma)?,
        None => {
            OpticsParams::new(gamma, args.optics.nu, 0.0)?;
            let grid = match &args.grid {
                Some(spec) => parse_grid(spec)?,
                None => default_fringe_grid(),
            };
            if args.expected {
                expected_fringe(gamma, args.optics.nu, &grid, args.events)?
            } else {
                generate_fringe(gamma, args.optics.nu, &grid, args.events, args.seed)?
            }
        }
    };
    let fit = fit_visibility(&scan)?;
    let implied = OpticsParams::new(gamma, fit.nu.clamp(0.0, 1.0), 0.0)?;
    let implied_p = p_suc(&implied);
    let implied_n = expected_cost(&implied)?;

    let mut table = Table::new(&["control", "counts_iii", "counts_iv"]);
    for s in &scan.samples {
        table.row(vec![
            num(s.control),
            format!("{}", s.counts_iii),
            format!("{}", s.counts_iv),
        ]);
    }
    let mut text = format!("gamma = {gamma}  points = {}\n\n", scan.samples.len());
    text.push_str(&table.to_text());
    text.push_str(&format!(
        "\nvisibility nu = {:.4} ± {:.4}{}\nfrequency {:.4}  offset {:.4}  chi2/dof {:.3}\n\
         implied P = {:.4}  implied N = {:.4}\n",
        fit.nu,
        fit.std_error,
        if fit.degenerate {
            "  (no significant fringe)"
        } else {
            ""
        },
        fit.frequency,
        fit.phase_offset,
        fit.chi2_per_dof,
        implied_p,
        implied_n
    ));
    Ok(Report {
        table: text,
        csv: scan.to_csv(),
        json: json!({
            "gamma": gamma,
            "samples": scan.samples.iter().map(|s| json!({
                "control": s.control, "counts_iii": s.counts_iii, "counts_iv": s.counts_iv,
            })).collect::<Vec<_>>(),
            "fit": {
                "nu": fit.nu,
                "std_error": fit.std_error,
                "amplitude_iii": fit.amplitude_iii,
                "amplitude_iv": fit.amplitude_iv,
                "frequency": fit.frequency,
                "phase_offset": fit.phase_offset,
                "chi2_per_dof": fit.chi2_per_dof,
                "degenerate": fit.degenerate,
                "iterations": fit.iterations,
            },
            "implied_p_suc": implied_p,
            "implied_cost": implied_n,
        }),
    })
}
