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

//! Command-line front end for the leader-election simulator.

mod commands;
mod render;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_analyze, cmd_classical, cmd_cost, cmd_fringe, cmd_simulate};
pub use render::Report;

#[derive(Debug, Parser)]
#[command(
    name = "qle",
    version,
    about = "Two-party quantum leader election in linear optics: simulation, cost accounting and data analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detection-pattern distribution of the election circuit.
    ///
    /// CSV columns: class,pattern,leader,circuit_probability,closed_form_probability,sampled_frequency,std_error
    Simulate(SimulateArgs),
    /// Expected communication cost of the quantum protocol.
    ///
    /// CSV columns: gamma,nu,p2_suc,p1_suc,p_suc,n_quantum,n_classical,mc_runs,mc_mean,mc_std_error.
    /// With --grid the CSV is the cost curve instead: nu,n_quantum
    Cost(CostArgs),
    /// The optimal classical bit-comparison baseline.
    ///
    /// CSV columns: n,p,success_prob,optimal_p,expected_cost
    Classical(ClassicalArgs),
    /// Success probability from a recorded counts table.
    ///
    /// CSV columns: class,count,fraction
    Analyze(AnalyzeArgs),
    /// Generate or ingest an interference fringe and fit its visibility.
    ///
    /// CSV columns: control,counts_iii,counts_iv
    Fringe(FringeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write the report to FILE instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OpticsArgs {
    /// Beam-splitter branching ratio R/T.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Two-photon interference visibility in [0, 1].
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub nu: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Relative interferometer phase in radians; 0 is the ideal setting.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phase: f64,
    /// Patterns to sample; 0 prints the exact distribution only.
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Elections to simulate; 0 skips the Monte Carlo.
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial cap per simulated election.
    #[arg(long, default_value_t = qle::protocol::DEFAULT_MAX_TRIALS)]
    pub max_trials: u64,
    /// Visibility grid LO:HI:STEP for the cost curve.
    #[arg(long, value_name = "LO:HI:STEP")]
    pub grid: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClassicalArgs {
    /// Bits compared per round.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Probability of drawing a 1.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub p: f64,
    /// Elections to simulate; 0 skips the Monte Carlo.
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Round cap per simulated election.
    #[arg(long, default_value_t = qle::protocol::DEFAULT_MAX_TRIALS)]
    pub max_rounds: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Counts table (detector,A1,A2,B1,B2 lower-triangular layout).
    #[arg(long, value_name = "FILE")]
    pub counts: PathBuf,
    /// Loss budget (component,transmittance); its product sets eta.
    #[arg(long, value_name = "FILE")]
    pub loss: Option<PathBuf>,
    /// Overall transmission; overrides --loss. Defaults to 0.02.
    #[arg(long)]
    pub eta: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FringeArgs {
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Post-selected events per grid point.
    #[arg(long, default_value_t = 10_000)]
    pub events: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Phase grid LO:HI:STEP in radians (default: two periods, 41 points).
    #[arg(long, value_name = "LO:HI:STEP")]
    pub grid: Option<String>,
    /// Fit a recorded scan (control,counts_iii,counts_iv) instead of generating one.
    #[arg(long, value_name = "FILE")]
    pub scan: Option<PathBuf>,
    /// Use expected counts instead of sampled ones.
    #[arg(long)]
    pub expected: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses `LO:HI:STEP` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        bail!("grid `{spec}` must have the form LO:HI:STEP");
    };
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .with_context(|| format!("invalid grid number `{s}`"))?;
        if !v.is_finite() {
            bail!("grid number `{s}` is not finite");
        }
        Ok(v)
    };
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if step <= 0.0 {
        bail!("grid step must be positive, got {step}");
    }
    if hi < lo {
        bail!("grid upper bound {hi} is below lower bound {lo}");
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        bail!("grid has {count} points, more than 10^6");
    }
    Ok((0..count).map(|k| lo + step * k as f64).collect())
}

/// Executes a parsed command and returns the rendered report.
pub fn run(cli: &Cli) -> Result<(String, Option<PathBuf>)> {
    let (report, output) = match &cli.command {
        Command::Simulate(a) => (cmd_simulate(a)?, &a.output),
        Command::Cost(a) => (cmd_cost(a)?, &a.output),
        Command::Classical(a) => (cmd_classical(a)?, &a.output),
        Command::Analyze(a) => (cmd_analyze(a)?, &a.output),
        Command::Fringe(a) => (cmd_fringe(a)?, &a.output),
    };
    Ok((report.render(output.format)?, output.out.clone()))
}
