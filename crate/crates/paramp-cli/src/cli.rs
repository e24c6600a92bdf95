use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use paramp::collapse::{Estimator, Phenomenology};
use paramp::interferometer::Method;

#[derive(Debug, Parser)]
#[command(
    name = "paramp",
    version,
    about = "Interferometer with parametric amplifiers: visibility sweeps"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Visibility and detector means over a gain grid.
    SweepKappa(Common),
    /// Visibility under wave-function collapse over a gain grid.
    CollapseSweep(Common),
    /// Detector means over a phase-shift grid at one gain.
    Pattern(Common),
    /// Joint photon-number distributions before the second hybrid.
    Correlations(Common),
    /// Lossy-amplifier fit parameter f, optionally over a loss/temperature mesh.
    FitF(Common),
    /// Reduced and full Lindblad visibilities side by side at one cutoff.
    CompareReduced(Common),
    /// Re-executes a run from its manifest.
    Rerun {
        /// Manifest written next to an earlier output.
        #[arg(long)]
        manifest: PathBuf,
        /// Output path; defaults to the path recorded in the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Per-mode Fock cutoff.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Single gain for both amplifiers.
    #[arg(long, conflicts_with = "kappa_grid")]
    pub kappa: Option<f64>,
    /// Gain grid: comma list "0.1,0.2" or range "start:step:stop".
    #[arg(long)]
    pub kappa_grid: Option<String>,
    /// Loss rate, 1/s.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Bath temperature, K.
    #[arg(long)]
    pub temp: Option<f64>,
    /// Signal angular frequency, rad/s.
    #[arg(long)]
    pub omega_signal: Option<f64>,
    /// Idler angular frequency, rad/s.
    #[arg(long)]
    pub omega_idler: Option<f64>,
    /// Amplifier segment duration, s.
    #[arg(long)]
    pub dt_twpa: Option<f64>,
    /// Duration of each hybrid and the phase shifter, s.
    #[arg(long)]
    pub dt_component: Option<f64>,
    /// Collapse position in [0, 1].
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_parser = parse_phenomenology)]
    pub collapse: Option<Phenomenology>,
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<Estimator>,
    /// Monte Carlo samples per point.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Relative quadrature tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Phase points over [0, 2 pi) for `pattern`.
    #[arg(long)]
    pub points: Option<usize>,
    /// Amplifier loss grid Gamma * dt_twpa for the `fit-f` mesh.
    #[arg(long)]
    pub gamma_dt_grid: Option<String>,
    /// Temperature grid (K) for the `fit-f` mesh.
    #[arg(long)]
    pub temp_grid: Option<String>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: paramp::Error| e.to_string())
}

fn parse_phenomenology(s: &str) -> Result<Phenomenology, String> {
    s.parse().map_err(|e: paramp::Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: paramp::Error| e.to_string())
}
