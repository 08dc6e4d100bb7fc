//! Argument and configuration-file schema.
//!
//! Each subcommand's parameters derive both `clap::Args` and
//! `serde::Deserialize` over optional fields; values resolve as
//! flags > config file section > built-in defaults.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "kryloscope",
    version,
    about = "Krylov-chain operator-growth dynamics: exact chain evolution, full counting \
             statistics, semiclassical flows, and linearized fluctuations"
)]
pub struct Cli {
    /// TOML configuration file with per-subcommand sections; command-line
    /// flags override file values.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,

    /// Output directory (default: $KRYLOSCOPE_OUT_DIR or ./kryloscope_runs).
    #[arg(long, global = true)]
    pub out_dir: Option<std::path::PathBuf>,

    /// Exit 0 even when numerical validity flags are raised.
    #[arg(long, global = true)]
    pub allow_flagged: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Krylov-chain amplitudes and export K(t), variance, and
    /// truncation diagnostics.
    Evolve(EvolveArgs),
    /// Full counting statistics: Z(χ,t), cumulants, free energy, and the
    /// large-deviation rate function.
    Fcs(FcsArgs),
    /// Integrate the semiclassical Hamilton flow in Krylov phase space.
    Semiclassics(SemiclassicsArgs),
    /// Classify Lanczos-coefficient asymptotics into growth classes.
    Classify(ClassifyArgs),
    /// Linearized fluctuations: stability matrices, Lyapunov-equation
    /// covariance, optional Monte Carlo cross-check.
    Fluct(FluctArgs),
    /// Crossover susceptibility sweep over n*(h) = c/h.
    Sweep(SweepArgs),
    /// Generating-state overlap series and Krylov moments.
    Overlap(OverlapArgs),
    /// Closed-form model validation table.
    Validate(ValidateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evolve(_) => "evolve",
            Command::Fcs(_) => "fcs",
            Command::Semiclassics(_) => "semiclassics",
            Command::Classify(_) => "classify",
            Command::Fluct(_) => "fluct",
            Command::Sweep(_) => "sweep",
            Command::Overlap(_) => "overlap",
            Command::Validate(_) => "validate",
        }
    }
}

/// Sections of the TOML configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub evolve: Option<EvolveArgs>,
    pub fcs: Option<FcsArgs>,
    pub semiclassics: Option<SemiclassicsArgs>,
    pub classify: Option<ClassifyArgs>,
    pub fluct: Option<FluctArgs>,
    pub sweep: Option<SweepArgs>,
    pub overlap: Option<OverlapArgs>,
    pub validate: Option<ValidateArgs>,
}

macro_rules! merge_fields {
    ($self:ident, $file:ident; $($field:ident),* $(,)?) => {
        $(if $self.$field.is_none() {
            $self.$field = $file.$field.clone();
        })*
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveArgs {
    /// Profile: a CSV file path or family spec like `su11:alpha=1,k=0.5`.
    #[arg(long)]
    pub profile: Option<String>,
    /// Final reporting time.
    #[arg(long, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
    /// Number of reporting steps (grid has steps+1 points).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Boundary-leakage tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Truncation: `auto` or a site count.
    #[arg(long)]
    pub truncation: Option<String>,
    /// Per-step integrator tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub step_tol: Option<f64>,
    /// Also export the per-time P(n,t) matrix.
    #[arg(long)]
    pub distributions: Option<bool>,
}

impl EvolveArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; profile, tmax, steps, tol, truncation, step_tol, distributions);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcsArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of counting-field points on (-π, π].
    #[arg(long)]
    pub chi_points: Option<usize>,
    /// Number of cumulants to export (≤ 6).
    #[arg(long)]
    pub cumulants: Option<usize>,
    /// Tilting-grid half-width for the rate function.
    #[arg(long, allow_negative_numbers = true)]
    pub s_max: Option<f64>,
    /// Tilting-grid points.
    #[arg(long)]
    pub s_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
}

impl FcsArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; profile, tmax, steps, chi_points, cumulants, s_max, s_points, tol);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiclassicsArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub n0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

impl SemiclassicsArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; profile, n0, p0, tmax, steps);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub nmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub nmax: Option<f64>,
}

impl ClassifyArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; profile, nmin, nmax);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctArgs {
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub n0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// `identity`, `zero`, or `dnn,dnp,dpp`.
    #[arg(long)]
    pub noise: Option<String>,
    /// Euler–Maruyama sample count; 0 disables the Monte Carlo check.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// RNG seed (required when mc_samples > 0).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl FluctArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; profile, n0, p0, tmax, steps, noise, mc_samples, seed);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Comma-separated decreasing h grid, e.g. `1,0.1,0.01,0.001`.
    #[arg(long)]
    pub h_grid: Option<String>,
    /// Crossover scale constant: n*(h) = c/h.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub n0: Option<f64>,
    /// Horizon of the quantum-chain diagnostic run.
    #[arg(long, allow_negative_numbers = true)]
    pub quantum_tmax: Option<f64>,
    /// `identity`, `zero`, or `dnn,dnp,dpp`.
    #[arg(long)]
    pub noise: Option<String>,
}

impl SweepArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; h_grid, c, alpha, gamma, n0, quantum_tmax, noise);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapArgs {
    #[arg(long)]
    pub profile: Option<String>,
    /// Modulus squared w = z̄ z.
    #[arg(long, allow_negative_numbers = true)]
    pub w: Option<f64>,
    /// Highest normalized moment to report.
    #[arg(long)]
    pub moments: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
}

impl OverlapArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; profile, w, moments, tol);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    /// Output format for the validation table.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
}

impl ValidateArgs {
    pub fn merge_config(&mut self, file: &Self) {
        merge_fields!(self, file; format, tmax);
    }
}
