use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "helmdamp", version, about = "Convergence of parallel Schwarz methods for damped Helmholtz problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print eta, sqrt(eta) and the Im/Re ratio of the zeroth-order term.
    Eta(Physics),
    /// Convergence factor profile of one configuration.
    Rho(RhoArgs),
    /// Profile sweeps from a preset or a JSON config.
    Sweep(SweepArgs),
    /// Greens-function field of a point source.
    Greens(GreensArgs),
    /// Discrete parallel Schwarz iteration compared with the mode analysis.
    RunSchwarz(SchwarzArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Physics {
    #[arg(long)]
    pub omega: f64,
    /// First-order damping.
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    /// Viscoelastic damping.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Modes {
    Physical,
    Scan,
}

#[derive(Debug, Clone, Args)]
pub struct XiArgs {
    /// Physical sine modes k*pi or a uniform xi/omega scan.
    #[arg(long, value_enum)]
    pub modes: Option<Modes>,
    #[arg(long = "xi-max-ratio")]
    pub xi_max_ratio: Option<f64>,
    #[arg(long = "xi-points")]
    pub xi_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bc {
    Waveguide,
    Cavity,
}

#[derive(Debug, Args)]
pub struct RhoArgs {
    #[command(flatten)]
    pub physics: Physics,
    /// Number of subdomains.
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
    /// Overlap.
    #[arg(long = "L", default_value_t = 0.0)]
    pub l: f64,
    #[arg(long, value_enum, default_value_t = Bc::Waveguide)]
    pub bc: Bc,
    #[command(flatten)]
    pub xi: XiArgs,
    /// Write rho.csv and rho.svg here instead of printing CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// JSON sweep configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub bc: Option<Bc>,
    #[command(flatten)]
    pub xi: XiArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "helmdamp-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldBc {
    Waveguide,
    Cavity,
    FreeSpace,
}

#[derive(Debug, Args)]
pub struct GreensArgs {
    #[command(flatten)]
    pub physics: Physics,
    #[arg(long, value_enum, default_value_t = FieldBc::Cavity)]
    pub bc: FieldBc,
    /// Interior grid points per direction.
    #[arg(long, default_value_t = 255)]
    pub grid: usize,
    #[arg(long = "source-x", default_value_t = 0.5)]
    pub source_x: f64,
    #[arg(long = "source-y", default_value_t = 0.5)]
    pub source_y: f64,
    #[arg(long, default_value = "helmdamp-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SchwarzArgs {
    #[command(flatten)]
    pub physics: Physics,
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
    /// Nominal overlap, snapped to the grid.
    #[arg(long = "L", conflicts_with = "overlap_cells")]
    pub l: Option<f64>,
    /// Overlap as a whole number of grid cells.
    #[arg(long = "overlap-cells")]
    pub overlap_cells: Option<usize>,
    #[arg(long, value_enum, default_value_t = Bc::Waveguide)]
    pub bc: Bc,
    #[arg(long, default_value_t = 255)]
    pub grid: usize,
    #[arg(long, default_value_t = 80)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "helmdamp-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}
