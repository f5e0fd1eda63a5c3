use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "vdmlab", version, about = "Transfinite diameter workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Graded monomial counts m_d, h_d, l_d, r_d (or the index list with --list)
    Basis,
    /// Chebyshev constants Y(alpha) for |alpha| <= d_max
    Cheb,
    /// Fekete estimates of the transfinite diameter
    Diameter,
    /// Fekete estimates of the homogeneous diameter
    Hdiameter,
    /// Fekete estimates of the weighted diameter
    Wdiameter,
    /// Weighted maxima on E against homogeneous maxima on the lift
    LiftCheck,
    /// Z_d by orthogonal polynomials
    Zd,
    /// Z_d by Monte Carlo
    ZdMc,
    /// Large-deviation probe for the Vandermonde ensemble
    Ldp,
    /// Christoffel density mass and moments
    Christoffel,
    /// Diameter of a circled set in C^2 from its Robin function
    Rumely,
    /// Z_d series on a truncated cone
    Cone,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Basis => "basis",
            Command::Cheb => "cheb",
            Command::Diameter => "diameter",
            Command::Hdiameter => "hdiameter",
            Command::Wdiameter => "wdiameter",
            Command::LiftCheck => "lift-check",
            Command::Zd => "zd",
            Command::ZdMc => "zd-mc",
            Command::Ldp => "ldp",
            Command::Christoffel => "christoffel",
            Command::Rumely => "rumely",
            Command::Cone => "cone",
        }
    }

    /// Commands whose output depends on a random stream.
    pub fn stochastic(self) -> bool {
        matches!(
            self,
            Command::Diameter | Command::Hdiameter | Command::Wdiameter | Command::LiftCheck | Command::ZdMc | Command::Ldp
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetArg {
    Interval,
    Circle,
    Disk,
    Ball,
    Polydisk,
    Torus,
    Simplex,
    Box,
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureArg {
    Arc,
    TorusArc,
    Lebesgue,
    Arcsine,
    UniformCircle,
    UniformInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Plain,
    Homogeneous,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Stieltjes,
    Cholesky,
    Lift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Ball,
    Polydisk,
    Product,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// JSON problem file: {"schema", "set", "weight", "measure"}
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// CSV destination; the provenance sidecar goes to PATH.json
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    #[arg(long, value_enum, global = true)]
    pub set: Option<SetArg>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub measure: Option<MeasureArg>,
    /// Quadrature nodes for measures that leave the rule size open
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Weight Q(x) = q_scale |x|^q_exponent
    #[arg(long, global = true)]
    pub q_scale: Option<f64>,
    #[arg(long, global = true)]
    pub q_exponent: Option<f64>,

    #[arg(long, global = true)]
    pub d_max: Option<u32>,
    #[arg(long, alias = "mesh-resolution", global = true)]
    pub resolution: Option<usize>,
    /// Mesh refinement used for the Chebyshev mesh gap; 0 disables it
    #[arg(long, global = true)]
    pub fine_factor: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum, global = true)]
    pub method: Option<MethodArg>,
    /// Phase resolution of the lift
    #[arg(long, global = true)]
    pub phases: Option<usize>,

    #[arg(long, value_enum, global = true)]
    pub model: Option<ModelArg>,
    /// Radii of the product model, comma separated
    #[arg(long, value_delimiter = ',', global = true)]
    pub radii: Option<Vec<f64>>,
    /// Outer edge of the log|t| grid
    #[arg(long, global = true)]
    pub grid_radius: Option<f64>,
    /// Grid nodes per unit of log|t|
    #[arg(long, global = true)]
    pub grid_size: Option<usize>,

    /// Growth certificate Q(x) >= c |x|^gamma
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Fixed truncation radius
    #[arg(long = "T", global = true)]
    pub t: Option<f64>,
    /// Exponents of the cone density R(x) = x^alpha, comma separated
    #[arg(long, value_delimiter = ',', global = true)]
    pub density_exp: Option<Vec<u32>>,

    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,

    /// Highest moment degree reported by christoffel
    #[arg(long, global = true)]
    pub moments: Option<u32>,
    /// christoffel: one row per quadrature node instead of moments
    #[arg(long, global = true)]
    pub per_node: bool,
    /// basis: list the multi-indices instead of the counts
    #[arg(long, global = true)]
    pub list: bool,
}
