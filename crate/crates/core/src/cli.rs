//! Argument parsing for the `lattice-series` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Result;
use crate::identity::IdentityId;
use crate::numerics::{parse_scalar, Scalar};
use crate::report::{Command, GridAxis, OutputFormat, RunConfig, SeriesName};
use crate::reps::CACHE_DIR_ENV;
use crate::series::TruncationPolicy;

#[derive(Debug, Parser)]
#[command(name = "lattice-series", version, about = "Lattice series evaluation and identity checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,

    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Target absolute truncation error per series
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub policy_eps: f64,
    /// Cap on the inner summation index
    #[arg(long, global = true)]
    pub ncap: Option<u64>,
    /// Cap on the outer summation index
    #[arg(long, global = true)]
    pub rcap: Option<u64>,
    /// Disable tail acceleration
    #[arg(long, global = true)]
    pub no_accel: bool,
    /// Absolute tolerance in the pass rule
    #[arg(long, global = true, default_value_t = crate::identity::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Include a generation timestamp in JSON metadata
    #[arg(long, global = true)]
    pub stamp: bool,
    /// Directory for cached representation tables
    #[arg(long, global = true, env = CACHE_DIR_ENV)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Text,
}

/// Scalar parameters shared by `eval`, `verify` and `scan`. Complex values
/// are written `re+imJ`.
#[derive(Debug, Args, Default)]
pub struct ParamArgs {
    #[arg(long, value_parser = scalar_arg, allow_hyphen_values = true)]
    pub x: Option<Scalar>,
    #[arg(long, value_parser = scalar_arg, allow_hyphen_values = true)]
    pub y: Option<Scalar>,
    #[arg(long, value_parser = scalar_arg, allow_hyphen_values = true)]
    pub w: Option<Scalar>,
    #[arg(long, value_parser = scalar_arg, allow_hyphen_values = true)]
    pub x1: Option<Scalar>,
    #[arg(long, value_parser = scalar_arg, allow_hyphen_values = true)]
    pub x2: Option<Scalar>,
    #[arg(long, value_parser = scalar_arg, allow_hyphen_values = true)]
    pub beta: Option<Scalar>,
    #[arg(long)]
    pub r: Option<u64>,
    #[arg(long)]
    pub a: Option<u64>,
    #[arg(long)]
    pub b: Option<u64>,
    #[arg(long)]
    pub c: Option<u64>,
    #[arg(long)]
    pub d: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Evaluate one series
    Eval {
        #[arg(long, value_parser = series_arg)]
        series: SeriesName,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Check one identity at one point
    Verify {
        #[arg(long, value_parser = identity_arg)]
        identity: IdentityId,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Tabulate representation counts of a x^2 + b y^2, x, y >= 1
    Reps {
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        nmax: u64,
    },
    /// Check one identity over a grid of points
    Scan {
        #[arg(long, value_parser = identity_arg)]
        identity: IdentityId,
        /// Axis as name=start:stop:count; repeat for a product grid
        #[arg(long = "grid", value_parser = grid_arg)]
        grid: Vec<GridAxis>,
        #[command(flatten)]
        params: ParamArgs,
    },
}

fn scalar_arg(s: &str) -> std::result::Result<Scalar, String> {
    parse_scalar(s).map_err(|e| e.to_string())
}

fn series_arg(s: &str) -> std::result::Result<SeriesName, String> {
    s.parse().map_err(|e: crate::error::Error| e.to_string())
}

fn identity_arg(s: &str) -> std::result::Result<IdentityId, String> {
    s.parse().map_err(|e: crate::error::Error| e.to_string())
}

fn grid_arg(s: &str) -> std::result::Result<GridAxis, String> {
    s.parse().map_err(|e: crate::error::Error| e.to_string())
}

impl ParamArgs {
    fn apply(&self, mut config: RunConfig) -> RunConfig {
        let scalars = [
            ("x", self.x),
            ("y", self.y),
            ("w", self.w),
            ("x1", self.x1),
            ("x2", self.x2),
            ("beta", self.beta),
        ];
        for (name, v) in scalars {
            if let Some(v) = v {
                config = config.param(name, v);
            }
        }
        let ints = [("r", self.r), ("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)];
        for (name, v) in ints {
            if let Some(v) = v {
                config = config.param(name, Scalar::new(v as f64, 0.0));
            }
        }
        config
    }
}

impl Cli {
    pub fn into_config(self) -> Result<RunConfig> {
        let g = self.global;
        let mut policy = TruncationPolicy::with_eps(g.policy_eps);
        if let Some(n) = g.ncap {
            policy.n_cap = n;
        }
        if let Some(r) = g.rcap {
            policy.r_cap = r;
        }
        policy.accel = !g.no_accel;

        let mut config = match self.command {
            CliCommand::Eval { series, params } => {
                let mut c = params.apply(RunConfig::new(Command::Eval));
                c.series = Some(series);
                c
            }
            CliCommand::Verify { identity, params } => {
                let mut c = params.apply(RunConfig::new(Command::Verify));
                c.identity = Some(identity);
                c
            }
            CliCommand::Reps { a, b, nmax } => RunConfig::new(Command::Reps)
                .param("a", Scalar::new(a as f64, 0.0))
                .param("b", Scalar::new(b as f64, 0.0))
                .param("nmax", Scalar::new(nmax as f64, 0.0)),
            CliCommand::Scan { identity, grid, params } => {
                let mut c = params.apply(RunConfig::new(Command::Scan));
                c.identity = Some(identity);
                c.grid = grid;
                c
            }
        };
        config.policy = policy;
        config.tol_abs = g.tol;
        config.format = match g.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Text => OutputFormat::Text,
        };
        config.output_path = g.output;
        config.stamp = g.stamp;
        config.cache_dir = g.cache_dir;
        config.validate()?;
        Ok(config)
    }
}
