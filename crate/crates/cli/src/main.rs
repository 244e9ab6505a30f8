mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "vertexlab",
    version,
    about = "Vertex functions, elliptic stable envelopes and their monodromy for T*Gr(k,n)"
)]
pub struct Cli {
    /// JSON configuration; falls back to $VERTEXLAB_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for generic evaluation points and sampled parameters.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Rank k of the built-in parameter point (ignored when the config has params).
    #[arg(long, global = true, default_value_t = 1)]
    pub k: usize,
    /// Framing n of the built-in parameter point.
    #[arg(long, global = true, default_value_t = 2)]
    pub n: usize,
    /// Override the Kahler parameter z.
    #[arg(long, global = true)]
    pub z: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Interpolate through the nodes a_i.
    Interp(InterpArgs),
    /// Evaluate or check an elliptic stable envelope.
    #[command(subcommand)]
    Stab(StabCommand),
    /// Residue series of the vertex function against the torus quadrature.
    Vertex(VertexArgs),
    /// Monodromy matrix of the two fixed-point bases.
    Monodromy(MonodromyArgs),
    /// Residual table over three seeded admissible points.
    Selftest,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpMode {
    Lagrange,
    Trig,
    Elliptic,
}

#[derive(Args, Debug)]
pub struct InterpArgs {
    #[arg(long, value_enum)]
    pub mode: InterpMode,
    /// NodeData JSON `{"nodes":[[re,im],..],"values":[[re,im],..]}`; else the config's `interp`.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Lowest exponent of the trigonometric window.
    #[arg(long = "L", default_value_t = 0, allow_hyphen_values = true)]
    pub l: i32,
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
}

#[derive(Args, Debug)]
pub struct StabTarget {
    /// Fixed point as comma-separated 1-based labels; defaults to the first one.
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    pub chamber: String,
    /// One coordinate per use; k values. Defaults to a seeded generic point.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum StabCommand {
    /// Envelope value and the property battery at one point.
    Eval(StabTarget),
    /// Property battery; exit 1 if any invariant fails.
    Check {
        #[command(flatten)]
        target: StabTarget,
        /// Every fixed point in both chambers.
        #[arg(long)]
        all: bool,
        /// Also evaluate on the wheel locus {a_L, a_L/hbar}.
        #[arg(long)]
        wheel: Option<usize>,
    },
}

#[derive(Args, Debug)]
pub struct VertexArgs {
    /// Truncation degree (at most 12).
    #[arg(long = "D")]
    pub d: Option<usize>,
    /// Quadrature points per axis (at most 4096).
    #[arg(long = "N")]
    pub n_points: Option<usize>,
    /// Descendent: "1", "e1", "e1^2", sums with '+'.
    #[arg(long, default_value = "1")]
    pub rho: String,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    pub chamber: String,
    /// Also sum the hbar-shifted towers and report their net contribution.
    #[arg(long)]
    pub unrestricted_poles: bool,
    /// Largest accepted relative deviation from the quadrature.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

#[derive(Args, Debug)]
pub struct MonodromyArgs {
    /// CSV of |M_ij| over a log-spaced z-annulus.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0.005)]
    pub r_min: f64,
    #[arg(long, default_value_t = 0.05)]
    pub r_max: f64,
    #[arg(long, default_value_t = 8)]
    pub radii: usize,
    #[arg(long, default_value_t = 16)]
    pub angles: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
