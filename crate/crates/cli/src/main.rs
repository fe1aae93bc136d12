use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod output;

/// Similarity solutions of f''' + ((m+1)/2) f f'' - m f'^2 = 0 with f(0)=a, f'(0)=-1, f'(inf)=0.
#[derive(Parser)]
#[command(name = "lmsim", version)]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    /// Directory for output files.
    #[arg(long, global = true, env = "LMSIM_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

/// Numerical settings shared by all subcommands; echoed into every JSON summary.
#[derive(Args, Clone, Copy, Debug, Serialize)]
pub struct Settings {
    /// Integration span of a single run.
    #[arg(long, global = true, default_value_t = 100.0)]
    pub span: f64,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub abs_tol: f64,
    /// Convergence threshold on |f'| and |f''|.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tail_tol: f64,
    /// Distance from O of separatrix seeds.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub delta: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the boundary value problem at (m, a).
    Solve {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_m)]
        m: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        /// Run convex-concave searches the theory leaves open.
        #[arg(long)]
        exploratory: bool,
    },
    /// Classify the initial value problem with f''(0) = b.
    Classify {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_m)]
        m: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
    },
    /// Write the phase portrait in (u, v) as CSV layers.
    Portrait {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_m)]
        m: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
        u_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
        u_max: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
        v_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
        v_max: f64,
        /// Flow segments per side of the window.
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
    /// Critical values a1*, a2* for m > 0.
    Critical {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_m)]
        m: f64,
    },
    /// Compare the numerics against the closed forms and identities.
    Verify {
        /// Relative tolerance of the integrator used by the pins.
        #[arg(long)]
        tol: Option<f64>,
        /// Run only the named pins.
        #[arg(long = "pin")]
        pins: Vec<String>,
    },
    /// Solve along a range of m or of a.
    Sweep {
        #[arg(long, value_enum)]
        over: Over,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Fixed m when sweeping a.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_m)]
        m: Option<f64>,
        /// Fixed a when sweeping m.
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Over {
    M,
    A,
}

fn parse_m(s: &str) -> Result<f64, String> {
    let m: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if m == 0.0 {
        return Err("m=0 is the Blasius case, out of scope".to_string());
    }
    if !m.is_finite() {
        return Err(format!("m must be finite, got {s}"));
    }
    Ok(m)
}

/// Exit codes: 0 when the structure is determined, 2 for a certified empty set, 1 on failure.
pub enum Status {
    Done,
    Empty,
    Failed,
}

fn report_error(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            report_error("usage", text.lines().next().unwrap_or("").trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    let ctx = commands::Context { settings: cli.settings, out_dir: cli.out_dir };
    let result = match cli.command {
        Command::Solve { m, a, exploratory } => commands::solve(&ctx, m, a, exploratory),
        Command::Classify { m, a, b } => commands::classify(&ctx, m, a, b),
        Command::Portrait { m, u_min, u_max, v_min, v_max, grid } => commands::portrait(&ctx, m, [u_min, u_max, v_min, v_max], grid),
        Command::Critical { m } => commands::critical(&ctx, m),
        Command::Verify { tol, pins } => commands::verify(&ctx, tol, &pins),
        Command::Sweep { over, from, to, points, m, a } => commands::sweep(&ctx, over, from, to, points, m, a),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Empty) => ExitCode::from(2),
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            let kind = e.downcast_ref::<lmsim_core::Error>().map(commands::error_kind).unwrap_or("io");
            report_error(kind, &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
