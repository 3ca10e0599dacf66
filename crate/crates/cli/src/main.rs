use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quasinormal::opspec::Truncation;
use quasinormal::Tolerances;
use quasinormal_cli::{parse_truncation, render_text, run, to_canonical_string, Command, Format, Input, RunConfig};

#[derive(Parser)]
#[command(name = "quasinormal", version, about = "Quasinormality checks for truncated Hardy-space operators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Route an operator to its quasinormality checker
    Check(Common),
    /// Diagonal-plus-isometry form of a quasinormal operator
    Decompose(Common),
    /// Check of S_k + F for a finite-rank F
    CnuCheck(Common),
    /// Generate a quasinormal rank-one perturbation and check it
    Generate(Common),
    /// Inner function of the kernel of a quasinormal S + u (x) v
    Theta(Common),
    /// Randomized checker/oracle equivalence suite
    Suite(Common),
    /// Brute-force residual and defect kernel
    Oracle(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    /// JSON spec file
    #[arg(long, conflicts_with = "spec")]
    input: Option<PathBuf>,
    /// inline JSON spec
    #[arg(long)]
    spec: Option<String>,
    /// report path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long)]
    tol_rank: Option<f64>,
    /// positive integer or "auto"
    #[arg(long, value_parser = parse_truncation)]
    truncation: Option<Truncation>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    family: Option<String>,
    /// include wall-clock time in the report (breaks byte-identical output)
    #[arg(long)]
    timing: bool,
}

fn config(command: Command, a: Common) -> RunConfig {
    let mut tol = Tolerances::default();
    if let Some(r) = a.tol_residual {
        tol = tol.with_residual(r);
    }
    if let Some(r) = a.tol_rank {
        tol = tol.with_rank(r);
    }
    let input = match (a.input, a.spec) {
        (Some(p), _) => Input::Path(p),
        (None, Some(s)) => Input::Inline(s),
        (None, None) => Input::None,
    };
    RunConfig {
        command,
        input,
        tolerances: tol,
        truncation: a.truncation,
        out: a.out,
        format: match a.format {
            FormatArg::Json => Format::Json,
            FormatArg::Text => Format::Text,
        },
        seed: a.seed,
        trials: a.trials,
        family: a.family,
        timing: a.timing,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Cmd::Check(a) => config(Command::Check, a),
        Cmd::Decompose(a) => config(Command::Decompose, a),
        Cmd::CnuCheck(a) => config(Command::CnuCheck, a),
        Cmd::Generate(a) => config(Command::Generate, a),
        Cmd::Theta(a) => config(Command::Theta, a),
        Cmd::Suite(a) => config(Command::Suite, a),
        Cmd::Oracle(a) => config(Command::Oracle, a),
    };
    let outcome = run(&cfg);
    if let Some(msg) = &outcome.error {
        eprintln!("error: {msg}");
    }
    if let Some(report) = &outcome.report {
        let json = to_canonical_string(report);
        if let Some(path) = &cfg.out {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        match (cfg.format, &cfg.out) {
            (Format::Text, _) => print!("{}", render_text(report)),
            (Format::Json, None) => print!("{json}"),
            (Format::Json, Some(_)) => {}
        }
    }
    ExitCode::from(outcome.exit as u8)
}
