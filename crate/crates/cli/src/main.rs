//! Command-line frontend. Subcommands cover the full workflow: generate a
//! synthetic training volume, fit a sparse GP, reconstruct the mean field,
//! compute level-crossing probabilities densely or adaptively, compare the
//! two, and sweep iso-values. Every run echoes its resolved configuration as
//! JSON to stderr; every output file gets a provenance JSON beside it.

mod commands;
mod provenance;

use std::process::ExitCode;

use clap::builder::TypedValueParser;
use clap::Parser;
use serde::Serialize;

/// Exit codes: 0 success, 2 usage error, 3 input or validation error,
/// 4 numerical failure. Clap's own parse errors also exit with 2.
const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "gplcp", version, about = "Level-crossing probability fields from sparse GP models")]
struct Cli {
    /// Emit errors as machine-readable JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

/// Comma-separated grid dims, e.g. `--dims 32,32,32`.
#[derive(Clone, Copy, Serialize)]
struct Dims([usize; 3]);

fn parse_dims(text: &str) -> Result<Dims, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated dims, got \"{text}\""));
    }
    let mut dims = [0usize; 3];
    for (slot, part) in dims.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("\"{part}\" is not a grid dimension"))?;
        // Grid dims count points; every consumer needs at least one cell.
        if *slot < 2 {
            return Err(format!("grid dims must be at least 2 per axis, got {slot}"));
        }
    }
    Ok(Dims(dims))
}

/// Comma-separated iso-values. A newtype keeps clap from treating the field
/// as a repeated argument.
#[derive(Clone, Serialize)]
struct IsoList(Vec<f64>);

fn parse_iso_list(text: &str) -> Result<IsoList, String> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|p| p.trim().parse()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(IsoList(v)),
        _ => Err(format!("expected comma-separated iso values, got \"{text}\"")),
    }
}

fn dims_parser() -> impl TypedValueParser<Value = Dims> {
    clap::builder::StringValueParser::new().try_map(|s| parse_dims(&s))
}

fn iso_list_parser() -> impl TypedValueParser<Value = IsoList> {
    clap::builder::StringValueParser::new().try_map(|s| parse_iso_list(&s))
}

#[derive(clap::Subcommand)]
enum Command {
    /// Write the synthetic Tangle volume used throughout as training data.
    GenTangle(commands::GenTangleArgs),
    /// Fit a sparse GP regression model to a training volume.
    Fit(commands::FitArgs),
    /// Reconstruct the posterior mean on a grid (for mean-isosurface rendering).
    PredictMean(commands::PredictMeanArgs),
    /// Compute the LCP field by evaluating every cell.
    LcpDense(commands::LcpArgs),
    /// Compute the LCP field with the octree query and pruning bound.
    LcpAdaptive(commands::LcpAdaptiveArgs),
    /// Compare a test LCP volume against a truth volume.
    Compare(commands::CompareArgs),
    /// Sweep iso-values, timing dense against adaptive.
    Bench(commands::BenchArgs),
}

fn error_kind(err: &gplcp::Error) -> &'static str {
    use gplcp::Error::*;
    match err {
        Config(_) => "config",
        Parse(_) => "parse",
        Validation(_) => "validation",
        SizeMismatch(_) => "size_mismatch",
        SpecMismatch(_) => "spec_mismatch",
        DegenerateRange(_) => "degenerate_range",
        FactorizationFailure(_) => "factorization_failure",
        NumericalInstability(_) => "numerical_instability",
        Io(_) => "io",
    }
}

fn exit_code_for(err: &gplcp::Error) -> u8 {
    use gplcp::Error::*;
    match err {
        Config(_) => EXIT_USAGE,
        Parse(_) | Validation(_) | SizeMismatch(_) | SpecMismatch(_) | DegenerateRange(_)
        | Io(_) => EXIT_INPUT,
        FactorizationFailure(_) | NumericalInstability(_) => EXIT_NUMERICAL,
    }
}

fn report_error(err: &gplcp::Error, json: bool) {
    if json {
        let payload = serde_json::json!({
            "error": {
                "kind": error_kind(err),
                "message": err.to_string(),
                "exit_code": exit_code_for(err),
            }
        });
        eprintln!("{payload}");
    } else {
        eprintln!("error: {err}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenTangle(args) => commands::gen_tangle(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::PredictMean(args) => commands::predict_mean(&args),
        Command::LcpDense(args) => commands::lcp_dense(&args),
        Command::LcpAdaptive(args) => commands::lcp_adaptive(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::Bench(args) => commands::bench(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report_error(&err, cli.json_errors);
            ExitCode::from(exit_code_for(&err))
        }
    }
}
