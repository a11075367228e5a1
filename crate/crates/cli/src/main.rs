//! `gaugeforge`: batch front end. Every command builds a [`Job`], runs it and
//! prints a report; the exit code encodes the status.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::{Job, Params};
use gaugeforge::report::{Report, Status};
use gaugeforge::Error;
use std::io::Read;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "gaugeforge", version, about = "Frobenius gauges over truncated Witt vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Witt vector arithmetic: `check`, `structure`.
    Witt(Cmd),
    /// Gauges: `validate`, `fixture`.
    Gauge(Cmd),
    /// Crystals: `construct`, `roundtrip`.
    Crystal(Cmd),
    /// Dieudonné functors: `to`, `roundtrip`.
    Dieudonne(Cmd),
    /// F-zips: `extract`, `tate`.
    Fzip(Cmd),
    /// Predisplays and displays: `validate`.
    Display(Cmd),
    /// Perfection of finite algebras: `core`, `family`.
    Perfection(Cmd),
    /// Divided power model: `table`, `check`, `point`.
    Cris(Cmd),
    /// de Rham gauge: `cohomology`, `check`.
    Derham(Cmd),
    /// Acceptance bundles: `paper-invariants`, `exhaustive-small`, `derham-demo`.
    Suite(Cmd),
    /// Runs a JSON job `{"command", "action", "params", "format"}`.
    Run(Common),
}

#[derive(Args, Debug)]
struct Cmd {
    /// Sub-action or suite name.
    action: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, PartialEq, Eq)]
enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Input JSON file, or `-` for stdin.
    #[arg(long)]
    input: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (stdout by default).
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Truncation degree (`D` for de Rham, `R` for the divided power model).
    #[arg(long, visible_alias = "R")]
    deg: Option<u32>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    /// Rank of generated objects, or the dimension of a Tate F-zip.
    #[arg(long)]
    rank: Option<usize>,
    /// Cohomological degree for `derham cohomology`, weight for `fzip tate`.
    #[arg(long, allow_hyphen_values = true)]
    i: Option<i64>,
    /// Include wall-clock timings (output is then not byte-reproducible).
    #[arg(long)]
    timings: bool,
    /// Corrupts a fixture so that the suite must report a violation.
    #[arg(long)]
    inject_fault: bool,
}

fn read_input(path: &str) -> Result<serde_json::Value, Error> {
    let mut text = String::new();
    if path == "-" {
        std::io::stdin().read_to_string(&mut text).map_err(|e| Error::Schema(format!("stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{path}: {e}")))?;
    }
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{path}: {e}")))
}

fn params(c: &Common) -> Result<Params, Error> {
    Ok(Params {
        input: c.input.as_deref().map(read_input).transpose()?,
        seed: c.seed,
        deg: c.deg,
        p: c.p,
        d: c.d,
        n: c.n,
        rank: c.rank,
        i: c.i,
        timings: c.timings,
        inject_fault: c.inject_fault,
    })
}

fn exit_for_error(e: &Error) -> u8 {
    match e {
        Error::Schema(_) | Error::Shape(_) => 2,
        Error::Overflow(_) => 4,
        _ => 3,
    }
}

fn exit_for_status(s: Status) -> u8 {
    match s {
        Status::Ok => 0,
        Status::Violated => 1,
        Status::Overflow => 4,
        Status::Undecided => 5,
    }
}

fn emit(report: &Report, format: Format, output: Option<&str>) -> std::io::Result<()> {
    let text = match format {
        Format::Json => report.to_json() + "\n",
        Format::Table => report.to_table(),
    };
    match output {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, action, common) = match cli.command {
        Command::Witt(c) => ("witt", c.action, c.common),
        Command::Gauge(c) => ("gauge", c.action, c.common),
        Command::Crystal(c) => ("crystal", c.action, c.common),
        Command::Dieudonne(c) => ("dieudonne", c.action, c.common),
        Command::Fzip(c) => ("fzip", c.action, c.common),
        Command::Display(c) => ("display", c.action, c.common),
        Command::Perfection(c) => ("perfection", c.action, c.common),
        Command::Cris(c) => ("cris", c.action, c.common),
        Command::Derham(c) => ("derham", c.action, c.common),
        Command::Suite(c) => ("suite", c.action, c.common),
        Command::Run(c) => ("run", None, c),
    };
    let result = (|| -> Result<(Report, Format, Option<String>), Error> {
        if command == "run" {
            let path = common.input.as_deref().ok_or_else(|| Error::Schema("run needs --input".into()))?;
            let job: Job = gaugeforge::json::from_value(&read_input(path)?)?;
            let format = match job.format.as_deref() {
                None | Some("json") => common.format,
                Some("table") => Format::Table,
                Some(other) => return Err(Error::Schema(format!("unknown format {other:?}"))),
            };
            let out = job.output.clone().or(common.output.clone());
            return Ok((commands::run(&job)?, format, out));
        }
        let job = Job { command: command.into(), action, params: serde_json::to_value(params(&common)?).unwrap(), format: None, output: None };
        Ok((commands::run(&job)?, common.format, common.output.clone()))
    })();
    match result {
        Ok((report, format, out)) => {
            if let Err(e) = emit(&report, format, out.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(exit_for_status(report.status))
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string(), "exit": exit_for_error(&e) }));
            ExitCode::from(exit_for_error(&e))
        }
    }
}
