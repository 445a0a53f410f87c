//! Command-line front end: `run`, `check` and `conformance`.
//!
//! Exit status is 0 on success, 1 for bad input (unreadable, unparsable or
//! invalid scenarios, unknown profiles) and 2 for failures while running.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use geosim::conformance::{
    matrix, profile_from_scenario, shipped_profile, shipped_profiles, CoverageMatrix, MethodologyProfile,
};
use geosim::dsl::{parse, validate, ParseError, Severity};
use geosim::engine::{EngineError, RunOptions, RunOutput, Simulation};

/// Overrides the planning command of every external mind backend.
pub const MIND_CMD_ENV: &str = "GEOSIM_MIND_CMD";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "geosim", version, about = "Agent-based geosimulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RunFormat {
    /// Output files only.
    Records,
    /// Also print final per-type field means to stdout.
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MatrixFormat {
    Text,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write its output files.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        ticks: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        stride: Option<u64>,
        #[arg(long, value_enum, default_value = "records")]
        format: RunFormat,
    },
    /// Parse and validate a scenario.
    Check { path: PathBuf },
    /// Print reference-model coverage: the methodology table, a shipped
    /// profile by name, a profile file (.toml) or a scenario's profile.
    Conformance {
        target: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: MatrixFormat,
    },
}

/// Runs the command line `args` (program name first) and returns the exit status.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            seed,
            ticks,
            out: dir,
            stride,
            format,
        } => {
            let options = RunOptions {
                seed,
                ticks,
                stride,
                base_dir: scenario.parent().map(Path::to_path_buf).unwrap_or_default(),
                mind_command: std::env::var(MIND_CMD_ENV).ok().filter(|c| !c.trim().is_empty()),
                ..RunOptions::default()
            };
            cmd_run(&scenario, &options, &dir, format == RunFormat::Table, out, err)
        }
        Command::Check { path } => cmd_check(&path, out, err),
        Command::Conformance { target, format } => {
            cmd_conformance(target.as_deref(), format == MatrixFormat::Csv, out, err)
        }
    }
}

fn read(path: &Path, err: &mut dyn Write) -> Option<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            None
        }
    }
}

fn report_parse_errors(path: &Path, errors: &[ParseError], err: &mut dyn Write) {
    for e in errors {
        let _ = writeln!(err, "{}:{e}", path.display());
    }
}

/// Runs a scenario to completion and returns its output without touching
/// the filesystem beyond reading the scenario.
pub fn run_scenario(path: &Path, options: &RunOptions) -> Result<RunOutput, EngineError> {
    let source = std::fs::read_to_string(path).map_err(|e| EngineError::Compile(format!("{}: {e}", path.display())))?;
    Simulation::from_source(&source, options)?.run()
}

fn cmd_run(
    path: &Path,
    options: &RunOptions,
    dir: &Path,
    table: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(source) = read(path, err) else {
        return EXIT_INPUT;
    };
    let started = Instant::now();
    let result = Simulation::from_source(&source, options).and_then(Simulation::run);
    let output = match result {
        Ok(o) => o,
        Err(EngineError::Parse(errors)) => {
            report_parse_errors(path, &errors, err);
            return EXIT_INPUT;
        }
        Err(EngineError::Invalid(report)) => {
            for d in report.errors() {
                let _ = writeln!(err, "{d}");
            }
            return EXIT_INPUT;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let wall = started.elapsed();
    if let Err(e) = std::fs::create_dir_all(dir) {
        let _ = writeln!(err, "error: cannot create {}: {e}", dir.display());
        return EXIT_RUNTIME;
    }
    for (name, text) in output.files() {
        let target = dir.join(name);
        if let Err(e) = std::fs::write(&target, text) {
            let _ = writeln!(err, "error: cannot write {}: {e}", target.display());
            return EXIT_RUNTIME;
        }
    }
    let s = &output.summary;
    let _ = writeln!(
        err,
        "final tick {}, {} entities ({} agents), wall time {:.3} s",
        s.final_tick,
        s.entities,
        s.agents,
        wall.as_secs_f64()
    );
    if table {
        for (ty, fields) in &s.means {
            for (field, mean) in fields {
                let _ = writeln!(out, "{ty:<16} {field:<16} {mean:>12.6}");
            }
        }
    }
    EXIT_OK
}

fn cmd_check(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(source) = read(path, err) else {
        return EXIT_INPUT;
    };
    let doc = match parse(&source) {
        Ok(d) => d,
        Err(errors) => {
            report_parse_errors(path, &errors, out);
            return EXIT_INPUT;
        }
    };
    let report = validate(&doc);
    for d in &report.entries {
        let _ = writeln!(out, "{d}");
    }
    let errors = report.errors().count();
    let warnings = report.with(Severity::Warning).count();
    let _ = writeln!(out, "{}: {errors} error(s), {warnings} warning(s)", path.display());
    if errors == 0 {
        EXIT_OK
    } else {
        EXIT_INPUT
    }
}

fn scenario_profile(path: &Path, err: &mut dyn Write) -> Option<MethodologyProfile> {
    let source = read(path, err)?;
    let doc = match parse(&source) {
        Ok(d) => d,
        Err(errors) => {
            report_parse_errors(path, &errors, err);
            return None;
        }
    };
    let report = validate(&doc);
    if report.has_errors() {
        for d in report.errors() {
            let _ = writeln!(err, "{d}");
        }
        return None;
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    profile_from_scenario(&doc).renamed(name).ok()
}

fn target_matrix(target: Option<&str>, err: &mut dyn Write) -> Option<CoverageMatrix> {
    let profiles = match target {
        None => shipped_profiles(),
        Some(t) if Path::new(t).is_file() => {
            let path = Path::new(t);
            let profile = if path.extension().is_some_and(|e| e == "toml") {
                let text = read(path, err)?;
                match MethodologyProfile::from_toml(&text) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        let _ = writeln!(err, "error: {}: {e}", path.display());
                        None
                    }
                }
            } else {
                scenario_profile(path, err)
            };
            vec![profile?]
        }
        Some(name) => match shipped_profile(name) {
            Ok(p) => vec![p],
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return None;
            }
        },
    };
    match matrix(&profiles) {
        Ok(m) => Some(m),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

fn cmd_conformance(target: Option<&str>, csv: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(m) = target_matrix(target, err) else {
        return EXIT_INPUT;
    };
    let text = if csv { m.to_csv() } else { m.to_text() };
    let _ = out.write_all(text.as_bytes());
    EXIT_OK
}
