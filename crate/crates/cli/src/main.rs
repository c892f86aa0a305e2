use std::path::PathBuf;
use std::process::ExitCode;

use affgeo_cli::{bundled, load, run, write_outcome, Kind, RunError, EXIT_CHECK_FAILED, EXIT_PASS};
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "affgeo", version, about = "Run affine-geometry verification and mechanics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name
    Run {
        scenario: String,
        /// Override the scenario's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (AFFGEO_OUT takes precedence)
        #[arg(long, default_value = "affgeo-out")]
        out: PathBuf,
        /// Print the report as JSON
        #[arg(long)]
        json: bool,
    },
    /// List bundled scenarios
    List {
        #[arg(long)]
        json: bool,
        /// Only scenarios of this kind
        #[arg(long)]
        kind: Option<String>,
    },
}

#[derive(Serialize)]
struct Listing {
    name: &'static str,
    kind: Kind,
    description: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, seed, out, json } => run_command(&scenario, seed, out, json),
        Command::List { json, kind } => list_command(json, kind.as_deref()),
    };
    ExitCode::from(code as u8)
}

fn run_command(target: &str, seed: Option<u64>, out: PathBuf, json: bool) -> i32 {
    let dir = std::env::var_os("AFFGEO_OUT").map(PathBuf::from).unwrap_or(out);
    let result = load(target).and_then(|s| run(&s, seed)).and_then(|o| {
        let written = write_outcome(&o, &dir)?;
        Ok((o, written))
    });
    let (outcome, written) = match result {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let r = &outcome.report;
    if json {
        print!("{}", outcome.report_json());
    } else {
        println!("scenario {} ({}), seed {}", r.scenario, r.kind.name(), r.seed);
        let width = r.checks.iter().map(|c| c.check.len()).max().unwrap_or(0);
        for c in &r.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            println!("  {mark}  {:width$}  residual {:.3e}", c.check, c.residual);
            if let Some(w) = &c.witness {
                println!("        witness: {w}");
            }
        }
        println!("overall: {}", if r.pass { "PASS" } else { "FAIL" });
        for p in written {
            println!("wrote {}", p.display());
        }
    }
    if outcome.pass() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn fail(e: &RunError) -> i32 {
    eprintln!("affgeo: {e}");
    e.exit_code()
}

fn list_command(json: bool, kind: Option<&str>) -> i32 {
    let filter = match kind.map(|k| Kind::from_name(k).ok_or(k)) {
        Some(Err(k)) => {
            let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
            return fail(&RunError::Parse(format!("unknown kind `{k}` (one of {})", names.join(", "))));
        }
        Some(Ok(k)) => Some(k),
        None => None,
    };
    let rows: Vec<Listing> = bundled()
        .iter()
        .map(|b| {
            let s = b.scenario();
            Listing {
                name: b.name,
                kind: s.kind,
                description: s.description,
            }
        })
        .filter(|l| filter.is_none_or(|k| l.kind == k))
        .collect();
    if json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("listing serializes"));
    } else {
        let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        let kw = rows.iter().map(|r| r.kind.name().len()).max().unwrap_or(0);
        for r in &rows {
            println!("{:w$}  {:kw$}  {}", r.name, r.kind.name(), r.description);
        }
    }
    EXIT_PASS
}
