use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use denim::recipes::{compile, disassemble, from_file_bytes, to_file_bytes};
use denim::sim::scenario::load_recipe_file;
use denim::sim::{self, check_indistinguishable, overhead_report, AdversaryView, Outcome, Scenario, Verdict};

/// Deterministic simulator and toolchain for a deniable messaging protocol.
#[derive(Parser)]
#[command(name = "denim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its adversary-view trace.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's `seed` line.
        #[arg(long)]
        seed: Option<u64>,
        /// Trace destination; standard output when omitted.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Print a trace file as a table.
    View {
        trace: PathBuf,
        /// Only the datagrams on this user's link to the server.
        #[arg(long)]
        user: Option<String>,
    },
    /// Compare two traces; exit 0 if equal, 1 at the first divergence.
    Compare { left: PathBuf, right: PathBuf },
    /// Print the overhead report of a trace produced by the given scenario.
    Report {
        trace: PathBuf,
        scenario: PathBuf,
        /// Seed the trace was produced with, if overridden at run time.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compile recipe source to a bytecode file.
    CompileRecipe {
        source: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Disassemble a compiled recipe file.
    Disasm { bytecode: PathBuf },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

type Done = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_trace(path: &Path) -> Result<AdversaryView, Failure> {
    AdversaryView::parse_tsv(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn simulate(path: &Path, seed: Option<u64>) -> Result<(Scenario, Outcome), Failure> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut scenario = Scenario::parse_with(&text, &|rel| load_recipe_file(&base.join(rel)))
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let outcome = sim::run(&scenario).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok((scenario, outcome))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Done {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::input(format!("standard output: {e}"))),
    }
}

fn execute(command: Command) -> Done {
    match command {
        Command::Run {
            scenario,
            seed,
            trace_out,
        } => {
            let (_, outcome) = simulate(&scenario, seed)?;
            for f in &outcome.failures {
                eprintln!("warning: line {}: t={} {}: {}", f.line, f.time, f.user, f.error);
            }
            write_out(trace_out.as_deref(), outcome.view().to_tsv().as_bytes())
        }
        Command::View { trace, user } => {
            let view = read_trace(&trace)?;
            let mut out = format!("{:>10}  {:<12} {:<12} {:>6}\n", "time_ms", "src", "dst", "bytes");
            let mut shown = 0;
            for e in &view.events {
                if user.as_ref().is_some_and(|u| *u != e.src && *u != e.dst) {
                    continue;
                }
                shown += 1;
                out.push_str(&format!("{:>10}  {:<12} {:<12} {:>6}\n", e.time, e.src, e.dst, e.size));
            }
            out.push_str(&format!("{shown} datagrams\n"));
            write_out(None, out.as_bytes())
        }
        Command::Compare { left, right } => {
            let (a, b) = (read_trace(&left)?, read_trace(&right)?);
            match check_indistinguishable(&a, &b) {
                Verdict::Equal => {
                    println!("equal ({} datagrams)", a.events.len());
                    Ok(())
                }
                v => Err(Failure {
                    code: 1,
                    message: v.to_string(),
                }),
            }
        }
        Command::Report {
            trace,
            scenario,
            seed,
        } => {
            let recorded = read_trace(&trace)?;
            let (sc, outcome) = simulate(&scenario, seed)?;
            let verdict = check_indistinguishable(&recorded, &outcome.view());
            if !verdict.is_equal() {
                return Err(Failure::input(format!(
                    "{} was not produced by {}: {verdict}",
                    trace.display(),
                    scenario.display()
                )));
            }
            write_out(None, overhead_report(&outcome.trace, &sc.server).render().as_bytes())
        }
        Command::CompileRecipe { source, out } => {
            let src = read(&source)?;
            let code = compile(&src).map_err(|e| Failure::input(format!("{}: {e}", source.display())))?;
            write_out(Some(&out), &to_file_bytes(&code))?;
            println!("{}: {} bytes of bytecode", out.display(), code.len());
            Ok(())
        }
        Command::Disasm { bytecode } => {
            let bytes = fs::read(&bytecode).map_err(|e| Failure::input(format!("{}: {e}", bytecode.display())))?;
            let code = from_file_bytes(&bytes).map_err(|e| Failure::input(format!("{}: {e}", bytecode.display())))?;
            let text = disassemble(&code).map_err(|e| Failure::input(format!("{}: {e}", bytecode.display())))?;
            write_out(None, text.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
