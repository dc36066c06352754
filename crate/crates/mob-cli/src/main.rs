//! `mob`: compile and run Mob programs on a simulated network.
//!
//! Exit codes: 0 quiescent, 1 usage or I/O error, 2 compile error,
//! 3 deadlock, 4 step budget exhausted, 5 runtime error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mob_core::collect;
use mob_core::driver::{self, Compiled, DriverError, RunConfig, ScriptEntry};
use mob_core::machine::RunOutcome;
use mob_core::names::Host;

const EXIT_USAGE: u8 = 1;
const EXIT_COMPILE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "mob", version, about = "Run Mob mobile-agent programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a config file, or a single script with `--at HOST`.
    Run(RunArgs),
    /// Compile a script without running it.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct DumpArgs {
    /// Print inferred class and service types.
    #[arg(long)]
    dump_types: bool,
    /// Print the collected code repository.
    #[arg(long)]
    dump_code: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Config file, or a `.mob` script when `--at` is given.
    input: PathBuf,
    /// Place the single script INPUT on HOST.
    #[arg(long, value_name = "HOST")]
    at: Option<String>,
    /// Print one line per reduction.
    #[arg(long)]
    trace: bool,
    /// Write the trace to PATH instead of standard output.
    #[arg(long, value_name = "PATH")]
    trace_file: Option<PathBuf>,
    /// Pick among enabled threads pseudo-randomly with this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Treat a method without `return` as a runtime error.
    #[arg(long)]
    strict_returns: bool,
    /// Print the final resolver state.
    #[arg(long)]
    dump_resolver: bool,
    /// Directory for mock transcripts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    dumps: DumpArgs,
}

#[derive(Args, Debug)]
struct CheckArgs {
    file: PathBuf,
    #[command(flatten)]
    dumps: DumpArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let code = match cli.command {
        Command::Run(args) => run(args),
        Command::Check(args) => check(args),
    };
    ExitCode::from(code)
}

fn read(path: &Path) -> Result<String, u8> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("mob: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn print_dumps(label: &str, compiled: &Compiled, dumps: &DumpArgs) {
    if dumps.dump_types {
        println!("# types {label}");
        print!("{}", compiled.typing.dump());
    }
    if dumps.dump_code {
        println!("# code {label}");
        print!("{}", collect::dump(&compiled.code));
    }
}

fn check(args: CheckArgs) -> u8 {
    let source = match read(&args.file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let label = args.file.display().to_string();
    match driver::check(&source) {
        Ok(compiled) => {
            print_dumps(&label, &compiled, &args.dumps);
            0
        }
        Err(e) => {
            eprintln!("{label}: {e}");
            EXIT_COMPILE
        }
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, u8> {
    let mut config = match &args.at {
        Some(host) => {
            let host = Host::new(host.as_str());
            RunConfig {
                hosts: vec![host.clone()],
                scripts: vec![ScriptEntry {
                    path: args.input.clone(),
                    host,
                }],
                ..RunConfig::default()
            }
        }
        None => RunConfig::load(&args.input).map_err(|e| {
            eprintln!("mob: {}: {e}", args.input.display());
            EXIT_USAGE
        })?,
    };
    config.trace |= args.trace || args.trace_file.is_some();
    config.strict_returns |= args.strict_returns;
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if let Some(n) = args.max_steps {
        config.max_steps = n;
    }
    config.validate().map_err(|e| {
        eprintln!("mob: {e}");
        EXIT_USAGE
    })?;
    Ok(config)
}

fn run(args: RunArgs) -> u8 {
    match try_run(&args) {
        Ok(code) | Err(code) => code,
    }
}

fn try_run(args: &RunArgs) -> Result<u8, u8> {
    let config = load_config(args)?;
    let mut sources = Vec::new();
    for s in &config.scripts {
        sources.push((s.path.display().to_string(), read(&s.path)?));
    }
    let (mut machine, compiled) = driver::prepare(&config, &sources).map_err(|e| {
        eprintln!("{e}");
        match e {
            DriverError::Compile { .. } => EXIT_COMPILE,
            _ => EXIT_USAGE,
        }
    })?;
    for ((label, _), c) in sources.iter().zip(&compiled) {
        print_dumps(label, c, &args.dumps);
    }

    let mut sink: Option<Box<dyn Write>> = match (&args.trace_file, config.trace) {
        (Some(path), _) => Some(Box::new(BufWriter::new(File::create(path).map_err(|e| {
            eprintln!("mob: cannot create {}: {e}", path.display());
            EXIT_USAGE
        })?))),
        (None, true) => Some(Box::new(io::stdout().lock())),
        (None, false) => None,
    };
    let mut write_failed = false;
    let outcome = machine.run(config.max_steps, |_, e| {
        if let Some(w) = sink.as_mut() {
            write_failed |= writeln!(w, "{e}").is_err();
        }
    });
    if let Some(mut w) = sink {
        write_failed |= w.flush().is_err();
    }
    if write_failed {
        eprintln!("mob: failed to write the trace");
        return Err(EXIT_USAGE);
    }

    if args.dump_resolver {
        print!("{}", driver::resolver_summary(&machine));
    }
    if let Some(dir) = &args.out {
        driver::write_transcripts(dir, machine.transcripts()).map_err(|e| {
            eprintln!("mob: cannot write transcripts to {}: {e}", dir.display());
            EXIT_USAGE
        })?;
    }
    match &outcome {
        RunOutcome::Quiescent => {}
        RunOutcome::Deadlock(report) => {
            eprintln!("mob: deadlock after {} steps", machine.steps());
            eprint!("{report}");
        }
        RunOutcome::StepLimit => {
            eprintln!("mob: step budget of {} exhausted", config.max_steps);
        }
        RunOutcome::Error(e) => eprintln!("{e}"),
    }
    Ok(driver::exit_code(&outcome) as u8)
}
