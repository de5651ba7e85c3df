//! Command-line entry point: `validate`, `compile`, `simulate` and `serve`.
//!
//! Exit codes are stable: 0 ok, 1 invalid input, 2 I/O, 3 state cap, 4 bind.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::automaton::{compile_with, CompileError, CompileOptions, Pdfa};
use crate::clock::SystemClock;
use crate::maintenance_model::{import_model_with, ArMaintenanceModel, ImportError};
use crate::session_service::http::serve;
use crate::session_service::{simulate_user, LoadedModel, Service, ServiceConfig};
use crate::task_model::{parse_model, DiagnosticKind, ValidationScope};
use crate::user_model::Level;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_STATE_CAP: u8 = 3;
pub const EXIT_BIND: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "emaint", version, about = "Adaptive guided-maintenance engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Check a `.amm` model (or a bare `.tm` task tree); prints one line per diagnostic.
    Validate { path: PathBuf },
    /// Compile the task tree and print state, transition and accepting counts.
    Compile {
        path: PathBuf,
        /// Write the automaton as Graphviz DOT.
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
        #[arg(long, value_name = "N", default_value_t = CompileOptions::default().state_cap)]
        max_states: usize,
    },
    /// Drive a simulated user through a `.amm` model and print the posterior trace.
    Simulate {
        path: PathBuf,
        #[arg(long, value_enum)]
        level: LevelArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long, env = "EMAINT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "EMAINT_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// Where finished-session reports are POSTed; without it they go to the outbox.
        #[arg(long, env = "EMAINT_REPORT_URL")]
        report_url: Option<String>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    None,
    Basic,
    Advanced,
    Expert,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::None => Level::None,
            LevelArg::Basic => Level::Basic,
            LevelArg::Advanced => Level::Advanced,
            LevelArg::Expert => Level::Expert,
        }
    }
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    ExitCode::from(main_from(std::env::args_os()))
}

pub fn main_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match cli.command {
        CliCommand::Serve {
            port,
            data_dir,
            report_url,
            host,
        } => run_serve(&host, port, data_dir, report_url),
        cmd => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let code = run(&cmd, &mut out, &mut std::io::stderr());
            let _ = out.flush();
            code
        }
    }
}

/// Runs one of the offline commands, writing results to `out` and errors
/// to `err`. `serve` is not handled here.
pub fn run(cmd: &CliCommand, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cmd {
        CliCommand::Validate { path } => run_validate(path, out),
        CliCommand::Compile {
            path,
            dot,
            max_states,
        } => run_compile(path, dot.as_deref(), *max_states, out),
        CliCommand::Simulate {
            path,
            level,
            seed,
            steps,
        } => run_simulate(path, (*level).into(), *seed, *steps, out),
        CliCommand::Serve { .. } => Err(Failure::new(
            EXIT_INVALID,
            "serve is not an offline command",
        )),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            if !f.message.is_empty() {
                let _ = writeln!(err, "emaint: {}", f.message);
            }
            f.code
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn is_task_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "tm")
}

/// Diagnostic lines plus the exit code they map to.
struct Rejected {
    code: u8,
    lines: Vec<String>,
}

/// A bare task tree has no contexts or bindings to resolve against, so
/// only structural diagnostics apply.
fn task_file(text: &str, opts: CompileOptions) -> Result<Pdfa, Rejected> {
    let invalid = |lines| Rejected {
        code: EXIT_INVALID,
        lines,
    };
    let model = parse_model(text).map_err(|e| invalid(vec![format!("ERROR {e}")]))?;
    let diags: Vec<String> = model
        .validate(&ValidationScope::default())
        .into_iter()
        .filter(|d| {
            !matches!(
                d.kind,
                DiagnosticKind::UnresolvedContextRef(_) | DiagnosticKind::UnresolvedContentKey(..)
            )
        })
        .map(|d| format!("ERROR {}: {d}", d.node))
        .collect();
    if !diags.is_empty() {
        return Err(invalid(diags));
    }
    compile_with(&model, opts).map_err(|e| Rejected {
        code: match e {
            CompileError::StateExplosion { .. } => EXIT_STATE_CAP,
            CompileError::DeadEnd { .. } => EXIT_INVALID,
        },
        lines: vec![format!("ERROR tasks: {e}")],
    })
}

fn model_file(text: &str, opts: CompileOptions) -> Result<ArMaintenanceModel, Rejected> {
    import_model_with(text, opts).map_err(|e: ImportError| Rejected {
        code: if e.state_cap_exceeded {
            EXIT_STATE_CAP
        } else {
            EXIT_INVALID
        },
        lines: e.diagnostics.iter().map(|d| d.to_string()).collect(),
    })
}

/// Diagnostics are the command's output, so they go to `out`.
fn reject(r: Rejected, out: &mut dyn Write) -> Failure {
    for l in &r.lines {
        if let Err(f) = write_out(out, &format!("{l}\n")) {
            return f;
        }
    }
    Failure::new(r.code, "")
}

fn load(path: &Path, opts: CompileOptions, out: &mut dyn Write) -> Result<Pdfa, Failure> {
    let text = read(path)?;
    let loaded = if is_task_file(path) {
        task_file(&text, opts)
    } else {
        model_file(&text, opts).and_then(|m| {
            compile_with(&m.task_model, opts).map_err(|e| Rejected {
                code: EXIT_STATE_CAP,
                lines: vec![format!("ERROR tasks: {e}")],
            })
        })
    };
    loaded.map_err(|r| reject(r, out))
}

fn run_validate(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    load(path, CompileOptions::default(), out).map(|_| ())
}

fn run_compile(
    path: &Path,
    dot: Option<&Path>,
    max_states: usize,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let pdfa = load(
        path,
        CompileOptions {
            state_cap: max_states,
        },
        out,
    )?;
    write_out(
        out,
        &format!(
            "states={} transitions={} accepting={}\n",
            pdfa.state_count(),
            pdfa.transition_count(),
            pdfa.accepting_count()
        ),
    )?;
    if let Some(dot) = dot {
        fs::write(dot, pdfa.to_dot())
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", dot.display())))?;
    }
    Ok(())
}

fn run_simulate(
    path: &Path,
    level: Level,
    seed: u64,
    steps: usize,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let text = read(path)?;
    let model = model_file(&text, CompileOptions::default()).map_err(|r| reject(r, out))?;
    let pdfa = compile_with(&model.task_model, CompileOptions::default())
        .map_err(|e| Failure::new(EXIT_STATE_CAP, e.to_string()))?;
    let ctx = LoadedModel::new(&model.name.clone(), model, pdfa);
    write_out(out, &simulate_user(&ctx, level, seed, steps).render())
}

fn run_serve(host: &str, port: u16, data_dir: PathBuf, report_url: Option<String>) -> u8 {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("emaint: runtime: {e}");
            return EXIT_IO;
        }
    };
    runtime.block_on(async move {
        let service = match Service::open(
            ServiceConfig {
                data_dir: data_dir.clone(),
                report_url,
            },
            Arc::new(SystemClock),
        ) {
            Ok(s) => Arc::new(s),
            Err(e) => {
                eprintln!("emaint: {}: {e}", data_dir.display());
                return EXIT_IO;
            }
        };
        let addr = format!("{host}:{port}");
        let listener = match tokio::net::TcpListener::bind(&addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("emaint: cannot bind {addr}: {e}");
                return EXIT_BIND;
            }
        };
        let local: SocketAddr = match listener.local_addr() {
            Ok(a) => a,
            Err(e) => {
                eprintln!("emaint: {e}");
                return EXIT_BIND;
            }
        };
        // Tests and scripts read this line to find an ephemeral port.
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        match serve(service, listener, shutdown).await {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("emaint: {e}");
                EXIT_IO
            }
        }
    })
}
