use clap::{Parser, Subcommand, ValueEnum};
use ecolayout_cli::render::{log_dot, render_svg, RenderSpec};
use ecolayout_cli::{bench, load_ecology, load_session, oracle, parse_weights, solve_chain, CliError, EXIT_ORACLE};
use ecolayout_core::{AnalysisLog, EngineParams, QualityWeights};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Automatic view layout for multi-display environments.
#[derive(Parser, Debug)]
#[command(name = "ecolayout", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check session, ecology and log files.
    Validate {
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long)]
        ecology: Option<PathBuf>,
        /// A persisted log (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Lay out one step offline. Earlier steps are solved first and anchor it.
    Solve {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        ecology: PathBuf,
        #[arg(long, default_value_t = 1)]
        step: usize,
        /// Quality weights as `alpha,beta,gamma`.
        #[arg(long)]
        weights: Option<String>,
        /// Layout JSON destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a wall preview.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Preview pixels per millimetre.
        #[arg(long, default_value_t = 0.2)]
        scale: f64,
        /// Keep the wall time in the output (breaks byte-identical reruns).
        #[arg(long)]
        timing: bool,
    },
    /// Time the engine on the canonical benchmark and scaled configurations.
    Bench {
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Extra configurations as `VIEWSxDISPLAYS`, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<String>>,
    },
    /// Compare the engine against the exhaustive oracle on random instances.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Debug switch: expand every node regardless of bounds.
        #[arg(long)]
        no_pruning: bool,
        /// One line per instance.
        #[arg(long)]
        verbose: bool,
    },
    /// Run the HTTP session service.
    Serve {
        /// Session directory; falls back to $ECOLAYOUT_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Export the log tree of a persisted session.
    RenderLog {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = LogFormat::Json)]
        format: LogFormat,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogFormat {
    Json,
    Dot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::internal(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Validate { session, ecology, log } => validate(session, ecology, log),
        Command::Solve {
            session,
            ecology,
            step,
            weights,
            out,
            svg,
            scale,
            timing,
        } => {
            let model = load_session(&session)?;
            let eco = load_ecology(&ecology)?;
            let weights = match weights {
                Some(w) => parse_weights(&w)?,
                None => QualityWeights::default(),
            };
            if !(scale > 0.0) {
                return Err(CliError::invalid("--scale must be positive"));
            }
            let layout = solve_chain(&model, &eco, &weights, step, EngineParams::default())?;
            let mut json = layout.to_json(timing);
            json.push('\n');
            write_out(out.as_deref(), &json)?;
            if let Some(path) = svg {
                let spec = RenderSpec {
                    scale,
                    ..RenderSpec::default()
                };
                write_out(Some(&path), &render_svg(&layout, &model, &eco, &spec))?;
            }
            Ok(())
        }
        Command::Bench { repetitions, sizes } => {
            let sizes = match sizes {
                Some(list) => list.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>, _>>()?,
                None => bench::DEFAULT_SIZES.to_vec(),
            };
            let rows = bench::run(&sizes, repetitions, &EngineParams::default())?;
            print!("{}", bench::format_table(&rows));
            Ok(())
        }
        Command::Oracle {
            seed,
            count,
            no_pruning,
            verbose,
        } => {
            let params = EngineParams {
                disable_pruning: no_pruning,
                ..EngineParams::default()
            };
            println!("oracle: seed={seed} count={count}");
            let report = oracle::run(seed, count, &params, |c| {
                if verbose {
                    let q = |v: Option<f64>| v.map_or("none".to_owned(), |v| format!("{v:.6}"));
                    println!(
                        "seed={} engine={} oracle={} gap={:.6} nodes={} oracle_nodes={} bound_violations={}",
                        c.seed,
                        q(c.engine_q),
                        q(c.oracle_q),
                        c.gap,
                        c.engine_nodes,
                        c.oracle_nodes,
                        c.bound_violations
                    );
                }
            });
            println!("{}", report.summary());
            if report.passed() {
                Ok(())
            } else {
                Err(CliError {
                    code: EXIT_ORACLE,
                    message: format!("engine fell {:.2}% short of the oracle", 100.0 * report.max_gap()),
                })
            }
        }
        Command::Serve { data_dir, port, host } => {
            let dir = data_dir.or_else(ecolayout_server::data_dir_from_env);
            let service = ecolayout_server::open_service(dir.as_deref(), EngineParams::default())
                .map_err(|e| CliError::invalid(e.to_string()))?;
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError::internal(e.to_string()))?;
            runtime
                .block_on(ecolayout_server::serve((host, port).into(), ecolayout_server::AppState::new(service)))
                .map_err(|e| CliError::internal(e.to_string()))
        }
        Command::RenderLog { log, out, format } => {
            let text = std::fs::read_to_string(&log).map_err(|e| CliError::invalid(format!("{}: {e}", log.display())))?;
            let log = AnalysisLog::from_jsonl(&text).map_err(|e| CliError::invalid(format!("{}: {e}", log.display())))?;
            let graph = log.graph();
            let text = match format {
                LogFormat::Json => serde_json::to_string_pretty(&graph).expect("graph serializes") + "\n",
                LogFormat::Dot => log_dot(&graph),
            };
            write_out(out.as_deref(), &text)
        }
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::invalid(format!("size {s:?}: expected VIEWSxDISPLAYS"));
    let (v, d) = s.trim().split_once('x').ok_or_else(bad)?;
    let (v, d) = (v.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?);
    if v == 0 || d == 0 {
        return Err(bad());
    }
    Ok((v, d))
}

fn validate(session: Option<PathBuf>, ecology: Option<PathBuf>, log: Option<PathBuf>) -> Result<(), CliError> {
    if session.is_none() && ecology.is_none() && log.is_none() {
        return Err(CliError::invalid("nothing to validate: pass --session, --ecology or --log"));
    }
    let mut problems = Vec::new();
    if let Some(p) = &session {
        match load_session(p) {
            Ok(_) => println!("{}: valid session", p.display()),
            Err(e) => problems.push(e.message),
        }
    }
    if let Some(p) = &ecology {
        match load_ecology(p) {
            Ok(_) => println!("{}: valid ecology", p.display()),
            Err(e) => problems.push(e.message),
        }
    }
    if let Some(p) = &log {
        let checked = std::fs::read_to_string(p)
            .map_err(|e| e.to_string())
            .and_then(|t| AnalysisLog::from_jsonl(&t).map_err(|e| e.to_string()));
        match checked {
            Ok(l) => println!("{}: valid log, {} events, head {}", p.display(), l.len(), l.head()),
            Err(e) => problems.push(format!("{}: {e}", p.display())),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::invalid(problems.join("\n")))
    }
}
