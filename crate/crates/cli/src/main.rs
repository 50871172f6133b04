//! `icp-admin`: operator commands over a data directory.
//!
//! Exit status is 0 on success, 1 when the engine or server reports an
//! error (its code is printed first on stderr) and 2 on a usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use icp_core::store::{export_state, import_state};
use icp_core::{Engine, EngineConfig, PrunePolicy, Scope, SeedDocument, Store, SubjectId, SystemClock, UsageWindow};
use icp_server::{ServeError, ServerConfig};

#[derive(Parser)]
#[command(name = "icp-admin", version, about = "Operate an icp knowledge-management data directory")]
struct Cli {
    /// Data directory holding snapshot.json, events.log and blobs/.
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import or export the classification as a seed document.
    Seed {
        #[command(subcommand)]
        action: SeedAction,
    },
    /// Run the HTTP service until Ctrl-C.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: std::net::SocketAddr,
        /// Seed applied when the classification is empty.
        #[arg(long, value_name = "FILE")]
        seed: Option<PathBuf>,
        #[arg(long, env = "ICP_ADMIN_TOKEN")]
        admin_token: Option<String>,
        /// Let members create level-1 categories.
        #[arg(long)]
        allow_member_roots: bool,
        /// Default minimum age in days for the prune endpoint.
        #[arg(long, value_name = "DAYS", default_value_t = 90)]
        min_age: u32,
        /// Session lifetime in hours.
        #[arg(long, value_name = "HOURS", default_value_t = 12)]
        session_hours: i64,
        /// Allowed CORS origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
    },
    /// Deprecate unused member-created subjects.
    Prune {
        #[arg(long, value_name = "DAYS")]
        min_age: u32,
        /// Only count usage in the last DAYS days.
        #[arg(long, value_name = "DAYS")]
        window: Option<u32>,
        /// List the candidates without deprecating them.
        #[arg(long)]
        dry_run: bool,
        /// Evaluation instant (RFC 3339); defaults to the current time.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
    },
    /// Statistics.
    Stats {
        #[command(subcommand)]
        what: StatsWhat,
    },
    /// Populate an empty data directory with a ready-made dataset.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
    },
    /// Write a full backup of the state.
    Export { file: PathBuf },
    /// Restore a backup into a data directory with no state.
    Import { file: PathBuf },
    /// Print the state hash.
    Digest,
    /// Hard-delete a deprecated, unreferenced subject.
    Purge { subject: SubjectId },
    /// Delete a resource and its thread.
    DeleteResource { resource: icp_core::ResourceId },
}

#[derive(Subcommand)]
enum SeedAction {
    Import { file: PathBuf },
    /// Write the active classification; `-` writes to stdout.
    Export { file: PathBuf },
}

#[derive(Subcommand)]
enum StatsWhat {
    Subjects {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Per-member membership counts.
    Members {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(serde::Serialize)]
struct MemberRow {
    id: icp_core::MemberId,
    display_name: String,
    working_context: usize,
    secondary_interests: usize,
    /// Declared subjects that are still CoPs.
    cops: usize,
    stale: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    Fig3,
}

enum Failure {
    Usage(String),
    Engine(icp_core::Error),
    Serve(ServeError),
}

impl From<icp_core::Error> for Failure {
    fn from(e: icp_core::Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<ServeError> for Failure {
    fn from(e: ServeError) -> Self {
        Failure::Serve(e)
    }
}

type Outcome = Result<(), Failure>;

fn data_dir(cli: &Cli) -> Result<&Path, Failure> {
    cli.data
        .as_deref()
        .ok_or_else(|| Failure::Usage("--data <DIR> is required for this command".into()))
}

/// Opens and locks the data directory for a mutating command.
fn open(dir: &Path) -> Result<Engine, Failure> {
    Ok(Engine::open(dir, EngineConfig::default(), Arc::new(SystemClock))?)
}

/// Reads the latest state without taking the lock, so it works next to a
/// running server.
fn read_only(dir: &Path) -> Result<Engine, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Usage(format!("{} is not a data directory", dir.display())));
    }
    let snapshot = Store::load(dir)?;
    Ok(Engine::from_state(snapshot.state, EngineConfig::default(), Arc::new(SystemClock)))
}

fn write_output(file: &Path, text: &str) -> Outcome {
    if file == Path::new("-") {
        println!("{text}");
        return Ok(());
    }
    fs::write(file, text).map_err(|e| Failure::Engine(icp_core::Error::Io(format!("{}: {e}", file.display()))))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Seed { action: SeedAction::Import { file } } => {
            let text = fs::read_to_string(file)
                .map_err(|e| icp_core::Error::Io(format!("{}: {e}", file.display())))?;
            let doc = SeedDocument::from_json(&text)?;
            let engine = open(data_dir(cli)?)?;
            let version = engine.load_seed(&doc)?;
            println!("imported {} subjects, taxonomy version {version}", engine.snapshot().taxonomy().len());
            Ok(())
        }
        Command::Seed { action: SeedAction::Export { file } } => {
            let engine = read_only(data_dir(cli)?)?;
            write_output(file, &engine.export_seed().to_json_pretty())
        }
        Command::Serve {
            bind,
            seed,
            admin_token,
            allow_member_roots,
            min_age,
            session_hours,
            cors_origin,
        } => {
            let config = ServerConfig {
                bind: *bind,
                data_dir: cli.data.clone(),
                seed_path: seed.clone(),
                prune_policy: PrunePolicy::with_min_age_days(*min_age),
                allow_member_roots: *allow_member_roots,
                admin_token: admin_token.clone(),
                session_ttl: chrono::Duration::hours(*session_hours),
                cors_origin: cors_origin.clone(),
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Serve(ServeError::Io(e)))?;
            runtime.block_on(icp_server::serve(config))?;
            Ok(())
        }
        Command::Prune {
            min_age,
            window,
            dry_run,
            now,
        } => {
            let policy = PrunePolicy {
                min_age_days: *min_age,
                usage_window: window.map_or(UsageWindow::Lifetime, UsageWindow::LastDays),
            };
            let dir = data_dir(cli)?;
            let engine = if *dry_run { read_only(dir)? } else { open(dir)? };
            let now = now.unwrap_or_else(|| engine.now());
            let subjects = if *dry_run {
                engine.prune_candidates(now, &policy)?
            } else {
                engine.prune_unused(now, &policy)?
            };
            let verb = if *dry_run { "would deprecate" } else { "deprecated" };
            println!("{verb} {} subjects", subjects.len());
            let state = engine.snapshot();
            for s in subjects {
                let path: Vec<String> = state.taxonomy().path(s)?.iter().map(|p| p.label.clone()).collect();
                println!("{s}\t{}", path.join(" / "));
            }
            Ok(())
        }
        Command::Stats {
            what: StatsWhat::Subjects { format },
        } => {
            let rows = read_only(data_dir(cli)?)?.subject_stats()?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&rows).expect("stats serialize")),
                Format::Table => {
                    println!("id\tlevel\tactive\tcop\tmembers\tassociations\tusage\tpath");
                    for r in rows {
                        println!(
                            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                            r.id,
                            r.level,
                            r.active,
                            r.cop,
                            r.members.len(),
                            r.associations,
                            r.usage.total(),
                            r.path.join(" / ")
                        );
                    }
                }
            }
            Ok(())
        }
        Command::Stats {
            what: StatsWhat::Members { format },
        } => {
            let engine = read_only(data_dir(cli)?)?;
            let mut rows = Vec::new();
            for p in engine.snapshot().profiles().iter() {
                rows.push(MemberRow {
                    id: p.id,
                    display_name: p.display_name.clone(),
                    working_context: p.working_context.len(),
                    secondary_interests: p.secondary_interests.len(),
                    cops: engine.memberships(p.id, Scope::All)?.len(),
                    stale: engine.stale_memberships(p.id)?.len(),
                });
            }
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize")),
                Format::Table => {
                    println!("id\tworking\tsecondary\tcops\tstale\tname");
                    for r in rows {
                        println!(
                            "{}\t{}\t{}\t{}\t{}\t{}",
                            r.id, r.working_context, r.secondary_interests, r.cops, r.stale, r.display_name
                        );
                    }
                }
            }
            Ok(())
        }
        Command::Fixture { name: FixtureName::Fig3 } => {
            let engine = open(data_dir(cli)?)?;
            let fig3 = icp_core::fixture::fig3(&engine, None)?;
            engine.save()?;
            println!("{}", serde_json::to_string_pretty(&fig3).expect("fixture ids serialize"));
            Ok(())
        }
        Command::Export { file } => {
            let engine = read_only(data_dir(cli)?)?;
            export_state(&engine.snapshot(), file)?;
            Ok(())
        }
        Command::Import { file } => {
            let state = import_state(file)?;
            let dir = data_dir(cli)?;
            let (mut store, existing) = Store::open(dir)?;
            if existing.last_seq > 0 || !existing.state.taxonomy().is_empty() || !existing.state.profiles().is_empty()
            {
                return Err(Failure::Usage(format!("{} already holds state", dir.display())));
            }
            store.save(&state)?;
            println!("imported state {}", state.digest());
            Ok(())
        }
        Command::Digest => {
            println!("{}", read_only(data_dir(cli)?)?.digest()?);
            Ok(())
        }
        Command::Purge { subject } => {
            open(data_dir(cli)?)?.purge_subject(*subject)?;
            Ok(())
        }
        Command::DeleteResource { resource } => {
            open(data_dir(cli)?)?.delete_resource(*resource)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Engine(e)) => {
            eprintln!("{}: {e}", e.code());
            ExitCode::from(1)
        }
        Err(Failure::Serve(e)) => {
            eprintln!("{}: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
