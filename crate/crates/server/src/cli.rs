use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use jcalens_core::analyzer::{analyze_file, report_entries};
use jcalens_core::extract::SourceFile;
use jcalens_core::pipeline::{
    ingest_corpus, pending_ids, run_analysis, BlameProvider, GitBlame, NoBlame, PipelineError, RunOptions, SidecarBlame,
    DEFAULT_BATCH_LIMIT,
};
use jcalens_core::rules::{default_rule_pack, parse_rule_pack, RulePack};
use jcalens_core::store::{StatsSummary, Store, StoreError};

use crate::api::{router, AppState, ServeOptions};

#[derive(Parser, Debug)]
#[command(name = "jcalens", version, about = "Find JCA misuse in Java corpora and search the results")]
pub struct Cli {
    /// Store file
    #[arg(long, global = true, default_value = "jcalens-store.jsonl")]
    pub store: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Register projects found under a corpus directory
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BATCH_LIMIT)]
        limit: usize,
    },
    /// Analyze pending projects and store their usages
    Analyze {
        /// Project id; repeatable
        #[arg(long = "project", required_unless_present = "pending", conflicts_with = "pending")]
        projects: Vec<String>,
        /// Every PENDING project
        #[arg(long)]
        pending: bool,
        /// Seconds per project
        #[arg(long, default_value_t = 900)]
        budget: u64,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Issue reports are written to <out>/issues/
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BlameSource::Sidecar)]
        blame: BlameSource,
    },
    /// Print the corpus summary
    Stats {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Allowed CORS origin; repeatable, `*` for any
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        /// Static files served under /
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Analyze Java files directly, without the store
    Scan {
        files: Vec<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlameSource {
    Sidecar,
    Git,
    None,
}

/// 1 for things the user can fix, 2 for everything else.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) | StoreError::Corrupt { .. } | StoreError::UnsupportedVersion(_) | StoreError::Encode(_) => {
                CliError::Internal(e.to_string())
            }
            _ => CliError::User(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Store(s) => s.into(),
            PipelineError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::User(e.to_string()),
        }
    }
}

fn load_rules(path: Option<&Path>) -> Result<RulePack, CliError> {
    let Some(path) = path else { return Ok(default_rule_pack()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    parse_rule_pack(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn open_store(path: &Path) -> Result<Store, CliError> {
    Ok(Store::open(path)?)
}

pub fn stats_table(s: &StatsSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}", "", "secure", "buggy", "total");
    let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}", "projects", s.projects_secure, s.projects_buggy, s.projects_total);
    let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}", "usages", s.usages_secure, s.usages_buggy, s.usages_total);
    let _ = writeln!(
        out,
        "distinct APIs per project: {:.2} (sd {:.2})",
        s.avg_distinct_apis_per_project, s.sd_distinct_apis_per_project
    );
    let _ = writeln!(out, "commits per project: {:.2} (sd {:.2})", s.avg_commits_per_project, s.sd_commits_per_project);
    out
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { corpus, limit } => {
            if !corpus.is_dir() {
                return Err(CliError::User(format!("{}: not a directory", corpus.display())));
            }
            let mut store = open_store(&cli.store)?;
            let out = ingest_corpus(&corpus, limit, &mut store)?;
            for e in &out.errors {
                eprintln!("warning: {e}");
            }
            for p in &out.created {
                println!("{}\t{}", p.id, p.status.as_str());
            }
            println!(
                "ingested {} pending, {} duplicate, {} manifest error(s)",
                out.pending(),
                out.created.len() - out.pending(),
                out.errors.len()
            );
        }
        Command::Analyze { projects, pending, budget, rules, out, blame } => {
            let rules = load_rules(rules.as_deref())?;
            let mut store = open_store(&cli.store)?;
            let ids = if pending { pending_ids(&store) } else { projects };
            let root = PathBuf::from(store.corpus_root().unwrap_or("."));
            let blame: Box<dyn BlameProvider> = match blame {
                BlameSource::Sidecar => Box::new(SidecarBlame::new(&root)),
                BlameSource::Git => Box::new(GitBlame::new(&root)),
                BlameSource::None => Box::new(NoBlame),
            };
            let opts = RunOptions {
                rules: &rules,
                budget: Duration::from_secs(budget),
                blame: blame.as_ref(),
                out_dir: out.as_deref(),
            };
            for o in run_analysis(&mut store, &ids, &opts)? {
                let issue = o.issue.map(|p| format!("\tissue={}", p.display())).unwrap_or_default();
                println!("{}\t{}\tusages={}\tbuggy={}{issue}", o.project_id, o.status.as_str(), o.usages, o.buggy);
            }
        }
        Command::Stats { format } => {
            let store = open_store(&cli.store)?;
            let s = store.stats_summary();
            match format {
                Format::Table => print!("{}", stats_table(&s)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&s).map_err(|e| CliError::Internal(e.to_string()))?),
            }
        }
        Command::Serve { addr, rules, cors_origins, ui_dir } => {
            let rules = load_rules(rules.as_deref())?;
            let store = open_store(&cli.store)?;
            let app = router(AppState::new(store, rules), &ServeOptions { cors_origins, ui_dir });
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| CliError::User(format!("cannot bind {addr}: {e}")))?;
                log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or(addr));
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .map_err(|e| CliError::Internal(e.to_string()))
            })?;
        }
        Command::Scan { files, rules, format } => {
            if files.is_empty() {
                return Err(CliError::User("no files given".into()));
            }
            let rules = load_rules(rules.as_deref())?;
            let mut all = Vec::new();
            for path in &files {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
                let file = SourceFile::new(path.display().to_string(), text);
                match analyze_file(&file, &rules) {
                    Ok(verdicts) => all.extend(verdicts.into_iter().flat_map(|v| v.findings)),
                    Err(e) => eprintln!("warning: {}: {e}", path.display()),
                }
            }
            let entries = report_entries(&all);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&entries).map_err(|e| CliError::Internal(e.to_string()))?),
                Format::Table => {
                    for e in &entries {
                        println!("{}:{}\t{}\t{}\t{}", e.file, e.line, e.category, e.api, e.message);
                    }
                    println!("{} finding(s)", entries.len());
                }
            }
        }
    }
    Ok(())
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::User(m) | CliError::Internal(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_valid() {
        Cli::command().debug_assert();
    }

    #[test]
    fn analyze_needs_a_target() {
        assert!(Cli::try_parse_from(["jcalens", "analyze"]).is_err());
        assert!(Cli::try_parse_from(["jcalens", "analyze", "--pending", "--project", "x"]).is_err());
        let c = Cli::try_parse_from(["jcalens", "--store", "s", "analyze", "--project", "a", "--project", "b"]).unwrap();
        assert!(matches!(c.command, Command::Analyze { ref projects, .. } if projects.len() == 2));
    }

    #[test]
    fn table_layout() {
        let s = StatsSummary { projects_secure: 642, projects_buggy: 1682, projects_total: 2324, ..Default::default() };
        let t = stats_table(&s);
        assert!(t.lines().nth(1).unwrap().contains("642"));
        assert!(t.lines().nth(1).unwrap().contains("2324"));
    }
}
