//! Command-line front end for the metamorphic web-testing toolkit.
//!
//! The subcommands mirror the workflow end to end: `check` validates
//! relation files, `crawl` collects a data pool from a running target,
//! `test` drives relations against a pool, `report` renders a saved
//! campaign, `fixture serve` runs the built-in practice application, and
//! `catalog list` shows what ships with the tool.
//!
//! Exit codes: 0 on success, 1 when `test` reports relation failures,
//! 2 on usage or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use smrl_core::catalog;
use smrl_core::collector;
use smrl_core::dsl::{self, RelationAst, Severity};
use smrl_core::engine::report::CampaignReport;
use smrl_core::engine::{run_campaign, EngineOptions};
use smrl_core::exec::CompiledRelation;
use smrl_core::executor::HttpExecutor;
use smrl_core::fixture::{self, SiteConfig, Vuln};
use smrl_core::{DataPool, TargetConfig};

#[derive(Parser)]
#[command(
    name = "smrlmt",
    version,
    about = "Metamorphic security testing for web systems"
)]
struct Cli {
    /// Write a request transcript log beside the working directory.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate relation files.
    Check {
        /// Relation files (.smrl) to validate together.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Crawl a target and persist the collected data pool.
    Crawl(CrawlArgs),
    /// Run relations against a collected pool.
    Test(TestArgs),
    /// Render a campaign report written by `test --report`.
    Report {
        /// Path to the campaign JSON document.
        report: PathBuf,
    },
    /// Operate the built-in practice application.
    Fixture {
        #[command(subcommand)]
        command: FixtureCommand,
    },
    /// Inspect the shipped relation catalog.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
}

#[derive(Args)]
struct CrawlArgs {
    /// Target configuration file (TOML).
    #[arg(long)]
    target: PathBuf,
    /// Directory to write the pool into; must be empty or absent.
    #[arg(long)]
    out: PathBuf,
    /// Recorded interaction scripts to ingest after the crawl.
    #[arg(long = "script")]
    scripts: Vec<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Pool directory produced by `crawl`.
    #[arg(long)]
    pool: PathBuf,
    /// Catalog relation names or paths to relation files. The whole
    /// shipped catalog runs when omitted.
    #[arg(long = "relations", num_args = 1..)]
    relations: Vec<String>,
    /// Wall-clock budget shared by all relations.
    #[arg(long, default_value = "10m", value_parser = humantime::parse_duration)]
    budget: Duration,
    /// Seed for generated values such as random file paths.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the full JSON report to this path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Page-equality similarity threshold override (0.0 to 1.0).
    #[arg(long)]
    page_eq_threshold: Option<f64>,
}

#[derive(Subcommand)]
enum FixtureCommand {
    /// Serve the practice application until interrupted.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Vulnerability toggles to seed, comma separated (V1,V2,V3,V4).
    /// All checks are enforced when omitted.
    #[arg(long, value_delimiter = ',')]
    vuln: Vec<Vuln>,
    /// Plain-channel port; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Secure-channel port; 0 picks a free one.
    #[arg(long, default_value_t = 8443)]
    secure_port: u16,
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// List shipped relations and the planned extension points.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Check { files } => check(&files),
        Command::Crawl(args) => crawl(&args, cli.verbose),
        Command::Test(args) => test(&args, cli.verbose),
        Command::Report { report } => render_report(&report),
        Command::Fixture {
            command: FixtureCommand::Serve(args),
        } => serve_fixture(&args),
        Command::Catalog {
            command: CatalogCommand::List,
        } => catalog_list(),
    }
}

/// Parses every file, then checks them as one set so duplicate relation
/// names across files are caught. Diagnostics go to standard error;
/// a clean run prints nothing.
fn check(files: &[PathBuf]) -> Result<ExitCode> {
    let mut parsed: Vec<(String, Vec<RelationAst>)> = Vec::new();
    let mut parse_failed = false;
    for file in files {
        let text = fs::read_to_string(file)
            .with_context(|| format!("reading {}", file.display()))?;
        match dsl::parse(&text) {
            Ok(relations) => parsed.push((file.display().to_string(), relations)),
            Err(e) => {
                eprintln!("{}: {e}", file.display());
                parse_failed = true;
            }
        }
    }
    let units: Vec<(&str, &[RelationAst])> = parsed
        .iter()
        .map(|(file, relations)| (file.as_str(), relations.as_slice()))
        .collect();
    let diagnostics = dsl::check_set(&units);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    let broken =
        parse_failed || diagnostics.iter().any(|d| d.severity == Severity::Error);
    Ok(if broken {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn crawl(args: &CrawlArgs, verbose: bool) -> Result<ExitCode> {
    let target_text = fs::read_to_string(&args.target)
        .with_context(|| format!("reading {}", args.target.display()))?;
    let config = TargetConfig::parse(&target_text)?;
    let executor = build_executor(&config, verbose, "crawl")?;
    let mut pool = collector::collect_with(&config, &executor)?;
    for script in &args.scripts {
        let text = fs::read_to_string(script)
            .with_context(|| format!("reading {}", script.display()))?;
        let id = script_id(script);
        let ingested = collector::ingest(&config, &executor, &id, &text)
            .with_context(|| format!("ingesting {}", script.display()))?;
        let owner = ingested.owner.unwrap_or_default();
        pool.record(&owner, ingested.sequence, ingested.output);
    }
    pool.save(&args.out, &target_text)?;
    println!(
        "collected {} input sequences across {} users into {}",
        pool.sequences.len(),
        pool.users.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn script_id(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "script".to_string());
    format!("script-{stem}")
}

fn test(args: &TestArgs, verbose: bool) -> Result<ExitCode> {
    let pool = DataPool::load(&args.pool)
        .with_context(|| format!("loading pool {}", args.pool.display()))?;
    let target_text = DataPool::load_target_toml(&args.pool)?;
    let config = TargetConfig::parse(&target_text)?;
    let relations = resolve_relations(&args.relations)?;
    let executor = build_executor(&config, verbose, "test")?;
    let opts = EngineOptions {
        budget: args.budget,
        seed: args.seed,
        page_eq_threshold: args.page_eq_threshold,
    };
    let report = run_campaign(&relations, &pool, &config, &executor, &opts)?;
    print!("{}", report.render_summary());
    if let Some(path) = &args.report {
        fs::write(path, report.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if report.total_reported() > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

/// Resolves each `--relations` entry against the catalog first, then the
/// filesystem. File entries may define several relations; all of them run.
fn resolve_relations(specs: &[String]) -> Result<Vec<CompiledRelation>> {
    let shipped = catalog::load();
    if specs.is_empty() {
        return Ok(shipped
            .into_values()
            .map(CompiledRelation::compile)
            .collect());
    }
    let mut out = Vec::new();
    for spec in specs {
        if let Some(ast) = shipped.get(spec) {
            out.push(CompiledRelation::compile(ast.clone()));
            continue;
        }
        let path = Path::new(spec);
        if path.exists() {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {spec}"))?;
            let relations =
                dsl::parse(&text).map_err(|e| anyhow!("{spec}: {e}"))?;
            let diagnostics = dsl::check(spec, &relations);
            let errors: Vec<String> = diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .map(|d| d.to_string())
                .collect();
            if !errors.is_empty() {
                bail!("{}", errors.join("\n"));
            }
            if relations.is_empty() {
                bail!("{spec}: no relations defined");
            }
            out.extend(relations.into_iter().map(CompiledRelation::compile));
            continue;
        }
        bail!("unknown relation {spec:?}: neither a catalog name nor a file");
    }
    Ok(out)
}

fn render_report(path: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let report = CampaignReport::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    print!("{}", report.render_summary());
    Ok(ExitCode::SUCCESS)
}

fn serve_fixture(args: &ServeArgs) -> Result<ExitCode> {
    let site = if args.vuln.is_empty() {
        SiteConfig::patched()
    } else {
        SiteConfig::with_vulns(&args.vuln)
    };
    let handle = fixture::serve(site, args.port, args.secure_port)
        .context("binding fixture ports")?;
    println!(
        "plain channel:  http://127.0.0.1:{}/",
        handle.insecure_port
    );
    println!(
        "secure channel: https://127.0.0.1:{}/ (plain TCP, simulated TLS)",
        handle.secure_port
    );
    if args.vuln.is_empty() {
        println!("mode: patched, all checks enforced");
    } else {
        let seeded: Vec<String> = args.vuln.iter().map(|v| format!("{v:?}")).collect();
        println!("mode: seeded with {}", seeded.join(", "));
    }
    println!("press Ctrl-C to stop");
    loop {
        std::thread::sleep(Duration::from_secs(3600));
    }
}

fn catalog_list() -> Result<ExitCode> {
    println!("shipped:");
    for (file, source) in catalog::SOURCES {
        let relations =
            dsl::parse(source).map_err(|e| anyhow!("embedded {file}: {e}"))?;
        for rel in relations {
            println!("  {:<24} catalog/{file}", rel.qualified_name());
        }
    }
    println!("planned (named extension points, no sources yet):");
    for name in catalog::PLANNED {
        println!("  {name}");
    }
    Ok(ExitCode::SUCCESS)
}

/// Builds the HTTP executor, attaching a request transcript when verbose.
fn build_executor(
    config: &TargetConfig,
    verbose: bool,
    tag: &str,
) -> Result<HttpExecutor> {
    let executor = HttpExecutor::new(config.clone())?;
    if !verbose {
        return Ok(executor);
    }
    let path = PathBuf::from(format!("smrl-{tag}-transcript.log"));
    let executor = executor
        .with_transcript(&path)
        .with_context(|| format!("creating {}", path.display()))?;
    eprintln!("request transcript: {}", path.display());
    Ok(executor)
}
