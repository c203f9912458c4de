//! Command-line front end for the diurnal analysis pipeline.
//!
//! Exit codes: 0 ok, 2 input error, 3 degenerate data (with `--strict`),
//! 4 internal invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use diurnal::config::RunConfig;
use diurnal::pipeline::{self, PipelineError, ReportBundle};
use diurnal::report::{emit_report, Format};
use diurnal::synth;

#[derive(Parser)]
#[command(
    name = "diurnal",
    version,
    about = "Diurnal activity and content-reliability analytics for timestamped post data"
)]
struct Cli {
    /// TOML run configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Posts file (overrides the config).
    #[arg(long, global = true)]
    posts: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores (overrides the config).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Treat degenerate-data warnings as errors (exit 3).
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, categorize and localize posts; print ingest counters.
    Ingest {
        /// Write the cleaned table as canonical TSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic post corpus with known structure.
    Synth {
        /// Population spec (TOML); omitted means the built-in demo mix.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output posts file.
        #[arg(long, default_value = "posts.tsv")]
        out: PathBuf,
        /// Also write the user-to-population ground truth.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Demo mix: users per population.
        #[arg(long, default_value_t = 300)]
        users: usize,
        /// Demo mix: posts per frequent user (min).
        #[arg(long, default_value_t = 300)]
        min_posts: usize,
        /// Demo mix: posts per frequent user (max).
        #[arg(long, default_value_t = 600)]
        max_posts: usize,
    },
    /// Cluster frequent users; write assignments and index scores.
    Cluster,
    /// Run the full analysis; write bundle.json only.
    Analyze,
    /// Emit report files from an existing bundle.json.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        /// Comma-separated subset of csv,json,svg.
        #[arg(long, value_delimiter = ',', default_values_t = ["csv".to_string(), "json".to_string(), "svg".to_string()])]
        formats: Vec<String>,
    },
    /// Full pipeline: analyze and emit report files.
    Run {
        #[arg(long, value_delimiter = ',', default_values_t = ["csv".to_string(), "json".to_string(), "svg".to_string()])]
        formats: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Maps error causes onto the documented exit codes.
fn classify(err: &anyhow::Error) -> u8 {
    if let Some(p) = err.downcast_ref::<PipelineError>() {
        return match p {
            PipelineError::Config(_) | PipelineError::Ingest(_) | PipelineError::Report(_) => 2,
            PipelineError::Degenerate(_) => 3,
            _ => 4,
        };
    }
    if err.downcast_ref::<diurnal::config::ConfigError>().is_some()
        || err.downcast_ref::<diurnal::ingest::IngestError>().is_some()
        || err.downcast_ref::<std::io::Error>().is_some()
        || err.downcast_ref::<serde_json::Error>().is_some()
        || err.downcast_ref::<diurnal::report::ReportError>().is_some()
        || err.downcast_ref::<synth::SynthError>().is_some()
    {
        return 2;
    }
    4
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(posts) = &cli.posts {
        config.posts = posts.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if let Some(out_dir) = &cli.out_dir {
        config.out_dir = out_dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn parse_formats(tokens: &[String]) -> anyhow::Result<Vec<Format>> {
    tokens
        .iter()
        .map(|t| match t.as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => anyhow::bail!("unknown format {other:?} (expected csv, json or svg)"),
        })
        .collect()
}

fn strict_gate(cli: &Cli, warnings: &[String]) -> Option<ExitCode> {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    (cli.strict && !warnings.is_empty()).then(|| ExitCode::from(3))
}

fn ingest_table(config: &RunConfig) -> anyhow::Result<diurnal::PostTable> {
    let span = diurnal::ingest::AnalysisSpan::new(config.span_start, config.span_end);
    let tz = diurnal::ingest::TzRule::parse(&config.timezone)?;
    let file = std::fs::File::open(&config.posts)
        .with_context(|| format!("opening {}", config.posts.display()))?;
    let parsed = diurnal::ingest::parse_posts(
        std::io::BufReader::new(file),
        &config.schema,
        span,
        config.reject_threshold,
    )?;
    let category_map = match &config.category_map {
        Some(path) => diurnal::ingest::load_category_map(path)?,
        None => Default::default(),
    };
    let bot_list = match &config.bot_list {
        Some(path) => diurnal::ingest::load_bot_list(path)?,
        None => Default::default(),
    };
    let mapped = diurnal::ingest::map_and_filter(&parsed, &category_map, &bot_list);
    Ok(diurnal::ingest::localize(&mapped, tz))
}

fn dispatch(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Ingest { out } => {
            let config = load_config(cli)?;
            let table = ingest_table(&config)?;
            println!("{}", serde_json::to_string_pretty(&table.counters)?);
            println!("rows: {}  users: {}", table.len(), table.user_count());
            if !table.rejects.is_empty() {
                eprintln!("first rejects:");
                for r in table.rejects.iter().take(10) {
                    eprintln!("  line {}: {}", r.line, r.reason);
                }
            }
            if let Some(path) = out {
                synth::write_posts_tsv(path, table.records())?;
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { spec, out, truth, users, min_posts, max_posts } => {
            let config = load_config(cli)?;
            let spec = match spec {
                Some(path) => synth::SynthSpec::load(path)
                    .map_err(|e| anyhow::anyhow!("cannot load synth spec: {e}"))?,
                None => synth::demo_spec(*users, (*min_posts, *max_posts)),
            };
            let (records, truth_map) = synth::generate(&spec, config.seed)?;
            synth::write_posts_tsv(out, &records)?;
            println!(
                "wrote {} posts for {} users to {}",
                records.len(),
                truth_map.len(),
                out.display()
            );
            if let Some(path) = truth {
                synth::write_truth_csv(path, &truth_map)?;
                println!("wrote ground truth to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Cluster => {
            let config = load_config(cli)?;
            let table = ingest_table(&config)?;
            let outcome = pipeline::chronotype_clusters(&table, &config)?;

            std::fs::create_dir_all(&config.out_dir)?;
            let hash = config.hash();
            let mut assignments = format!("# config {hash}\nuser,cluster\n");
            for (user, cluster) in &outcome.assignments {
                assignments.push_str(&format!("{user},{cluster}\n"));
            }
            std::fs::write(config.out_dir.join("assignments.csv"), assignments)?;

            if let Some(sel) = &outcome.k_selection {
                let mut scores = format!(
                    "# config {hash}\nk,wcss,calinski_harabasz,davies_bouldin,dunn,silhouette\n"
                );
                for s in &sel.scores {
                    scores.push_str(&format!(
                        "{},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                        s.k, s.wcss, s.calinski_harabasz, s.davies_bouldin, s.dunn, s.silhouette
                    ));
                }
                std::fs::write(config.out_dir.join("index_scores.csv"), scores)?;
                println!("chose k = {} (votes: {:?})", sel.k, sel.votes);
            }
            println!(
                "frequent: {}  infrequent: {}  clusters: {}",
                outcome.frequent,
                outcome.infrequent,
                outcome.member_sets.len()
            );
            if let Some(code) = strict_gate(cli, &outcome.warnings) {
                return Ok(code);
            }
            println!("wrote {}", config.out_dir.join("assignments.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze => {
            let config = load_config(cli)?;
            let bundle = pipeline::run_pipeline(&config)?;
            std::fs::create_dir_all(&config.out_dir)?;
            let path = config.out_dir.join("bundle.json");
            std::fs::write(&path, serde_json::to_string_pretty(&bundle)?)?;
            print_summary(&bundle);
            if let Some(code) = strict_gate(cli, &bundle.warnings) {
                return Ok(code);
            }
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { bundle, formats } => {
            let formats = parse_formats(formats)?;
            let text = std::fs::read_to_string(bundle)
                .with_context(|| format!("reading {}", bundle.display()))?;
            let bundle: ReportBundle = serde_json::from_str(&text)?;
            let out_dir = cli.out_dir.clone().unwrap_or_else(|| bundle.config.out_dir.clone());
            let files = emit_report(&bundle, &out_dir, &formats)?;
            println!("wrote {} files to {}", files.len(), out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { formats } => {
            let formats = parse_formats(formats)?;
            let config = load_config(cli)?;
            let bundle = pipeline::run_pipeline(&config)?;
            let files = emit_report(&bundle, &config.out_dir, &formats)?;
            print_summary(&bundle);
            if let Some(code) = strict_gate(cli, &bundle.warnings) {
                return Ok(code);
            }
            println!("wrote {} files to {}", files.len(), config.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_summary(bundle: &ReportBundle) {
    println!(
        "users: {} ({} frequent, {} infrequent)",
        bundle.users, bundle.frequent_users, bundle.infrequent_users
    );
    if let Some(sel) = &bundle.k_selection {
        println!("clusters: k = {}", sel.k);
    }
    for c in &bundle.clusters {
        println!(
            "  {:<14} members {:>6}  posts {:>8}  m={}  wake {:05.2}-{:05.2}  ratio m={}",
            c.name, c.members, c.posts, c.activity_m, c.wake.onset, c.wake.end, c.ratio_m
        );
    }
}
