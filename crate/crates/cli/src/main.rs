use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use viewmask::attention::{random_inputs, ToyEncoder, ToyEncoderConfig};
use viewmask::backslice::dump;
use viewmask::codeviews::{build_view, DfgOptions, ViewTag};
use viewmask::corpus::{mask_snippet, run_batch, stats, RecordStatus};
use viewmask::maskgen::{deserialize_mask, serialize_mask, LayerStrategy, MaskConfig};
use viewmask::metrics::{classification_metrics, mrr, QueryRanking};
use viewmask::syntax::{parse, Language};
use viewmask::Error;

#[derive(Parser, Debug)]
#[command(
    name = "viewmask",
    version,
    about = "Code-view attention masks for Java snippets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ViewArgs {
    /// Comma-separated views to compose: ast, cfg, dfg.
    #[arg(long, default_value = "ast,dfg")]
    views: String,
    /// Add Last-Def edges to the data-flow view.
    #[arg(long)]
    last_def: bool,
    /// Add Last-Use edges to the data-flow view.
    #[arg(long)]
    last_use: bool,
    #[arg(long, default_value = "java")]
    lang: String,
}

#[derive(Args, Debug, Clone)]
struct MaskArgs {
    #[command(flatten)]
    view: ViewArgs,
    /// Fall back to full attention above this masked fraction.
    #[arg(long, default_value_t = 0.9)]
    mask_limit: f64,
    #[arg(long, default_value = "all")]
    strategy: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the composed code-view graph as JSON.
    Graph {
        file: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print statement masks and the token-level attention mask.
    Mask {
        file: PathBuf,
        #[command(flatten)]
        args: MaskArgs,
        /// Also write `<stem>.mask` and `<stem>.json` into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline over a JSONL corpus.
    Batch {
        corpus: PathBuf,
        #[command(flatten)]
        args: MaskArgs,
        #[arg(long, default_value = "viewmask-out")]
        out: PathBuf,
    },
    /// Summarize a finished batch run.
    Stats { dir: PathBuf },
    /// Run the toy encoder with a stored mask and dump its attention trace.
    DemoAttn {
        mask: PathBuf,
        /// Number of layers.
        layers: usize,
        #[arg(long, default_value = "all")]
        strategy: String,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiply normalized weights by the mask instead of biasing logits.
        #[arg(long)]
        hadamard: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluation metrics.
    Metrics {
        #[command(subcommand)]
        which: MetricsCommand,
    },
}

#[derive(Subcommand, Debug)]
enum MetricsCommand {
    /// Mean reciprocal rank. Input: JSON array or JSONL of
    /// `{"query_id", "rank"}`, or one integer rank per line.
    Mrr { file: PathBuf },
    /// Macro F1. Input: `{"pred": [...], "truth": [...], "classes": K}`.
    Clf {
        file: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
    },
}

fn parse_views(spec: &str) -> Result<BTreeSet<ViewTag>, Error> {
    let views = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<BTreeSet<_>, _>>()?;
    if views.is_empty() {
        return Err(Error::Config("--views is empty".into()));
    }
    Ok(views)
}

fn mask_config(args: &MaskArgs) -> Result<(MaskConfig, Language), Error> {
    let language: Language = args.view.lang.parse()?;
    let config = MaskConfig {
        views: parse_views(&args.view.views)?,
        last_def: args.view.last_def,
        last_use: args.view.last_use,
        mask_limit: args.mask_limit,
        layer_strategy: args.strategy.parse()?,
        ..MaskConfig::default()
    };
    config.validate()?;
    Ok((config, language))
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Prints `text`, or writes it to `dir/name` when an output dir is given.
fn emit(text: &str, out: Option<&Path>, name: &str) -> Result<(), Error> {
    match out {
        Some(dir) => write(&dir.join(name), text.as_bytes()),
        None => say(&format!("{text}\n")),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(text: &str) -> Result<(), Error> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snippet".into())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Graph { file, view, out } => {
            let language: Language = view.lang.parse()?;
            let views = parse_views(&view.views)?;
            let snippet = parse(&read(&file)?, language)?;
            let opts = DfgOptions {
                last_def: view.last_def,
                last_use: view.last_use,
            };
            let graph = build_view(&snippet, &views, opts)?;
            emit(
                &graph.to_json(),
                out.as_deref(),
                &format!("{}.graph.json", stem(&file)),
            )
        }
        Command::Mask { file, args, out } => {
            let (config, language) = mask_config(&args)?;
            let result = mask_snippet(&read(&file)?, language, &config)?;
            let statements: Vec<_> = result
                .statement_masks
                .iter()
                .map(|m| dump(m, &result.snippet))
                .collect();
            let report = json!({
                "statements": statements,
                "tokens": result.mask.n(),
                "masked_fraction": result.mask.masked_fraction(),
                "raw_masked_fraction": result.raw.masked_fraction(),
                "fallback": result.mask.is_fallback(),
                "degraded": result.snippet.is_degraded(),
                "config": config,
                "config_digest": config.digest_hex(),
                "rows": result.mask.rows(),
            });
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(dir) = &out {
                let name = stem(&file);
                write(
                    &dir.join(format!("{name}.mask")),
                    &serialize_mask(&result.mask),
                )?;
                write(&dir.join(format!("{name}.json")), text.as_bytes())?;
                Ok(())
            } else {
                say(&format!("{text}\n"))
            }
        }
        Command::Batch { corpus, args, out } => {
            let (config, _) = mask_config(&args)?;
            let manifest = run_batch(&corpus, &config, &out)?;
            let count = |s| manifest.status_counts.get(&s).copied().unwrap_or(0);
            say(&format!(
                "{} records: {} ok, {} fallback-to-full, {} parse-degraded, {} error -> {}\n",
                manifest.record_count,
                count(RecordStatus::Ok),
                count(RecordStatus::FallbackToFull),
                count(RecordStatus::ParseDegraded),
                count(RecordStatus::Error),
                out.display()
            ))
        }
        Command::Stats { dir } => say(&stats(&dir)?.render()),
        Command::DemoAttn {
            mask,
            layers,
            strategy,
            dim,
            seed,
            hadamard,
            out,
        } => {
            let bytes = fs::read(&mask).map_err(|e| Error::io(&mask, e))?;
            let mask = deserialize_mask(&bytes)?;
            let strategy: LayerStrategy = strategy.parse()?;
            let cfg = ToyEncoderConfig {
                layers,
                model_dim: dim,
                layer_strategy: strategy,
                seed,
                post_softmax_hadamard: hadamard,
            };
            let encoder = ToyEncoder::new(&cfg)?;
            let inputs = random_inputs(mask.n(), dim, seed.wrapping_add(1));
            let (_, trace) = encoder.forward(&inputs, Some(&mask))?;
            emit(&trace.to_json(), out.as_deref(), "trace.json")
        }
        Command::Metrics { which } => match which {
            MetricsCommand::Mrr { file } => {
                let rankings = read_rankings(&read(&file)?)?;
                say(&format!(
                    "{}\n",
                    json!({ "queries": rankings.len(), "mrr": mrr(&rankings)? })
                ))
            }
            MetricsCommand::Clf { file, classes } => {
                let v: serde_json::Value = serde_json::from_str(&read(&file)?)?;
                let labels = |key: &str| -> Result<Vec<usize>, Error> {
                    serde_json::from_value(v.get(key).cloned().unwrap_or_default()).map_err(|_| {
                        Error::Config(format!("`{key}` must be a list of class indices"))
                    })
                };
                let (pred, truth) = (labels("pred")?, labels("truth")?);
                let k = classes
                    .or_else(|| {
                        v.get("classes")
                            .and_then(|c| c.as_u64())
                            .map(|c| c as usize)
                    })
                    .unwrap_or_else(|| pred.iter().chain(&truth).max().map_or(0, |m| m + 1));
                let report = classification_metrics(&pred, &truth, k)?;
                say(&format!("{}\n", serde_json::to_string_pretty(&report)?))
            }
        },
    }
}

fn read_rankings(text: &str) -> Result<Vec<QueryRanking>, Error> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return Ok(serde_json::from_str(trimmed)?);
    }
    let mut out = Vec::new();
    for (k, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let line = line.trim();
        if line.starts_with('{') {
            out.push(serde_json::from_str(line)?);
        } else {
            let rank = line
                .parse()
                .map_err(|_| Error::Config(format!("line {}: `{line}` is not a rank", k + 1)))?;
            out.push(QueryRanking {
                query_id: format!("q{}", k + 1),
                rank,
            });
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
