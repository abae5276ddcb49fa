//! `texvox` command-line tool.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use texvox_core::clients::{
    EchoLastExample, FixedResponse, NearestNeighborLatex, OpenAiCompatible, RemoteEndpoint, RetryPolicy, Secret,
};
use texvox_core::dataset::{load_dataset, split_dataset, write_dataset, Dataset, SplitRatios};
use texvox_core::harness::{
    default_grid, read_annotations, results_csv, results_table, score_annotations, sort_by_el, write_records,
    GridFile, IndexSplit,
};
use texvox_core::metrics::{corpus_bleu_chrf, el_bucket, el_distance, threshold_rates, Surface, Thresholds};
use texvox_core::prompting::{assemble, AssemblyOptions, Demonstration, PromptId};
use texvox_core::retrieval::{self, build_index, Index, Measure};
use texvox_core::{ChatModel, EmbeddingProvider, ExperimentConfig, Harness, HarnessOptions, HumanLabel, Normalizer};
use texvox_service::config::{EmbeddingConfig, ServiceConfig, EMBEDDING_KEY_VAR, LLM_KEY_VAR};

#[derive(Debug, Parser)]
#[command(name = "texvox", version, about = "Spoken Greek equation descriptions to LaTeX")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign train/validation/test splits to a JSONL corpus.
    Ingest {
        input: PathBuf,
        /// Train, validation and test fractions.
        #[arg(long, default_value = "0.7,0.15,0.15")]
        split: SplitRatios,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed the descriptions of one split and save the index.
    Index {
        #[arg(long)]
        dataset: PathBuf,
        /// `train` or `train+validation`.
        #[arg(long, default_value = "train")]
        split: IndexSplit,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest corpus examples for a description.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(short, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "cosine")]
        measure: Measure,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Also print the prompt these examples produce (needs --dataset).
        #[arg(long)]
        dump_prompt: bool,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "p2")]
        prompt: PromptId,
    },
    /// Print the exact prompt sent to the model for a description.
    DumpPrompt {
        #[arg(long)]
        dataset: PathBuf,
        /// Not needed with -k 0.
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        text: String,
        #[arg(short, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "cosine")]
        measure: Measure,
        #[arg(long, default_value = "p2")]
        prompt: PromptId,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Score generated LaTeX against references.
    Evaluate {
        /// JSONL with `pair_id` and `latex` per line (grid records work as is).
        #[arg(long)]
        hyp: PathBuf,
        /// Corpus JSONL holding the reference LaTeX.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Run an experiment grid over the test split.
    EvaluateGrid {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// Grid TOML; the built-in 46-row grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// nearest-neighbor, echo, fixed:<latex> or remote.
        #[arg(long)]
        llm: String,
        /// Base URL of a chat-completion server for `--llm remote`.
        #[arg(long)]
        llm_base_url: Option<String>,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long)]
        out: PathBuf,
        /// Where per-item JSONL records go; defaults to `<out>.records/`.
        #[arg(long)]
        records_dir: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        /// Order rows by EL<low, best first.
        #[arg(long)]
        sort: bool,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Offline,
    Remote,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "offline")]
    pub provider: ProviderKind,
    /// Base URL of an embeddings server (remote provider).
    #[arg(long)]
    pub embed_base_url: Option<String>,
    #[arg(long, default_value = "text-embedding-3-small")]
    pub embed_model: String,
    #[arg(long, default_value_t = 1536)]
    pub embed_dim: usize,
}

impl ProviderArgs {
    fn build(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        let config = match self.provider {
            ProviderKind::Offline => EmbeddingConfig::Offline,
            ProviderKind::Remote => {
                let url = self.embed_base_url.clone().context("--provider remote needs --embed-base-url")?;
                EmbeddingConfig::Remote {
                    endpoint: RemoteEndpoint::new(url).with_key(env_key(EMBEDDING_KEY_VAR)),
                    model: self.embed_model.clone(),
                    dim: self.embed_dim,
                }
            }
        };
        Ok(config.build(RetryPolicy::default()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    /// BLEU and chrF on the LaTeX as written instead of the normalized form.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value_t = texvox_core::metrics::DEFAULT_LOW)]
    pub low: f64,
    #[arg(long, default_value_t = texvox_core::metrics::DEFAULT_HIGH)]
    pub high: f64,
}

impl ScoringArgs {
    fn surface(&self) -> Surface {
        if self.raw {
            Surface::Raw
        } else {
            Surface::Normalized
        }
    }

    fn thresholds(&self) -> Result<Thresholds> {
        ensure!(0.0 <= self.low && self.low <= self.high && self.high <= 1.0, "need 0 <= --low <= --high <= 1");
        Ok(Thresholds { low: self.low, high: self.high })
    }
}

fn env_key(var: &str) -> Secret {
    Secret::new(std::env::var(var).unwrap_or_default())
}

/// Logs go to stderr; `RUST_LOG` picks the level (default `warn`).
pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into());
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    match cli.command {
        Command::Ingest { input, split, seed, out } => ingest(&input, split, seed, &out),
        Command::Index { dataset, split, provider, out } => rt.block_on(index(&dataset, split, &provider, &out)),
        Command::Query { index, text, k, measure, provider, dump_prompt, dataset, prompt } => rt.block_on(async {
            let idx = Index::load(&index)?;
            let p = provider.build()?;
            let found = retrieval::query(&idx, p.as_ref(), &text, k, measure, &[]).await?;
            for r in &found.results {
                println!("{}\t{}\t{:.6}", r.rank, r.pair_id, r.score);
            }
            if found.truncated {
                eprintln!("note: only {} entries available", found.results.len());
            }
            if dump_prompt {
                let ds = load_dataset(dataset.context("--dump-prompt needs --dataset")?)?;
                println!("\n{}", render_prompt(&ds, &found.results, &text, prompt)?);
            }
            Ok(())
        }),
        Command::DumpPrompt { dataset, index, text, k, measure, prompt, provider } => rt.block_on(async {
            let ds = load_dataset(&dataset)?;
            let results = if k == 0 {
                Vec::new()
            } else {
                let idx = Index::load(index.context("-k > 0 needs --index")?)?;
                retrieval::query(&idx, provider.build()?.as_ref(), &text, k, measure, &[]).await?.results
            };
            print!("{}", render_prompt(&ds, &results, &text, prompt)?);
            Ok(())
        }),
        Command::Evaluate { hyp, reference, annotations, out, scoring } => {
            evaluate(&hyp, &reference, annotations.as_deref(), &out, &scoring)
        }
        Command::EvaluateGrid {
            dataset,
            index,
            grid,
            llm,
            llm_base_url,
            provider,
            out,
            records_dir,
            annotations,
            concurrency,
            sort,
            scoring,
        } => rt.block_on(evaluate_grid(GridRun {
            dataset,
            index,
            grid,
            llm,
            llm_base_url,
            provider,
            out,
            records_dir,
            annotations,
            concurrency,
            sort,
            scoring,
        })),
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config)?;
            rt.block_on(texvox_service::serve(config))?;
            Ok(())
        }
    }
}

fn ingest(input: &Path, ratios: SplitRatios, seed: u64, out: &Path) -> Result<()> {
    let ds = load_dataset(input)?;
    let split = split_dataset(&ds, ratios, seed)?;
    write_dataset(&split, out)?;
    let c = split.counts();
    println!("{} pairs: train {}, validation {}, test {}", c.total(), c.train, c.validation, c.test);
    Ok(())
}

async fn index(dataset: &Path, split: IndexSplit, provider: &ProviderArgs, out: &Path) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let pairs: Vec<_> = ds.in_splits(split.splits()).cloned().collect();
    ensure!(!pairs.is_empty(), "no {} pairs in {}", split.as_str(), dataset.display());
    let p = provider.build()?;
    let idx = build_index(&pairs, p.as_ref()).await?;
    idx.save(out)?;
    println!("indexed {} {} pairs with {} (dim {})", idx.len(), split.as_str(), idx.provider_id(), idx.dim());
    Ok(())
}

fn render_prompt(ds: &Dataset, results: &[texvox_core::RetrievalResult], text: &str, prompt: PromptId) -> Result<String> {
    let demos = results
        .iter()
        .map(|r| {
            let p = ds.get(&r.pair_id).with_context(|| format!("index entry `{}` not in dataset", r.pair_id))?;
            Ok(Demonstration {
                pair_id: r.pair_id.clone(),
                nl_text: p.nl_text.clone(),
                latex: p.latex.clone(),
                rank: r.rank,
                score: r.score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(&prompt.prompt(), &demos, text, AssemblyOptions::default()).render())
}

#[derive(Deserialize)]
struct Hypothesis {
    #[serde(alias = "id")]
    pair_id: String,
    latex: String,
}

fn read_hypotheses(path: &Path) -> Result<Vec<Hypothesis>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn evaluate(hyp: &Path, reference: &Path, annotations: Option<&Path>, out: &Path, scoring: &ScoringArgs) -> Result<()> {
    let thresholds = scoring.thresholds()?;
    let refs = load_dataset(reference)?;
    let hyps = read_hypotheses(hyp)?;
    ensure!(!hyps.is_empty(), "{} has no hypotheses", hyp.display());
    let n = Normalizer::shared();

    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["pair_id", "el", "bucket"])?;
    let mut scores = Vec::new();
    let mut refs_latex = Vec::new();
    let mut predicted = Vec::new();
    for h in &hyps {
        let r = refs.get(&h.pair_id).with_context(|| format!("pair `{}` not in {}", h.pair_id, reference.display()))?;
        let s = el_distance(&h.latex, &r.latex, n);
        let b = el_bucket(&s, thresholds);
        w.write_record([h.pair_id.clone(), format!("{:.4}", s.value), b.code().to_string()])?;
        predicted.push((h.pair_id.clone(), b));
        scores.push(s);
        refs_latex.push(r.latex.as_str());
    }
    let hyp_latex: Vec<&str> = hyps.iter().map(|h| h.latex.as_str()).collect();
    let (bleu, chrf) = corpus_bleu_chrf(&hyp_latex, &refs_latex, scoring.surface(), n)?;
    let (lo, hi) = threshold_rates(&scores, thresholds)?;
    let footer = [
        ("BLEU".to_string(), bleu),
        ("chrF".to_string(), chrf),
        (format!("%EL<{}", thresholds.low), lo),
        (format!("%EL>{}", thresholds.high), hi),
    ];
    for (label, v) in &footer {
        w.write_record([label.as_str(), &format!("{v:.2}"), ""])?;
        println!("{label}\t{v:.2}");
    }
    if let Some(path) = annotations {
        let labels: Vec<HumanLabel> = read_annotations(path)?;
        let report = texvox_core::metrics::annotation_agreement(&predicted, &labels)?;
        w.write_record(["agreement", &format!("{:.4}", report.agreement), ""])?;
        println!("agreement\t{:.4}\t({} items)", report.agreement, report.n_items);
    }
    w.flush()?;
    Ok(())
}

struct GridRun {
    dataset: PathBuf,
    index: PathBuf,
    grid: Option<PathBuf>,
    llm: String,
    llm_base_url: Option<String>,
    provider: ProviderArgs,
    out: PathBuf,
    records_dir: Option<PathBuf>,
    annotations: Option<PathBuf>,
    concurrency: usize,
    sort: bool,
    scoring: ScoringArgs,
}

fn build_llm(spec: &str, base_url: Option<&str>, ds: &Dataset, split: IndexSplit) -> Result<Arc<dyn ChatModel>> {
    Ok(match spec {
        "nearest-neighbor" => Arc::new(NearestNeighborLatex::new(
            ds.in_splits(split.splits()).map(|p| (p.nl_text.clone(), p.latex.clone())),
        )),
        "echo" => Arc::new(EchoLastExample),
        "remote" => {
            let url = base_url.context("--llm remote needs --llm-base-url")?;
            Arc::new(OpenAiCompatible::new(RemoteEndpoint::new(url).with_key(env_key(LLM_KEY_VAR)), RetryPolicy::default()))
        }
        other => match other.strip_prefix("fixed:") {
            Some(text) => Arc::new(FixedResponse(text.to_owned())),
            None => bail!("unknown --llm `{other}` (expected nearest-neighbor, echo, fixed:<latex> or remote)"),
        },
    })
}

fn row_label(c: &ExperimentConfig) -> String {
    match c.measure {
        Some(m) if c.k > 0 => format!("k{}-{}-{}", c.k, m.as_str(), c.prompt_id),
        _ => format!("k0-{}", c.prompt_id),
    }
}

async fn evaluate_grid(run: GridRun) -> Result<()> {
    let thresholds = run.scoring.thresholds()?;
    let ds = load_dataset(&run.dataset)?;
    ensure!(ds.counts().test > 0, "{} has no test pairs; run `texvox ingest` first", run.dataset.display());
    let idx = Index::load(&run.index)?;
    let configs = match &run.grid {
        Some(path) => GridFile::load(path)?.configs()?,
        None => default_grid(),
    };
    ensure!(!configs.is_empty(), "the grid has no rows");
    let split = configs[0].index_split;
    let provider = run.provider.build()?;
    let llm = build_llm(&run.llm, run.llm_base_url.as_deref(), &ds, split)?;
    let normalizer = Normalizer::shared();
    let harness = Harness {
        dataset: &ds,
        index: &idx,
        provider: provider.as_ref(),
        llm: llm.as_ref(),
        normalizer,
        options: HarnessOptions {
            concurrency: run.concurrency,
            thresholds,
            surface: run.scoring.surface(),
            ..Default::default()
        },
    };
    let labels = run.annotations.as_deref().map(read_annotations).transpose()?;

    let records_dir = run.records_dir.clone().unwrap_or_else(|| {
        let mut p = run.out.clone().into_os_string();
        p.push(".records");
        PathBuf::from(p)
    });
    fs::create_dir_all(&records_dir)?;

    let mut rows = Vec::new();
    let mut failed = 0;
    for (i, outcome) in harness.run_grid(&configs).await?.into_iter().enumerate() {
        let (config, records) = match &outcome {
            Ok(o) => (&o.config, &o.records),
            Err(f) => (&f.config, &f.partial),
        };
        let file = records_dir.join(format!("{:02}-{}.jsonl", i + 1, row_label(config)));
        write_records(&file, records)?;
        match outcome {
            Ok(o) => {
                if let Some(labels) = &labels {
                    let r = score_annotations(&o.records, labels, thresholds)?;
                    eprintln!("{}: agreement {:.4} over {} labels", row_label(&o.config), r.agreement, r.n_items);
                }
                rows.push(o.row);
            }
            Err(f) => {
                failed += 1;
                eprintln!("row {} ({}) failed: {}", i + 1, row_label(&f.config), f.error);
            }
        }
    }
    if run.sort {
        sort_by_el(&mut rows);
    }
    fs::write(&run.out, results_csv(&rows, thresholds))?;
    let mut summary = run.out.clone().into_os_string();
    summary.push(".rows.jsonl");
    let lines: Vec<String> = rows.iter().map(|r| serde_json::to_string(r).expect("row serializes")).collect();
    fs::write(&summary, lines.join("\n") + "\n")?;
    print!("{}", results_table(&rows, thresholds));
    ensure!(failed == 0, "{failed} of {} rows failed", configs.len());
    Ok(())
}

