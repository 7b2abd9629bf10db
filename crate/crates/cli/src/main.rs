use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use msi_gnn::checkpoint::{load_checkpoint, save_checkpoint};
use msi_gnn::graph::{DatasetFormat, Graph};
use msi_gnn::harness::{
    evaluate, predict, required_hops, two_stage_search, write_summary_csv, write_timings_csv,
    ParamsFile, PreparedGraph, RunReport, SearchSpace, TrainConfig,
};
use msi_gnn::hop::compute_hop_adjacency;
use msi_gnn::igr::{rank_scores, score_columns, select_columns, write_rankings_csv, LabelStats};
use msi_gnn::models::{parse_model_name, Model, ModelConfig, ModelKind};
use msi_gnn::msi::MsiConfig;
use msi_gnn::rng::seeded;
use msi_gnn::split::make_splits;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_TRAINING: u8 = 3;

#[derive(Parser)]
#[command(
    name = "msi-gnn",
    version,
    about = "GNN training with multi-hop structural input layers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a fixed configuration (or search first with --search) on every split.
    Train(TrainArgs),
    /// Run the two-stage hyperparameter search, then evaluate the winner.
    Search(TrainArgs),
    /// Rank the columns of a hop matrix by information gain ratio.
    Rank(RankArgs),
    /// Dump the model input layer and, given a checkpoint, the output logits.
    ExportEmbeddings(ExportArgs),
    /// Convert a dataset to the canonical layout.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Dataset directory.
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset layout; detected from the directory contents when omitted.
    #[arg(long)]
    format: Option<DatasetFormat>,
}

impl DatasetArgs {
    fn load(&self) -> Result<Graph> {
        let graph = match self.format {
            Some(format) => Graph::load(&self.dataset, format)?,
            None => Graph::load_auto(&self.dataset)?,
        };
        Ok(graph)
    }

    fn name(&self) -> String {
        self.dataset
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.display().to_string())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchKind {
    /// Combined numbers from {0, 1, 4, 8}.
    Standard,
    /// Combined numbers from {0, 1}, used for citation graphs.
    Citation,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Model name: gcn, h2gcn-K, gcnii, optionally prefixed with `msi-`.
    #[arg(long)]
    model: Option<String>,
    /// Fixed configuration file.
    #[arg(long, conflicts_with = "search")]
    params_file: Option<PathBuf>,
    /// Search space for the two-stage grid search.
    #[arg(long, value_enum)]
    search: Option<SearchKind>,
    /// GCNII layer count (search mode).
    #[arg(long)]
    layers: Option<usize>,
    /// GCNII initial-residual weight (search mode).
    #[arg(long)]
    alpha: Option<f64>,
    /// GCNII identity-mapping weight (search mode).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 10)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 200)]
    patience: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Hop distance whose adjacency columns are ranked.
    #[arg(long, default_value_t = 1)]
    hop: usize,
    /// Selection size.
    #[arg(long, default_value_t = 1000)]
    t: usize,
    /// Occurrence threshold.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Split whose training nodes form the labeled set.
    #[arg(long, default_value_t = 0)]
    split: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use every node as labeled instead of a split's training nodes.
    #[arg(long)]
    all_labeled: bool,
    /// Dump every column's score instead of the selected ones.
    #[arg(long)]
    all: bool,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    params_file: PathBuf,
    /// Trained parameters for the logits dump.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Split whose training nodes drive the structural selection.
    #[arg(long, default_value_t = 0)]
    split: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Raised when runs diverge or fail; maps to its own exit code.
#[derive(Debug)]
struct TrainingFailure(String);

impl std::fmt::Display for TrainingFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TrainingFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(&args, false),
        Command::Search(args) => cmd_train(&args, true),
        Command::Rank(args) => cmd_rank(&args),
        Command::ExportEmbeddings(args) => cmd_export(&args),
        Command::Convert(args) => cmd_convert(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<TrainingFailure>().is_some() {
        return EXIT_TRAINING;
    }
    match e.downcast_ref::<msi_gnn::Error>() {
        Some(msi_gnn::Error::Diverged { .. }) => EXIT_TRAINING,
        Some(err) if err.is_data_error() => EXIT_DATA,
        _ => EXIT_USAGE,
    }
}

fn base_config(args: &TrainArgs) -> Result<ModelConfig> {
    let name = args
        .model
        .as_deref()
        .ok_or_else(|| anyhow!("--search needs --model"))?;
    let (mut kind, msi) = parse_model_name(name)?;
    if let ModelKind::Gcnii { .. } = kind {
        kind = ModelKind::Gcnii {
            layers: args.layers.context("GCNII needs --layers")?,
            alpha: args.alpha.context("GCNII needs --alpha")?,
            beta: args.beta.context("GCNII needs --beta")?,
        };
    }
    let mut config = ModelConfig::new(kind);
    if msi {
        // stage 1 overwrites every MSI field
        config.msi = Some(MsiConfig {
            t: 1000,
            n: 1,
            lambda: 0.5,
            c_x: 1,
            c_a: vec![0, 0],
        });
    }
    Ok(config)
}

fn cmd_train(args: &TrainArgs, force_search: bool) -> Result<()> {
    let search = match (args.search, force_search) {
        (Some(kind), _) => Some(kind),
        (None, true) => Some(SearchKind::Standard),
        (None, false) => None,
    };
    let fixed = match (&args.params_file, search) {
        (Some(path), None) => {
            let config = ParamsFile::load(path)?.to_model_config()?;
            if let Some(name) = &args.model {
                if !name.eq_ignore_ascii_case(&config.name()) {
                    bail!(
                        "--model {name} does not match parameter file model {}",
                        config.name()
                    );
                }
            }
            Some(config)
        }
        (None, Some(_)) => None,
        (Some(_), Some(_)) => bail!("--params-file and --search are mutually exclusive"),
        (None, None) => bail!("need either --params-file or --search"),
    };
    let train = TrainConfig {
        epochs: args.epochs,
        patience: args.patience,
        lr: args.lr,
        seed: args.seed,
    };
    train.validate()?;
    if args.splits == 0 {
        bail!("--splits must be positive");
    }

    let graph = args.data.load()?;
    let splits = make_splits(&graph, args.splits, args.seed)?;

    let (config, search_outcome, prepared) = match fixed {
        Some(config) => {
            let prepared = PreparedGraph::new(graph, required_hops(&config));
            (config, None, prepared)
        }
        None => {
            let base = base_config(args)?;
            let space = SearchSpace::standard(matches!(search, Some(SearchKind::Citation)));
            let hops = required_hops(&base).max(if base.msi.is_some() { space.hops } else { 0 });
            let prepared = PreparedGraph::new(graph, hops);
            let outcome = two_stage_search(&prepared, &splits, &base, &space, &train, args.jobs)?;
            (outcome.best.clone(), Some(outcome), prepared)
        }
    };

    let evaluation = evaluate(&prepared, &splits, &config, &train, args.jobs)?;
    let report = RunReport {
        dataset: args.data.name(),
        num_splits: args.splits,
        split_seed: args.seed,
        result: evaluation.result.clone(),
        search: search_outcome,
    };

    let out = &args.out;
    fs::create_dir_all(out.join("checkpoints"))
        .with_context(|| format!("creating {}", out.display()))?;
    report.save_json(&out.join("results.json"))?;
    write_file(&out.join("results.csv"), |w| {
        write_summary_csv(w, &[report.summary_row()])
    })?;
    write_file(&out.join("timings.csv"), |w| {
        write_timings_csv(w, &evaluation.wall_clock_secs)
    })?;
    fs::write(
        out.join("config.toml"),
        ParamsFile::from_model_config(&config).to_toml(),
    )?;
    for (k, params) in evaluation.params.iter().enumerate() {
        if let Some(params) = params {
            save_checkpoint(
                &out.join("checkpoints").join(format!("split_{k}.ckpt")),
                params,
            )?;
        }
    }

    let result = &evaluation.result;
    println!(
        "{} {}: {:.2} ± {:.2} over {} splits",
        report.dataset,
        config.name(),
        result.mean_accuracy,
        result.std_accuracy,
        result.splits.len()
    );
    if result.failed_runs > 0 {
        let reasons: Vec<String> = result
            .splits
            .iter()
            .filter_map(|s| s.error.as_ref().map(|e| format!("split {}: {e}", s.split)))
            .collect();
        return Err(TrainingFailure(format!(
            "{} of {} runs failed ({})",
            result.failed_runs,
            result.splits.len(),
            reasons.join("; ")
        ))
        .into());
    }
    Ok(())
}

fn labeled_set(graph: &Graph, all: bool, split: usize, seed: u64) -> Result<Vec<usize>> {
    if all {
        return Ok((0..graph.num_nodes()).collect());
    }
    let mut splits = make_splits(graph, split + 1, seed)?;
    Ok(splits.swap_remove(split).train)
}

fn cmd_rank(args: &RankArgs) -> Result<()> {
    if args.hop == 0 {
        bail!("--hop must be at least 1");
    }
    let graph = args.data.load()?;
    let labeled = labeled_set(&graph, args.all_labeled, args.split, args.seed)?;
    let stats = LabelStats::new(graph.labels(), &labeled, graph.num_classes())?;
    let hop = compute_hop_adjacency(&graph, args.hop)
        .pop()
        .expect("hop >= 1");
    let scores = if args.all {
        let mut scores = score_columns(&hop, graph.labels(), &stats);
        rank_scores(&mut scores);
        scores
    } else {
        select_columns(&hop, graph.labels(), &stats, args.t, args.n)?.columns
    };
    if scores.is_empty() {
        eprintln!("warning: every column was filtered out; the ranking is empty");
    }
    match &args.out {
        Some(path) => write_file(path, |w| write_rankings_csv(w, &scores))?,
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write_rankings_csv(&mut w, &scores)?;
        }
    }
    Ok(())
}

fn write_matrix_csv(
    w: &mut impl Write,
    prefix: &str,
    rows: usize,
    cols: usize,
    labels: &[usize],
    value: impl Fn(usize, usize) -> f64,
) -> std::io::Result<()> {
    write!(w, "node_id,label")?;
    for c in 0..cols {
        write!(w, ",{prefix}{c}")?;
    }
    writeln!(w)?;
    for (r, label) in labels.iter().enumerate().take(rows) {
        write!(w, "{r},{label}")?;
        for c in 0..cols {
            write!(w, ",{}", value(r, c))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let config = ParamsFile::load(&args.params_file)?.to_model_config()?;
    if let Some(path) = &args.checkpoint {
        if !path.is_file() {
            return Err(msi_gnn::Error::MissingFile(path.clone()).into());
        }
    }
    let graph = args.data.load()?;
    let splits = make_splits(&graph, args.split + 1, args.seed)?;
    let split = &splits[args.split];
    let prepared = PreparedGraph::new(graph, required_hops(&config));
    let input = prepared.model_input(split, &config)?;
    let labels = prepared.graph.labels();

    let logits = match &args.checkpoint {
        Some(path) => {
            let params = load_checkpoint(path)?;
            let mut model = Model::new(
                config.clone(),
                input.cols(),
                prepared.graph.num_classes(),
                &mut seeded(0),
            )?;
            let matches = params.len() == model.params.len()
                && params
                    .iter()
                    .zip(model.params.iter())
                    .all(|(a, b)| a.name == b.name && a.value.dim() == b.value.dim());
            if !matches {
                return Err(msi_gnn::Error::Checkpoint(format!(
                    "{} does not fit {} with input width {}",
                    path.display(),
                    config.name(),
                    input.cols()
                ))
                .into());
            }
            model.params = params;
            Some(predict(&model, &prepared.propagation, &input)?)
        }
        None => None,
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let dense = input.to_dense();
    write_file(&args.out.join("msi_layer.csv"), |w| {
        write_matrix_csv(w, "d", dense.nrows(), dense.ncols(), labels, |r, c| {
            dense[[r, c]]
        })
    })?;
    if let Some(logits) = logits {
        write_file(&args.out.join("logits.csv"), |w| {
            write_matrix_csv(
                w,
                "class",
                logits.nrows(),
                logits.ncols(),
                labels,
                |r, c| logits[[r, c]],
            )
        })?;
    }
    println!(
        "exported {} x {} input layer to {}",
        dense.nrows(),
        dense.ncols(),
        args.out.display()
    );
    Ok(())
}

fn cmd_convert(args: &ConvertArgs) -> Result<()> {
    let graph = args.data.load()?;
    graph.save_canonical(&args.out)?;
    println!(
        "wrote {} nodes, {} edges to {}",
        graph.num_nodes(),
        graph.num_edges(),
        args.out.display()
    );
    Ok(())
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}
