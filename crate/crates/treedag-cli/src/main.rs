//! Command-line front end for the treedag pipeline. Five commands cover the
//! whole workflow: `gen` writes a dataset, `preprocess` merges per-vertex
//! trees into a layered DAG and exports its matrices, `train` and `eval` run
//! the model, and `analyze` produces influence, expressivity, and size
//! reports. Every command drops a `run.json` manifest next to its outputs;
//! rerunning with an identical manifest yields byte-identical files.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use treedag::analysis::{
    expressivity_csv, expressivity_report, influence_csv, relative_influence, size_audit,
    size_audit_csv, InfluenceMethod,
};
use treedag::canon::Labeling;
use treedag::gen::{generate_counterexample, generate_csl, random_gnp, Counterexample};
use treedag::graph::{collection_to_json, parse_graph_file, GraphCollection, GraphFormat};
use treedag::merge::FeatureMode;
use treedag::mlp::{
    evaluate, load_checkpoint, metrics_csv, save_checkpoint, train, EpochRow, LossKind, MlpStack,
    Optimizer, Pool, Readout, TrainConfig,
};
use treedag::pipeline::{load_prepared, prepare, write_prepared, PreprocessConfig};
use treedag::{Error, Parallelism, Result};

#[derive(Parser)]
#[command(
    name = "treedag",
    version,
    about = "Neighborhood-tree DAG pipeline: generate, preprocess, train, evaluate, analyze."
)]
struct Cli {
    /// Worker threads; 1 forces sequential execution. Unset uses the
    /// default pool. Results never depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, env = "TREEDAG_OUT", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a graph dataset to dataset.json.
    Gen {
        #[command(subcommand)]
        family: GenCmd,
    },
    /// Merge per-vertex trees into a DAG and export its layered matrices.
    Preprocess(PreprocessArgs),
    /// Train the DAG model on a preprocessed directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a preprocessed directory.
    Eval(EvalArgs),
    /// Emit a CSV report.
    Analyze {
        #[command(subcommand)]
        kind: AnalyzeCmd,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Circulant skip-link graphs, one class per skip value.
    Csl {
        #[arg(long, default_value_t = 41)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,9,11,12,13,16")]
        skips: Vec<usize>,
    },
    /// The five built-in counterexample graphs.
    Counterexamples,
    /// Erdos-Renyi G(n, p) draws from one seed.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        num_labels: u32,
        /// Assign classes round-robin over this many values.
        #[arg(long)]
        classes: Option<u32>,
    },
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input dataset file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Redundancy k, or `inf` for plain unfolding trees.
    #[arg(long, default_value = "1")]
    k: String,
    /// Maximum tree height; trees of every height up to it are merged.
    #[arg(long, default_value_t = 3)]
    height: usize,
    #[arg(long, value_enum, default_value_t = LabelingArg::Mu)]
    labeling: LabelingArg,
    #[arg(long, value_enum, default_value_t = FeaturesArg::OneHot)]
    features: FeaturesArg,
}

#[derive(Args)]
struct TrainArgs {
    /// Preprocessed directory, as written by `preprocess`.
    #[arg(long)]
    pre: PathBuf,
    #[arg(long, default_value_t = 16)]
    embed_dim: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// 0 trains full-batch.
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Momentum)]
    optimizer: OptimizerArg,
    /// Coefficient for the momentum optimizer.
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, value_enum, default_value_t = ReadoutArg::Combine)]
    readout: ReadoutArg,
    #[arg(long, value_enum, default_value_t = PoolArg::Mean)]
    pool: PoolArg,
    /// Stop once training accuracy reaches this value.
    #[arg(long)]
    stop_acc: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Preprocessed directory, as written by `preprocess`.
    #[arg(long)]
    pre: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Exact influence of a source vertex on a receiving root.
    Influence {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Graph index within the dataset.
        #[arg(long, default_value_t = 0)]
        graph: usize,
        /// Receiving root vertex.
        #[arg(long)]
        u: usize,
        /// Source vertex whose mass is measured.
        #[arg(long)]
        v: usize,
        /// Walk depth and tree height.
        #[arg(long)]
        k: usize,
    },
    /// Pairwise color refinement vs signature separability.
    Expressivity {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Heights 0..=max-height are reported.
        #[arg(long, default_value_t = 6)]
        max_height: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        ks: Vec<usize>,
    },
    /// Per-graph tree and merge sizes against their m(k+1) bounds.
    SizeAudit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Redundancy k, or `inf` for plain unfolding trees.
        #[arg(long, default_value = "1")]
        k: String,
        #[arg(long, default_value_t = 6)]
        height: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    EdgeList,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LabelingArg {
    /// Vertex-identity canonization; merges stay within one graph.
    Phi,
    /// Attribute-label canonization; merges share across graphs.
    Mu,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeaturesArg {
    /// One-hot of the attribute label.
    OneHot,
    /// Dense per-vertex features from the dataset (phi only).
    Raw,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Momentum,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReadoutArg {
    /// Average pooled root embeddings over all heights.
    Combine,
    /// Pool only the maximum-height roots.
    Fixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PoolArg {
    Mean,
    Sum,
}

impl FormatArg {
    fn to_format(self) -> GraphFormat {
        match self {
            FormatArg::Json => GraphFormat::JsonCollection,
            FormatArg::EdgeList => GraphFormat::EdgeList,
        }
    }
}

/// One record per run, written as run.json next to the outputs. Identical
/// manifests reproduce byte-identical output files.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    inputs: Vec<String>,
    out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labeling: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    readout: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    training: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<serde_json::Value>,
}

impl RunManifest {
    fn new(command: &str, out: &Path) -> Self {
        RunManifest {
            command: command.into(),
            inputs: Vec::new(),
            out: out.display().to_string(),
            seed: None,
            k: None,
            height: None,
            layers: None,
            labeling: None,
            features: None,
            readout: None,
            pool: None,
            training: None,
            generator: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 2,
        Error::Numeric(_) => 4,
        _ => 3,
    }
}

fn parallelism(threads: Option<usize>) -> Parallelism {
    #[cfg(feature = "parallel")]
    if threads != Some(1) {
        return Parallelism::Rayon;
    }
    let _ = threads;
    Parallelism::Sequential
}

fn run(cli: Cli) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(t) = cli.threads {
        if t > 1 {
            // Fails only if a pool already exists; the default pool is fine then.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    let par = parallelism(cli.threads);
    fs::create_dir_all(&cli.out)?;
    match cli.cmd {
        Cmd::Gen { family } => cmd_gen(&cli.out, family),
        Cmd::Preprocess(args) => cmd_preprocess(&cli.out, args, par),
        Cmd::Train(args) => cmd_train(&cli.out, args, par),
        Cmd::Eval(args) => cmd_eval(&cli.out, args, par),
        Cmd::Analyze { kind } => cmd_analyze(&cli.out, kind, par),
    }
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<()> {
    let s = serde_json::to_string_pretty(manifest)?;
    fs::write(out.join("run.json"), s + "\n")?;
    Ok(())
}

fn write_dataset(out: &Path, coll: &GraphCollection) -> Result<()> {
    let s = serde_json::to_string_pretty(&collection_to_json(coll))?;
    fs::write(out.join("dataset.json"), s + "\n")?;
    Ok(())
}

fn load_dataset(path: &Path, format: FormatArg) -> Result<GraphCollection> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_graph_file(BufReader::new(file), format.to_format())
}

fn cmd_gen(out: &Path, family: GenCmd) -> Result<()> {
    let mut manifest = RunManifest::new("gen", out);
    let coll = match family {
        GenCmd::Csl { n, skips } => {
            let graphs = skips
                .iter()
                .enumerate()
                .map(|(c, &s)| Ok(generate_csl(n, s)?.with_class(c as u32)))
                .collect::<Result<Vec<_>>>()?;
            manifest.generator =
                Some(serde_json::json!({ "family": "csl", "n": n, "skips": skips }));
            GraphCollection::new(format!("csl{n}"), graphs)?
        }
        GenCmd::Counterexamples => {
            let graphs = Counterexample::ALL
                .iter()
                .map(|&c| generate_counterexample(c))
                .collect();
            manifest.generator = Some(serde_json::json!({ "family": "counterexamples" }));
            GraphCollection::new("counterexamples", graphs)?
        }
        GenCmd::Random { n, p, count, seed, num_labels, classes } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!("p must lie in [0, 1], got {p}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let graphs = (0..count)
                .map(|i| {
                    let g = random_gnp(&mut rng, n, p, num_labels);
                    match classes {
                        Some(c) => g.with_class(i as u32 % c),
                        None => g,
                    }
                })
                .collect();
            manifest.seed = Some(seed);
            manifest.generator = Some(serde_json::json!({
                "family": "random", "n": n, "p": p, "count": count,
                "num_labels": num_labels, "classes": classes,
            }));
            GraphCollection::new(format!("gnp-{n}"), graphs)?
        }
    };
    write_dataset(out, &coll)?;
    write_manifest(out, &manifest)?;
    println!("wrote {} ({} graphs)", out.join("dataset.json").display(), coll.len());
    Ok(())
}

fn parse_k(s: &str) -> Result<Option<usize>> {
    match s {
        "inf" | "none" => Ok(None),
        _ => s
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Argument(format!("k must be an integer or `inf`, got `{s}`"))),
    }
}

fn cmd_preprocess(out: &Path, args: PreprocessArgs, par: Parallelism) -> Result<()> {
    let coll = load_dataset(&args.data, args.format)?;
    let k = parse_k(&args.k)?;
    let labeling = match args.labeling {
        LabelingArg::Phi => Labeling::Phi,
        LabelingArg::Mu => Labeling::Mu,
    };
    let features = match args.features {
        FeaturesArg::OneHot => FeatureMode::OneHotLabel,
        FeaturesArg::Raw => FeatureMode::RawFeatures,
    };
    let cfg = PreprocessConfig { k, height: args.height, labeling, features, par };
    let prepared = prepare(&coll, &cfg)?;
    write_prepared(out, &prepared)?;

    let mut manifest = RunManifest::new("preprocess", out);
    manifest.inputs = vec![args.data.display().to_string()];
    manifest.k = Some(args.k);
    manifest.height = Some(args.height);
    manifest.labeling = Some(format!("{labeling:?}").to_lowercase());
    manifest.features = Some(
        match args.features {
            FeaturesArg::OneHot => "one-hot",
            FeaturesArg::Raw => "raw",
        }
        .into(),
    );
    write_manifest(out, &manifest)?;
    println!(
        "wrote {}: {} DAG nodes, height {}, {} tasks",
        out.display(),
        prepared.matrices.num_nodes,
        prepared.matrices.height,
        prepared.tasks.len()
    );
    Ok(())
}

fn num_classes(tasks: &[treedag::mlp::GraphTask]) -> Result<usize> {
    let mut max = None;
    for (i, t) in tasks.iter().enumerate() {
        match t.class {
            Some(c) => max = Some(max.unwrap_or(0).max(c)),
            None => {
                return Err(Error::Data(format!(
                    "task {i} carries no class; regenerate the dataset with classes"
                )))
            }
        }
    }
    let classes = max.map(|m| m as usize + 1).unwrap_or(0);
    if classes < 2 {
        return Err(Error::Data(format!("need at least two classes, found {classes}")));
    }
    Ok(classes)
}

fn cmd_train(out: &Path, args: TrainArgs, par: Parallelism) -> Result<()> {
    let (matrices, tasks) = load_prepared(&args.pre)?;
    let classes = num_classes(&tasks)?;
    let readout = match args.readout {
        ReadoutArg::Combine => Readout::CombineHeights,
        ReadoutArg::Fixed => Readout::FixedSingleHeight,
    };
    let pool = match args.pool {
        PoolArg::Mean => Pool::Mean,
        PoolArg::Sum => Pool::Sum,
    };
    let mut p = MlpStack::init(
        &mut ChaCha8Rng::seed_from_u64(args.seed),
        matrices.feature_dim,
        args.embed_dim,
        matrices.height,
        classes,
        readout,
        pool,
    );
    let cfg = TrainConfig {
        lr: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        optimizer: match args.optimizer {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Momentum => Optimizer::Momentum(args.momentum),
        },
        loss: LossKind::CrossEntropy,
        stop_at_train_acc: args.stop_acc,
    };
    let rows = train(&matrices, &tasks, &mut p, &cfg, par)?;
    fs::write(out.join("metrics.csv"), metrics_csv(&rows))?;
    save_checkpoint(&p, File::create(out.join("checkpoint.json"))?)?;

    let mut manifest = RunManifest::new("train", out);
    manifest.inputs = vec![args.pre.display().to_string()];
    manifest.seed = Some(args.seed);
    manifest.layers = Some(matrices.height);
    manifest.readout = Some(
        match args.readout {
            ReadoutArg::Combine => "combine",
            ReadoutArg::Fixed => "fixed",
        }
        .into(),
    );
    manifest.pool = Some(
        match args.pool {
            PoolArg::Mean => "mean",
            PoolArg::Sum => "sum",
        }
        .into(),
    );
    manifest.training = Some(cfg);
    write_manifest(out, &manifest)?;
    let last = rows.last().expect("training always reports epoch 0");
    println!(
        "trained {} epochs: loss {:.6} accuracy {:.6}",
        last.epoch, last.loss, last.accuracy
    );
    Ok(())
}

fn cmd_eval(out: &Path, args: EvalArgs, par: Parallelism) -> Result<()> {
    let (matrices, tasks) = load_prepared(&args.pre)?;
    let file = File::open(&args.checkpoint)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", args.checkpoint.display())))?;
    let p = load_checkpoint(file)?;
    let all: Vec<usize> = (0..tasks.len()).collect();
    let ev = evaluate(&matrices, &tasks, &all, &p, par)?;
    let row = EpochRow { epoch: 0, split: "eval", loss: ev.loss, accuracy: ev.accuracy };
    fs::write(out.join("eval.csv"), metrics_csv(&[row]))?;

    let mut manifest = RunManifest::new("eval", out);
    manifest.inputs =
        vec![args.pre.display().to_string(), args.checkpoint.display().to_string()];
    write_manifest(out, &manifest)?;
    println!("loss {:.6} accuracy {:.6}", ev.loss, ev.accuracy);
    Ok(())
}

fn cmd_analyze(out: &Path, kind: AnalyzeCmd, par: Parallelism) -> Result<()> {
    match kind {
        AnalyzeCmd::Influence { data, format, graph, u, v, k } => {
            let coll = load_dataset(&data, format)?;
            let g = coll.graphs.get(graph).ok_or_else(|| {
                Error::Argument(format!(
                    "graph index {graph} out of range for {} graphs",
                    coll.len()
                ))
            })?;
            let reports = InfluenceMethod::ALL
                .iter()
                .map(|&m| relative_influence(g, u, v, k, m))
                .collect::<Result<Vec<_>>>()?;
            fs::write(out.join("influence.csv"), influence_csv(&reports))?;
            let mut manifest = RunManifest::new("analyze influence", out);
            manifest.inputs = vec![data.display().to_string()];
            manifest.k = Some(k.to_string());
            write_manifest(out, &manifest)?;
            for r in &reports {
                println!("{}: {}/{}", r.method.name(), r.numerator, r.denominator);
            }
        }
        AnalyzeCmd::Expressivity { data, format, max_height, ks } => {
            let coll = load_dataset(&data, format)?;
            let mut pairs = Vec::new();
            for i in 0..coll.len() {
                for j in (i + 1)..coll.len() {
                    pairs.push((coll.graphs[i].clone(), coll.graphs[j].clone()));
                }
            }
            if pairs.is_empty() {
                return Err(Error::Argument("expressivity needs at least two graphs".into()));
            }
            let heights: Vec<usize> = (0..=max_height).collect();
            let rows = expressivity_report(&pairs, &heights, &ks)?;
            fs::write(out.join("expressivity.csv"), expressivity_csv(&rows))?;
            let mut manifest = RunManifest::new("analyze expressivity", out);
            manifest.inputs = vec![data.display().to_string()];
            manifest.height = Some(max_height);
            write_manifest(out, &manifest)?;
            let separated = rows.iter().filter(|r| r.knt).count();
            println!("{} rows, {} with distinct signatures", rows.len(), separated);
        }
        AnalyzeCmd::SizeAudit { data, format, k, height } => {
            let coll = load_dataset(&data, format)?;
            let parsed = parse_k(&k)?;
            let audit = size_audit(&coll, parsed, height, par)?;
            fs::write(out.join("size-audit.csv"), size_audit_csv(&audit))?;
            let mut manifest = RunManifest::new("analyze size-audit", out);
            manifest.inputs = vec![data.display().to_string()];
            manifest.k = Some(k);
            manifest.height = Some(height);
            write_manifest(out, &manifest)?;
            println!(
                "{} graphs, worst tree fraction {:.3}, worst merge fraction {:.3}",
                audit.rows.len(),
                audit.max_tree_ratio,
                audit.max_merge_ratio
            );
        }
    }
    Ok(())
}
