use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mgnn::exp::{
    build_superdiffusion_dataset, evaluate_graph_classification, evaluate_link_prediction, evaluate_node_classification,
    run_graph_classification, run_link_prediction, run_node_classification, ExperimentConfig, ManifestSource,
    MetricRecord, ModelCard, NodeData, RunReport, SuperdiffConfig, Task,
};
use mgnn::mlg::{load_mlg, save_jsonl, save_mlg, ManifestEntry, MlgDocument, Split};
use mgnn::mlgraph::is_superdiffusive;
use mgnn::tensor::{read_checkpoint, save_checkpoint};

#[derive(Parser)]
#[command(name = "mgnn", version, about = "Multilayer graph neural networks and supra-Laplacian tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print per-layer and supra-Laplacian λ2 and the superdiffusion label
    Spectral {
        /// `.mlg` network
        file: PathBuf,
        /// Clique coupling weight, used only when the file has no inter-layer edges
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
    },
    /// Generate a labelled superdiffusion dataset directory
    GenSuperdiff {
        /// Grid spacing of (p1, p2)
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Training networks per (p1, p2) combination, before balancing
        #[arg(long, default_value_t = 5)]
        train_per: usize,
        /// Test networks per (p1, p2) combination
        #[arg(long, default_value_t = 10)]
        test_per: usize,
        /// Inter-layer clique weight used for labelling
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        /// Nodes per layer
        #[arg(long, default_value_t = 50)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Labelling worker threads
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (created; must be empty if it exists)
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write checkpoint, card, history and metrics
    Train {
        #[arg(value_enum)]
        task: TaskArg,
        /// Flat TOML config; task defaults when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// `.mlg` network (node-clf, link-pred) or dataset directory (graph-clf)
        #[arg(long)]
        data: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a trained checkpoint on data
    Eval {
        /// `model.ckpt`; the `model.toml` card is read from the same directory
        #[arg(long)]
        checkpoint: PathBuf,
        /// Same kind of input as `train --data`
        #[arg(long)]
        data: PathBuf,
        /// Also write metrics.jsonl here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    NodeClf,
    LinkPred,
    GraphClf,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::NodeClf => Task::NodeClf,
            TaskArg::LinkPred => Task::LinkPred,
            TaskArg::GraphClf => Task::GraphClf,
        }
    }
}

/// Bad flag values or config contents; exits with the same code as clap's
/// own usage errors.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl std::fmt::Display) -> anyhow::Error {
    Usage(msg.to_string()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Usage>() { 2 } else { 1 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Spectral { file, coupling } => spectral(&file, coupling),
        Command::GenSuperdiff { step, train_per, test_per, coupling, nodes, seed, jobs, out } => {
            let cfg = SuperdiffConfig { step, train_per, test_per, coupling, n_nodes: nodes, seed, jobs };
            gen_superdiff(&cfg, &out)
        }
        Command::Train { task, config, data, out, seed } => train(task.into(), config.as_deref(), &data, &out, seed),
        Command::Eval { checkpoint, data, out } => eval(&checkpoint, &data, out.as_deref()),
    }
}

/// Rounds away eigensolver dust so exact spectra print exactly.
fn clean(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn spectral(file: &Path, coupling: f64) -> Result<()> {
    if !(coupling > 0.0 && coupling.is_finite()) {
        return Err(usage(format!("--coupling must be positive, got {coupling}")));
    }
    let doc = load_mlg(file).with_context(|| format!("reading {}", file.display()))?;
    let mut net = doc.network;
    if net.n_layers() > 1 && net.inter_edges().is_empty() {
        println!("# no inter-layer edges in file; clique coupling with weight {coupling}");
        net = net.build_multiplex_clique(coupling)?;
    }
    let sd = is_superdiffusive(&net)?;
    for (a, l2) in sd.layer_lambda2.iter().enumerate() {
        println!("layer {a} {} lambda2 {}", net.layer_names()[a], clean(*l2));
    }
    println!("supra lambda2 {}", clean(sd.supra_lambda2));
    println!("superdiffusive {}", sd.label);
    println!("margin {}", clean(sd.margin));
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        bail!("output directory {} is not empty", dir.display());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn gen_superdiff(cfg: &SuperdiffConfig, out: &Path) -> Result<()> {
    cfg.validate().map_err(usage)?;
    prepare_out(out)?;
    let ds = build_superdiffusion_dataset(cfg)?;
    let mut manifest = Vec::with_capacity(ds.train.len() + ds.test.len());
    // seeds are unique per instance
    let kept: HashSet<u64> = ds.train.iter().map(|i| i.seed).collect();
    for (split, dir, items) in [(Split::Train, "train", &ds.train_all), (Split::Test, "test", &ds.test)] {
        fs::create_dir_all(out.join(dir))?;
        for (k, inst) in items.iter().enumerate() {
            let path = format!("{dir}/{k:06}.mlg");
            save_mlg(&MlgDocument::new(ds.network(inst)?), &out.join(&path))?;
            manifest.push(ManifestEntry {
                path,
                label: inst.label,
                margin: inst.margin,
                split,
                seed: inst.seed,
                p1: inst.p1,
                p2: inst.p2,
                kept: split == Split::Test || kept.contains(&inst.seed),
            });
        }
    }
    save_jsonl(&manifest, &out.join("manifest.jsonl"))?;
    let test_pos = ds.test.iter().filter(|i| i.label).count();
    println!(
        "generated {} training graphs ({} superdiffusive), kept {} after balancing; {} test graphs ({} superdiffusive)",
        ds.train_generated,
        ds.train_positives,
        ds.train.len(),
        ds.test.len(),
        test_pos
    );
    Ok(())
}

fn load_config(task: Task, path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_toml(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::defaults(task),
    };
    if cfg.task != task {
        return Err(usage(format!("config is for task {}, but {} was requested", cfg.task, task)));
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_report(report: &RunReport, out: &Path) -> Result<()> {
    save_checkpoint(&report.store, &out.join("model.ckpt"))?;
    fs::write(out.join("model.toml"), report.card.to_toml())?;
    save_jsonl(&report.outcome.history, &out.join("history.jsonl"))?;
    save_jsonl(&report.metrics, &out.join("metrics.jsonl"))?;
    fs::write(out.join("summary.txt"), report.summary())?;
    Ok(())
}

fn train(task: Task, config: Option<&Path>, data: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(task, config, seed)?;
    if !data.exists() {
        bail!("data path {} does not exist", data.display());
    }
    prepare_out(out)?;
    let report = match task {
        Task::NodeClf => run_node_classification(&load_nodes(data)?, &cfg)?,
        Task::LinkPred => run_link_prediction(&load_mlg(data)?.network, &cfg)?,
        Task::GraphClf => {
            let (train, test) = (ManifestSource::load(data, Split::Train)?, ManifestSource::load(data, Split::Test)?);
            run_graph_classification(&train, &test, &cfg)?
        }
    };
    write_report(&report, out)?;
    print!("{}", report.summary());
    Ok(())
}

fn load_nodes(data: &Path) -> Result<NodeData> {
    Ok(NodeData::from_document(&load_mlg(data).with_context(|| format!("reading {}", data.display()))?)?)
}

fn eval(checkpoint: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    let card_path = checkpoint.with_file_name("model.toml");
    let card = ModelCard::from_toml(&fs::read_to_string(&card_path).with_context(|| format!("reading {}", card_path.display()))?)?;
    let store = read_checkpoint(fs::File::open(checkpoint).with_context(|| format!("opening {}", checkpoint.display()))?)?;
    let metrics: Vec<MetricRecord> = match card.config.task {
        Task::NodeClf => evaluate_node_classification(&load_nodes(data)?, &card, &store)?,
        Task::LinkPred => evaluate_link_prediction(&load_mlg(data)?.network, &card, Some(&store))?,
        Task::GraphClf => evaluate_graph_classification(&ManifestSource::load(data, Split::Test)?, &card, &store)?,
    };
    for m in &metrics {
        println!("{}", serde_json::to_string(m)?);
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        save_jsonl(&metrics, &dir.join("metrics.jsonl"))?;
    }
    Ok(())
}
