//! `psimgnn`: dataset generation, GED, training, evaluation and audits.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
//! Relative output paths resolve against `$PSIMGNN_OUT_ROOT` when it is set.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use psimgnn::autodiff::Checkpoint;
use psimgnn::dataset::{
    build_ba_dataset, generate_ba, load_manifest, save_manifest, write_atomic, DatasetConfig, GroundTruthOptions,
};
use psimgnn::ged::{
    beam_ged, bipartite_ged, exact_ged_astar, nged_similarity, AstarOptions, EditCostModel, GedMethod, Solver,
    DEFAULT_BEAM_WIDTH, DEFAULT_NODE_LIMIT,
};
use psimgnn::graph::{load_graph, Graph};
use psimgnn::model::{grad_check_pair, ModelConfig, PSimGnn, GRAD_CHECK_STEP};
use psimgnn::partition::{fluidc, DEFAULT_MAX_SWEEPS};
use psimgnn::train::eval::{bench_variants, evaluate, DEFAULT_KS};
use psimgnn::train::metrics::ranking_metrics;
use psimgnn::train::{history_csv, predict_pairs, train_on_manifest, PreparedSet, TrainConfig};
use serde_json::json;

const OUT_ROOT_VAR: &str = "PSIMGNN_OUT_ROOT";

#[derive(Parser)]
#[command(name = "psimgnn", version, about = "Partition-based neural graph similarity")]
struct Cli {
    /// Worker threads for pair-parallel work.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a BA dataset with ground-truth GEDs and a split.
    Gen(GenArgs),
    /// Partition one graph with fluid communities.
    Partition(PartitionArgs),
    /// Edit distance between two graphs.
    Ged(GedArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Rank the database for one test query.
    Rank(RankArgs),
    /// Scoring time for m in {0, k, k^2} on random BA pairs.
    Bench(BenchArgs),
    /// Finite-difference audit of the full model on a 10-node pair.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    basics: usize,
    /// Trimmed graphs per basic graph.
    #[arg(long, default_value_t = 99)]
    trims: usize,
    #[arg(long, default_value_t = 1)]
    ba_m: usize,
    #[arg(long, default_value_t = 10)]
    max_trim_ged: u32,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam_width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
}

#[derive(Args)]
struct GedArgs {
    #[arg(long)]
    g1: PathBuf,
    #[arg(long)]
    g2: PathBuf,
    /// exact, hungarian, vj or beam.
    #[arg(long, default_value = "exact")]
    method: GedMethod,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam_width: usize,
    /// Node limit for the exact search.
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    node_limit: usize,
    /// Exact search timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Model config JSON; defaults when omitted.
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Training config JSON; defaults when omitted.
    #[arg(long)]
    train_config: Option<PathBuf>,
    /// Overrides the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the iteration count.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to `model_config.json` next to the checkpoint.
    #[arg(long)]
    model_config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    ks: Vec<usize>,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Test graph id.
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = GRAD_CHECK_STEP)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_ROOT_VAR) {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_graph(path: &Path) -> anyhow::Result<Graph> {
    load_graph(&read(path)?).with_context(|| format!("loading graph {}", path.display()))
}

fn model_config(path: Option<&Path>) -> anyhow::Result<ModelConfig> {
    match path {
        Some(p) => ModelConfig::from_json(&read(p)?).with_context(|| format!("model config {}", p.display())),
        None => Ok(ModelConfig::default()),
    }
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    Ok(write_atomic(path, bytes)?)
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let config = DatasetConfig {
        ba_m: a.ba_m,
        basics: a.basics,
        trims_per_basic: a.trims,
        max_trim_ged: a.max_trim_ged,
        ground_truth: GroundTruthOptions {
            beam_width: a.beam_width,
            ..Default::default()
        },
        ..DatasetConfig::ba(a.n, a.seed)
    };
    let manifest = build_ba_dataset(&config)?;
    let out = out_path(&a.out);
    save_manifest(&manifest, &out)?;
    let s = manifest.splits()?;
    println!(
        "{} graphs, {} pairs, split {}/{}/{} -> {}",
        manifest.graphs.len(),
        manifest.pairs.len(),
        s.train.len(),
        s.val.len(),
        s.test.len(),
        out.display()
    );
    Ok(())
}

fn partition(a: PartitionArgs) -> anyhow::Result<()> {
    let g = read_graph(&a.graph)?;
    let r = fluidc(&g, a.k, a.seed, a.max_sweeps)?;
    println!("{}", String::from_utf8(r.to_json())?);
    Ok(())
}

fn ged(a: GedArgs) -> anyhow::Result<()> {
    let g1 = read_graph(&a.g1)?;
    let g2 = read_graph(&a.g2)?;
    let cost = EditCostModel::unit();
    let r = match a.method {
        GedMethod::ExactAstar => exact_ged_astar(
            &g1,
            &g2,
            &cost,
            AstarOptions {
                node_limit: a.node_limit,
                timeout: a.timeout.map(Duration::from_secs_f64),
            },
        )?,
        GedMethod::Hungarian => bipartite_ged(&g1, &g2, &cost, Solver::Hungarian)?,
        GedMethod::Vj => bipartite_ged(&g1, &g2, &cost, Solver::Vj)?,
        GedMethod::Beam => beam_ged(&g1, &g2, &cost, a.beam_width)?,
        GedMethod::TrimBound => bail!("trim bounds come from dataset generation, not from a graph pair"),
    };
    let (nged, sim) = nged_similarity(r.value, g1.node_count(), g2.node_count())?;
    let record = json!({
        "g1": g1.id(),
        "g2": g2.id(),
        "method": r.method.as_str(),
        "ged": r.value,
        "nged": nged,
        "sim": sim,
    });
    println!("{record}");
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let manifest = load_manifest(&a.dataset)?;
    let mconf = model_config(a.model_config.as_deref())?;
    let mut tconf: TrainConfig = match &a.train_config {
        Some(p) => serde_json::from_slice(&read(p)?).with_context(|| format!("train config {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        tconf.seed = s;
    }
    if let Some(n) = a.iterations {
        tconf.iterations = n;
    }
    tconf.validate()?;
    let mut model = PSimGnn::new(mconf.clone())?;
    let (outcome, _) = train_on_manifest(&mut model, &manifest, &tconf)?;
    let out = out_path(&a.out);
    create_dir(&out)?;
    write(&out.join("model_config.json"), &mconf.to_json())?;
    write(&out.join("train_config.json"), &serde_json::to_vec_pretty(&tconf)?)?;
    write(&out.join("history.csv"), history_csv(&outcome.history).as_bytes())?;
    let summary = json!({
        "best_iteration": outcome.best_iteration,
        "best_val_loss": outcome.best_val_loss,
        "final_val_loss": outcome.final_val_loss,
        "iterations_run": outcome.history.len(),
    });
    write(&out.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    write(&out.join("checkpoint.json"), &outcome.best.to_json())?;
    println!(
        "best val loss {:.6} at iteration {} -> {}",
        outcome.best_val_loss,
        outcome.best_iteration,
        out.display()
    );
    Ok(())
}

fn load_model(a: &ModelArgs) -> anyhow::Result<PSimGnn> {
    let config_path = match &a.model_config {
        Some(p) => p.clone(),
        None => a.checkpoint.with_file_name("model_config.json"),
    };
    let config = model_config(Some(&config_path))?;
    let ckpt = Checkpoint::from_json(&read(&a.checkpoint)?)
        .with_context(|| format!("checkpoint {}", a.checkpoint.display()))?;
    Ok(PSimGnn::from_checkpoint(config, &ckpt)?)
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let manifest = load_manifest(&a.model.dataset)?;
    let model = load_model(&a.model)?;
    let set = PreparedSet::new(&model, &manifest)?;
    let report = evaluate(&model, &set, &manifest, &a.ks)?;
    let out = out_path(&a.report);
    create_dir(&out)?;
    write(&out.join("report.csv"), report.to_csv().as_bytes())?;
    write(&out.join("report.json"), &report.to_json())?;
    print!("{}", report.to_csv());
    Ok(())
}

fn rank(a: RankArgs) -> anyhow::Result<()> {
    let manifest = load_manifest(&a.model.dataset)?;
    let splits = manifest.splits()?;
    if !splits.test.contains(&a.query) {
        bail!("query {:?} is not a test graph", a.query);
    }
    let model = load_model(&a.model)?;
    let set = PreparedSet::new(&model, &manifest)?;
    let database = splits.database();
    let pairs = set.pairs(&manifest.pairs_between(std::slice::from_ref(&a.query), &database)?)?;
    let pred = predict_pairs(&model, &set, &pairs)?;
    let truth: Vec<f64> = pairs.iter().map(|p| p.target).collect();
    let top = a.top.min(database.len()).max(1);
    let m = ranking_metrics(&a.query, &database, &pred, &truth, &[top])?;
    let mut order: Vec<usize> = (0..database.len()).collect();
    order.sort_by(|&x, &y| pred[y].total_cmp(&pred[x]).then(database[x].cmp(&database[y])));
    println!("rank,id,predicted,true_sim");
    for (r, &i) in order.iter().take(top).enumerate() {
        println!("{},{},{},{}", r + 1, database[i], pred[i], truth[i]);
    }
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
    eprintln!("rho {} tau {} p@{top} {:.4}", fmt(m.rho), fmt(m.tau), m.p_at_k[0].1);
    Ok(())
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let config = model_config(a.model_config.as_deref())?;
    let model = PSimGnn::new(config.clone())?;
    let mut pairs = Vec::with_capacity(a.pairs);
    for i in 0..a.pairs as u64 {
        let s = a.seed.wrapping_add(4 * i);
        let g1 = generate_ba(a.n, 1, s)?;
        let g2 = generate_ba(a.n, 1, s + 1)?;
        pairs.push((model.prepare(&g1, s + 2)?, model.prepare(&g2, s + 3)?));
    }
    let timings = bench_variants(&config, &pairs, a.repetitions)?;
    println!("{}", serde_json::to_string_pretty(&timings)?);
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> anyhow::Result<ExitCode> {
    let config = model_config(a.model_config.as_deref())?;
    let mut model = PSimGnn::new(config)?;
    let g1 = generate_ba(10, 2, a.seed)?;
    let g2 = generate_ba(10, 2, a.seed.wrapping_add(1))?;
    let p1 = model.prepare(&g1, a.seed)?;
    let p2 = model.prepare(&g2, a.seed.wrapping_add(1))?;
    let r = grad_check_pair(&mut model, &p1, &p2, a.step)?;
    let pass = r.max_rel_error < a.tolerance;
    let worst = r.worst.map(|(name, i)| format!("{name}[{i}]")).unwrap_or_default();
    println!(
        "{}",
        json!({
            "max_rel_error": r.max_rel_error,
            "worst": worst,
            "coordinates": r.coordinates,
            "tolerance": a.tolerance,
            "pass": pass,
        })
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
        .context("configuring the thread pool")?;
    match cli.command {
        Command::Gen(a) => gen(a)?,
        Command::Partition(a) => partition(a)?,
        Command::Ged(a) => ged(a)?,
        Command::Train(a) => train(a)?,
        Command::Eval(a) => eval(a)?,
        Command::Rank(a) => rank(a)?,
        Command::Bench(a) => bench(a)?,
        Command::Gradcheck(a) => return gradcheck(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(psimgnn::is_numeric_failure);
    if numeric {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
