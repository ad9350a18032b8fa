use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use malibo::bench::{apply_noise, sample_task, Family, NoiseSpec, TabularBenchmark};
use malibo::bo::{run_bo, Strategy};
use malibo::data::{bounding_box, incumbent_trace, MetaDataset, SearchSpace};
use malibo::meta::{meta_train, MetaModel, MetaModelConfig};
use malibo::rng::stream;

use crate::config::{ExperimentConfig, StrategyKind};
use crate::experiment::run_experiment;
use crate::report::RegretReport;
use crate::selftest;
use crate::{HarnessError, Result};

#[derive(Debug, Parser)]
#[command(name = "malibo", version, about = "Meta-learned likelihood-free Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a meta-model on a JSON-lines meta-dataset and write a checkpoint.
    MetaTrain(MetaTrainArgs),
    /// Run one strategy on one benchmark task and write its history as CSV.
    Optimize(OptimizeArgs),
    /// Run a full experiment from a config file.
    Benchmark(BenchmarkArgs),
    /// Rebuild summary.csv and plot.svg from a regret.csv.
    Report(ReportArgs),
    /// Run the numerical oracle checks.
    Selftest,
}

#[derive(Debug, Args)]
struct SpaceArgs {
    /// Search-space descriptor (JSON).
    #[arg(long, conflicts_with = "family")]
    space: Option<PathBuf>,
    /// Use the space of a synthetic family.
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
}

#[derive(Debug, Args)]
struct MetaTrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Meta-model config (JSON); missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    space: SpaceArgs,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[arg(long, value_parser = StrategyKind::parse)]
    strategy: StrategyKind,
    /// Synthetic family to draw the target task from.
    #[arg(long, conflicts_with = "table", value_parser = parse_family)]
    family: Option<Family>,
    /// Seed of the drawn target task.
    #[arg(long, default_value_t = 0)]
    task_seed: u64,
    /// Tabular benchmark file (JSON or CSV).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Meta-model checkpoint, required by `malibo`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Meta-dataset (JSON lines), required by `lfbo_bb`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    bb_top_m: usize,
    #[arg(long, default_value_t = 30)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    shared_meta: bool,
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    log_x: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    regret: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log_x: bool,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown family {s:?} (expected forrester, quadratic, branin or hartmann3d)"))
}

fn invalid(m: impl Into<String>) -> HarnessError {
    HarnessError::Validation(m.into())
}

/// Unit hypercube sized from the first observation of a JSON-lines file.
fn infer_unit_space(path: &Path) -> Result<SearchSpace> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| invalid(format!("{} is empty", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(first).map_err(|e| invalid(format!("{}: line 1: {e}", path.display())))?;
    let dim = v["obs"][0][0].as_array().map(Vec::len).ok_or_else(|| invalid(format!("{}: cannot infer the dimension", path.display())))?;
    Ok(SearchSpace::unit(dim))
}

fn resolve_space(args: &SpaceArgs, data: &Path) -> Result<SearchSpace> {
    match (&args.space, args.family) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            Ok(SearchSpace::from_json(&text)?)
        }
        (None, Some(f)) => Ok(f.space()),
        (None, None) => infer_unit_space(data),
    }
}

fn cmd_meta_train(a: &MetaTrainArgs) -> Result<()> {
    let space = resolve_space(&a.space, &a.data)?;
    let meta = MetaDataset::load_jsonl(&a.data, &space)?;
    let mut cfg: MetaModelConfig = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => MetaModelConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let (model, report) = meta_train(&meta, &cfg)?;
    model.save(&a.out)?;
    println!(
        "trained on {} observations from {} tasks: {} epochs (best {}), train loss {:.6}; wrote {}",
        report.n_train,
        meta.n_tasks(),
        report.adam.epochs_run,
        report.adam.best_epoch,
        report.final_train_loss,
        a.out.display()
    );
    Ok(())
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<()> {
    if a.budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let noise = NoiseSpec { epsilon: a.noise };
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(invalid(format!("noise {} must be finite and non-negative", a.noise)));
    }
    let (space, objective): (SearchSpace, Box<dyn Fn(&[f64]) -> f64>) = match (&a.table, a.family) {
        (Some(p), _) => {
            let t = TabularBenchmark::load(p)?;
            (t.space.clone(), Box::new(move |x: &[f64]| t.lookup(x)))
        }
        (None, Some(f)) => {
            let task = sample_task(f, &mut stream(a.task_seed, "target", 0));
            (f.space(), Box::new(move |x: &[f64]| task.function.eval(x)))
        }
        (None, None) => return Err(invalid("one of --family or --table is required")),
    };
    let strategy = match a.strategy {
        StrategyKind::Random => Strategy::RandomSearch,
        StrategyKind::Lfbo => Strategy::Lfbo(Default::default()),
        StrategyKind::LfboBb => {
            let data = a.data.as_ref().ok_or_else(|| invalid("lfbo_bb needs --data"))?;
            let meta = MetaDataset::load_jsonl(data, &space)?;
            Strategy::LfboBb(Default::default(), bounding_box(&meta, a.bb_top_m)?)
        }
        StrategyKind::Malibo => {
            let p = a.checkpoint.as_ref().ok_or_else(|| invalid("malibo needs --checkpoint"))?;
            Strategy::Malibo(std::sync::Arc::new(MetaModel::load(p)?), Default::default())
        }
    };
    let mut noise_rng = stream(a.seed, "noise", 0);
    let history = run_bo(|x| apply_noise(objective(x), noise, &mut noise_rng), &space, &strategy, a.budget, a.seed)?;

    let mut w = csv::Writer::from_path(&a.out).map_err(|e| HarnessError::csv(&a.out, e))?;
    let mut header = vec!["iteration".to_string(), "kind".into(), "fallback".into(), "y".into(), "incumbent_y".into()];
    header.extend((0..space.raw_dim()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(|e| HarnessError::csv(&a.out, e))?;
    let incumbents = incumbent_trace(&history.ys());
    for (r, inc) in history.records.iter().zip(incumbents) {
        let mut row = vec![r.iteration.to_string(), r.kind.as_str().to_string(), r.fallback.to_string(), r.y.to_string(), inc.to_string()];
        row.extend(space.decode(&r.x)?.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| HarnessError::csv(&a.out, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(&a.out, e))?;
    let best = history.records.iter().filter(|r| r.y.is_finite()).min_by(|x, y| x.y.total_cmp(&y.y));
    match best {
        Some(b) => println!("best y {} at iteration {}; wrote {}", b.y, b.iteration, a.out.display()),
        None => println!("no finite evaluations; wrote {}", a.out.display()),
    }
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    cfg.shared_meta |= a.shared_meta;
    cfg.paper_scale |= a.paper_scale;
    cfg.log_x |= a.log_x;
    let out = a.out.clone().or_else(|| cfg.out_dir.clone()).ok_or_else(|| invalid("no output directory: pass --out or set out_dir"))?;
    let report = run_experiment(&cfg)?;
    let files = report.export(&out, cfg.log_x)?;
    for s in &report.strategies {
        let last = report.summary(s).last().copied();
        if let Some(r) = last {
            println!("{s}: final mean normalized regret {:.4} ± {:.4} over {} runs", r.mean, r.stderr, report.runs(s).len());
        }
    }
    for f in report.failures() {
        eprintln!("warning: {} seed {} failed: {}", f.strategy, f.seed, f.error);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let report = RegretReport::read_regret_csv(&a.regret)?;
    std::fs::create_dir_all(&a.out).map_err(|e| HarnessError::io(&a.out, e))?;
    let summary = a.out.join("summary.csv");
    let plot = a.out.join("plot.svg");
    report.write_summary_csv(&summary)?;
    std::fs::write(&plot, report.plot(a.log_x)).map_err(|e| HarnessError::io(&plot, e))?;
    println!("wrote {}\nwrote {}", summary.display(), plot.display());
    Ok(())
}

fn cmd_selftest() -> Result<bool> {
    let checks = selftest::run_all();
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 for invalid input, 2 for failures while running.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::MetaTrain(a) => cmd_meta_train(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Report(a) => cmd_report(a),
        Command::Selftest => match cmd_selftest() {
            Ok(true) => Ok(()),
            Ok(false) => {
                let _ = std::io::stdout().flush();
                return 2;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
