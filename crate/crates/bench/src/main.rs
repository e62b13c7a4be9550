use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rpforest::io::{load_svmlight_multilabel, make_split_indices};
use rpforest::metrics::lrap_detailed;
use rpforest::{DataSet, Ensemble};
use rpforest_bench::decompose::DecomposeSettings;
use rpforest_bench::{expand_grid, read_rows, repeat_seed, run_grid, summarize, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rpforest", version, about = "Tree ensembles on projected output spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Data file (svmlight multi-label, optionally .gz); for `summarize`, the grid CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output path; stdout when omitted (except `fit`, which then skips saving).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the first grid point on the first split, report LRAP, save the model.
    Fit(Common),
    /// Run every grid point on every split and write one CSV row per run.
    Grid(Common),
    /// Aggregate a grid CSV per grid point.
    Summarize {
        #[command(flatten)]
        common: Common,
        /// Grid point id used as the comparison baseline.
        #[arg(long)]
        baseline: Option<usize>,
    },
    /// Monte Carlo bias/variance decomposition on a synthetic problem.
    Decompose(Common),
}

fn experiment(common: &Common, required: bool) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None if required => bail!("--config is required"),
        None => ExperimentConfig::from_toml_str("split = \"holdout\"\nrepeats = 1")?,
    };
    if let Some(d) = &common.data {
        cfg.data = Some(d.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn load(cfg: &ExperimentConfig) -> Result<(DataSet, f64)> {
    let path = cfg.data.as_deref().context("no data file (use --data or `data` in the config)")?;
    let start = Instant::now();
    let ds = load_svmlight_multilabel(path).with_context(|| format!("loading {}", path.display()))?;
    let secs = start.elapsed().as_secs_f64();
    log::info!(
        "loaded {}: n={} p={} d={} in {secs:.3}s",
        path.display(),
        ds.sample_count(),
        ds.feature_count(),
        ds.label_count()
    );
    Ok((ds, secs))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn fit(common: &Common) -> Result<()> {
    let cfg = experiment(common, false)?;
    let (ds, load_seconds) = load(&cfg)?;
    let point = expand_grid(&cfg, ds.feature_count(), ds.label_count())?
        .into_iter()
        .next()
        .context("empty grid")?;
    let n = ds.sample_count();
    let split = make_split_indices(n, &cfg.split_plan(n), cfg.seed)?
        .into_iter()
        .next()
        .context("no split")?;
    let (train, test) = split.views(&ds)?;
    let ens_cfg = point.ensemble_config(ds.label_count(), repeat_seed(cfg.seed, 0), cfg.threads);
    let (model, timing) = Ensemble::fit_timed(&train, &ens_cfg)?;
    let score = lrap_detailed(&model.predict(&test)?, &test.labels())?;
    println!(
        "lrap={:.6} retained={} n_train={} n_test={} load_seconds={load_seconds:.3} project_seconds={:.3} grow_seconds={:.3}",
        score.score,
        score.retained,
        train.len(),
        test.len(),
        timing.generate_project_seconds,
        timing.grow_seconds
    );
    if let Some(out) = &common.out {
        model.save(out)?;
    }
    Ok(())
}

fn grid(common: &Common) -> Result<()> {
    let cfg = experiment(common, true)?;
    let (ds, load_seconds) = load(&cfg)?;
    let outcome = run_grid(&cfg, &ds, load_seconds, output(common.out.as_deref())?)?;
    log::info!("{} rows written, {} grid points aborted", outcome.rows, outcome.failures.len());
    if outcome.rows == 0 {
        bail!("every grid point failed");
    }
    Ok(())
}

fn summarize_cmd(common: &Common, baseline: Option<usize>) -> Result<()> {
    let path = common.data.as_deref().context("--data must name the grid CSV")?;
    let rows = read_rows(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
    let table = summarize(&rows, baseline)?;
    let mut w = csv::Writer::from_writer(output(common.out.as_deref())?);
    for row in &table {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn decompose(common: &Common) -> Result<()> {
    let mut settings = match &common.config {
        Some(p) => DecomposeSettings::from_toml_str(&std::fs::read_to_string(p)?)?,
        None => DecomposeSettings::default(),
    };
    if let Some(s) = common.seed {
        settings.seed = s;
    }
    if let Some(t) = common.threads {
        settings.threads = t;
    }
    let report = settings.run()?;
    report.write_csv(output(common.out.as_deref())?)?;
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(c) => fit(c),
        Command::Grid(c) => grid(c),
        Command::Summarize { common, baseline } => summarize_cmd(common, *baseline),
        Command::Decompose(c) => decompose(c),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
