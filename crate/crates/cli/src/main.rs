//! `nmvp`: command-line front end for data generation, ground truth, TriGen
//! fitting, pruner tuning and timed benchmark runs.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use nmvp_core::datagen::DEFAULT_FLOOR;
use nmvp_core::harness::{self, SweepOutcome};
use nmvp_core::pruners::TuningGrid;
use nmvp_core::{
    brute_force_knn, gen_rand_hist, load_dataset, load_ground_truth, save_dataset,
    save_ground_truth, DistanceSpec, Error, PrunerSpec, RunConfig, SearchMode, SweepConfig,
    SweepMethod, TransformSpec, TriGenFitConfig, TuneConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "nmvp",
    version,
    about = "k-NN search under non-metric distances with a VP-tree"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample histograms uniformly from the simplex.
    GenData {
        #[arg(long, value_parser = at_least(1))]
        n: usize,
        #[arg(long, value_parser = at_least(2))]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_FLOOR, value_parser = non_negative)]
        floor: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact k nearest neighbors by exhaustive search.
    GroundTruth {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        dist: DistanceSpec,
        #[arg(long, default_value_t = 10, value_parser = at_least(1))]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Spread queries over all cores.
        #[arg(long)]
        parallel: bool,
    },
    /// Fit a TriGen transform that makes the distance nearly metric.
    TrigenFit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        dist: DistanceSpec,
        #[arg(long, default_value_t = 1.0, value_parser = unit_closed)]
        acc: f64,
        #[arg(long, default_value_t = 5000, value_parser = at_least(3))]
        samples: usize,
        #[arg(long, default_value_t = 10_000, value_parser = at_least(1))]
        triples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Receives the transform in text form.
        #[arg(long)]
        out: PathBuf,
        /// Optional TSV with the winner's statistics.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time one method against the brute-force baseline and emit a CSV row.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        dist: DistanceSpec,
        #[arg(long, default_value = "plain", value_parser = mode_name)]
        mode: String,
        /// Transform text form, or a file holding one.
        #[arg(long, default_value = "identity")]
        transform: String,
        /// Pruner text form, or a file holding one.
        #[arg(long, default_value = "metric")]
        pruner: String,
        #[arg(long, default_value_t = 10, value_parser = at_least(1))]
        k: usize,
        #[arg(long, default_value_t = 50, value_parser = at_least(1))]
        bucket: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3, value_parser = at_least(1))]
        repeats: usize,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune the piecewise pruner for a target recall on training queries.
    Tune {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        train_queries: PathBuf,
        #[arg(long)]
        dist: DistanceSpec,
        #[arg(long, default_value = "plain", value_parser = mode_name)]
        mode: String,
        /// Transform text form, or a file holding one.
        #[arg(long, default_value = "identity")]
        transform: String,
        #[arg(long, default_value_t = 10, value_parser = at_least(1))]
        k: usize,
        #[arg(long, default_value_t = 0.9, value_parser = unit_open_closed)]
        target_recall: f64,
        #[arg(long, default_value_t = 50, value_parser = at_least(1))]
        bucket: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Receives the pruner in text form.
        #[arg(long)]
        out: PathBuf,
        /// Optional TSV with every grid point.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        parallel: bool,
    },
    /// Trace recall against efficiency for several methods.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        train_queries: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        dist: DistanceSpec,
        /// TOML file overriding the default operating points.
        #[arg(long)]
        config_grid: Option<PathBuf>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional TSV with the training-side numbers of each row.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        parallel: bool,
    },
    /// Sample the empirical decision function of one pivot.
    DecisionScatter {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        dist: DistanceSpec,
        #[arg(long, default_value = "plain", value_parser = mode_name)]
        mode: String,
        #[arg(long, default_value = "identity")]
        transform: String,
        #[arg(long, default_value_t = 0)]
        pivot: usize,
        /// Split radius; the median pivot distance when absent.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Optional overrides read by `sweep --config-grid`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    methods: Option<Vec<String>>,
    target_recalls: Option<Vec<f64>>,
    trigen_accs: Option<Vec<f64>>,
    alphas: Option<Vec<f64>>,
    betas: Option<Vec<u32>>,
    k: Option<usize>,
    bucket: Option<usize>,
    seed: Option<u64>,
    repeats: Option<usize>,
    samples: Option<usize>,
    triples: Option<usize>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn at_least(min: usize) -> impl Fn(&str) -> Result<usize, String> + Clone {
    move |s| {
        let v: usize = s.parse().map_err(|e| format!("{e}"))?;
        if v < min {
            return Err(format!("must be at least {min}"));
        }
        Ok(v)
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() {
        return Err("must be finite".into());
    }
    Ok(v)
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v < 0.0 {
        return Err("must be non-negative".into());
    }
    Ok(v)
}

fn unit_closed(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !(0.0..=1.0).contains(&v) {
        return Err("must lie in [0, 1]".into());
    }
    Ok(v)
}

fn unit_open_closed(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !(v > 0.0 && v <= 1.0) {
        return Err("must lie in (0, 1]".into());
    }
    Ok(v)
}

fn mode_name(s: &str) -> Result<String, String> {
    if SearchMode::NAMES.contains(&s) {
        Ok(s.to_string())
    } else {
        Err(format!("expected one of {}", SearchMode::NAMES.join(", ")))
    }
}

/// Reads `value` as a file when one exists at that path, otherwise uses it
/// verbatim.
fn inline_or_file(value: &str) -> Result<String, Failure> {
    let path = Path::new(value);
    if path.is_file() {
        Ok(std::fs::read_to_string(path)?.trim().to_string())
    } else {
        Ok(value.to_string())
    }
}

fn parse_transform(value: &str) -> Result<TransformSpec, Failure> {
    inline_or_file(value)?
        .parse()
        .map_err(|e: Error| Failure::Usage(format!("--transform: {e}")))
}

fn parse_pruner(value: &str) -> Result<PrunerSpec, Failure> {
    inline_or_file(value)?
        .parse()
        .map_err(|e: Error| Failure::Usage(format!("--pruner: {e}")))
}

fn with_file<T>(path: &Path, result: nmvp_core::Result<T>) -> Result<T, Failure> {
    result.map_err(|e| match Failure::from(e) {
        Failure::Data(m) => Failure::Data(format!("{}: {m}", path.display())),
        usage => usage,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenData {
            n,
            dim,
            seed,
            floor,
            out,
        } => {
            let data = gen_rand_hist(n, dim, seed, floor)?;
            with_file(&out, save_dataset(&data, &out))
        }
        Command::GroundTruth {
            data,
            queries,
            dist,
            k,
            out,
            parallel,
        } => {
            let points = with_file(&data, load_dataset(&data))?;
            let qs = with_file(&queries, load_dataset(&queries))?;
            let truth = brute_force_knn(&points, &qs, &dist, k, parallel)?;
            with_file(&out, save_ground_truth(&truth, &out))
        }
        Command::TrigenFit {
            data,
            dist,
            acc,
            samples,
            triples,
            seed,
            out,
            report,
        } => {
            let points = with_file(&data, load_dataset(&data))?;
            let cfg = TriGenFitConfig {
                trigen_acc: acc,
                sample_qty: samples,
                triplet_qty: triples,
                seed,
                ..TriGenFitConfig::default()
            };
            let fitted = nmvp_core::fit(&points, &dist, &cfg)?;
            let mut w = create(&out)?;
            writeln!(w, "{}", fitted.transform)?;
            w.flush()?;
            if let Some(path) = report {
                fitted.write_tsv(create(&path)?)?;
            }
            Ok(())
        }
        Command::Run {
            data,
            queries,
            truth,
            dist,
            mode,
            transform,
            pruner,
            k,
            bucket,
            seed,
            repeats,
            out,
        } => {
            let mode = SearchMode::from_name(&mode, parse_transform(&transform)?)?;
            let pruner = parse_pruner(&pruner)?;
            let points = with_file(&data, load_dataset(&data))?;
            let qs = with_file(&queries, load_dataset(&queries))?;
            let gt = with_file(&truth, load_ground_truth(&truth))?;
            let cfg = RunConfig {
                k,
                bucket_size: bucket,
                seed,
                repeats,
            };
            let row = harness::run(&points, &qs, &gt, &dist, mode, &pruner, &cfg)?;
            harness::write_csv([&row], output(out.as_deref())?)?;
            Ok(())
        }
        Command::Tune {
            data,
            train_queries,
            dist,
            mode,
            transform,
            k,
            target_recall,
            bucket,
            seed,
            out,
            report,
            parallel,
        } => {
            let mode = SearchMode::from_name(&mode, parse_transform(&transform)?)?;
            let points = with_file(&data, load_dataset(&data))?;
            let train = with_file(&train_queries, load_dataset(&train_queries))?;
            let cfg = TuneConfig {
                k,
                target_recall,
                bucket_size: bucket,
                seed,
                parallel,
                ..TuneConfig::default()
            };
            let tuned = nmvp_core::tune(&points, &train, &dist, mode, &cfg)?;
            if !tuned.target_met {
                eprintln!(
                    "warning: no grid point reached recall {target_recall}; best recall {}",
                    tuned.recall
                );
            }
            let mut w = create(&out)?;
            writeln!(w, "{}", tuned.pruner)?;
            w.flush()?;
            if let Some(path) = report {
                tuned.write_tsv(create(&path)?)?;
            }
            Ok(())
        }
        Command::Sweep {
            data,
            queries,
            train_queries,
            truth,
            dist,
            config_grid,
            out,
            report,
            parallel,
        } => {
            let mut cfg = SweepConfig::default_for(&dist);
            cfg.parallel = parallel;
            if let Some(path) = config_grid {
                apply_grid_file(&mut cfg, &path)?;
            }
            let points = with_file(&data, load_dataset(&data))?;
            let qs = with_file(&queries, load_dataset(&queries))?;
            let train = with_file(&train_queries, load_dataset(&train_queries))?;
            let gt = with_file(&truth, load_ground_truth(&truth))?;
            let outcome = harness::sweep(&points, &qs, &train, &gt, &dist, &cfg)?;
            for (method, point, reason) in &outcome.skipped {
                eprintln!("skipped {method} at {point}: {reason}");
            }
            harness::write_csv(
                outcome.rows.iter().map(|r| &r.result),
                output(out.as_deref())?,
            )?;
            if let Some(path) = report {
                write_sweep_report(&outcome, create(&path)?)?;
            }
            Ok(())
        }
        Command::DecisionScatter {
            data,
            probes,
            dist,
            mode,
            transform,
            pivot,
            radius,
            out,
        } => {
            let mode = SearchMode::from_name(&mode, parse_transform(&transform)?)?;
            let points = with_file(&data, load_dataset(&data))?;
            let qs = with_file(&probes, load_dataset(&probes))?;
            let scatter =
                nmvp_core::sample_decision_function(&points, &dist, mode, pivot, radius, &qs)?;
            scatter.write_tsv(create(&out)?)?;
            Ok(())
        }
    }
}

fn apply_grid_file(cfg: &mut SweepConfig, path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let grid: GridFile =
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if let Some(methods) = grid.methods {
        cfg.methods = methods
            .iter()
            .map(|m| m.parse::<SweepMethod>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(v) = grid.target_recalls {
        cfg.target_recalls = v;
    }
    if let Some(v) = grid.trigen_accs {
        cfg.trigen_accs = v;
    }
    if grid.alphas.is_some() || grid.betas.is_some() {
        let default = TuningGrid::default();
        cfg.grid = TuningGrid {
            alphas: grid.alphas.unwrap_or(default.alphas),
            betas: grid.betas.unwrap_or(default.betas),
        };
    }
    if let Some(v) = grid.k {
        cfg.run.k = v;
    }
    if let Some(v) = grid.bucket {
        cfg.run.bucket_size = v;
    }
    if let Some(v) = grid.seed {
        cfg.run.seed = v;
        cfg.trigen.seed = v;
    }
    if let Some(v) = grid.repeats {
        cfg.run.repeats = v;
    }
    if let Some(v) = grid.samples {
        cfg.trigen.sample_qty = v;
    }
    if let Some(v) = grid.triples {
        cfg.trigen.triplet_qty = v;
    }
    let bad = |what: &str| Failure::Usage(format!("{}: {what}", path.display()));
    if cfg.methods.is_empty() {
        return Err(bad("methods is empty"));
    }
    if cfg.target_recalls.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(bad("target_recalls must lie in (0, 1]"));
    }
    if cfg.trigen_accs.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(bad("trigen_accs must lie in [0, 1]"));
    }
    if cfg.run.k == 0 || cfg.run.bucket_size == 0 || cfg.run.repeats == 0 {
        return Err(bad("k, bucket and repeats must be positive"));
    }
    Ok(())
}

fn write_sweep_report(outcome: &SweepOutcome, mut w: impl Write) -> Result<(), Failure> {
    writeln!(
        w,
        "method\toperating_point\ttrain_recall\ttrain_mean_dist_comps\trecall\tspeedup_dist"
    )?;
    for row in &outcome.rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            row.result.method,
            row.operating_point,
            row.train_recall,
            row.train_mean_dist_comps,
            row.result.recall,
            row.result.speedup_dist
        )?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
