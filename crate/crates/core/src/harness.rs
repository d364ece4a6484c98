//! Benchmark protocol: timed runs against a brute-force baseline and sweeps
//! that trace efficiency against recall for each method.
//!
//! The baseline is always a single-threaded exhaustive scan with the
//! original distance, one evaluation per data point. Each timed phase is
//! repeated and the fastest repetition is kept.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::datagen::{brute_force_knn, recall, smallest_k, Dataset, GroundTruth, Neighbor};
use crate::distances::DistanceSpec;
use crate::error::{Error, Result};
use crate::pruners::{evaluate_grid, evaluate_pruner, select_pruner, PrunerSpec, TuningGrid};
use crate::transform::{fit, Base, TransformSpec, TriGenFitConfig};
use crate::vptree::{SearchMode, VpTree, DEFAULT_BUCKET_SIZE};

pub const CSV_HEADER: [&str; 6] = [
    "method",
    "params",
    "recall",
    "mean_query_us",
    "speedup_wall",
    "speedup_dist",
];

/// One operating point of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub params: String,
    pub recall: f64,
    pub mean_query_us: f64,
    /// Brute-force wall time over method wall time.
    pub speedup_wall: f64,
    /// Dataset size over mean distance computations per query.
    pub speedup_dist: f64,
    pub mean_dist_comps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub bucket_size: usize,
    pub seed: u64,
    pub repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 10,
            bucket_size: DEFAULT_BUCKET_SIZE,
            seed: 0,
            repeats: 3,
        }
    }
}

/// Checks that `truth` answers `queries` against `data` with `k` neighbors.
pub fn check_truth(truth: &GroundTruth, data: &Dataset, queries: &Dataset, k: usize) -> Result<()> {
    if truth.lists.len() != queries.len() {
        return Err(Error::IncompatibleTruth(format!(
            "{} truth lists for {} queries",
            truth.lists.len(),
            queries.len()
        )));
    }
    let expected = k.min(data.len());
    if let Some((qid, l)) = truth
        .lists
        .iter()
        .enumerate()
        .find(|(_, l)| l.len() != expected)
    {
        return Err(Error::IncompatibleTruth(format!(
            "query {qid} has {} neighbors, expected {expected} (k = {k})",
            l.len()
        )));
    }
    if let Some(n) = truth.lists.iter().flatten().find(|n| n.id >= data.len()) {
        return Err(Error::IncompatibleTruth(format!(
            "neighbor id {} out of range for {} points",
            n.id,
            data.len()
        )));
    }
    Ok(())
}

/// Mean per-query time of an exhaustive single-threaded scan, fastest of
/// `repeats` passes.
pub fn time_brute_force(
    data: &Dataset,
    queries: &Dataset,
    spec: &DistanceSpec,
    k: usize,
    repeats: usize,
) -> Result<Duration> {
    data.validate_for(spec)?;
    queries.validate_for(spec)?;
    let mut best = Duration::MAX;
    for _ in 0..repeats.max(1) {
        let started = Instant::now();
        for q in queries.iter() {
            let all = data
                .iter()
                .enumerate()
                .map(|(id, x)| Neighbor {
                    id,
                    distance: spec.eval_unchecked(x, q),
                })
                .collect();
            std::hint::black_box(smallest_k(all, k));
        }
        best = best.min(started.elapsed());
    }
    Ok(best / queries.len() as u32)
}

/// Runs `pruner` over `queries` on a built index and compares it with the
/// baseline time per query.
pub fn run_on_index(
    index: &VpTree<'_>,
    queries: &Dataset,
    truth: &GroundTruth,
    pruner: &PrunerSpec,
    baseline_per_query: Duration,
    repeats: usize,
    params: String,
) -> Result<RunResult> {
    check_truth(truth, index.data(), queries, truth.k)?;
    queries.validate_for(index.spec())?;
    pruner.validate()?;
    let mut best = Duration::MAX;
    let mut ids = Vec::new();
    let mut comps = 0u64;
    for rep in 0..repeats.max(1) {
        let started = Instant::now();
        for q in queries.iter() {
            let res = index.knn_search_unchecked(q, truth.k, pruner);
            if rep == 0 {
                comps += res.stats.distance_computations;
                ids.push(res.ids());
            }
        }
        best = best.min(started.elapsed());
    }
    let per_query = best.as_secs_f64() / queries.len() as f64;
    let mean_dist_comps = comps as f64 / queries.len() as f64;
    Ok(RunResult {
        method: index.mode().name().to_string(),
        params,
        recall: recall(&ids, truth)?,
        mean_query_us: per_query * 1e6,
        speedup_wall: baseline_per_query.as_secs_f64() / per_query.max(1e-12),
        speedup_dist: index.data().len() as f64 / mean_dist_comps.max(1.0),
        mean_dist_comps,
    })
}

fn run_params(mode: &SearchMode, pruner: &PrunerSpec, k: usize) -> String {
    format!("transform={};pruner={pruner};k={k}", mode.transform())
}

/// Builds the index, times the baseline and then the method.
pub fn run(
    data: &Dataset,
    queries: &Dataset,
    truth: &GroundTruth,
    spec: &DistanceSpec,
    mode: SearchMode,
    pruner: &PrunerSpec,
    cfg: &RunConfig,
) -> Result<RunResult> {
    check_truth(truth, data, queries, cfg.k)?;
    let index = VpTree::build(data, *spec, mode, cfg.bucket_size, cfg.seed)?;
    let baseline = time_brute_force(data, queries, spec, cfg.k, cfg.repeats)?;
    run_on_index(
        &index,
        queries,
        truth,
        pruner,
        baseline,
        cfg.repeats,
        run_params(&mode, pruner, cfg.k),
    )
}

/// Writes rows under [`CSV_HEADER`].
pub fn write_csv<'r, W: Write>(
    rows: impl IntoIterator<Item = &'r RunResult>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.params.clone(),
            r.recall.to_string(),
            r.mean_query_us.to_string(),
            r.speedup_wall.to_string(),
            r.speedup_dist.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Methods traced by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    /// Tuned piecewise-linear pruner on the original distance.
    Piecewise,
    /// Tuned piecewise-linear pruner on the square root of the distance.
    Hybrid,
    TriGen0,
    TriGen1,
    /// TriGen with the metric pruner on a symmetric distance.
    TriGenSym,
}

impl SweepMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMethod::Piecewise => "piecewise",
            SweepMethod::Hybrid => "hybrid",
            SweepMethod::TriGen0 => "trigen0",
            SweepMethod::TriGen1 => "trigen1",
            SweepMethod::TriGenSym => "trigensym",
        }
    }

    /// Piecewise, hybrid and both TriGen variants for non-symmetric
    /// distances; only TriGen 1 for symmetric ones.
    pub fn defaults_for(spec: &DistanceSpec) -> Vec<SweepMethod> {
        if spec.is_symmetric() {
            vec![
                SweepMethod::Piecewise,
                SweepMethod::Hybrid,
                SweepMethod::TriGen1,
            ]
        } else {
            vec![
                SweepMethod::Piecewise,
                SweepMethod::Hybrid,
                SweepMethod::TriGen0,
                SweepMethod::TriGen1,
            ]
        }
    }

    fn is_tuned(&self) -> bool {
        matches!(self, SweepMethod::Piecewise | SweepMethod::Hybrid)
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "piecewise" => SweepMethod::Piecewise,
            "hybrid" => SweepMethod::Hybrid,
            "trigen0" => SweepMethod::TriGen0,
            "trigen1" => SweepMethod::TriGen1,
            "trigensym" => SweepMethod::TriGenSym,
            other => return Err(Error::invalid(format!("unknown sweep method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub methods: Vec<SweepMethod>,
    /// Operating points of the tuned methods.
    pub target_recalls: Vec<f64>,
    /// Operating points of the TriGen methods.
    pub trigen_accs: Vec<f64>,
    pub run: RunConfig,
    pub grid: TuningGrid,
    /// Template for every fit; `trigen_acc` is overwritten per operating point.
    pub trigen: TriGenFitConfig,
    pub parallel: bool,
}

impl SweepConfig {
    pub fn default_for(spec: &DistanceSpec) -> Self {
        SweepConfig {
            methods: SweepMethod::defaults_for(spec),
            target_recalls: vec![0.5, 0.7, 0.8, 0.9, 0.95],
            trigen_accs: vec![0.8, 0.9, 0.95, 0.99, 1.0],
            run: RunConfig::default(),
            grid: TuningGrid::default(),
            trigen: TriGenFitConfig::default(),
            parallel: false,
        }
    }
}

/// A sweep row plus the training-side numbers behind its selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub result: RunResult,
    /// Target recall or TriGen accuracy that produced this row.
    pub operating_point: f64,
    pub train_recall: f64,
    pub train_mean_dist_comps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Grouped by method in configuration order, ascending recall within a
    /// method.
    pub rows: Vec<SweepRow>,
    /// `(method, operating point, reason)` for points that produced no row.
    pub skipped: Vec<(SweepMethod, f64, String)>,
}

/// Traces every configured method over its operating points. Tuned methods
/// pick their pruner on `train_queries`; TriGen methods fit their transform
/// on `data` and search with the metric pruner. All rows are measured on
/// `queries` against `truth`.
pub fn sweep(
    data: &Dataset,
    queries: &Dataset,
    train_queries: &Dataset,
    truth: &GroundTruth,
    spec: &DistanceSpec,
    cfg: &SweepConfig,
) -> Result<SweepOutcome> {
    let k = cfg.run.k;
    check_truth(truth, data, queries, k)?;
    let train_truth = brute_force_knn(data, train_queries, spec, k, cfg.parallel)?;
    let baseline = time_brute_force(data, queries, spec, k, cfg.run.repeats)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();

    for &method in &cfg.methods {
        let mut method_rows = Vec::new();
        if method.is_tuned() {
            let base = if method == SweepMethod::Hybrid {
                Base::Sqrt
            } else {
                Base::Identity
            };
            let mode = SearchMode::Plain(TransformSpec::new(base, None, Default::default())?);
            let index = VpTree::build(data, *spec, mode, cfg.run.bucket_size, cfg.run.seed)?;
            let grid_rows =
                evaluate_grid(&index, train_queries, &train_truth, &cfg.grid, cfg.parallel)?;
            for &target in &cfg.target_recalls {
                let report = select_pruner(grid_rows.clone(), target);
                let mut result = run_on_index(
                    &index,
                    queries,
                    truth,
                    &report.pruner,
                    baseline,
                    cfg.run.repeats,
                    format!("target={target};{}", run_params(&mode, &report.pruner, k)),
                )?;
                result.method = method.name().to_string();
                method_rows.push(SweepRow {
                    result,
                    operating_point: target,
                    train_recall: report.recall,
                    train_mean_dist_comps: report.mean_dist_comps,
                });
            }
        } else {
            for &acc in &cfg.trigen_accs {
                let fit_cfg = TriGenFitConfig {
                    trigen_acc: acc,
                    ..cfg.trigen.clone()
                };
                let fitted = match fit(data, spec, &fit_cfg) {
                    Ok(f) => f,
                    Err(e @ Error::NoFeasibleTransform { .. }) => {
                        skipped.push((method, acc, e.to_string()));
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let mode = SearchMode::from_name(method.name(), fitted.transform)?;
                let index = VpTree::build(data, *spec, mode, cfg.run.bucket_size, cfg.run.seed)?;
                let pruner = PrunerSpec::Metric;
                let (train_recall, train_mean_dist_comps) =
                    evaluate_pruner(&index, train_queries, &train_truth, &pruner)?;
                let result = run_on_index(
                    &index,
                    queries,
                    truth,
                    &pruner,
                    baseline,
                    cfg.run.repeats,
                    format!("acc={acc};{}", run_params(&mode, &pruner, k)),
                )?;
                method_rows.push(SweepRow {
                    result,
                    operating_point: acc,
                    train_recall,
                    train_mean_dist_comps,
                });
            }
        }
        method_rows.sort_by(|a, b| a.result.recall.total_cmp(&b.result.recall));
        rows.extend(method_rows);
    }
    Ok(SweepOutcome { rows, skipped })
}
