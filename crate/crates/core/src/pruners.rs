//! Pruning decision functions and their tuning.
//!
//! At an internal node with pivot `π` and radius `R`, the search visits the
//! partition that does not contain the query only when the current query
//! radius `r` satisfies `r >= D(x)`, where `x` is the pivot-query distance.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::datagen::{brute_force_knn, recall, Dataset, GroundTruth};
use crate::distances::DistanceSpec;
use crate::error::{Error, Result};
use crate::params::Tagged;
use crate::vptree::{CountingEvaluator, SearchMode, VpTree};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrunerSpec {
    /// `|R - x|`, exact for metric distances.
    Metric,
    /// `α_left·|x - R|^β` for `x <= R`, `α_right·|x - R|^β` otherwise.
    Piecewise {
        alpha_left: f64,
        alpha_right: f64,
        beta: u32,
    },
    /// Always 0: both partitions are always visited.
    NeverPrune,
}

impl PrunerSpec {
    pub fn piecewise(alpha_left: f64, alpha_right: f64, beta: u32) -> Result<Self> {
        let p = PrunerSpec::Piecewise {
            alpha_left,
            alpha_right,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let PrunerSpec::Piecewise {
            alpha_left,
            alpha_right,
            beta,
        } = *self
        {
            if !(alpha_left.is_finite()
                && alpha_left >= 0.0
                && alpha_right.is_finite()
                && alpha_right >= 0.0)
            {
                return Err(Error::invalid(format!(
                    "alphas must be finite and non-negative, got {alpha_left}, {alpha_right}"
                )));
            }
            if beta < 1 {
                return Err(Error::invalid("beta must be a positive integer"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn decision(&self, x: f64, radius: f64) -> f64 {
        match *self {
            PrunerSpec::Metric => (radius - x).abs(),
            PrunerSpec::NeverPrune => 0.0,
            PrunerSpec::Piecewise {
                alpha_left,
                alpha_right,
                beta,
            } => {
                let gap = (x - radius).abs();
                let gap = if beta == 1 {
                    gap
                } else {
                    gap.powi(beta as i32)
                };
                if x <= radius {
                    alpha_left * gap
                } else {
                    alpha_right * gap
                }
            }
        }
    }

    /// Multiplies both alphas by `c`; other pruners are returned unchanged.
    pub fn scaled(&self, c: f64) -> PrunerSpec {
        match *self {
            PrunerSpec::Piecewise {
                alpha_left,
                alpha_right,
                beta,
            } => PrunerSpec::Piecewise {
                alpha_left: alpha_left * c,
                alpha_right: alpha_right * c,
                beta,
            },
            other => other,
        }
    }
}

impl fmt::Display for PrunerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrunerSpec::Metric => f.write_str("metric"),
            PrunerSpec::NeverPrune => f.write_str("never"),
            PrunerSpec::Piecewise {
                alpha_left,
                alpha_right,
                beta,
            } => write!(f, "piecewise:al={alpha_left},ar={alpha_right},beta={beta}"),
        }
    }
}

impl FromStr for PrunerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = Tagged::parse(s)?;
        match t.name {
            "metric" => {
                t.only(&[])?;
                Ok(PrunerSpec::Metric)
            }
            "never" => {
                t.only(&[])?;
                Ok(PrunerSpec::NeverPrune)
            }
            "piecewise" => {
                let t = t.only(&["al", "ar", "beta"])?;
                PrunerSpec::piecewise(t.f64("al")?, t.f64("ar")?, t.u32("beta")?)
            }
            other => Err(Error::invalid(format!("unknown pruner `{other}`"))),
        }
    }
}

/// Candidate parameters for [`tune`].
#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<u32>,
}

impl Default for TuningGrid {
    /// 0.125 to 8 in multiplicative steps of √2, β = 1.
    fn default() -> Self {
        let alphas = (0..13)
            .map(|i: i32| {
                let even = 0.125 * 2f64.powi(i / 2);
                if i % 2 == 0 {
                    even
                } else {
                    even * std::f64::consts::SQRT_2
                }
            })
            .collect();
        TuningGrid {
            alphas,
            betas: vec![1],
        }
    }
}

impl TuningGrid {
    /// Every `(α_left, α_right, β)` in row-major order.
    pub fn pruners(&self) -> Vec<PrunerSpec> {
        let mut out = Vec::with_capacity(self.betas.len() * self.alphas.len() * self.alphas.len());
        for &beta in &self.betas {
            for &alpha_left in &self.alphas {
                for &alpha_right in &self.alphas {
                    out.push(PrunerSpec::Piecewise {
                        alpha_left,
                        alpha_right,
                        beta,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningRow {
    pub pruner: PrunerSpec,
    pub recall: f64,
    pub mean_dist_comps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub pruner: PrunerSpec,
    pub recall: f64,
    pub mean_dist_comps: f64,
    /// False when no grid point reached the target and the highest-recall
    /// point was returned instead.
    pub target_met: bool,
    pub rows: Vec<TuningRow>,
}

impl TuneReport {
    /// `alpha_left\talpha_right\tbeta\trecall\tmean_dist_comps`, one row per
    /// grid point.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "alpha_left\talpha_right\tbeta\trecall\tmean_dist_comps"
        )?;
        for row in &self.rows {
            if let PrunerSpec::Piecewise {
                alpha_left,
                alpha_right,
                beta,
            } = row.pruner
            {
                writeln!(
                    out,
                    "{alpha_left}\t{alpha_right}\t{beta}\t{}\t{}",
                    row.recall, row.mean_dist_comps
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub k: usize,
    pub target_recall: f64,
    pub grid: TuningGrid,
    pub bucket_size: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            k: 10,
            target_recall: 0.9,
            grid: TuningGrid::default(),
            bucket_size: crate::vptree::DEFAULT_BUCKET_SIZE,
            seed: 0,
            parallel: false,
        }
    }
}

/// Builds the index, computes the oracle on `train_queries` and runs
/// [`tune_on_index`].
pub fn tune(
    data: &Dataset,
    train_queries: &Dataset,
    spec: &DistanceSpec,
    mode: SearchMode,
    cfg: &TuneConfig,
) -> Result<TuneReport> {
    let index = VpTree::build(data, *spec, mode, cfg.bucket_size, cfg.seed)?;
    let truth = brute_force_knn(data, train_queries, spec, cfg.k, cfg.parallel)?;
    tune_on_index(
        &index,
        train_queries,
        &truth,
        cfg.target_recall,
        &cfg.grid,
        cfg.parallel,
    )
}

/// Evaluates every grid point on the training queries and picks the one
/// with the fewest mean distance computations among those reaching
/// `target_recall`. Ties go to the earlier grid point.
pub fn tune_on_index(
    index: &VpTree<'_>,
    train_queries: &Dataset,
    truth: &GroundTruth,
    target_recall: f64,
    grid: &TuningGrid,
    parallel: bool,
) -> Result<TuneReport> {
    if !(target_recall > 0.0 && target_recall <= 1.0) {
        return Err(Error::invalid(format!(
            "target recall must lie in (0, 1], got {target_recall}"
        )));
    }
    if grid.alphas.is_empty() || grid.betas.is_empty() {
        return Err(Error::invalid("tuning grid is empty"));
    }
    if train_queries.dim() != index.data().dim() {
        return Err(Error::DimensionMismatch {
            left: index.data().dim(),
            right: train_queries.dim(),
        });
    }
    if truth.lists.len() != train_queries.len() {
        return Err(Error::IncompatibleTruth(format!(
            "{} truth lists for {} training queries",
            truth.lists.len(),
            train_queries.len()
        )));
    }
    train_queries.validate_for(index.spec())?;
    let rows = evaluate_grid(index, train_queries, truth, grid, parallel)?;
    Ok(select_pruner(rows, target_recall))
}

/// Recall and mean distance computations of every grid point, in grid order.
pub fn evaluate_grid(
    index: &VpTree<'_>,
    queries: &Dataset,
    truth: &GroundTruth,
    grid: &TuningGrid,
    parallel: bool,
) -> Result<Vec<TuningRow>> {
    let pruners = grid.pruners();
    for p in &pruners {
        p.validate()?;
    }
    let eval = |p: &PrunerSpec| -> Result<TuningRow> {
        let (recall, mean_dist_comps) = evaluate_pruner(index, queries, truth, p)?;
        Ok(TuningRow {
            pruner: *p,
            recall,
            mean_dist_comps,
        })
    };
    if parallel {
        pruners.par_iter().map(eval).collect()
    } else {
        pruners.iter().map(eval).collect()
    }
}

/// Cheapest row reaching `target_recall` (earliest on ties), or the
/// highest-recall row when none does.
pub fn select_pruner(rows: Vec<TuningRow>, target_recall: f64) -> TuneReport {
    let qualifying = rows
        .iter()
        .filter(|r| r.recall >= target_recall)
        .reduce(|best, r| {
            if r.mean_dist_comps < best.mean_dist_comps {
                r
            } else {
                best
            }
        });
    let (chosen, target_met) = match qualifying {
        Some(r) => (r.clone(), true),
        None => (
            rows.iter()
                .reduce(|best, r| if r.recall > best.recall { r } else { best })
                .expect("grid is non-empty")
                .clone(),
            false,
        ),
    };
    TuneReport {
        pruner: chosen.pruner,
        recall: chosen.recall,
        mean_dist_comps: chosen.mean_dist_comps,
        target_met,
        rows,
    }
}

/// Recall and mean distance computations of one pruner over a query set.
pub fn evaluate_pruner(
    index: &VpTree<'_>,
    queries: &Dataset,
    truth: &GroundTruth,
    pruner: &PrunerSpec,
) -> Result<(f64, f64)> {
    let mut ids = Vec::with_capacity(queries.len());
    let mut comps = 0u64;
    for q in queries.iter() {
        let res = index.knn_search_unchecked(q, truth.k, pruner);
        comps += res.stats.distance_computations;
        ids.push(res.ids());
    }
    Ok((recall(&ids, truth)?, comps as f64 / queries.len() as f64))
}

/// One probe of the empirical decision function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionSample {
    /// Radius-side pivot-query distance.
    pub x: f64,
    /// Smallest radius-side distance from the query to any point on the
    /// other side of the partition: the largest radius that is still safe
    /// to prune with.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionScatter {
    pub pivot_id: usize,
    pub radius: f64,
    pub samples: Vec<DecisionSample>,
}

impl DecisionScatter {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x\ty")?;
        for s in &self.samples {
            writeln!(out, "{}\t{}", s.x, s.y)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Least-squares slopes of `y` against `|x - R|` on the left (`x < R`)
    /// and right (`x > R`) limbs; `None` for a limb with fewer than two
    /// distinct abscissae.
    pub fn limb_slopes(&self) -> (Option<f64>, Option<f64>) {
        let limb = |left: bool| {
            let pts: Vec<(f64, f64)> = self
                .samples
                .iter()
                .filter(|s| {
                    if left {
                        s.x < self.radius
                    } else {
                        s.x > self.radius
                    }
                })
                .map(|s| ((s.x - self.radius).abs(), s.y))
                .collect();
            least_squares_slope(&pts)
        };
        (limb(true), limb(false))
    }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Samples the empirical decision function of one partition.
///
/// The inner side is `{u : partition_dist(π, u) < R}`, the pivot included,
/// and the outer side is the rest; a query is inner when its pivot distance
/// is below `R`. When `radius` is `None`, `R` is the lower median of the
/// partition distances (one median split). Probes whose opposite side is
/// empty are skipped.
pub fn sample_decision_function(
    data: &Dataset,
    spec: &DistanceSpec,
    mode: SearchMode,
    pivot_id: usize,
    radius: Option<f64>,
    probe_queries: &Dataset,
) -> Result<DecisionScatter> {
    mode.validate(spec)?;
    data.validate_for(spec)?;
    probe_queries.validate_for(spec)?;
    if pivot_id >= data.len() {
        return Err(Error::invalid(format!(
            "pivot {pivot_id} out of range for {} points",
            data.len()
        )));
    }
    if probe_queries.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            left: data.dim(),
            right: probe_queries.dim(),
        });
    }
    let mut ev = CountingEvaluator::new(*spec, mode);
    let pivot = data.point(pivot_id);
    let sides: Vec<(usize, f64)> = (0..data.len())
        .map(|i| (i, ev.partition_dist(pivot, data.point(i))))
        .collect();
    let radius = match radius {
        Some(r) => r,
        None => {
            let mut ds: Vec<f64> = sides
                .iter()
                .filter(|s| s.0 != pivot_id)
                .map(|s| s.1)
                .collect();
            if ds.is_empty() {
                return Err(Error::NotEnoughPoints { needed: 2, got: 1 });
            }
            let mid = (ds.len() - 1) / 2;
            *ds.select_nth_unstable_by(mid, f64::total_cmp).1
        }
    };
    let (mut inner, mut outer) = (Vec::new(), Vec::new());
    for &(id, d) in &sides {
        if d < radius {
            inner.push(id);
        } else {
            outer.push(id);
        }
    }

    let mut samples = Vec::with_capacity(probe_queries.len());
    for q in probe_queries.iter() {
        let x = ev.pivot(pivot, q).0;
        let opposite = if x < radius { &outer } else { &inner };
        if opposite.is_empty() {
            continue;
        }
        let y = opposite
            .iter()
            .map(|&u| ev.bucket(data.point(u), q).0)
            .fold(f64::INFINITY, f64::min);
        samples.push(DecisionSample { x, y });
    }
    Ok(DecisionScatter {
        pivot_id,
        radius,
        samples,
    })
}
