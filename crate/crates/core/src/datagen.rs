//! Datasets, the RandHist generator, text I/O, the brute-force k-NN oracle
//! and recall.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::distances::DistanceSpec;
use crate::error::{Error, Result};

/// Default lower bound for every generated histogram component.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// A non-empty set of equal-length dense vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not split into rows of {dim}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint {
                point: index / dim,
                source: Box::new(Error::NonFinite { index: index % dim }),
            });
        }
        Ok(Dataset { dim, values })
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyDataset)?.len();
        let mut values = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.len(),
                });
            }
            values.extend_from_slice(p);
        }
        Dataset::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    /// Copies the rows named by `ids`, in that order.
    pub fn subset(&self, ids: &[usize]) -> Result<Dataset> {
        let mut values = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            values.extend_from_slice(self.point(i));
        }
        Dataset::new(self.dim, values)
    }

    /// Checks every point against the domain of `spec`.
    pub fn validate_for(&self, spec: &DistanceSpec) -> Result<()> {
        spec.validate()?;
        for (point, x) in self.iter().enumerate() {
            spec.check_point(x).map_err(|e| Error::InvalidPoint {
                point,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }
}

/// Generates `n` histograms uniformly distributed on the `d`-simplex, each
/// mixed with the uniform histogram so that every component is at least
/// `floor`.
pub fn gen_rand_hist(n: usize, d: usize, seed: u64, floor: f64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if d < 2 {
        return Err(Error::invalid(format!(
            "simplex dimension must be at least 2, got {d}"
        )));
    }
    if !(floor > 0.0 && floor < 1.0 / d as f64) {
        return Err(Error::invalid(format!(
            "floor must lie in (0, 1/{d}), got {floor}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shrink = 1.0 - d as f64 * floor;
    let mut values = Vec::with_capacity(n * d);
    let mut row = vec![0.0; d];
    for _ in 0..n {
        for v in row.iter_mut() {
            *v = Exp1.sample(&mut rng);
        }
        let sum: f64 = row.iter().sum();
        values.extend(row.iter().map(|v| shrink * (v / sum) + floor));
    }
    Dataset::new(d, values)
}

/// Reads whitespace-separated rows of decimal numbers. Blank lines are skipped.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut dim = None;
    let mut values = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("not a number: `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite value `{tok}`")));
            }
            values.push(v);
        }
        let width = values.len() - before;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::parse(
                    line_no,
                    format!("expected {d} components, found {width}"),
                ))
            }
            _ => {}
        }
    }
    let dim = dim.ok_or(Error::EmptyDataset)?;
    Dataset::new(dim, values)
}

pub fn write_dataset<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for x in data.iter() {
        let mut first = true;
        for v in x {
            if !first {
                out.write_all(b" ")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<std::path::Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<std::path::Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset(data, std::io::BufWriter::new(file))
}

/// One entry of a k-NN answer list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

impl Neighbor {
    /// Ascending distance, ties broken by ascending id.
    #[inline]
    pub fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

/// Exact k-NN lists for a set of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub k: usize,
    pub lists: Vec<Vec<Neighbor>>,
}

impl GroundTruth {
    pub fn ids(&self) -> Vec<Vec<usize>> {
        self.lists
            .iter()
            .map(|l| l.iter().map(|n| n.id).collect())
            .collect()
    }
}

/// Keeps the `k` smallest entries of `all`, sorted by [`Neighbor::cmp_key`].
pub(crate) fn smallest_k(mut all: Vec<Neighbor>, k: usize) -> Vec<Neighbor> {
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k, Neighbor::cmp_key);
        all.truncate(k);
    }
    all.sort_unstable_by(Neighbor::cmp_key);
    all
}

/// Exhaustive k-NN: for each query `q` the `k` data points with the smallest
/// `d(x, q)`, data point on the left.
pub fn brute_force_knn(
    data: &Dataset,
    queries: &Dataset,
    spec: &DistanceSpec,
    k: usize,
    parallel: bool,
) -> Result<GroundTruth> {
    if k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if data.dim() != queries.dim() {
        return Err(Error::DimensionMismatch {
            left: data.dim(),
            right: queries.dim(),
        });
    }
    data.validate_for(spec)?;
    queries.validate_for(spec)?;
    let one = |q: &[f64]| {
        let all = data
            .iter()
            .enumerate()
            .map(|(id, x)| Neighbor {
                id,
                distance: spec.eval_unchecked(x, q),
            })
            .collect();
        smallest_k(all, k)
    };
    let lists = if parallel {
        let qs: Vec<&[f64]> = queries.iter().collect();
        qs.par_iter().map(|q| one(q)).collect()
    } else {
        queries.iter().map(one).collect()
    };
    Ok(GroundTruth { k, lists })
}

/// Mean fraction of true neighbor ids present in each result list.
///
/// Membership is by id; order is ignored. The denominator of each query is
/// the length of its true list, which equals `k` unless the dataset is
/// smaller than `k`.
pub fn recall(result: &[Vec<usize>], truth: &GroundTruth) -> Result<f64> {
    if result.len() != truth.lists.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} result lists vs {} truth lists",
            result.len(),
            truth.lists.len()
        )));
    }
    if result.is_empty() {
        return Err(Error::ShapeMismatch("no queries".into()));
    }
    let mut total = 0.0;
    for (got, want) in result.iter().zip(&truth.lists) {
        if got.len() > truth.k {
            return Err(Error::ShapeMismatch(format!(
                "result list of length {} exceeds k = {}",
                got.len(),
                truth.k
            )));
        }
        if want.is_empty() {
            continue;
        }
        let hits = want.iter().filter(|n| got.contains(&n.id)).count();
        total += hits as f64 / want.len() as f64;
    }
    Ok(total / result.len() as f64)
}

const TRUTH_HEADER: &str = "qid\trank\tid\tdistance";

/// Writes ground truth as TSV; ranks start at 1 and distances carry 17
/// significant digits.
pub fn write_ground_truth<W: Write>(truth: &GroundTruth, mut out: W) -> Result<()> {
    writeln!(out, "{TRUTH_HEADER}")?;
    for (qid, list) in truth.lists.iter().enumerate() {
        for (rank, n) in list.iter().enumerate() {
            writeln!(out, "{qid}\t{}\t{}\t{:.16e}", rank + 1, n.id, n.distance)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses the TSV written by [`write_ground_truth`]. `k` is taken to be the
/// longest list; queries must appear in order starting at 0.
pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<GroundTruth> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(TRUTH_HEADER) {
        return Err(Error::parse(1, format!("expected header `{TRUTH_HEADER}`")));
    }
    let mut lists: Vec<Vec<Neighbor>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let bad = |what: &str| Error::parse(line_no, format!("bad {what}"));
        let qid: usize = fields[0].parse().map_err(|_| bad("qid"))?;
        let rank: usize = fields[1].parse().map_err(|_| bad("rank"))?;
        let id: usize = fields[2].parse().map_err(|_| bad("id"))?;
        let distance: f64 = fields[3].parse().map_err(|_| bad("distance"))?;
        if qid == lists.len() {
            lists.push(Vec::new());
        } else if qid + 1 != lists.len() {
            return Err(Error::parse(line_no, format!("query {qid} out of order")));
        }
        let list = lists.last_mut().expect("pushed above");
        if rank != list.len() + 1 {
            return Err(Error::parse(line_no, format!("rank {rank} out of order")));
        }
        list.push(Neighbor { id, distance });
    }
    let k = lists
        .iter()
        .map(Vec::len)
        .max()
        .ok_or_else(|| Error::parse(1, "no rows"))?;
    Ok(GroundTruth { k, lists })
}

pub fn load_ground_truth(path: impl AsRef<std::path::Path>) -> Result<GroundTruth> {
    let file = std::fs::File::open(path)?;
    read_ground_truth(std::io::BufReader::new(file))
}

pub fn save_ground_truth(truth: &GroundTruth, path: impl AsRef<std::path::Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_ground_truth(truth, std::io::BufWriter::new(file))
}
