//! Vantage-point tree with pluggable pruning and four distance modes.
//!
//! Every point the search touches yields two values: a *radius-side*
//! distance, compared against node radii and used to shrink the query ball,
//! and a *result* distance, the original `d(x, q)` used to rank neighbors.
//! In `Plain` and `TriGenSym` mode the radius-side value is the transform of
//! the result value. `TriGen0` and `TriGen1` use the transformed
//! min-symmetrized distance on the radius side; `TriGen1` skips the reverse
//! evaluation at bucket points.

use std::collections::BinaryHeap;
use std::ops::Range;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{Dataset, Neighbor};
use crate::distances::DistanceSpec;
use crate::error::{Error, Result};
use crate::pruners::PrunerSpec;
use crate::transform::{Symmetrization, TransformSpec};

/// Leaf bucket size used when none is given.
pub const DEFAULT_BUCKET_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchMode {
    /// Transformed original distance everywhere.
    Plain(TransformSpec),
    /// Transformed min-symmetrized distance everywhere; only valid when the
    /// distance is symmetric.
    TriGenSym(TransformSpec),
    /// Min-symmetrized radius side, original result side, both evaluated at
    /// every point.
    TriGen0(TransformSpec),
    /// Min-symmetrized at pivots, original distance only at bucket points.
    TriGen1(TransformSpec),
}

impl SearchMode {
    pub const NAMES: [&'static str; 4] = ["plain", "trigensym", "trigen0", "trigen1"];

    /// Builds a mode by name, forcing the symmetrization the mode implies.
    pub fn from_name(name: &str, transform: TransformSpec) -> Result<Self> {
        let sym = |t: TransformSpec| t.with_symmetrization(Symmetrization::MinSym);
        Ok(match name {
            "plain" => SearchMode::Plain(transform.with_symmetrization(Symmetrization::None)),
            "trigensym" => SearchMode::TriGenSym(sym(transform)),
            "trigen0" => SearchMode::TriGen0(sym(transform)),
            "trigen1" => SearchMode::TriGen1(sym(transform)),
            other => return Err(Error::invalid(format!("unknown search mode `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SearchMode::Plain(_) => "plain",
            SearchMode::TriGenSym(_) => "trigensym",
            SearchMode::TriGen0(_) => "trigen0",
            SearchMode::TriGen1(_) => "trigen1",
        }
    }

    pub fn transform(&self) -> &TransformSpec {
        match self {
            SearchMode::Plain(t)
            | SearchMode::TriGenSym(t)
            | SearchMode::TriGen0(t)
            | SearchMode::TriGen1(t) => t,
        }
    }

    pub fn validate(&self, spec: &DistanceSpec) -> Result<()> {
        self.transform().validate()?;
        if let SearchMode::TriGenSym(_) = self {
            if !spec.is_symmetric() {
                return Err(Error::invalid(format!(
                    "trigensym mode needs a symmetric distance; use trigen0 or trigen1 for `{spec}`"
                )));
            }
        }
        Ok(())
    }
}

/// Distance evaluator for one mode that counts every underlying evaluation.
#[derive(Debug, Clone)]
pub struct CountingEvaluator {
    spec: DistanceSpec,
    mode: SearchMode,
    count: u64,
}

impl CountingEvaluator {
    pub fn new(spec: DistanceSpec, mode: SearchMode) -> Self {
        CountingEvaluator {
            spec,
            mode,
            count: 0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Radius-side distance between a pivot and another data point, as
    /// used to partition the tree. Pivot is the left argument.
    #[inline]
    pub fn partition_dist(&mut self, pivot: &[f64], x: &[f64]) -> f64 {
        match self.mode {
            SearchMode::Plain(t) | SearchMode::TriGenSym(t) => {
                self.count += 1;
                t.map(self.spec.eval_unchecked(pivot, x))
            }
            SearchMode::TriGen0(t) | SearchMode::TriGen1(t) => {
                self.count += 2;
                t.map(
                    self.spec
                        .eval_unchecked(pivot, x)
                        .min(self.spec.eval_unchecked(x, pivot)),
                )
            }
        }
    }

    /// `(radius-side, result)` distances between a pivot and the query.
    #[inline]
    pub fn pivot(&mut self, pivot: &[f64], q: &[f64]) -> (f64, f64) {
        match self.mode {
            SearchMode::Plain(t) | SearchMode::TriGenSym(t) => {
                self.count += 1;
                let d = self.spec.eval_unchecked(pivot, q);
                (t.map(d), d)
            }
            SearchMode::TriGen0(t) | SearchMode::TriGen1(t) => {
                self.count += 2;
                let d = self.spec.eval_unchecked(pivot, q);
                let rev = self.spec.eval_unchecked(q, pivot);
                (t.map(d.min(rev)), d)
            }
        }
    }

    /// `(radius-side, result)` distances between a bucket point and the query.
    #[inline]
    pub fn bucket(&mut self, x: &[f64], q: &[f64]) -> (f64, f64) {
        match self.mode {
            SearchMode::TriGen1(t) => {
                self.count += 1;
                let d = self.spec.eval_unchecked(x, q);
                (t.map(d), d)
            }
            _ => self.pivot(x, q),
        }
    }

    /// Scans every data point as a bucket point; the result is sorted by
    /// result distance, ties by id.
    pub fn brute_force(&mut self, data: &Dataset, q: &[f64], k: usize) -> Vec<Neighbor> {
        let all = data
            .iter()
            .enumerate()
            .map(|(id, x)| Neighbor {
                id,
                distance: self.bucket(x, q).1,
            })
            .collect();
        crate::datagen::smallest_k(all, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VpNode {
    Internal {
        pivot: usize,
        radius: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        bucket: Range<usize>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchStats {
    pub distance_computations: u64,
    pub nodes_visited: u64,
    pub buckets_scanned: u64,
    pub wall_time: Duration,
}

impl SearchStats {
    pub fn accumulate(&mut self, other: &SearchStats) {
        self.distance_computations += other.distance_computations;
        self.nodes_visited += other.nodes_visited;
        self.buckets_scanned += other.buckets_scanned;
        self.wall_time += other.wall_time;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Ascending by original distance `d(x, q)`, ties by id.
    pub neighbors: Vec<Neighbor>,
    pub stats: SearchStats,
}

impl SearchResult {
    pub fn ids(&self) -> Vec<usize> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}

/// A VP-tree over a borrowed dataset.
#[derive(Debug, Clone)]
pub struct VpTree<'a> {
    data: &'a Dataset,
    spec: DistanceSpec,
    mode: SearchMode,
    bucket_size: usize,
    nodes: Vec<VpNode>,
    members: Vec<usize>,
    root: usize,
}

impl<'a> VpTree<'a> {
    /// Recursive median split around randomly chosen pivots.
    pub fn build(
        data: &'a Dataset,
        spec: DistanceSpec,
        mode: SearchMode,
        bucket_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if bucket_size < 1 {
            return Err(Error::invalid("bucket size must be at least 1"));
        }
        mode.validate(&spec)?;
        data.validate_for(&spec)?;
        let mut tree = VpTree {
            data,
            spec,
            mode,
            bucket_size,
            nodes: Vec::new(),
            members: Vec::with_capacity(data.len()),
            root: 0,
        };
        let mut ids: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ev = CountingEvaluator::new(spec, mode);
        let mut scratch = Vec::with_capacity(data.len());
        tree.root = tree.split(&mut ids, &mut rng, &mut ev, &mut scratch);
        Ok(tree)
    }

    fn split(
        &mut self,
        ids: &mut [usize],
        rng: &mut ChaCha8Rng,
        ev: &mut CountingEvaluator,
        scratch: &mut Vec<Neighbor>,
    ) -> usize {
        if ids.len() <= self.bucket_size {
            let start = self.members.len();
            self.members.extend_from_slice(ids);
            self.nodes.push(VpNode::Leaf {
                bucket: start..self.members.len(),
            });
            return self.nodes.len() - 1;
        }
        let last = ids.len() - 1;
        let chosen = rng.random_range(0..ids.len());
        ids.swap(chosen, last);
        let pivot = ids[last];
        let rest = &mut ids[..last];

        let pivot_point = self.data.point(pivot);
        scratch.clear();
        scratch.extend(rest.iter().map(|&id| Neighbor {
            id,
            distance: ev.partition_dist(pivot_point, self.data.point(id)),
        }));
        // Left takes the lower ceil(m/2) points; the lower median is its largest.
        let left_len = rest.len() - rest.len() / 2;
        let (_, median, _) = scratch.select_nth_unstable_by(left_len - 1, Neighbor::cmp_key);
        let radius = median.distance;
        for (slot, n) in rest.iter_mut().zip(scratch.iter()) {
            *slot = n.id;
        }

        let at = self.nodes.len();
        self.nodes.push(VpNode::Leaf { bucket: 0..0 });
        let (lower, upper) = rest.split_at_mut(left_len);
        let left = self.split(lower, rng, ev, scratch);
        let right = self.split(upper, rng, ev, scratch);
        self.nodes[at] = VpNode::Internal {
            pivot,
            radius,
            left,
            right,
        };
        at
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn spec(&self) -> &DistanceSpec {
        &self.spec
    }

    pub fn mode(&self) -> &SearchMode {
        &self.mode
    }

    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &VpNode {
        &self.nodes[i]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn bucket_members(&self, bucket: &Range<usize>) -> &[usize] {
        &self.members[bucket.clone()]
    }

    /// Number of data points stored under node `i`, pivots included.
    pub fn subtree_size(&self, i: usize) -> usize {
        match &self.nodes[i] {
            VpNode::Leaf { bucket } => bucket.len(),
            VpNode::Internal { left, right, .. } => {
                1 + self.subtree_size(*left) + self.subtree_size(*right)
            }
        }
    }

    /// Best-first k-NN as a range search whose radius shrinks to the k-th
    /// smallest radius-side distance seen so far.
    pub fn knn_search(&self, q: &[f64], k: usize, pruner: &PrunerSpec) -> Result<SearchResult> {
        if k < 1 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if q.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                left: self.data.dim(),
                right: q.len(),
            });
        }
        self.spec.check_point(q)?;
        pruner.validate()?;
        Ok(self.knn_search_unchecked(q, k, pruner))
    }

    pub(crate) fn knn_search_unchecked(
        &self,
        q: &[f64],
        k: usize,
        pruner: &PrunerSpec,
    ) -> SearchResult {
        let started = Instant::now();
        let mut state = SearchState {
            q,
            k,
            pruner,
            ev: CountingEvaluator::new(self.spec, self.mode),
            results: BinaryHeap::with_capacity(k + 1),
            radii: BinaryHeap::with_capacity(k + 1),
            nodes_visited: 0,
            buckets_scanned: 0,
        };
        self.visit(self.root, &mut state);
        let mut neighbors: Vec<Neighbor> = state.results.into_iter().map(|c| c.0).collect();
        neighbors.sort_unstable_by(Neighbor::cmp_key);
        SearchResult {
            neighbors,
            stats: SearchStats {
                distance_computations: state.ev.count(),
                nodes_visited: state.nodes_visited,
                buckets_scanned: state.buckets_scanned,
                wall_time: started.elapsed(),
            },
        }
    }

    fn visit(&self, node: usize, st: &mut SearchState<'_>) {
        st.nodes_visited += 1;
        match &self.nodes[node] {
            VpNode::Leaf { bucket } => {
                st.buckets_scanned += 1;
                for &id in &self.members[bucket.clone()] {
                    let (radius_side, result) = st.ev.bucket(self.data.point(id), st.q);
                    st.offer(id, radius_side, result);
                }
            }
            &VpNode::Internal {
                pivot,
                radius,
                left,
                right,
            } => {
                let (x, result) = st.ev.pivot(self.data.point(pivot), st.q);
                st.offer(pivot, x, result);
                let (near, far) = if x <= radius {
                    (left, right)
                } else {
                    (right, left)
                };
                self.visit(near, st);
                if st.radius() >= st.pruner.decision(x, radius) {
                    self.visit(far, st);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ByKey(Neighbor);

impl PartialEq for ByKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for ByKey {}
impl PartialOrd for ByKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.cmp_key(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Radius(f64);

impl Eq for Radius {}
impl PartialOrd for Radius {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Radius {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct SearchState<'q> {
    q: &'q [f64],
    k: usize,
    pruner: &'q PrunerSpec,
    ev: CountingEvaluator,
    results: BinaryHeap<ByKey>,
    radii: BinaryHeap<Radius>,
    nodes_visited: u64,
    buckets_scanned: u64,
}

impl SearchState<'_> {
    #[inline]
    fn radius(&self) -> f64 {
        if self.radii.len() < self.k {
            f64::INFINITY
        } else {
            self.radii.peek().map_or(f64::INFINITY, |r| r.0)
        }
    }

    #[inline]
    fn offer(&mut self, id: usize, radius_side: f64, result: f64) {
        let cand = ByKey(Neighbor {
            id,
            distance: result,
        });
        if self.results.len() < self.k {
            self.results.push(cand);
        } else if let Some(mut top) = self.results.peek_mut() {
            if cand < *top {
                *top = cand;
            }
        }
        let r = Radius(radius_side);
        if self.radii.len() < self.k {
            self.radii.push(r);
        } else if let Some(mut top) = self.radii.peek_mut() {
            if r < *top {
                *top = r;
            }
        }
    }
}
