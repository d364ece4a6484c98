//! Concave distance modifiers (TriGen).
//!
//! A transform maps a raw distance `g` to `f(min(g / d_max, 1))` where `f` is
//! a monotone concave base on `[0, 1]` and `g` is either the raw distance or
//! its min-symmetrization. [`fit`] selects the base and its concavity weight
//! `w` so that sampled triples obey the triangle inequality at a target rate
//! while the transformed distance keeps the lowest intrinsic dimensionality.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datagen::Dataset;
use crate::distances::{max_over_sampled_pairs, sample_pair, DistanceSpec};
use crate::error::{Error, Result};
use crate::params::Tagged;

/// `x^(1 / (1 + w))`.
#[inline]
pub fn fp_eval(x: f64, w: f64) -> f64 {
    if w == 0.0 {
        x
    } else {
        x.powf(1.0 / (1.0 + w))
    }
}

/// Rational Bézier quadratic through `(0,0)`, `(a,b)`, `(1,1)` whose middle
/// control point carries weight `w`. `w = 0` is the identity; larger `w`
/// pulls the curve towards `(a, b)`.
#[inline]
pub fn rbq_eval(a: f64, b: f64, x: f64, w: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if w == 0.0 {
        return x;
    }
    let t = rbq_param(a, x, w);
    let s = t * (1.0 - t);
    (2.0 * w * s * b + t * t) / (1.0 + 2.0 * (w - 1.0) * s)
}

/// Solves `x(t) = x` for the curve parameter `t ∈ [0, 1]`.
///
/// With `s = t(1-t)` the abscissa is `x(t) = (2wat(1-t) + t²) / (1 + 2(w-1)s)`;
/// clearing the denominator gives `A t² + B t - x = 0` with `A + B = 1`.
#[inline]
fn rbq_param(a: f64, x: f64, w: f64) -> f64 {
    let c = 2.0 * x * (w - 1.0);
    let lin = 2.0 * w * a - c;
    let quad = 1.0 - lin;
    let t = if quad.abs() <= 1e-12 * lin.abs().max(1.0) {
        x / lin
    } else {
        let disc = (lin * lin + 4.0 * quad * x).max(0.0);
        let q = -0.5 * (lin + lin.signum() * disc.sqrt());
        let (r1, r2) = (q / quad, -x / q);
        let inside = |r: f64| (-1e-9..=1.0 + 1e-9).contains(&r);
        if inside(r1) && (!inside(r2) || (r1 - 0.5).abs() <= (r2 - 0.5).abs()) {
            r1
        } else if inside(r2) {
            r2
        } else {
            return rbq_param_bisect(a, x, w);
        }
    };
    if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        rbq_param_bisect(a, x, w)
    }
}

#[cold]
fn rbq_param_bisect(a: f64, x: f64, w: f64) -> f64 {
    let abscissa = |t: f64| {
        let s = t * (1.0 - t);
        (2.0 * w * s * a + t * t) / (1.0 + 2.0 * (w - 1.0) * s)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if abscissa(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The concave map applied to a bounded distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Base {
    Identity,
    Sqrt,
    Fp { w: f64 },
    Rbq { a: f64, b: f64, w: f64 },
}

impl Base {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Base::Identity | Base::Sqrt => Ok(()),
            Base::Fp { w } if w.is_finite() && w >= 0.0 => Ok(()),
            Base::Fp { w } => Err(Error::invalid(format!("fp weight must be >= 0, got {w}"))),
            Base::Rbq { a, b, w } => {
                if !(0.0..1.0).contains(&a) || !(a < b && b <= 1.0) {
                    return Err(Error::invalid(format!(
                        "rbq needs 0 <= a < b <= 1, got a={a}, b={b}"
                    )));
                }
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::invalid(format!("rbq weight must be >= 0, got {w}")));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Base::Identity => x,
            Base::Sqrt => x.sqrt(),
            Base::Fp { w } => fp_eval(x, w),
            Base::Rbq { a, b, w } => rbq_eval(a, b, x, w),
        }
    }

    /// The concavity weight, 0 for the fixed bases.
    pub fn weight(&self) -> f64 {
        match *self {
            Base::Fp { w } | Base::Rbq { w, .. } => w,
            Base::Identity | Base::Sqrt => 0.0,
        }
    }

    pub fn with_weight(self, w: f64) -> Base {
        match self {
            Base::Fp { .. } => Base::Fp { w },
            Base::Rbq { a, b, .. } => Base::Rbq { a, b, w },
            other => other,
        }
    }

    /// Whether the base is only defined on `[0, 1]`.
    fn needs_bounding(&self) -> bool {
        matches!(self, Base::Fp { .. } | Base::Rbq { .. })
    }

    /// Base name without the weight, as used in the fit report.
    pub fn family(&self) -> String {
        match *self {
            Base::Identity => "identity".into(),
            Base::Sqrt => "sqrt".into(),
            Base::Fp { .. } => "fp".into(),
            Base::Rbq { a, b, .. } => format!("rbq:a={a},b={b}"),
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Base::Identity => f.write_str("identity"),
            Base::Sqrt => f.write_str("sqrt"),
            Base::Fp { w } => write!(f, "fp:w={w}"),
            Base::Rbq { a, b, w } => write!(f, "rbq:a={a},b={b},w={w}"),
        }
    }
}

impl FromStr for Base {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = Tagged::parse(s)?;
        let base = match t.name {
            "identity" => {
                t.only(&[])?;
                Base::Identity
            }
            "sqrt" => {
                t.only(&[])?;
                Base::Sqrt
            }
            "fp" => Base::Fp {
                w: t.only(&["w"])?.f64("w")?,
            },
            "rbq" => {
                let t = t.only(&["a", "b", "w"])?;
                Base::Rbq {
                    a: t.f64("a")?,
                    b: t.f64("b")?,
                    w: t.f64("w")?,
                }
            }
            other => return Err(Error::invalid(format!("unknown base `{other}`"))),
        };
        base.validate()?;
        Ok(base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetrization {
    #[default]
    None,
    /// `min(d(x, y), d(y, x))`
    MinSym,
}

/// A base plus the bounding constant and symmetrization applied before it.
///
/// Without `d_max` the raw distance is fed to the base unscaled; that is
/// only allowed for `identity` and `sqrt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSpec {
    pub base: Base,
    pub d_max: Option<f64>,
    pub symmetrization: Symmetrization,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::identity()
    }
}

impl TransformSpec {
    pub fn identity() -> Self {
        TransformSpec {
            base: Base::Identity,
            d_max: None,
            symmetrization: Symmetrization::None,
        }
    }

    pub fn new(base: Base, d_max: Option<f64>, symmetrization: Symmetrization) -> Result<Self> {
        let t = TransformSpec {
            base,
            d_max,
            symmetrization,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        match self.d_max {
            Some(m) if !(m.is_finite() && m > 0.0) => {
                Err(Error::invalid(format!("dmax must be positive, got {m}")))
            }
            None if self.base.needs_bounding() => Err(Error::invalid(format!(
                "base `{}` needs a dmax bound",
                self.base
            ))),
            _ => Ok(()),
        }
    }

    pub fn with_symmetrization(mut self, symmetrization: Symmetrization) -> Self {
        self.symmetrization = symmetrization;
        self
    }

    /// `min(g / d_max, 1)`, or `g` when unbounded.
    #[inline]
    pub fn bound(&self, g: f64) -> f64 {
        match self.d_max {
            Some(m) => (g / m).min(1.0),
            None => g,
        }
    }

    /// Maps an already symmetrized raw distance.
    #[inline]
    pub fn map(&self, g: f64) -> f64 {
        self.base.eval(self.bound(g))
    }

    /// The raw distance this transform consumes: `d(x, y)` or its
    /// min-symmetrization. Inputs must be valid for `spec`.
    #[inline]
    pub fn raw_unchecked(&self, spec: &DistanceSpec, x: &[f64], y: &[f64]) -> f64 {
        match self.symmetrization {
            Symmetrization::None => spec.eval_unchecked(x, y),
            Symmetrization::MinSym => spec.eval_min_sym_unchecked(x, y),
        }
    }

    /// `f(min(g / d_max, 1))` with `g` the (possibly symmetrized) distance.
    pub fn apply(&self, spec: &DistanceSpec, x: &[f64], y: &[f64]) -> Result<f64> {
        spec.eval(x, y)?;
        Ok(self.map(self.raw_unchecked(spec, x, y)))
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        if let Some(m) = self.d_max {
            write!(f, ";dmax={m}")?;
        }
        match self.symmetrization {
            Symmetrization::None => f.write_str(";sym=none"),
            Symmetrization::MinSym => f.write_str(";sym=min"),
        }
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(';');
        let base: Base = parts.next().unwrap_or_default().parse()?;
        let mut d_max = None;
        let mut symmetrization = Symmetrization::None;
        for part in parts {
            match part.trim().split_once('=') {
                Some(("dmax", v)) => {
                    d_max = Some(
                        v.parse::<f64>()
                            .map_err(|_| Error::invalid(format!("bad dmax `{v}`")))?,
                    )
                }
                Some(("sym", "none")) => symmetrization = Symmetrization::None,
                Some(("sym", "min")) => symmetrization = Symmetrization::MinSym,
                _ => return Err(Error::invalid(format!("unknown transform suffix `{part}`"))),
            }
        }
        TransformSpec::new(base, d_max, symmetrization)
    }
}

/// Violations within this relative margin are treated as rounding noise.
const VIOLATION_REL_TOL: f64 = 1e-12;

/// Bounded (pre-base) side lengths of sampled triples, largest side first.
#[derive(Debug, Clone)]
pub struct TripleSample {
    sides: Vec<[f64; 3]>,
    total: usize,
}

impl TripleSample {
    /// Draws `count` ordered triples of distinct indices in `0..n` and records
    /// `dist(i, j)` for their three pairs, largest first.
    pub fn draw<R: Rng>(
        rng: &mut R,
        n: usize,
        count: usize,
        mut dist: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::NotEnoughPoints { needed: 3, got: n });
        }
        if count == 0 {
            return Err(Error::invalid("triple count must be positive"));
        }
        let sides = (0..count)
            .map(|_| {
                let (i, j) = sample_pair(rng, n);
                let k = loop {
                    let k = rng.random_range(0..n);
                    if k != i && k != j {
                        break k;
                    }
                };
                let mut s = [dist(i, j), dist(i, k), dist(k, j)];
                s.sort_unstable_by(|a, b| b.total_cmp(a));
                s
            })
            .collect();
        Ok(TripleSample {
            sides,
            total: count,
        })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Drops triples that satisfy the triangle inequality before mapping.
    /// A concave base with `f(0) = 0` is subadditive on `[0, 1]`, so those
    /// triples can never violate after mapping; the total count is kept.
    pub fn violating_only(&self) -> TripleSample {
        TripleSample {
            sides: self
                .sides
                .iter()
                .copied()
                .filter(|s| violates(s[0], s[1], s[2]))
                .collect(),
            total: self.total,
        }
    }

    /// Number of triples violating the triangle inequality after `base`,
    /// stopping early once `limit` is exceeded.
    pub fn count_violations(&self, base: &Base, limit: usize) -> usize {
        let mut count = 0;
        for s in &self.sides {
            if violates(base.eval(s[0]), base.eval(s[1]), base.eval(s[2])) {
                count += 1;
                if count > limit {
                    break;
                }
            }
        }
        count
    }

    pub fn violation_fraction(&self, base: &Base) -> f64 {
        self.count_violations(base, usize::MAX) as f64 / self.total as f64
    }
}

#[inline]
fn violates(longest: f64, a: f64, b: f64) -> bool {
    longest > (a + b) * (1.0 + VIOLATION_REL_TOL)
}

fn transformed_dist<'a>(
    t: &'a TransformSpec,
    spec: &'a DistanceSpec,
    points: &'a Dataset,
) -> impl Fn(usize, usize) -> f64 + 'a {
    move |i, j| t.bound(t.raw_unchecked(spec, points.point(i), points.point(j)))
}

/// Fraction of `triple_count` sampled triples whose mapped largest side
/// exceeds the sum of the other two.
pub fn violation_fraction(
    t: &TransformSpec,
    spec: &DistanceSpec,
    sample_points: &Dataset,
    triple_count: usize,
    seed: u64,
) -> Result<f64> {
    t.validate()?;
    sample_points.validate_for(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = TripleSample::draw(
        &mut rng,
        sample_points.len(),
        triple_count,
        transformed_dist(t, spec, sample_points),
    )?;
    Ok(sample.violation_fraction(&t.base))
}

/// Variance below this is treated as zero.
const ZERO_VARIANCE: f64 = 1e-18;

/// `μ² / (2σ²)` of a distance sample (population variance); `+∞` for a
/// degenerate sample.
pub fn intrinsic_dim_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var < ZERO_VARIANCE {
        f64::INFINITY
    } else {
        mean * mean / (2.0 * var)
    }
}

/// Intrinsic dimensionality of the transformed distance over `pair_count`
/// sampled pairs.
pub fn intrinsic_dim(
    t: &TransformSpec,
    spec: &DistanceSpec,
    sample_points: &Dataset,
    pair_count: usize,
    seed: u64,
) -> Result<f64> {
    t.validate()?;
    sample_points.validate_for(spec)?;
    let values = sample_pair_distances(
        &mut ChaCha8Rng::seed_from_u64(seed),
        sample_points.len(),
        pair_count,
        transformed_dist(t, spec, sample_points),
    )?;
    let mapped: Vec<f64> = values.iter().map(|&v| t.base.eval(v)).collect();
    Ok(intrinsic_dim_of(&mapped))
}

fn sample_pair_distances<R: Rng>(
    rng: &mut R,
    n: usize,
    pair_count: usize,
    dist: impl Fn(usize, usize) -> f64,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::NotEnoughPoints { needed: 2, got: n });
    }
    if pair_count == 0 {
        return Err(Error::invalid("pair_count must be positive"));
    }
    Ok((0..pair_count)
        .map(|_| {
            let (i, j) = sample_pair(rng, n);
            dist(i, j)
        })
        .collect())
}

/// Settings for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct TriGenFitConfig {
    /// Required fraction of sampled triples obeying the triangle inequality.
    pub trigen_acc: f64,
    /// Points drawn without replacement from the dataset.
    pub sample_qty: usize,
    /// Triples drawn from the point sample, shared by every candidate.
    pub triplet_qty: usize,
    pub a_step: f64,
    pub b_step: f64,
    pub w_max: f64,
    pub w_tolerance: f64,
    /// Pairs used to estimate `d_max` on the point sample.
    pub dmax_pair_qty: usize,
    /// Pairs used to estimate intrinsic dimensionality.
    pub idim_pair_qty: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for TriGenFitConfig {
    fn default() -> Self {
        TriGenFitConfig {
            trigen_acc: 1.0,
            sample_qty: 5000,
            triplet_qty: 10_000,
            a_step: 0.01,
            b_step: 0.05,
            w_max: (1u64 << 20) as f64,
            w_tolerance: 1e-3,
            dmax_pair_qty: 1_000_000,
            idim_pair_qty: 10_000,
            seed: 0,
            parallel: false,
        }
    }
}

impl TriGenFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.trigen_acc) {
            return Err(Error::invalid(format!(
                "trigen accuracy must lie in [0, 1], got {}",
                self.trigen_acc
            )));
        }
        if self.sample_qty < 3
            || self.triplet_qty == 0
            || self.dmax_pair_qty == 0
            || self.idim_pair_qty == 0
        {
            return Err(Error::invalid(
                "sample sizes must be positive (at least 3 points)",
            ));
        }
        for (name, v) in [
            ("a_step", self.a_step),
            ("b_step", self.b_step),
            ("w_max", self.w_max),
            ("w_tolerance", self.w_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// FP followed by every RBQ(a, b) on the `a_step` × `b_step` lattice
    /// with `0 <= a < b <= 1`.
    pub fn candidate_pool(&self) -> Vec<Base> {
        let mut pool = vec![Base::Fp { w: 0.0 }];
        let snap = |v: f64| (v * 1e9).round() / 1e9;
        let nb = (1.0 / self.b_step + 1e-9).floor() as usize;
        for j in 1..=nb {
            let b = snap(j as f64 * self.b_step).min(1.0);
            for i in 0.. {
                let a = snap(i as f64 * self.a_step);
                if a >= b - 1e-12 {
                    break;
                }
                pool.push(Base::Rbq { a, b, w: 0.0 });
            }
        }
        pool
    }
}

/// Per-candidate outcome of the weight search.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFit {
    pub base: Base,
    pub violation_fraction: f64,
    pub intrinsic_dim: f64,
}

/// Result of [`fit`]: the winning transform and its statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub transform: TransformSpec,
    pub violation_fraction: f64,
    pub intrinsic_dim: f64,
    pub candidates: usize,
    pub survivors: usize,
}

impl FitReport {
    /// `base\tw\tviolation_fraction\tintrinsic_dim` plus the winner's row.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "base\tw\tviolation_fraction\tintrinsic_dim")?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            self.transform.base.family(),
            self.transform.base.weight(),
            self.violation_fraction,
            self.intrinsic_dim
        )?;
        out.flush()?;
        Ok(())
    }
}

/// Minimum weight in `[0, w_max]` at which `base` keeps violations within
/// `allowed`, to `w_tolerance`; `None` if `w_max` is not enough.
fn search_weight(
    base: Base,
    triples: &TripleSample,
    allowed: usize,
    cfg: &TriGenFitConfig,
) -> Option<f64> {
    let feasible = |w: f64| triples.count_violations(&base.with_weight(w), allowed) <= allowed;
    if feasible(0.0) {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0f64.min(cfg.w_max));
    loop {
        if feasible(hi) {
            break;
        }
        if hi >= cfg.w_max {
            return None;
        }
        lo = hi;
        hi = (hi * 2.0).min(cfg.w_max);
    }
    while hi - lo > cfg.w_tolerance {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Selects a TriGen transform for `spec` on `data`.
///
/// Non-symmetric distances are fitted on their min-symmetrization. The point
/// sample, `d_max`, the triple sample and the pair sample are drawn once and
/// shared by every candidate base.
pub fn fit(data: &Dataset, spec: &DistanceSpec, cfg: &TriGenFitConfig) -> Result<FitReport> {
    cfg.validate()?;
    data.validate_for(spec)?;
    let symmetrization = if spec.is_symmetric() {
        Symmetrization::None
    } else {
        Symmetrization::MinSym
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let take = cfg.sample_qty.min(data.len());
    if take < 3 {
        return Err(Error::NotEnoughPoints {
            needed: 3,
            got: take,
        });
    }
    let ids = index::sample(&mut rng, data.len(), take).into_vec();
    let points = data.subset(&ids)?;

    let raw = TransformSpec {
        base: Base::Identity,
        d_max: None,
        symmetrization,
    };
    let raw_dist = transformed_dist(&raw, spec, &points);
    let d_max = max_over_sampled_pairs(&mut rng, points.len(), cfg.dmax_pair_qty, &raw_dist)?;
    if d_max.is_nan() || d_max <= 0.0 {
        return Err(Error::invalid(
            "all sampled distances are zero; cannot bound",
        ));
    }
    let bounded = TransformSpec {
        d_max: Some(d_max),
        ..raw
    };
    let bounded_dist = transformed_dist(&bounded, spec, &points);
    let triples = TripleSample::draw(&mut rng, points.len(), cfg.triplet_qty, &bounded_dist)?;
    let pairs = sample_pair_distances(&mut rng, points.len(), cfg.idim_pair_qty, &bounded_dist)?;
    let hard = triples.violating_only();
    let allowed = ((1.0 - cfg.trigen_acc) * triples.len() as f64 + 1e-9).floor() as usize;

    let pool = cfg.candidate_pool();
    let fit_one = |base: &Base| -> std::result::Result<CandidateFit, f64> {
        match search_weight(*base, &hard, allowed, cfg) {
            Some(w) => {
                let base = base.with_weight(w);
                let mapped: Vec<f64> = pairs.iter().map(|&v| base.eval(v)).collect();
                Ok(CandidateFit {
                    base,
                    violation_fraction: hard.violation_fraction(&base),
                    intrinsic_dim: intrinsic_dim_of(&mapped),
                })
            }
            None => Err(hard.violation_fraction(&base.with_weight(cfg.w_max))),
        }
    };
    let outcomes: Vec<_> = if cfg.parallel {
        pool.par_iter().map(fit_one).collect()
    } else {
        pool.iter().map(fit_one).collect()
    };

    let mut best: Option<&CandidateFit> = None;
    let mut survivors = 0;
    let mut least_violation = 1.0f64;
    for o in &outcomes {
        match o {
            Ok(c) => {
                survivors += 1;
                if best.is_none_or(|b| c.intrinsic_dim < b.intrinsic_dim) {
                    best = Some(c);
                }
            }
            Err(v) => least_violation = least_violation.min(*v),
        }
    }
    let best = best.ok_or(Error::NoFeasibleTransform {
        target: cfg.trigen_acc,
        best_accuracy: 1.0 - least_violation,
    })?;
    Ok(FitReport {
        transform: TransformSpec {
            base: best.base,
            d_max: Some(d_max),
            symmetrization,
        },
        violation_fraction: best.violation_fraction,
        intrinsic_dim: best.intrinsic_dim,
        candidates: pool.len(),
        survivors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fp_examples() {
        for x in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert_eq!(fp_eval(x, 0.0), x);
        }
        assert_relative_eq!(fp_eval(0.25, 1.0), 0.5, epsilon = 1e-15);
        for w in [0.5, 3.0, 1e6] {
            assert_eq!(fp_eval(0.0, w), 0.0);
            assert_eq!(fp_eval(1.0, w), 1.0);
        }
    }

    #[test]
    fn rbq_endpoints_and_unit_weight() {
        for (a, b) in [(0.0, 1.0), (0.2, 0.35), (0.5, 0.95)] {
            for w in [0.0, 1.0, 50.0, 1e6] {
                assert_eq!(rbq_eval(a, b, 0.0, w), 0.0);
                assert_eq!(rbq_eval(a, b, 1.0, w), 1.0);
            }
        }
        // Unit weight: x(t) = t², y(t) = t(2 - t).
        assert_relative_eq!(rbq_eval(0.0, 1.0, 0.25, 1.0), 0.75, epsilon = 1e-12);
        assert_relative_eq!(rbq_eval(0.0, 1.0, 0.49, 1.0), 0.91, epsilon = 1e-12);
        // Zero weight is the straight line.
        assert_eq!(rbq_eval(0.3, 0.6, 0.42, 0.0), 0.42);
    }

    #[test]
    fn rbq_matches_bisection_oracle() {
        for (a, b) in [(0.0, 0.05), (0.1, 0.9), (0.49, 0.5), (0.99, 1.0)] {
            for w in [0.5, 1.0, 7.0, 1000.0, (1u64 << 20) as f64] {
                for i in 1..100 {
                    let x = i as f64 / 100.0;
                    let t = rbq_param(a, x, w);
                    let oracle = rbq_param_bisect(a, x, w);
                    assert!(
                        (t - oracle).abs() < 1e-6,
                        "a={a} b={b} w={w} x={x}: {t} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn apply_examples() {
        let t = TransformSpec::new(Base::Identity, Some(2.0), Symmetrization::None).unwrap();
        assert_eq!(
            t.apply(&DistanceSpec::L2, &[0.0, 0.0], &[1.0, 0.0])
                .unwrap(),
            0.5
        );

        let x = [0.5, 0.5];
        let y = [0.25, 0.75];
        let kl_xy = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        let kl_yx = 0.25 * 0.5f64.ln() + 0.75 * 1.5f64.ln();
        assert_relative_eq!(kl_yx, 0.130_812_035_941_137_6, epsilon = 1e-12);
        let sym = TransformSpec::identity().with_symmetrization(Symmetrization::MinSym);
        assert_relative_eq!(
            sym.apply(&DistanceSpec::KlDiv, &x, &y).unwrap(),
            kl_xy.min(kl_yx),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            sym.apply(&DistanceSpec::KlDiv, &y, &x).unwrap(),
            kl_yx,
            epsilon = 1e-15
        );

        let clamped =
            TransformSpec::new(Base::Fp { w: 3.0 }, Some(0.1), Symmetrization::None).unwrap();
        assert_eq!(
            clamped.apply(&DistanceSpec::L2, &[0.0], &[5.0]).unwrap(),
            1.0
        );
        for t in [t, sym, clamped] {
            assert_eq!(
                t.apply(&DistanceSpec::L2, &[0.3, 0.7], &[0.3, 0.7])
                    .unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn transform_text_form() {
        for s in [
            "identity;sym=none",
            "sqrt;sym=none",
            "fp:w=2.5;dmax=3;sym=min",
            "rbq:a=0.1,b=0.35,w=12;dmax=0.75;sym=none",
        ] {
            let t: TransformSpec = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        let t: TransformSpec = "sqrt".parse().unwrap();
        assert_eq!(t.base, Base::Sqrt);
        assert_eq!(t.d_max, None);
        assert!("fp:w=1".parse::<TransformSpec>().is_err(), "fp needs dmax");
        assert!("rbq:a=0.5,b=0.5,w=1;dmax=1"
            .parse::<TransformSpec>()
            .is_err());
        assert!("identity;sym=max".parse::<TransformSpec>().is_err());
        assert!("fp:w=-1;dmax=1".parse::<TransformSpec>().is_err());
    }

    #[test]
    fn violation_fraction_examples() {
        let line = Dataset::from_points(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let t = TransformSpec::new(Base::Identity, Some(4.0), Symmetrization::None).unwrap();
        let v = violation_fraction(&t, &DistanceSpec::L2Squared, &line, 100, 5).unwrap();
        assert_eq!(v, 1.0);
        let v = violation_fraction(&TransformSpec::identity(), &DistanceSpec::L2, &line, 100, 5)
            .unwrap();
        assert_eq!(v, 0.0);

        let two = Dataset::from_points(vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            violation_fraction(&t, &DistanceSpec::L2, &two, 10, 0),
            Err(Error::NotEnoughPoints { needed: 3, .. })
        ));
    }

    #[test]
    fn intrinsic_dim_examples() {
        assert_eq!(intrinsic_dim_of(&[0.7; 10]), f64::INFINITY);
        assert_eq!(intrinsic_dim_of(&[1.0, 3.0, 1.0, 3.0]), 2.0);
        let scaled: Vec<f64> = [1.0, 3.0, 2.0, 7.0].iter().map(|v| v * 13.0).collect();
        assert_relative_eq!(
            intrinsic_dim_of(&scaled),
            intrinsic_dim_of(&[1.0, 3.0, 2.0, 7.0]),
            max_relative = 1e-12
        );
        let one = Dataset::from_points(vec![vec![1.0]]).unwrap();
        assert!(intrinsic_dim(&TransformSpec::identity(), &DistanceSpec::L2, &one, 10, 0).is_err());
    }

    #[test]
    fn candidate_pool_lattice() {
        let cfg = TriGenFitConfig::default();
        let pool = cfg.candidate_pool();
        assert_eq!(pool[0], Base::Fp { w: 0.0 });
        // b = 0.05 j admits 5 j values of a.
        assert_eq!(pool.len(), 1 + (1..=20).map(|j| 5 * j).sum::<usize>());
        assert!(pool.contains(&Base::Rbq {
            a: 0.0,
            b: 0.05,
            w: 0.0
        }));
        assert!(pool.contains(&Base::Rbq {
            a: 0.99,
            b: 1.0,
            w: 0.0
        }));
        assert!(!pool.contains(&Base::Rbq {
            a: 0.05,
            b: 0.05,
            w: 0.0
        }));
        for b in &pool {
            b.validate().unwrap();
        }
    }

    #[test]
    fn search_weight_brackets_then_bisects() {
        // A single triple (1, 0.3, 0.3) under FP needs 0.3^(1/(1+w)) >= 0.5.
        let triples = TripleSample {
            sides: vec![[1.0, 0.3, 0.3]],
            total: 1,
        };
        let cfg = TriGenFitConfig::default();
        let w = search_weight(Base::Fp { w: 0.0 }, &triples, 0, &cfg).unwrap();
        let exact = 0.3f64.ln() / 0.5f64.ln() - 1.0;
        assert!(w >= exact && w - exact <= cfg.w_tolerance, "{w} vs {exact}");
        assert_eq!(
            search_weight(Base::Fp { w: 0.0 }, &triples, 1, &cfg),
            Some(0.0)
        );

        let tiny = TriGenFitConfig { w_max: 0.5, ..cfg };
        assert_eq!(search_weight(Base::Fp { w: 0.0 }, &triples, 0, &tiny), None);
    }
}
