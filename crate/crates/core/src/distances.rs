//! Distance functions on dense vectors.
//!
//! Every distance here is evaluated as `d(x, y)` where, for a k-NN query,
//! `x` is the data point and `y` the query (left queries). The statistical
//! divergences are only defined on strictly positive histograms; the kernels
//! reject non-positive components instead of clamping them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::params::Tagged;

/// A distance family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceSpec {
    L2,
    Lp { p: f64 },
    L2Squared,
    Cosine,
    KlDiv,
    ItakuraSaito,
    Renyi { alpha: f64 },
}

impl DistanceSpec {
    pub const ALL_KINDS: [&'static str; 7] = [
        "l2",
        "lp",
        "l2sqr",
        "cosine",
        "kldiv",
        "itakurasaito",
        "renyi",
    ];

    pub fn lp(p: f64) -> Result<Self> {
        let spec = DistanceSpec::Lp { p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn renyi(alpha: f64) -> Result<Self> {
        let spec = DistanceSpec::Renyi { alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistanceSpec::Lp { p } if !(p.is_finite() && p > 0.0) => {
                Err(Error::invalid(format!("lp requires p > 0, got {p}")))
            }
            DistanceSpec::Renyi { alpha }
                if !(alpha.is_finite() && alpha > 0.0 && alpha != 1.0) =>
            {
                Err(Error::invalid(format!(
                    "renyi requires alpha > 0 and alpha != 1, got {alpha}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// True when `d(x, y) = d(y, x)` for all inputs.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            DistanceSpec::L2
            | DistanceSpec::Lp { .. }
            | DistanceSpec::L2Squared
            | DistanceSpec::Cosine => true,
            DistanceSpec::Renyi { alpha } => alpha == 0.5,
            DistanceSpec::KlDiv | DistanceSpec::ItakuraSaito => false,
        }
    }

    /// KL, Itakura-Saito and Rényi need strictly positive components.
    pub fn is_statistical(&self) -> bool {
        matches!(
            self,
            DistanceSpec::KlDiv | DistanceSpec::ItakuraSaito | DistanceSpec::Renyi { .. }
        )
    }

    /// Checks that `x` lies in the domain of this distance.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::invalid("vector must have at least one component"));
        }
        for (index, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if self.is_statistical() && v <= 0.0 {
                return Err(Error::NonPositiveComponent { index, value: v });
            }
        }
        if matches!(self, DistanceSpec::Cosine) && x.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(())
    }

    /// Evaluates `d(x, y)` after checking dimensions and domains.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluates `d(x, y)` assuming both inputs were validated with
    /// [`check_point`](Self::check_point) and have equal length.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            DistanceSpec::L2 => squared_l2(x, y).sqrt(),
            DistanceSpec::L2Squared => squared_l2(x, y),
            DistanceSpec::Lp { p } => {
                let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(p)).sum();
                s.powf(1.0 / p)
            }
            DistanceSpec::Cosine => {
                let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
                for (a, b) in x.iter().zip(y) {
                    dot += a * b;
                    nx += a * a;
                    ny += b * b;
                }
                (1.0 - dot / (nx.sqrt() * ny.sqrt())).max(0.0)
            }
            DistanceSpec::KlDiv => {
                let s: f64 = x.iter().zip(y).map(|(a, b)| a * (a / b).ln()).sum();
                s.max(0.0)
            }
            DistanceSpec::ItakuraSaito => {
                let s: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let r = a / b;
                        r - r.ln() - 1.0
                    })
                    .sum();
                s.max(0.0)
            }
            DistanceSpec::Renyi { alpha } => {
                let s: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha))
                    .sum();
                (s.ln() / (alpha - 1.0)).max(0.0)
            }
        }
    }

    /// `min(d(x, y), d(y, x))`.
    #[inline]
    pub fn eval_min_sym_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.is_symmetric() {
            self.eval_unchecked(x, y)
        } else {
            self.eval_unchecked(x, y).min(self.eval_unchecked(y, x))
        }
    }
}

#[inline]
fn squared_l2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl fmt::Display for DistanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceSpec::L2 => f.write_str("l2"),
            DistanceSpec::Lp { p } => write!(f, "lp:p={p}"),
            DistanceSpec::L2Squared => f.write_str("l2sqr"),
            DistanceSpec::Cosine => f.write_str("cosine"),
            DistanceSpec::KlDiv => f.write_str("kldiv"),
            DistanceSpec::ItakuraSaito => f.write_str("itakurasaito"),
            DistanceSpec::Renyi { alpha } => write!(f, "renyi:alpha={alpha}"),
        }
    }
}

impl FromStr for DistanceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = Tagged::parse(s)?;
        let spec = match t.name {
            "l2" => {
                t.only(&[])?;
                DistanceSpec::L2
            }
            "lp" => DistanceSpec::Lp {
                p: t.only(&["p"])?.f64("p")?,
            },
            "l2sqr" => {
                t.only(&[])?;
                DistanceSpec::L2Squared
            }
            "cosine" => {
                t.only(&[])?;
                DistanceSpec::Cosine
            }
            "kldiv" => {
                t.only(&[])?;
                DistanceSpec::KlDiv
            }
            "itakurasaito" => {
                t.only(&[])?;
                DistanceSpec::ItakuraSaito
            }
            "renyi" => DistanceSpec::Renyi {
                alpha: t.only(&["alpha"])?.f64("alpha")?,
            },
            other => return Err(Error::invalid(format!("unknown distance `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws an ordered pair of distinct indices in `0..n` (`n >= 2`).
#[inline]
pub(crate) fn sample_pair<R: Rng>(rng: &mut R, n: usize) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Largest of `pair_count` sampled `f(i, j)` over ordered distinct pairs.
pub(crate) fn max_over_sampled_pairs<R: Rng>(
    rng: &mut R,
    n: usize,
    pair_count: usize,
    mut f: impl FnMut(usize, usize) -> f64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::NotEnoughPoints { needed: 2, got: n });
    }
    if pair_count == 0 {
        return Err(Error::invalid("pair_count must be positive"));
    }
    let mut best = 0.0f64;
    for _ in 0..pair_count {
        let (i, j) = sample_pair(rng, n);
        best = best.max(f(i, j));
    }
    Ok(best)
}

/// Empirical maximum distance over `pair_count` uniformly sampled ordered
/// pairs of distinct points.
pub fn estimate_dmax(
    spec: &DistanceSpec,
    data: &Dataset,
    pair_count: usize,
    seed: u64,
) -> Result<f64> {
    data.validate_for(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    max_over_sampled_pairs(&mut rng, data.len(), pair_count, |i, j| {
        spec.eval_unchecked(data.point(i), data.point(j))
    })
}
