//! Shared fixtures for the criterion benchmarks.

use nmvp_core::{fit, gen_rand_hist, Dataset, DistanceSpec, TransformSpec, TriGenFitConfig};

/// Data and query seeds used by every benchmark.
pub const DATA_SEED: u64 = 1;
pub const QUERY_SEED: u64 = 2;

/// RandHist points and held-out queries of the same dimension.
pub struct Workload {
    pub data: Dataset,
    pub queries: Dataset,
}

impl Workload {
    pub fn rand_hist(n: usize, dim: usize, queries: usize) -> Self {
        Workload {
            data: gen_rand_hist(n, dim, DATA_SEED, 1e-6).expect("valid generator arguments"),
            queries: gen_rand_hist(queries, dim, QUERY_SEED, 1e-6)
                .expect("valid generator arguments"),
        }
    }

    /// TriGen transform fitted with default settings at full accuracy.
    pub fn trigen_transform(&self, spec: &DistanceSpec) -> TransformSpec {
        fit(&self.data, spec, &TriGenFitConfig::default())
            .expect("fit succeeds at full accuracy")
            .transform
    }
}
