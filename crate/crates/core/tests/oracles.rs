//! Examples checked against independent oracles: exhaustive scans written
//! separately from the library, Monte-Carlo estimates and hand geometry.

use nmvp_core::datagen::GroundTruth;
use nmvp_core::pruners::{evaluate_pruner, tune_on_index, TuningGrid};
use nmvp_core::transform::violation_fraction;
use nmvp_core::{
    brute_force_knn, estimate_dmax, fit, gen_rand_hist, recall, Base, Dataset, DistanceSpec,
    PrunerSpec, SearchMode, Symmetrization, TransformSpec, TriGenFitConfig, TuneConfig, VpTree,
};

/// Sorts every point by `(distance, id)` with a plain loop over the table
/// formulas, independent of the library kernels.
fn reference_knn(data: &Dataset, q: &[f64], spec: &str, k: usize) -> Vec<usize> {
    let dist = |x: &[f64]| -> f64 {
        match spec {
            "l2" => x
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt(),
            "kldiv" => x.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum(),
            "itakurasaito" => x
                .iter()
                .zip(q)
                .map(|(a, b)| a / b - (a / b).ln() - 1.0)
                .sum(),
            _ => unreachable!(),
        }
    };
    let mut all: Vec<(f64, usize)> = data.iter().enumerate().map(|(i, x)| (dist(x), i)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|p| p.1).collect()
}

#[test]
fn brute_force_matches_an_independent_scan() {
    let data = gen_rand_hist(2000, 8, 11, 1e-6).unwrap();
    let queries = gen_rand_hist(30, 8, 12, 1e-6).unwrap();
    for name in ["l2", "kldiv", "itakurasaito"] {
        let spec: DistanceSpec = name.parse().unwrap();
        for k in [1, 10, 57] {
            let truth = brute_force_knn(&data, &queries, &spec, k, false).unwrap();
            for (q, list) in queries.iter().zip(&truth.lists) {
                let ids: Vec<usize> = list.iter().map(|n| n.id).collect();
                assert_eq!(ids, reference_knn(&data, q, name, k), "{name}, k = {k}");
                assert!(list.windows(2).all(|w| w[0].distance <= w[1].distance));
            }
            assert_eq!(recall(&truth.ids(), &truth).unwrap(), 1.0);
        }
    }
}

#[test]
fn parallel_ground_truth_equals_sequential() {
    let data = gen_rand_hist(1500, 8, 13, 1e-6).unwrap();
    let queries = gen_rand_hist(40, 8, 14, 1e-6).unwrap();
    let a = brute_force_knn(&data, &queries, &DistanceSpec::KlDiv, 10, false).unwrap();
    let b = brute_force_knn(&data, &queries, &DistanceSpec::KlDiv, 10, true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dmax_estimate_is_close_to_the_exhaustive_maximum() {
    let data = gen_rand_hist(1000, 8, 21, 1e-6).unwrap();
    let spec = DistanceSpec::KlDiv;
    let mut exact = 0.0f64;
    for (i, x) in data.iter().enumerate() {
        for (j, y) in data.iter().enumerate() {
            if i != j {
                exact = exact.max(spec.eval_unchecked(x, y));
            }
        }
    }
    let est = estimate_dmax(&spec, &data, 1_000_000, 5).unwrap();
    assert!(est <= exact * (1.0 + 1e-12));
    assert!(est >= 0.95 * exact, "estimate {est}, exhaustive {exact}");
    assert_eq!(est, estimate_dmax(&spec, &data, 1_000_000, 5).unwrap());
}

#[test]
fn rand_hist_components_average_one_over_d() {
    let data = gen_rand_hist(100_000, 8, 31, 1e-6).unwrap();
    let mut means = [0.0f64; 8];
    for x in data.iter() {
        for (m, v) in means.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in means {
        let m = m / data.len() as f64;
        assert!((m - 0.125).abs() <= 0.005, "component mean {m}");
    }
    assert_eq!(data, gen_rand_hist(100_000, 8, 31, 1e-6).unwrap());
}

#[test]
fn statistical_divergences_are_asymmetric_somewhere() {
    let pts = gen_rand_hist(200, 8, 41, 1e-6).unwrap();
    for spec in [
        DistanceSpec::KlDiv,
        DistanceSpec::renyi(0.25).unwrap(),
        DistanceSpec::renyi(2.0).unwrap(),
    ] {
        let found = (0..pts.len() - 1).any(|i| {
            let (x, y) = (pts.point(i), pts.point(i + 1));
            let (a, b) = (spec.eval(x, y).unwrap(), spec.eval(y, x).unwrap());
            (a - b).abs() > 1e-3 * a.max(b)
        });
        assert!(found, "{spec} looked symmetric");
    }
}

#[test]
fn triples_of_a_squared_line_all_violate() {
    let data = Dataset::from_points(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
    let t = TransformSpec::new(Base::Identity, Some(4.0), Symmetrization::None).unwrap();
    assert_eq!(
        violation_fraction(&t, &DistanceSpec::L2Squared, &data, 500, 1).unwrap(),
        1.0
    );
    assert_eq!(
        violation_fraction(&t, &DistanceSpec::L2, &data, 500, 1).unwrap(),
        0.0
    );
}

#[test]
fn stronger_concavity_removes_violations() {
    let data = gen_rand_hist(3000, 8, 51, 1e-6).unwrap();
    let spec = DistanceSpec::KlDiv;
    let d_max = estimate_dmax(&spec, &data, 200_000, 1).unwrap();
    let at = |w: f64| {
        let t = TransformSpec::new(Base::Fp { w }, Some(d_max), Symmetrization::MinSym).unwrap();
        violation_fraction(&t, &spec, &data, 10_000, 7).unwrap()
    };
    let (v0, vmax) = (at(0.0), at((1u64 << 20) as f64));
    assert!(v0 > 0.0);
    assert!(vmax <= v0);
}

#[test]
fn fit_leaves_metrics_unstretched() {
    let data = gen_rand_hist(2000, 8, 61, 1e-6).unwrap();
    let report = fit(&data, &DistanceSpec::L2, &TriGenFitConfig::default()).unwrap();
    let cfg = TriGenFitConfig::default();
    assert!(report.transform.base.weight() <= cfg.w_tolerance);
    assert_eq!(report.violation_fraction, 0.0);
}

#[test]
fn fit_reaches_full_accuracy_on_kl() {
    let data = gen_rand_hist(5000, 8, 71, 1e-6).unwrap();
    let report = fit(&data, &DistanceSpec::KlDiv, &TriGenFitConfig::default()).unwrap();
    assert_eq!(report.violation_fraction, 0.0);
    assert_eq!(report.transform.symmetrization, Symmetrization::MinSym);
    assert!(report.transform.d_max.is_some());
    assert!(report.intrinsic_dim.is_finite());
}

#[test]
fn tuning_for_full_recall_on_l2_stays_exact() {
    let data = gen_rand_hist(5000, 8, 81, 1e-6).unwrap();
    let train = gen_rand_hist(60, 8, 82, 1e-6).unwrap();
    let test = gen_rand_hist(60, 8, 83, 1e-6).unwrap();
    let spec = DistanceSpec::L2;
    let report = nmvp_core::tune(
        &data,
        &train,
        &spec,
        SearchMode::Plain(TransformSpec::identity()),
        &TuneConfig {
            target_recall: 1.0,
            ..TuneConfig::default()
        },
    )
    .unwrap();
    assert!(report.target_met);
    let index = VpTree::build(
        &data,
        spec,
        SearchMode::Plain(TransformSpec::identity()),
        50,
        0,
    )
    .unwrap();
    let truth = brute_force_knn(&data, &test, &spec, 10, false).unwrap();
    let (held_out, _) = evaluate_pruner(&index, &test, &truth, &report.pruner).unwrap();
    assert_eq!(held_out, 1.0);
}

#[test]
fn tiny_targets_pick_the_cheapest_grid_point() {
    let data = gen_rand_hist(3000, 8, 91, 1e-6).unwrap();
    let train = gen_rand_hist(40, 8, 92, 1e-6).unwrap();
    let spec = DistanceSpec::KlDiv;
    let index = VpTree::build(
        &data,
        spec,
        SearchMode::Plain(TransformSpec::identity()),
        50,
        0,
    )
    .unwrap();
    let truth = brute_force_knn(&data, &train, &spec, 10, false).unwrap();
    let report =
        tune_on_index(&index, &train, &truth, 1e-6, &TuningGrid::default(), false).unwrap();
    assert!(report.target_met);
    assert!(report.recall >= 1e-6);
    let cheapest = report
        .rows
        .iter()
        .map(|r| r.mean_dist_comps)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(report.mean_dist_comps, cheapest);
}

#[test]
fn tuned_pruner_meets_the_target_on_training_queries() {
    let data = gen_rand_hist(4000, 8, 101, 1e-6).unwrap();
    let train = gen_rand_hist(50, 8, 102, 1e-6).unwrap();
    let spec = DistanceSpec::ItakuraSaito;
    let index = VpTree::build(
        &data,
        spec,
        SearchMode::Plain(TransformSpec::identity()),
        50,
        0,
    )
    .unwrap();
    let truth = brute_force_knn(&data, &train, &spec, 10, false).unwrap();
    for target in [0.5, 0.8, 0.95] {
        let report = tune_on_index(
            &index,
            &train,
            &truth,
            target,
            &TuningGrid::default(),
            false,
        )
        .unwrap();
        if report.rows.iter().any(|r| r.recall >= target) {
            assert!(report.target_met);
            assert!(report.recall >= target);
            let (again, _) = evaluate_pruner(&index, &train, &truth, &report.pruner).unwrap();
            assert_eq!(again, report.recall);
        }
    }
}

#[test]
fn tree_search_with_the_metric_pruner_is_exact_on_rand_hist_l2() {
    let data = gen_rand_hist(20_000, 8, 111, 1e-6).unwrap();
    let queries = gen_rand_hist(100, 8, 112, 1e-6).unwrap();
    let truth: GroundTruth =
        brute_force_knn(&data, &queries, &DistanceSpec::L2, 10, false).unwrap();
    let index = VpTree::build(
        &data,
        DistanceSpec::L2,
        SearchMode::Plain(TransformSpec::identity()),
        50,
        3,
    )
    .unwrap();
    for (q, want) in queries.iter().zip(truth.ids()) {
        assert_eq!(
            index.knn_search(q, 10, &PrunerSpec::Metric).unwrap().ids(),
            want
        );
    }
}
