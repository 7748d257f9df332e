use std::collections::HashSet;

use susketch_core::corpus::{build_corpus_records, generate_random_level, split_dataset, GeneratorParams};
use susketch_core::level::TILES;
use susketch_core::{extract_metrics, is_valid_match, simulate_match, TileKind};

#[test]
fn wall_fraction_tracks_density() {
    for density in [0.05, 0.1, 0.2] {
        let params = GeneratorParams {
            wall_density: density,
            ..Default::default()
        };
        let walls: usize = (0..10_000u64)
            .map(|s| {
                let level = generate_random_level(s, &params).unwrap();
                level.tiles().iter().filter(|t| **t == TileKind::Wall).count()
            })
            .sum();
        let mean = walls as f64 / (10_000 * TILES) as f64;
        assert!((mean - density).abs() <= 0.03, "density {density}: {mean}");
    }
}

#[test]
fn records_replay_and_pairs_are_uniform() {
    let corpus = build_corpus_records(2000, 77, &Default::default()).unwrap();
    assert_eq!(corpus.records.len(), 2000);
    let mut counts = [0usize; 25];
    for r in &corpus.records {
        counts[r.classes().index()] += 1;
    }
    // Pearson chi-square with 24 degrees of freedom; 51.2 is the 0.999 quantile.
    let expected = 2000.0 / 25.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 51.2, "{chi2} {counts:?}");

    for r in corpus.records.iter().step_by(20) {
        let trace = simulate_match(&r.level, &r.class1.preset(), &r.class2.preset(), r.seed).unwrap();
        assert!(is_valid_match(&trace));
        assert!(extract_metrics(&trace).rounded().max_abs_diff(&r.metrics) < 1e-12);
    }
}

#[test]
fn split_seeds_give_distinct_test_sets() {
    let sets: HashSet<Vec<usize>> = (0..5)
        .map(|s| {
            let mut t = split_dataset(1000, 0.2, s).unwrap().test;
            t.sort_unstable();
            t
        })
        .collect();
    assert_eq!(sets.len(), 5);
}
