//! End-to-end flows across the library: text model -> canonical round trip,
//! LETOR ingest -> scoring -> trajectories -> oracle/classification -> sentinels.

use std::io::Cursor;

use exitlab::analysis::{self, QueryCategory};
use exitlab::ingest::{self, RankingDataset};
use exitlab::metrics;
use exitlab::model::{self, Ensemble};
use exitlab::scorer::{self, CheckpointSet};
use exitlab::sentinel::{self, SentinelConfig};

fn synthetic_pair(seed: u64) -> (Ensemble, RankingDataset) {
    let ensemble = model::generate_synthetic_ensemble(60, 4, 8, seed);
    let dataset = ingest::generate_synthetic_dataset(40, 4, 12, 8, seed ^ 0x9e37);
    (ensemble, dataset)
}

#[test]
fn letor_written_by_generator_parses_back_identically() {
    let dataset = ingest::generate_synthetic_dataset(25, 3, 9, 6, 11);
    let mut buf = Vec::new();
    ingest::write_letor(&dataset, &mut buf).unwrap();
    let reparsed = ingest::parse_letor(Cursor::new(&buf), Some(dataset.num_features)).unwrap();
    assert_eq!(reparsed.num_features, dataset.num_features);
    assert_eq!(reparsed.num_queries(), dataset.num_queries());
    for (a, b) in dataset.groups.iter().zip(&reparsed.groups) {
        assert_eq!(a.query_id, b.query_id);
        assert_eq!(a.len(), b.len());
        for (da, db) in a.documents.iter().zip(&b.documents) {
            assert_eq!(da.label, db.label);
            assert_eq!(da.features, db.features);
        }
    }
}

#[test]
fn canonical_model_round_trip_preserves_every_prediction() {
    let (ensemble, dataset) = synthetic_pair(7);
    let mut buf = Vec::new();
    model::write_canonical_model(&ensemble, &mut buf).unwrap();
    let reparsed = model::parse_canonical_model(Cursor::new(&buf)).unwrap();
    for group in &dataset.groups {
        let a = scorer::score_full(&ensemble, group);
        let b = scorer::score_full(&reparsed, group);
        assert_eq!(a, b, "round-tripped model diverged on {}", group.query_id);
    }
}

#[test]
fn trajectory_endpoints_match_full_model_scores() {
    let (ensemble, dataset) = synthetic_pair(3);
    let cps = scorer::make_checkpoints(ensemble.len(), 10, true).unwrap();
    let trajs = metrics::dataset_trajectories(&ensemble, &dataset, &cps, 10).unwrap();
    assert_eq!(trajs.len(), dataset.num_queries());
    for (traj, group) in trajs.iter().zip(&dataset.groups) {
        assert_eq!(traj.query_id, group.query_id);
        let scores = scorer::score_full(&ensemble, group);
        let labels = group.labels();
        let direct = metrics::ndcg_at_k(&scores, &labels, 10).unwrap();
        assert_eq!(traj.full_value(), direct.value);
    }
}

#[test]
fn oracle_exits_dominate_and_classes_cover_every_query() {
    let (ensemble, dataset) = synthetic_pair(19);
    let cps = scorer::make_checkpoints(ensemble.len(), 1, false).unwrap();
    let trajs = metrics::dataset_trajectories(&ensemble, &dataset, &cps, 10).unwrap();
    let mut improving = 0usize;
    for traj in &trajs {
        let exit = analysis::oracle_exit(traj);
        assert!(exit.exit_ndcg >= exit.full_ndcg);
        assert!(exit.exit_position >= 1 && exit.exit_position <= ensemble.len());
        let class = analysis::classify_query(traj, 0.01).unwrap();
        if class.category() == QueryCategory::Improving {
            improving += 1;
        }
        // A class-6 query peaks strictly above its final value, so its
        // oracle exit is strictly early and strictly better.
        if class == analysis::QueryClass::Class6 {
            assert!(exit.exit_position < ensemble.len());
            assert!(exit.exit_ndcg > exit.full_ndcg);
        }
    }
    // Random ensembles drift, so at least one query should move each way;
    // this guards against a degenerate all-flat fixture.
    assert!(improving > 0, "fixture produced no improving queries");
}

#[test]
fn sentinel_evaluation_agrees_with_manual_recombination() {
    let (ensemble, dataset) = synthetic_pair(29);
    let len = ensemble.len();
    let sentinels = vec![10, 30];
    let positions: Vec<usize> = sentinels.iter().copied().chain([len]).collect();
    let cps = CheckpointSet::new(positions, len).unwrap();
    let trajs = metrics::dataset_trajectories(&ensemble, &dataset, &cps, 10).unwrap();
    let config = SentinelConfig::new(sentinels, len).unwrap();
    let report = sentinel::evaluate_config(&config, &trajs, len).unwrap();

    // Recompute the overall line straight from the per-query exits.
    let exits = sentinel::decide_exits(&config, &trajs, len).unwrap();
    let mut exit_sum = 0.0;
    let mut full_sum = 0.0;
    let mut pos_sum = 0.0;
    for (traj, &exit) in trajs.iter().zip(&exits) {
        exit_sum += traj.value_at(exit).unwrap();
        full_sum += traj.full_value();
        pos_sum += exit as f64;
    }
    let n = trajs.len() as f64;
    assert_eq!(report.overall.num_queries, trajs.len());
    assert!((report.overall.ndcg_exit - exit_sum / n).abs() < 1e-12);
    assert!((report.overall.ndcg_full - full_sum / n).abs() < 1e-12);
    assert!((report.overall.mean_exit_position - pos_sum / n).abs() < 1e-9);
    let occupied: usize = report.rows.iter().map(|r| r.num_queries).sum();
    assert_eq!(occupied, trajs.len());
}

#[test]
fn best_searched_placement_never_loses_to_always_finishing() {
    let (ensemble, dataset) = synthetic_pair(41);
    let len = ensemble.len();
    let cps = scorer::make_checkpoints(len, 10, false).unwrap();
    let trajs = metrics::dataset_trajectories(&ensemble, &dataset, &cps, 10).unwrap();
    let candidates: Vec<usize> = cps
        .positions()
        .iter()
        .copied()
        .filter(|&p| p < len)
        .collect();
    let search = sentinel::search_placements(2, &candidates, &trajs, len).unwrap();
    let full_mean: f64 = trajs.iter().map(|t| t.full_value()).sum::<f64>() / trajs.len() as f64;
    // Exit positions are chosen by comparing against the final value, so the
    // winner can only match or beat running every tree.
    assert_eq!(
        search.best.positions(),
        search.ranking[0].sentinels.as_slice()
    );
    assert!(search.ranking[0].objective >= full_mean - 1e-12);
    // Ranking is complete (C(5,2) pairs for a 60-tree model at stride 10).
    assert_eq!(search.ranking.len(), 10);
    for pair in search.ranking.windows(2) {
        assert!(pair[0].objective >= pair[1].objective);
    }
}
