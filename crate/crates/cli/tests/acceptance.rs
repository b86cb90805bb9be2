//! Acceptance suite: the checks that gate this repository.
//!
//! Each test covers one numbered criterion and prints a single
//! `acceptance criterion N: PASS — ...` line when it holds (run with
//! `--nocapture` to see them). Criteria 1 and 2 pin the arithmetic of the
//! reference exit reports, 3–6 are randomized property checks with fixed
//! seeds, 7 drives the compiled binary, and 8 records what deliberately
//! stays out of scope.

mod common;

use std::fs;

use common::*;
use exitlab::analysis::{self, GroupRow};
use exitlab::ingest;
use exitlab::metrics::{self, NdcgTrajectory};
use exitlab::model;
use exitlab::scorer;
use exitlab::sentinel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

#[test]
fn criterion_1_group_rows_recombine_into_reference_overall_lines() {
    // Two sentinels at 25/300 on a 1,047-tree run.
    let rows = [
        GroupRow::new(25, 2024, 0.4399, 0.5161, 1047).unwrap(),
        GroupRow::new(300, 1339, 0.5391, 0.5694, 1047).unwrap(),
        GroupRow::new(1047, 2754, 0.5518, 0.5518, 1047).unwrap(),
    ];
    let a = analysis::aggregate_report(&rows, 6117, 1047).unwrap();
    assert!((a.ndcg_full - 0.5120).abs() <= 1e-4, "full {}", a.ndcg_full);
    assert!((a.ndcg_exit - 0.5439).abs() <= 1e-4, "exit {}", a.ndcg_exit);
    assert!((a.gain_pct - 6.2).abs() <= 0.1, "gain {}", a.gain_pct);
    assert!((a.speedup - 1.9).abs() <= 0.05, "speedup {}", a.speedup);

    // Three sentinels at 1/25/300 on the same run.
    let rows = [
        GroupRow::new(1, 1605, 0.4120, 0.5043, 1047).unwrap(),
        GroupRow::new(25, 901, 0.4933, 0.5509, 1047).unwrap(),
        GroupRow::new(300, 1157, 0.5497, 0.5795, 1047).unwrap(),
        GroupRow::new(1047, 2454, 0.5664, 0.5664, 1047).unwrap(),
    ];
    let b = analysis::aggregate_report(&rows, 6117, 1047).unwrap();
    assert!((b.ndcg_exit - 0.5503).abs() <= 1e-4, "exit {}", b.ndcg_exit);
    assert!((b.gain_pct - 7.5).abs() <= 0.1, "gain {}", b.gain_pct);
    assert!((b.speedup - 2.2).abs() <= 0.05, "speedup {}", b.speedup);

    // Two sentinels at 25/450 on a 1,304-tree run.
    let rows = [
        GroupRow::new(25, 1928, 0.7250, 0.7904, 1304).unwrap(),
        GroupRow::new(450, 1447, 0.7654, 0.7968, 1304).unwrap(),
        GroupRow::new(1304, 3153, 0.8052, 0.8052, 1304).unwrap(),
    ];
    let c = analysis::aggregate_report(&rows, 6528, 1304).unwrap();
    assert!((c.ndcg_exit - 0.7990).abs() <= 1e-4, "exit {}", c.ndcg_exit);
    assert!((c.gain_pct - 3.4).abs() <= 0.1, "gain {}", c.gain_pct);
    assert!((c.speedup - 1.8).abs() <= 0.05, "speedup {}", c.speedup);

    println!(
        "acceptance criterion 1: PASS — overall lines recombine to \
         {:.4}->{:.4} ({:+.2}%, {:.2}x), exit {:.4} ({:+.2}%, {:.2}x), \
         exit {:.4} ({:+.2}%, {:.2}x)",
        a.ndcg_full,
        a.ndcg_exit,
        a.gain_pct,
        a.speedup,
        b.ndcg_exit,
        b.gain_pct,
        b.speedup,
        c.ndcg_exit,
        c.gain_pct,
        c.speedup
    );
}

#[test]
fn criterion_2_per_group_speedups_match_reference_rounding() {
    let cases = [
        (1047usize, 25usize, 41.88, 0.02),
        (1047, 300, 3.49, 0.01),
        (1304, 25, 52.16, 0.02),
        (1304, 450, 2.898, 0.005),
    ];
    for (len, exit, expected, tol) in cases {
        let s = analysis::speedup(len, exit).unwrap();
        assert!(
            (s - expected).abs() <= tol,
            "speedup({len},{exit}) = {s}, want {expected} +- {tol}"
        );
    }
    assert_eq!(analysis::speedup(1047, 1).unwrap(), 1047.0);
    println!(
        "acceptance criterion 2: PASS — speedups 41.88, 3.49, 52.16, 2.898 \
         and the exact 1047 at exit 1"
    );
}

#[test]
fn criterion_3_oracle_dominates_and_refinement_never_hurts() {
    let len = 200;
    let ensemble = model::generate_synthetic_ensemble(len, 4, 8, 301);
    let dataset = ingest::generate_synthetic_dataset(100, 4, 14, 8, 302);
    assert!(dataset.num_queries() >= 100);

    let fine = scorer::make_checkpoints(len, 1, false).unwrap();
    let coarse = scorer::make_checkpoints(len, 25, false).unwrap();
    let fine_trajs = metrics::dataset_trajectories(&ensemble, &dataset, &fine, 10).unwrap();
    let coarse_trajs = metrics::dataset_trajectories(&ensemble, &dataset, &coarse, 10).unwrap();

    let mut strictly_better = 0usize;
    for (ft, ct) in fine_trajs.iter().zip(&coarse_trajs) {
        let fine_exit = analysis::oracle_exit(ft);
        let coarse_exit = analysis::oracle_exit(ct);
        // Dominance: the oracle beats every prefix, including the full run.
        for &v in &ft.values {
            assert!(fine_exit.exit_ndcg >= v);
        }
        assert!(fine_exit.exit_ndcg >= ft.full_value());
        // Refining the checkpoint grid can only add exit opportunities.
        assert!(
            fine_exit.exit_ndcg >= coarse_exit.exit_ndcg,
            "{}: stride-1 oracle {} below stride-25 oracle {}",
            ft.query_id,
            fine_exit.exit_ndcg,
            coarse_exit.exit_ndcg
        );
        if fine_exit.exit_ndcg > coarse_exit.exit_ndcg {
            strictly_better += 1;
        }
    }
    println!(
        "acceptance criterion 3: PASS — oracle dominance on {} queries at \
         stride 1; refinement from stride 25 never decreased a query's \
         oracle NDCG (improved {} of them)",
        fine_trajs.len(),
        strictly_better
    );
}

/// Brute-force enumerator written independently of the search module: the
/// objective of a pair is the mean over queries of the best NDCG reachable
/// at either sentinel or the full run, and ties go to the smaller pair.
fn brute_force_best_pair(candidates: &[usize], trajs: &[NdcgTrajectory]) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut pairs = 0;
    for i in 0..candidates.len() {
        for j in (i + 1)..candidates.len() {
            pairs += 1;
            let (a, b) = (candidates[i], candidates[j]);
            let mut sum = 0.0;
            for t in trajs {
                let va = t.value_at(a).unwrap();
                let vb = t.value_at(b).unwrap();
                sum += va.max(vb).max(t.full_value());
            }
            let objective = sum / trajs.len() as f64;
            let replace = match &best {
                None => true,
                Some((pair, obj)) => objective > *obj || (objective == *obj && vec![a, b] < *pair),
            };
            if replace {
                best = Some((vec![a, b], objective));
            }
        }
    }
    assert_eq!(pairs, candidates.len() * (candidates.len() - 1) / 2);
    best.unwrap()
}

#[test]
fn criterion_4_search_matches_independent_brute_force() {
    let len = 200;
    let candidates: Vec<usize> = (1..8).map(|i| i * 25).collect();
    assert_eq!(candidates.len(), 7);
    let cps = scorer::make_checkpoints(len, 25, false).unwrap();

    for seed in 0..10u64 {
        let ensemble = model::generate_synthetic_ensemble(len, 4, 8, 400 + seed);
        let dataset = ingest::generate_synthetic_dataset(50, 4, 12, 8, 500 + seed);
        let trajs = metrics::dataset_trajectories(&ensemble, &dataset, &cps, 10).unwrap();

        let search = sentinel::search_placements(2, &candidates, &trajs, len).unwrap();
        assert_eq!(search.ranking.len(), 21);
        let (brute_pair, brute_obj) = brute_force_best_pair(&candidates, &trajs);

        assert_eq!(
            search.best.positions(),
            brute_pair.as_slice(),
            "seed {seed}: search winner disagrees with brute force"
        );
        assert!(
            (search.ranking[0].objective - brute_obj).abs() < 1e-12,
            "seed {seed}: objective {} vs brute force {}",
            search.ranking[0].objective,
            brute_obj
        );
    }
    println!(
        "acceptance criterion 4: PASS — exhaustive search equals the \
         brute-force enumerator over all 21 pairs for 10 seeds"
    );
}

/// All permutations of `0..n` via Heap's algorithm.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut items, &mut out);
    out
}

#[test]
fn criterion_5_ndcg_agrees_with_a_permutation_oracle() {
    // Independent formula evaluation: gains via powi, explicit log2
    // discounts, stable descending sort by score.
    let gain = |label: u8| 2f64.powi(label as i32) - 1.0;
    let dcg_of = |ranked: &[u8]| -> f64 {
        ranked
            .iter()
            .enumerate()
            .map(|(i, &l)| gain(l) / ((i + 2) as f64).log2())
            .sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut zero_sets = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.5 // deliberate ties exercise ordinal tie-breaking
                } else {
                    rng.gen_range(-2.0..2.0)
                }
            })
            .collect();

        // The best permutation must attain the ideal DCG exactly.
        let best_perm_dcg = permutations(n)
            .iter()
            .map(|perm| {
                let ranked: Vec<u8> = perm.iter().map(|&i| labels[i]).collect();
                dcg_of(&ranked)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let mut ideal = labels.clone();
        ideal.sort_unstable_by(|x, y| y.cmp(x));
        let idcg = dcg_of(&ideal);
        assert_eq!(best_perm_dcg, idcg, "labels {labels:?}");

        // Direct formula evaluation of the score-induced ranking.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).unwrap().then(x.cmp(&y)));
        let ranked: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
        let direct = if idcg == 0.0 {
            zero_sets += 1;
            0.0
        } else {
            dcg_of(&ranked) / idcg
        };
        let computed = metrics::ndcg_at_k(&scores, &labels, 10).unwrap();
        assert!(
            (computed.value - direct).abs() < 1e-12,
            "scores {scores:?} labels {labels:?}: {} vs {direct}",
            computed.value
        );
        assert_eq!(computed.zero_idcg, idcg == 0.0);
    }

    // The worked three-document example reproduces its quoted value.
    let worked = metrics::ndcg_at_k(&[0.5, 0.9, 0.1], &[3, 2, 0], 10).unwrap();
    assert!(
        (worked.value - 0.83400).abs() < 1e-5,
        "worked {}",
        worked.value
    );

    println!(
        "acceptance criterion 5: PASS — 1,000 random label/score sets match \
         the permutation oracle ({} all-irrelevant), worked example {:.5}",
        zero_sets, worked.value
    );
}

#[test]
fn criterion_6_prefix_scores_are_consistent_with_full_scoring() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for pair in 0..50u64 {
        let len = rng.gen_range(20..=120);
        let features = rng.gen_range(4..=10);
        let ensemble =
            model::generate_synthetic_ensemble(len, rng.gen_range(2..=5), features, pair);
        let dataset =
            ingest::generate_synthetic_dataset(rng.gen_range(2..=6), 2, 10, features, 1000 + pair);
        let stride = rng.gen_range(1..=len);
        let cps = scorer::make_checkpoints(len, stride, rng.gen_bool(0.5)).unwrap();

        for group in &dataset.groups {
            let matrix = scorer::score_prefixes(&ensemble, group, &cps);
            let full = scorer::score_full(&ensemble, group);
            assert_eq!(matrix.last_row(), full.as_slice(), "pair {pair}");

            // Row differences equal independently traversed tree outputs.
            let positions = cps.positions();
            for (row_idx, &pos) in positions.iter().enumerate() {
                let prev_pos = if row_idx == 0 {
                    0
                } else {
                    positions[row_idx - 1]
                };
                let prev_row: Vec<f64> = if row_idx == 0 {
                    vec![ensemble.base_score(); group.len()]
                } else {
                    matrix.row(row_idx - 1).to_vec()
                };
                for (d, doc) in group.documents.iter().enumerate() {
                    let independent: f64 = ensemble.trees()[prev_pos..pos]
                        .iter()
                        .map(|t| t.traverse(&doc.features))
                        .sum();
                    let diff = matrix.row(row_idx)[d] - prev_row[d];
                    assert!(
                        (diff - independent).abs() <= 1e-12,
                        "pair {pair} row {row_idx} doc {d}: {diff} vs {independent}"
                    );
                }
            }
        }
    }
    println!(
        "acceptance criterion 6: PASS — 50 random ensemble/dataset pairs: \
         terminal rows bit-exact, row differences match per-tree sums"
    );
}

#[test]
fn criterion_7_evaluate_is_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let gen_dir = tmp.path().join("gen");
    let out = run(&[
        "gen-synthetic",
        "--num-trees",
        "150",
        "--num-queries",
        "80",
        "--seed",
        "77",
        "--out-dir",
        gen_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let mut artifacts = Vec::new();
    for threads in ["1", "8"] {
        let out_dir = tmp.path().join(format!("t{threads}"));
        let out = run(&[
            "evaluate",
            "--model",
            gen_dir.join("model.json").to_str().unwrap(),
            "--model-format",
            "canonical",
            "--test",
            gen_dir.join("dataset.letor").to_str().unwrap(),
            "--sentinels",
            "30,90",
            "--threads",
            threads,
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_ok(&out);
        artifacts.push((
            fs::read(out_dir.join("report.tsv")).unwrap(),
            fs::read(out_dir.join("report.json")).unwrap(),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "report.tsv differs");
    assert_eq!(artifacts[0].1, artifacts[1].1, "report.json differs");
    println!(
        "acceptance criterion 7: PASS — evaluate with --threads 1 and 8 \
         wrote byte-identical report.tsv and report.json"
    );
}

#[test]
fn criterion_8_benchmark_scale_results_are_documented_not_gated() {
    // The absolute numbers measured on the large public ranking collections
    // need those datasets plus a trained ~1,000-tree model, neither of
    // which ships here. The README's reproduction guide covers the
    // pipeline; criteria 1-7 gate the repository.
    println!(
        "acceptance criterion 8: NOTE — large-scale dataset results are \
         documented in the README reproduction guide and intentionally not \
         gated by this suite"
    );
}
