// Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

//! Shared fixtures for the binary's integration tests.
//!
//! The workhorse is the "delta tree": a tree that adds a chosen amount to
//! exactly one document of one query and zero to everything else. Stacking
//! delta trees at chosen positions inside a run of zero-output filler trees
//! lets a test engineer any NDCG trajectory shape it needs, document by
//! document, checkpoint by checkpoint.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use exitlab::ingest::{self, Document, QueryGroup, RankingDataset};
use exitlab::model::{self, Ensemble, RegressionTree, TreeNode};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_exitlab")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("failed to launch the exitlab binary")
}

pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Adds `delta` to the document whose query-selector feature (feature 1)
/// equals `query` and whose ordinal feature (feature 2) equals `doc`.
pub fn delta_tree(query: f64, doc: f64, delta: f64) -> RegressionTree {
    let nodes = vec![
        TreeNode::Internal {
            split_feature: 1,
            threshold: query - 0.5,
            left: 1,
            right: 2,
            default_left: true,
        },
        TreeNode::Leaf { value: 0.0 },
        TreeNode::Internal {
            split_feature: 1,
            threshold: query + 0.5,
            left: 3,
            right: 4,
            default_left: true,
        },
        TreeNode::Internal {
            split_feature: 2,
            threshold: doc - 0.5,
            left: 5,
            right: 6,
            default_left: true,
        },
        TreeNode::Leaf { value: 0.0 },
        TreeNode::Leaf { value: 0.0 },
        TreeNode::Internal {
            split_feature: 2,
            threshold: doc + 0.5,
            left: 7,
            right: 8,
            default_left: true,
        },
        TreeNode::Leaf { value: delta },
        TreeNode::Leaf { value: 0.0 },
    ];
    RegressionTree::new(nodes).expect("delta tree is well formed")
}

pub fn zero_tree() -> RegressionTree {
    RegressionTree::new(vec![TreeNode::Leaf { value: 0.0 }]).expect("leaf tree")
}

/// An ensemble of `len` trees where each `(position, query, doc, delta)`
/// entry (1-based tree position) is a delta tree and every other slot is a
/// zero-output filler.
pub fn delta_ensemble(len: usize, deltas: &[(usize, f64, f64, f64)]) -> Ensemble {
    let mut trees: Vec<RegressionTree> = (0..len).map(|_| zero_tree()).collect();
    for &(pos, query, doc, delta) in deltas {
        assert!((1..=len).contains(&pos), "delta position out of range");
        trees[pos - 1] = delta_tree(query, doc, delta);
    }
    Ensemble::new(trees, 2, 0.0).expect("fixture ensemble is well formed")
}

/// One query group per `(query_id, labels)` entry. Feature 1 carries the
/// 1-based group index (the delta trees' query selector), feature 2 the
/// document ordinal.
pub fn selector_dataset(specs: &[(&str, &[u8])]) -> RankingDataset {
    let groups = specs
        .iter()
        .enumerate()
        .map(|(qi, (qid, labels))| QueryGroup {
            query_id: (*qid).to_string(),
            documents: labels
                .iter()
                .enumerate()
                .map(|(d, &label)| Document {
                    label,
                    features: vec![(qi + 1) as f64, d as f64],
                    ordinal: d,
                })
                .collect(),
        })
        .collect();
    RankingDataset {
        groups,
        num_features: 2,
    }
}

/// Writes the fixture pair as `model.json` + `data.letor` under `dir`.
pub fn write_fixture(
    dir: &Path,
    ensemble: &Ensemble,
    dataset: &RankingDataset,
) -> (PathBuf, PathBuf) {
    let model_path = dir.join("model.json");
    let data_path = dir.join("data.letor");
    let model_file = BufWriter::new(File::create(&model_path).unwrap());
    model::write_canonical_model(ensemble, model_file).unwrap();
    let data_file = BufWriter::new(File::create(&data_path).unwrap());
    ingest::write_letor(dataset, data_file).unwrap();
    (model_path, data_path)
}

/// Reads a TSV report into rows of cells, header included.
pub fn read_tsv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
        .lines()
        .map(|line| line.split('\t').map(str::to_string).collect())
        .collect()
}

/// Column index of `name` in a header row.
pub fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name:?} in {header:?}"))
}

/// The `value` cell for `key` in a key/value summary file.
pub fn kv_lookup(rows: &[Vec<String>], key: &str) -> String {
    rows.iter()
        .skip(1)
        .find(|r| r[0] == key)
        .unwrap_or_else(|| panic!("no key {key:?}"))[1]
        .clone()
}
