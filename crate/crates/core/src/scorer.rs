//! Prefix scoring: ensemble scores accumulated tree by tree and snapshotted
//! at a set of checkpoints.
//!
//! Accumulation is strictly left-to-right in boosting order with one f64
//! accumulator per document, so the final checkpoint row of
//! [`score_prefixes`] is bit-identical to [`score_full`], and scores at a
//! given checkpoint do not depend on which other checkpoints were requested.

use crate::error::{Error, Result};
use crate::ingest::QueryGroup;
use crate::model::Ensemble;

/// Strictly increasing 1-based tree positions at which prefix scores are
/// recorded. Always ends at the ensemble length L.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointSet {
    positions: Vec<usize>,
}

impl CheckpointSet {
    /// Validates that `positions` is non-empty, strictly increasing, within
    /// 1..=ensemble_len, and ends exactly at `ensemble_len`.
    pub fn new(positions: Vec<usize>, ensemble_len: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::arg("checkpoint set is empty"));
        }
        if positions[0] == 0 {
            return Err(Error::arg("checkpoint positions are 1-based"));
        }
        if !positions.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::arg(
                "checkpoint positions must be strictly increasing",
            ));
        }
        if *positions.last().unwrap() != ensemble_len {
            return Err(Error::arg(format!(
                "last checkpoint must be the ensemble length {ensemble_len}"
            )));
        }
        Ok(CheckpointSet { positions })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The terminal checkpoint, i.e. the ensemble length L.
    pub fn last(&self) -> usize {
        *self.positions.last().unwrap()
    }

    /// Index of `position` within the set, if present.
    pub fn index_of(&self, position: usize) -> Option<usize> {
        self.positions.binary_search(&position).ok()
    }
}

/// Builds the checkpoint set {stride, 2·stride, ...} ∩ [1, L] ∪ {L},
/// additionally including tree 1 when `include_first_tree` is set.
pub fn make_checkpoints(
    ensemble_len: usize,
    stride: usize,
    include_first_tree: bool,
) -> Result<CheckpointSet> {
    if ensemble_len == 0 {
        return Err(Error::arg("ensemble length must be >= 1"));
    }
    if stride == 0 || stride > ensemble_len {
        return Err(Error::arg(format!(
            "stride must be in 1..={ensemble_len}, got {stride}"
        )));
    }
    let mut positions: Vec<usize> = (stride..=ensemble_len).step_by(stride).collect();
    if include_first_tree {
        positions.push(1);
    }
    positions.push(ensemble_len);
    positions.sort_unstable();
    positions.dedup();
    CheckpointSet::new(positions, ensemble_len)
}

/// Per-query prefix scores: `scores[c][d]` is document `d`'s accumulated
/// score after the first `checkpoints[c]` trees (base score included).
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixScoreMatrix {
    pub query_id: String,
    checkpoints: CheckpointSet,
    scores: Vec<Vec<f64>>,
}

impl PrefixScoreMatrix {
    /// Builds a matrix from externally computed rows; `scores` must hold one
    /// row per checkpoint, all of equal width.
    pub fn new(
        query_id: String,
        checkpoints: CheckpointSet,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if scores.len() != checkpoints.len() {
            return Err(Error::arg(format!(
                "{} score rows for {} checkpoints",
                scores.len(),
                checkpoints.len()
            )));
        }
        if scores.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::arg("score rows have unequal widths"));
        }
        Ok(PrefixScoreMatrix {
            query_id,
            checkpoints,
            scores,
        })
    }

    pub fn checkpoints(&self) -> &CheckpointSet {
        &self.checkpoints
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn row(&self, checkpoint_index: usize) -> &[f64] {
        &self.scores[checkpoint_index]
    }

    pub fn last_row(&self) -> &[f64] {
        self.scores.last().unwrap()
    }

    pub fn num_docs(&self) -> usize {
        self.scores.first().map_or(0, |r| r.len())
    }
}

/// Scores every document of a group with the full ensemble.
pub fn score_full(ensemble: &Ensemble, group: &QueryGroup) -> Vec<f64> {
    group
        .documents
        .iter()
        .map(|doc| {
            let mut acc = ensemble.base_score();
            for tree in ensemble.trees() {
                acc += tree.traverse(&doc.features);
            }
            acc
        })
        .collect()
}

/// Scores a group once, snapshotting accumulated scores at each checkpoint.
/// `checkpoints` must have been built for this ensemble's length.
pub fn score_prefixes(
    ensemble: &Ensemble,
    group: &QueryGroup,
    checkpoints: &CheckpointSet,
) -> PrefixScoreMatrix {
    assert_eq!(
        checkpoints.last(),
        ensemble.len(),
        "checkpoint set was built for a different ensemble length"
    );
    let mut acc: Vec<f64> = vec![ensemble.base_score(); group.len()];
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    for (t, tree) in ensemble.trees().iter().enumerate() {
        for (a, doc) in acc.iter_mut().zip(&group.documents) {
            *a += tree.traverse(&doc.features);
        }
        while next < checkpoints.len() && checkpoints.positions()[next] == t + 1 {
            rows.push(acc.clone());
            next += 1;
        }
    }
    debug_assert_eq!(rows.len(), checkpoints.len());
    PrefixScoreMatrix {
        query_id: group.query_id.clone(),
        checkpoints: checkpoints.clone(),
        scores: rows,
    }
}
