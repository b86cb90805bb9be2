//! Ranking quality: NDCG@k and per-query NDCG trajectories over ensemble
//! prefixes.
//!
//! DCG uses the exponential-gain form Σ (2^rel − 1) / log2(rank + 1) over
//! the first k ranked documents; NDCG divides by the DCG of the ideal
//! (label-sorted) ordering. Queries whose labels are all zero have no ideal
//! ordering to normalize by: their NDCG is defined as 0.0 and they carry a
//! `zero_idcg` flag so callers can count or exclude them.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::ingest::{QueryGroup, RankingDataset};
use crate::model::Ensemble;
use crate::scorer::{score_prefixes, CheckpointSet, PrefixScoreMatrix};

/// An NDCG value plus whether the query had an all-zero label set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdcgScore {
    pub value: f64,
    pub zero_idcg: bool,
}

/// Returns document positions ordered by descending score; ties are broken
/// by ascending ordinal. `scores` and `ordinals` must have equal lengths.
pub fn rank_documents(scores: &[f64], ordinals: &[usize]) -> Vec<usize> {
    assert_eq!(scores.len(), ordinals.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| ordinals[a].cmp(&ordinals[b]))
    });
    order
}

/// Ranking with the input position as the tie-break ordinal, which is the
/// document ordering convention used throughout this crate.
fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.cmp(&b))
    });
    order
}

/// DCG of labels already in rank order, truncated at k.
pub fn dcg_at_k(ranked_labels: &[u8], k: usize) -> f64 {
    ranked_labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &rel)| ((rel as f64).exp2() - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k of one score vector against its labels. Ranks by descending
/// score with ties broken by input position.
pub fn ndcg_at_k(scores: &[f64], labels: &[u8], k: usize) -> Result<NdcgScore> {
    if k == 0 {
        return Err(Error::arg("NDCG cutoff k must be >= 1"));
    }
    if scores.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let ranked: Vec<u8> = rank_by_score(scores)
        .into_iter()
        .map(|i| labels[i])
        .collect();
    let mut ideal = labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        return Ok(NdcgScore {
            value: 0.0,
            zero_idcg: true,
        });
    }
    Ok(NdcgScore {
        value: dcg_at_k(&ranked, k) / idcg,
        zero_idcg: false,
    })
}

/// A query's NDCG@k at each checkpoint of a prefix-score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NdcgTrajectory {
    pub query_id: String,
    /// Checkpoint positions (1-based tree counts), ending at L.
    pub positions: Vec<usize>,
    /// NDCG@k after each checkpoint, aligned with `positions`.
    pub values: Vec<f64>,
    pub k: usize,
    /// True when the query has no relevant documents (all labels zero).
    pub zero_idcg: bool,
}

impl NdcgTrajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The terminal checkpoint, i.e. the ensemble length L.
    pub fn ensemble_len(&self) -> usize {
        *self.positions.last().unwrap()
    }

    /// NDCG of the full ensemble (value at the terminal checkpoint).
    pub fn full_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn index_of(&self, position: usize) -> Option<usize> {
        self.positions.binary_search(&position).ok()
    }

    /// NDCG at an exact checkpoint position, if it is in the set.
    pub fn value_at(&self, position: usize) -> Option<f64> {
        self.index_of(position).map(|i| self.values[i])
    }
}

/// Evaluates NDCG@k on every row of a prefix-score matrix.
pub fn ndcg_trajectory(
    matrix: &PrefixScoreMatrix,
    labels: &[u8],
    k: usize,
) -> Result<NdcgTrajectory> {
    let mut values = Vec::with_capacity(matrix.rows().len());
    let mut zero_idcg = false;
    for row in matrix.rows() {
        let s = ndcg_at_k(row, labels, k)?;
        zero_idcg = s.zero_idcg;
        values.push(s.value);
    }
    Ok(NdcgTrajectory {
        query_id: matrix.query_id.clone(),
        positions: matrix.checkpoints().positions().to_vec(),
        values,
        k,
        zero_idcg,
    })
}

/// Scores one group at the given checkpoints and evaluates its trajectory.
pub fn query_trajectory(
    ensemble: &Ensemble,
    group: &QueryGroup,
    checkpoints: &CheckpointSet,
    k: usize,
) -> Result<NdcgTrajectory> {
    ndcg_trajectory(
        &score_prefixes(ensemble, group, checkpoints),
        &group.labels(),
        k,
    )
}

/// Trajectories for every query of a dataset, in dataset order.
pub fn dataset_trajectories(
    ensemble: &Ensemble,
    dataset: &RankingDataset,
    checkpoints: &CheckpointSet,
    k: usize,
) -> Result<Vec<NdcgTrajectory>> {
    dataset
        .groups
        .iter()
        .map(|g| query_trajectory(ensemble, g, checkpoints, k))
        .collect()
}

/// Arithmetic mean in fixed input order. Empty input is an error.
pub fn mean_ndcg(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::arg("cannot average an empty value set"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
