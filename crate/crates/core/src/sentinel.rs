//! Sentinel placement and evaluation.
//!
//! A sentinel configuration fixes a small set of tree positions at which a
//! deployed ranker may stop scoring a query. Given per-query NDCG
//! trajectories, [`decide_exits`] picks each query's best sentinel (or the
//! full run), [`evaluate_config`] turns the decisions into an exit-group
//! report, and [`search_placements`] enumerates every k-subset of a
//! candidate grid to find the placement with the best overall NDCG.

use std::collections::BTreeMap;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{aggregate_report, GroupRow, OverallSummary};
use crate::error::{Error, Result};
use crate::metrics::NdcgTrajectory;

/// Strictly increasing sentinel positions, each within [1, L).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentinelConfig {
    sentinels: Vec<usize>,
}

impl SentinelConfig {
    pub fn new(sentinels: Vec<usize>, ensemble_len: usize) -> Result<Self> {
        if sentinels.is_empty() {
            return Err(Error::arg("at least one sentinel is required"));
        }
        if sentinels[0] == 0 {
            return Err(Error::arg("sentinel positions are 1-based"));
        }
        if !sentinels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::arg("sentinel positions must be strictly increasing"));
        }
        if *sentinels.last().unwrap() >= ensemble_len {
            return Err(Error::arg(format!(
                "sentinels must lie strictly before the ensemble length {ensemble_len}"
            )));
        }
        Ok(SentinelConfig { sentinels })
    }

    pub fn positions(&self) -> &[usize] {
        &self.sentinels
    }

    pub fn len(&self) -> usize {
        self.sentinels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentinels.is_empty()
    }
}

/// Chooses each query's exit: the earliest position among the sentinels and
/// L whose NDCG attains the maximum over those candidates. Every sentinel
/// must be a checkpoint of every trajectory, and every trajectory must end
/// at `ensemble_len`. Returns one exit position per trajectory, in order.
pub fn decide_exits(
    config: &SentinelConfig,
    trajs: &[NdcgTrajectory],
    ensemble_len: usize,
) -> Result<Vec<usize>> {
    let mut exits = Vec::with_capacity(trajs.len());
    for t in trajs {
        if t.ensemble_len() != ensemble_len {
            return Err(Error::arg(format!(
                "trajectory for query {} ends at {}, expected {ensemble_len}",
                t.query_id,
                t.ensemble_len()
            )));
        }
        let mut best_pos = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for &pos in config
            .positions()
            .iter()
            .chain(std::iter::once(&ensemble_len))
        {
            let v = t.value_at(pos).ok_or_else(|| {
                Error::arg(format!(
                    "sentinel {pos} is not a checkpoint of query {}",
                    t.query_id
                ))
            })?;
            if v > best_val {
                best_val = v;
                best_pos = pos;
            }
        }
        exits.push(best_pos);
    }
    Ok(exits)
}

/// Evaluation of one sentinel configuration: exit groups in ascending
/// position order (only occupied groups appear), the weighted overall
/// summary, and each query's decided exit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub config: SentinelConfig,
    pub rows: Vec<GroupRow>,
    pub overall: OverallSummary,
    pub per_query_exits: Vec<(String, usize)>,
}

/// Decides exits for every query and aggregates them into group rows and
/// an overall summary. The rows partition the query set.
pub fn evaluate_config(
    config: &SentinelConfig,
    trajs: &[NdcgTrajectory],
    ensemble_len: usize,
) -> Result<EvaluationReport> {
    if trajs.is_empty() {
        return Err(Error::arg("no trajectories to evaluate"));
    }
    let exits = decide_exits(config, trajs, ensemble_len)?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &exit) in exits.iter().enumerate() {
        groups.entry(exit).or_default().push(i);
    }
    let rows = groups
        .iter()
        .map(|(&exit, members)| {
            let n = members.len() as f64;
            let full = members.iter().map(|&i| trajs[i].full_value()).sum::<f64>() / n;
            let at_exit = members
                .iter()
                .map(|&i| trajs[i].value_at(exit).expect("exit is a checkpoint"))
                .sum::<f64>()
                / n;
            GroupRow::new(exit, members.len(), full, at_exit, ensemble_len)
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = aggregate_report(&rows, trajs.len(), ensemble_len)?;
    let per_query_exits = trajs
        .iter()
        .zip(&exits)
        .map(|(t, &e)| (t.query_id.clone(), e))
        .collect();
    Ok(EvaluationReport {
        config: config.clone(),
        rows,
        overall,
        per_query_exits,
    })
}

/// One enumerated placement and its objective (overall mean NDCG at the
/// decided exits on the trajectories searched over).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedConfig {
    pub sentinels: Vec<usize>,
    pub objective: f64,
}

/// Result of an exhaustive placement search: every k-subset of the
/// candidate grid ranked best-first.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSearch {
    pub best: SentinelConfig,
    pub ranking: Vec<RankedConfig>,
}

/// Exhaustively evaluates every choice of `num_sentinels` positions from
/// `candidates` (strictly increasing, all below `ensemble_len`) and ranks
/// them by overall NDCG at the decided exits, breaking ties toward the
/// lexicographically smallest position vector. Candidate values are read
/// off the trajectories once; the combinations are scored in parallel with
/// a deterministic result.
pub fn search_placements(
    num_sentinels: usize,
    candidates: &[usize],
    trajs: &[NdcgTrajectory],
    ensemble_len: usize,
) -> Result<PlacementSearch> {
    if num_sentinels == 0 {
        return Err(Error::arg("must place at least one sentinel"));
    }
    if num_sentinels > candidates.len() {
        return Err(Error::arg(format!(
            "cannot place {num_sentinels} sentinels on {} candidates",
            candidates.len()
        )));
    }
    if !candidates.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::arg("candidates must be strictly increasing"));
    }
    if candidates.iter().any(|&c| c == 0 || c >= ensemble_len) {
        return Err(Error::arg(format!(
            "candidates must lie in 1..{ensemble_len}"
        )));
    }
    if trajs.is_empty() {
        return Err(Error::arg("no trajectories to search over"));
    }

    // One pass over the trajectories caches every value the search needs.
    let cached: Vec<(Vec<f64>, f64)> = trajs
        .iter()
        .map(|t| {
            if t.ensemble_len() != ensemble_len {
                return Err(Error::arg(format!(
                    "trajectory for query {} ends at {}, expected {ensemble_len}",
                    t.query_id,
                    t.ensemble_len()
                )));
            }
            let vals = candidates
                .iter()
                .map(|&c| {
                    t.value_at(c).ok_or_else(|| {
                        Error::arg(format!(
                            "candidate {c} is not a checkpoint of query {}",
                            t.query_id
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((vals, t.full_value()))
        })
        .collect::<Result<_>>()?;

    let combos: Vec<Vec<usize>> = (0..candidates.len()).combinations(num_sentinels).collect();
    let n = trajs.len() as f64;
    let mut ranking: Vec<RankedConfig> = combos
        .par_iter()
        .map(|combo| {
            let mut sum = 0.0;
            for (vals, full) in &cached {
                let mut best = *full;
                for &ci in combo {
                    if vals[ci] > best {
                        best = vals[ci];
                    }
                }
                sum += best;
            }
            RankedConfig {
                sentinels: combo.iter().map(|&ci| candidates[ci]).collect(),
                objective: sum / n,
            }
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.objective
            .total_cmp(&a.objective)
            .then_with(|| a.sentinels.cmp(&b.sentinels))
    });
    let best = SentinelConfig::new(ranking[0].sentinels.clone(), ensemble_len)?;
    Ok(PlacementSearch { best, ranking })
}
