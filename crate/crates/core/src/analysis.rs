//! Oracle early-exit analysis over NDCG trajectories: per-query ideal exit
//! points, a six-class trajectory taxonomy, speedup accounting, and
//! query-count-weighted report aggregation.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::NdcgTrajectory;

/// The ideal (oracle) exit for one query: the earliest checkpoint whose
/// NDCG attains the trajectory maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleExit {
    pub query_id: String,
    /// Earliest checkpoint position attaining the trajectory maximum.
    pub exit_position: usize,
    /// NDCG at the oracle exit (the trajectory maximum).
    pub exit_ndcg: f64,
    /// NDCG of the full ensemble (trajectory value at L).
    pub full_ndcg: f64,
}

/// Finds the earliest argmax of a non-empty trajectory.
pub fn oracle_exit(traj: &NdcgTrajectory) -> OracleExit {
    assert!(!traj.is_empty(), "trajectory has no checkpoints");
    let mut best = 0usize;
    for (i, &v) in traj.values.iter().enumerate() {
        if v > traj.values[best] {
            best = i;
        }
    }
    OracleExit {
        query_id: traj.query_id.clone(),
        exit_position: traj.positions[best],
        exit_ndcg: traj.values[best],
        full_ndcg: traj.full_value(),
    }
}

/// Histogram of exit positions. Keys are bin starts: position `p` falls in
/// the bin starting at `((p-1)/bin_width)*bin_width + 1`, so with
/// `bin_width = 1` keys are the exit positions themselves. Counts sum to
/// the number of exits.
pub fn exit_histogram(exits: &[OracleExit], bin_width: usize) -> BTreeMap<usize, usize> {
    assert!(bin_width >= 1, "bin width must be positive");
    let mut bins = BTreeMap::new();
    for e in exits {
        let start = (e.exit_position - 1) / bin_width * bin_width + 1;
        *bins.entry(start).or_insert(0) += 1;
    }
    bins
}

/// Coarse direction of a trajectory class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryCategory {
    Worsening,
    Flat,
    Improving,
}

impl fmt::Display for QueryCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryCategory::Worsening => "worsening",
            QueryCategory::Flat => "flat",
            QueryCategory::Improving => "improving",
        })
    }
}

/// Six-way trajectory taxonomy. With s/e the first/last NDCG values and
/// M/m the maximum/minimum, and all comparisons padded by epsilon:
/// classes 1-2 end below the start (2 overshoots the start on the way),
/// classes 3-4 end where they started (3 never left, 4 made a round trip),
/// classes 5-6 end above the start (6 peaks above its final value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QueryClass {
    Class1 = 1,
    Class2 = 2,
    Class3 = 3,
    Class4 = 4,
    Class5 = 5,
    Class6 = 6,
}

impl QueryClass {
    /// All six classes in ascending order, for tabulation.
    pub const ALL: [QueryClass; 6] = [
        QueryClass::Class1,
        QueryClass::Class2,
        QueryClass::Class3,
        QueryClass::Class4,
        QueryClass::Class5,
        QueryClass::Class6,
    ];

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn category(self) -> QueryCategory {
        match self {
            QueryClass::Class1 | QueryClass::Class2 => QueryCategory::Worsening,
            QueryClass::Class3 | QueryClass::Class4 => QueryCategory::Flat,
            QueryClass::Class5 | QueryClass::Class6 => QueryCategory::Improving,
        }
    }
}

impl fmt::Display for QueryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Classifies a trajectory of at least two checkpoints. Every trajectory
/// falls in exactly one class; `epsilon` must be positive.
pub fn classify_query(traj: &NdcgTrajectory, epsilon: f64) -> Result<QueryClass> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::arg("epsilon must be positive"));
    }
    if traj.len() < 2 {
        return Err(Error::arg("classification needs at least two checkpoints"));
    }
    let s = traj.values[0];
    let e = *traj.values.last().unwrap();
    let max = traj.values.iter().cloned().fold(f64::MIN, f64::max);
    let min = traj.values.iter().cloned().fold(f64::MAX, f64::min);

    let class = if max - min <= epsilon {
        QueryClass::Class3
    } else if (e - s).abs() <= epsilon {
        QueryClass::Class4
    } else if e < s - epsilon {
        if max > s + epsilon {
            QueryClass::Class2
        } else {
            QueryClass::Class1
        }
    } else if max > e + epsilon {
        QueryClass::Class6
    } else {
        QueryClass::Class5
    };
    Ok(class)
}

/// Cost model: exiting all of a query's documents after `exit_position` of
/// `ensemble_len` trees saves work proportional to L / exit.
pub fn speedup(ensemble_len: usize, exit_position: usize) -> Result<f64> {
    if ensemble_len == 0 {
        return Err(Error::arg("ensemble length must be >= 1"));
    }
    if exit_position == 0 || exit_position > ensemble_len {
        return Err(Error::arg(format!(
            "exit position must be in 1..={ensemble_len}, got {exit_position}"
        )));
    }
    Ok(ensemble_len as f64 / exit_position as f64)
}

/// One exit group of an evaluation report: all queries that stopped at the
/// same tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    /// Tree position the group exits at (L for the terminal group).
    pub exit_position: usize,
    pub num_queries: usize,
    /// Mean NDCG these queries reach with the full ensemble.
    pub ndcg_full: f64,
    /// Mean NDCG these queries reach at the exit point.
    pub ndcg_at_exit: f64,
    pub speedup: f64,
}

impl GroupRow {
    pub fn new(
        exit_position: usize,
        num_queries: usize,
        ndcg_full: f64,
        ndcg_at_exit: f64,
        ensemble_len: usize,
    ) -> Result<Self> {
        Ok(GroupRow {
            exit_position,
            num_queries,
            ndcg_full,
            ndcg_at_exit,
            speedup: speedup(ensemble_len, exit_position)?,
        })
    }
}

/// Query-count-weighted aggregate over exit groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverallSummary {
    pub num_queries: usize,
    /// Weighted mean full-ensemble NDCG.
    pub ndcg_full: f64,
    /// Weighted mean NDCG at the chosen exits.
    pub ndcg_exit: f64,
    /// Relative NDCG gain of exiting, in percent.
    pub gain_pct: f64,
    /// Weighted mean exit position.
    pub mean_exit_position: f64,
    /// L divided by the weighted mean exit position.
    pub speedup: f64,
}

/// Aggregates group rows, weighting each by its query count. The row
/// counts must sum to `total_queries`; every query carries equal weight
/// regardless of its document count.
pub fn aggregate_report(
    rows: &[GroupRow],
    total_queries: usize,
    ensemble_len: usize,
) -> Result<OverallSummary> {
    if total_queries == 0 {
        return Err(Error::arg("report covers no queries"));
    }
    let counted: usize = rows.iter().map(|r| r.num_queries).sum();
    if counted != total_queries {
        return Err(Error::arg(format!(
            "group rows cover {counted} queries, expected {total_queries}"
        )));
    }
    let mut full_sum = 0.0;
    let mut exit_sum = 0.0;
    let mut position_sum = 0.0;
    for row in rows {
        if row.exit_position == 0 || row.exit_position > ensemble_len {
            return Err(Error::arg(format!(
                "group exit position {} outside 1..={ensemble_len}",
                row.exit_position
            )));
        }
        let n = row.num_queries as f64;
        full_sum += n * row.ndcg_full;
        exit_sum += n * row.ndcg_at_exit;
        position_sum += n * row.exit_position as f64;
    }
    let n = total_queries as f64;
    let ndcg_full = full_sum / n;
    let ndcg_exit = exit_sum / n;
    let mean_exit_position = position_sum / n;
    Ok(OverallSummary {
        num_queries: total_queries,
        ndcg_full,
        ndcg_exit,
        gain_pct: if ndcg_full > 0.0 {
            (ndcg_exit - ndcg_full) / ndcg_full * 100.0
        } else {
            0.0
        },
        mean_exit_position,
        speedup: ensemble_len as f64 / mean_exit_position,
    })
}

/// Speedup weighted by per-query document counts instead of uniformly by
/// query: L divided by the documents-weighted mean exit position. Input is
/// one `(exit_position, num_documents)` pair per query.
pub fn docs_weighted_speedup(
    exits_and_docs: &[(usize, usize)],
    ensemble_len: usize,
) -> Result<f64> {
    let total_docs: usize = exits_and_docs.iter().map(|&(_, d)| d).sum();
    if total_docs == 0 {
        return Err(Error::arg("no documents to weight by"));
    }
    let mut weighted = 0.0;
    for &(exit, docs) in exits_and_docs {
        if exit == 0 || exit > ensemble_len {
            return Err(Error::arg(format!(
                "exit position must be in 1..={ensemble_len}, got {exit}"
            )));
        }
        weighted += (docs * exit) as f64;
    }
    Ok(ensemble_len as f64 / (weighted / total_docs as f64))
}

/// One x-position of the mean-NDCG-over-prefix curve.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCurvePoint {
    pub position: usize,
    /// Mean NDCG when every query runs through the first `position` trees.
    pub mean_full_ndcg: f64,
    /// Mean NDCG when each query freezes at its oracle exit: queries whose
    /// ideal exit lies at or before `position` contribute their exit NDCG.
    pub mean_capped_ndcg: f64,
    /// Number of queries whose oracle exit is exactly `position`.
    pub exit_count: usize,
}

/// Mean trajectory curve with and without ideal exits. All trajectories
/// must share one checkpoint set, and `exits` must align with `trajs`.
pub fn oracle_curve(
    trajs: &[NdcgTrajectory],
    exits: &[OracleExit],
) -> Result<Vec<OracleCurvePoint>> {
    if trajs.is_empty() {
        return Err(Error::arg("no trajectories to average"));
    }
    if trajs.len() != exits.len()
        || trajs
            .iter()
            .zip(exits)
            .any(|(t, e)| t.query_id != e.query_id)
    {
        return Err(Error::arg("exits do not align with trajectories"));
    }
    let positions = &trajs[0].positions;
    if trajs.iter().any(|t| &t.positions != positions) {
        return Err(Error::arg("trajectories use differing checkpoint sets"));
    }
    let n = trajs.len() as f64;
    Ok(positions
        .iter()
        .enumerate()
        .map(|(j, &position)| {
            let mut full = 0.0;
            let mut capped = 0.0;
            let mut exit_count = 0usize;
            for (t, e) in trajs.iter().zip(exits) {
                full += t.values[j];
                capped += if e.exit_position <= position {
                    e.exit_ndcg
                } else {
                    t.values[j]
                };
                if e.exit_position == position {
                    exit_count += 1;
                }
            }
            OracleCurvePoint {
                position,
                mean_full_ndcg: full / n,
                mean_capped_ndcg: capped / n,
                exit_count,
            }
        })
        .collect())
}
