//! Shared plumbing for the subcommands: file loading, thread-pool setup,
//! parallel trajectory computation, and the zero-IDCG screening policy.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use exitlab::ingest::{self, RankingDataset};
use exitlab::metrics::{self, NdcgTrajectory};
use exitlab::model::{self, Ensemble};
use exitlab::scorer::CheckpointSet;
use rayon::prelude::*;

/// On-disk model encodings the loader understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFormat {
    /// Trainer text dump (tree blocks with split/threshold/leaf arrays)
    Text,
    /// Canonical JSON produced by `gen-synthetic`
    Canonical,
}

/// What to do with queries that have no relevant documents. Their NDCG is
/// reported as 0 by convention, which either drags averages down or is
/// screened out, depending on the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZeroIdcgPolicy {
    /// Keep the queries and count their NDCG as zero
    Zero,
    /// Drop the queries from every report
    Exclude,
}

impl ZeroIdcgPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ZeroIdcgPolicy::Zero => "zero",
            ZeroIdcgPolicy::Exclude => "exclude",
        }
    }
}

pub fn load_model(path: &Path, format: ModelFormat) -> Result<Ensemble> {
    let file =
        File::open(path).with_context(|| format!("cannot open model file {}", path.display()))?;
    let reader = BufReader::new(file);
    let ensemble = match format {
        ModelFormat::Text => model::parse_text_model(reader),
        ModelFormat::Canonical => model::parse_canonical_model(reader),
    };
    ensemble.with_context(|| format!("failed to parse model {}", path.display()))
}

/// Loads a LETOR split and widens its feature vectors to the model's width
/// when the file never mentions the trailing features (absent sparse
/// indices mean 0.0, so widening preserves the file's semantics).
pub fn load_dataset(path: &Path, ensemble: &Ensemble) -> Result<RankingDataset> {
    let file =
        File::open(path).with_context(|| format!("cannot open dataset file {}", path.display()))?;
    let mut dataset = ingest::parse_letor(BufReader::new(file), None)
        .with_context(|| format!("failed to parse dataset {}", path.display()))?;
    if dataset.num_features < ensemble.num_features() {
        for group in &mut dataset.groups {
            for doc in &mut group.documents {
                doc.features.resize(ensemble.num_features(), 0.0);
            }
        }
        dataset.num_features = ensemble.num_features();
    }
    Ok(dataset)
}

/// A dedicated pool so `--threads` affects only this process's work.
/// Zero threads means one worker per logical CPU.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("failed to build the worker thread pool")
}

/// Per-query NDCG trajectories in dataset order, computed on the pool.
pub fn trajectories(
    pool: &rayon::ThreadPool,
    ensemble: &Ensemble,
    dataset: &RankingDataset,
    checkpoints: &CheckpointSet,
    k: usize,
) -> Result<Vec<NdcgTrajectory>> {
    let trajs: exitlab::Result<Vec<_>> = pool.install(|| {
        dataset
            .groups
            .par_iter()
            .map(|g| metrics::query_trajectory(ensemble, g, checkpoints, k))
            .collect()
    });
    Ok(trajs?)
}

/// Trajectories after applying the zero-IDCG policy, plus how many queries
/// were flagged (and, under `exclude`, removed).
pub struct Screened {
    pub trajs: Vec<NdcgTrajectory>,
    pub zero_idcg_count: usize,
}

pub fn screen_zero_idcg(trajs: Vec<NdcgTrajectory>, policy: ZeroIdcgPolicy) -> Result<Screened> {
    let zero_idcg_count = trajs.iter().filter(|t| t.zero_idcg).count();
    let kept = match policy {
        ZeroIdcgPolicy::Zero => trajs,
        ZeroIdcgPolicy::Exclude => trajs.into_iter().filter(|t| !t.zero_idcg).collect(),
    };
    if kept.is_empty() {
        bail!("every query was screened out (all have zero ideal DCG)");
    }
    Ok(Screened {
        trajs: kept,
        zero_idcg_count,
    })
}

/// Mean of the full-ensemble NDCG across trajectories.
pub fn mean_full_ndcg(trajs: &[NdcgTrajectory]) -> Result<f64> {
    let values: Vec<f64> = trajs.iter().map(|t| t.full_value()).collect();
    Ok(metrics::mean_ndcg(&values)?)
}

/// Parses a comma-separated position list such as `25,300`.
pub fn parse_positions(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid sentinel position {part:?}"))
        })
        .collect()
}
