//! Query-level early-exit analysis for additive tree ensembles.
//!
//! Learning-to-rank ensembles score a query's documents with hundreds or
//! thousands of trees, yet for many queries the ranking stops changing — or
//! gets worse — long before the last tree. This crate measures that effect
//! and turns it into deployable exit points:
//!
//! - [`ingest`] loads LETOR/SVMLight-style datasets into query groups;
//! - [`model`] loads tree ensembles (trainer text dumps or a canonical JSON
//!   form) and can generate synthetic ones;
//! - [`scorer`] accumulates per-document scores tree by tree, snapshotting
//!   at checkpoints;
//! - [`metrics`] evaluates NDCG@k at every checkpoint, yielding per-query
//!   trajectories;
//! - [`analysis`] finds each query's oracle (best possible) exit, classifies
//!   trajectory shapes, and aggregates exit groups into reports;
//! - [`sentinel`] evaluates fixed exit points shared by all queries and
//!   searches exhaustively for the best placement.
//!
//! ```
//! use exitlab::{analysis, ingest, metrics, model, scorer};
//!
//! let ensemble = model::generate_synthetic_ensemble(200, 4, 10, 7);
//! let data = ingest::generate_synthetic_dataset(50, 5, 20, 10, 8);
//! let checkpoints = scorer::make_checkpoints(ensemble.len(), 25, false)?;
//! let trajectories = metrics::dataset_trajectories(&ensemble, &data, &checkpoints, 10)?;
//! for t in &trajectories {
//!     let exit = analysis::oracle_exit(t);
//!     assert!(exit.exit_ndcg >= exit.full_ndcg);
//! }
//! # Ok::<(), exitlab::Error>(())
//! ```

pub mod analysis;
mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod scorer;
pub mod sentinel;

pub use error::{Error, Result};
