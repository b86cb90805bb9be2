//! LETOR / SVMLight-style dataset loading.
//!
//! Each non-empty line is one document: `<label> qid:<id> <idx>:<val> ...`,
//! optionally followed by a `#` comment running to the end of the line.
//! Feature indices are 1-based and sparse; absent indices densify to 0.0.
//! Consecutive lines sharing a qid form one query group.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One judged document: a dense feature vector, a relevance label in 0..=4,
/// and its 0-based position within the owning query group.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub label: u8,
    pub features: Vec<f64>,
    pub ordinal: usize,
}

/// All documents judged for one query, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub documents: Vec<Document>,
}

impl QueryGroup {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.documents.iter().map(|d| d.label).collect()
    }
}

/// A parsed dataset: query groups in file order, with every feature vector
/// densified to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    pub groups: Vec<QueryGroup>,
    pub num_features: usize,
}

impl RankingDataset {
    pub fn num_queries(&self) -> usize {
        self.groups.len()
    }

    pub fn num_documents(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }
}

/// Summary counts for a dataset. `label_histogram[l]` is the number of
/// documents with label `l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStats {
    pub num_queries: usize,
    pub num_documents: usize,
    pub num_features: usize,
    pub label_histogram: [usize; 5],
}

/// A document as parsed from one line, before densification.
struct SparseDoc {
    label: u8,
    features: Vec<(usize, f64)>,
    line: usize,
}

/// Parses a LETOR stream into query groups.
///
/// If `declared_num_features` is given, every feature index must be within
/// it and vectors densify to exactly that length; otherwise the width is the
/// maximum feature index observed anywhere in the stream.
///
/// A qid that reappears after its group has closed opens a *new* group whose
/// id is deterministically suffixed (`7` reopened becomes `7_2`, then `7_3`,
/// skipping ids already taken), and a warning is logged. Labels outside
/// 0..=4, missing qids, and malformed feature pairs are hard errors carrying
/// the 1-based line number.
pub fn parse_letor<R: BufRead>(
    reader: R,
    declared_num_features: Option<usize>,
) -> Result<RankingDataset> {
    let mut groups: Vec<(String, Vec<SparseDoc>)> = Vec::new();
    let mut taken_ids: HashSet<String> = HashSet::new();
    let mut max_index = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();

        let Some(label_tok) = tokens.next() else {
            continue; // blank or comment-only line
        };
        let label: i64 = label_tok
            .parse()
            .map_err(|_| Error::parse(line_no, format!("label {label_tok:?} is not an integer")))?;
        if !(0..=4).contains(&label) {
            return Err(Error::parse(
                line_no,
                format!("label {label} outside the supported range 0..=4"),
            ));
        }

        let qid = match tokens.next().and_then(|t| t.strip_prefix("qid:")) {
            Some(q) if !q.is_empty() => q.to_string(),
            _ => {
                return Err(Error::parse(
                    line_no,
                    "expected qid:<id> as the second token",
                ))
            }
        };

        let mut features = Vec::new();
        for tok in tokens {
            let Some((idx_str, val_str)) = tok.split_once(':') else {
                return Err(Error::parse(
                    line_no,
                    format!("malformed feature pair {tok:?}, expected <index>:<value>"),
                ));
            };
            let index: usize = idx_str.parse().map_err(|_| {
                Error::parse(
                    line_no,
                    format!("feature index {idx_str:?} is not an integer"),
                )
            })?;
            if index == 0 {
                return Err(Error::parse(line_no, "feature indices are 1-based"));
            }
            if let Some(declared) = declared_num_features {
                if index > declared {
                    return Err(Error::parse(
                        line_no,
                        format!("feature index {index} exceeds declared count {declared}"),
                    ));
                }
            }
            let value: f64 = val_str.parse().map_err(|_| {
                Error::parse(
                    line_no,
                    format!("feature value {val_str:?} is not a number"),
                )
            })?;
            max_index = max_index.max(index);
            features.push((index, value));
        }

        let doc = SparseDoc {
            label: label as u8,
            features,
            line: line_no,
        };

        match groups.last_mut() {
            Some((current, docs)) if *current == qid => docs.push(doc),
            _ => {
                let assigned = if taken_ids.contains(&qid) {
                    let mut n = 2usize;
                    let mut candidate = format!("{qid}_{n}");
                    while taken_ids.contains(&candidate) {
                        n += 1;
                        candidate = format!("{qid}_{n}");
                    }
                    log::warn!(
                        "line {line_no}: qid {qid:?} reappears after its group closed; \
                         starting new group {candidate:?}"
                    );
                    candidate
                } else {
                    qid
                };
                taken_ids.insert(assigned.clone());
                groups.push((assigned, vec![doc]));
            }
        }
    }

    let num_features = declared_num_features.unwrap_or(max_index);
    let groups = groups
        .into_iter()
        .map(|(query_id, docs)| {
            let documents = docs
                .into_iter()
                .enumerate()
                .map(|(ordinal, doc)| {
                    let mut dense = vec![0.0; num_features];
                    for (index, value) in doc.features {
                        debug_assert!(index >= 1 && index <= num_features, "line {}", doc.line);
                        dense[index - 1] = value;
                    }
                    Document {
                        label: doc.label,
                        features: dense,
                        ordinal,
                    }
                })
                .collect();
            QueryGroup {
                query_id,
                documents,
            }
        })
        .collect();

    Ok(RankingDataset {
        groups,
        num_features,
    })
}

/// Writes a dataset back out in LETOR format, one dense line per document
/// (every index 1..=num_features is written, so re-parsing reproduces the
/// dataset exactly, including its feature width).
pub fn write_letor<W: Write>(dataset: &RankingDataset, mut out: W) -> Result<()> {
    for group in &dataset.groups {
        for doc in &group.documents {
            write!(out, "{} qid:{}", doc.label, group.query_id)?;
            for (i, value) in doc.features.iter().enumerate() {
                write!(out, " {}:{}", i + 1, value)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Counts queries, documents, and per-label documents.
pub fn dataset_stats(dataset: &RankingDataset) -> DatasetStats {
    let mut label_histogram = [0usize; 5];
    for group in &dataset.groups {
        for doc in &group.documents {
            label_histogram[doc.label as usize] += 1;
        }
    }
    DatasetStats {
        num_queries: dataset.num_queries(),
        num_documents: dataset.num_documents(),
        num_features: dataset.num_features,
        label_histogram,
    }
}

/// Generates a random dataset for desk-scale experiments: `num_queries`
/// groups of `min_docs..=max_docs` documents, labels uniform in 0..=4,
/// features uniform in [0, 1). Deterministic for a fixed seed.
pub fn generate_synthetic_dataset(
    num_queries: usize,
    min_docs: usize,
    max_docs: usize,
    num_features: usize,
    seed: u64,
) -> RankingDataset {
    assert!(num_queries >= 1 && min_docs >= 1 && max_docs >= min_docs && num_features >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = (1..=num_queries)
        .map(|q| {
            let n = rng.gen_range(min_docs..=max_docs);
            let documents = (0..n)
                .map(|ordinal| Document {
                    label: rng.gen_range(0..=4),
                    features: (0..num_features).map(|_| rng.gen::<f64>()).collect(),
                    ordinal,
                })
                .collect();
            QueryGroup {
                query_id: format!("q{q}"),
                documents,
            }
        })
        .collect();
    RankingDataset {
        groups,
        num_features,
    }
}
