//! Report writers. Commands compute everything first and only then call
//! into this module, so a failed run never leaves partial output behind.
//! All numeric formatting is locale-free and deterministic; columns that
//! feed downstream tooling carry full-precision `_raw` twins.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use exitlab::analysis::{GroupRow, OracleCurvePoint, OracleExit, OverallSummary, QueryClass};
use exitlab::sentinel::RankedConfig;
use serde::Serialize;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn write_tsv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", header.join("\t"))?;
    for row in rows {
        writeln!(out, "{}", row.join("\t"))?;
    }
    out.flush()?;
    Ok(())
}

/// Two-column key/value TSV, used for the summary files.
pub fn write_kv(path: &Path, pairs: &[(&str, String)]) -> Result<()> {
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|(k, v)| vec![(*k).to_string(), v.clone()])
        .collect();
    write_tsv(path, &["key", "value"], &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .with_context(|| format!("cannot serialize {}", path.display()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the identical f64.
pub fn raw(v: f64) -> String {
    format!("{v}")
}

pub fn ndcg4(v: f64) -> String {
    format!("{v:.4}")
}

pub fn pct1(v: f64) -> String {
    format!("{v:.1}")
}

pub fn gain1(v: f64) -> String {
    format!("{v:+.1}")
}

pub fn speed2(v: f64) -> String {
    format!("{v:.2}")
}

/// Relative NDCG change in percent, zero when there is no baseline.
pub fn relative_gain_pct(full: f64, at_exit: f64) -> f64 {
    if full == 0.0 {
        0.0
    } else {
        (at_exit - full) / full * 100.0
    }
}

pub struct ScoreRow {
    pub query_id: String,
    pub num_docs: usize,
    pub zero_idcg: bool,
    pub ndcg: f64,
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.query_id.clone(),
                r.num_docs.to_string(),
                r.zero_idcg.to_string(),
                raw(r.ndcg),
            ]
        })
        .collect();
    write_tsv(path, &["query_id", "num_docs", "zero_idcg", "ndcg"], &body)
}

pub fn write_oracle_exits(path: &Path, exits: &[OracleExit], classes: &[QueryClass]) -> Result<()> {
    let body: Vec<Vec<String>> = exits
        .iter()
        .zip(classes)
        .map(|(e, c)| {
            vec![
                e.query_id.clone(),
                c.to_string(),
                e.exit_position.to_string(),
                raw(e.exit_ndcg),
                raw(e.full_ndcg),
            ]
        })
        .collect();
    write_tsv(
        path,
        &[
            "query_id",
            "class",
            "exit_position",
            "exit_ndcg",
            "full_ndcg",
        ],
        &body,
    )
}

pub fn write_histogram(path: &Path, histogram: &BTreeMap<usize, usize>) -> Result<()> {
    let body: Vec<Vec<String>> = histogram
        .iter()
        .map(|(bin, count)| vec![bin.to_string(), count.to_string()])
        .collect();
    write_tsv(path, &["bin_start", "count"], &body)
}

pub fn write_curve(path: &Path, curve: &[OracleCurvePoint]) -> Result<()> {
    let body: Vec<Vec<String>> = curve
        .iter()
        .map(|p| {
            vec![
                p.position.to_string(),
                raw(p.mean_full_ndcg),
                raw(p.mean_capped_ndcg),
                p.exit_count.to_string(),
            ]
        })
        .collect();
    write_tsv(
        path,
        &[
            "position",
            "mean_full_ndcg",
            "mean_capped_ndcg",
            "exit_count",
        ],
        &body,
    )
}

pub fn write_classes(path: &Path, rows: &[(String, QueryClass)]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(qid, class)| vec![qid.clone(), class.to_string(), class.category().to_string()])
        .collect();
    write_tsv(path, &["query_id", "class", "category"], &body)
}

pub fn write_class_counts(path: &Path, counts: &[usize; 6], total: usize) -> Result<()> {
    let body: Vec<Vec<String>> = QueryClass::ALL
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let share = 100.0 * counts[i] as f64 / total as f64;
            vec![
                class.to_string(),
                class.category().to_string(),
                counts[i].to_string(),
                format!("{share:.2}"),
            ]
        })
        .collect();
    write_tsv(path, &["class", "category", "count", "pct"], &body)
}

pub fn write_placements(path: &Path, ranking: &[RankedConfig], full_ndcg: f64) -> Result<()> {
    let body: Vec<Vec<String>> = ranking
        .iter()
        .enumerate()
        .map(|(i, rc)| {
            let positions: Vec<String> = rc.sentinels.iter().map(|p| p.to_string()).collect();
            vec![
                (i + 1).to_string(),
                positions.join(","),
                raw(rc.objective),
                raw(relative_gain_pct(full_ndcg, rc.objective)),
            ]
        })
        .collect();
    write_tsv(path, &["rank", "sentinels", "objective", "gain_pct"], &body)
}

/// Winner of a placement search, with enough context to rerun it.
#[derive(Serialize)]
pub struct BestConfigFile {
    pub sentinels: Vec<usize>,
    pub objective: f64,
    pub full_ndcg: f64,
    pub gain_pct: f64,
    pub num_sentinels: usize,
    pub candidates: Vec<usize>,
    pub num_configs: usize,
    pub ensemble_len: usize,
    pub k: usize,
    pub split: String,
    pub num_queries: usize,
    pub zero_idcg_policy: String,
    pub zero_idcg_queries: usize,
}

#[derive(Serialize)]
pub struct EvalRowJson {
    pub exit_position: usize,
    pub num_queries: usize,
    pub pct_queries: f64,
    pub ndcg_full: f64,
    pub ndcg_at_exit: f64,
    pub gain_pct: f64,
    pub speedup: f64,
}

#[derive(Serialize)]
pub struct EvalOverallJson {
    pub num_queries: usize,
    pub ndcg_full: f64,
    pub ndcg_exit: f64,
    pub gain_pct: f64,
    pub mean_exit_position: f64,
    pub speedup_queries_weighted: f64,
    pub speedup_docs_weighted: f64,
    /// The weighting selected on the command line.
    pub speedup: f64,
}

#[derive(Serialize)]
pub struct EvalReportFile {
    pub ensemble_len: usize,
    pub k: usize,
    pub sentinels: Vec<usize>,
    pub zero_idcg_policy: String,
    pub zero_idcg_queries: usize,
    pub speedup_weighting: String,
    pub rows: Vec<EvalRowJson>,
    pub overall: EvalOverallJson,
    pub per_query_exits: Vec<(String, usize)>,
}

/// The table mirrored by `report.json`: styled columns first (4-decimal
/// NDCG, signed one-decimal gain, two-decimal speedup), full-precision
/// twins after.
pub fn write_report_tsv(
    path: &Path,
    rows: &[GroupRow],
    overall: &OverallSummary,
    selected_speedup: f64,
) -> Result<()> {
    let total = overall.num_queries;
    let mut body = Vec::with_capacity(rows.len() + 1);
    for r in rows {
        let gain = relative_gain_pct(r.ndcg_full, r.ndcg_at_exit);
        body.push(vec![
            r.exit_position.to_string(),
            r.num_queries.to_string(),
            pct1(100.0 * r.num_queries as f64 / total as f64),
            ndcg4(r.ndcg_full),
            ndcg4(r.ndcg_at_exit),
            gain1(gain),
            speed2(r.speedup),
            raw(r.ndcg_full),
            raw(r.ndcg_at_exit),
            raw(r.speedup),
        ]);
    }
    body.push(vec![
        "overall".to_string(),
        total.to_string(),
        pct1(100.0),
        ndcg4(overall.ndcg_full),
        ndcg4(overall.ndcg_exit),
        gain1(overall.gain_pct),
        speed2(selected_speedup),
        raw(overall.ndcg_full),
        raw(overall.ndcg_exit),
        raw(selected_speedup),
    ]);
    write_tsv(
        path,
        &[
            "exit_position",
            "num_queries",
            "pct_queries",
            "ndcg_full",
            "ndcg_at_exit",
            "gain_pct",
            "speedup",
            "ndcg_full_raw",
            "ndcg_at_exit_raw",
            "speedup_raw",
        ],
        &body,
    )
}
