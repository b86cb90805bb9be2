//! `exitlab` — query-level early-exit analysis for additive tree ensembles.
//!
//! The binary wraps the library of the same name: it scores LETOR splits
//! with gradient-boosted ranking models, traces per-query NDCG across
//! ensemble prefixes, finds ideal ("oracle") exits, classifies trajectory
//! shapes, searches sentinel placements, and evaluates fixed sentinel
//! configurations. Every command validates and computes before writing, and
//! its output files are byte-deterministic for a given input regardless of
//! `--threads`.

mod pipeline;
mod reports;

use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use exitlab::analysis::{self, QueryCategory, QueryClass};
use exitlab::ingest;
use exitlab::metrics;
use exitlab::model;
use exitlab::scorer::{self, CheckpointSet};
use exitlab::sentinel::{self, SentinelConfig};
use rayon::prelude::*;

use pipeline::{ModelFormat, ZeroIdcgPolicy};

#[derive(Parser)]
#[command(
    name = "exitlab",
    version,
    about = "Early-exit analysis for additive tree-ensemble rankers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a split with the full ensemble and report per-query NDCG
    Score(ScoreArgs),
    /// Find each query's ideal exit point and the headroom it leaves
    Oracle(OracleArgs),
    /// Label each query's NDCG trajectory with one of six shape classes
    Classify(ClassifyArgs),
    /// Exhaustively search sentinel placements for the best overall NDCG
    PlaceSentinels(PlaceSentinelsArgs),
    /// Evaluate a fixed sentinel configuration and write the exit report
    Evaluate(EvaluateArgs),
    /// Generate a synthetic ensemble and ranking dataset for experiments
    GenSynthetic(GenSyntheticArgs),
}

#[derive(Args)]
struct ModelOpts {
    /// Path to the ranking model
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// On-disk model format
    #[arg(long, value_enum, default_value = "text", value_name = "FORMAT")]
    model_format: ModelFormat,
}

#[derive(Args)]
struct EvalOpts {
    /// NDCG rank cutoff
    #[arg(long, default_value_t = 10, value_name = "K")]
    k: usize,

    /// Treatment of queries with no relevant documents
    #[arg(long, value_enum, default_value = "zero", value_name = "POLICY")]
    zero_idcg: ZeroIdcgPolicy,

    /// Worker threads (0 = one per logical CPU)
    #[arg(long, default_value_t = 0, value_name = "N")]
    threads: usize,
}

#[derive(Args)]
struct GridOpts {
    /// Checkpoint stride, in trees
    #[arg(long, default_value_t = 25, value_name = "TREES")]
    stride: usize,

    /// Also place a checkpoint after the very first tree
    #[arg(long)]
    first_tree: bool,
}

#[derive(Args)]
struct OutOpts {
    /// Directory the report files are written into (created if absent)
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    model: ModelOpts,

    /// Test split in LETOR format
    #[arg(long, value_name = "FILE")]
    test: PathBuf,

    #[command(flatten)]
    eval: EvalOpts,

    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelOpts,

    /// Test split in LETOR format
    #[arg(long, value_name = "FILE")]
    test: PathBuf,

    #[command(flatten)]
    eval: EvalOpts,

    #[command(flatten)]
    grid: GridOpts,

    /// Flat-band tolerance for the trajectory shape classes
    #[arg(long, default_value_t = 0.01, value_name = "EPS")]
    epsilon: f64,

    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    model: ModelOpts,

    /// Test split in LETOR format
    #[arg(long, value_name = "FILE")]
    test: PathBuf,

    #[command(flatten)]
    eval: EvalOpts,

    #[command(flatten)]
    grid: GridOpts,

    /// Flat-band tolerance for the trajectory shape classes
    #[arg(long, default_value_t = 0.01, value_name = "EPS")]
    epsilon: f64,

    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args)]
struct PlaceSentinelsArgs {
    #[command(flatten)]
    model: ModelOpts,

    /// Validation split the placement is chosen on
    #[arg(long, value_name = "FILE")]
    valid: Option<PathBuf>,

    /// Test split; used for placement only when --valid is absent
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,

    /// How many sentinels to place
    #[arg(long, default_value_t = 2, value_name = "N")]
    num_sentinels: usize,

    #[command(flatten)]
    eval: EvalOpts,

    #[command(flatten)]
    grid: GridOpts,

    #[command(flatten)]
    out: OutOpts,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelOpts,

    /// Test split in LETOR format
    #[arg(long, value_name = "FILE")]
    test: PathBuf,

    /// Comma-separated sentinel tree positions, e.g. 25,300
    #[arg(long, value_name = "POS,POS,...")]
    sentinels: String,

    /// Weighting of the headline speedup (per-row speedups are always
    /// query-weighted)
    #[arg(long, value_enum, default_value = "queries", value_name = "WEIGHTING")]
    speedup_weighting: SpeedupWeighting,

    #[command(flatten)]
    eval: EvalOpts,

    #[command(flatten)]
    out: OutOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SpeedupWeighting {
    /// Every query counts equally
    Queries,
    /// Queries count in proportion to their document count
    Documents,
}

#[derive(Args)]
struct GenSyntheticArgs {
    /// Trees in the generated ensemble
    #[arg(long, default_value_t = 200, value_name = "N")]
    num_trees: usize,

    /// Maximum depth of each generated tree
    #[arg(long, default_value_t = 4, value_name = "D")]
    max_depth: usize,

    /// Feature-vector width shared by the model and the dataset
    #[arg(long, default_value_t = 10, value_name = "N")]
    num_features: usize,

    /// Queries in the generated dataset
    #[arg(long, default_value_t = 100, value_name = "N")]
    num_queries: usize,

    /// Fewest documents per query
    #[arg(long, default_value_t = 5, value_name = "N")]
    min_docs: usize,

    /// Most documents per query
    #[arg(long, default_value_t = 30, value_name = "N")]
    max_docs: usize,

    /// Seed for the generators
    #[arg(long, default_value_t = 42, value_name = "SEED")]
    seed: u64,

    #[command(flatten)]
    out: OutOpts,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match Cli::parse().command {
        Command::Score(args) => cmd_score(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Classify(args) => cmd_classify(args),
        Command::PlaceSentinels(args) => cmd_place_sentinels(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::GenSynthetic(args) => cmd_gen_synthetic(args),
    }
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let ensemble = pipeline::load_model(&args.model.model, args.model.model_format)?;
    let dataset = pipeline::load_dataset(&args.test, &ensemble)?;
    let pool = pipeline::thread_pool(args.eval.threads)?;
    let k = args.eval.k;

    let rows: exitlab::Result<Vec<reports::ScoreRow>> = pool.install(|| {
        dataset
            .groups
            .par_iter()
            .map(|g| {
                let scores = scorer::score_full(&ensemble, g);
                let ndcg = metrics::ndcg_at_k(&scores, &g.labels(), k)?;
                Ok(reports::ScoreRow {
                    query_id: g.query_id.clone(),
                    num_docs: g.len(),
                    zero_idcg: ndcg.zero_idcg,
                    ndcg: ndcg.value,
                })
            })
            .collect()
    });
    let rows = rows?;

    let zero_idcg_queries = rows.iter().filter(|r| r.zero_idcg).count();
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| args.eval.zero_idcg == ZeroIdcgPolicy::Zero || !r.zero_idcg)
        .map(|r| r.ndcg)
        .collect();
    if values.is_empty() {
        bail!("every query was screened out (all have zero ideal DCG)");
    }
    let mean = metrics::mean_ndcg(&values)?;
    let stats = ingest::dataset_stats(&dataset);

    let dir = &args.out.out_dir;
    reports::ensure_dir(dir)?;
    reports::write_scores(&dir.join("scores.tsv"), &rows)?;
    let pairs = vec![
        ("num_queries", stats.num_queries.to_string()),
        ("num_documents", stats.num_documents.to_string()),
        ("num_features", stats.num_features.to_string()),
        ("label_0", stats.label_histogram[0].to_string()),
        ("label_1", stats.label_histogram[1].to_string()),
        ("label_2", stats.label_histogram[2].to_string()),
        ("label_3", stats.label_histogram[3].to_string()),
        ("label_4", stats.label_histogram[4].to_string()),
        ("num_trees", ensemble.len().to_string()),
        ("model_num_features", ensemble.num_features().to_string()),
        ("base_score", reports::raw(ensemble.base_score())),
        ("k", k.to_string()),
        ("zero_idcg_policy", args.eval.zero_idcg.name().to_string()),
        ("zero_idcg_queries", zero_idcg_queries.to_string()),
        ("queries_in_mean", values.len().to_string()),
        ("mean_ndcg", reports::raw(mean)),
    ];
    reports::write_kv(&dir.join("stats.tsv"), &pairs)?;

    println!(
        "scored {} queries against {} trees: mean NDCG@{} = {:.4}",
        stats.num_queries,
        ensemble.len(),
        k,
        mean
    );
    println!("wrote scores.tsv and stats.tsv to {}", dir.display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let ensemble = pipeline::load_model(&args.model.model, args.model.model_format)?;
    let dataset = pipeline::load_dataset(&args.test, &ensemble)?;
    let pool = pipeline::thread_pool(args.eval.threads)?;
    let len = ensemble.len();
    let cps = scorer::make_checkpoints(len, args.grid.stride, args.grid.first_tree)?;
    let trajs = pipeline::trajectories(&pool, &ensemble, &dataset, &cps, args.eval.k)?;
    let screened = pipeline::screen_zero_idcg(trajs, args.eval.zero_idcg)?;

    let exits: Vec<_> = screened.trajs.iter().map(analysis::oracle_exit).collect();
    let classes: Vec<QueryClass> = screened
        .trajs
        .iter()
        .map(|t| analysis::classify_query(t, args.epsilon))
        .collect::<exitlab::Result<_>>()?;
    let histogram = analysis::exit_histogram(&exits, 1);
    let curve = analysis::oracle_curve(&screened.trajs, &exits)?;

    let n = exits.len() as f64;
    let mean_full = pipeline::mean_full_ndcg(&screened.trajs)?;
    let mean_oracle = exits.iter().map(|e| e.exit_ndcg).sum::<f64>() / n;
    let mean_exit = exits.iter().map(|e| e.exit_position as f64).sum::<f64>() / n;
    let gain = reports::relative_gain_pct(mean_full, mean_oracle);
    let speedup = len as f64 / mean_exit;

    let dir = &args.out.out_dir;
    reports::ensure_dir(dir)?;
    reports::write_oracle_exits(&dir.join("oracle_exits.tsv"), &exits, &classes)?;
    reports::write_histogram(&dir.join("exit_histogram.tsv"), &histogram)?;
    reports::write_curve(&dir.join("oracle_curve.tsv"), &curve)?;
    let pairs = vec![
        ("num_queries", exits.len().to_string()),
        ("zero_idcg_policy", args.eval.zero_idcg.name().to_string()),
        ("zero_idcg_queries", screened.zero_idcg_count.to_string()),
        ("ensemble_len", len.to_string()),
        ("k", args.eval.k.to_string()),
        ("stride", args.grid.stride.to_string()),
        ("first_tree", args.grid.first_tree.to_string()),
        ("epsilon", reports::raw(args.epsilon)),
        ("mean_ndcg_full", reports::raw(mean_full)),
        ("mean_ndcg_oracle", reports::raw(mean_oracle)),
        ("gain_pct", reports::raw(gain)),
        ("mean_exit_position", reports::raw(mean_exit)),
        ("speedup", reports::raw(speedup)),
    ];
    reports::write_kv(&dir.join("oracle_summary.tsv"), &pairs)?;

    println!(
        "oracle exits for {} queries: mean NDCG@{} {:.4} -> {:.4} ({:+.2}%), \
         mean exit {:.1} of {} trees ({:.2}x)",
        exits.len(),
        args.eval.k,
        mean_full,
        mean_oracle,
        gain,
        mean_exit,
        len,
        speedup
    );
    println!(
        "wrote oracle_exits.tsv, exit_histogram.tsv, oracle_curve.tsv and \
         oracle_summary.tsv to {}",
        dir.display()
    );
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let ensemble = pipeline::load_model(&args.model.model, args.model.model_format)?;
    let dataset = pipeline::load_dataset(&args.test, &ensemble)?;
    let pool = pipeline::thread_pool(args.eval.threads)?;
    let cps = scorer::make_checkpoints(ensemble.len(), args.grid.stride, args.grid.first_tree)?;
    let trajs = pipeline::trajectories(&pool, &ensemble, &dataset, &cps, args.eval.k)?;
    let screened = pipeline::screen_zero_idcg(trajs, args.eval.zero_idcg)?;

    let mut rows = Vec::with_capacity(screened.trajs.len());
    let mut counts = [0usize; 6];
    for traj in &screened.trajs {
        let class = analysis::classify_query(traj, args.epsilon)?;
        counts[(class.as_u8() - 1) as usize] += 1;
        rows.push((traj.query_id.clone(), class));
    }
    let total = rows.len();
    let by_category = |cat: QueryCategory| -> usize {
        QueryClass::ALL
            .iter()
            .enumerate()
            .filter(|(_, c)| c.category() == cat)
            .map(|(i, _)| counts[i])
            .sum()
    };

    let dir = &args.out.out_dir;
    reports::ensure_dir(dir)?;
    reports::write_classes(&dir.join("classes.tsv"), &rows)?;
    reports::write_class_counts(&dir.join("class_counts.tsv"), &counts, total)?;

    println!(
        "classified {} queries (epsilon {}): worsening {}, flat {}, improving {}",
        total,
        args.epsilon,
        by_category(QueryCategory::Worsening),
        by_category(QueryCategory::Flat),
        by_category(QueryCategory::Improving)
    );
    println!(
        "wrote classes.tsv and class_counts.tsv to {}",
        dir.display()
    );
    Ok(())
}

fn cmd_place_sentinels(args: PlaceSentinelsArgs) -> Result<()> {
    let (data_path, split) = match (&args.valid, &args.test) {
        (Some(valid), _) => (valid, "validation"),
        (None, Some(test)) => {
            eprintln!(
                "note: no --valid split given; placing sentinels on the test \
                 split (exploratory use only)"
            );
            (test, "test")
        }
        (None, None) => bail!("place-sentinels needs --valid (preferred) or --test"),
    };
    let ensemble = pipeline::load_model(&args.model.model, args.model.model_format)?;
    let dataset = pipeline::load_dataset(data_path, &ensemble)?;
    let pool = pipeline::thread_pool(args.eval.threads)?;
    let len = ensemble.len();
    let cps = scorer::make_checkpoints(len, args.grid.stride, args.grid.first_tree)?;
    let trajs = pipeline::trajectories(&pool, &ensemble, &dataset, &cps, args.eval.k)?;
    let screened = pipeline::screen_zero_idcg(trajs, args.eval.zero_idcg)?;

    let candidates: Vec<usize> = cps
        .positions()
        .iter()
        .copied()
        .filter(|&p| p < len)
        .collect();
    let search = pool.install(|| {
        sentinel::search_placements(args.num_sentinels, &candidates, &screened.trajs, len)
    })?;
    let full_ndcg = pipeline::mean_full_ndcg(&screened.trajs)?;
    let best = &search.ranking[0];

    let dir = &args.out.out_dir;
    reports::ensure_dir(dir)?;
    reports::write_placements(&dir.join("placements.tsv"), &search.ranking, full_ndcg)?;
    let best_file = reports::BestConfigFile {
        sentinels: best.sentinels.clone(),
        objective: best.objective,
        full_ndcg,
        gain_pct: reports::relative_gain_pct(full_ndcg, best.objective),
        num_sentinels: args.num_sentinels,
        candidates: candidates.clone(),
        num_configs: search.ranking.len(),
        ensemble_len: len,
        k: args.eval.k,
        split: split.to_string(),
        num_queries: screened.trajs.len(),
        zero_idcg_policy: args.eval.zero_idcg.name().to_string(),
        zero_idcg_queries: screened.zero_idcg_count,
    };
    reports::write_json(&dir.join("best_config.json"), &best_file)?;

    let positions: Vec<String> = best.sentinels.iter().map(|p| p.to_string()).collect();
    println!(
        "searched {} placements of {} sentinels over {} candidates on the {} \
         split: best [{}] with NDCG@{} {:.4} ({:+.2}% vs full)",
        search.ranking.len(),
        args.num_sentinels,
        candidates.len(),
        split,
        positions.join(","),
        args.eval.k,
        best.objective,
        reports::relative_gain_pct(full_ndcg, best.objective)
    );
    println!(
        "wrote placements.tsv and best_config.json to {}",
        dir.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let ensemble = pipeline::load_model(&args.model.model, args.model.model_format)?;
    let dataset = pipeline::load_dataset(&args.test, &ensemble)?;
    let pool = pipeline::thread_pool(args.eval.threads)?;
    let len = ensemble.len();
    let sentinels = pipeline::parse_positions(&args.sentinels)?;
    let config = SentinelConfig::new(sentinels.clone(), len)
        .context("invalid --sentinels for this model")?;
    let mut positions = sentinels.clone();
    positions.push(len);
    let cps = CheckpointSet::new(positions, len)?;
    let trajs = pipeline::trajectories(&pool, &ensemble, &dataset, &cps, args.eval.k)?;
    let screened = pipeline::screen_zero_idcg(trajs, args.eval.zero_idcg)?;

    let report = sentinel::evaluate_config(&config, &screened.trajs, len)?;

    // Document counts keyed by query id for the alternative weighting.
    let docs_by_query: HashMap<&str, usize> = dataset
        .groups
        .iter()
        .map(|g| (g.query_id.as_str(), g.len()))
        .collect();
    let exit_doc_pairs: Vec<(usize, usize)> = report
        .per_query_exits
        .iter()
        .map(|(qid, exit)| {
            let docs = docs_by_query
                .get(qid.as_str())
                .copied()
                .expect("exit decisions cover only parsed queries");
            (*exit, docs)
        })
        .collect();
    let docs_weighted = analysis::docs_weighted_speedup(&exit_doc_pairs, len)?;
    let selected = match args.speedup_weighting {
        SpeedupWeighting::Queries => report.overall.speedup,
        SpeedupWeighting::Documents => docs_weighted,
    };
    let weighting_name = match args.speedup_weighting {
        SpeedupWeighting::Queries => "queries",
        SpeedupWeighting::Documents => "documents",
    };

    let total = report.overall.num_queries;
    let rows_json: Vec<reports::EvalRowJson> = report
        .rows
        .iter()
        .map(|r| reports::EvalRowJson {
            exit_position: r.exit_position,
            num_queries: r.num_queries,
            pct_queries: 100.0 * r.num_queries as f64 / total as f64,
            ndcg_full: r.ndcg_full,
            ndcg_at_exit: r.ndcg_at_exit,
            gain_pct: reports::relative_gain_pct(r.ndcg_full, r.ndcg_at_exit),
            speedup: r.speedup,
        })
        .collect();
    let report_file = reports::EvalReportFile {
        ensemble_len: len,
        k: args.eval.k,
        sentinels: sentinels.clone(),
        zero_idcg_policy: args.eval.zero_idcg.name().to_string(),
        zero_idcg_queries: screened.zero_idcg_count,
        speedup_weighting: weighting_name.to_string(),
        rows: rows_json,
        overall: reports::EvalOverallJson {
            num_queries: total,
            ndcg_full: report.overall.ndcg_full,
            ndcg_exit: report.overall.ndcg_exit,
            gain_pct: report.overall.gain_pct,
            mean_exit_position: report.overall.mean_exit_position,
            speedup_queries_weighted: report.overall.speedup,
            speedup_docs_weighted: docs_weighted,
            speedup: selected,
        },
        per_query_exits: report.per_query_exits.clone(),
    };

    let dir = &args.out.out_dir;
    reports::ensure_dir(dir)?;
    reports::write_report_tsv(
        &dir.join("report.tsv"),
        &report.rows,
        &report.overall,
        selected,
    )?;
    reports::write_json(&dir.join("report.json"), &report_file)?;

    let positions: Vec<String> = sentinels.iter().map(|p| p.to_string()).collect();
    println!(
        "evaluated sentinels [{}] on {} queries: NDCG@{} {:.4} -> {:.4} \
         ({:+.2}%), speedup {:.2}x ({}-weighted)",
        positions.join(","),
        total,
        args.eval.k,
        report.overall.ndcg_full,
        report.overall.ndcg_exit,
        report.overall.gain_pct,
        selected,
        weighting_name
    );
    println!("wrote report.tsv and report.json to {}", dir.display());
    Ok(())
}

fn cmd_gen_synthetic(args: GenSyntheticArgs) -> Result<()> {
    if args.num_trees == 0 || args.max_depth == 0 || args.num_features == 0 || args.num_queries == 0
    {
        bail!("generator sizes must all be at least 1");
    }
    if args.min_docs == 0 || args.min_docs > args.max_docs {
        bail!("--min-docs must be in 1..=--max-docs");
    }
    let ensemble = model::generate_synthetic_ensemble(
        args.num_trees,
        args.max_depth,
        args.num_features,
        args.seed,
    );
    let dataset = ingest::generate_synthetic_dataset(
        args.num_queries,
        args.min_docs,
        args.max_docs,
        args.num_features,
        args.seed.wrapping_add(1),
    );

    let dir = &args.out.out_dir;
    reports::ensure_dir(dir)?;
    let model_path = dir.join("model.json");
    let data_path = dir.join("dataset.letor");
    let model_file = std::fs::File::create(&model_path)
        .with_context(|| format!("cannot write {}", model_path.display()))?;
    model::write_canonical_model(&ensemble, std::io::BufWriter::new(model_file))?;
    let data_file = std::fs::File::create(&data_path)
        .with_context(|| format!("cannot write {}", data_path.display()))?;
    ingest::write_letor(&dataset, std::io::BufWriter::new(data_file))?;

    println!(
        "wrote a {}-tree model ({} features) and a {}-query dataset \
         ({} documents) to {}",
        ensemble.len(),
        ensemble.num_features(),
        dataset.num_queries(),
        dataset.num_documents(),
        dir.display()
    );
    Ok(())
}
