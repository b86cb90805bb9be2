//! Additive regression-tree ensembles.
//!
//! Trees are stored as node arenas with the root at index 0. An internal
//! node sends a document left when `feature <= threshold`; NaN feature
//! values follow the node's `default_left` side. Leaf values carry any
//! learning-rate shrinkage already applied by the trainer, so an ensemble
//! score is simply `base_score` plus the sum of one leaf per tree.
//!
//! Two file formats are supported: the LightGBM-style text dump
//! ([`parse_text_model`]) and a canonical JSON form
//! ([`parse_canonical_model`] / [`write_canonical_model`]) that round-trips
//! thresholds and leaf values bit-exactly.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CATEGORICAL_MASK: i64 = 1;
const DEFAULT_LEFT_MASK: i64 = 2;

/// One node of a regression tree. `split_feature` is 1-based; `left` and
/// `right` index into the owning tree's node arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        split_feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
    },
    Leaf {
        value: f64,
    },
}

/// A binary regression tree over a node arena rooted at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Validates that `nodes` forms a proper binary tree rooted at index 0:
    /// child indices in range and distinct, every non-root node with exactly
    /// one parent, every node reachable from the root, and all numeric
    /// fields finite.
    pub fn new(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidModel("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match node {
                TreeNode::Internal {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "node {i} has non-finite threshold"
                        )));
                    }
                    if *left >= nodes.len() || *right >= nodes.len() {
                        return Err(Error::InvalidModel(format!(
                            "node {i} references a child outside the arena"
                        )));
                    }
                    if left == right {
                        return Err(Error::InvalidModel(format!(
                            "node {i} references the same child twice"
                        )));
                    }
                    parents[*left] += 1;
                    parents[*right] += 1;
                }
                TreeNode::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "leaf {i} has non-finite value"
                        )));
                    }
                }
            }
        }
        if parents[0] != 0 {
            return Err(Error::InvalidModel("root node has a parent".into()));
        }
        if let Some(i) = (1..nodes.len()).find(|&i| parents[i] != 1) {
            return Err(Error::InvalidModel(format!(
                "node {i} has {} parents, expected exactly one",
                parents[i]
            )));
        }
        // Parent counts rule out double references, but a cycle detached
        // from the root would still satisfy them; require full reachability.
        let mut visited = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        let mut seen = 0usize;
        while let Some(i) = stack.pop() {
            if visited[i] {
                return Err(Error::InvalidModel("tree contains a cycle".into()));
            }
            visited[i] = true;
            seen += 1;
            if let TreeNode::Internal { left, right, .. } = &nodes[i] {
                stack.push(*left);
                stack.push(*right);
            }
        }
        if seen != nodes.len() {
            return Err(Error::InvalidModel(
                "tree contains nodes unreachable from the root".into(),
            ));
        }
        Ok(RegressionTree { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Maximum number of edges on any root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => max = max.max(d),
                TreeNode::Internal { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
            }
        }
        max
    }

    /// Routes a feature vector from the root to a leaf and returns its
    /// value. `features` must cover the owning ensemble's feature count;
    /// equality goes left, NaN follows `default_left`.
    pub fn traverse(&self, features: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Internal {
                    split_feature,
                    threshold,
                    left,
                    right,
                    default_left,
                } => {
                    let v = features[(*split_feature - 1) as usize];
                    i = if v.is_nan() {
                        if *default_left {
                            *left
                        } else {
                            *right
                        }
                    } else if v <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// An ordered additive ensemble: score = base_score + Σ tree outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<RegressionTree>,
    num_features: usize,
    base_score: f64,
}

impl Ensemble {
    pub fn new(trees: Vec<RegressionTree>, num_features: usize, base_score: f64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidModel("ensemble contains no trees".into()));
        }
        if num_features == 0 {
            return Err(Error::InvalidModel(
                "ensemble declares zero features".into(),
            ));
        }
        if !base_score.is_finite() {
            return Err(Error::InvalidModel("base score is not finite".into()));
        }
        for (t, tree) in trees.iter().enumerate() {
            for node in tree.nodes() {
                if let TreeNode::Internal { split_feature, .. } = node {
                    if *split_feature == 0 || *split_feature as usize > num_features {
                        return Err(Error::InvalidModel(format!(
                            "tree {t} splits on feature {split_feature}, outside 1..={num_features}"
                        )));
                    }
                }
            }
        }
        Ok(Ensemble {
            trees,
            num_features,
            base_score,
        })
    }

    /// Number of trees, i.e. the ensemble length L.
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(|t| t.depth()).max().unwrap_or(0)
    }
}

/// One `Tree=` block of a text dump, as raw `key=value` lines.
struct TreeBlock {
    start_line: usize,
    fields: HashMap<String, (usize, String)>,
}

impl TreeBlock {
    fn get(&self, key: &str) -> Result<(usize, &str)> {
        self.fields
            .get(key)
            .map(|(line, v)| (*line, v.as_str()))
            .ok_or_else(|| Error::parse(self.start_line, format!("tree block is missing `{key}`")))
    }

    fn scalar<T: FromStr>(&self, key: &str) -> Result<T> {
        let (line, raw) = self.get(key)?;
        raw.trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("cannot parse `{key}={raw}`")))
    }

    fn vector<T: FromStr>(&self, key: &str, expected_len: usize) -> Result<Vec<T>> {
        let (line, raw) = self.get(key)?;
        let values = raw
            .split_whitespace()
            .map(|tok| {
                tok.parse()
                    .map_err(|_| Error::parse(line, format!("cannot parse `{tok}` in `{key}`")))
            })
            .collect::<Result<Vec<T>>>()?;
        if values.len() != expected_len {
            return Err(Error::parse(
                line,
                format!(
                    "`{key}` has {} entries, expected {expected_len}",
                    values.len()
                ),
            ));
        }
        Ok(values)
    }
}

/// Parses a LightGBM-style text dump: a header (only `max_feature_idx` is
/// consumed), then one `Tree=N` block per tree in boosting order, terminated
/// by a blank line or `end of trees`. Only numerical `<=` splits are
/// supported; categorical splits are rejected. Trainer feature indices are
/// 0-based and are shifted to this crate's 1-based convention.
pub fn parse_text_model<R: BufRead>(reader: R) -> Result<Ensemble> {
    let mut max_feature_idx: Option<usize> = None;
    let mut trees = Vec::new();
    let mut block: Option<TreeBlock> = None;

    let finish = |block: &mut Option<TreeBlock>, trees: &mut Vec<RegressionTree>| match block.take()
    {
        Some(b) => build_text_tree(&b).map(|t| trees.push(t)),
        None => Ok(()),
    };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.starts_with("Tree=") {
            finish(&mut block, &mut trees)?;
            block = Some(TreeBlock {
                start_line: line_no,
                fields: HashMap::new(),
            });
        } else if line.trim() == "end of trees" {
            finish(&mut block, &mut trees)?;
            break;
        } else if line.trim().is_empty() {
            finish(&mut block, &mut trees)?;
        } else if let Some((key, value)) = line.split_once('=') {
            match &mut block {
                Some(b) => {
                    b.fields
                        .insert(key.trim().to_string(), (line_no, value.to_string()));
                }
                None => {
                    if key.trim() == "max_feature_idx" {
                        let parsed = value.trim().parse().map_err(|_| {
                            Error::parse(line_no, format!("cannot parse `max_feature_idx={value}`"))
                        })?;
                        max_feature_idx = Some(parsed);
                    }
                }
            }
        }
    }
    finish(&mut block, &mut trees)?;

    let num_features = match max_feature_idx {
        Some(m) => m + 1,
        None => trees
            .iter()
            .flat_map(|t: &RegressionTree| t.nodes())
            .filter_map(|n| match n {
                TreeNode::Internal { split_feature, .. } => Some(*split_feature as usize),
                TreeNode::Leaf { .. } => None,
            })
            .max()
            .unwrap_or(1),
    };
    Ensemble::new(trees, num_features, 0.0)
}

fn build_text_tree(block: &TreeBlock) -> Result<RegressionTree> {
    let num_leaves: usize = block.scalar("num_leaves")?;
    if num_leaves == 0 {
        return Err(Error::parse(block.start_line, "num_leaves must be >= 1"));
    }
    if let Ok(num_cat) = block.scalar::<usize>("num_cat") {
        if num_cat > 0 {
            return Err(Error::UnsupportedModel(
                "categorical splits are not supported".into(),
            ));
        }
    }
    let leaf_values: Vec<f64> = block.vector("leaf_value", num_leaves)?;
    if num_leaves == 1 {
        return RegressionTree::new(vec![TreeNode::Leaf {
            value: leaf_values[0],
        }]);
    }

    let num_internal = num_leaves - 1;
    let split_features: Vec<u32> = block.vector("split_feature", num_internal)?;
    let thresholds: Vec<f64> = block.vector("threshold", num_internal)?;
    let decision_types: Vec<i64> = block.vector("decision_type", num_internal)?;
    let left_children: Vec<i64> = block.vector("left_child", num_internal)?;
    let right_children: Vec<i64> = block.vector("right_child", num_internal)?;

    let map_child = |c: i64| -> Result<usize> {
        if c >= 0 {
            let c = c as usize;
            if c >= num_internal {
                return Err(Error::parse(
                    block.start_line,
                    format!("internal child index {c} out of range"),
                ));
            }
            Ok(c)
        } else {
            let leaf = !c as usize; // -1 -> leaf 0, -2 -> leaf 1, ...
            if leaf >= num_leaves {
                return Err(Error::parse(
                    block.start_line,
                    format!("leaf child index {leaf} out of range"),
                ));
            }
            Ok(num_internal + leaf)
        }
    };

    let mut nodes = Vec::with_capacity(num_internal + num_leaves);
    for i in 0..num_internal {
        let dt = decision_types[i];
        if dt & CATEGORICAL_MASK != 0 {
            return Err(Error::UnsupportedModel(
                "categorical splits are not supported".into(),
            ));
        }
        nodes.push(TreeNode::Internal {
            split_feature: split_features[i] + 1,
            threshold: thresholds[i],
            left: map_child(left_children[i])?,
            right: map_child(right_children[i])?,
            default_left: dt & DEFAULT_LEFT_MASK != 0,
        });
    }
    nodes.extend(
        leaf_values
            .into_iter()
            .map(|value| TreeNode::Leaf { value }),
    );
    RegressionTree::new(nodes)
}

#[derive(Serialize)]
struct CanonicalModelOut<'a> {
    num_features: usize,
    base_score: f64,
    trees: Vec<CanonicalTreeOut<'a>>,
}

#[derive(Serialize)]
struct CanonicalTreeOut<'a> {
    nodes: &'a [TreeNode],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalModelIn {
    num_features: usize,
    base_score: f64,
    trees: Vec<CanonicalTreeIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalTreeIn {
    nodes: Vec<TreeNode>,
}

/// Reads the canonical JSON model form and validates its structure.
pub fn parse_canonical_model<R: Read>(reader: R) -> Result<Ensemble> {
    let raw: CanonicalModelIn = serde_json::from_reader(reader)?;
    let trees = raw
        .trees
        .into_iter()
        .map(|t| RegressionTree::new(t.nodes))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(trees, raw.num_features, raw.base_score)
}

/// Writes the canonical JSON model form. Numeric fields are rendered with
/// shortest-round-trip precision, so a write/parse cycle reproduces every
/// threshold and leaf value bit-exactly.
pub fn write_canonical_model<W: Write>(ensemble: &Ensemble, mut out: W) -> Result<()> {
    let raw = CanonicalModelOut {
        num_features: ensemble.num_features(),
        base_score: ensemble.base_score(),
        trees: ensemble
            .trees()
            .iter()
            .map(|t| CanonicalTreeOut { nodes: t.nodes() })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &raw)?;
    writeln!(out)?;
    Ok(())
}

/// Generates a random ensemble of `num_trees` trees with depth in
/// 1..=max_depth, split features in 1..=num_features, thresholds in [0, 1),
/// and leaf values in (-1/num_trees, 1/num_trees). Deterministic for a
/// fixed seed.
pub fn generate_synthetic_ensemble(
    num_trees: usize,
    max_depth: usize,
    num_features: usize,
    seed: u64,
) -> Ensemble {
    assert!(num_trees >= 1 && max_depth >= 1 && num_features >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaf_scale = 1.0 / num_trees as f64;
    let trees = (0..num_trees)
        .map(|_| {
            let mut nodes = Vec::new();
            grow_subtree(
                &mut nodes,
                &mut rng,
                max_depth,
                true,
                num_features,
                leaf_scale,
            );
            RegressionTree::new(nodes).expect("generated tree is structurally valid")
        })
        .collect();
    Ensemble::new(trees, num_features, 0.0).expect("generated ensemble is valid")
}

fn grow_subtree(
    nodes: &mut Vec<TreeNode>,
    rng: &mut ChaCha8Rng,
    depth_left: usize,
    force_split: bool,
    num_features: usize,
    leaf_scale: f64,
) -> usize {
    // A 30% prune chance keeps the trees ragged rather than complete.
    if depth_left == 0 || (!force_split && rng.gen_bool(0.3)) {
        let value = rng.gen_range(-1.0..1.0) * leaf_scale;
        nodes.push(TreeNode::Leaf { value });
        return nodes.len() - 1;
    }
    let idx = nodes.len();
    nodes.push(TreeNode::Leaf { value: 0.0 }); // placeholder, patched below
    let split_feature = rng.gen_range(1..=num_features as u32);
    let threshold = rng.gen::<f64>();
    let default_left = rng.gen_bool(0.5);
    let left = grow_subtree(nodes, rng, depth_left - 1, false, num_features, leaf_scale);
    let right = grow_subtree(nodes, rng, depth_left - 1, false, num_features, leaf_scale);
    nodes[idx] = TreeNode::Internal {
        split_feature,
        threshold,
        left,
        right,
        default_left,
    };
    idx
}
