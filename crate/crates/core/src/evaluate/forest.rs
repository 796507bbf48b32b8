//! Random forest over binary features, used as the real-vs-synthetic
//! distinguisher.
//!
//! Splits test a single feature (left = 0, right = 1) and are chosen by Gini
//! impurity reduction among a random subset of candidate features. If none
//! of the first `features_per_split` candidates separates the node, further
//! candidates are tried until one does or all features are exhausted.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FeaturesPerSplit {
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, d: usize) -> usize {
        let n = match self {
            FeaturesPerSplit::Sqrt => (d as f64).sqrt().round() as usize,
            FeaturesPerSplit::All => d,
            FeaturesPerSplit::Count(n) => n,
        };
        n.clamp(1, d.max(1))
    }
}

impl std::fmt::Display for FeaturesPerSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeaturesPerSplit::Sqrt => f.write_str("sqrt"),
            FeaturesPerSplit::All => f.write_str("all"),
            FeaturesPerSplit::Count(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for FeaturesPerSplit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sqrt" => Ok(FeaturesPerSplit::Sqrt),
            "all" => Ok(FeaturesPerSplit::All),
            _ => s
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .map(FeaturesPerSplit::Count)
                .ok_or_else(|| format!("expected `sqrt`, `all` or a positive count, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForestSettings {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub seed: u64,
}

impl Default for ForestSettings {
    fn default() -> Self {
        ForestSettings {
            n_trees: 200,
            max_depth: None,
            min_leaf: 1,
            features_per_split: FeaturesPerSplit::Sqrt,
            seed: 0,
        }
    }
}

impl ForestSettings {
    /// Compact descriptor without commas, suitable for a CSV cell.
    pub fn describe(&self) -> String {
        let depth = self
            .max_depth
            .map_or_else(|| "none".to_owned(), |d| d.to_string());
        format!(
            "random_forest(trees={};max_depth={};min_leaf={};features={})",
            self.n_trees, depth, self.min_leaf, self.features_per_split
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf { positive: f64 },
    Split { feature: usize, zero: usize, one: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    data: &'a BinaryDataset,
    labels: &'a [bool],
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
    features: Vec<usize>,
    nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize, g: &mut ChaCha8Rng) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.labels[r]).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positive: pos as f64 / n as f64,
        });
        if pos == 0 || pos == n || depth >= self.max_depth || n < 2 * self.min_leaf {
            return id;
        }
        let parent = gini(pos, n);
        let d = self.features.len();
        let mut best: Option<(f64, usize)> = None;
        // partial Fisher-Yates: draw candidates one at a time
        for tried in 0..d {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            let pick = g.random_range(tried..d);
            self.features.swap(tried, pick);
            let f = self.features[tried];
            let (mut n1, mut p1) = (0, 0);
            for &r in &rows {
                if self.data.get(r, f) {
                    n1 += 1;
                    p1 += self.labels[r] as usize;
                }
            }
            let n0 = n - n1;
            if n0 < self.min_leaf || n1 < self.min_leaf {
                continue;
            }
            let child = (n0 as f64 * gini(pos - p1, n0) + n1 as f64 * gini(p1, n1)) / n as f64;
            let gain = parent - child;
            if best.is_none_or(|(b, _)| gain > b) {
                best = Some((gain, f));
            }
        }
        let Some((_, feature)) = best else {
            return id;
        };
        let (ones, zeros): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.data.get(r, feature));
        let zero = self.build(zeros, depth + 1, g);
        let one = self.build(ones, depth + 1, g);
        self.nodes[id] = Node::Split { feature, zero, one };
        id
    }
}

impl DecisionTree {
    /// Grows one tree on a bootstrap resample drawn from `g`.
    pub fn fit_bootstrap(
        data: &BinaryDataset,
        labels: &[bool],
        settings: &ForestSettings,
        g: &mut ChaCha8Rng,
    ) -> Self {
        let n = data.n_rows();
        let rows: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
        let mut features: Vec<usize> = (0..data.n_cols()).collect();
        features.shuffle(g);
        let mut b = Builder {
            data,
            labels,
            max_depth: settings.max_depth.unwrap_or(usize::MAX),
            min_leaf: settings.min_leaf.max(1),
            mtry: settings.features_per_split.resolve(data.n_cols()),
            features,
            nodes: Vec::new(),
        };
        b.build(rows, 0, g);
        DecisionTree { nodes: b.nodes }
    }

    /// Fraction of positive training rows in the leaf reached by `row`.
    pub fn predict_proba(&self, data: &BinaryDataset, row: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { positive } => return positive,
                Node::Split { feature, zero, one } => {
                    at = if data.get(row, feature) { one } else { zero };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { zero, one, .. } => 1 + walk(nodes, zero).max(walk(nodes, one)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    trees: Vec<DecisionTree>,
}

/// Stream used for tree `t` of a forest with the given seed.
pub fn tree_stream(seed: u64, t: usize) -> ChaCha8Rng {
    rng::stream(rng::derive_seed(seed, rng::tags::FOREST), t as u64)
}

pub fn fit_forest(data: &BinaryDataset, labels: &[bool], settings: &ForestSettings) -> Result<Forest> {
    if labels.len() != data.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: data.n_rows(),
            found: labels.len(),
        });
    }
    if settings.n_trees == 0 {
        return Err(Error::invalid("a forest needs at least one tree"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let trees = (0..settings.n_trees)
        .into_par_iter()
        .map(|t| DecisionTree::fit_bootstrap(data, labels, settings, &mut tree_stream(settings.seed, t)))
        .collect();
    Ok(Forest { trees })
}

impl Forest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn predict_proba(&self, data: &BinaryDataset, row: usize) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_proba(data, row)).sum();
        s / self.trees.len() as f64
    }

    /// Positive when the mean leaf fraction exceeds one half.
    pub fn predict(&self, data: &BinaryDataset) -> Vec<bool> {
        (0..data.n_rows())
            .into_par_iter()
            .map(|r| self.predict_proba(data, r) > 0.5)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_data_is_learned() {
        let data = BinaryDataset::from_fn(BinaryDataset::default_names(5), 200, |i, j| {
            (i * 7 + j * 3) % 5 < 2 || (j == 0 && i % 2 == 0)
        })
        .unwrap();
        let labels: Vec<bool> = (0..200).map(|i| data.get(i, 0)).collect();
        let settings = ForestSettings {
            n_trees: 10,
            max_depth: Some(1),
            features_per_split: FeaturesPerSplit::All,
            ..ForestSettings::default()
        };
        let f = fit_forest(&data, &labels, &settings).unwrap();
        assert_eq!(f.predict(&data), labels);
    }

    #[test]
    fn single_class_rejected() {
        let data = BinaryDataset::from_fn(BinaryDataset::default_names(2), 4, |i, _| i % 2 == 0).unwrap();
        assert!(matches!(
            fit_forest(&data, &[true; 4], &ForestSettings::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn one_tree_forest_equals_its_tree() {
        let data = BinaryDataset::from_fn(BinaryDataset::default_names(6), 80, |i, j| (i * 31 + j * 17) % 7 < 3)
            .unwrap();
        let labels: Vec<bool> = (0..80).map(|i| (i * 13) % 5 < 2).collect();
        let settings = ForestSettings {
            n_trees: 1,
            seed: 42,
            ..ForestSettings::default()
        };
        let forest = fit_forest(&data, &labels, &settings).unwrap();
        let tree = DecisionTree::fit_bootstrap(&data, &labels, &settings, &mut tree_stream(42, 0));
        assert_eq!(forest.trees()[0], tree);
        for r in 0..80 {
            assert_eq!(forest.predict_proba(&data, r), tree.predict_proba(&data, r));
        }
    }

    #[test]
    fn depth_limit_respected() {
        let data = BinaryDataset::from_fn(BinaryDataset::default_names(8), 300, |i, j| (i >> (j % 8)) & 1 == 1)
            .unwrap();
        let labels: Vec<bool> = (0..300).map(|i| i % 3 == 0).collect();
        let settings = ForestSettings {
            n_trees: 5,
            max_depth: Some(3),
            ..ForestSettings::default()
        };
        let f = fit_forest(&data, &labels, &settings).unwrap();
        assert!(f.trees().iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn parses_features_per_split() {
        assert_eq!("sqrt".parse::<FeaturesPerSplit>().unwrap(), FeaturesPerSplit::Sqrt);
        assert_eq!("7".parse::<FeaturesPerSplit>().unwrap(), FeaturesPerSplit::Count(7));
        assert!("0".parse::<FeaturesPerSplit>().is_err());
        assert_eq!(FeaturesPerSplit::Sqrt.resolve(100), 10);
    }
}
