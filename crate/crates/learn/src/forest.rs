//! Random forest of Gini-grown classification trees on bootstrap samples.
//!
//! Each tree draws from its own ChaCha stream (the forest seed with the tree
//! index as stream id), so trees can be grown in parallel and the forest is
//! identical regardless of scheduling. Split search scans candidate features
//! in increasing index order and thresholds in increasing order, keeping the
//! first strictly best split.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, check_xy, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` uses round(sqrt(n_features)).
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 100, max_depth: None, min_leaf: 1, max_features: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Bootstrap sample counts per class reaching this leaf.
    Leaf { counts: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_counts(&self, row: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Class frequencies of the leaf reached by `row`.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let counts = self.leaf_counts(row);
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    mtry: usize,
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best (feature, threshold, gini decrease) among the candidate features.
    fn best_split(&self, idx: &[usize], features: &[usize], parent: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let parent_impurity = gini(parent, n);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0usize; self.n_classes];
            let mut right = parent.to_vec();
            for k in 0..n - 1 {
                let c = self.y[order[k]];
                left[c] += 1;
                right[c] -= 1;
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let weighted = (n_left as f64 * gini(&left, n_left) + (n - n_left) as f64 * gini(&right, n - n_left))
                    / n as f64;
                let gain = parent_impurity - weighted;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || idx.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let nf = self.x[0].len();
        let mut features = sample(rng, nf, self.mtry).into_vec();
        features.sort_unstable();
        let Some((feature, threshold)) = self.best_split(&idx, &features, &counts) else {
            return id;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(li, depth + 1, rng);
        let right = self.grow(ri, depth + 1, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

fn grow_tree(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &ForestParams, mtry: usize, seed: u64, t: usize) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let n = x.len();
    let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut g = Grower { x, y, n_classes, mtry, params, nodes: Vec::new() };
    g.grow(boot, 0, &mut rng);
    Tree { nodes: g.nodes }
}

/// Train a forest on rows `x` with labels `y` in `0..n_classes`.
pub fn train_random_forest(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForestModel> {
    let nf = check_xy(x, y, n_classes)?;
    if params.trees == 0 {
        return Err(crate::Error::InvalidArgument("forest needs at least one tree".into()));
    }
    let mtry = params
        .max_features
        .unwrap_or_else(|| (nf as f64).sqrt().round() as usize)
        .clamp(1, nf);
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| grow_tree(x, y, n_classes, params, mtry, seed, t))
        .collect();
    Ok(RandomForestModel { params: params.clone(), seed, n_features: nf, n_classes, trees })
}

impl RandomForestModel {
    /// Mean over trees of the leaf class frequencies.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_width(x, self.n_features, "random forest")?;
        let k = self.trees.len() as f64;
        Ok(x.iter()
            .map(|row| {
                let mut p = vec![0.0; self.n_classes];
                for tree in &self.trees {
                    for (acc, v) in p.iter_mut().zip(tree.predict_proba(row)) {
                        *acc += v;
                    }
                }
                p.iter_mut().for_each(|v| *v /= k);
                p
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let c = i % 2;
            let centre = if c == 0 { -3.0 } else { 3.0 };
            x.push(vec![centre + rng.gen_range(-1.0..1.0), centre + rng.gen_range(-1.0..1.0)]);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separates_blobs() {
        let (x, y) = blobs();
        let m = train_random_forest(&x, &y, 2, &ForestParams { trees: 15, ..Default::default() }, 3).unwrap();
        let p = m.predict_proba(&x).unwrap();
        for (row, &c) in p.iter().zip(&y) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(cmr_core::volmodel::argmax(row), c);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_random_forest(&x, &[1, 1], 2, &ForestParams::default(), 0),
            Err(crate::Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn leaves_sum_to_bootstrap_size() {
        let (x, y) = blobs();
        let m = train_random_forest(&x, &y, 2, &ForestParams { trees: 5, ..Default::default() }, 9).unwrap();
        for tree in &m.trees {
            let total: usize = tree
                .nodes
                .iter()
                .filter_map(|n| match n {
                    Node::Leaf { counts } => Some(counts.iter().sum::<usize>()),
                    _ => None,
                })
                .sum();
            // Leaves partition the bootstrap sample, which has one draw per row.
            assert_eq!(total, x.len());
        }
    }

    #[test]
    fn one_tree_forest_is_that_tree() {
        let (x, y) = blobs();
        let m = train_random_forest(&x, &y, 2, &ForestParams { trees: 1, ..Default::default() }, 4).unwrap();
        let p = m.predict_proba(&x).unwrap();
        for (row, probs) in x.iter().zip(&p) {
            assert_eq!(&m.trees[0].predict_proba(row), probs);
        }
    }

    #[test]
    fn wrong_width_is_schema_error() {
        let (x, y) = blobs();
        let m = train_random_forest(&x, &y, 2, &ForestParams { trees: 2, ..Default::default() }, 4).unwrap();
        assert!(matches!(m.predict_proba(&[vec![0.0]]), Err(crate::Error::Schema(_))));
    }
}
