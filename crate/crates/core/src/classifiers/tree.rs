//! CART decision tree over weighted samples.
//!
//! Splits send `x[feature] <= threshold` left. Among equal-gain candidates
//! the lowest feature index wins, then the lowest threshold, regardless of
//! the order in which features were visited.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{impurity_of, ClassifierError, ClassifierSpec, Criterion};
use crate::dataset::Matrix;
use crate::flow::LabelClass;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub random_splitter: bool,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_weight_fraction_leaf: f64,
    pub max_depth: Option<usize>,
    /// Features examined per split.
    pub max_features: usize,
    pub balanced: bool,
}

impl TreeParams {
    pub fn from_spec(spec: &ClassifierSpec, n_features: usize) -> Result<Self, ClassifierError> {
        let max_features = match spec.text("max_features").as_str() {
            "sqrt" => (n_features as f64).sqrt().floor() as usize,
            "log2" => (n_features as f64).log2().floor() as usize,
            _ => n_features,
        }
        .clamp(1, n_features.max(1));
        Ok(TreeParams {
            criterion: spec.text("criterion").parse()?,
            random_splitter: spec.text("splitter") == "random",
            min_samples_split: spec.int("min_samples_split").max(2) as usize,
            min_samples_leaf: spec.int("min_samples_leaf").max(1) as usize,
            min_weight_fraction_leaf: spec.float("min_weight_fraction_leaf"),
            max_depth: spec.opt_int("max_depth").map(|d| d as usize),
            max_features,
            balanced: spec.text("class_weight") == "balanced",
        })
    }

    /// Gini tree of bounded depth over all features, as used for boosting.
    pub fn shallow(depth: usize, n_features: usize) -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            random_splitter: false,
            min_samples_split: 2,
            min_samples_leaf: 1,
            min_weight_fraction_leaf: 0.0,
            max_depth: Some(depth),
            max_features: n_features,
            balanced: false,
        }
    }
}

/// Per-sample weights: 1, or `n / (2 * class_count)` when balanced.
pub fn class_weights(y: &[LabelClass], balanced: bool) -> Vec<f64> {
    if !balanced {
        return vec![1.0; y.len()];
    }
    let mut counts = [0usize; 2];
    for c in y {
        counts[c.index()] += 1;
    }
    let n = y.len() as f64;
    y.iter().map(|c| n / (2.0 * counts[c.index()] as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Weighted class totals `[normal, botnet]`.
        value: [f64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Unnormalized weighted impurity decrease per feature.
    pub raw_importance: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>, tol: f64) -> bool {
        match other {
            None => true,
            Some(b) => {
                self.gain > b.gain + tol
                    || (self.gain >= b.gain - tol && (self.feature, self.threshold) < (b.feature, b.threshold))
            }
        }
    }
}

struct Builder<'a, R> {
    x: &'a Matrix,
    y: &'a [LabelClass],
    w: &'a [f64],
    p: &'a TreeParams,
    rng: &'a mut R,
    min_leaf_weight: f64,
}

fn weighted_counts(idx: &[usize], y: &[LabelClass], w: &[f64]) -> [f64; 2] {
    let mut c = [0.0; 2];
    for &i in idx {
        c[y[i].index()] += w[i];
    }
    c
}

impl<R: Rng> Builder<'_, R> {
    fn find_split(&mut self, idx: &[usize], counts: [f64; 2]) -> Option<Candidate> {
        let d = self.x.cols();
        let total = counts[0] + counts[1];
        let parent = total * impurity_of(&counts, total, self.p.criterion);
        let tol = 1e-12 * total.max(1.0);
        let mut order: Vec<usize> = (0..d).collect();
        if self.p.max_features < d {
            order.shuffle(self.rng);
        }
        let mut best: Option<Candidate> = None;
        let mut visited = 0;
        for &f in &order {
            if visited >= self.p.max_features {
                break;
            }
            let found = if self.p.random_splitter {
                self.random_split(idx, f, parent, tol)
            } else {
                self.best_split(idx, f, parent, tol)
            };
            let Some(found) = found else { continue };
            visited += 1;
            if let Some(c) = found {
                if c.beats(&best, tol) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn admissible(&self, nl: usize, nr: usize, wl: f64, wr: f64) -> bool {
        nl >= self.p.min_samples_leaf
            && nr >= self.p.min_samples_leaf
            && wl >= self.min_leaf_weight
            && wr >= self.min_leaf_weight
            && wl > 0.0
            && wr > 0.0
    }

    fn gain(&self, parent: f64, left: [f64; 2], right: [f64; 2]) -> f64 {
        let wl = left[0] + left[1];
        let wr = right[0] + right[1];
        parent - wl * impurity_of(&left, wl, self.p.criterion) - wr * impurity_of(&right, wr, self.p.criterion)
    }

    /// `None` for a constant feature; `Some(None)` when no split is admissible.
    fn best_split(&mut self, idx: &[usize], f: usize, parent: f64, tol: f64) -> Option<Option<Candidate>> {
        let mut vals: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x.get(i, f), i)).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if vals[0].0 == vals[vals.len() - 1].0 {
            return None;
        }
        let all = weighted_counts(idx, self.y, self.w);
        let mut left = [0.0; 2];
        let mut best: Option<Candidate> = None;
        for pos in 0..vals.len() - 1 {
            let i = vals[pos].1;
            left[self.y[i].index()] += self.w[i];
            let (a, b) = (vals[pos].0, vals[pos + 1].0);
            if a == b {
                continue;
            }
            let right = [all[0] - left[0], all[1] - left[1]];
            let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
            if !self.admissible(pos + 1, vals.len() - pos - 1, wl, wr) {
                continue;
            }
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            let c = Candidate {
                feature: f,
                threshold,
                gain: self.gain(parent, left, right),
            };
            if c.beats(&best, tol) {
                best = Some(c);
            }
        }
        Some(best)
    }

    fn random_split(&mut self, idx: &[usize], f: usize, parent: f64, _tol: f64) -> Option<Option<Candidate>> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx {
            let v = self.x.get(i, f);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == hi {
            return None;
        }
        let threshold = self.rng.gen_range(lo..hi);
        let (mut left, mut right) = ([0.0; 2], [0.0; 2]);
        let mut nl = 0;
        for &i in idx {
            if self.x.get(i, f) <= threshold {
                left[self.y[i].index()] += self.w[i];
                nl += 1;
            } else {
                right[self.y[i].index()] += self.w[i];
            }
        }
        let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
        if !self.admissible(nl, idx.len() - nl, wl, wr) {
            return Some(None);
        }
        Some(Some(Candidate {
            feature: f,
            threshold,
            gain: self.gain(parent, left, right),
        }))
    }
}

impl Tree {
    /// Grows a tree on rows with positive weight.
    pub fn fit<R: Rng>(x: &Matrix, y: &[LabelClass], w: &[f64], p: &TreeParams, rng: &mut R) -> Tree {
        let mut idx: Vec<usize> = (0..x.rows()).filter(|&i| w[i] > 0.0).collect();
        let total_w: f64 = idx.iter().map(|&i| w[i]).sum();
        let mut b = Builder {
            x,
            y,
            w,
            p,
            rng,
            min_leaf_weight: p.min_weight_fraction_leaf * total_w,
        };
        let mut nodes: Vec<Node> = Vec::new();
        let mut raw_importance = vec![0.0; x.cols()];
        // (start, end, depth, parent link)
        let mut stack: Vec<(usize, usize, usize, Option<(usize, bool)>)> = vec![(0, idx.len(), 0, None)];
        while let Some((start, end, depth, parent)) = stack.pop() {
            let id = nodes.len();
            if let Some((pid, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut nodes[pid] {
                    if is_left {
                        *left = id;
                    } else {
                        *right = id;
                    }
                }
            }
            let slice = &idx[start..end];
            let counts = weighted_counts(slice, y, w);
            let n = end - start;
            let wn = counts[0] + counts[1];
            let stop = p.max_depth.is_some_and(|d| depth >= d)
                || n < p.min_samples_split
                || n < 2 * p.min_samples_leaf
                || wn < 2.0 * b.min_leaf_weight
                || counts[0] == 0.0
                || counts[1] == 0.0;
            let split = if stop { None } else { b.find_split(slice, counts) };
            let Some(c) = split else {
                nodes.push(Node::Leaf { value: counts });
                continue;
            };
            raw_importance[c.feature] += c.gain.max(0.0);
            let slice = &mut idx[start..end];
            let mut mid = 0;
            for k in 0..slice.len() {
                if x.get(slice[k], c.feature) <= c.threshold {
                    slice.swap(k, mid);
                    mid += 1;
                }
            }
            nodes.push(Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: usize::MAX,
                right: usize::MAX,
            });
            stack.push((start + mid, end, depth + 1, Some((id, false))));
            stack.push((start, start + mid, depth + 1, Some((id, true))));
        }
        Tree { nodes, raw_importance }
    }

    pub fn leaf_value(&self, x: &[f64]) -> [f64; 2] {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Leaf majority; an exact tie goes to Normal.
    pub fn predict(&self, x: &[f64]) -> LabelClass {
        let v = self.leaf_value(x);
        if v[1] > v[0] {
            LabelClass::Botnet
        } else {
            LabelClass::Normal
        }
    }

    pub fn proba(&self, x: &[f64]) -> [f64; 2] {
        let v = self.leaf_value(x);
        let t = v[0] + v[1];
        [v[0] / t, v[1] / t]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, k: usize) -> usize {
            match &t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    /// Importances normalized to sum to 1; `None` if the tree never split.
    pub fn importances(&self) -> Option<Vec<f64>> {
        normalize(&self.raw_importance)
    }
}

pub(crate) fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        Some(v.iter().map(|x| x / total).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn data(rows: &[(f64, f64, u8)]) -> (Matrix, Vec<LabelClass>) {
        let m = Matrix::from_rows(&rows.iter().map(|r| vec![r.0, r.1]).collect::<Vec<_>>()).unwrap();
        let y = rows.iter().map(|r| LabelClass::from_index(r.2 as usize)).collect();
        (m, y)
    }

    fn full() -> TreeParams {
        TreeParams {
            max_depth: None,
            ..TreeParams::shallow(0, 2)
        }
    }

    #[test]
    fn memorizes_xor() {
        let (x, y) = data(&[(0.0, 0.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0)]);
        let t = Tree::fit(&x, &y, &[1.0; 4], &full(), &mut rng::stream(0, 0));
        for i in 0..4 {
            assert_eq!(t.predict(x.row(i)), y[i]);
        }
    }

    #[test]
    fn midpoint_threshold_and_tie_break() {
        // both features separate perfectly; feature 0 must win
        let (x, y) = data(&[(1.0, 10.0, 0), (2.0, 20.0, 0), (3.0, 30.0, 1), (4.0, 40.0, 1)]);
        let t = Tree::fit(&x, &y, &[1.0; 4], &full(), &mut rng::stream(0, 0));
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((*feature, *threshold), (0, 2.5)),
            n => panic!("{n:?}"),
        }
        assert_eq!(t.importances().unwrap(), vec![1.0, 0.0]);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let (x, y) = data(&[(1.0, 0.0, 0), (2.0, 0.0, 1), (3.0, 0.0, 1), (4.0, 0.0, 1)]);
        let p = TreeParams {
            min_samples_leaf: 2,
            ..full()
        };
        let t = Tree::fit(&x, &y, &[1.0; 4], &p, &mut rng::stream(0, 0));
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn balanced_weights() {
        use LabelClass::*;
        let w = class_weights(&[Normal, Normal, Normal, Botnet], true);
        assert_eq!(w, vec![4.0 / 6.0, 4.0 / 6.0, 4.0 / 6.0, 2.0]);
    }

    #[test]
    fn random_splitter_is_seeded() {
        let rows: Vec<(f64, f64, u8)> = (0..40).map(|i| (i as f64, (i * 7 % 13) as f64, (i % 3 == 0) as u8)).collect();
        let (x, y) = data(&rows);
        let p = TreeParams {
            random_splitter: true,
            ..full()
        };
        let a = Tree::fit(&x, &y, &[1.0; 40], &p, &mut rng::stream(9, 0));
        let b = Tree::fit(&x, &y, &[1.0; 40], &p, &mut rng::stream(9, 0));
        assert_eq!(a, b);
        for i in 0..40 {
            assert_eq!(a.predict(x.row(i)), y[i]);
        }
    }
}
