//! k-nearest neighbours under a Minkowski metric.
//!
//! Neighbours are ordered by `(distance, training index)`. The kd-tree and
//! ball-tree searches only prune subtrees whose lower bound is clearly
//! beyond the current k-th distance, so they return exactly the brute-force
//! neighbour set, ties included.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, ClassifierSpec};
use crate::dataset::Matrix;
use crate::flow::LabelClass;

pub(crate) fn minkowski(x: &[f64], y: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
    } else if p == 2.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    } else {
        x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Search {
    Brute,
    KdTree,
    BallTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexNode {
    start: usize,
    end: usize,
    /// Children, absent for leaves.
    children: Option<(usize, usize)>,
    /// Bounding box (kd) or centre (ball).
    lo: Vec<f64>,
    hi: Vec<f64>,
    radius: f64,
}

/// Spatial index over the training rows: a permutation plus a node array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialIndex {
    kind: Search,
    perm: Vec<usize>,
    nodes: Vec<IndexNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub x: Matrix,
    pub y: Vec<LabelClass>,
    pub k: usize,
    pub p: f64,
    pub distance_weighted: bool,
    pub tie_break: LabelClass,
    pub index: Option<SpatialIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Neighbor {
    dist: f64,
    idx: usize,
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist.total_cmp(&other.dist).then(self.idx.cmp(&other.idx))
    }
}

impl SpatialIndex {
    fn build(x: &Matrix, kind: Search, leaf_size: usize, p: f64) -> Self {
        let mut idx = SpatialIndex {
            kind,
            perm: (0..x.rows()).collect(),
            nodes: Vec::new(),
        };
        idx.grow(x, 0, x.rows(), leaf_size.max(1), p);
        idx
    }

    fn grow(&mut self, x: &Matrix, start: usize, end: usize, leaf_size: usize, p: f64) -> usize {
        let d = x.cols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.perm[start..end] {
            for (j, v) in x.row(i).iter().enumerate() {
                lo[j] = lo[j].min(*v);
                hi[j] = hi[j].max(*v);
            }
        }
        let mut radius = 0.0;
        if self.kind == Search::BallTree {
            let n = (end - start) as f64;
            let mut centre = vec![0.0; d];
            for &i in &self.perm[start..end] {
                for (c, v) in centre.iter_mut().zip(x.row(i)) {
                    *c += v / n;
                }
            }
            for &i in &self.perm[start..end] {
                radius = f64::max(radius, minkowski(&centre, x.row(i), p));
            }
            lo = centre;
            hi = Vec::new();
        }
        let id = self.nodes.len();
        let (spread_dim, spread) = (0..d)
            .map(|j| {
                let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
                for &i in &self.perm[start..end] {
                    a = a.min(x.get(i, j));
                    b = b.max(x.get(i, j));
                }
                (j, b - a)
            })
            .fold((0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        self.nodes.push(IndexNode {
            start,
            end,
            children: None,
            lo,
            hi,
            radius,
        });
        if end - start <= leaf_size || spread <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |a, b| {
            x.get(*a, spread_dim).total_cmp(&x.get(*b, spread_dim)).then(a.cmp(b))
        });
        let l = self.grow(x, start, mid, leaf_size, p);
        let r = self.grow(x, mid, end, leaf_size, p);
        self.nodes[id].children = Some((l, r));
        id
    }

    pub(crate) fn is_consistent(&self, n: usize, d: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in &self.perm {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return false;
            }
        }
        self.perm.len() == n
            && !self.nodes.is_empty()
            && self.nodes.iter().enumerate().all(|(id, nd)| {
                let dims = match self.kind {
                    Search::BallTree => nd.lo.len() == d && nd.hi.is_empty(),
                    _ => nd.lo.len() == d && nd.hi.len() == d,
                };
                dims && nd.start <= nd.end
                    && nd.end <= n
                    && nd.children.is_none_or(|(l, r)| l > id && r > id && l < self.nodes.len() && r < self.nodes.len())
            })
    }

    fn lower_bound(&self, node: &IndexNode, q: &[f64], p: f64) -> f64 {
        match self.kind {
            Search::BallTree => (minkowski(&node.lo, q, p) - node.radius).max(0.0),
            _ => {
                let gaps: Vec<f64> = q
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        if *v < node.lo[j] {
                            node.lo[j] - v
                        } else if *v > node.hi[j] {
                            v - node.hi[j]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                minkowski(&gaps, &vec![0.0; gaps.len()], p)
            }
        }
    }

    fn search(&self, x: &Matrix, q: &[f64], k: usize, p: f64) -> Vec<Neighbor> {
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if heap.len() == k {
                let worst = heap.peek().map_or(f64::INFINITY, |n| n.dist);
                if self.lower_bound(node, q, p) * (1.0 - 1e-9) > worst {
                    continue;
                }
            }
            match node.children {
                Some((l, r)) => {
                    let (bl, br) = (
                        self.lower_bound(&self.nodes[l], q, p),
                        self.lower_bound(&self.nodes[r], q, p),
                    );
                    // visit the closer child first
                    if bl <= br {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                None => {
                    for &i in &self.perm[node.start..node.end] {
                        let n = Neighbor {
                            dist: minkowski(x.row(i), q, p),
                            idx: i,
                        };
                        if heap.len() < k {
                            heap.push(n);
                        } else if n < *heap.peek().unwrap() {
                            heap.pop();
                            heap.push(n);
                        }
                    }
                }
            }
        }
        heap.into_sorted_vec()
    }
}

impl Knn {
    pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[LabelClass]) -> Result<Self, ClassifierError> {
        let k = (spec.int("n_neighbors").max(1) as usize).min(y.len());
        let p = spec.int("p").max(1) as f64;
        let search = match spec.text("algorithm").as_str() {
            "brute" => Search::Brute,
            "ball_tree" => Search::BallTree,
            _ => Search::KdTree,
        };
        let tie_break = spec.text("tie_break").parse().unwrap_or(LabelClass::Normal);
        let index = (search != Search::Brute).then(|| SpatialIndex::build(x, search, spec.int("leaf_size") as usize, p));
        Ok(Knn {
            x: x.clone(),
            y: y.to_vec(),
            k,
            p,
            distance_weighted: spec.text("weights") == "distance",
            tie_break,
            index,
        })
    }

    fn brute(&self, q: &[f64]) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = (0..self.x.rows())
            .map(|i| Neighbor {
                dist: minkowski(self.x.row(i), q, self.p),
                idx: i,
            })
            .collect();
        if self.k < all.len() {
            all.select_nth_unstable(self.k - 1);
            all.truncate(self.k);
        }
        all.sort();
        all
    }

    /// The k nearest training rows as `(index, distance)`, closest first.
    pub fn neighbors(&self, q: &[f64]) -> Vec<(usize, f64)> {
        let n = match &self.index {
            Some(ix) => ix.search(&self.x, q, self.k, self.p),
            None => self.brute(q),
        };
        n.into_iter().map(|n| (n.idx, n.dist)).collect()
    }

    /// Brute-force neighbours regardless of the configured search.
    pub fn neighbors_brute(&self, q: &[f64]) -> Vec<(usize, f64)> {
        self.brute(q).into_iter().map(|n| (n.idx, n.dist)).collect()
    }

    pub fn vote(&self, neighbors: &[(usize, f64)]) -> LabelClass {
        let mut score = [0.0; 2];
        let exact: Vec<&(usize, f64)> = neighbors.iter().filter(|n| n.1 == 0.0).collect();
        if self.distance_weighted && !exact.is_empty() {
            for (i, _) in exact {
                score[self.y[*i].index()] += 1.0;
            }
        } else {
            for (i, d) in neighbors {
                score[self.y[*i].index()] += if self.distance_weighted { 1.0 / d } else { 1.0 };
            }
        }
        if score[0] > score[1] {
            LabelClass::Normal
        } else if score[1] > score[0] {
            LabelClass::Botnet
        } else {
            self.tie_break
        }
    }

    pub fn predict(&self, q: &[f64]) -> LabelClass {
        self.vote(&self.neighbors(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, ClassifierKind, ModelParams, ParamValue};
    use crate::dataset::LabeledDataset;
    use crate::rng;
    use rand::Rng;

    fn random_ds(n: usize, d: usize, seed: u64, grid: bool) -> LabeledDataset {
        let mut r = rng::stream(seed, 3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| if grid { r.gen_range(0..4) as f64 } else { r.gen_range(-10.0..10.0) })
                    .collect()
            })
            .collect();
        let y = (0..n).map(|_| LabelClass::from_index(r.gen_range(0..2))).collect();
        LabeledDataset::from_rows(&rows, y, "rand").unwrap()
    }

    fn knn_of(ds: &LabeledDataset, alg: &str, k: i64, p: i64, leaf: i64) -> Knn {
        let spec = ClassifierSpec::default_for(ClassifierKind::KNN)
            .with("algorithm", ParamValue::str(alg))
            .unwrap()
            .with("n_neighbors", ParamValue::Int(k))
            .unwrap()
            .with("p", ParamValue::Int(p))
            .unwrap()
            .with("leaf_size", ParamValue::Int(leaf))
            .unwrap();
        let ModelParams::KNN(m) = fit(&spec, ds, 0).unwrap().params else { unreachable!() };
        m
    }

    #[test]
    fn trees_match_brute_force_even_with_ties() {
        for (seed, grid) in [(1, false), (2, true), (3, true)] {
            let ds = random_ds(300, 3, seed, grid);
            let queries = random_ds(50, 3, seed + 100, grid);
            for alg in ["kd_tree", "ball_tree"] {
                for p in [1, 2, 3] {
                    let m = knn_of(&ds, alg, 7, p, 5);
                    for q in queries.x.iter_rows() {
                        assert_eq!(m.neighbors(q), m.neighbors_brute(q), "{alg} p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn one_nn_returns_own_label() {
        let ds = random_ds(100, 2, 4, false);
        let m = knn_of(&ds, "auto", 1, 2, 30);
        for i in 0..ds.len() {
            assert_eq!(m.predict(ds.x.row(i)), ds.y[i]);
        }
    }

    #[test]
    fn ties_follow_tie_break() {
        let ds = LabeledDataset::from_rows(&[vec![0.0], vec![2.0]], vec![LabelClass::Normal, LabelClass::Botnet], "t")
            .unwrap();
        let m = knn_of(&ds, "brute", 2, 2, 30);
        assert_eq!(m.predict(&[1.0]), LabelClass::Normal);
        let m = Knn {
            tie_break: LabelClass::Botnet,
            ..m
        };
        assert_eq!(m.predict(&[1.0]), LabelClass::Botnet);
    }

    #[test]
    fn distance_weights_prefer_exact_matches() {
        let ds = LabeledDataset::from_rows(
            &[vec![0.0], vec![0.1], vec![0.2]],
            vec![LabelClass::Botnet, LabelClass::Normal, LabelClass::Normal],
            "t",
        )
        .unwrap();
        let spec = ClassifierSpec::default_for(ClassifierKind::KNN)
            .with("n_neighbors", ParamValue::Int(3))
            .unwrap()
            .with("weights", ParamValue::str("distance"))
            .unwrap();
        let m = fit(&spec, &ds, 0).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), LabelClass::Botnet);
        assert_eq!(m.predict(&[0.09]).unwrap(), LabelClass::Normal);
    }
}
