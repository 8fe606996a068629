//! Exhaustive grid search and uniform random search baselines.

use serde::{Deserialize, Serialize};

use super::{gene_pool, Chromosome, Evaluator, GaConfig, GenePool, OptimizeError};
use crate::classifiers::{ClassifierKind, ParamValue};
use crate::dataset::LabeledDataset;
use crate::rng;

pub const DEFAULT_GRID_CAP: u128 = 10_000;
const RANDOM_STREAM: u64 = 0x5e;

/// Ordered gene name to candidate values. Genes left out keep defaults.
pub type Grid = Vec<(String, Vec<ParamValue>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Chromosome,
    pub best_fitness: f64,
    /// Every evaluated chromosome with its fitness, in evaluation order.
    pub table: Vec<(Chromosome, f64)>,
}

impl SearchResult {
    fn from_table(table: Vec<(Chromosome, f64)>) -> Self {
        let (best, best_fitness) = table
            .iter()
            .fold(None::<&(Chromosome, f64)>, |acc, e| match acc {
                Some(b) if b.1 >= e.1 => Some(b),
                _ => Some(e),
            })
            .cloned()
            .expect("non-empty table");
        SearchResult {
            best,
            best_fitness,
            table,
        }
    }

    pub fn rows(&self) -> String {
        let mut s = String::from("index\tfitness\tgenes\n");
        for (i, (c, f)) in self.table.iter().enumerate() {
            s.push_str(&format!("{i}\t{f:.6}\t{c}\n"));
        }
        s
    }
}

pub fn grid_size(grid: &Grid) -> u128 {
    grid.iter().fold(1u128, |acc, (_, v)| acc.saturating_mul(v.len() as u128))
}

fn floats(n: usize, step: f64) -> Vec<ParamValue> {
    (0..n).map(|i| ParamValue::Float(i as f64 * step)).collect()
}

fn strs(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|s| ParamValue::str(s)).collect()
}

fn ints(v: impl IntoIterator<Item = i64>) -> Vec<ParamValue> {
    v.into_iter().map(ParamValue::Int).collect()
}

/// The reference grids for the tree learners (1408 and 3456 combinations).
pub fn paper_grid(kind: ClassifierKind) -> Option<Grid> {
    let common = |mwfl: Vec<ParamValue>| -> Grid {
        vec![
            ("min_samples_split".into(), ints(2..=5)),
            ("min_samples_leaf".into(), ints(1..=4)),
            ("min_weight_fraction_leaf".into(), mwfl),
            ("class_weight".into(), vec![ParamValue::str("balanced"), ParamValue::None]),
        ]
    };
    match kind {
        ClassifierKind::DecisionTree => {
            let mut g: Grid = vec![
                ("criterion".into(), strs(&["gini", "entropy"])),
                ("splitter".into(), strs(&["best", "random"])),
            ];
            g.extend(common(floats(11, 0.01)));
            Some(g)
        }
        ClassifierKind::RandomForest => {
            let mut g: Grid = vec![
                ("n_estimators".into(), ints((0..6).map(|i| 10 + 38 * i))),
                ("criterion".into(), strs(&["gini", "entropy"])),
            ];
            g.extend(common(floats(9, 0.0125)));
            Some(g)
        }
        _ => None,
    }
}

/// Lazily enumerates the Cartesian product, last gene varying fastest.
pub fn enumerate_grid(pool: &GenePool, grid: &Grid) -> Result<impl Iterator<Item = Chromosome>, OptimizeError> {
    let mut slots = Vec::with_capacity(grid.len());
    for (name, values) in grid {
        let i = pool.position(name).ok_or_else(|| OptimizeError::UnknownGene {
            kind: pool.kind,
            gene: name.clone(),
        })?;
        if values.is_empty() {
            return Err(OptimizeError::InvalidConfig(format!("grid entry {name} is empty")));
        }
        if let Some(v) = values.iter().find(|v| !pool.genes[i].contains(v)) {
            return Err(OptimizeError::GridOutOfDomain {
                gene: name.clone(),
                value: v.to_string(),
            });
        }
        slots.push((i, values.clone()));
    }
    let base = pool.default_chromosome();
    let total = grid_size(grid);
    Ok((0..total).map(move |mut n| {
        let mut c = base.clone();
        for (i, values) in slots.iter().rev() {
            let len = values.len() as u128;
            c.genes[*i] = values[(n % len) as usize].clone();
            n /= len;
        }
        c
    }))
}

pub fn grid_search_with<F>(pool: &GenePool, grid: &Grid, cap: u128, mut evaluate: F) -> Result<SearchResult, OptimizeError>
where
    F: FnMut(&[Chromosome]) -> Vec<f64>,
{
    let size = grid_size(grid);
    if size > cap {
        return Err(OptimizeError::GridTooLarge { size, cap });
    }
    let all: Vec<Chromosome> = enumerate_grid(pool, grid)?.collect();
    let scores = evaluate(&all);
    Ok(SearchResult::from_table(all.into_iter().zip(scores).collect()))
}

pub fn grid_search(
    kind: ClassifierKind,
    grid: &Grid,
    ds: &LabeledDataset,
    cfg: &GaConfig,
    cap: u128,
) -> Result<SearchResult, OptimizeError> {
    let pool = gene_pool(kind);
    let size = grid_size(grid);
    if size > cap {
        return Err(OptimizeError::GridTooLarge { size, cap });
    }
    let _ = enumerate_grid(&pool, grid)?;
    let mut ev = Evaluator::new(pool.clone(), ds, cfg)?;
    grid_search_with(&pool, grid, cap, |cs| ev.batch(cs))
}

/// Sample 0 is the default chromosome, the rest uniform draws.
pub fn random_search_with<F>(pool: &GenePool, n_iter: usize, seed: u64, mut evaluate: F) -> Result<SearchResult, OptimizeError>
where
    F: FnMut(&[Chromosome]) -> Vec<f64>,
{
    if n_iter == 0 {
        return Err(OptimizeError::InvalidConfig("n_iter must be at least 1".into()));
    }
    let mut r = rng::stream(seed, RANDOM_STREAM);
    let mut all = vec![pool.default_chromosome()];
    while all.len() < n_iter {
        all.push(pool.sample(&mut r));
    }
    let scores = evaluate(&all);
    Ok(SearchResult::from_table(all.into_iter().zip(scores).collect()))
}

pub fn random_search(kind: ClassifierKind, n_iter: usize, ds: &LabeledDataset, cfg: &GaConfig) -> Result<SearchResult, OptimizeError> {
    let pool = gene_pool(kind);
    let mut ev = Evaluator::new(pool.clone(), ds, cfg)?;
    random_search_with(&pool, n_iter, cfg.seed, |cs| ev.batch(cs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_counts() {
        let pool = gene_pool(ClassifierKind::KNN);
        let grid: Grid = vec![
            ("n_neighbors".into(), ints([1, 2])),
            ("algorithm".into(), strs(&["brute", "kd_tree", "ball_tree"])),
        ];
        let all: Vec<_> = enumerate_grid(&pool, &grid).unwrap().collect();
        assert_eq!(all.len(), 6);
        let mut seen: Vec<String> = all.iter().map(|c| c.to_string()).collect();
        seen.dedup();
        assert_eq!(seen.len(), 6);
        let mut calls = 0;
        let res = grid_search_with(&pool, &grid, 100, |cs| {
            calls += cs.len();
            cs.iter().map(|c| c.genes[0].as_f64().unwrap()).collect()
        })
        .unwrap();
        assert_eq!(calls, 6);
        assert_eq!(res.best_fitness, 2.0);
    }

    #[test]
    fn reference_grid_sizes() {
        let dt = paper_grid(ClassifierKind::DecisionTree).unwrap();
        assert_eq!(grid_size(&dt), 1408);
        assert_eq!(enumerate_grid(&gene_pool(ClassifierKind::DecisionTree), &dt).unwrap().count(), 1408);
        let rf = paper_grid(ClassifierKind::RandomForest).unwrap();
        assert_eq!(grid_size(&rf), 3456);
        assert_eq!(
            grid_search_with(&gene_pool(ClassifierKind::RandomForest), &rf, 2000, |_| unreachable!()).unwrap_err(),
            OptimizeError::GridTooLarge { size: 3456, cap: 2000 }
        );
    }

    #[test]
    fn out_of_domain_grid_rejected() {
        let grid: Grid = vec![("n_neighbors".into(), ints([0]))];
        assert!(matches!(
            enumerate_grid(&gene_pool(ClassifierKind::KNN), &grid),
            Err(OptimizeError::GridOutOfDomain { .. })
        ));
    }

    #[test]
    fn random_search_starts_with_default() {
        let pool = gene_pool(ClassifierKind::RandomForest);
        let res = random_search_with(&pool, 1, 0, |cs| vec![0.5; cs.len()]).unwrap();
        assert_eq!(res.table.len(), 1);
        assert_eq!(res.table[0].0, pool.default_chromosome());
        let res = random_search_with(&pool, 50, 0, |cs| vec![0.5; cs.len()]).unwrap();
        assert!(res.table.iter().all(|(c, _)| pool.contains(c)));
    }
}
