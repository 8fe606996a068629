//! Hyperparameter search: a genetic algorithm plus grid and random search.
//!
//! Gene pools come from the classifier schemas (their evolvable entries, in
//! order) and may be narrowed or widened by a TOML override document:
//!
//! ```toml
//! [RandomForest.n_estimators]
//! low = 10
//! high = 300
//!
//! [KNN.weights]
//! values = ["uniform", "distance"]
//! ```

pub mod ga;
pub mod search;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{schema, ClassifierKind, ClassifierSpec, Domain, ParamValue};
use crate::dataset::{stratified_kfold, DatasetError, FoldPlan, LabeledDataset};
use crate::metrics::{cross_validate_with_plan, MetricsError};

pub use ga::{crossover, init_population, mutate, refill, run_ga, run_ga_with, GaResult, GenerationRecord};
pub use search::{
    enumerate_grid, grid_search, grid_search_with, grid_size, paper_grid, random_search, random_search_with, Grid,
    SearchResult, DEFAULT_GRID_CAP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("chromosomes of different kinds: {0} and {1}")]
    KindMismatch(ClassifierKind, ClassifierKind),
    #[error("chromosome has {found} genes, pool has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("grid has {size} combinations, above the cap of {cap}")]
    GridTooLarge { size: u128, cap: u128 },
    #[error("grid value {value} is outside the domain of gene {gene}")]
    GridOutOfDomain { gene: String, value: String },
    #[error("{kind} has no gene named {gene:?}")]
    UnknownGene { kind: ClassifierKind, gene: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pool override for {gene} excludes its default value")]
    DefaultOutsidePool { gene: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneSpec {
    pub name: String,
    pub domain: Domain,
    /// `None` is a legal value in addition to the domain.
    pub nullable: bool,
}

impl GeneSpec {
    pub fn contains(&self, v: &ParamValue) -> bool {
        (self.nullable && v.is_none()) || self.domain.contains(v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        let spec = crate::classifiers::ParamSpec {
            name: "",
            search: self.domain.clone(),
            bounds: self.domain.clone(),
            default: ParamValue::None,
            nullable: self.nullable,
            evolvable: true,
        };
        spec.sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenePool {
    pub kind: ClassifierKind,
    pub genes: Vec<GeneSpec>,
    pub default: Vec<ParamValue>,
}

/// Built-in pool for `kind`: its evolvable hyperparameters in schema order.
pub fn gene_pool(kind: ClassifierKind) -> GenePool {
    let (genes, default) = schema(kind)
        .into_iter()
        .filter(|p| p.evolvable)
        .map(|p| {
            (
                GeneSpec {
                    name: p.name.to_string(),
                    domain: p.search,
                    nullable: p.nullable,
                },
                p.default,
            )
        })
        .unzip();
    GenePool { kind, genes, default }
}

impl GenePool {
    /// A pool with caller-defined genes, e.g. for closed-form test fitness.
    pub fn custom(kind: ClassifierKind, genes: Vec<GeneSpec>, default: Vec<ParamValue>) -> Self {
        GenePool { kind, genes, default }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn default_chromosome(&self) -> Chromosome {
        Chromosome {
            kind: self.kind,
            genes: self.default.clone(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Chromosome {
        Chromosome {
            kind: self.kind,
            genes: self.genes.iter().map(|g| g.sample(rng)).collect(),
        }
    }

    pub fn contains(&self, c: &Chromosome) -> bool {
        c.kind == self.kind && c.genes.len() == self.genes.len() && self.genes.iter().zip(&c.genes).all(|(g, v)| g.contains(v))
    }

    pub fn position(&self, gene: &str) -> Option<usize> {
        self.genes.iter().position(|g| g.name == gene)
    }

    /// Replaces gene domains; each new domain must fit the schema bounds
    /// and keep the default value.
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, GeneOverride>) -> Result<(), OptimizeError> {
        let schema = schema(self.kind);
        for (name, ov) in overrides {
            let i = self.position(name).ok_or_else(|| OptimizeError::UnknownGene {
                kind: self.kind,
                gene: name.clone(),
            })?;
            let bounds = &schema.iter().find(|p| p.name == name).expect("pool genes come from the schema").bounds;
            let domain = ov.domain(&self.genes[i].domain)?;
            let fits = match &domain {
                Domain::Categorical(v) => !v.is_empty() && v.iter().all(|x| bounds.contains(x)),
                Domain::Int { lo, hi } => lo <= hi && bounds.contains(&ParamValue::Int(*lo)) && bounds.contains(&ParamValue::Int(*hi)),
                Domain::Float { lo, hi } => {
                    lo <= hi && bounds.contains(&ParamValue::Float(*lo)) && bounds.contains(&ParamValue::Float(*hi))
                }
            };
            if !fits {
                return Err(OptimizeError::InvalidConfig(format!("override for {name} is outside its legal range")));
            }
            self.genes[i].domain = domain;
            if !self.genes[i].contains(&self.default[i]) {
                return Err(OptimizeError::DefaultOutsidePool { gene: name.clone() });
            }
        }
        Ok(())
    }
}

/// One gene's replacement domain: either `values` or `low`/`high`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneOverride {
    pub values: Option<Vec<ParamValue>>,
    pub low: Option<f64>,
    pub high: Option<f64>,
}

impl GeneOverride {
    fn domain(&self, current: &Domain) -> Result<Domain, OptimizeError> {
        if let Some(v) = &self.values {
            let v = v
                .iter()
                .map(|x| match x {
                    ParamValue::Str(s) if s == "None" => ParamValue::None,
                    other => other.clone(),
                })
                .collect();
            return Ok(Domain::Categorical(v));
        }
        match current {
            Domain::Int { lo, hi } => {
                let conv = |x: Option<f64>, d: i64| -> Result<i64, OptimizeError> {
                    match x {
                        None => Ok(d),
                        Some(f) if f.fract() == 0.0 => Ok(f as i64),
                        Some(f) => Err(OptimizeError::InvalidConfig(format!("{f} is not an integer"))),
                    }
                };
                Ok(Domain::Int {
                    lo: conv(self.low, *lo)?,
                    hi: conv(self.high, *hi)?,
                })
            }
            Domain::Float { lo, hi } => Ok(Domain::Float {
                lo: self.low.unwrap_or(*lo),
                hi: self.high.unwrap_or(*hi),
            }),
            Domain::Categorical(_) => Err(OptimizeError::InvalidConfig(
                "categorical genes take a `values` list".into(),
            )),
        }
    }
}

pub type PoolOverrides = BTreeMap<String, BTreeMap<String, GeneOverride>>;

/// Parses a TOML override document keyed by classifier kind, then gene.
pub fn parse_pool_overrides(text: &str) -> Result<BTreeMap<ClassifierKind, BTreeMap<String, GeneOverride>>, OptimizeError> {
    let raw: PoolOverrides = toml::from_str(text).map_err(|e| OptimizeError::InvalidConfig(e.to_string()))?;
    raw.into_iter()
        .map(|(k, v)| {
            let kind = k.parse().map_err(|_| OptimizeError::InvalidConfig(format!("unknown classifier {k:?}")))?;
            Ok((kind, v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub kind: ClassifierKind,
    pub genes: Vec<ParamValue>,
}

impl Chromosome {
    /// The default spec of the kind with every gene applied by name.
    pub fn to_spec(&self, pool: &GenePool) -> Result<ClassifierSpec, OptimizeError> {
        if self.genes.len() != pool.genes.len() {
            return Err(OptimizeError::LengthMismatch {
                expected: pool.genes.len(),
                found: self.genes.len(),
            });
        }
        let mut spec = ClassifierSpec::default_for(self.kind);
        for (g, v) in pool.genes.iter().zip(&self.genes) {
            spec = spec
                .with(&g.name, v.clone())
                .map_err(|e| OptimizeError::InvalidConfig(e.to_string()))?;
        }
        Ok(spec)
    }

    fn key(&self) -> String {
        format!("{}{self}", self.kind)
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, g) in self.genes.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{g}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generation_limit: usize,
    /// Folds used by the fitness function.
    pub k: usize,
    pub seed: u64,
    /// Workers for fitness evaluation.
    pub parallelism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 10,
            generation_limit: 10,
            k: 10,
            seed: 0,
            parallelism: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.population_size < 4 {
            return Err(OptimizeError::InvalidConfig("population_size must be at least 4".into()));
        }
        if self.generation_limit < 1 {
            return Err(OptimizeError::InvalidConfig("generation_limit must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean cross-validated F1 of chromosomes over one fixed fold plan, with a
/// cache keyed by genes (the plan and seed are fixed per evaluator).
pub struct Evaluator<'a> {
    pool: GenePool,
    ds: &'a LabeledDataset,
    plan: FoldPlan,
    seed: u64,
    parallelism: usize,
    cache: HashMap<String, f64>,
    pub evaluations: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(pool: GenePool, ds: &'a LabeledDataset, cfg: &GaConfig) -> Result<Self, OptimizeError> {
        let plan = stratified_kfold(ds, cfg.k, cfg.seed)?;
        Ok(Evaluator {
            pool,
            ds,
            plan,
            seed: cfg.seed,
            parallelism: cfg.parallelism.max(1),
            cache: HashMap::new(),
            evaluations: 0,
        })
    }

    pub fn pool(&self) -> &GenePool {
        &self.pool
    }

    fn compute(&self, c: &Chromosome, inner_parallelism: usize) -> f64 {
        let run = || -> Result<f64, OptimizeError> {
            let spec = c.to_spec(&self.pool)?;
            Ok(cross_validate_with_plan(&spec, self.ds, &self.plan, self.seed, inner_parallelism)?.mean.f1)
        };
        match run() {
            Ok(f) => f,
            Err(e) => {
                log::warn!("fitness of {c} failed, scoring 0: {e}");
                0.0
            }
        }
    }

    pub fn fitness(&mut self, c: &Chromosome) -> f64 {
        self.batch(std::slice::from_ref(c))[0]
    }

    /// Evaluates a generation; uncached chromosomes run concurrently.
    pub fn batch(&mut self, cs: &[Chromosome]) -> Vec<f64> {
        let mut todo: Vec<&Chromosome> = Vec::new();
        for c in cs {
            let k = c.key();
            if !self.cache.contains_key(&k) && !todo.iter().any(|t| t.key() == k) {
                todo.push(c);
            }
        }
        let scores: Vec<f64> = if self.parallelism <= 1 || todo.len() <= 1 {
            todo.iter().map(|c| self.compute(c, self.parallelism)).collect()
        } else {
            let this = &*self;
            match crate::workers::thread_pool(self.parallelism, "ga") {
                Ok(pool) => pool.install(|| todo.par_iter().map(|c| this.compute(c, 1)).collect()),
                Err(_) => todo.iter().map(|c| this.compute(c, 1)).collect(),
            }
        };
        self.evaluations += todo.len();
        for (c, s) in todo.iter().zip(scores) {
            self.cache.insert(c.key(), s);
        }
        cs.iter().map(|c| self.cache[&c.key()]).collect()
    }
}

/// Mean F1 of `c` under stratified `cfg.k`-fold CV seeded by `cfg.seed`;
/// a failing fit scores 0.
pub fn fitness(c: &Chromosome, ds: &LabeledDataset, cfg: &GaConfig) -> Result<f64, OptimizeError> {
    let mut ev = Evaluator::new(gene_pool(c.kind), ds, cfg)?;
    Ok(ev.fitness(c))
}
