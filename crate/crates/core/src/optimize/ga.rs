//! Generational GA: evaluate, record the fittest, cross the top two,
//! rebuild the population from offspring copies and fresh samples, then
//! mutate every member. The answer is the best chromosome ever recorded;
//! parents are not carried over.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gene_pool, Chromosome, Evaluator, GaConfig, GenePool, OptimizeError};
use crate::classifiers::ClassifierKind;
use crate::dataset::LabeledDataset;
use crate::rng;

const GA_STREAM: u64 = 0x6a;

/// Default chromosome first, the rest uniform samples.
pub fn init_population<R: Rng + ?Sized>(pool: &GenePool, size: usize, rng: &mut R) -> Vec<Chromosome> {
    let mut pop = Vec::with_capacity(size);
    pop.push(pool.default_chromosome());
    while pop.len() < size {
        pop.push(pool.sample(rng));
    }
    pop
}

/// Single-point crossover at `floor(L / 2)`.
pub fn crossover(a: &Chromosome, b: &Chromosome) -> Result<(Chromosome, Chromosome), OptimizeError> {
    if a.kind != b.kind {
        return Err(OptimizeError::KindMismatch(a.kind, b.kind));
    }
    if a.genes.len() != b.genes.len() {
        return Err(OptimizeError::LengthMismatch {
            expected: a.genes.len(),
            found: b.genes.len(),
        });
    }
    let cut = a.genes.len() / 2;
    let join = |x: &Chromosome, y: &Chromosome| Chromosome {
        kind: x.kind,
        genes: x.genes[..cut].iter().chain(&y.genes[cut..]).cloned().collect(),
    };
    Ok((join(a, b), join(b, a)))
}

/// `[0, P/4)` copies of the first offspring, `[P/4, P/2)` of the second,
/// the rest fresh samples (floor division throughout).
pub fn refill<R: Rng + ?Sized>(o1: &Chromosome, o2: &Chromosome, pool: &GenePool, size: usize, rng: &mut R) -> Vec<Chromosome> {
    (0..size)
        .map(|i| {
            if i < size / 4 {
                o1.clone()
            } else if i < size / 2 {
                o2.clone()
            } else {
                pool.sample(rng)
            }
        })
        .collect()
}

/// Resamples one uniformly chosen gene.
pub fn mutate<R: Rng + ?Sized>(c: &Chromosome, pool: &GenePool, rng: &mut R) -> Chromosome {
    let mut out = c.clone();
    if !out.genes.is_empty() {
        let i = rng.gen_range(0..out.genes.len());
        out.genes[i] = pool.genes[i].sample(rng);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub best: Chromosome,
    pub mean_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Chromosome,
    pub best_fitness: f64,
    pub history: Vec<GenerationRecord>,
    pub evaluations: usize,
}

impl GaResult {
    /// Tab-separated rows: generation, best fitness, best genes.
    pub fn history_rows(&self) -> String {
        let mut s = String::from("generation\tbest_fitness\tbest_genes\n");
        for h in &self.history {
            s.push_str(&format!("{}\t{:.6}\t{}\n", h.generation, h.best_fitness, h.best));
        }
        s
    }
}

/// GA over any batch fitness function.
pub fn run_ga_with<F>(pool: &GenePool, cfg: &GaConfig, mut evaluate: F) -> Result<GaResult, OptimizeError>
where
    F: FnMut(&[Chromosome]) -> Vec<f64>,
{
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, GA_STREAM);
    let mut population = init_population(pool, cfg.population_size, &mut r);
    let mut history = Vec::with_capacity(cfg.generation_limit);
    let mut evaluations = 0;
    for generation in 0..cfg.generation_limit {
        debug_assert_eq!(population.len(), cfg.population_size);
        let scores = evaluate(&population);
        evaluations += population.len();
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        history.push(GenerationRecord {
            generation: generation + 1,
            best_fitness: scores[ranked[0]],
            best: population[ranked[0]].clone(),
            mean_fitness: scores.iter().sum::<f64>() / scores.len() as f64,
        });
        let (o1, o2) = crossover(&population[ranked[0]], &population[ranked[1]])?;
        population = refill(&o1, &o2, pool, cfg.population_size, &mut r)
            .iter()
            .map(|c| mutate(c, pool, &mut r))
            .collect();
    }
    let best = history
        .iter()
        .fold(None::<&GenerationRecord>, |acc, h| match acc {
            Some(b) if b.best_fitness >= h.best_fitness => Some(b),
            _ => Some(h),
        })
        .expect("at least one generation");
    Ok(GaResult {
        best: best.best.clone(),
        best_fitness: best.best_fitness,
        history,
        evaluations,
    })
}

/// GA with cross-validated F1 fitness on `ds`.
pub fn run_ga(kind: ClassifierKind, ds: &LabeledDataset, cfg: &GaConfig) -> Result<GaResult, OptimizeError> {
    run_ga_pool(gene_pool(kind), ds, cfg)
}

pub fn run_ga_pool(pool: GenePool, ds: &LabeledDataset, cfg: &GaConfig) -> Result<GaResult, OptimizeError> {
    let mut ev = Evaluator::new(pool.clone(), ds, cfg)?;
    let mut res = run_ga_with(&pool, cfg, |cs| ev.batch(cs))?;
    res.evaluations = ev.evaluations;
    Ok(res)
}
