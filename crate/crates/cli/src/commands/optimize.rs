use std::collections::BTreeMap;
use std::path::Path;

use flowhunter::classifiers::{ClassifierKind, ClassifierSpec, ParamValue};
use flowhunter::optimize::{
    gene_pool, grid_search_with, grid_size, paper_grid, random_search_with, run_ga_with, Chromosome, Evaluator,
    GaConfig, GenePool, Grid, DEFAULT_GRID_CAP,
};
use serde::Serialize;

use super::{load_dataset, or_cfg, write_file, Globals};
use crate::args::{Method, OptimizeArgs};
use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct BestRecord {
    method: String,
    classifier: ClassifierKind,
    dataset: String,
    seed: u64,
    folds: usize,
    fitness: f64,
    default_fitness: f64,
    evaluations: usize,
    genes: BTreeMap<String, ParamValue>,
    chromosome: String,
    spec: ClassifierSpec,
}

fn toml_param(v: &toml::Value) -> Option<ParamValue> {
    Some(match v {
        toml::Value::Integer(i) => ParamValue::Int(*i),
        toml::Value::Float(f) => ParamValue::Float(*f),
        toml::Value::Boolean(b) => ParamValue::Bool(*b),
        toml::Value::String(s) => ParamValue::parse_loose(s),
        _ => return None,
    })
}

/// `gene = [values...]` per line; genes are ordered as in the pool.
fn read_grid(path: &Path, pool: &GenePool) -> CliResult<Grid> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message())))?;
    let mut grid: Grid = Vec::new();
    for (gene, v) in table {
        let bad = || CliError::usage(format!("{}: `{gene}` must be a list of scalars", path.display()));
        let values = v
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|x| toml_param(x).ok_or_else(bad))
            .collect::<CliResult<Vec<_>>>()?;
        grid.push((gene, values));
    }
    grid.sort_by_key(|(g, _)| pool.position(g).unwrap_or(usize::MAX));
    Ok(grid)
}

pub fn run(a: &OptimizeArgs, cfg: &Config, g: &Globals) -> CliResult<()> {
    let oc = &cfg.optimize;
    let ga = GaConfig {
        population_size: or_cfg(a.population, oc.population_size, 10),
        generation_limit: or_cfg(a.generations, oc.generation_limit, 10),
        k: or_cfg(a.folds, oc.folds, 10),
        seed: g.seed,
        parallelism: g.jobs,
    };
    ga.validate()?;
    let mut pool = gene_pool(a.classifier);
    pool.apply_overrides(&cfg.pool_overrides(a.classifier)?)?;
    let grid = match a.method {
        Method::Grid => Some(match &a.grid {
            Some(p) => read_grid(p, &pool)?,
            None => paper_grid(a.classifier).ok_or_else(|| {
                CliError::usage(format!("no built-in grid for {}; pass --grid", a.classifier))
            })?,
        }),
        _ => None,
    };
    let cap = or_cfg(a.grid_cap, oc.grid_cap, DEFAULT_GRID_CAP);
    if let Some(grid) = &grid {
        let size = grid_size(grid);
        if size > cap {
            return Err(CliError::usage(format!("grid has {size} combinations, more than --grid-cap {cap}")));
        }
    }

    let ds = load_dataset(&a.data)?;
    let mut ev = Evaluator::new(pool.clone(), &ds, &ga)?;
    let (best, fitness, history, method) = match a.method {
        Method::Ga => {
            let r = run_ga_with(&pool, &ga, |cs| ev.batch(cs))?;
            let h = r.history_rows();
            (r.best, r.best_fitness, h, "ga")
        }
        Method::Grid => {
            let grid = grid.expect("grid resolved above");
            let r = grid_search_with(&pool, &grid, cap, |cs| ev.batch(cs))?;
            let h = r.rows();
            (r.best, r.best_fitness, h, "grid")
        }
        Method::Random => {
            let n = or_cfg(a.iterations, oc.iterations, 100);
            let r = random_search_with(&pool, n, g.seed, |cs| ev.batch(cs))?;
            let h = r.rows();
            (r.best, r.best_fitness, h, "random")
        }
    };
    let default_fitness = ev.fitness(&pool.default_chromosome());
    let spec = best.to_spec(&pool)?;
    let record = BestRecord {
        method: method.into(),
        classifier: a.classifier,
        dataset: ds.descriptor(),
        seed: g.seed,
        folds: ga.k,
        fitness,
        default_fitness,
        evaluations: ev.evaluations,
        genes: named_genes(&pool, &best),
        chromosome: best.to_string(),
        spec,
    };

    println!("{}", record.spec);
    println!(
        "best f1 {fitness:.6} (default {default_fitness:.6}) after {} evaluations",
        record.evaluations
    );
    if let Some(p) = &a.output {
        let json = serde_json::to_string_pretty(&record).map_err(CliError::runtime)?;
        write_file(p, json + "\n")?;
    }
    if let Some(p) = &a.history {
        write_file(p, history)?;
    }
    Ok(())
}

fn named_genes(pool: &GenePool, c: &Chromosome) -> BTreeMap<String, ParamValue> {
    pool.genes.iter().map(|g| g.name.clone()).zip(c.genes.iter().cloned()).collect()
}
