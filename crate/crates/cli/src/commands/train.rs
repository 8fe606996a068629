use std::path::PathBuf;

use flowhunter::classifiers::{fit, serialize_model, ClassifierKind, ClassifierSpec};
use flowhunter::detector::{upsert_metadata, valid_model_id, ModelMetadata};
use flowhunter::featsel::{
    average_importances, averaged_table, rank_features, ranked_table, select_top_k, RankedFeature, DEFAULT_TOP_K,
};
use flowhunter::flow::Timestamp;
use flowhunter::metrics::cross_validate;

use super::{apply_params, load_dataset, load_one, or_cfg, parse_features, resolve_spec, write_file, Globals};
use crate::args::{CrossvalArgs, SelectArgs, TrainArgs};
use crate::config::Config;
use crate::error::{CliError, CliResult};

/// `SOURCE_DATE_EPOCH` pins the registration time for reproducible output.
fn created_at() -> String {
    match std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse::<i64>().ok()) {
        Some(secs) => Timestamp::from_micros(secs * 1_000_000).to_rfc3339(),
        None => Timestamp::from_micros(chrono::Utc::now().timestamp_micros()).to_rfc3339(),
    }
}

pub fn models_dir(flag: &Option<PathBuf>, cfg: &Config) -> CliResult<PathBuf> {
    flag.clone()
        .or_else(|| cfg.detect.models_dir.clone())
        .ok_or_else(|| CliError::usage("--models-dir is required"))
}

pub fn metadata_path(flag: &Option<PathBuf>, cfg: &Config, dir: &std::path::Path) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.detect.metadata.clone())
        .unwrap_or_else(|| dir.join("models.json"))
}

pub fn run(a: &TrainArgs, cfg: &Config, g: &Globals) -> CliResult<()> {
    let spec = resolve_spec(&a.model)?;
    let dir = models_dir(&a.models_dir, cfg)?;
    let meta = metadata_path(&a.metadata, cfg, &dir);
    let id = a.id.clone().unwrap_or_else(|| spec.kind.name().to_string());
    if !valid_model_id(&id) {
        return Err(CliError::usage(format!("invalid model id {id:?}")));
    }
    let ds = load_dataset(&a.data)?;
    let model = fit(&spec, &ds, g.seed)?;

    std::fs::create_dir_all(&dir).map_err(|e| super::write_err(&dir, e))?;
    let file = format!("{id}.fhm");
    let path = dir.join(&file);
    write_file(&path, serialize_model(&model))?;
    upsert_metadata(&meta, ModelMetadata::describe(&id, &file, &model, created_at()))?;

    let [normal, botnet] = ds.class_counts();
    println!("{}", model.spec);
    println!(
        "trained on {} ({} rows: {normal} normal, {botnet} botnet, {} features) in {:.3} s",
        ds.descriptor(),
        ds.len(),
        ds.n_features(),
        model.fit_time
    );
    println!("model {id} written to {}, registered in {}", path.display(), meta.display());
    Ok(())
}

pub fn crossval(a: &CrossvalArgs, cfg: &Config, g: &Globals) -> CliResult<()> {
    let spec = resolve_spec(&a.model)?;
    let k = or_cfg(a.folds, cfg.crossval.folds, 10);
    let ds = load_dataset(&a.data)?;
    let report = cross_validate(&spec, &ds, k, g.seed, g.jobs)?;
    print!("{}", report.to_text());
    if let Some(p) = &a.output {
        let json = serde_json::to_string_pretty(&report).map_err(CliError::runtime)?;
        write_file(p, json + "\n")?;
    }
    if let Some(p) = &a.rows {
        write_file(p, report.to_rows())?;
    }
    Ok(())
}

pub fn select(a: &SelectArgs, cfg: &Config, g: &Globals) -> CliResult<()> {
    let features = parse_features(a.features.as_deref())?;
    let k = or_cfg(a.top_k, cfg.select.top_k, DEFAULT_TOP_K).min(features.len());
    let spec = apply_params(ClassifierSpec::default_for(ClassifierKind::RandomForest), &a.params)?;

    let mut rankings = Vec::with_capacity(a.inputs.len());
    for p in &a.inputs {
        let ds = load_one(p, &features)?;
        let ranked = rank_features(&ds, &spec, g.seed).map_err(|e| CliError::from(e).context(p.display()))?;
        if a.inputs.len() > 1 {
            println!("# {}", ds.descriptor());
            print!("{}", ranked_table(&ranked));
        }
        rankings.push(ranked);
    }
    let combined: Vec<RankedFeature> = if rankings.len() == 1 {
        let r = rankings.pop().expect("one ranking");
        print!("{}", ranked_table(&r));
        r
    } else {
        let avg = average_importances(&rankings)?;
        println!("# mean over {} datasets", rankings.len());
        print!("{}", averaged_table(&avg));
        avg.into_iter()
            .map(|a| RankedFeature {
                name: a.name,
                importance: a.mean,
            })
            .collect()
    };
    let keep = select_top_k(&combined, k)?;
    println!("kept {k}: {}", keep.join(","));
    if let Some(p) = &a.output {
        write_file(p, keep.join("\n") + "\n")?;
    }
    Ok(())
}
