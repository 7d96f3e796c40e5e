//! The five subcommands: prepare, train, crossval, evaluate, sweep-alpha.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use csids_core::cost::{kdd_cost_matrix, CostMatrix};
use csids_core::data::{LabeledDataset, LabeledRecord, Provenance};
use csids_core::eval::{
    alpha_sweep, evaluate_posteriors, evaluation_report, posteriors_for, report_csv_row,
    DecisionMode, EvaluationReport, REPORT_CSV_HEADER,
};
use csids_core::family::{train_family, ModelDocument, TrainedModel};
use csids_core::kdd::{
    attack_name_set, filter_novel_attacks, load_dataset_cache, parse_kdd_file, raw_class_counts,
    write_dataset_cache, FeatureEncoder, LabeledRaw,
};
use csids_core::label::{ClassLabel, LabelMap};
use csids_core::rng::stream_seed;
use csids_core::select::{
    default_stages, staged_grid_search, stratified_subsample, CvOutcome, RawCvDataset,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::manifest::{Manifest, OutputLock};

const TEST_SET_NAMES: [&str; 2] = ["test1", "test2"];

pub fn run_command(name: &str, config: RunConfig) -> AppResult<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&config.paths.output_dir)?;
    let _lock = OutputLock::acquire(&config.paths.output_dir)?;
    let mut manifest = Manifest::new(name, config.clone());
    match name {
        "prepare" => prepare(&config, &mut manifest)?,
        "train" => train(&config, &mut manifest)?,
        "crossval" => crossval(&config, &mut manifest)?,
        "evaluate" => evaluate_cmd(&config, &mut manifest)?,
        "sweep-alpha" => sweep_alpha(&config, &mut manifest)?,
        other => return Err(AppError::usage(format!("unknown command {other}"))),
    }
    let path = manifest.finalize(&config.paths.output_dir, started)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn load_label_map(config: &RunConfig) -> AppResult<LabelMap> {
    match &config.paths.label_map {
        Some(path) => Ok(LabelMap::from_file(path)?),
        None => Ok(LabelMap::builtin()),
    }
}

fn parse_traffic_file(path: &Path, map: &LabelMap) -> AppResult<Vec<LabeledRaw>> {
    parse_kdd_file(path, map).map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

fn active_cost_matrix(config: &RunConfig) -> AppResult<CostMatrix<f64>> {
    match &config.paths.cost_matrix {
        Some(path) => Ok(CostMatrix::load(path, config.allow_nonstandard_cost)?),
        None => Ok(kdd_cost_matrix()),
    }
}

fn cache_path(config: &RunConfig, name: &str) -> PathBuf {
    config.paths.output_dir.join(format!("{name}.csidc"))
}

fn encode_records(
    encoder: &FeatureEncoder<f64>,
    records: &[LabeledRaw],
    provenance: Provenance,
) -> AppResult<LabeledDataset<f64>> {
    let encoded = records
        .iter()
        .map(|r| {
            Ok(LabeledRecord {
                features: encoder.encode(&r.record)?,
                label: r.label.index(),
            })
        })
        .collect::<csids_core::Result<Vec<_>>>()?;
    Ok(LabeledDataset::new(encoded, ClassLabel::COUNT, provenance)?)
}

/// Applies the configured stratified subsample, if any.
fn maybe_subsample(
    ds: LabeledDataset<f64>,
    config: &RunConfig,
    stream: &str,
) -> LabeledDataset<f64> {
    match config.subsample {
        Some(target) if target < ds.len() => {
            let labels: Vec<usize> = ds.records().iter().map(|r| r.label).collect();
            let picked = stratified_subsample(
                &labels,
                ds.num_classes(),
                target,
                stream_seed(config.seed, stream, 0),
            );
            let provenance = ds.provenance();
            ds.subset(&picked, provenance)
        }
        _ => ds,
    }
}

#[derive(Serialize)]
struct CountsRow {
    name: String,
    probe: usize,
    dos: usize,
    r2l: usize,
    u2r: usize,
    total_attacks: usize,
    total_normal: usize,
}

#[derive(Serialize)]
struct CountsSummary {
    datasets: Vec<CountsRow>,
}

fn counts_row(name: &str, counts: &[usize; ClassLabel::COUNT]) -> CountsRow {
    let probe = counts[ClassLabel::Probe.index()];
    let dos = counts[ClassLabel::Dos.index()];
    let r2l = counts[ClassLabel::R2l.index()];
    let u2r = counts[ClassLabel::U2r.index()];
    CountsRow {
        name: name.to_string(),
        probe,
        dos,
        r2l,
        u2r,
        total_attacks: probe + dos + r2l + u2r,
        total_normal: counts[ClassLabel::Normal.index()],
    }
}

fn prepare(config: &RunConfig, manifest: &mut Manifest) -> AppResult<()> {
    let map = load_label_map(config)?;
    if let Some(path) = &config.paths.label_map {
        manifest.add_input(path, None)?;
    }

    let train_records = parse_traffic_file(&config.paths.train, &map)?;
    if train_records.is_empty() {
        return Err(AppError::data(format!(
            "training file {} holds no records",
            config.paths.train.display()
        )));
    }
    manifest.add_input(&config.paths.train, Some(train_records.len()))?;

    let encoder: FeatureEncoder<f64> =
        FeatureEncoder::fit(train_records.iter().map(|r| &r.record))?;
    let encoder_path = config.paths.output_dir.join("encoder.json");
    std::fs::write(&encoder_path, serde_json::to_string_pretty(&encoder)?)?;
    manifest.add_output(&encoder_path);

    let mut summary = CountsSummary {
        datasets: vec![counts_row("train", &raw_class_counts(&train_records))],
    };

    let train_ds = encode_records(&encoder, &train_records, Provenance::Train)?;
    let train_cache = cache_path(config, "train");
    write_dataset_cache(&train_cache, &train_ds, &encoder)?;
    manifest.add_output(&train_cache);
    eprintln!(
        "prepared train: {} records, {} features",
        train_ds.len(),
        train_ds.dim()
    );

    if let Some(test_path) = &config.paths.test {
        let test_records = parse_traffic_file(test_path, &map)?;
        manifest.add_input(test_path, Some(test_records.len()))?;
        summary
            .datasets
            .push(counts_row("test-1", &raw_class_counts(&test_records)));

        let test1 = encode_records(&encoder, &test_records, Provenance::Test1)?;
        let test1_cache = cache_path(config, "test1");
        write_dataset_cache(&test1_cache, &test1, &encoder)?;
        manifest.add_output(&test1_cache);

        let train_names = attack_name_set(&train_records);
        let known = filter_novel_attacks(test_records, &train_names);
        summary
            .datasets
            .push(counts_row("test-2", &raw_class_counts(&known)));
        let test2 = encode_records(&encoder, &known, Provenance::Test2)?;
        let test2_cache = cache_path(config, "test2");
        write_dataset_cache(&test2_cache, &test2, &encoder)?;
        manifest.add_output(&test2_cache);
        eprintln!(
            "prepared test sets: {} full, {} with training-attack names only",
            test1.len(),
            test2.len()
        );
    }

    let counts_path = config.paths.output_dir.join("counts.json");
    std::fs::write(&counts_path, serde_json::to_string_pretty(&summary)?)?;
    manifest.add_output(&counts_path);
    Ok(())
}

fn class_names() -> Vec<String> {
    ClassLabel::ALL
        .iter()
        .map(|c| c.name().to_string())
        .collect()
}

fn train(config: &RunConfig, manifest: &mut Manifest) -> AppResult<()> {
    let family = config.family()?;
    let train_cache = cache_path(config, "train");
    if !train_cache.exists() {
        return Err(AppError::data(format!(
            "missing {} (run prepare first)",
            train_cache.display()
        )));
    }
    let (ds, _) = load_dataset_cache::<f64>(&train_cache)?;
    manifest.add_input(&train_cache, Some(ds.len()))?;
    let ds = maybe_subsample(ds, config, "subsample-train");

    let hp = config.hyper_params().resolved_for(family);
    let model = train_family(family, &ds, &hp)?;
    if let TrainedModel::Gmm(params) = &model {
        for class in params.missing_classes() {
            eprintln!(
                "warning: class {} has no training records; it gets a zero prior",
                ClassLabel::from_index(class).map_or("?", |c| c.name())
            );
        }
    }
    let doc = ModelDocument::new(family, class_names(), hp, model);
    let model_path = config.paths.output_dir.join("model.json");
    doc.save(&model_path)?;
    manifest.add_output(&model_path);
    eprintln!("trained {family} on {} records", ds.len());
    Ok(())
}

fn load_model(config: &RunConfig, manifest: &mut Manifest) -> AppResult<ModelDocument<f64>> {
    let model_path = config.paths.output_dir.join("model.json");
    if !model_path.exists() {
        return Err(AppError::data(format!(
            "missing {} (run train first)",
            model_path.display()
        )));
    }
    let doc = ModelDocument::<f64>::load(&model_path)?;
    manifest.add_input(&model_path, None)?;
    Ok(doc)
}

/// Loads every prepared test cache; errors when none exist.
fn load_test_sets(
    config: &RunConfig,
    manifest: &mut Manifest,
) -> AppResult<Vec<(String, LabeledDataset<f64>)>> {
    let mut sets = Vec::new();
    for name in TEST_SET_NAMES {
        let path = cache_path(config, name);
        if path.exists() {
            let (ds, _) = load_dataset_cache::<f64>(&path)?;
            manifest.add_input(&path, Some(ds.len()))?;
            let ds = maybe_subsample(ds, config, &format!("subsample-{name}"));
            sets.push((name.to_string(), ds));
        }
    }
    if sets.is_empty() {
        return Err(AppError::data(
            "no test caches found (run prepare with paths.test set)",
        ));
    }
    Ok(sets)
}

fn check_dims(model: &TrainedModel<f64>, ds: &LabeledDataset<f64>) -> AppResult<()> {
    if model.dim() != ds.dim() {
        return Err(AppError::data(format!(
            "model expects {} features but the dataset provides {}",
            model.dim(),
            ds.dim()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateDocument<'a> {
    dataset: &'a str,
    records: usize,
    reports: &'a [EvaluationReport<f64>],
}

fn evaluate_cmd(config: &RunConfig, manifest: &mut Manifest) -> AppResult<()> {
    let doc = load_model(config, manifest)?;
    let cm = active_cost_matrix(config)?;
    if let Some(path) = &config.paths.cost_matrix {
        manifest.add_input(path, None)?;
    }
    let bootstrap = config.bootstrap_config();
    let sets = load_test_sets(config, manifest)?;

    for (name, ds) in &sets {
        check_dims(&doc.model, ds)?;
        let posteriors = posteriors_for(|x| doc.model.posterior(x), ds)?;
        let mut reports = Vec::new();
        for mode in [DecisionMode::Weighted, DecisionMode::Unweighted] {
            let outcomes = evaluate_posteriors(&posteriors, ds, &cm, mode)?;
            reports.push(evaluation_report(&outcomes, ds, &bootstrap, mode)?);
        }

        let csv_path = config.paths.output_dir.join(format!("evaluate-{name}.csv"));
        let mut csv = String::from(REPORT_CSV_HEADER);
        csv.push('\n');
        for report in &reports {
            csv.push_str(&report_csv_row(None, report)?);
            csv.push('\n');
        }
        std::fs::write(&csv_path, csv)?;
        manifest.add_output(&csv_path);

        let json_path = config
            .paths
            .output_dir
            .join(format!("evaluate-{name}.json"));
        let document = EvaluateDocument {
            dataset: name,
            records: ds.len(),
            reports: &reports,
        };
        std::fs::write(&json_path, serde_json::to_string_pretty(&document)?)?;
        manifest.add_output(&json_path);

        for report in &reports {
            eprintln!(
                "{name} {}: cost {:.4} [{:.4}, {:.4}]",
                report.mode.name(),
                report.expected_cost,
                report.ci_low,
                report.ci_high
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    dataset: &'a str,
    records: usize,
    rows: &'a [csids_core::eval::AlphaSweepRow<f64>],
}

fn sweep_alpha(config: &RunConfig, manifest: &mut Manifest) -> AppResult<()> {
    let doc = load_model(config, manifest)?;
    let bootstrap = config.bootstrap_config();
    let alphas = config.alpha.values()?;
    let sets = load_test_sets(config, manifest)?;

    for (name, ds) in &sets {
        check_dims(&doc.model, ds)?;
        let rows = alpha_sweep(|x| doc.model.posterior(x), ds, &alphas, &bootstrap)?;

        let csv_path = config.paths.output_dir.join(format!("sweep-{name}.csv"));
        let mut csv = String::from(REPORT_CSV_HEADER);
        csv.push('\n');
        for row in &rows {
            csv.push_str(&report_csv_row(Some(row.alpha), &row.report)?);
            csv.push('\n');
        }
        std::fs::write(&csv_path, csv)?;
        manifest.add_output(&csv_path);

        let json_path = config.paths.output_dir.join(format!("sweep-{name}.json"));
        let document = SweepDocument {
            dataset: name,
            records: ds.len(),
            rows: &rows,
        };
        std::fs::write(&json_path, serde_json::to_string_pretty(&document)?)?;
        manifest.add_output(&json_path);
        eprintln!("swept {} alphas over {name}", rows.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct CvSummary<'a> {
    family: String,
    score: String,
    folds: usize,
    outcome: &'a CvOutcome<f64>,
}

#[derive(Serialize)]
struct WinnersFragment {
    model: crate::config::ModelConfig,
}

fn crossval(config: &RunConfig, manifest: &mut Manifest) -> AppResult<()> {
    let family = config.family()?;
    let map = load_label_map(config)?;
    let records = parse_traffic_file(&config.paths.train, &map)?;
    manifest.add_input(&config.paths.train, Some(records.len()))?;

    let records = match config.subsample {
        Some(target) if target < records.len() => {
            let labels: Vec<usize> = records.iter().map(|r| r.label.index()).collect();
            let picked = stratified_subsample(
                &labels,
                ClassLabel::COUNT,
                target,
                stream_seed(config.seed, "subsample-crossval", 0),
            );
            picked.into_iter().map(|i| records[i].clone()).collect()
        }
        _ => records,
    };

    let cm = active_cost_matrix(config)?;
    let stages = default_stages(family);
    let base = config.hyper_params();
    let outcome = staged_grid_search(
        &RawCvDataset { records: &records },
        family,
        &stages,
        config.score_mode()?,
        config.crossval.folds,
        &base,
        &cm,
        stream_seed(config.seed, "crossval", 0),
    )?;

    for &class in &outcome.scarce_classes {
        eprintln!(
            "warning: class {} has fewer records than folds",
            ClassLabel::from_index(class).map_or("?", |c| c.name())
        );
    }

    let report_path = config.paths.output_dir.join("cv-report.csv");
    let mut csv = String::from("stage,candidate,fold,score\n");
    for stage in &outcome.stages {
        for candidate in &stage.candidates {
            for (fold, score) in candidate.fold_scores.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    stage.param.name(),
                    candidate.value,
                    fold,
                    score
                ));
            }
            if let Some(reason) = &candidate.failure {
                eprintln!(
                    "candidate {}={} failed: {reason}",
                    stage.param.name(),
                    candidate.value
                );
            }
        }
    }
    std::fs::write(&report_path, csv)?;
    manifest.add_output(&report_path);

    let summary_path = config.paths.output_dir.join("cv-summary.json");
    let summary = CvSummary {
        family: family.name().to_string(),
        score: config.crossval.score.clone(),
        folds: config.crossval.folds,
        outcome: &outcome,
    };
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    manifest.add_output(&summary_path);

    // Config fragment encoding the winners, ready to paste over `model`.
    let winners = WinnersFragment {
        model: crate::config::ModelConfig {
            family: family.name().to_string(),
            learning_rate: outcome.hyper.mlp.learning_rate,
            epochs: outcome.hyper.mlp.epochs,
            hidden_units: outcome.hyper.mlp.hidden_units,
            convergence_threshold: outcome.hyper.gmm.convergence_threshold,
            em_iterations: outcome.hyper.gmm.max_iterations,
            components: outcome.hyper.gmm.components,
            variance_floor_factor: outcome.hyper.gmm.variance_floor_factor,
        },
    };
    let winners_path = config.paths.output_dir.join("cv-winners.json");
    std::fs::write(&winners_path, serde_json::to_string_pretty(&winners)?)?;
    manifest.add_output(&winners_path);

    for stage in &outcome.stages {
        eprintln!("selected {} = {}", stage.param.name(), stage.selected);
    }
    let mut flush = std::io::stderr();
    let _ = flush.flush();
    Ok(())
}
