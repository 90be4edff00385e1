//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};

use cuffless::estimation::BaselineKind;
use cuffless::evaluation::{
    default_alpha_grid, make_folds, run_experiment, sweep_alpha, sweep_training_size,
    EstimatorSpec, EvaluationReport, ExperimentConfig, SplitMode,
};
use cuffless::features::{
    read_feature_table, write_feature_table, GroupingConfig, GroupingPreset,
};
use cuffless::ingest::{
    load_profiles, load_records, synthesize_cohort, write_csv_dir, write_ndjson, write_profiles,
    CohortConfig, QualityConfig, RecordFormat,
};
use cuffless::pipeline::{extract_batch, ExtractOptions};
use cuffless::prompting::{
    build_prompt, build_tuning_record, write_tuning_jsonl, ContextLevel, TuningRecord,
};

use crate::config::{
    baseline_hyper, endpoint_config, fingerprint, meta_json, resolve, FileConfig, ResolvedRun,
};
use crate::{
    ContextArg, EstimatorArg, EvaluateArgs, ExtractArgs, FormatArg, GroupingArg, MissingInput,
    PromptArgs, SweepArg, SynthArgs,
};

impl From<FormatArg> for RecordFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Ndjson => RecordFormat::Ndjson,
            FormatArg::CsvDir => RecordFormat::CsvDir,
        }
    }
}

impl From<ContextArg> for ContextLevel {
    fn from(value: ContextArg) -> Self {
        match value {
            ContextArg::Basic => ContextLevel::Basic,
            ContextArg::Knowledge => ContextLevel::BpKnowledge,
            ContextArg::KnowledgeUser => ContextLevel::BpKnowledgeUser,
        }
    }
}

impl From<GroupingArg> for GroupingPreset {
    fn from(value: GroupingArg) -> Self {
        match value {
            GroupingArg::Table1 => GroupingPreset::Table1,
            GroupingArg::AppendixB => GroupingPreset::AppendixB,
        }
    }
}

fn require_input(path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        return Err(MissingInput(path.to_path_buf()).into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn synth(args: SynthArgs, file_cfg: &FileConfig) -> anyhow::Result<()> {
    let seed = resolve(args.seed, file_cfg.seed, "CUFFLESS_SEED", 7);
    let cohort = CohortConfig {
        subjects: args.subjects,
        duration_s: args.duration_s,
        sampling_rate_hz: args.fs,
        noise_std: args.noise_std,
        seed,
        ..CohortConfig::default()
    };
    let (records, profiles) = synthesize_cohort(&cohort)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let records_path = match args.format {
        FormatArg::Ndjson => {
            let path = args.out.join("records.ndjson");
            write_ndjson(&records, &path)?;
            path
        }
        FormatArg::CsvDir => {
            let path = args.out.join("records");
            write_csv_dir(&records, &path)?;
            path
        }
    };
    let profiles_path = args.out.join("profiles.csv");
    write_profiles(&profiles, &profiles_path)?;

    let print = fingerprint(&cohort);
    fs::write(args.out.join("meta.json"), meta_json(&print, seed))?;
    println!(
        "wrote {} records for {} subjects to {} (profiles: {}, fingerprint {print})",
        records.len(),
        args.subjects,
        records_path.display(),
        profiles_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

pub fn extract(args: ExtractArgs, file_cfg: &FileConfig) -> anyhow::Result<()> {
    require_input(&args.input)?;
    let seed = resolve(args.seed, file_cfg.seed, "CUFFLESS_SEED", 7);
    let records = load_records(&args.input, args.format.into())?;
    let profiles = match &args.profiles {
        Some(path) => {
            require_input(path)?;
            load_profiles(path)?
        }
        None => Default::default(),
    };

    let opts = ExtractOptions {
        min_duration_s: args.min_duration_s,
        quality: QualityConfig {
            min_beats: args.min_beats,
            ..QualityConfig::default()
        },
        ..ExtractOptions::default()
    };
    let summary = extract_batch(&records, &profiles, &opts);
    for (subject, visit, report) in &summary.rejected {
        eprintln!(
            "rejected {subject}/{visit}: {}",
            report
                .reasons
                .iter()
                .map(|r| serde_json::to_string(r).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    for (subject, visit, message) in &summary.failed {
        eprintln!("failed {subject}/{visit}: {message}");
    }

    let print = fingerprint(&(&opts, seed));
    write_feature_table(&summary.features, &args.out, &meta_json(&print, seed))?;
    println!(
        "extracted {} rows to {} ({} rejected, {} failed, fingerprint {print})",
        summary.features.len(),
        args.out.display(),
        summary.rejected.len(),
        summary.failed.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build-prompts
// ---------------------------------------------------------------------------

pub fn build_prompts(args: PromptArgs, file_cfg: &FileConfig) -> anyhow::Result<()> {
    require_input(&args.input)?;
    let seed = resolve(args.seed, file_cfg.seed, "CUFFLESS_SEED", 7);
    let grouping_preset: GroupingPreset = resolve(
        args.grouping.map(GroupingPreset::from),
        file_cfg.grouping.as_deref().and_then(|s| s.parse().ok()),
        "CUFFLESS_GROUPING",
        GroupingPreset::Table1,
    );
    let grouping = GroupingConfig::preset(grouping_preset);
    let levels: Vec<ContextLevel> = if args.levels.is_empty() {
        ContextLevel::ALL.to_vec()
    } else {
        args.levels.iter().map(|l| ContextLevel::from(*l)).collect()
    };

    let rows = read_feature_table(&args.input)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;

    let print = fingerprint(&(&grouping_preset, &levels, args.no_responses, seed));
    let mut written = Vec::new();
    for level in &levels {
        let mut tuning: Vec<TuningRecord> = Vec::with_capacity(rows.len());
        for fv in &rows {
            let prompt = build_prompt(fv, *level, &grouping)?;
            let record = if args.no_responses {
                TuningRecord::from(&prompt)
            } else {
                let tuned = build_tuning_record(&prompt, fv.ref_sbp_mmhg, fv.ref_dbp_mmhg)?;
                TuningRecord::from(&tuned)
            };
            tuning.push(record);
        }
        let path = args.out.join(format!("prompts_{}.jsonl", level.slug()));
        write_tuning_jsonl(&tuning, &path)?;
        written.push(format!("{} ({} records)", path.display(), tuning.len()));
    }
    fs::write(args.out.join("meta.json"), meta_json(&print, seed))?;
    println!("wrote {} (fingerprint {print})", written.join(", "));
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn parse_grouping(s: &str) -> Option<GroupingPreset> {
    s.parse().ok()
}

pub fn evaluate(args: EvaluateArgs, file_cfg: &FileConfig) -> anyhow::Result<()> {
    require_input(&args.input)?;
    let rows = read_feature_table(&args.input)?;
    if rows.is_empty() {
        bail!("feature table {} is empty", args.input.display());
    }

    let alpha = resolve(args.alpha, file_cfg.alpha, "CUFFLESS_ALPHA", 0.3);
    let folds = resolve(args.folds, file_cfg.folds, "CUFFLESS_FOLDS", 5);
    let seed = resolve(args.seed, file_cfg.seed, "CUFFLESS_SEED", 7);
    let context: ContextLevel = resolve(
        args.context.map(ContextLevel::from),
        file_cfg.context.as_deref().and_then(|s| s.parse().ok()),
        "CUFFLESS_CONTEXT",
        ContextLevel::BpKnowledgeUser,
    );
    let grouping: GroupingPreset = resolve(
        args.grouping.map(GroupingPreset::from),
        file_cfg.grouping.as_deref().and_then(parse_grouping),
        "CUFFLESS_GROUPING",
        GroupingPreset::Table1,
    );
    let estimator_name = resolve(
        args.estimator.map(|e| {
            match e {
                EstimatorArg::Zero => "zero",
                EstimatorArg::Dtr => "dtr",
                EstimatorArg::Adaboost => "adaboost",
                EstimatorArg::Endpoint => "endpoint",
                EstimatorArg::Oracle => "oracle",
            }
            .to_owned()
        }),
        file_cfg.estimator.clone(),
        "CUFFLESS_ESTIMATOR",
        "zero".to_owned(),
    );

    let hyper = baseline_hyper(file_cfg.hyper.as_ref());
    let estimator = match estimator_name.as_str() {
        "zero" => EstimatorSpec::Zero,
        "oracle" => EstimatorSpec::Oracle,
        "dtr" => EstimatorSpec::Baseline {
            kind: BaselineKind::Dtr,
            hyper,
        },
        "adaboost" => EstimatorSpec::Baseline {
            kind: BaselineKind::Adaboost,
            hyper,
        },
        "endpoint" => EstimatorSpec::Endpoint {
            cfg: endpoint_config(
                args.endpoint_url.clone(),
                args.model.clone(),
                file_cfg.endpoint.as_ref(),
                args.endpoint_concurrency,
            ),
        },
        other => bail!("unknown estimator {other:?}"),
    };

    let split = if args.record_level_split {
        SplitMode::Record
    } else {
        SplitMode::Subject
    };
    let keys: Vec<String> = rows
        .iter()
        .map(|r| split.key(&r.subject_id, r.visit_day))
        .collect();
    let plan = make_folds(&keys, folds, seed)?;
    let cfg = ExperimentConfig {
        context_level: context,
        grouping,
        alpha,
        seed,
        split,
    };

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let resolved = ResolvedRun {
        alpha,
        folds,
        seed,
        context,
        grouping,
        estimator: estimator_name.clone(),
        record_level_split: args.record_level_split,
        endpoint_base_url: match &estimator {
            EstimatorSpec::Endpoint { cfg } => cfg.base_url.clone(),
            _ => String::new(),
        },
        endpoint_model: match &estimator {
            EstimatorSpec::Endpoint { cfg } => cfg.model_name.clone(),
            _ => String::new(),
        },
    };
    fs::write(
        args.out.join("resolved_config.json"),
        serde_json::to_vec_pretty(&resolved)?,
    )?;

    match args.sweep {
        None => {
            let report = run_experiment(&rows, &estimator, &cfg, &plan)?;
            write_report(&args.out, "report", &report)?;
            write_plot_data(&args.out, &report)?;
            println!(
                "evaluated {} records with {}: SBP MAE {:.3} / ME {:.3} / SDE {:.3}; DBP MAE {:.3} / ME {:.3} / SDE {:.3} (fingerprint {})",
                report.n_evaluated,
                report.estimator,
                report.pooled_sbp.mae_mmhg,
                report.pooled_sbp.me_mmhg,
                report.pooled_sbp.sde_mmhg,
                report.pooled_dbp.mae_mmhg,
                report.pooled_dbp.me_mmhg,
                report.pooled_dbp.sde_mmhg,
                report.fingerprint
            );
            if !report.faults.is_empty() {
                eprintln!("{} record(s) faulted; see report.json", report.faults.len());
            }
        }
        Some(SweepArg::Alpha) => {
            let grid = default_alpha_grid();
            let sweeps = sweep_alpha(&rows, &estimator, &cfg, &plan, &grid)?;
            write_sweep(&args.out, "alpha", &sweeps)?;
            println!(
                "alpha sweep complete: {} points written to {}",
                sweeps.len(),
                args.out.join("sweep_summary.csv").display()
            );
        }
        Some(SweepArg::TrainSize) => {
            let kind = match estimator {
                EstimatorSpec::Baseline { kind, .. } => kind,
                _ => bail!("--sweep train-size requires --estimator dtr or adaboost"),
            };
            let fractions = if args.fractions.is_empty() {
                (1..=8).map(|k| k as f64 / 10.0).collect()
            } else {
                args.fractions.clone()
            };
            let sweeps = sweep_training_size(&rows, kind, &hyper, &cfg, &plan, &fractions)?;
            write_sweep(&args.out, "fraction", &sweeps)?;
            println!(
                "training-size sweep complete: {} points written to {}",
                sweeps.len(),
                args.out.join("sweep_summary.csv").display()
            );
        }
    }
    Ok(())
}

fn write_report(out: &Path, stem: &str, report: &EvaluationReport) -> anyhow::Result<()> {
    let path = out.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_vec_pretty(report)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_plot_data(out: &Path, report: &EvaluationReport) -> anyhow::Result<()> {
    let header = meta_json(&report.fingerprint, report.seed);
    for (name, points, columns) in [
        ("ba_sbp.csv", &report.sbp.bland_altman, "mean_mmhg,diff_mmhg"),
        ("ba_dbp.csv", &report.dbp.bland_altman, "mean_mmhg,diff_mmhg"),
        ("corr_sbp.csv", &report.sbp.points, "ref_mmhg,est_mmhg"),
        ("corr_dbp.csv", &report.dbp.points, "ref_mmhg,est_mmhg"),
    ] {
        let path = out.join(name);
        let mut file =
            fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        writeln!(file, "#cuffless-meta {header}")?;
        writeln!(file, "{columns}")?;
        for (a, b) in points {
            writeln!(file, "{a},{b}")?;
        }
    }
    Ok(())
}

fn write_sweep(
    out: &Path,
    knob: &str,
    sweeps: &[(f64, EvaluationReport)],
) -> anyhow::Result<()> {
    let path = out.join("sweep_summary.csv");
    let mut file =
        fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    if let Some((_, first)) = sweeps.first() {
        writeln!(
            file,
            "#cuffless-meta {}",
            meta_json(&first.fingerprint, first.seed)
        )?;
    }
    writeln!(
        file,
        "{knob},sbp_mae,sbp_me,sbp_sde,dbp_mae,dbp_me,dbp_sde,n"
    )?;
    for (value, report) in sweeps {
        writeln!(
            file,
            "{value},{},{},{},{},{},{},{}",
            report.pooled_sbp.mae_mmhg,
            report.pooled_sbp.me_mmhg,
            report.pooled_sbp.sde_mmhg,
            report.pooled_dbp.mae_mmhg,
            report.pooled_dbp.me_mmhg,
            report.pooled_dbp.sde_mmhg,
            report.pooled_sbp.n
        )?;
        write_report(out, &format!("report_{knob}_{value}"), report)?;
    }
    Ok(())
}
