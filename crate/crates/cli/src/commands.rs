use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use gfmm::dataset::Normalizer;
use gfmm::model_io::{load_model, write_model, SavedModel};
use gfmm::pruning::{prune as prune_model, PruneConfig, PruneStatus};
use gfmm::selection::{
    order_stability_experiment, run_benchmark, shuffled_order, split_folds, train as train_model, BenchmarkConfig,
    GridSpec,
};
use gfmm::stats::{friedman as friedman_test, holm as holm_test, rank_rows, RankMatrix};
use gfmm::{Algorithm, GfmmModel, IntervalPattern, TrainConfig, UNLABELLED};
use serde::Serialize;
use serde_json::json;

use crate::io::{
    dataset_record, envelope, file_record, load_dataset, model_patterns, print_table, read_score_table, write_text,
};
use crate::{
    BenchmarkArgs, HolmArgs, OrderStudyArgs, PredictArgs, PruneArgs, ReportArgs, StatsArgs, TrainArgs, UsageError,
};

/// Everything one command produces. `files` and `report` must be identical
/// across reruns; `side_files` (timings) are exempt.
#[derive(Default)]
struct Run {
    report: String,
    files: Vec<(PathBuf, String)>,
    side_files: Vec<(PathBuf, String)>,
    console: Vec<String>,
    table: Option<(Vec<String>, Vec<Vec<String>>)>,
}

fn finish(args: &ReportArgs, compute: impl Fn() -> Result<Run>) -> Result<()> {
    let run = compute()?;
    if args.verify {
        let again = compute()?;
        if again.report != run.report {
            bail!("--verify: reports differ between two runs");
        }
        if again.files != run.files {
            bail!("--verify: output files differ between two runs");
        }
        eprintln!("verify: two runs produced identical output");
    }
    for (path, text) in run.files.iter().chain(&run.side_files) {
        write_text(path, text)?;
    }
    if let Some(path) = &args.report {
        write_text(path, &run.report)?;
    }
    if let Some((header, rows)) = &run.table {
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        print_table(&header, rows);
    }
    for line in &run.console {
        println!("{line}");
    }
    Ok(())
}

fn usage(msg: impl std::fmt::Display) -> anyhow::Error {
    UsageError(msg.to_string()).into()
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn model_text(saved: &SavedModel) -> Result<String> {
    let mut buf = Vec::new();
    write_model(saved, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn boxes_per_class(saved: &SavedModel) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for b in saved.model.boxes() {
        *counts.entry(saved.class_name(b.label)).or_insert(0) += 1;
    }
    counts
}

fn labelled_error(model: &GfmmModel, patterns: &[IntervalPattern]) -> Option<f64> {
    model.error_rate(patterns).ok()
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg = args.hyper.config().map_err(usage)?;
    cfg.validate().map_err(usage)?;
    let ds = load_dataset(&args.data.data, &args.data.csv)?;
    let file = file_record(&args.data.data)?;
    finish(&args.report, || {
        let norm = Normalizer::fit_all(&ds)?;
        let mut patterns = norm.all_patterns(&ds)?;
        if let Some(seed) = args.seed {
            let order = shuffled_order(patterns.len(), seed);
            patterns = order.iter().map(|&i| patterns[i].clone()).collect();
        }
        let gamma = vec![args.hyper.gamma; ds.n_dims()];
        let model = train_model(&patterns, &cfg, &gamma)?;
        let training_error = labelled_error(&model, &patterns);
        let saved = SavedModel { model, class_names: ds.class_names.clone(), normalizer: Some(norm) };
        let config = json!({
            "data": file,
            "dataset": dataset_record(&ds),
            "train": cfg,
            "gamma": args.hyper.gamma,
            "order": if args.seed.is_some() { "shuffled" } else { "file" },
        });
        let results = json!({
            "box_count": saved.model.len(),
            "boxes_per_class": boxes_per_class(&saved),
            "training_error": training_error,
        });
        let summary = format!(
            "{} on {}: {} samples, {} features, {} classes -> {} boxes{}",
            cfg.algorithm,
            ds.name,
            ds.len(),
            ds.n_dims(),
            ds.class_names.len(),
            saved.model.len(),
            training_error.map(|e| format!(", training error {}%", pct(e))).unwrap_or_default(),
        );
        Ok(Run {
            report: envelope("train", config, args.seed, results)?,
            files: vec![(args.out.clone(), model_text(&saved)?)],
            console: vec![summary],
            ..Run::default()
        })
    })
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let saved = load_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let ds = load_dataset(&args.data.data, &args.data.csv)?;
    let patterns = model_patterns(&saved, &ds)?;
    let config = json!({ "model": file_record(&args.model)?, "data": file_record(&args.data.data)? });
    finish(&args.report, || {
        let classes: Vec<_> = saved.model.classes().into_iter().filter(|&c| c != UNLABELLED).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row".to_string(), "label".into(), "predicted".into()];
        header.extend(classes.iter().map(|&c| format!("score_{}", saved.class_name(c))));
        w.write_record(&header)?;
        let mut errors = 0usize;
        let mut labelled = 0usize;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (i, p) in patterns.iter().enumerate() {
            let pred = saved.model.predict(p)?;
            let name = saved.class_name(pred.class);
            *counts.entry(name.clone()).or_insert(0) += 1;
            if p.label() != UNLABELLED {
                labelled += 1;
                errors += usize::from(p.label() != pred.class);
            }
            let mut rec = vec![(i + 1).to_string(), ds.class_name(ds.labels[i]).to_string(), name];
            rec.extend(classes.iter().map(|&c| pred.score(c).unwrap_or(0.0).to_string()));
            w.write_record(&rec)?;
        }
        let csv_text = String::from_utf8(w.into_inner()?)?;
        let error_rate = (labelled > 0).then(|| errors as f64 / labelled as f64);
        let results = json!({
            "rows": patterns.len(),
            "labelled": labelled,
            "errors": errors,
            "error_rate": error_rate,
            "predicted_counts": counts,
        });
        let mut run = Run { report: envelope("predict", config.clone(), None, results)?, ..Run::default() };
        match &args.out {
            Some(path) => {
                run.files.push((path.clone(), csv_text));
                run.console.push(format!(
                    "predicted {} rows{}",
                    patterns.len(),
                    error_rate.map(|e| format!(", error {}% on {labelled} labelled", pct(e))).unwrap_or_default()
                ));
            }
            None => run.console.push(csv_text.trim_end().to_string()),
        }
        Ok(run)
    })
}

pub fn prune(args: PruneArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.min_accuracy) {
        return Err(usage("--min-accuracy must lie in [0, 1]"));
    }
    let saved = load_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let ds = load_dataset(&args.validation, &args.csv)?;
    let validation = model_patterns(&saved, &ds)?;
    let cfg = PruneConfig { min_accuracy: args.min_accuracy, never_winners: args.never_winners };
    let config = json!({
        "model": file_record(&args.model)?,
        "validation": file_record(&args.validation)?,
        "prune": cfg,
    });
    finish(&args.report, || {
        let outcome = prune_model(&saved.model, &validation, &cfg)?;
        if outcome.status == PruneStatus::WouldEmpty {
            log::warn!("pruning would remove every box; keeping the last non-empty model");
        }
        let pruned = SavedModel { model: outcome.model.clone(), ..saved.clone() };
        let results = json!({
            "status": outcome.status,
            "boxes_before": saved.model.len(),
            "boxes_after": pruned.model.len(),
            "validation_error_before": outcome.validation_error_before,
            "validation_error_after": outcome.validation_error_after,
            "rounds": outcome.rounds,
        });
        Ok(Run {
            report: envelope("prune", config.clone(), None, results)?,
            files: vec![(args.out.clone(), model_text(&pruned)?)],
            console: vec![format!(
                "pruned {} -> {} boxes in {} rounds; validation error {}% -> {}%",
                saved.model.len(),
                pruned.model.len(),
                outcome.rounds.len(),
                pct(outcome.validation_error_before),
                pct(outcome.validation_error_after),
            )],
            ..Run::default()
        })
    })
}

pub fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let grid = match &args.grid {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<GridSpec>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => GridSpec::default(),
    };
    grid.validate(args.algo).map_err(usage)?;
    if args.algo != Algorithm::OnlineAdaptive && (args.theta_min.is_some() || args.phi.is_some()) {
        return Err(usage(format!("--theta-min and --phi only apply to online-adaptive, not {}", args.algo)));
    }
    let mut base = TrainConfig::new(args.algo, grid.thetas[0]);
    base.theta_min = args.theta_min.unwrap_or(base.theta_min);
    base.phi = args.phi.unwrap_or(base.phi);
    let bench = BenchmarkConfig { folds: args.folds, seed: args.seed, base, grid, gamma: args.gamma };
    let ds = load_dataset(&args.data.data, &args.data.csv)?;
    let config = json!({
        "data": file_record(&args.data.data)?,
        "dataset": dataset_record(&ds),
        "benchmark": bench,
    });
    finish(&args.report, || {
        let result = run_benchmark(&ds, &bench)?;
        let results = json!({
            "folds": result.folds,
            "mean_test_error": result.mean_test_error,
            "mean_box_count": result.mean_box_count,
        });
        let mut run = Run { report: envelope("benchmark", config.clone(), Some(args.seed), results)?, ..Run::default() };
        if let Some(path) = &args.timings {
            let text = serde_json::to_string_pretty(&json!({ "timings": result.timings }))? + "\n";
            run.side_files.push((path.clone(), text));
        }
        let header = ["fold", "train", "test", "theta", "sigma", "measure", "val err %", "test err %", "boxes", "train s", "tune s"];
        let mut rows: Vec<Vec<String>> = result
            .folds
            .iter()
            .zip(&result.timings)
            .map(|(f, t)| {
                vec![
                    f.fold.to_string(),
                    f.n_train.to_string(),
                    f.n_test.to_string(),
                    f.selected.theta.to_string(),
                    f.selected.sigma.map_or("-".into(), |s| s.to_string()),
                    f.selected.measure.map_or("-".into(), |m| m.to_string()),
                    pct(f.validation_error),
                    pct(f.test_error),
                    f.box_count.to_string(),
                    format!("{:.4}", t.train_seconds),
                    format!("{:.3}", t.tune_seconds),
                ]
            })
            .collect();
        let k = result.timings.len() as f64;
        rows.push(vec![
            "mean".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            pct(result.mean_test_error),
            format!("{:.2}", result.mean_box_count),
            format!("{:.4}", result.timings.iter().map(|t| t.train_seconds).sum::<f64>() / k),
            format!("{:.3}", result.timings.iter().map(|t| t.tune_seconds).sum::<f64>() / k),
        ]);
        run.table = Some((header.iter().map(|s| s.to_string()).collect(), rows));
        Ok(run)
    })
}

#[derive(Serialize)]
struct OrderRunRecord {
    run: usize,
    box_count: usize,
    test_error: f64,
}

pub fn order_study(args: OrderStudyArgs) -> Result<()> {
    let cfg = args.hyper.config().map_err(usage)?;
    cfg.validate().map_err(usage)?;
    if args.shuffles < 2 {
        return Err(usage("--shuffles must be at least 2"));
    }
    if args.test_fold >= args.folds {
        return Err(usage(format!("--test-fold must be below --folds ({})", args.folds)));
    }
    let ds = load_dataset(&args.data.data, &args.data.csv)?;
    let config = json!({
        "data": file_record(&args.data.data)?,
        "dataset": dataset_record(&ds),
        "train": cfg,
        "gamma": args.hyper.gamma,
        "shuffles": args.shuffles,
        "folds": args.folds,
        "test_fold": args.test_fold,
    });
    finish(&args.report, || {
        let plan = split_folds(&ds.labels, args.folds, args.seed)?;
        let (train_idx, test_idx) = (plan.rest(args.test_fold), plan.fold(args.test_fold));
        let norm = Normalizer::fit(&ds, &train_idx)?;
        let train_set = norm.patterns(&ds, &train_idx)?;
        let test_set = norm.patterns(&ds, &test_idx)?;
        let gamma = vec![args.hyper.gamma; ds.n_dims()];
        let study = order_stability_experiment(&train_set, &test_set, &cfg, &gamma, args.shuffles, args.seed)?;
        let runs: Vec<OrderRunRecord> = study
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| OrderRunRecord { run: i, box_count: r.box_count, test_error: r.test_error })
            .collect();
        let n = runs.len() as f64;
        let mean_error = runs.iter().map(|r| r.test_error).sum::<f64>() / n;
        let mean_boxes = runs.iter().map(|r| r.box_count as f64).sum::<f64>() / n;
        let results = json!({
            "runs": runs,
            "mean_test_error": mean_error,
            "test_error_std": study.test_error_std,
            "mean_box_count": mean_boxes,
            "box_count_std": study.box_count_std,
            "identical_models": study.identical_models,
        });
        let mut rows: Vec<Vec<String>> =
            runs.iter().map(|r| vec![r.run.to_string(), r.box_count.to_string(), pct(r.test_error)]).collect();
        rows.push(vec!["mean".into(), format!("{mean_boxes:.2}"), pct(mean_error)]);
        rows.push(vec!["std".into(), format!("{:.2}", study.box_count_std), pct(study.test_error_std)]);
        Ok(Run {
            report: envelope("order-study", config.clone(), Some(args.seed), results)?,
            table: Some((vec!["run".into(), "boxes".into(), "test err %".into()], rows)),
            console: vec![format!("identical models: {}", if study.identical_models { "yes" } else { "no" })],
            ..Run::default()
        })
    })
}

fn rank_matrix(args: &StatsArgs) -> Result<(RankMatrix, serde_json::Value)> {
    let (path, kind) = match (&args.errors, &args.ranks) {
        (Some(p), None) => (p, "errors"),
        (None, Some(p)) => (p, "ranks"),
        _ => return Err(usage("give exactly one of --errors and --ranks")),
    };
    let table = read_score_table(path)?;
    let m = if kind == "errors" {
        rank_rows(table.classifiers, &table.rows)
    } else {
        RankMatrix::from_ranks(table.classifiers, table.rows)
    }
    .with_context(|| format!("{}", path.display()))?;
    let config = json!({
        kind: file_record(path)?,
        "datasets": table.datasets,
        "alpha": args.alpha,
        "rank_decimals": args.rank_decimals.0,
    });
    Ok((m, config))
}

fn rank_rows_table(m: &RankMatrix, avg: &[f64]) -> (Vec<String>, Vec<Vec<String>>) {
    let rows = m.names().iter().zip(avg).map(|(n, r)| vec![n.clone(), format!("{r:.4}")]).collect();
    (vec!["classifier".into(), "avg rank".into()], rows)
}

pub fn friedman(args: StatsArgs) -> Result<()> {
    let (m, config) = rank_matrix(&args)?;
    finish(&args.report, || {
        let r = friedman_test(&m, args.alpha, args.rank_decimals.0).map_err(usage)?;
        let avg: BTreeMap<&str, f64> = m.names().iter().map(String::as_str).zip(r.average_ranks.iter().copied()).collect();
        let results = json!({ "test": r, "average_ranks_by_name": avg });
        Ok(Run {
            report: envelope("stats-friedman", config.clone(), None, results)?,
            table: Some(rank_rows_table(&m, &r.average_ranks)),
            console: vec![
                format!("chi2_F = {:.4}  (df {}, p = {:.4})", r.chi2_f, r.chi2_df, r.chi2_p),
                format!("F_F = {:.4}  (df {}, {}, p = {:.4})", r.f_f, r.f_df.0, r.f_df.1, r.f_p),
                format!("critical F at alpha {} = {:.4}", r.alpha, r.f_critical),
                format!("equal average ranks {}", if r.reject { "rejected" } else { "not rejected" }),
            ],
            ..Run::default()
        })
    })
}

pub fn holm(args: HolmArgs) -> Result<()> {
    let (m, mut config) = rank_matrix(&args.table)?;
    let control = m
        .index_of(&args.control)
        .ok_or_else(|| usage(format!("unknown control {:?}; columns are {}", args.control, m.names().join(", "))))?;
    config["control"] = json!(args.control);
    finish(&args.table.report, || {
        let rows = holm_test(&m, control, args.table.alpha, args.table.rank_decimals.0).map_err(usage)?;
        let table = rows
            .iter()
            .map(|r| {
                vec![
                    r.step.to_string(),
                    r.comparator.clone(),
                    format!("{:.4}", r.z),
                    format!("{:.4}", r.p),
                    format!("{:.4}", r.threshold),
                    if r.reject { "reject".into() } else { "-".into() },
                ]
            })
            .collect();
        let header = ["step", "comparator", "z", "p", "alpha/(k-i)", "decision"];
        Ok(Run {
            report: envelope("stats-holm", config.clone(), None, json!({ "control": args.control, "rows": rows }))?,
            table: Some((header.iter().map(|s| s.to_string()).collect(), table)),
            ..Run::default()
        })
    })
}
