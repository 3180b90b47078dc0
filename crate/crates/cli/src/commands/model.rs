//! Training, prediction and evaluation of the dual-layer classifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use cmr_core::features::split_cases;
use cmr_core::volmodel::argmax;
use cmr_core::{DiseaseClass, FeatureTable};
use cmr_learn::tune::expand;
use cmr_learn::{
    evaluate, grid_search, load_model, predict_dual, save_model, train_dual, DualConfig, EvalReport, TuneResult,
};
use serde::Serialize;

use super::analysis::read_table;
use super::finish;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::output::{display, read_input, OutputDir};
use crate::{PredictArgs, ReportArgs, TrainArgs};

pub const PREDICTION_HEADER: [&str; 9] =
    ["case_id", "predicted_class", "p_nor", "p_minf", "p_dcm", "p_hcm", "p_arv", "p2_minf", "p2_dcm"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
    All,
}

impl Subset {
    fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
            Subset::All => "all",
        }
    }
}

#[derive(Serialize)]
struct SplitCounts {
    train: usize,
    val: usize,
    test: usize,
}

#[derive(Serialize)]
struct TrainSummary {
    schema_hash: String,
    labelled_cases: usize,
    unlabelled_cases: Vec<String>,
    split: SplitCounts,
    dropped_constant_features: Vec<String>,
    layer2_features: Vec<String>,
    tuning: Option<TuneResult>,
    trained_config: DualConfig,
    validation: Option<EvalReport>,
    validation_layer1: Option<EvalReport>,
}

fn truth_of(table: &FeatureTable) -> Vec<DiseaseClass> {
    table.rows.iter().filter_map(|r| r.group).collect()
}

pub fn train(args: &TrainArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let full = read_table(&args.features)?;
    let labelled_rows: Vec<usize> = (0..full.rows.len()).filter(|&i| full.rows[i].group.is_some()).collect();
    let unlabelled: Vec<String> =
        full.rows.iter().filter(|r| r.group.is_none()).map(|r| r.case_id.clone()).collect();
    let table = full.subset(&labelled_rows);
    let groups: Vec<Option<DiseaseClass>> = table.rows.iter().map(|r| r.group).collect();
    let split = split_cases(&groups, cfg.split.ratios, cfg.seed)?;
    let mut warnings: Vec<String> = unlabelled.iter().map(|id| format!("{id}: no diagnosis, excluded from training")).collect();
    warnings.extend(split.warnings.iter().cloned());

    let train_t = table.subset(&split.train);
    let val_t = table.subset(&split.val);
    let tuning = if !args.no_tune && expand(&cfg.learn, &cfg.tune).len() > 1 {
        if val_t.rows.is_empty() {
            warnings.push("validation split is empty, grid search skipped".into());
            None
        } else {
            Some(grid_search(&train_t, &val_t, &cfg.learn, &cfg.tune, cfg.seed)?)
        }
    } else {
        None
    };
    let chosen = tuning.as_ref().map(|t| t.best.clone()).unwrap_or_else(|| cfg.learn.clone());
    let model = train_dual(&train_t, &chosen, cfg.seed)?;

    let (validation, validation_layer1) = if val_t.rows.is_empty() {
        (None, None)
    } else {
        let preds = predict_dual(&model, &val_t)?;
        let truth = truth_of(&val_t);
        let dual: Vec<DiseaseClass> = preds.iter().map(|p| p.class).collect();
        let l1: Vec<DiseaseClass> = preds.iter().map(|p| p.layer1_class).collect();
        (Some(evaluate(&dual, &truth)?), Some(evaluate(&l1, &truth)?))
    };

    let out = OutputDir::create(&cfg.output)?;
    out.write("model.json", &save_model(&model)?)?;
    let mut assignment: Vec<Vec<String>> = Vec::with_capacity(table.rows.len());
    for (name, rows) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        assignment.extend(rows.iter().map(|&i| vec![table.rows[i].case_id.clone(), name.to_string()]));
    }
    assignment.sort();
    out.write_csv("split.csv", &["case_id", "split"], &assignment)?;

    match &validation {
        Some(v) => println!("trained on {} cases; validation accuracy {:.4}", train_t.rows.len(), v.accuracy),
        None => println!("trained on {} cases", train_t.rows.len()),
    }
    let summary = TrainSummary {
        schema_hash: model.schema_hash.clone(),
        labelled_cases: table.rows.len(),
        unlabelled_cases: unlabelled,
        split: SplitCounts { train: split.train.len(), val: split.val.len(), test: split.test.len() },
        dropped_constant_features: model.standardizer.dropped.clone(),
        layer2_features: model.layer2_schema.clone(),
        tuning,
        trained_config: chosen,
        validation,
        validation_layer1,
    };
    finish(&out, "train", vec![display(&args.features)], cfg, warnings, summary)
}

#[derive(Serialize)]
struct PredictSummary {
    schema_hash: String,
    cases: usize,
    layer2_consulted: usize,
    counts: BTreeMap<String, usize>,
}

pub fn predict(args: &PredictArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let bytes = read_input(&args.model, "models are written by `cmrdx train`")?;
    let model = load_model(&bytes).map_err(|e| match e {
        cmr_learn::Error::Core(inner) => CliError::from(inner),
        other => CliError::Data(format!("{}: {other}", args.model.display())),
    })?;
    let table = read_table(&args.features)?;
    let mut preds = predict_dual(&model, &table)?;
    preds.sort_by(|a, b| a.case_id.cmp(&b.case_id));

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let rows: Vec<Vec<String>> = preds
        .iter()
        .map(|p| {
            *counts.entry(p.class.to_string()).or_default() += 1;
            let mut row = vec![p.case_id.clone(), p.class.to_string()];
            row.extend(p.layer1.iter().map(|v| v.to_string()));
            match p.layer2 {
                Some(l2) => row.extend(l2.iter().map(|v| v.to_string())),
                None => row.extend([String::new(), String::new()]),
            }
            row
        })
        .collect();
    let out = OutputDir::create(&cfg.output)?;
    out.write_csv("predictions.csv", &PREDICTION_HEADER, &rows)?;
    println!("{} predictions written", rows.len());
    let summary = PredictSummary {
        schema_hash: model.schema_hash,
        cases: preds.len(),
        layer2_consulted: preds.iter().filter(|p| p.layer2.is_some()).count(),
        counts,
    };
    finish(&out, "predict", vec![display(&args.model), display(&args.features)], cfg, Vec::new(), summary)
}

/// One row of a predictions CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub case_id: String,
    pub class: DiseaseClass,
    pub layer1: [f64; 5],
    pub layer2: Option<[f64; 2]>,
}

impl PredictionRow {
    /// Class chosen by the first layer alone.
    pub fn layer1_class(&self) -> DiseaseClass {
        DiseaseClass::from_index(argmax(&self.layer1)).expect("five classes")
    }
}

pub fn read_predictions(bytes: &[u8]) -> CliResult<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTION_HEADER {
        return Err(CliError::Data(format!(
            "predictions CSV header {header:?} differs from {PREDICTION_HEADER:?}"
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CliError::Data(format!("predictions CSV row {}: bad {what}", line + 2));
        let num = |k: usize| rec[k].trim().parse::<f64>().map_err(|_| bad(PREDICTION_HEADER[k]));
        let class = rec[1].parse::<DiseaseClass>().map_err(|_| bad("predicted_class"))?;
        let layer1 = [num(2)?, num(3)?, num(4)?, num(5)?, num(6)?];
        let layer2 = match (rec[7].trim(), rec[8].trim()) {
            ("", "") => None,
            _ => Some([num(7)?, num(8)?]),
        };
        rows.push(PredictionRow { case_id: rec[0].to_string(), class, layer1, layer2 });
    }
    Ok(rows)
}

fn read_split(path: &std::path::Path, subset: Subset) -> CliResult<BTreeSet<String>> {
    let bytes = read_input(path, "split assignments are written by `cmrdx train`")?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let mut ids = BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(CliError::Data(format!("{}: expected case_id,split rows", path.display())));
        }
        if subset == Subset::All || &rec[1] == subset.name() {
            ids.insert(rec[0].to_string());
        }
    }
    Ok(ids)
}

#[derive(Serialize)]
struct Misclassified {
    case_id: String,
    truth: DiseaseClass,
    predicted: DiseaseClass,
    layer1: DiseaseClass,
}

#[derive(Serialize)]
struct ReportSummary {
    subset: Subset,
    evaluation: EvalReport,
    layer1_evaluation: EvalReport,
    layer2_consulted: usize,
    misclassified: Vec<Misclassified>,
}

pub fn report(args: &ReportArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let preds = read_predictions(&read_input(&args.predictions, "predictions are written by `cmrdx predict`")?)?;
    let truth_table = read_table(&args.truth)?;
    let truth: BTreeMap<&str, Option<DiseaseClass>> =
        truth_table.rows.iter().map(|r| (r.case_id.as_str(), r.group)).collect();
    let (subset, keep) = match &args.split {
        Some(p) => (args.subset, Some(read_split(p, args.subset)?)),
        None => (Subset::All, None),
    };

    let mut warnings = Vec::new();
    let mut scored: Vec<(&PredictionRow, DiseaseClass)> = Vec::new();
    for p in &preds {
        if keep.as_ref().is_some_and(|k| !k.contains(&p.case_id)) {
            continue;
        }
        match truth.get(p.case_id.as_str()) {
            Some(Some(t)) => scored.push((p, *t)),
            Some(None) => warnings.push(format!("{}: no diagnosis in the truth table, not scored", p.case_id)),
            None => warnings.push(format!("{}: absent from the truth table, not scored", p.case_id)),
        }
    }
    if scored.is_empty() {
        return Err(CliError::Data(format!("no labelled predictions in subset `{}`", subset.name())));
    }
    let t: Vec<DiseaseClass> = scored.iter().map(|(_, t)| *t).collect();
    let dual: Vec<DiseaseClass> = scored.iter().map(|(p, _)| p.class).collect();
    let l1: Vec<DiseaseClass> = scored.iter().map(|(p, _)| p.layer1_class()).collect();
    let evaluation = evaluate(&dual, &t)?;
    let layer1_evaluation = evaluate(&l1, &t)?;
    let misclassified: Vec<Misclassified> = scored
        .iter()
        .filter(|(p, t)| p.class != *t)
        .map(|(p, t)| Misclassified { case_id: p.case_id.clone(), truth: *t, predicted: p.class, layer1: p.layer1_class() })
        .collect();

    let out = OutputDir::create(&cfg.output)?;
    let mut confusion = Vec::new();
    for c in DiseaseClass::ALL {
        let mut row = vec![c.to_string()];
        row.extend(evaluation.confusion[c.index()].iter().map(|v| v.to_string()));
        confusion.push(row);
    }
    let mut header = vec!["truth\\predicted"];
    header.extend(DiseaseClass::ALL.iter().map(|c| c.name()));
    out.write_csv("confusion.csv", &header, &confusion)?;

    let summary = ReportSummary {
        subset,
        layer2_consulted: scored.iter().filter(|(p, _)| p.layer2.is_some()).count(),
        evaluation,
        layer1_evaluation,
        misclassified,
    };
    let text = render_text(&summary, &out);
    out.write("report.txt", text.as_bytes())?;
    print!("{text}");
    finish(&out, "report", vec![display(&args.predictions), display(&args.truth)], cfg, warnings, summary)
}

fn render_text(s: &ReportSummary, out: &OutputDir) -> String {
    let mut t = format!("Classification report ({} cases, subset {})\n\n", s.evaluation.n, s.subset.name());
    t.push_str("Dual-layer\n");
    t.push_str(&s.evaluation.render());
    t.push_str("\nLayer 1 only\n");
    t.push_str(&s.layer1_evaluation.render());
    t.push_str(&format!("\nLayer 2 consulted for {} case(s)\n", s.layer2_consulted));
    if !s.misclassified.is_empty() {
        t.push_str("\nMisclassified\n");
        for m in &s.misclassified {
            t.push_str(&format!("  {}: truth {}, predicted {} (layer 1 {})\n", m.case_id, m.truth, m.predicted, m.layer1));
        }
    }
    let stages = ["validate", "features", "segscore", "agreement", "train", "predict"];
    let mut stage_lines = String::new();
    for stage in stages {
        let Ok(bytes) = fs::read(out.path(&format!("{stage}_run.json"))) else { continue };
        let Ok(v) = serde_json::from_slice::<serde_json::Value>(&bytes) else { continue };
        let n = v["warnings"].as_array().map_or(0, Vec::len);
        stage_lines.push_str(&format!("  {stage}: {n} warning(s)\n"));
    }
    if !stage_lines.is_empty() {
        t.push_str("\nOther stages in this output directory\n");
        t.push_str(&stage_lines);
    }
    t
}
