//! Commands that read case directories.

use std::path::{Path, PathBuf};

use cmr_core::features::{extract_features, FeatureTable};
use cmr_core::ingest::{generate_phantom, list_cases, load_case, phantom_corpus, write_case};
use cmr_core::segmetrics::score_case;
use cmr_core::{Case, CardiacPhase, FeatureVector, Score};
use rayon::prelude::*;
use serde::Serialize;

use super::{data_root, finish};
use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::output::{display, fmt_opt, OutputDir};
use crate::{DataArgs, PhantomArgs};

fn case_id(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Load every case directory in parallel, keeping directory order.
fn load_all(root: &Path) -> CliResult<Vec<(String, Result<Case, String>)>> {
    let dirs: Vec<PathBuf> = list_cases(root)?;
    Ok(dirs
        .par_iter()
        .map(|d| (case_id(d), load_case::<f64>(d).map_err(|e| e.to_string())))
        .collect())
}

#[derive(Serialize)]
struct CaseCheck {
    case_id: String,
    ok: bool,
    error: Option<String>,
    dims: Option<[usize; 3]>,
    spacing_mm: Option<[f64; 3]>,
    ed_frame: Option<usize>,
    es_frame: Option<usize>,
    group: Option<String>,
    has_reference: bool,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ValidateSummary {
    cases: usize,
    loaded: usize,
    failed: usize,
    checks: Vec<CaseCheck>,
}

fn spacing_warnings(cfg: &PipelineConfig, case: &Case) -> Vec<String> {
    let s = case.ed_volume.spacing();
    let [lo, hi] = cfg.qc.in_plane_mm;
    let [zlo, zhi] = cfg.qc.slice_mm;
    let mut w = Vec::new();
    for (axis, v) in [("x", s.dx), ("y", s.dy)] {
        if v < lo || v > hi {
            w.push(format!("in-plane spacing {axis} = {v} mm outside {lo}-{hi} mm"));
        }
    }
    if s.dz < zlo || s.dz > zhi {
        w.push(format!("slice spacing {} mm outside {zlo}-{zhi} mm", s.dz));
    }
    w
}

pub fn validate(args: &DataArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let root = data_root(cfg, args.data.as_deref())?;
    let loaded = load_all(&root)?;
    let mut warnings = Vec::new();
    let mut checks = Vec::with_capacity(loaded.len());
    for (id, res) in loaded {
        let check = match res {
            Ok(case) => {
                let d = case.ed_volume.dims();
                let s = case.ed_volume.spacing();
                let w = spacing_warnings(cfg, &case);
                warnings.extend(w.iter().map(|m| format!("{id}: {m}")));
                CaseCheck {
                    case_id: id,
                    ok: true,
                    error: None,
                    dims: Some([d.nx, d.ny, d.nz]),
                    spacing_mm: Some([s.dx, s.dy, s.dz]),
                    ed_frame: Some(case.metadata.ed_frame),
                    es_frame: Some(case.metadata.es_frame),
                    group: case.metadata.group.map(|g| g.to_string()),
                    has_reference: case.ed_truth.is_some() && case.es_truth.is_some(),
                    warnings: w,
                }
            }
            Err(e) => {
                warnings.push(format!("{id}: failed to load: {e}"));
                CaseCheck {
                    case_id: id,
                    ok: false,
                    error: Some(e),
                    dims: None,
                    spacing_mm: None,
                    ed_frame: None,
                    es_frame: None,
                    group: None,
                    has_reference: false,
                    warnings: Vec::new(),
                }
            }
        };
        checks.push(check);
    }
    let loaded = checks.iter().filter(|c| c.ok).count();
    let summary = ValidateSummary { cases: checks.len(), loaded, failed: checks.len() - loaded, checks };
    println!("{} cases, {} loaded, {} failed", summary.cases, summary.loaded, summary.failed);
    let out = OutputDir::create(&cfg.output)?;
    finish(&out, "validate", vec![display(&root)], cfg, warnings, summary)
}

#[derive(Serialize)]
struct FeatureQc {
    case_id: String,
    quarantined: Option<String>,
    reference: &'static str,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct FeatureSummary {
    schema: Vec<String>,
    schema_hash: String,
    rows: usize,
    reference_rows: usize,
    quarantined: usize,
    cases: Vec<FeatureQc>,
}

pub fn features(args: &DataArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let root = data_root(cfg, args.data.as_deref())?;
    let fcfg = cfg.features.to_core();
    let per_case: Vec<_> = load_all(&root)?
        .into_par_iter()
        .map(|(id, res)| {
            let case = match res {
                Ok(c) => c,
                Err(e) => return (id, Err(("load", e)), None),
            };
            let auto = extract_features(&case, &fcfg).map_err(|e| ("features", e.to_string()));
            let reference = case.reference_view().map(|r| extract_features(&r, &fcfg));
            (id, auto, reference)
        })
        .collect();

    let mut rows: Vec<FeatureVector> = Vec::new();
    let mut ref_rows: Vec<FeatureVector> = Vec::new();
    let mut quarantine = Vec::new();
    let mut qc = Vec::with_capacity(per_case.len());
    let mut warnings = Vec::new();
    for (id, auto, reference) in per_case {
        let reference = match reference {
            None => "absent",
            Some(Ok(f)) => {
                ref_rows.push(f.vector);
                "ok"
            }
            Some(Err(e)) => {
                warnings.push(format!("{id}: reference features unavailable: {e}"));
                "failed"
            }
        };
        match auto {
            Ok(f) => {
                warnings.extend(f.warnings.iter().map(|w| format!("{id}: {w}")));
                rows.push(f.vector);
                qc.push(FeatureQc { case_id: id, quarantined: None, reference, warnings: f.warnings });
            }
            Err((stage, reason)) => {
                warnings.push(format!("{id}: quarantined at {stage}: {reason}"));
                quarantine.push(vec![id.clone(), stage.to_string(), reason.clone()]);
                qc.push(FeatureQc { case_id: id, quarantined: Some(reason), reference, warnings: Vec::new() });
            }
        }
    }

    let schema = fcfg.schema();
    let out = OutputDir::create(&cfg.output)?;
    let mut buf = Vec::new();
    FeatureTable::new(schema.clone(), rows.clone())?.write_csv(&mut buf)?;
    out.write("features.csv", &buf)?;
    if !ref_rows.is_empty() {
        let mut buf = Vec::new();
        FeatureTable::new(schema.clone(), ref_rows.clone())?.write_csv(&mut buf)?;
        out.write("features_reference.csv", &buf)?;
    }
    out.write_csv("quarantine.csv", &["case_id", "stage", "reason"], &quarantine)?;
    println!("{} feature rows, {} quarantined", rows.len(), quarantine.len());
    let summary = FeatureSummary {
        schema_hash: schema.hash(),
        schema: schema.names,
        rows: rows.len(),
        reference_rows: ref_rows.len(),
        quarantined: quarantine.len(),
        cases: qc,
    };
    finish(&out, "features", vec![display(&root)], cfg, warnings, summary)
}

#[derive(Serialize)]
struct PhaseScore {
    case_id: String,
    phase: String,
    mean_dice: f64,
    mean_hd95: Option<f64>,
    mean_asd: Option<f64>,
    qc: Vec<String>,
}

#[derive(Serialize)]
struct AggregateRow {
    phase: String,
    class: String,
    cases: usize,
    mean_dice: f64,
    mean_hd95: Option<f64>,
    mean_asd: Option<f64>,
}

#[derive(Serialize)]
struct SegscoreSummary {
    unit: crate::config::SurfaceDistanceUnit,
    scored: Vec<PhaseScore>,
    skipped: Vec<String>,
    aggregate: Vec<AggregateRow>,
}

fn mean_of(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// (phase, class) with its Dice, HD95 and ASD samples.
type ClassSamples = ((String, String), Vec<f64>, Vec<f64>, Vec<f64>);

pub fn segscore(args: &DataArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let root = data_root(cfg, args.data.as_deref())?;
    let unit = cfg.segscore.unit.into();
    let phases = [CardiacPhase::Ed, CardiacPhase::Es];
    type Scored = Vec<(CardiacPhase, Result<Score, String>)>;
    let per_case: Vec<(String, Result<Scored, String>)> = load_all(&root)?
        .into_par_iter()
        .map(|(id, res)| {
            let scored = res.map(|case| {
                phases
                    .iter()
                    .filter_map(|&ph| {
                        let truth = case.truth(ph)?;
                        Some((ph, score_case(truth, case.volume(ph), unit).map_err(|e| e.to_string())))
                    })
                    .collect()
            });
            (id, scored)
        })
        .collect();

    let mut rows = Vec::new();
    let mut scored = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    let mut acc: Vec<ClassSamples> = Vec::new();
    for (id, res) in per_case {
        let phase_scores = match res {
            Ok(p) if p.is_empty() => {
                skipped.push(id.clone());
                warnings.push(format!("{id}: no reference segmentation, not scored"));
                continue;
            }
            Ok(p) => p,
            Err(e) => {
                skipped.push(id.clone());
                warnings.push(format!("{id}: failed to load: {e}"));
                continue;
            }
        };
        for (phase, score) in phase_scores {
            let score = match score {
                Ok(s) => s,
                Err(e) => {
                    warnings.push(format!("{id} {phase}: {e}"));
                    continue;
                }
            };
            for c in &score.classes {
                rows.push(vec![
                    id.clone(),
                    phase.to_string(),
                    c.class.to_string(),
                    c.dice.to_string(),
                    fmt_opt(c.hd95),
                    fmt_opt(c.asd),
                    c.worst_case.to_string(),
                ]);
                let key = (phase.to_string(), c.class.to_string());
                let slot = match acc.iter().position(|(k, ..)| *k == key) {
                    Some(i) => i,
                    None => {
                        acc.push((key, Vec::new(), Vec::new(), Vec::new()));
                        acc.len() - 1
                    }
                };
                acc[slot].1.push(c.dice);
                acc[slot].2.extend(c.hd95);
                acc[slot].3.extend(c.asd);
            }
            warnings.extend(score.qc.iter().map(|q| format!("{id} {phase}: {q}")));
            scored.push(PhaseScore {
                case_id: id.clone(),
                phase: phase.to_string(),
                mean_dice: score.mean_dice,
                mean_hd95: score.mean_hd95,
                mean_asd: score.mean_asd,
                qc: score.qc,
            });
        }
    }
    let aggregate: Vec<AggregateRow> = acc
        .into_iter()
        .map(|((phase, class), d, h, a)| AggregateRow {
            phase,
            class,
            cases: d.len(),
            mean_dice: mean_of(&d).unwrap_or(f64::NAN),
            mean_hd95: mean_of(&h),
            mean_asd: mean_of(&a),
        })
        .collect();

    let out = OutputDir::create(&cfg.output)?;
    out.write_csv(
        "segscore_cases.csv",
        &["case_id", "phase", "class", "dice", "hd95", "asd", "worst_case"],
        &rows,
    )?;
    let agg_rows: Vec<Vec<String>> = aggregate
        .iter()
        .map(|r| {
            vec![
                r.phase.clone(),
                r.class.clone(),
                r.cases.to_string(),
                r.mean_dice.to_string(),
                fmt_opt(r.mean_hd95),
                fmt_opt(r.mean_asd),
            ]
        })
        .collect();
    out.write_csv(
        "segscore_summary.csv",
        &["phase", "class", "cases", "mean_dice", "mean_hd95", "mean_asd"],
        &agg_rows,
    )?;
    println!("{} case-phases scored, {} cases skipped", scored.len(), skipped.len());
    let summary = SegscoreSummary { unit: cfg.segscore.unit, scored, skipped, aggregate };
    finish(&out, "segscore", vec![display(&root)], cfg, warnings, summary)
}

#[derive(Serialize)]
struct PhantomSummary {
    per_class: usize,
    noise: f64,
    cases: Vec<String>,
}

pub fn phantom(args: &PhantomArgs, cfg: &PipelineConfig) -> CliResult<()> {
    if !(0.0..=1.0).contains(&args.noise) {
        return Err(crate::error::CliError::Usage(format!("--noise must lie in [0, 1], got {}", args.noise)));
    }
    let specs = phantom_corpus(args.per_class, cfg.seed, args.noise);
    let out = OutputDir::create(&cfg.output)?;
    let cases: Vec<Case> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| generate_phantom(spec, cfg.seed.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;
    for case in &cases {
        write_case(&cfg.output, case)?;
    }
    println!("wrote {} phantom cases to {}", cases.len(), cfg.output.display());
    let summary = PhantomSummary {
        per_class: args.per_class,
        noise: args.noise,
        cases: cases.iter().map(|c| c.metadata.case_id.clone()).collect(),
    };
    finish(&out, "phantom", Vec::new(), cfg, Vec::new(), summary)
}
