//! Loss evaluation on decoder outputs and agreement between feature tables.

use std::collections::BTreeMap;

use cmr_core::agreement::{bland_altman, percent_within_loa, plot_points};
use cmr_core::ingest::nifti::{read_probability_map, read_volume};
use cmr_core::ssl_math::{cc_breakdown, dice_loss, DecoderOutputs, SharpenConfig};
use cmr_core::{FeatureTable, ProbMap, Volume};
use serde::Serialize;

use super::finish;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::output::{display, fmt_opt, read_input, OutputDir};
use crate::{AgreementArgs, SslArgs};

const DECODERS: [&str; 3] = ["main", "aux_a", "aux_b"];

/// Clinical-index columns compared when `--indices` is not given.
pub const DEFAULT_INDICES: [&str; 9] = [
    "lv_vol_ed",
    "lv_vol_es",
    "rv_vol_ed",
    "rv_vol_es",
    "myo_vol_ed",
    "myo_vol_es",
    "myo_mass",
    "lv_ef",
    "rv_ef",
];

#[derive(Serialize)]
struct PairRow {
    pseudo_label_source: &'static str,
    target: &'static str,
    mse: f64,
}

#[derive(Serialize)]
struct SslSummary {
    temperature: f64,
    pairs: Vec<PairRow>,
    consistency_loss: f64,
    underflow_voxels: usize,
    /// Supervised Dice loss per decoder, when labels were given.
    dice_loss: Option<BTreeMap<&'static str, f64>>,
}

pub fn ssl_eval(args: &SslArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let load = |p: &std::path::Path| -> CliResult<ProbMap> {
        let bytes = read_input(p, "expected a float32 NIfTI probability map")?;
        let (map, _) = read_probability_map::<f64>(&bytes)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        Ok(map)
    };
    let maps = [load(&args.main)?, load(&args.aux_a)?, load(&args.aux_b)?];
    let sharpen = SharpenConfig::new(cfg.ssl.temperature)?;
    let [m, a, b] = maps.clone();
    let outs = DecoderOutputs::new(m, a, b).map_err(|e| CliError::Data(e.to_string()))?;
    let bd = cc_breakdown(&outs, &sharpen)?;

    let dice = match &args.labels {
        None => None,
        Some(p) => {
            let bytes = read_input(p, "expected a NIfTI label volume")?;
            let truth: Volume = read_volume(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            let mut d = BTreeMap::new();
            for (name, map) in DECODERS.iter().zip(&maps) {
                let loss = dice_loss(map, &truth).map_err(|e| CliError::Data(format!("{name}: {e}")))?;
                d.insert(*name, loss);
            }
            Some(d)
        }
    };

    let summary = SslSummary {
        temperature: cfg.ssl.temperature,
        pairs: bd
            .pairs
            .iter()
            .map(|p| PairRow { pseudo_label_source: DECODERS[p.source], target: DECODERS[p.target], mse: p.mse })
            .collect(),
        consistency_loss: bd.loss,
        underflow_voxels: bd.underflow_voxels,
        dice_loss: dice,
    };
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?);
    let mut warnings = Vec::new();
    if bd.underflow_voxels > 0 {
        warnings.push(format!(
            "{} voxel(s) underflowed during sharpening and were replaced by one-hot argmax",
            bd.underflow_voxels
        ));
    }
    let mut inputs: Vec<String> = [&args.main, &args.aux_a, &args.aux_b].iter().map(|p| display(p)).collect();
    inputs.extend(args.labels.as_deref().map(display));
    let out = OutputDir::create(&cfg.output)?;
    finish(&out, "ssl-eval", inputs, cfg, warnings, summary)
}

pub(crate) fn read_table(path: &std::path::Path) -> CliResult<FeatureTable> {
    let bytes = read_input(path, "feature tables are written by `cmrdx features`")?;
    FeatureTable::read_csv(bytes.as_slice()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct AgreementRow {
    index: String,
    n: usize,
    bias: f64,
    sd_diff: f64,
    loa_low: f64,
    loa_high: f64,
    within_loa: f64,
    pearson_r: Option<f64>,
    slope: Option<f64>,
    intercept: Option<f64>,
}

#[derive(Serialize)]
struct AgreementSummary {
    matched_cases: Vec<String>,
    unmatched_cases: Vec<String>,
    indices: Vec<AgreementRow>,
}

pub fn agreement(args: &AgreementArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let auto = read_table(&args.auto)?;
    let reference = read_table(&args.reference)?;
    let indices: Vec<String> = if args.indices.is_empty() {
        DEFAULT_INDICES
            .iter()
            .filter(|n| auto.schema.position(n).is_some() && reference.schema.position(n).is_some())
            .map(|n| n.to_string())
            .collect()
    } else {
        args.indices.clone()
    };
    if indices.is_empty() {
        return Err(CliError::Data("the two tables share no clinical-index columns".into()));
    }

    let ref_rows: BTreeMap<&str, &[f64]> =
        reference.rows.iter().map(|r| (r.case_id.as_str(), r.values.as_slice())).collect();
    let auto_rows: BTreeMap<&str, &[f64]> =
        auto.rows.iter().map(|r| (r.case_id.as_str(), r.values.as_slice())).collect();
    let matched: Vec<&str> = auto_rows.keys().copied().filter(|id| ref_rows.contains_key(id)).collect();
    let unmatched: Vec<String> = auto_rows
        .keys()
        .chain(ref_rows.keys())
        .filter(|id| !(auto_rows.contains_key(*id) && ref_rows.contains_key(*id)))
        .map(|s| s.to_string())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();

    let out = OutputDir::create(&cfg.output)?;
    let mut rows = Vec::new();
    for name in &indices {
        let column = |t: &FeatureTable| {
            t.schema
                .position(name)
                .ok_or_else(|| CliError::Data(format!("column `{name}` missing from a feature table")))
        };
        let (ka, kr) = (column(&auto)?, column(&reference)?);
        let a: Vec<f64> = matched.iter().map(|id| auto_rows[id][ka]).collect();
        let r: Vec<f64> = matched.iter().map(|id| ref_rows[id][kr]).collect();
        let stats = bland_altman(&a, &r).map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        let points = plot_points(&a, &r)?;
        let plot: Vec<Vec<String>> = matched
            .iter()
            .zip(&points)
            .map(|(id, (m, d))| vec![id.to_string(), m.to_string(), d.to_string()])
            .collect();
        out.write_csv(&format!("agreement_plot/{name}.csv"), &["case_id", "mean", "difference"], &plot)?;
        rows.push(AgreementRow {
            index: name.clone(),
            n: stats.n,
            bias: stats.bias,
            sd_diff: stats.sd_diff,
            loa_low: stats.loa_low,
            loa_high: stats.loa_high,
            within_loa: percent_within_loa(&a, &r)?,
            pearson_r: stats.pearson_r,
            slope: stats.slope,
            intercept: stats.intercept,
        });
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.index.clone(),
                r.n.to_string(),
                r.bias.to_string(),
                r.sd_diff.to_string(),
                r.loa_low.to_string(),
                r.loa_high.to_string(),
                r.within_loa.to_string(),
                fmt_opt(r.pearson_r),
                fmt_opt(r.slope),
                fmt_opt(r.intercept),
            ]
        })
        .collect();
    out.write_csv(
        "agreement.csv",
        &["index", "n", "bias", "sd_diff", "loa_low", "loa_high", "within_loa", "pearson_r", "slope", "intercept"],
        &csv_rows,
    )?;
    println!("{} indices compared over {} matched cases", rows.len(), matched.len());
    let warnings = unmatched.iter().map(|id| format!("{id}: present in only one table")).collect();
    let summary = AgreementSummary {
        matched_cases: matched.iter().map(|s| s.to_string()).collect(),
        unmatched_cases: unmatched,
        indices: rows,
    };
    finish(&out, "agreement", vec![display(&args.auto), display(&args.reference)], cfg, warnings, summary)
}
