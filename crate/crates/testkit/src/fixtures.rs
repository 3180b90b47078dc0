//! Synthetic feature tables with known class structure, on the default
//! feature schema.

use cmr_core::{DiseaseClass, FeatureConfig, FeatureTable, FeatureVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn table(rows: Vec<FeatureVector>) -> FeatureTable {
    FeatureTable::new(FeatureConfig::default().schema(), rows).expect("fixture rows match the schema")
}

fn noise(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Five tight, far-apart Gaussian clusters, one per class.
pub fn separable_clusters(per_class: usize, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = FeatureConfig::default().schema().len();
    let centres: Vec<Vec<f64>> = DiseaseClass::ALL
        .iter()
        .map(|_| (0..width).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect();
    let mut rows = Vec::new();
    for class in DiseaseClass::ALL {
        for _ in 0..per_class {
            let values = centres[class.index()].iter().map(|c| c + 0.3 * noise(&mut rng)).collect();
            rows.push(FeatureVector { case_id: format!("c{:03}", rows.len()), group: Some(class), values });
        }
    }
    table(rows)
}

/// Columns that separate MINF from DCM in [`minf_dcm_overlap`]: wall-thickness
/// heterogeneity and LV volumes.
pub const MINF_DCM_AXES: [&str; 6] = [
    "mwt_ed_sd_mean",
    "mwt_es_sd_mean",
    "mwt_ed_mean_sd",
    "mwt_es_mean_sd",
    "lv_vol_ed",
    "lv_vol_es",
];

/// NOR, HCM and ARV form distinct unit-variance clusters. MINF and DCM share
/// one cluster, with standard deviation `spread`, in every column except
/// [`MINF_DCM_AXES`]. There both are drawn from a unit Gaussian and split by
/// a hyperplane through all six axes (higher heterogeneity and smaller
/// volumes for MINF), leaving a gap of `margin` around it. No single column
/// separates the pair.
pub fn minf_dcm_overlap(per_class: usize, margin: f64, spread: f64, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = FeatureConfig::default().schema();
    let width = schema.len();
    let centres: Vec<Vec<f64>> = DiseaseClass::ALL
        .iter()
        .map(|_| (0..width).map(|_| rng.gen_range(-8.0..8.0)).collect())
        .collect();
    let (minf, dcm) = (DiseaseClass::Minf.index(), DiseaseClass::Dcm.index());
    let axes: Vec<usize> = MINF_DCM_AXES.iter().map(|n| schema.position(n).expect("default schema column")).collect();
    let mut pair_rows: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    while pair_rows.iter().any(|r| r.len() < per_class) {
        let z: Vec<f64> = (0..axes.len()).map(|_| noise(&mut rng)).collect();
        let score = (z[0] + z[1] + z[2] + z[3] - z[4] - z[5]) / 6f64.sqrt();
        if score.abs() < margin / 2.0 {
            continue;
        }
        let slot = if score > 0.0 { 0 } else { 1 };
        let shared: Vec<f64> = (0..width).map(|_| spread * noise(&mut rng)).collect();
        if pair_rows[slot].len() >= per_class {
            continue;
        }
        let mut values: Vec<f64> = centres[minf].iter().zip(&shared).map(|(c, n)| c + n).collect();
        for (k, &col) in axes.iter().enumerate() {
            values[col] = centres[minf][col] + z[k];
        }
        pair_rows[slot].push(values);
    }
    let mut rows = Vec::new();
    let [minf_rows, dcm_rows] = pair_rows;
    let mut pair_iter = [minf_rows.into_iter(), dcm_rows.into_iter()];
    for class in DiseaseClass::ALL {
        for _ in 0..per_class {
            let values = if class.index() == minf {
                pair_iter[0].next().expect("per_class MINF rows")
            } else if class.index() == dcm {
                pair_iter[1].next().expect("per_class DCM rows")
            } else {
                centres[class.index()].iter().map(|c| c + noise(&mut rng)).collect()
            };
            rows.push(FeatureVector { case_id: format!("c{:03}", rows.len()), group: Some(class), values });
        }
    }
    table(rows)
}
