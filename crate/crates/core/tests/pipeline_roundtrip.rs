use std::f64::consts::PI;

use cmr_core::features::{apply_standardizer, extract_features, fit_standardizer, split_cases};
use cmr_core::ingest::phantom::{generate_phantom, phantom_corpus};
use cmr_core::ingest::{load_case, volume_file_name, write_case};
use cmr_core::{Case, Dims, Error, FeatureConfig, FeatureTable, PhantomSpec, VoxelSpacing};
use proptest::prelude::*;

#[test]
fn phantom_corpus_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for spec in phantom_corpus(1, 42, 0.1) {
        let case: Case = generate_phantom(&spec, 7).unwrap();
        let path = write_case(dir.path(), &case).unwrap();
        let back: Case = load_case(&path).unwrap();
        assert_eq!(back, case, "{}", spec.case_id);
    }
}

#[test]
fn missing_es_file_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let spec = &phantom_corpus(1, 1, 0.0)[0];
    let case: Case = generate_phantom(spec, 0).unwrap();
    let path = write_case(dir.path(), &case).unwrap();
    std::fs::remove_file(path.join(volume_file_name(&spec.case_id, spec.es_frame, false))).unwrap();
    assert!(matches!(load_case::<f64>(&path), Err(Error::NotFound(_))));
}

#[test]
fn features_follow_phantom_geometry() {
    let spacing = VoxelSpacing::new(1.5, 1.5, 8.0).unwrap();
    let mut spec = PhantomSpec::annulus(Dims::new(64, 64, 6), spacing, 10.0, 3.0);
    spec.ed.rv_radius = 8.0;
    spec.ed.rv_offset = 22.0;
    spec.es.lv_radius = 7.0;
    spec.es.rv_radius = 6.0;
    spec.es.rv_offset = 22.0;
    let case: Case = generate_phantom(&spec, 0).unwrap();
    let cfg = FeatureConfig::default();
    let f = extract_features(&case, &cfg).unwrap();
    let schema = cfg.schema();
    let get = |name: &str| f.vector.values[schema.position(name).unwrap()];

    let voxel_ml = 1.5 * 1.5 * 8.0 / 1000.0;
    let disc = |r: f64| PI * r * r * 6.0 * voxel_ml;
    let ring = |r: f64, t: f64| PI * ((r + t).powi(2) - r * r) * 6.0 * voxel_ml;
    // Rasterised areas of discs this size are within a few percent of πr².
    let close = |got: f64, want: f64| (got - want).abs() <= 0.06 * want;
    assert!(close(get("lv_vol_ed"), disc(10.0)), "{}", get("lv_vol_ed"));
    assert!(close(get("lv_vol_es"), disc(7.0)), "{}", get("lv_vol_es"));
    assert!(close(get("myo_vol_ed"), ring(10.0, 3.0)));
    assert!(close(get("myo_mass"), 1.05 * ring(10.0, 3.0)));
    let ef = 100.0 * (1.0 - 49.0 / 100.0);
    assert!((get("lv_ef") - ef).abs() < 4.0, "{}", get("lv_ef"));
    assert!((get("mwt_ed_max_mean") / 1.5 - 3.0).abs() <= 0.5);
    assert!(get("mwt_ed_sd_mean").abs() < 1e-12);
    assert_eq!(get("bsa"), (170.0f64 * 70.0 / 3600.0).sqrt());

    let again = extract_features(&case, &cfg).unwrap();
    assert_eq!(again.vector, f.vector);
}

#[test]
fn empty_rv_is_quarantined() {
    let mut spec = PhantomSpec::annulus(Dims::new(32, 32, 2), VoxelSpacing::isotropic(), 5.0, 3.0);
    spec.ed.rv_radius = 1e-3;
    let case: Case = generate_phantom(&spec, 0).unwrap();
    let err = extract_features(&case, &FeatureConfig::default()).unwrap_err();
    assert!(matches!(err, Error::FeatureUndefined(_)), "{err}");
}

fn corpus_table() -> FeatureTable {
    let cfg = FeatureConfig::default();
    let rows = phantom_corpus(3, 9, 0.05)
        .iter()
        .map(|s| extract_features(&generate_phantom::<f64>(s, 1).unwrap(), &cfg).unwrap().vector)
        .collect();
    FeatureTable::new(cfg.schema(), rows).unwrap()
}

#[test]
fn standardizer_held_out_rows_match_oracle() {
    let table = corpus_table();
    let groups: Vec<_> = table.rows.iter().map(|r| r.group).collect();
    let split = split_cases(&groups, [0.7, 0.1, 0.2], 4).unwrap();
    let train = table.subset(&split.train);
    let test = table.subset(&split.test);
    let params = fit_standardizer(&train).unwrap();
    let z = apply_standardizer(&params, &test).unwrap();
    for (name, &k) in params.names.iter().zip(&params.columns) {
        let col: Vec<f64> = train.rows.iter().map(|r| r.values[k]).collect();
        let n = col.len() as f64;
        let mu = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let j = params.names.iter().position(|m| m == name).unwrap();
        for (row, zrow) in test.rows.iter().zip(&z) {
            let want = (row.values[k] - mu) / sd;
            assert!((zrow[j] - want).abs() <= 1e-12 * want.abs().max(1.0), "{name}");
        }
    }
    let ztrain = apply_standardizer(&params, &train).unwrap();
    for j in 0..params.names.len() {
        let col: Vec<f64> = ztrain.iter().map(|r| r[j]).collect();
        let n = col.len() as f64;
        let mu = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mu.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
    }
}

#[test]
fn feature_csv_round_trip() {
    let table = corpus_table();
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let back = FeatureTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, table);
}

proptest! {
    #[test]
    fn standardize_then_invert(rows in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 3), 2..12), probe in prop::collection::vec(-1e4f64..1e4, 3)) {
        use cmr_core::{FeatureSchema, FeatureVector};
        let schema = FeatureSchema::new(vec!["a".into(), "b".into(), "c".into()]);
        let table = FeatureTable::new(
            schema,
            rows.iter().enumerate().map(|(i, v)| FeatureVector { case_id: format!("r{i}"), group: None, values: v.clone() }).collect(),
        ).unwrap();
        if let Ok(p) = fit_standardizer(&table) {
            let kept: Vec<f64> = p.columns.iter().map(|&k| probe[k]).collect();
            let back = p.inverse_row(&p.transform_row(&probe));
            for (a, b) in back.iter().zip(&kept) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
