//! Per-case classification features: ventricular volumes and their ratios,
//! ejection fractions, myocardial mass, wall-thickness statistics, and the
//! patient's height, weight and body surface area.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::indices::{compute_indices, ClinicalIndices};
use crate::ingest::CaseRecord;
use crate::mwt::{volume_mwt, DistanceUnit, VolumeMwt};
use crate::scalar::{mean, sample_stdev};
use crate::volmodel::CardiacPhase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiseaseClass {
    Nor = 0,
    Minf = 1,
    Dcm = 2,
    Hcm = 3,
    Arv = 4,
}

impl DiseaseClass {
    pub const ALL: [DiseaseClass; 5] = [
        DiseaseClass::Nor,
        DiseaseClass::Minf,
        DiseaseClass::Dcm,
        DiseaseClass::Hcm,
        DiseaseClass::Arv,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DiseaseClass::Nor => "NOR",
            DiseaseClass::Minf => "MINF",
            DiseaseClass::Dcm => "DCM",
            DiseaseClass::Hcm => "HCM",
            DiseaseClass::Arv => "ARV",
        }
    }
}

impl fmt::Display for DiseaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiseaseClass {
    type Err = Error;

    /// Accepts the dataset spelling `RV` for the abnormal right ventricle group.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NOR" => Ok(DiseaseClass::Nor),
            "MINF" => Ok(DiseaseClass::Minf),
            "DCM" => Ok(DiseaseClass::Dcm),
            "HCM" => Ok(DiseaseClass::Hcm),
            "ARV" | "RV" => Ok(DiseaseClass::Arv),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

/// Which phases contribute wall-thickness columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MwtPhases {
    #[default]
    Both,
    EsOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureConfig {
    pub ratio_phase: CardiacPhase,
    pub mass_phase: CardiacPhase,
    pub mwt_phases: MwtPhases,
    pub mwt_unit: DistanceUnit,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            ratio_phase: CardiacPhase::Ed,
            mass_phase: CardiacPhase::Ed,
            mwt_phases: MwtPhases::Both,
            mwt_unit: DistanceUnit::Millimetre,
        }
    }
}

const MWT_STATS: [&str; 4] = ["max_mean", "sd_mean", "mean_sd", "sd_sd"];

impl FeatureConfig {
    fn mwt_phase_list(&self) -> &'static [CardiacPhase] {
        match self.mwt_phases {
            MwtPhases::Both => &[CardiacPhase::Ed, CardiacPhase::Es],
            MwtPhases::EsOnly => &[CardiacPhase::Es],
        }
    }

    pub fn schema(&self) -> FeatureSchema {
        let mut names: Vec<String> = ["lv_vol_ed", "lv_vol_es", "rv_vol_ed", "rv_vol_es"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if self.mass_phase == CardiacPhase::Ed {
            names.push("myo_vol_ed".into());
        }
        for s in ["myo_vol_es", "myo_mass", "ratio_lv_rv", "ratio_myo_lv", "lv_ef", "rv_ef"] {
            names.push(s.into());
        }
        for phase in self.mwt_phase_list() {
            let p = phase.name().to_lowercase();
            for stat in MWT_STATS {
                names.push(format!("mwt_{p}_{stat}"));
            }
        }
        for s in ["height", "weight", "bsa"] {
            names.push(s.into());
        }
        FeatureSchema { names }
    }
}

/// Ordered feature column names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>) -> Self {
        FeatureSchema { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Short content hash of the column names, used to detect schema drift.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.names.join("\n").as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub case_id: String,
    pub group: Option<DiseaseClass>,
    pub values: Vec<f64>,
}

/// Features plus the intermediate measurements they were computed from.
#[derive(Clone, Debug)]
pub struct CaseFeatures {
    pub vector: FeatureVector,
    pub indices: ClinicalIndices<f64>,
    pub mwt: Vec<(CardiacPhase, VolumeMwt<f64>)>,
    pub warnings: Vec<String>,
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::FeatureUndefined(format!("{what}: zero denominator")));
    }
    Ok(num / den)
}

/// Compute the feature vector of one case. Degenerate cases fail with the
/// reason they should be quarantined.
pub fn extract_features(case: &CaseRecord<f64>, cfg: &FeatureConfig) -> Result<CaseFeatures> {
    let id = &case.metadata.case_id;
    let idx = compute_indices(case, cfg.mass_phase)?;
    let rp = idx.volumes(cfg.ratio_phase);
    let ratio_lv_rv = ratio(rp.lv, rp.rv, &format!("Vol(LV)/Vol(RV) at {}", cfg.ratio_phase))?;
    let ratio_myo_lv = ratio(rp.myo, rp.lv, &format!("Vol(MYO)/Vol(LV) at {}", cfg.ratio_phase))?;
    let lv_ef = idx
        .lv_ef
        .ok_or_else(|| Error::FeatureUndefined("LV ejection fraction: zero ED volume".into()))?;
    let rv_ef = idx
        .rv_ef
        .ok_or_else(|| Error::FeatureUndefined("RV ejection fraction: zero ED volume".into()))?;

    let mut values = vec![idx.ed.lv, idx.es.lv, idx.ed.rv, idx.es.rv];
    if cfg.mass_phase == CardiacPhase::Ed {
        values.push(idx.ed.myo);
    }
    values.extend([idx.es.myo, idx.myo_mass, ratio_lv_rv, ratio_myo_lv, lv_ef, rv_ef]);

    let mut mwt = Vec::new();
    let mut warnings = idx.warnings.clone();
    for &phase in cfg.mwt_phase_list() {
        let m = volume_mwt(case.volume(phase), cfg.mwt_unit)?;
        values.extend(m.features.as_array());
        for s in &m.skipped {
            warnings.push(format!("{phase} slice {} skipped: {}", s.slice, s.reason));
        }
        mwt.push((phase, m));
    }
    let meta = &case.metadata;
    values.extend([meta.height, meta.weight, idx.bsa]);

    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::FeatureUndefined(format!(
            "{id}: feature `{}` is not finite",
            cfg.schema().names[k]
        )));
    }
    Ok(CaseFeatures {
        vector: FeatureVector { case_id: id.clone(), group: meta.group, values },
        indices: idx,
        mwt,
        warnings,
    })
}

/// Rows of feature vectors sharing one schema.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn new(schema: FeatureSchema, rows: Vec<FeatureVector>) -> Result<Self> {
        for r in &rows {
            if r.values.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "case {} has {} values, schema has {} columns",
                    r.case_id,
                    r.values.len(),
                    schema.len()
                )));
            }
        }
        Ok(FeatureTable { schema, rows })
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.schema.position(name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            schema: self.schema.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["case_id".to_string(), "group".to_string()];
        header.extend(self.schema.names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.case_id.clone(), r.group.map(|g| g.to_string()).unwrap_or_default()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "case_id" || &header[1] != "group" {
            return Err(Error::Schema("feature CSV must start with case_id,group".into()));
        }
        let schema = FeatureSchema::new(header.iter().skip(2).map(str::to_string).collect());
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let group = match rec[1].trim() {
                "" => None,
                g => Some(g.parse::<DiseaseClass>()?),
            };
            let values = rec
                .iter()
                .skip(2)
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("feature CSV row {}: bad number {v:?}", line + 2))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureVector { case_id: rec[0].to_string(), group, values });
        }
        FeatureTable::new(schema, rows)
    }
}

/// Per-feature z-score parameters fit on a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// Hash of the schema the parameters were fit on.
    pub source_schema: String,
    /// Retained feature names, in source order.
    pub names: Vec<String>,
    /// Source column index of each retained feature.
    pub columns: Vec<usize>,
    pub means: Vec<f64>,
    pub stdevs: Vec<f64>,
    /// Constant features removed during fitting.
    pub dropped: Vec<String>,
}

pub fn fit_standardizer(train: &FeatureTable) -> Result<StandardizationParams> {
    if train.rows.len() < 2 {
        return Err(Error::InvalidArgument("standardizer needs at least two rows".into()));
    }
    let mut p = StandardizationParams {
        source_schema: train.schema.hash(),
        names: Vec::new(),
        columns: Vec::new(),
        means: Vec::new(),
        stdevs: Vec::new(),
        dropped: Vec::new(),
    };
    for (k, name) in train.schema.names.iter().enumerate() {
        let col: Vec<f64> = train.rows.iter().map(|r| r.values[k]).collect();
        let sd = sample_stdev(&col);
        if sd > 0.0 && sd.is_finite() {
            p.names.push(name.clone());
            p.columns.push(k);
            p.means.push(mean(&col));
            p.stdevs.push(sd);
        } else {
            p.dropped.push(name.clone());
        }
    }
    if p.names.is_empty() {
        return Err(Error::FeatureUndefined("every feature is constant on the training split".into()));
    }
    Ok(p)
}

impl StandardizationParams {
    pub fn retained_schema(&self) -> FeatureSchema {
        FeatureSchema::new(self.names.clone())
    }

    pub fn transform_row(&self, values: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .zip(self.means.iter().zip(&self.stdevs))
            .map(|(&k, (m, s))| (values[k] - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.stdevs))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Standardize every row of `table` with stored parameters.
pub fn apply_standardizer(params: &StandardizationParams, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
    if table.schema.hash() != params.source_schema {
        return Err(Error::Schema(format!(
            "table schema {} does not match standardizer schema {}",
            table.schema.hash(),
            params.source_schema
        )));
    }
    Ok(table.rows.iter().map(|r| params.transform_row(&r.values)).collect())
}

/// Row indices of a train/validation/test partition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Largest-remainder allocation of `n` items to the given ratios.
fn allocate(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let ideal: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts = [0usize; 3];
    for k in 0..3 {
        counts[k] = ideal[k].floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>().min(n);
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Stratified, seeded train/validation/test split.
pub fn split_cases(groups: &[Option<DiseaseClass>], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| r.is_nan() || *r <= 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split::default();
    let strata = DiseaseClass::ALL.iter().map(|&c| Some(c)).chain(std::iter::once(None));
    for stratum in strata {
        let mut members: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == stratum).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            let name = stratum.map(|c| c.to_string()).unwrap_or_else(|| "unlabelled".into());
            split.warnings.push(format!(
                "{name}: {} case(s) cannot be stratified over three splits",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        let [n_train, n_val, _] = allocate(members.len(), &ratios);
        split.train.extend(&members[..n_train]);
        split.val.extend(&members[n_train..n_train + n_val]);
        split.test.extend(&members[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_phantom, PhantomSpec};
    use crate::volmodel::{Dims, TissueClass, VoxelSpacing};

    fn table(cols: &[&[f64]]) -> FeatureTable {
        let n = cols[0].len();
        let schema = FeatureSchema::new((0..cols.len()).map(|k| format!("f{k}")).collect());
        let rows = (0..n)
            .map(|i| FeatureVector {
                case_id: format!("c{i}"),
                group: None,
                values: cols.iter().map(|c| c[i]).collect(),
            })
            .collect();
        FeatureTable::new(schema, rows).unwrap()
    }

    #[test]
    fn disease_class_parsing() {
        assert_eq!("RV".parse::<DiseaseClass>().unwrap(), DiseaseClass::Arv);
        assert_eq!("ARV".parse::<DiseaseClass>().unwrap(), DiseaseClass::Arv);
        assert!(matches!("XYZ".parse::<DiseaseClass>(), Err(Error::UnknownClass(_))));
    }

    #[test]
    fn schema_variants() {
        let full = FeatureConfig::default().schema();
        assert_eq!(full.len(), 22);
        let es_only = FeatureConfig {
            mwt_phases: MwtPhases::EsOnly,
            mass_phase: CardiacPhase::Es,
            ..Default::default()
        }
        .schema();
        assert_eq!(es_only.len(), 17);
        assert!(es_only.position("myo_vol_ed").is_none());
        assert_ne!(full.hash(), es_only.hash());
    }

    #[test]
    fn standardize_simple_column() {
        let t = table(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]]);
        let p = fit_standardizer(&t).unwrap();
        assert_eq!(p.means, vec![2.0]);
        assert_eq!(p.stdevs, vec![1.0]);
        assert_eq!(p.dropped, vec!["f1".to_string()]);
        let z = apply_standardizer(&p, &t).unwrap();
        assert_eq!(z, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        assert_eq!(p.inverse_row(&z[2]), vec![3.0]);
    }

    #[test]
    fn standardizer_rejects_other_schema() {
        let t = table(&[&[1.0, 2.0, 3.0]]);
        let p = fit_standardizer(&t).unwrap();
        let mut other = t.clone();
        other.schema.names[0] = "renamed".into();
        assert!(matches!(apply_standardizer(&p, &other), Err(Error::Schema(_))));
        assert!(fit_standardizer(&table(&[&[1.0]])).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = table(&[&[1.0, 0.1, 1e-7], &[-3.25, 2.0, 1e300]]);
        t.rows[1].group = Some(DiseaseClass::Hcm);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("case_id,group,f0,f1\n"));
        assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn split_hundred_cases() {
        let groups: Vec<_> = (0..100).map(|i| DiseaseClass::from_index(i % 5)).collect();
        let s = split_cases(&groups, [0.7, 0.1, 0.2], 42).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 10, 20));
        for c in DiseaseClass::ALL {
            let count = |v: &[usize]| v.iter().filter(|&&i| groups[i] == Some(c)).count();
            assert_eq!((count(&s.train), count(&s.val), count(&s.test)), (14, 2, 4));
        }
        assert_eq!(s, split_cases(&groups, [0.7, 0.1, 0.2], 42).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn split_rejects_bad_ratios_and_warns_small_strata() {
        assert!(split_cases(&[None], [0.5, 0.5, 0.5], 0).is_err());
        assert!(split_cases(&[None], [1.0, 0.0, 0.0], 0).is_err());
        let s = split_cases(&[Some(DiseaseClass::Nor), None, None, None], [0.7, 0.1, 0.2], 1).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    fn phantom_case() -> CaseRecord<f64> {
        let mut spec = PhantomSpec::annulus(Dims::new(40, 40, 3), VoxelSpacing::new(1.5, 1.5, 8.0).unwrap(), 6.0, 3.0);
        spec.ed.rv_radius = 5.0;
        spec.ed.rv_offset = 11.0;
        spec.es.lv_radius = 4.0;
        spec.es.rv_radius = 4.0;
        spec.es.rv_offset = 10.0;
        generate_phantom(&spec, 0).unwrap()
    }

    #[test]
    fn extraction_is_deterministic_and_complete() {
        let c = phantom_case();
        let cfg = FeatureConfig::default();
        let a = extract_features(&c, &cfg).unwrap();
        let b = extract_features(&c, &cfg).unwrap();
        assert_eq!(a.vector, b.vector);
        assert_eq!(a.vector.values.len(), cfg.schema().len());
        let k = cfg.schema().position("lv_vol_ed").unwrap();
        let n_lv = c.ed_volume.count(TissueClass::Lv) as f64;
        assert_eq!(a.vector.values[k], n_lv * 18.0 / 1000.0);
    }

    #[test]
    fn empty_rv_is_quarantined() {
        let mut c = phantom_case();
        for v in [&mut c.ed_volume, &mut c.es_volume] {
            let d = v.dims();
            for z in 0..d.nz {
                for y in 0..d.ny {
                    for x in 0..d.nx {
                        if v.get(x, y, z) == TissueClass::Rv {
                            v.set(x, y, z, TissueClass::Background);
                        }
                    }
                }
            }
        }
        let r = extract_features(&c, &FeatureConfig::default());
        assert!(matches!(r, Err(Error::FeatureUndefined(msg)) if msg.contains("Vol(RV)")));
    }
}
