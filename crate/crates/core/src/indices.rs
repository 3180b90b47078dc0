//! Clinical indices from label volumes: structure volumes, ejection
//! fraction, myocardial mass and body surface area.

use crate::error::{Error, Result};
use crate::ingest::CaseRecord;
use crate::scalar::Scalar;
use crate::volmodel::{CardiacPhase, LabelVolume, TissueClass};

/// Myocardial tissue density in g/mL.
pub const MYOCARDIAL_DENSITY: f64 = 1.05;

/// Volume of one cardiac structure in mL.
pub fn structure_volume<T: Scalar>(v: &LabelVolume<T>, class: TissueClass) -> Result<T> {
    if class == TissueClass::Background {
        return Err(Error::InvalidArgument(
            "background is not a cardiac structure".into(),
        ));
    }
    let n = T::from_count(v.count(class));
    Ok(n * v.spacing().voxel_volume() / T::from_count(1000))
}

/// Ejection fraction in percent. `v_es > v_ed` yields a negative value.
pub fn ejection_fraction<T: Scalar>(v_ed: T, v_es: T) -> Result<T> {
    if v_ed.is_nan() || v_ed <= T::zero() {
        return Err(Error::DivisionDomain(format!(
            "end-diastolic volume must be positive, got {v_ed}"
        )));
    }
    Ok((v_ed - v_es) * T::from_count(100) / v_ed)
}

/// Myocardial mass in grams from a volume in mL.
pub fn myocardial_mass<T: Scalar>(v_myo: T) -> Result<T> {
    if v_myo.is_nan() || v_myo < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "myocardial volume must be non-negative, got {v_myo}"
        )));
    }
    Ok(v_myo * T::from_f64_lossy(MYOCARDIAL_DENSITY))
}

/// Body surface area in m^2 (Mosteller) from height in cm and weight in kg.
pub fn body_surface_area<T: Scalar>(height_cm: T, weight_kg: T) -> Result<T> {
    if !(height_cm > T::zero() && weight_kg > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "height and weight must be positive, got {height_cm} cm / {weight_kg} kg"
        )));
    }
    Ok((height_cm * weight_kg / T::from_count(3600)).sqrt())
}

/// Per-phase structure volumes in mL.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhaseVolumes<T> {
    pub lv: T,
    pub rv: T,
    pub myo: T,
}

impl<T: Scalar> PhaseVolumes<T> {
    pub fn measure(v: &LabelVolume<T>) -> Self {
        PhaseVolumes {
            lv: structure_volume(v, TissueClass::Lv).unwrap(),
            rv: structure_volume(v, TissueClass::Rv).unwrap(),
            myo: structure_volume(v, TissueClass::Myocardium).unwrap(),
        }
    }

    pub fn get(&self, class: TissueClass) -> T {
        match class {
            TissueClass::Lv => self.lv,
            TissueClass::Rv => self.rv,
            TissueClass::Myocardium => self.myo,
            TissueClass::Background => T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClinicalIndices<T> {
    pub ed: PhaseVolumes<T>,
    pub es: PhaseVolumes<T>,
    /// Percent; `None` when the ED volume is zero.
    pub lv_ef: Option<T>,
    pub rv_ef: Option<T>,
    pub myo_mass: T,
    pub mass_phase: CardiacPhase,
    pub bsa: T,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ClinicalIndices<T> {
    pub fn volumes(&self, phase: CardiacPhase) -> &PhaseVolumes<T> {
        match phase {
            CardiacPhase::Ed => &self.ed,
            CardiacPhase::Es => &self.es,
        }
    }
}

/// All clinical indices of one case, taken from its (predicted) ED/ES volumes.
pub fn compute_indices<T: Scalar>(
    case: &CaseRecord<T>,
    mass_phase: CardiacPhase,
) -> Result<ClinicalIndices<T>> {
    let ed = PhaseVolumes::measure(&case.ed_volume);
    let es = PhaseVolumes::measure(&case.es_volume);
    let mut warnings = Vec::new();
    let mut ef = |name: &str, v_ed: T, v_es: T| match ejection_fraction(v_ed, v_es) {
        Ok(v) => {
            if v < T::zero() {
                warnings.push(format!("negative {name} EF ({v}%): ES volume exceeds ED volume"));
            }
            Some(v)
        }
        Err(_) => {
            warnings.push(format!("{name} EF undefined: ED volume is zero"));
            None
        }
    };
    let lv_ef = ef("LV", ed.lv, es.lv);
    let rv_ef = ef("RV", ed.rv, es.rv);
    let myo_vol = match mass_phase {
        CardiacPhase::Ed => ed.myo,
        CardiacPhase::Es => es.myo,
    };
    let meta = &case.metadata;
    let bsa = body_surface_area(T::from_f64_lossy(meta.height), T::from_f64_lossy(meta.weight))?;
    Ok(ClinicalIndices {
        ed,
        es,
        lv_ef,
        rv_ef,
        myo_mass: myocardial_mass(myo_vol)?,
        mass_phase,
        bsa,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volmodel::{Dims, VoxelSpacing};
    use proptest::prelude::*;

    fn spacing(dx: f64, dy: f64, dz: f64) -> VoxelSpacing<f64> {
        VoxelSpacing::new(dx, dy, dz).unwrap()
    }

    #[test]
    fn ten_lv_voxels() {
        let mut codes = vec![0u8; 30];
        codes[..10].iter_mut().for_each(|c| *c = 3);
        let v = LabelVolume::from_codes(Dims::new(5, 3, 2), spacing(1.5, 1.5, 8.0), &codes).unwrap();
        assert_eq!(structure_volume(&v, TissueClass::Lv).unwrap(), 0.18);
        assert_eq!(structure_volume(&v, TissueClass::Rv).unwrap(), 0.0);
        assert!(structure_volume(&v, TissueClass::Background).is_err());
    }

    #[test]
    fn ejection_fraction_values() {
        assert_eq!(ejection_fraction(100.0, 50.0).unwrap(), 50.0);
        assert_eq!(ejection_fraction(80.0, 80.0).unwrap(), 0.0);
        assert_eq!(ejection_fraction(120.0, 48.0).unwrap(), 60.0);
        assert!(ejection_fraction(50.0, 60.0).unwrap() < 0.0);
        assert!(matches!(ejection_fraction(0.0, 1.0), Err(Error::DivisionDomain(_))));
    }

    #[test]
    fn mass_values() {
        assert_eq!(myocardial_mass(100.0).unwrap(), 105.0);
        assert_eq!(myocardial_mass(0.0).unwrap(), 0.0);
        assert!((myocardial_mass(143.2_f64).unwrap() - 150.36).abs() < 1e-12);
        assert!(myocardial_mass(-1.0).is_err());
    }

    #[test]
    fn bsa_values() {
        assert_eq!(body_surface_area(160.0, 90.0).unwrap(), 2.0);
        assert_eq!(body_surface_area(60.0, 60.0).unwrap(), 1.0);
        assert!(body_surface_area(0.0, 60.0).is_err());
        assert_eq!(body_surface_area(160.0_f32, 90.0).unwrap(), 2.0);
    }

    fn random_volume() -> impl Strategy<Value = LabelVolume<f64>> {
        (1usize..6, 1usize..6, 1usize..5).prop_flat_map(|(nx, ny, nz)| {
            prop::collection::vec(0u8..4, nx * ny * nz).prop_map(move |codes| {
                LabelVolume::from_codes(Dims::new(nx, ny, nz), spacing(1.37, 1.5, 5.0), &codes)
                    .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn volume_matches_triple_loop(v in random_volume()) {
            let d = v.dims();
            let s = v.spacing().voxel_volume();
            for class in TissueClass::FOREGROUND {
                let mut n = 0usize;
                for z in 0..d.nz { for y in 0..d.ny { for x in 0..d.nx {
                    if v.get(x, y, z) == class { n += 1; }
                }}}
                prop_assert_eq!(structure_volume(&v, class).unwrap(), n as f64 * s / 1000.0);
            }
        }

        #[test]
        fn volume_is_additive_over_slices(v in random_volume()) {
            let d = v.dims();
            for class in TissueClass::FOREGROUND {
                let total = structure_volume(&v, class).unwrap();
                let per_slice: f64 = (0..d.nz).map(|z| {
                    let sl = LabelVolume::new(Dims::new(d.nx, d.ny, 1), v.spacing(), v.slice(z).labels.to_vec()).unwrap();
                    structure_volume(&sl, class).unwrap()
                }).sum();
                prop_assert!((total - per_slice).abs() <= 1e-12 * total.max(1.0));
            }
        }

        #[test]
        fn doubling_dz_doubles_volume(v in random_volume()) {
            let s = v.spacing();
            let thick = v.with_spacing(spacing(s.dx, s.dy, 2.0 * s.dz));
            for class in TissueClass::FOREGROUND {
                prop_assert_eq!(structure_volume(&thick, class).unwrap(), 2.0 * structure_volume(&v, class).unwrap());
            }
        }

        #[test]
        fn ef_scale_invariant(ed in 1.0f64..500.0, frac in 0.0f64..1.0, k in 0.01f64..100.0) {
            let es = ed * frac;
            let a = ejection_fraction(ed, es).unwrap();
            let b = ejection_fraction(ed * k, es * k).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn mass_ratio_is_density(v in 1e-3f64..1e4) {
            let r = myocardial_mass(v).unwrap() / v;
            prop_assert!((r - 1.05).abs() <= 2.0 * f64::EPSILON);
        }
    }
}
