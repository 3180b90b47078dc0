//! Synthetic short-axis phantoms: an LV disc inside a myocardial annulus with
//! an RV crescent beside it, plus a noisy "predicted" copy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CaseMetadata, CaseRecord};
use crate::error::{Error, Result};
use crate::features::DiseaseClass;
use crate::scalar::Scalar;
use crate::volmodel::{Dims, LabelSlice, LabelVolume, TissueClass, VoxelSpacing};

/// Geometry of one cardiac phase, in voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGeometry {
    pub lv_radius: f64,
    /// Myocardial thickness per slice; length must equal `nz`.
    pub thickness: Vec<f64>,
    /// Offset of the LV disc centre from the epicardial centre along x.
    /// Non-zero values make the wall thickness vary around the ring.
    pub lv_shift: f64,
    pub rv_radius: f64,
    /// Distance along -x from the epicardial centre to the RV disc centre.
    pub rv_offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub case_id: String,
    pub dims: Dims,
    pub spacing: VoxelSpacing<f64>,
    pub ed: PhaseGeometry,
    pub es: PhaseGeometry,
    pub height: f64,
    pub weight: f64,
    pub group: Option<DiseaseClass>,
    pub ed_frame: usize,
    pub es_frame: usize,
    /// Probability of relabelling each boundary voxel in the predicted copy.
    pub noise: f64,
}

impl PhantomSpec {
    /// Single-geometry phantom (ED and ES identical) with neutral metadata.
    pub fn annulus(dims: Dims, spacing: VoxelSpacing<f64>, lv_radius: f64, thickness: f64) -> Self {
        let geometry = PhaseGeometry {
            lv_radius,
            thickness: vec![thickness; dims.nz],
            lv_shift: 0.0,
            rv_radius: 1.0,
            rv_offset: 0.0,
        };
        PhantomSpec {
            case_id: "phantom".into(),
            dims,
            spacing,
            ed: geometry.clone(),
            es: geometry,
            height: 170.0,
            weight: 70.0,
            group: None,
            ed_frame: 1,
            es_frame: 10,
            noise: 0.0,
        }
    }

    fn centre(&self) -> (f64, f64) {
        ((self.dims.nx / 2) as f64, (self.dims.ny / 2) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("{}: {msg}", self.case_id)));
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1]", self.noise));
        }
        let (nx, ny) = (self.dims.nx as f64, self.dims.ny as f64);
        let (cx, cy) = self.centre();
        for (name, g) in [("ED", &self.ed), ("ES", &self.es)] {
            if !(g.lv_radius > 0.0 && g.rv_radius > 0.0 && g.rv_offset >= 0.0) {
                return bad(format!("{name}: radii must be positive"));
            }
            if g.thickness.len() != self.dims.nz {
                return bad(format!(
                    "{name}: {} thickness values for {} slices",
                    g.thickness.len(),
                    self.dims.nz
                ));
            }
            for &t in &g.thickness {
                if !(t.is_finite() && t >= g.lv_shift.abs()) {
                    return bad(format!("{name}: thickness {t} cannot contain LV shift {}", g.lv_shift));
                }
            }
            let epi = g.lv_radius + g.thickness.iter().cloned().fold(0.0, f64::max);
            let rv_cx = cx - g.rv_offset;
            let fits = cx - epi >= 1.0
                && cx + epi <= nx - 2.0
                && cy - epi >= 1.0
                && cy + epi <= ny - 2.0
                && rv_cx - g.rv_radius >= 1.0
                && rv_cx + g.rv_radius <= nx - 2.0
                && cy - g.rv_radius >= 1.0
                && cy + g.rv_radius <= ny - 2.0;
            if !fits {
                return bad(format!("{name}: geometry does not fit in {}", self.dims));
            }
        }
        Ok(())
    }

    fn rasterize<T: Scalar>(&self, g: &PhaseGeometry, spacing: VoxelSpacing<T>) -> LabelVolume<T> {
        let d = self.dims;
        let (cx, cy) = self.centre();
        let mut v = LabelVolume::filled(d, spacing, TissueClass::Background);
        for z in 0..d.nz {
            let epi = g.lv_radius + g.thickness[z];
            for y in 0..d.ny {
                for x in 0..d.nx {
                    let (fx, fy) = (x as f64, y as f64);
                    let r_lv = (fx - cx - g.lv_shift).hypot(fy - cy);
                    let r_epi = (fx - cx).hypot(fy - cy);
                    let r_rv = (fx - cx + g.rv_offset).hypot(fy - cy);
                    let class = if r_lv <= g.lv_radius {
                        TissueClass::Lv
                    } else if r_epi <= epi {
                        TissueClass::Myocardium
                    } else if r_rv <= g.rv_radius {
                        TissueClass::Rv
                    } else {
                        continue;
                    };
                    v.set(x, y, z, class);
                }
            }
        }
        v
    }
}

/// Relabel in-slice boundary voxels to a differing 4-neighbour's label with
/// probability `noise`. Reads from `truth` only, so edits never cascade.
fn perturb<T: Scalar>(truth: &LabelVolume<T>, noise: f64, rng: &mut ChaCha8Rng) -> LabelVolume<T> {
    let mut out = truth.clone();
    if noise == 0.0 {
        return out;
    }
    let d = truth.dims();
    for z in 0..d.nz {
        let slice: LabelSlice<'_> = truth.slice(z);
        for y in 0..d.ny {
            for x in 0..d.nx {
                let own = slice.get(x, y);
                let mut others: Vec<TissueClass> = Vec::with_capacity(4);
                for (px, py) in slice.neighbours(x, y) {
                    let c = slice.get(px, py);
                    if c != own && !others.contains(&c) {
                        others.push(c);
                    }
                }
                if others.is_empty() {
                    continue;
                }
                if rng.gen::<f64>() < noise {
                    let pick = others[rng.gen_range(0..others.len())];
                    out.set(x, y, z, pick);
                }
            }
        }
    }
    out
}

/// Build a case whose references are the exact phantom and whose predictions
/// are seeded perturbations of it.
pub fn generate_phantom<T: Scalar>(spec: &PhantomSpec, seed: u64) -> Result<CaseRecord<T>> {
    spec.validate()?;
    let spacing: VoxelSpacing<T> = VoxelSpacing::new(spec.spacing.dx, spec.spacing.dy, spec.spacing.dz)?.cast();
    let ed_truth = spec.rasterize(&spec.ed, spacing);
    let es_truth = spec.rasterize(&spec.es, spacing);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ed_volume = perturb(&ed_truth, spec.noise, &mut rng);
    let es_volume = perturb(&es_truth, spec.noise, &mut rng);
    let metadata = CaseMetadata {
        case_id: spec.case_id.clone(),
        height: spec.height,
        weight: spec.weight,
        ed_frame: spec.ed_frame,
        es_frame: spec.es_frame,
        group: spec.group,
    };
    metadata.validate()?;
    CaseRecord::new(metadata, ed_volume, es_volume, Some(ed_truth), Some(es_truth))
}

fn jitter(rng: &mut ChaCha8Rng, centre: f64, half_width: f64) -> f64 {
    centre + rng.gen_range(-half_width..=half_width)
}

/// Per-class phenotype: LV size/contraction, wall thickness pattern, RV size.
fn phenotype(class: DiseaseClass, nz: usize, rng: &mut ChaCha8Rng) -> (PhaseGeometry, PhaseGeometry) {
    let uniform = |t: f64| vec![t; nz];
    let rv = |rng: &mut ChaCha8Rng, r_ed: f64, r_es: f64| {
        let r_ed = jitter(rng, r_ed, 0.4);
        let r_es = jitter(rng, r_es, 0.4);
        (r_ed, r_es)
    };
    let (lv_ed, lv_es, t_ed, t_es, shift, (rv_ed, rv_es), rv_off) = match class {
        DiseaseClass::Nor => {
            let t = jitter(rng, 3.0, 0.3);
            (jitter(rng, 9.0, 0.4), jitter(rng, 6.0, 0.4), uniform(t), uniform(t * 1.5), 0.0, rv(rng, 8.0, 6.0), 15.0)
        }
        DiseaseClass::Minf => {
            // Patchy infarct: some slices thin and non-thickening, off-centre cavity.
            let mut ed = Vec::with_capacity(nz);
            let mut es = Vec::with_capacity(nz);
            for _ in 0..nz {
                if rng.gen::<f64>() < 0.5 {
                    ed.push(jitter(rng, 1.6, 0.2));
                    es.push(jitter(rng, 1.8, 0.2));
                } else {
                    ed.push(jitter(rng, 3.2, 0.2));
                    es.push(jitter(rng, 4.2, 0.2));
                }
            }
            (jitter(rng, 11.5, 0.4), jitter(rng, 9.5, 0.4), ed, es, 1.2, rv(rng, 8.0, 6.0), 17.0)
        }
        DiseaseClass::Dcm => {
            let t = jitter(rng, 2.2, 0.2);
            (jitter(rng, 14.0, 0.4), jitter(rng, 13.0, 0.4), uniform(t), uniform(t * 1.1), 0.0, rv(rng, 8.0, 6.5), 19.0)
        }
        DiseaseClass::Hcm => {
            let t = jitter(rng, 5.5, 0.3);
            (jitter(rng, 7.0, 0.4), jitter(rng, 3.5, 0.3), uniform(t), uniform(t * 1.3), 0.0, rv(rng, 8.0, 6.0), 15.0)
        }
        DiseaseClass::Arv => {
            let t = jitter(rng, 3.0, 0.3);
            (jitter(rng, 9.0, 0.4), jitter(rng, 6.0, 0.4), uniform(t), uniform(t * 1.5), 0.0, rv(rng, 13.0, 12.0), 19.0)
        }
    };
    let geometry = |lv: f64, t: Vec<f64>, rv: f64| {
        let shift = t.iter().cloned().fold(f64::INFINITY, f64::min).min(shift);
        PhaseGeometry { lv_radius: lv, thickness: t, lv_shift: shift, rv_radius: rv, rv_offset: rv_off }
    };
    (geometry(lv_ed, t_ed, rv_ed), geometry(lv_es, t_es, rv_es))
}

/// Phantom specs for a labelled corpus with `per_class` cases of each class,
/// ids `case001`, `case002`, ... in class order.
pub fn phantom_corpus(per_class: usize, seed: u64, noise: f64) -> Vec<PhantomSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims::new(80, 80, 8);
    let spacing = VoxelSpacing { dx: 1.5, dy: 1.5, dz: 8.0 };
    let mut specs = Vec::with_capacity(per_class * DiseaseClass::ALL.len());
    for class in DiseaseClass::ALL {
        for _ in 0..per_class {
            let (ed, es) = phenotype(class, dims.nz, &mut rng);
            specs.push(PhantomSpec {
                case_id: format!("case{:03}", specs.len() + 1),
                dims,
                spacing,
                ed,
                es,
                height: jitter(&mut rng, 170.0, 20.0).round(),
                weight: jitter(&mut rng, 75.0, 20.0).round(),
                group: Some(class),
                ed_frame: 1,
                es_frame: 10,
                noise,
            });
        }
    }
    specs
}
