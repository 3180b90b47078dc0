//! Segmentation quality: Dice overlap, average surface distance and
//! (95th-percentile) Hausdorff distance.
//!
//! Surfaces are foreground voxels with at least one background 6-neighbour
//! (4-neighbour for planar masks); the volume border counts as background.
//! Distance searches are exhaustive.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volmodel::{binary_mask, BinaryMask, LabelVolume, TissueClass};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SurfaceUnit {
    #[default]
    Voxel,
    Millimetre,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Percentile {
    /// Classical Hausdorff distance (max of directed maxima).
    Max,
    /// Nearest-rank 95th percentile of each directed distance multiset.
    P95,
}

/// Surface voxel coordinates, scaled to `unit`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSet<T = f64> {
    pub points: Vec<[T; 3]>,
    pub unit: SurfaceUnit,
}

impl<T> SurfaceSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Dice overlap of two masks; 1 when both are empty.
pub fn dice<T: Scalar>(truth: &BinaryMask<T>, pred: &BinaryMask<T>) -> Result<T> {
    if truth.dims() != pred.dims() {
        return Err(Error::InvalidArgument(format!(
            "mask dims differ: {} vs {}",
            truth.dims(),
            pred.dims()
        )));
    }
    let (mut t, mut p, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in truth.data().iter().zip(pred.data()) {
        t += a as usize;
        p += b as usize;
        both += (a && b) as usize;
    }
    if t + p == 0 {
        return Ok(T::one());
    }
    Ok(T::from_count(2 * both) / T::from_count(t + p))
}

/// Surface voxel indices of a mask, in raster order.
pub fn surface_indices<T: Scalar>(mask: &BinaryMask<T>) -> Vec<usize> {
    let d = mask.dims();
    let data = mask.data();
    let offsets: &[(i64, i64, i64)] = if mask.is_planar() {
        &[(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0)]
    } else {
        &[(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
    };
    let mut out = Vec::new();
    for (idx, &on) in data.iter().enumerate() {
        if !on {
            continue;
        }
        let [x, y, z] = d.coords(idx);
        let boundary = offsets.iter().any(|&(ox, oy, oz)| {
            let (px, py, pz) = (x as i64 + ox, y as i64 + oy, z as i64 + oz);
            if px < 0 || py < 0 || pz < 0 || px >= d.nx as i64 || py >= d.ny as i64 || pz >= d.nz as i64 {
                return true;
            }
            !data[d.index(px as usize, py as usize, pz as usize)]
        });
        if boundary {
            out.push(idx);
        }
    }
    out
}

/// Surface points of a non-empty mask.
pub fn surface_points<T: Scalar>(mask: &BinaryMask<T>, unit: SurfaceUnit) -> Result<SurfaceSet<T>> {
    let d = mask.dims();
    let s = mask.spacing();
    let scale = match unit {
        SurfaceUnit::Voxel => [T::one(); 3],
        SurfaceUnit::Millimetre => [s.dx, s.dy, s.dz],
    };
    let points: Vec<[T; 3]> = surface_indices(mask)
        .into_iter()
        .map(|idx| {
            let c = d.coords(idx);
            [
                T::from_count(c[0]) * scale[0],
                T::from_count(c[1]) * scale[1],
                T::from_count(c[2]) * scale[2],
            ]
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptySurface);
    }
    Ok(SurfaceSet { points, unit })
}

#[inline]
fn squared_distance<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

/// For every point of `from`, the distance to its nearest point in `to`.
pub fn directed_distances<T: Scalar>(from: &SurfaceSet<T>, to: &SurfaceSet<T>) -> Vec<T> {
    from.points
        .iter()
        .map(|a| {
            to.points
                .iter()
                .map(|b| squared_distance(a, b))
                .fold(T::infinity(), T::min)
                .sqrt()
        })
        .collect()
}

fn check_pair<T>(t: &SurfaceSet<T>, p: &SurfaceSet<T>) -> Result<()> {
    if t.is_empty() || p.is_empty() {
        return Err(Error::EmptySurface);
    }
    if t.unit != p.unit {
        return Err(Error::InvalidArgument("surface sets use different units".into()));
    }
    Ok(())
}

/// Symmetric average surface distance.
pub fn asd<T: Scalar>(t: &SurfaceSet<T>, p: &SurfaceSet<T>) -> Result<T> {
    check_pair(t, p)?;
    let forward: T = directed_distances(t, p).into_iter().sum();
    let backward: T = directed_distances(p, t).into_iter().sum();
    Ok((forward + backward) / T::from_count(t.len() + p.len()))
}

/// 1-based nearest rank for the 95th percentile: ceil(0.95 n).
pub fn p95_rank(n: usize) -> usize {
    (95 * n).div_ceil(100).max(1)
}

fn directed_stat<T: Scalar>(mut d: Vec<T>, percentile: Percentile) -> T {
    match percentile {
        Percentile::Max => d.into_iter().fold(T::neg_infinity(), T::max),
        Percentile::P95 => {
            d.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
            d[p95_rank(d.len()) - 1]
        }
    }
}

/// Hausdorff distance, or its 95th-percentile variant.
pub fn hausdorff<T: Scalar>(t: &SurfaceSet<T>, p: &SurfaceSet<T>, percentile: Percentile) -> Result<T> {
    check_pair(t, p)?;
    let a = directed_stat(directed_distances(t, p), percentile);
    let b = directed_stat(directed_distances(p, t), percentile);
    Ok(a.max(b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassScore<T = f64> {
    pub class: TissueClass,
    pub dice: T,
    /// `None` when the class is empty in both volumes.
    pub hd95: Option<T>,
    pub asd: Option<T>,
    /// Set when the class is empty in exactly one volume and distances were
    /// replaced by the volume diagonal.
    pub worst_case: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegScore<T = f64> {
    pub classes: Vec<ClassScore<T>>,
    pub mean_dice: T,
    pub mean_hd95: Option<T>,
    pub mean_asd: Option<T>,
    pub qc: Vec<String>,
}

/// Per-class and mean metrics of a predicted segmentation against a reference.
pub fn score_case<T: Scalar>(truth: &LabelVolume<T>, pred: &LabelVolume<T>, unit: SurfaceUnit) -> Result<SegScore<T>> {
    if truth.dims() != pred.dims() || truth.spacing() != pred.spacing() {
        return Err(Error::InvalidArgument(
            "reference and prediction differ in dims or spacing".into(),
        ));
    }
    let d = truth.dims();
    let s = truth.spacing();
    let extent = |n: usize, step: T| T::from_count(n.saturating_sub(1)) * step;
    let diagonal = match unit {
        SurfaceUnit::Voxel => (0..3)
            .map(|k| extent([d.nx, d.ny, d.nz][k], T::one()))
            .map(|e| e * e)
            .sum::<T>()
            .sqrt(),
        SurfaceUnit::Millimetre => {
            let (ex, ey, ez) = (extent(d.nx, s.dx), extent(d.ny, s.dy), extent(d.nz, s.dz));
            (ex * ex + ey * ey + ez * ez).sqrt()
        }
    };
    let mut classes = Vec::with_capacity(3);
    let mut qc = Vec::new();
    for class in TissueClass::FOREGROUND {
        let tm = binary_mask(truth, class);
        let pm = binary_mask(pred, class);
        let dsc = dice(&tm, &pm)?;
        let score = match (tm.count() == 0, pm.count() == 0) {
            (true, true) => {
                qc.push(format!("{class}: empty in both volumes, distances skipped"));
                ClassScore { class, dice: dsc, hd95: None, asd: None, worst_case: false }
            }
            (true, false) | (false, true) => {
                qc.push(format!("{class}: empty in one volume, distances set to volume diagonal"));
                ClassScore { class, dice: dsc, hd95: Some(diagonal), asd: Some(diagonal), worst_case: true }
            }
            (false, false) => {
                let ts = surface_points(&tm, unit)?;
                let ps = surface_points(&pm, unit)?;
                ClassScore {
                    class,
                    dice: dsc,
                    hd95: Some(hausdorff(&ts, &ps, Percentile::P95)?),
                    asd: Some(asd(&ts, &ps)?),
                    worst_case: false,
                }
            }
        };
        classes.push(score);
    }
    let mean_of = |vals: Vec<T>| {
        (!vals.is_empty()).then(|| vals.iter().copied().sum::<T>() / T::from_count(vals.len()))
    };
    let mean_dice = classes.iter().map(|c| c.dice).sum::<T>() / T::from_count(classes.len());
    let mean_hd95 = mean_of(classes.iter().filter_map(|c| c.hd95).collect());
    let mean_asd = mean_of(classes.iter().filter_map(|c| c.asd).collect());
    Ok(SegScore { classes, mean_dice, mean_hd95, mean_asd, qc })
}
