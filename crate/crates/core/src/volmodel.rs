//! Volumetric data model: label volumes, probability maps and binary masks.
//!
//! Voxels are stored x-fastest, then y, then z (slowest). Label codes are
//! fixed: 0 background, 1 right ventricle, 2 myocardium, 3 left ventricle.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-voxel simplex tolerance for probability maps.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum TissueClass {
    Background = 0,
    Rv = 1,
    Myocardium = 2,
    Lv = 3,
}

impl TissueClass {
    pub const ALL: [TissueClass; 4] = [
        TissueClass::Background,
        TissueClass::Rv,
        TissueClass::Myocardium,
        TissueClass::Lv,
    ];
    /// The three cardiac structures, in code order.
    pub const FOREGROUND: [TissueClass; 3] =
        [TissueClass::Rv, TissueClass::Myocardium, TissueClass::Lv];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueClass::Background => "BG",
            TissueClass::Rv => "RV",
            TissueClass::Myocardium => "MYO",
            TissueClass::Lv => "LV",
        }
    }
}

impl fmt::Display for TissueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CardiacPhase {
    Ed,
    Es,
}

impl CardiacPhase {
    pub fn name(self) -> &'static str {
        match self {
            CardiacPhase::Ed => "ED",
            CardiacPhase::Es => "ES",
        }
    }
}

impl fmt::Display for CardiacPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid extent in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.nx;
        let y = (idx / self.nx) % self.ny;
        let z = idx / (self.nx * self.ny);
        [x, y, z]
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Physical voxel size in millimetres; `dz` is the slice spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelSpacing<T = f64> {
    pub dx: T,
    pub dy: T,
    pub dz: T,
}

impl<T: Scalar> VoxelSpacing<T> {
    pub fn new(dx: T, dy: T, dz: T) -> Result<Self> {
        for (name, v) in [("dx", dx), ("dy", dy), ("dz", dz)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "spacing {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(VoxelSpacing { dx, dy, dz })
    }

    pub fn isotropic() -> Self {
        VoxelSpacing { dx: T::one(), dy: T::one(), dz: T::one() }
    }

    /// Voxel volume in mm^3.
    pub fn voxel_volume(&self) -> T {
        self.dx * self.dy * self.dz
    }

    pub fn cast<U: Scalar>(&self) -> VoxelSpacing<U> {
        VoxelSpacing {
            dx: U::from_f64_lossy(self.dx.to_f64_lossy()),
            dy: U::from_f64_lossy(self.dy.to_f64_lossy()),
            dz: U::from_f64_lossy(self.dz.to_f64_lossy()),
        }
    }
}

/// A 3D grid of tissue labels with physical spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume<T = f64> {
    dims: Dims,
    spacing: VoxelSpacing<T>,
    data: Vec<TissueClass>,
}

impl<T: Scalar> LabelVolume<T> {
    pub fn new(dims: Dims, spacing: VoxelSpacing<T>, data: Vec<TissueClass>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidArgument(format!(
                "label data has {} voxels, dims {dims} need {}",
                data.len(),
                dims.len()
            )));
        }
        Ok(LabelVolume { dims, spacing, data })
    }

    pub fn from_codes(dims: Dims, spacing: VoxelSpacing<T>, codes: &[u8]) -> Result<Self> {
        let data = codes
            .iter()
            .map(|&c| TissueClass::from_code(c).ok_or(Error::InvalidLabel(c as f64)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims, spacing, data)
    }

    pub fn filled(dims: Dims, spacing: VoxelSpacing<T>, class: TissueClass) -> Self {
        LabelVolume { dims, spacing, data: vec![class; dims.len()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> VoxelSpacing<T> {
        self.spacing
    }

    pub fn data(&self) -> &[TissueClass] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> TissueClass {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, class: TissueClass) {
        let idx = self.dims.index(x, y, z);
        self.data[idx] = class;
    }

    pub fn count(&self, class: TissueClass) -> usize {
        self.data.iter().filter(|&&c| c == class).count()
    }

    pub fn max_code(&self) -> u8 {
        self.data.iter().map(|c| c.code()).max().unwrap_or(0)
    }

    /// View of one short-axis slice.
    pub fn slice(&self, z: usize) -> LabelSlice<'_> {
        let n = self.dims.nx * self.dims.ny;
        LabelSlice {
            nx: self.dims.nx,
            ny: self.dims.ny,
            labels: &self.data[z * n..(z + 1) * n],
        }
    }

    pub fn with_spacing<U: Scalar>(&self, spacing: VoxelSpacing<U>) -> LabelVolume<U> {
        LabelVolume { dims: self.dims, spacing, data: self.data.clone() }
    }

    pub fn codes(&self) -> Vec<u8> {
        self.data.iter().map(|c| c.code()).collect()
    }
}

/// Borrowed 2D label slice, x-fastest.
#[derive(Clone, Copy, Debug)]
pub struct LabelSlice<'a> {
    pub nx: usize,
    pub ny: usize,
    pub labels: &'a [TissueClass],
}

impl<'a> LabelSlice<'a> {
    pub fn new(nx: usize, ny: usize, labels: &'a [TissueClass]) -> Result<Self> {
        if labels.len() != nx * ny {
            return Err(Error::InvalidArgument(format!(
                "slice of {nx}x{ny} needs {} labels, got {}",
                nx * ny,
                labels.len()
            )));
        }
        Ok(LabelSlice { nx, ny, labels })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> TissueClass {
        self.labels[x + self.nx * y]
    }

    /// In-bounds 4-neighbours of (x, y).
    pub fn neighbours(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> {
        let (nx, ny) = (self.nx, self.ny);
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(ox, oy)| {
                let (px, py) = (x as i64 + ox, y as i64 + oy);
                (px >= 0 && py >= 0 && (px as usize) < nx && (py as usize) < ny)
                    .then_some((px as usize, py as usize))
            })
    }
}

/// Per-voxel class probabilities, `classes` values per voxel stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap<T = f64> {
    dims: Dims,
    classes: usize,
    data: Vec<T>,
}

impl<T: Scalar> ProbabilityMap<T> {
    pub fn new(dims: Dims, classes: usize, data: Vec<T>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "probability map needs at least 2 classes, got {classes}"
            )));
        }
        if data.len() != dims.len() * classes {
            return Err(Error::InvalidArgument(format!(
                "probability data has {} values, expected {}",
                data.len(),
                dims.len() * classes
            )));
        }
        let tol = T::from_f64_lossy(SIMPLEX_TOLERANCE);
        for (i, voxel) in data.chunks_exact(classes).enumerate() {
            if voxel.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::InvalidArgument(format!(
                    "voxel {i}: probability outside [0, 1]"
                )));
            }
            let sum: T = voxel.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "voxel {i}: probabilities sum to {sum}"
                )));
            }
        }
        Ok(ProbabilityMap { dims, classes, data })
    }

    pub(crate) fn from_parts_unchecked(dims: Dims, classes: usize, data: Vec<T>) -> Self {
        ProbabilityMap { dims, classes, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn voxel(&self, idx: usize) -> &[T] {
        &self.data[idx * self.classes..(idx + 1) * self.classes]
    }

    pub fn voxels(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.classes)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims == other.dims && self.classes == other.classes
    }
}

/// Boolean mask over a volume (or a single slice when `planar`).
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask<T = f64> {
    dims: Dims,
    planar: bool,
    spacing: VoxelSpacing<T>,
    data: Vec<bool>,
}

impl<T: Scalar> BinaryMask<T> {
    pub fn new(dims: Dims, spacing: VoxelSpacing<T>, data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidArgument(format!(
                "mask data has {} cells, dims {dims} need {}",
                data.len(),
                dims.len()
            )));
        }
        Ok(BinaryMask { dims, planar: false, spacing, data })
    }

    /// A 2D mask; surface extraction uses 4-connectivity in-plane only.
    pub fn planar(nx: usize, ny: usize, spacing: VoxelSpacing<T>, data: Vec<bool>) -> Result<Self> {
        let mut mask = Self::new(Dims::new(nx, ny, 1), spacing, data)?;
        mask.planar = true;
        Ok(mask)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn is_planar(&self) -> bool {
        self.planar
    }

    pub fn spacing(&self) -> VoxelSpacing<T> {
        self.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Encode each voxel's label as a probability vector over `classes` classes.
pub fn one_hot<T: Scalar>(v: &LabelVolume<T>, classes: usize) -> Result<ProbabilityMap<T>> {
    if classes <= v.max_code() as usize || classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "{classes} classes cannot encode label code {}",
            v.max_code()
        )));
    }
    let mut data = vec![T::zero(); v.dims.len() * classes];
    for (i, c) in v.data.iter().enumerate() {
        data[i * classes + c.code() as usize] = T::one();
    }
    Ok(ProbabilityMap::from_parts_unchecked(v.dims, classes, data))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (k, &p) in values.iter().enumerate().skip(1) {
        if p > values[best] {
            best = k;
        }
    }
    best
}

/// Label each voxel with its most probable class (lowest code on ties).
pub fn argmax_labels<T: Scalar>(p: &ProbabilityMap<T>, spacing: VoxelSpacing<T>) -> Result<LabelVolume<T>> {
    let data = p
        .voxels()
        .map(|voxel| {
            let k = argmax(voxel);
            TissueClass::from_code(k as u8).ok_or(Error::InvalidLabel(k as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    LabelVolume::new(p.dims, spacing, data)
}

pub fn binary_mask<T: Scalar>(v: &LabelVolume<T>, class: TissueClass) -> BinaryMask<T> {
    BinaryMask {
        dims: v.dims,
        planar: false,
        spacing: v.spacing,
        data: v.data.iter().map(|&c| c == class).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> VoxelSpacing<f64> {
        VoxelSpacing::isotropic()
    }

    #[test]
    fn one_hot_single_lv_voxel() {
        let v = LabelVolume::from_codes(Dims::new(1, 1, 1), unit(), &[3]).unwrap();
        let p = one_hot(&v, 4).unwrap();
        assert_eq!(p.voxel(0), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_hot_background_volume() {
        let v = LabelVolume::filled(Dims::new(2, 2, 1), unit(), TissueClass::Background);
        let p = one_hot(&v, 4).unwrap();
        for voxel in p.voxels() {
            assert_eq!(voxel, &[1.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn one_hot_rejects_too_few_classes() {
        let v = LabelVolume::from_codes(Dims::new(2, 1, 1), unit(), &[0, 3]).unwrap();
        assert!(matches!(one_hot(&v, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn argmax_picks_largest_and_breaks_ties_low() {
        let p = ProbabilityMap::new(
            Dims::new(2, 1, 1),
            4,
            vec![0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25],
        )
        .unwrap();
        let v = argmax_labels(&p, unit()).unwrap();
        assert_eq!(v.data(), &[TissueClass::Lv, TissueClass::Background]);
    }

    #[test]
    fn probability_map_rejects_non_simplex() {
        let bad = ProbabilityMap::<f64>::new(Dims::new(1, 1, 1), 2, vec![0.6, 0.6]);
        assert!(bad.is_err());
        let neg = ProbabilityMap::<f64>::new(Dims::new(1, 1, 1), 2, vec![-0.1, 1.1]);
        assert!(neg.is_err());
    }

    #[test]
    fn from_codes_rejects_out_of_range() {
        let r = LabelVolume::<f64>::from_codes(Dims::new(1, 1, 1), unit(), &[4]);
        assert!(matches!(r, Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn masks_of_uniform_volume() {
        let v = LabelVolume::filled(Dims::new(3, 2, 2), unit(), TissueClass::Rv);
        assert!(binary_mask(&v, TissueClass::Rv).data().iter().all(|&b| b));
        assert!(binary_mask(&v, TissueClass::Lv).data().iter().all(|&b| !b));
    }

    #[test]
    fn spacing_must_be_positive() {
        assert!(VoxelSpacing::new(1.0, 0.0, 1.0).is_err());
        assert!(VoxelSpacing::new(1.0, 1.0, f64::NAN).is_err());
        assert!(VoxelSpacing::new(1.5_f32, 1.5, 8.0).is_ok());
    }

    fn volume_strategy() -> impl Strategy<Value = LabelVolume<f64>> {
        prop::collection::vec(0u8..4, 8 * 8 * 3).prop_map(|codes| {
            LabelVolume::from_codes(Dims::new(8, 8, 3), VoxelSpacing::isotropic(), &codes).unwrap()
        })
    }

    proptest! {
        #[test]
        fn one_hot_argmax_round_trip(v in volume_strategy()) {
            let p = one_hot(&v, 4).unwrap();
            prop_assert_eq!(argmax_labels(&p, v.spacing()).unwrap(), v);
        }

        #[test]
        fn class_masks_partition_volume(v in volume_strategy()) {
            let masks: Vec<_> = TissueClass::ALL.iter().map(|&c| binary_mask(&v, c)).collect();
            for i in 0..v.dims().len() {
                let hits = masks.iter().filter(|m| m.data()[i]).count();
                prop_assert_eq!(hits, 1);
            }
            for &c in &TissueClass::ALL {
                prop_assert_eq!(binary_mask(&v, c).count(), v.count(c));
            }
        }
    }
}
