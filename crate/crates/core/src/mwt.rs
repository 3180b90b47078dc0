//! Myocardial wall thickness from short-axis label slices.
//!
//! The inner contour is the set of myocardium pixels 4-adjacent to the LV
//! cavity. The outer contour is the set of non-myocardium, non-LV pixels
//! 4-adjacent to the myocardium, i.e. the first pixels outside the
//! epicardium. Measuring centre-to-centre between these two sets recovers the
//! rasterised wall thickness instead of under-reading it by one pixel.

use crate::error::{Error, Result};
use crate::scalar::{mean, sample_stdev, Scalar};
use crate::volmodel::{LabelSlice, LabelVolume, TissueClass};

/// Unit for reported distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceUnit {
    #[default]
    Millimetre,
    Pixel,
}

/// Inner and outer contour pixels of one slice, as (x, y).
#[derive(Clone, Debug, PartialEq)]
pub struct ContourPair<T = f64> {
    pub inner: Vec<(usize, usize)>,
    pub outer: Vec<(usize, usize)>,
    pub dx: T,
    pub dy: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MwtSliceResult<T = f64> {
    /// One entry per inner-contour pixel, in contour order.
    pub distances: Vec<T>,
    pub mean: T,
    pub stdev: T,
}

/// The four long-axis aggregates of per-slice wall thickness for one phase.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MwtFeatures<T = f64> {
    pub max_of_means: T,
    pub stdev_of_means: T,
    pub mean_of_stdevs: T,
    pub stdev_of_stdevs: T,
}

impl<T: Scalar> MwtFeatures<T> {
    pub fn as_array(&self) -> [T; 4] {
        [self.max_of_means, self.stdev_of_means, self.mean_of_stdevs, self.stdev_of_stdevs]
    }
}

/// Split a slice's myocardium boundary into inner and outer contours.
pub fn extract_contours<T: Scalar>(slice: &LabelSlice<'_>, dx: T, dy: T) -> Result<ContourPair<T>> {
    let is = |x, y, c| slice.get(x, y) == c;
    let mut has_myo = false;
    let mut has_lv = false;
    for &c in slice.labels {
        has_myo |= c == TissueClass::Myocardium;
        has_lv |= c == TissueClass::Lv;
    }
    if !has_myo {
        return Err(Error::EmptySlice);
    }
    if !has_lv {
        return Err(Error::NoInnerContour);
    }
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for y in 0..slice.ny {
        for x in 0..slice.nx {
            let own = slice.get(x, y);
            match own {
                TissueClass::Myocardium => {
                    if slice.neighbours(x, y).any(|(px, py)| is(px, py, TissueClass::Lv)) {
                        inner.push((x, y));
                    }
                }
                TissueClass::Lv => {}
                _ => {
                    if slice.neighbours(x, y).any(|(px, py)| is(px, py, TissueClass::Myocardium)) {
                        outer.push((x, y));
                    }
                }
            }
        }
    }
    if inner.is_empty() {
        return Err(Error::NoInnerContour);
    }
    if outer.is_empty() {
        return Err(Error::NoContour);
    }
    Ok(ContourPair { inner, outer, dx, dy })
}

/// Shortest distance from every inner pixel to the outer contour.
pub fn slice_mwt<T: Scalar>(c: &ContourPair<T>) -> Result<MwtSliceResult<T>> {
    if c.inner.is_empty() || c.outer.is_empty() {
        return Err(Error::NoContour);
    }
    let to_t = |v: usize| T::from_count(v);
    let distances: Vec<T> = c
        .inner
        .iter()
        .map(|&(ix, iy)| {
            c.outer
                .iter()
                .map(|&(ex, ey)| {
                    let ddx = (to_t(ix) - to_t(ex)) * c.dx;
                    let ddy = (to_t(iy) - to_t(ey)) * c.dy;
                    ddx * ddx + ddy * ddy
                })
                .fold(T::infinity(), T::min)
                .sqrt()
        })
        .collect();
    Ok(MwtSliceResult { mean: mean(&distances), stdev: sample_stdev(&distances), distances })
}

/// Long-axis statistics over the per-slice means and standard deviations.
pub fn aggregate_mwt<T: Scalar>(slices: &[MwtSliceResult<T>]) -> Result<MwtFeatures<T>> {
    if slices.is_empty() {
        return Err(Error::NoMyocardium);
    }
    let means: Vec<T> = slices.iter().map(|s| s.mean).collect();
    let stdevs: Vec<T> = slices.iter().map(|s| s.stdev).collect();
    Ok(MwtFeatures {
        max_of_means: means.iter().copied().fold(T::neg_infinity(), T::max),
        stdev_of_means: sample_stdev(&means),
        mean_of_stdevs: mean(&stdevs),
        stdev_of_stdevs: sample_stdev(&stdevs),
    })
}

/// A slice left out of the wall-thickness statistics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedSlice {
    pub slice: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeMwt<T = f64> {
    /// (slice index, result) for every contributing slice, in slice order.
    pub slices: Vec<(usize, MwtSliceResult<T>)>,
    pub features: MwtFeatures<T>,
    pub skipped: Vec<SkippedSlice>,
}

/// Wall-thickness statistics of a whole volume. Slices without myocardium
/// are skipped silently; slices without an inner or outer contour are
/// reported in `skipped`. Fails with `NoMyocardium` when nothing contributes.
pub fn volume_mwt<T: Scalar>(v: &LabelVolume<T>, unit: DistanceUnit) -> Result<VolumeMwt<T>> {
    let s = v.spacing();
    let (dx, dy) = match unit {
        DistanceUnit::Millimetre => (s.dx, s.dy),
        DistanceUnit::Pixel => (T::one(), T::one()),
    };
    let mut slices = Vec::new();
    let mut skipped = Vec::new();
    for z in 0..v.dims().nz {
        match extract_contours(&v.slice(z), dx, dy) {
            Ok(pair) => slices.push((z, slice_mwt(&pair)?)),
            Err(Error::EmptySlice) => {}
            Err(e) => skipped.push(SkippedSlice { slice: z, reason: e.to_string() }),
        }
    }
    let per_slice: Vec<MwtSliceResult<T>> = slices.iter().map(|(_, r)| r.clone()).collect();
    let features = aggregate_mwt(&per_slice)?;
    Ok(VolumeMwt { slices, features, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volmodel::TissueClass::{Background as B, Lv as L, Myocardium as M};

    fn pair(inner: Vec<(usize, usize)>, outer: Vec<(usize, usize)>) -> ContourPair<f64> {
        ContourPair { inner, outer, dx: 1.0, dy: 1.0 }
    }

    #[test]
    fn three_four_five() {
        let r = slice_mwt(&pair(vec![(0, 0)], vec![(3, 4)])).unwrap();
        assert_eq!(r.distances, vec![5.0]);
        assert_eq!(r.mean, 5.0);
        assert_eq!(r.stdev, 0.0);
    }

    #[test]
    fn minimum_over_outer() {
        let r = slice_mwt(&pair(vec![(0, 0)], vec![(3, 4), (0, 1)])).unwrap();
        assert_eq!(r.distances, vec![1.0]);
    }

    #[test]
    fn anisotropic_spacing() {
        let c = ContourPair { inner: vec![(0, 0)], outer: vec![(1, 1)], dx: 3.0, dy: 4.0 };
        assert_eq!(slice_mwt(&c).unwrap().distances, vec![5.0]);
    }

    #[test]
    fn single_pixel_wall_is_inner_only() {
        let labels = [L, M, B];
        let s = LabelSlice::new(3, 1, &labels).unwrap();
        let c = extract_contours(&s, 1.0, 1.0).unwrap();
        assert_eq!(c.inner, vec![(1, 0)]);
        assert!(!c.outer.contains(&(1, 0)));
        assert_eq!(c.outer, vec![(2, 0)]);
        assert_eq!(slice_mwt(&c).unwrap().distances, vec![1.0]);
    }

    #[test]
    fn empty_and_missing_lv_slices() {
        let bg = [B; 9];
        let s = LabelSlice::new(3, 3, &bg).unwrap();
        assert!(matches!(extract_contours(&s, 1.0, 1.0), Err(Error::EmptySlice)));
        let no_lv = [B, M, B];
        let s = LabelSlice::new(3, 1, &no_lv).unwrap();
        assert!(matches!(extract_contours(&s, 1.0, 1.0), Err(Error::NoInnerContour)));
        let no_outer = [L, M, M];
        let s = LabelSlice::new(3, 1, &no_outer).unwrap();
        assert!(matches!(extract_contours(&s, 1.0, 1.0), Err(Error::NoContour)));
    }

    #[test]
    fn aggregate_two_slices() {
        let s = |m: f64| MwtSliceResult { distances: vec![m], mean: m, stdev: 0.0 };
        let f = aggregate_mwt(&[s(3.0), s(5.0)]).unwrap();
        assert_eq!(f.max_of_means, 5.0);
        assert_eq!(f.stdev_of_means, 2f64.sqrt());
        assert_eq!(f.mean_of_stdevs, 0.0);
        assert_eq!(f.stdev_of_stdevs, 0.0);
        let same = aggregate_mwt(&[s(4.0), s(4.0), s(4.0)]).unwrap();
        assert_eq!(same.stdev_of_means, 0.0);
        let one = aggregate_mwt(&[s(4.0)]).unwrap();
        assert_eq!(one.stdev_of_means, 0.0);
        assert!(matches!(aggregate_mwt::<f64>(&[]), Err(Error::NoMyocardium)));
    }
}
