//! Bland-Altman agreement, Pearson correlation and least-squares fit of
//! automatic measurements against reference measurements.

use crate::error::{Error, Result};
use crate::scalar::{mean, Scalar};

/// Multiplier of the difference standard deviation for the limits of agreement.
pub const LOA_Z: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgreementResult<T = f64> {
    pub n: usize,
    /// Mean of auto - ref.
    pub bias: T,
    /// Sample standard deviation of the differences.
    pub sd_diff: T,
    pub loa_low: T,
    pub loa_high: T,
    /// `None` when either series has zero variance.
    pub pearson_r: Option<T>,
    /// Fit of auto = slope * ref + intercept; `None` when ref is constant.
    pub slope: Option<T>,
    pub intercept: Option<T>,
}

fn check<T: Scalar>(auto: &[T], reference: &[T]) -> Result<()> {
    if auto.len() != reference.len() {
        return Err(Error::InvalidArgument(format!(
            "series lengths differ: {} vs {}",
            auto.len(),
            reference.len()
        )));
    }
    if auto.len() < 2 {
        return Err(Error::InvalidArgument("agreement needs at least two pairs".into()));
    }
    if auto.iter().chain(reference).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contain non-finite values".into()));
    }
    Ok(())
}

pub fn bland_altman<T: Scalar>(auto: &[T], reference: &[T]) -> Result<AgreementResult<T>> {
    check(auto, reference)?;
    let n = auto.len();
    let nm1 = T::from_count(n - 1);
    let diffs: Vec<T> = auto.iter().zip(reference).map(|(&a, &r)| a - r).collect();
    let bias = mean(&diffs);
    let sd_diff = (diffs.iter().map(|&d| (d - bias) * (d - bias)).sum::<T>() / nm1).sqrt();
    let half_width = T::from_f64_lossy(LOA_Z) * sd_diff;

    let (ma, mr) = (mean(auto), mean(reference));
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&a, &r) in auto.iter().zip(reference) {
        let (dx, dy) = (r - mr, a - ma);
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    let zero = T::zero();
    let pearson_r = (sxx > zero && syy > zero).then(|| sxy / (sxx * syy).sqrt());
    let slope = (sxx > zero).then(|| sxy / sxx);
    let intercept = slope.map(|s| ma - s * mr);
    Ok(AgreementResult {
        n,
        bias,
        sd_diff,
        loa_low: bias - half_width,
        loa_high: bias + half_width,
        pearson_r,
        slope,
        intercept,
    })
}

/// Fraction of pairs whose difference lies within the limits of agreement.
pub fn percent_within_loa<T: Scalar>(auto: &[T], reference: &[T]) -> Result<T> {
    let r = bland_altman(auto, reference)?;
    let inside = auto
        .iter()
        .zip(reference)
        .filter(|(&a, &b)| {
            let d = a - b;
            d >= r.loa_low && d <= r.loa_high
        })
        .count();
    Ok(T::from_count(inside) / T::from_count(r.n))
}

/// (mean of pair, difference) points of a Bland-Altman plot.
pub fn plot_points<T: Scalar>(auto: &[T], reference: &[T]) -> Result<Vec<(T, T)>> {
    check(auto, reference)?;
    let two = T::from_count(2);
    Ok(auto.iter().zip(reference).map(|(&a, &r)| ((a + r) / two, a - r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series() {
        let x = [1.0, 2.0, 3.0];
        let r = bland_altman(&x, &x).unwrap();
        assert_eq!((r.bias, r.sd_diff, r.loa_low, r.loa_high), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.pearson_r, Some(1.0));
        assert_eq!(r.slope, Some(1.0));
        assert_eq!(r.intercept, Some(0.0));
        assert_eq!(percent_within_loa(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn constant_offset() {
        let x = [1.0, 2.0, 3.0, 7.5];
        let y: Vec<f64> = x.iter().map(|v| v + 2.0).collect();
        let r = bland_altman(&y, &x).unwrap();
        assert_eq!(r.bias, 2.0);
        assert_eq!(r.sd_diff, 0.0);
        assert_eq!(percent_within_loa(&y, &x).unwrap(), 1.0);
    }

    #[test]
    fn outlier_falls_outside() {
        let reference: Vec<f64> = (0..20).map(|i| 50.0 + i as f64).collect();
        let mut auto: Vec<f64> = reference.iter().enumerate().map(|(i, v)| v + [0.5, -0.5][i % 2]).collect();
        auto[7] += 40.0;
        assert!(percent_within_loa(&auto, &reference).unwrap() < 1.0);
    }

    #[test]
    fn degenerate_and_invalid() {
        let r = bland_altman(&[1.0, 2.0], &[3.0, 3.0]).unwrap();
        assert_eq!((r.pearson_r, r.slope, r.intercept), (None, None, None));
        assert!(bland_altman(&[1.0], &[1.0]).is_err());
        assert!(bland_altman(&[1.0, 2.0], &[1.0]).is_err());
        assert!(bland_altman(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }
}
