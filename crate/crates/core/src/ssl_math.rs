//! Forward evaluation of the semi-supervised segmentation losses: soft Dice
//! against labels, temperature sharpening into pseudo-labels, and the
//! cross-decoder MSE consistency term.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volmodel::{argmax, LabelVolume, ProbabilityMap};

/// Additive smoothing in the soft Dice numerator and denominator.
pub const DICE_SMOOTHING: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharpenConfig<T = f64> {
    pub temperature: T,
}

impl<T: Scalar> SharpenConfig<T> {
    pub fn new(temperature: T) -> Result<Self> {
        if !(temperature > T::zero() && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sharpening temperature must be positive, got {temperature}"
            )));
        }
        Ok(SharpenConfig { temperature })
    }
}

impl<T: Scalar> Default for SharpenConfig<T> {
    fn default() -> Self {
        SharpenConfig { temperature: T::from_f64_lossy(0.1) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sharpened<T = f64> {
    pub map: ProbabilityMap<T>,
    /// Voxels whose powered probabilities underflowed and were replaced by
    /// the one-hot argmax.
    pub underflow_voxels: usize,
}

/// Raise each probability to 1/T and renormalise per voxel.
pub fn sharpen<T: Scalar>(p: &ProbabilityMap<T>, cfg: &SharpenConfig<T>) -> Sharpened<T> {
    let exponent = T::one() / cfg.temperature;
    let classes = p.classes();
    let mut data = Vec::with_capacity(p.data().len());
    let mut underflow_voxels = 0;
    let mut powered = vec![T::zero(); classes];
    for voxel in p.voxels() {
        for (dst, &v) in powered.iter_mut().zip(voxel) {
            *dst = v.powf(exponent);
        }
        let sum: T = powered.iter().copied().sum();
        if sum.is_normal() {
            data.extend(powered.iter().map(|&v| v / sum));
        } else {
            underflow_voxels += 1;
            let k = argmax(voxel);
            data.extend((0..classes).map(|c| if c == k { T::one() } else { T::zero() }));
        }
    }
    Sharpened {
        map: ProbabilityMap::from_parts_unchecked(p.dims(), classes, data),
        underflow_voxels,
    }
}

/// 1 minus the class-mean soft Dice between probabilities and one-hot labels.
pub fn dice_loss<T: Scalar>(pred: &ProbabilityMap<T>, truth: &LabelVolume<T>) -> Result<T> {
    if pred.dims() != truth.dims() {
        return Err(Error::InvalidArgument(format!(
            "prediction dims {} differ from label dims {}",
            pred.dims(),
            truth.dims()
        )));
    }
    let classes = pred.classes();
    if truth.max_code() as usize >= classes {
        return Err(Error::InvalidArgument(format!(
            "label code {} outside {classes} predicted classes",
            truth.max_code()
        )));
    }
    let mut inter = vec![T::zero(); classes];
    let mut p_sum = vec![T::zero(); classes];
    let mut t_sum = vec![T::zero(); classes];
    for (voxel, label) in pred.voxels().zip(truth.data()) {
        let k = label.code() as usize;
        for c in 0..classes {
            p_sum[c] = p_sum[c] + voxel[c];
        }
        inter[k] = inter[k] + voxel[k];
        t_sum[k] = t_sum[k] + T::one();
    }
    let eps = T::from_f64_lossy(DICE_SMOOTHING);
    let two = T::from_count(2);
    let mean_dice = (0..classes)
        .map(|c| (two * inter[c] + eps) / (p_sum[c] + t_sum[c] + eps))
        .sum::<T>()
        / T::from_count(classes);
    Ok(T::one() - mean_dice)
}

/// Mean squared difference over all voxels and classes.
pub fn mse_consistency<T: Scalar>(pseudo: &ProbabilityMap<T>, prob: &ProbabilityMap<T>) -> Result<T> {
    if !pseudo.same_shape(prob) {
        return Err(Error::InvalidArgument("probability maps differ in shape".into()));
    }
    let n = pseudo.data().len();
    let ss: T = pseudo
        .data()
        .iter()
        .zip(prob.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(ss / T::from_count(n))
}

/// Outputs of the main decoder and the two auxiliary decoders.
#[derive(Clone, Debug)]
pub struct DecoderOutputs<T = f64> {
    maps: [ProbabilityMap<T>; 3],
}

impl<T: Scalar> DecoderOutputs<T> {
    pub fn new(main: ProbabilityMap<T>, aux_a: ProbabilityMap<T>, aux_b: ProbabilityMap<T>) -> Result<Self> {
        if !(main.same_shape(&aux_a) && main.same_shape(&aux_b)) {
            return Err(Error::InvalidArgument("decoder outputs differ in shape".into()));
        }
        Ok(DecoderOutputs { maps: [main, aux_a, aux_b] })
    }

    pub fn maps(&self) -> &[ProbabilityMap<T>; 3] {
        &self.maps
    }
}

/// One ordered (pseudo-label source, probability target) consistency term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairTerm<T = f64> {
    pub source: usize,
    pub target: usize,
    pub mse: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyBreakdown<T = f64> {
    pub pairs: Vec<PairTerm<T>>,
    pub loss: T,
    pub underflow_voxels: usize,
}

/// Pseudo-labels of each decoder against the probability maps of the other
/// two: the six ordered pair terms and their mean.
pub fn cc_breakdown<T: Scalar>(outs: &DecoderOutputs<T>, cfg: &SharpenConfig<T>) -> Result<ConsistencyBreakdown<T>> {
    let sharpened: Vec<Sharpened<T>> = outs.maps.iter().map(|m| sharpen(m, cfg)).collect();
    let mut pairs = Vec::with_capacity(6);
    for (i, pseudo) in sharpened.iter().enumerate() {
        for (j, prob) in outs.maps.iter().enumerate() {
            if i != j {
                pairs.push(PairTerm { source: i, target: j, mse: mse_consistency(&pseudo.map, prob)? });
            }
        }
    }
    // Summing in sorted order makes the mean exactly permutation invariant.
    let mut terms: Vec<T> = pairs.iter().map(|p| p.mse).collect();
    terms.sort_by(|a, b| a.partial_cmp(b).expect("finite mse"));
    let loss = terms.into_iter().sum::<T>() / T::from_count(pairs.len());
    Ok(ConsistencyBreakdown {
        pairs,
        loss,
        underflow_voxels: sharpened.iter().map(|s| s.underflow_voxels).sum(),
    })
}

pub fn cc_unsupervised_loss<T: Scalar>(outs: &DecoderOutputs<T>, cfg: &SharpenConfig<T>) -> Result<T> {
    Ok(cc_breakdown(outs, cfg)?.loss)
}
