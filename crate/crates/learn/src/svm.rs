//! One-vs-rest soft-margin SVMs trained by SMO, with Platt-calibrated outputs.
//!
//! The dual solver selects the maximal violating pair each iteration and
//! stops once the KKT gap falls below the tolerance. Platt parameters are fit
//! with the Newton method with backtracking of Lin, Lin and Weng on
//! prior-smoothed targets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, check_xy, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    /// exp(-gamma * |a - b|^2)
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d).exp()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelChoice {
    Linear,
    /// `None` uses 1 / n_features.
    Rbf { gamma: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelChoice,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, kernel: KernelChoice::Rbf { gamma: None }, tolerance: 1e-3, max_iter: 1_000_000 }
    }
}

/// A trained binary machine: f(x) = sum_i coef_i K(sv_i, x) - rho.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha_i * y_i of each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Primal weights, present for the linear kernel.
    pub weights: Option<Vec<f64>>,
    pub iterations: usize,
    /// Platt sigmoid P(y = 1 | f) = 1 / (1 + exp(a f + b)).
    pub platt_a: f64,
    pub platt_b: f64,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        let s: f64 = match &self.weights {
            Some(w) => w.iter().zip(x).map(|(a, b)| a * b).sum(),
            None => self
                .support_vectors
                .iter()
                .zip(&self.coef)
                .map(|(sv, c)| c * kernel.eval(sv, x))
                .sum(),
        };
        s - self.rho
    }

    pub fn probability(&self, f: f64) -> f64 {
        sigmoid_complement(self.platt_a * f + self.platt_b)
    }
}

/// 1 / (1 + exp(t)) without overflow.
fn sigmoid_complement(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub kernel: Kernel,
    pub n_features: usize,
    /// One machine per class, trained class-vs-rest.
    pub machines: Vec<BinarySvm>,
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
}

/// Dual SMO for labels in {-1, +1} on a precomputed kernel matrix.
fn smo(k: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize, class: usize) -> Result<Solution> {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    loop {
        let (mut gmax, mut gmin) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && !upper(alpha[t])) || (y[t] < 0.0 && !lower(alpha[t]));
            let in_low = (y[t] < 0.0 && !upper(alpha[t])) || (y[t] > 0.0 && !lower(alpha[t]));
            if in_up && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Convergence { class, iterations, gap });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(1e-12);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    Ok(Solution { alpha, rho, iterations })
}

/// Platt sigmoid parameters (a, b) for decision values `f` and labels `y`.
pub fn fit_platt(f: &[f64], positive: &[bool]) -> (f64, f64) {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        f.iter()
            .zip(&t)
            .map(|(&fi, &ti)| {
                let z = fi * a + b;
                if z >= 0.0 {
                    ti * z + (1.0 + (-z).exp()).ln()
                } else {
                    (ti - 1.0) * z + (1.0 + z.exp()).ln()
                }
            })
            .sum()
    };

    let (max_iter, min_step, sigma, eps) = (100, 1e-10, 1e-12, 1e-5);
    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&fi, &ti) in f.iter().zip(&t) {
            let z = fi * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += fi * fi * d2;
            h22 += d2;
            h21 += fi * d2;
            let d1 = ti - p;
            g1 += fi * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}

fn train_binary(x: &[Vec<f64>], k: &[Vec<f64>], positive: &[bool], kernel: &Kernel, params: &SvmParams, class: usize) -> Result<BinarySvm> {
    let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let sol = smo(k, &y, params.c, params.tolerance, params.max_iter, class)?;
    let mut support_vectors = Vec::new();
    let mut coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            coef.push(a * y[i]);
        }
    }
    let weights = matches!(kernel, Kernel::Linear).then(|| {
        let mut w = vec![0.0; x[0].len()];
        for (sv, c) in support_vectors.iter().zip(&coef) {
            for (wi, v) in w.iter_mut().zip(sv) {
                *wi += c * v;
            }
        }
        w
    });
    let mut m = BinarySvm {
        support_vectors,
        coef,
        rho: sol.rho,
        weights,
        iterations: sol.iterations,
        platt_a: 0.0,
        platt_b: 0.0,
    };
    let f: Vec<f64> = x.iter().map(|row| m.decision(kernel, row)).collect();
    let (a, b) = fit_platt(&f, positive);
    m.platt_a = a;
    m.platt_b = b;
    Ok(m)
}

/// Train one class-vs-rest machine per class. Rows should be standardized.
pub fn train_svm_ovr(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &SvmParams) -> Result<SvmModel> {
    let nf = check_xy(x, y, n_classes)?;
    if !(params.c > 0.0 && params.tolerance > 0.0) {
        return Err(Error::InvalidArgument("SVM needs C > 0 and tolerance > 0".into()));
    }
    let kernel = match params.kernel {
        KernelChoice::Linear => Kernel::Linear,
        KernelChoice::Rbf { gamma } => Kernel::Rbf { gamma: gamma.unwrap_or(1.0 / nf as f64) },
    };
    let gram: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| kernel.eval(a, b)).collect()).collect();
    let machines = (0..n_classes)
        .into_par_iter()
        .map(|c| {
            let positive: Vec<bool> = y.iter().map(|&l| l == c).collect();
            train_binary(x, &gram, &positive, &kernel, params, c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel { params: params.clone(), kernel, n_features: nf, machines })
}

impl SvmModel {
    /// Raw decision values, one column per class.
    pub fn decision_function(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_width(x, self.n_features, "SVM")?;
        Ok(x.iter()
            .map(|row| self.machines.iter().map(|m| m.decision(&self.kernel, row)).collect())
            .collect())
    }

    /// Calibrated per-class probabilities, renormalized to sum to 1.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let k = self.machines.len();
        Ok(self
            .decision_function(x)?
            .into_iter()
            .map(|f| {
                let p: Vec<f64> = f.iter().zip(&self.machines).map(|(&v, m)| m.probability(v)).collect();
                let s: f64 = p.iter().sum();
                if s > 0.0 && s.is_finite() {
                    p.iter().map(|v| v / s).collect()
                } else {
                    vec![1.0 / k as f64; k]
                }
            })
            .collect())
    }
}
