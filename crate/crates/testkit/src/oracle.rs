//! Independent brute-force reference computations for tests.
//!
//! Everything here works on plain slices and coordinates and never calls
//! into the library under test. Loop orders deliberately differ from the
//! library where the result is order-independent.

/// Cell lookup in an x-fastest grid.
fn at(data: &[bool], n: [usize; 3], x: usize, y: usize, z: usize) -> bool {
    data[(z * n[1] + y) * n[0] + x]
}

/// Foreground cells with a background (or out-of-grid) face neighbour.
/// `planar` restricts neighbours to the xy plane.
pub fn surface(data: &[bool], n: [usize; 3], planar: bool) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                if !at(data, n, x, y, z) {
                    continue;
                }
                let mut edge = x == 0 || y == 0 || x + 1 == n[0] || y + 1 == n[1];
                if !planar {
                    edge |= z == 0 || z + 1 == n[2];
                }
                if !edge {
                    edge = !at(data, n, x - 1, y, z)
                        || !at(data, n, x + 1, y, z)
                        || !at(data, n, x, y - 1, z)
                        || !at(data, n, x, y + 1, z);
                    if !planar {
                        edge |= !at(data, n, x, y, z - 1) || !at(data, n, x, y, z + 1);
                    }
                }
                if edge {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

pub fn dice(t: &[bool], p: &[bool]) -> f64 {
    let inter = t.iter().zip(p).filter(|(a, b)| **a && **b).count();
    let total = t.iter().filter(|v| **v).count() + p.iter().filter(|v| **v).count();
    if total == 0 {
        1.0
    } else {
        (2 * inter) as f64 / total as f64
    }
}

/// Nearest-neighbour distances from each point of `a` to the set `b`,
/// scanning `b` back to front.
pub fn nearest(a: &[[f64; 3]], b: &[[f64; 3]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for pa in a {
        let mut best = f64::INFINITY;
        for pb in b.iter().rev() {
            let d0 = pa[0] - pb[0];
            let d1 = pa[1] - pb[1];
            let d2 = pa[2] - pb[2];
            let sq = d0 * d0 + d1 * d1 + d2 * d2;
            if sq < best {
                best = sq;
            }
        }
        out.push(best.sqrt());
    }
    out
}

pub fn asd(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let mut fwd = 0.0;
    for d in nearest(a, b) {
        fwd += d;
    }
    let mut bwd = 0.0;
    for d in nearest(b, a) {
        bwd += d;
    }
    (fwd + bwd) / (a.len() + b.len()) as f64
}

/// Hausdorff distance at percentile 100 or 95 (nearest rank).
pub fn hausdorff(a: &[[f64; 3]], b: &[[f64; 3]], percentile: u32) -> f64 {
    let pick = |mut d: Vec<f64>| {
        d.sort_by(|x, y| x.total_cmp(y));
        let n = d.len();
        let rank = if percentile == 100 {
            n
        } else {
            let scaled = percentile as usize * n;
            scaled / 100 + usize::from(!scaled.is_multiple_of(100))
        };
        d[rank.max(1) - 1]
    };
    let ab = pick(nearest(a, b));
    let ba = pick(nearest(b, a));
    if ab > ba {
        ab
    } else {
        ba
    }
}

/// Label-grid slice lookup for the wall-thickness oracle (codes 0..=3).
fn code(labels: &[u8], nx: usize, x: i64, y: i64, ny: usize) -> Option<u8> {
    if x < 0 || y < 0 || x as usize >= nx || y as usize >= ny {
        None
    } else {
        Some(labels[y as usize * nx + x as usize])
    }
}

/// Wall-thickness distances of one slice: for every myocardium (2) pixel
/// touching cavity (3), the distance to the nearest non-myocardium,
/// non-cavity pixel touching myocardium. Returns (distances, mean, sample sd).
pub fn slice_wall_thickness(labels: &[u8], nx: usize, ny: usize, dx: f64, dy: f64) -> Option<(Vec<f64>, f64, f64)> {
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for y in 0..ny as i64 {
        for x in 0..nx as i64 {
            let c = code(labels, nx, x, y, ny).unwrap();
            let nbrs = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
                .map(|(a, b)| code(labels, nx, a, b, ny));
            if c == 2 && nbrs.contains(&Some(3)) {
                inner.push((x as f64, y as f64));
            }
            if c != 2 && c != 3 && nbrs.contains(&Some(2)) {
                outer.push((x as f64, y as f64));
            }
        }
    }
    if inner.is_empty() || outer.is_empty() {
        return None;
    }
    let d: Vec<f64> = inner
        .iter()
        .map(|&(ix, iy)| {
            outer
                .iter()
                .map(|&(ex, ey)| ((ix - ex) * dx).hypot((iy - ey) * dy))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let sd = if d.len() < 2 {
        0.0
    } else {
        (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((d, m, sd))
}

/// Spreadsheet-style recomputation of the four long-axis statistics from a
/// per-slice (mean, sd) table: max of means, sd of means, mean of sds, sd of sds.
pub fn long_axis_stats(table: &[(f64, f64)]) -> [f64; 4] {
    let sd = |v: &[f64]| {
        if v.len() < 2 {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let means: Vec<f64> = table.iter().map(|r| r.0).collect();
    let sds: Vec<f64> = table.iter().map(|r| r.1).collect();
    [
        means.iter().cloned().fold(f64::MIN, f64::max),
        sd(&means),
        sds.iter().sum::<f64>() / sds.len() as f64,
        sd(&sds),
    ]
}

/// Two-pass Bland-Altman and OLS statistics:
/// (bias, sd, loa_low, loa_high, r, slope, intercept).
pub fn bland_altman(auto: &[f64], reference: &[f64]) -> [f64; 7] {
    let n = auto.len() as f64;
    let mut sum_d = 0.0;
    for i in 0..auto.len() {
        sum_d += auto[i] - reference[i];
    }
    let bias = sum_d / n;
    let mut ss = 0.0;
    for i in 0..auto.len() {
        let e = auto[i] - reference[i] - bias;
        ss += e * e;
    }
    let sd = (ss / (n - 1.0)).sqrt();
    let ma = auto.iter().sum::<f64>() / n;
    let mr = reference.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_r = 0.0;
    let mut var_a = 0.0;
    for i in 0..auto.len() {
        cov += (auto[i] - ma) * (reference[i] - mr);
        var_r += (reference[i] - mr).powi(2);
        var_a += (auto[i] - ma).powi(2);
    }
    let slope = cov / var_r;
    [bias, sd, bias - 1.96 * sd, bias + 1.96 * sd, cov / (var_r * var_a).sqrt(), slope, ma - slope * mr]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_p95() {
        let a: Vec<[f64; 3]> = (0..20).map(|i| [i as f64, 0.0, 0.0]).collect();
        let b = vec![[0.0, 0.0, 0.0]];
        // a->b distances 0..19: rank 19 is 18.0; b->a is 0.
        assert_eq!(hausdorff(&a, &b, 95), 18.0);
        assert_eq!(hausdorff(&a, &b, 100), 19.0);
    }
}
