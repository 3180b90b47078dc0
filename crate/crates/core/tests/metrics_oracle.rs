use cmr_core::segmetrics::{asd, dice, hausdorff, surface_points, Percentile, SurfaceUnit};
use cmr_core::{BinaryMask, Dims, VoxelSpacing};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mask(rng: &mut ChaCha8Rng, n: [usize; 3]) -> Vec<bool> {
    // Blobby masks: a random box plus salt noise, so surfaces are non-trivial.
    let lo: Vec<usize> = n.iter().map(|&k| rng.gen_range(0..k)).collect();
    let hi: Vec<usize> = (0..3).map(|i| rng.gen_range(lo[i]..n[i]) + 1).collect();
    let density = rng.gen_range(0.0..0.3);
    let mut data = vec![false; n[0] * n[1] * n[2]];
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                let inside = (lo[0]..hi[0]).contains(&x) && (lo[1]..hi[1]).contains(&y) && (lo[2]..hi[2]).contains(&z);
                data[(z * n[1] + y) * n[0] + x] = inside ^ rng.gen_bool(density);
            }
        }
    }
    if !data.iter().any(|&b| b) {
        data[0] = true;
    }
    data
}

fn to_points(pts: &[[usize; 3]], scale: [f64; 3]) -> Vec<[f64; 3]> {
    pts.iter()
        .map(|p| [p[0] as f64 * scale[0], p[1] as f64 * scale[1], p[2] as f64 * scale[2]])
        .collect()
}

#[test]
fn two_hundred_random_pairs_match_brute_force_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let n = [rng.gen_range(1..=16), rng.gen_range(1..=16), rng.gen_range(1..=16)];
        let (unit, scale, spacing) = if case % 2 == 0 {
            (SurfaceUnit::Voxel, [1.0; 3], VoxelSpacing::new(1.5, 1.5, 8.0).unwrap())
        } else {
            (SurfaceUnit::Millimetre, [1.5, 1.25, 8.0], VoxelSpacing::new(1.5, 1.25, 8.0).unwrap())
        };
        let t = random_mask(&mut rng, n);
        let p = random_mask(&mut rng, n);
        let dims = Dims::new(n[0], n[1], n[2]);
        let tm = BinaryMask::new(dims, spacing, t.clone()).unwrap();
        let pm = BinaryMask::new(dims, spacing, p.clone()).unwrap();

        let ts = surface_points(&tm, unit).unwrap();
        let ps = surface_points(&pm, unit).unwrap();
        let ot = to_points(&cmr_testkit::oracle::surface(&t, n, false), scale);
        let op = to_points(&cmr_testkit::oracle::surface(&p, n, false), scale);
        assert_eq!(ts.points, ot, "case {case}: truth surface");
        assert_eq!(ps.points, op, "case {case}: prediction surface");

        assert_eq!(dice(&tm, &pm).unwrap().to_bits(), cmr_testkit::oracle::dice(&t, &p).to_bits());
        assert_eq!(asd(&ts, &ps).unwrap().to_bits(), cmr_testkit::oracle::asd(&ot, &op).to_bits(), "case {case}: asd");
        assert_eq!(
            hausdorff(&ts, &ps, Percentile::Max).unwrap().to_bits(),
            cmr_testkit::oracle::hausdorff(&ot, &op, 100).to_bits(),
            "case {case}: hd100"
        );
        assert_eq!(
            hausdorff(&ts, &ps, Percentile::P95).unwrap().to_bits(),
            cmr_testkit::oracle::hausdorff(&ot, &op, 95).to_bits(),
            "case {case}: hd95"
        );
    }
}

#[test]
fn planar_masks_use_four_connectivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = [rng.gen_range(1..=16), rng.gen_range(1..=16), 1];
        let data = random_mask(&mut rng, n);
        let m = BinaryMask::planar(n[0], n[1], VoxelSpacing::<f64>::isotropic(), data.clone()).unwrap();
        let s = surface_points(&m, SurfaceUnit::Voxel).unwrap();
        assert_eq!(s.points, to_points(&cmr_testkit::oracle::surface(&data, n, true), [1.0; 3]));
    }
}

#[test]
fn solid_cube_shell() {
    let n = [5, 5, 5];
    let mut data = vec![false; 125];
    for z in 1..4 {
        for y in 1..4 {
            for x in 1..4 {
                data[(z * 5 + y) * 5 + x] = true;
            }
        }
    }
    let m = BinaryMask::new(Dims::new(5, 5, 5), VoxelSpacing::<f64>::isotropic(), data.clone()).unwrap();
    let s = surface_points(&m, SurfaceUnit::Voxel).unwrap();
    assert_eq!(s.len(), 26);
    assert!(!s.points.contains(&[2.0, 2.0, 2.0]));
    assert_eq!(cmr_testkit::oracle::surface(&data, n, false).len(), 26);
}

#[derive(Debug, Clone)]
struct Pair {
    n: [usize; 3],
    t: Vec<bool>,
    p: Vec<bool>,
    shift: [usize; 3],
}

fn pair_strategy() -> impl Strategy<Value = Pair> {
    (any::<u64>(), 2usize..=8, 2usize..=8, 1usize..=6).prop_map(|(seed, nx, ny, nz)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = [nx, ny, nz];
        let t = random_mask(&mut rng, n);
        let p = random_mask(&mut rng, n);
        let shift = [rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..3)];
        Pair { n, t, p, shift }
    })
}

/// Embed `data` into a grid padded by 3 voxels on every side, offset by `shift`.
fn embed(data: &[bool], n: [usize; 3], shift: [usize; 3]) -> (Dims, Vec<bool>) {
    let m = [n[0] + 6, n[1] + 6, n[2] + 6];
    let mut out = vec![false; m[0] * m[1] * m[2]];
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                let (a, b, c) = (x + shift[0], y + shift[1], z + shift[2]);
                out[(c * m[1] + b) * m[0] + a] = data[(z * n[1] + y) * n[0] + x];
            }
        }
    }
    (Dims::new(m[0], m[1], m[2]), out)
}

fn metrics(dims: Dims, t: &[bool], p: &[bool]) -> [f64; 4] {
    let tm = BinaryMask::new(dims, VoxelSpacing::<f64>::isotropic(), t.to_vec()).unwrap();
    let pm = BinaryMask::new(dims, VoxelSpacing::<f64>::isotropic(), p.to_vec()).unwrap();
    let ts = surface_points(&tm, SurfaceUnit::Voxel).unwrap();
    let ps = surface_points(&pm, SurfaceUnit::Voxel).unwrap();
    [
        dice(&tm, &pm).unwrap(),
        asd(&ts, &ps).unwrap(),
        hausdorff(&ts, &ps, Percentile::Max).unwrap(),
        hausdorff(&ts, &ps, Percentile::P95).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metric_properties(pair in pair_strategy()) {
        let dims = Dims::new(pair.n[0], pair.n[1], pair.n[2]);
        let [d, a, h100, h95] = metrics(dims, &pair.t, &pair.p);
        let [d_rev, a_rev, h100_rev, h95_rev] = metrics(dims, &pair.p, &pair.t);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, d_rev);
        prop_assert_eq!(h100, h100_rev);
        prop_assert_eq!(h95, h95_rev);
        // The two directed sums are added in the opposite order when swapped.
        prop_assert!((a - a_rev).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a <= h100 + 1e-12);
        prop_assert!(h95 <= h100);

        // Translate both masks by the same offset inside a padded grid, once
        // with zero shift and once with the drawn shift: metrics must agree.
        let (pd, t0) = embed(&pair.t, pair.n, [3, 3, 3]);
        let (_, p0) = embed(&pair.p, pair.n, [3, 3, 3]);
        let s = [pair.shift[0] + 1, pair.shift[1] + 1, pair.shift[2] + 1];
        let (_, t1) = embed(&pair.t, pair.n, s);
        let (_, p1) = embed(&pair.p, pair.n, s);
        let base = metrics(pd, &t0, &p0);
        let moved = metrics(pd, &t1, &p1);
        prop_assert_eq!(base[0], moved[0]);
        prop_assert_eq!(base[2], moved[2]);
        prop_assert_eq!(base[3], moved[3]);
        prop_assert!((base[1] - moved[1]).abs() <= 1e-12 * base[1].max(1.0));
    }
}
