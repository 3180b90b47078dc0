use cmr_learn::mlp::MlpModel;
use cmr_learn::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of the mean loss with respect to every parameter.
fn numeric_gradient(model: &MlpModel, x: &[Vec<f64>], y: &[usize], h: f64) -> Vec<f64> {
    let theta = model.parameters();
    let mut probe = model.clone();
    (0..theta.len())
        .map(|k| {
            let mut t = theta.clone();
            t[k] = theta[k] + h;
            probe.set_parameters(&t);
            let up = probe.loss_and_gradient(x, y).0;
            t[k] = theta[k] - h;
            probe.set_parameters(&t);
            let down = probe.loss_and_gradient(x, y).0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for config in 0..50 {
        let inputs = rng.gen_range(1..=5);
        let classes = rng.gen_range(2..=4);
        let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=6)).collect();
        let params = MlpParams { hidden, ..Default::default() };
        let mut model = MlpModel::new(inputs, classes, &params, config);
        let theta: Vec<f64> = model.parameters().iter().map(|w| w + rng.gen_range(-0.3..0.3)).collect();
        model.set_parameters(&theta);
        let rows = rng.gen_range(1..=6);
        let x: Vec<Vec<f64>> = (0..rows).map(|_| (0..inputs).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let y: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
        let (_, analytic) = model.loss_and_gradient(&x, &y);
        let numeric = numeric_gradient(&model, &x, &y, 1e-6);
        let err = relative_error(&analytic, &numeric);
        worst = worst.max(err);
        assert!(err < 1e-4, "configuration {config}: relative error {err:e}");
    }
    println!("worst relative gradient error over 50 networks: {worst:e}");
}

#[test]
fn mlp_solves_xor() {
    let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let y = vec![0, 1, 1, 0];
    let params = MlpParams { hidden: vec![4], learning_rate: 0.1, epochs: 2000, ..Default::default() };
    let m = train_mlp(&x, &y, 2, &params, 0).unwrap();
    let p = m.predict_proba(&x).unwrap();
    for (row, &label) in p.iter().zip(&y) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(cmr_core::volmodel::argmax(row), label, "{p:?}");
    }
}

/// Points at least 0.5 away from the plane x0 - 2 x1 + 0.5 x2 + 0.3 = 0.
fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    while x.len() < n {
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let s = (p[0] - 2.0 * p[1] + 0.5 * p[2] + 0.3) / (1.0f64 + 4.0 + 0.25).sqrt();
        if s.abs() >= 0.5 {
            y.push(usize::from(s > 0.0));
            x.push(p);
        }
    }
    (x, y)
}

#[test]
fn linear_svm_separates_separable_fixture() {
    let (x, y) = separable(60, 3);
    let params = SvmParams { kernel: KernelChoice::Linear, ..Default::default() };
    let m = train_svm_ovr(&x, &y, 2, &params).unwrap();
    let f = m.decision_function(&x).unwrap();
    for (row, &label) in f.iter().zip(&y) {
        // Machine `label` must claim the point; the other must reject it.
        assert!(row[label] > 0.0 && row[1 - label] < 0.0, "{row:?} for class {label}");
    }
    let w = m.machines[1].weights.as_ref().unwrap();
    let cos = (w[0] - 2.0 * w[1] + 0.5 * w[2]) / ((w.iter().map(|v| v * v).sum::<f64>()).sqrt() * 5.25f64.sqrt());
    assert!(cos > 0.95, "normal direction cosine {cos}");
}

#[test]
fn duplicated_samples_leave_decision_function_unchanged() {
    let (x, y) = separable(40, 8);
    let params = SvmParams { kernel: KernelChoice::Linear, c: 1e3, tolerance: 1e-6, ..Default::default() };
    let once = train_svm_ovr(&x, &y, 2, &params).unwrap();
    let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
    let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
    let twice = train_svm_ovr(&x2, &y2, 2, &params).unwrap();
    let probes: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.3 - 3.0, 1.0 - i as f64 * 0.1, 0.5]).collect();
    let a = once.decision_function(&probes).unwrap();
    let b = twice.decision_function(&probes).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        for (u, v) in ra.iter().zip(rb) {
            assert!((u - v).abs() < 1e-3 * u.abs().max(1.0), "{u} vs {v}");
        }
    }
}

#[test]
fn calibrated_probability_is_monotone_in_decision_value() {
    let (x, y) = separable(50, 12);
    let m = train_svm_ovr(&x, &y, 2, &SvmParams::default()).unwrap();
    for machine in &m.machines {
        let mut last = 0.0;
        for k in -100..=100 {
            let p = machine.probability(k as f64 / 10.0);
            assert!(p > 0.0 && p < 1.0 && p >= last);
            last = p;
        }
    }
}

fn five_class() -> (Vec<Vec<f64>>, Vec<usize>) {
    let t = cmr_testkit::fixtures::separable_clusters(8, 4);
    let y = t.rows.iter().map(|r| r.group.unwrap().index()).collect();
    (t.matrix(), y)
}

#[test]
fn forest_rows_are_simplexes_and_match_hand_average() {
    let (x, y) = five_class();
    let m = train_random_forest(&x, &y, 5, &ForestParams { trees: 10, ..Default::default() }, 21).unwrap();
    let p = m.predict_proba(&x).unwrap();

    // Walk the serialized trees directly and average their leaf frequencies.
    let json: serde_json::Value = serde_json::to_value(&m).unwrap();
    let trees = json["trees"].as_array().unwrap();
    for (row, probs) in x.iter().zip(&p) {
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&v| v >= 0.0));
        let mut avg = [0.0; 5];
        for tree in trees {
            let nodes = tree["nodes"].as_array().unwrap();
            let mut i = 0;
            let counts = loop {
                let node = &nodes[i];
                if let Some(leaf) = node.get("Leaf") {
                    break leaf["counts"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect::<Vec<_>>();
                }
                let s = &node["Split"];
                let f = s["feature"].as_u64().unwrap() as usize;
                i = if row[f] <= s["threshold"].as_f64().unwrap() { s["left"].as_u64().unwrap() } else { s["right"].as_u64().unwrap() } as usize;
            };
            let total: f64 = counts.iter().sum();
            for (a, c) in avg.iter_mut().zip(&counts) {
                *a += c / total / trees.len() as f64;
            }
        }
        for (a, b) in avg.iter().zip(probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn trainings_are_seed_deterministic() {
    let (x, y) = five_class();
    let rf = |seed| serde_json::to_vec(&train_random_forest(&x, &y, 5, &ForestParams { trees: 20, ..Default::default() }, seed).unwrap()).unwrap();
    assert_eq!(rf(5), rf(5));
    assert_ne!(rf(5), rf(6));
    let svm = || serde_json::to_vec(&train_svm_ovr(&x, &y, 5, &SvmParams::default()).unwrap()).unwrap();
    assert_eq!(svm(), svm());
    let mlp = |seed| serde_json::to_vec(&train_mlp(&x, &y, 5, &MlpParams { epochs: 50, ..Default::default() }, seed).unwrap()).unwrap();
    assert_eq!(mlp(1), mlp(1));
    assert_ne!(mlp(1), mlp(2));
}

proptest! {
    #[test]
    fn soft_vote_argmax_invariant_to_weight_scale(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 2),
        w in (0.01f64..1.0, 0.01f64..1.0),
        k in 0.01f64..100.0,
    ) {
        let norm = |r: &Vec<f64>| { let s: f64 = r.iter().sum::<f64>() + 1e-9; r.iter().map(|v| (v + 1e-9 / 5.0) / s).collect::<Vec<f64>>() };
        let a = vec![norm(&rows[0])];
        let b = vec![norm(&rows[1])];
        let base = soft_vote(&[a.clone(), b.clone()], &[w.0, w.1]).unwrap();
        let scaled = soft_vote(&[a, b], &[k * w.0, k * w.1]).unwrap();
        prop_assert!((base[0].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (u, v) in base[0].iter().zip(&scaled[0]) {
            prop_assert!((u - v).abs() < 1e-12);
        }
        let top = cmr_core::volmodel::argmax(&base[0]);
        let m = base[0][top];
        if base[0].iter().filter(|&&v| (m - v).abs() < 1e-9).count() == 1 {
            prop_assert_eq!(top, cmr_core::volmodel::argmax(&scaled[0]));
        }
    }
}
