mod common;

use common::*;
use kscdl::classify::*;
use nalgebra::DVector;
use proptest::prelude::*;

fn separable(r: &mut rand_chacha::ChaCha8Rng, per: usize) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (label, sign) in [(0usize, 1.0), (1, -1.0)] {
        for _ in 0..per {
            x.push(DVector::from_vec(vec![sign + 0.1 * gaussian(r), 0.1 * gaussian(r)]));
            y.push(label);
        }
    }
    (x, y)
}

#[test]
fn separable_classes_are_learned_exactly() {
    let mut r = rng(70);
    let (x, y) = separable(&mut r, 20);
    let model = train(&x, &y, 1.0).unwrap();
    let eval = evaluate(&model, &x, &y).unwrap();
    assert_eq!(eval.accuracy, 1.0);
    assert_eq!(eval.confusion, vec![vec![20, 0], vec![0, 20]]);
    assert_eq!(model.predict(&x[3]).unwrap().0, 0);
}

#[test]
fn duplicating_the_data_keeps_the_decision_function() {
    let mut r = rng(71);
    let (x, y) = separable(&mut r, 15);
    let model = train(&x, &y, 1.0).unwrap();
    let x2: Vec<DVector<f64>> = x.iter().chain(&x).cloned().collect();
    let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
    let doubled = train(&x2, &y2, 1.0).unwrap();
    for _ in 0..50 {
        let p = DVector::from_vec(vec![2.0 * gaussian(&mut r), 2.0 * gaussian(&mut r)]);
        let (_, a) = model.predict(&p).unwrap();
        let (_, b) = doubled.predict(&p).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6, "{u} vs {v}");
        }
    }
}

#[test]
fn dual_coordinate_descent_matches_a_subgradient_solver() {
    let mut r = rng(72);
    let x: Vec<DVector<f64>> = (0..50).map(|_| DVector::from_fn(4, |_, _| gaussian(&mut r))).collect();
    let y: Vec<f64> = x.iter().map(|v| if v[0] + 0.5 * v[1] + 0.8 * gaussian(&mut r) > 0.0 { 1.0 } else { -1.0 }).collect();
    let sol = train_binary(&x, &y, 1.0).unwrap();
    assert!(sol.primal - sol.dual < GAP_TOL);
    assert!((primal_objective(&sol.weights, &x, &y, 1.0) - sol.primal).abs() < 1e-12);
    let reference = subgradient_svm(&x, &y, 1.0, 200_000);
    assert!((sol.primal - reference).abs() <= 1e-3 * reference, "{} vs {}", sol.primal, reference);
}

#[test]
fn ties_go_to_the_smallest_class() {
    assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
    assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    let zero = BinaryModel {
        weights: vec![1.0, -1.0],
        bias: 0.0,
        mean: vec![0.5, 0.5],
        scale: vec![1.0, 1.0],
    };
    let model = LinearModel {
        c: 1.0,
        feature_dim: 2,
        classes: vec![zero.clone(), zero.clone(), zero],
    };
    assert_eq!(model.predict(&DVector::from_vec(vec![0.5, 0.5])).unwrap().0, 0);
}

#[test]
fn constant_offsets_are_absorbed_by_standardization() {
    let mut r = rng(73);
    let (x, y) = separable(&mut r, 10);
    let shift = DVector::from_vec(vec![100.0, -40.0]);
    let moved: Vec<DVector<f64>> = x.iter().map(|v| v + &shift).collect();
    let a = train(&x, &y, 1.0).unwrap();
    let b = train(&moved, &y, 1.0).unwrap();
    for (p, q) in x.iter().zip(&moved) {
        let (sa, sb) = (a.predict(p).unwrap().1, b.predict(q).unwrap().1);
        for (u, v) in sa.iter().zip(&sb) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}

#[test]
fn training_is_bit_reproducible() {
    let mut r = rng(74);
    let x: Vec<DVector<f64>> = (0..30).map(|_| DVector::from_fn(5, |_, _| gaussian(&mut r))).collect();
    let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
    assert_eq!(train(&x, &y, 1.0).unwrap(), train(&x, &y, 1.0).unwrap());
}

#[test]
fn degenerate_inputs_are_rejected() {
    let x = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0])];
    assert!(matches!(train(&x, &[0, 0], 1.0), Err(kscdl::Error::DegenerateLabels(_))));
    assert!(matches!(train(&x, &[0, 2], 1.0), Err(kscdl::Error::DegenerateLabels(_))));
    assert!(train(&x, &[0, 1], 0.0).is_err());
    let model = train(&x, &[0, 1], 1.0).unwrap();
    assert!(model.predict(&DVector::from_vec(vec![1.0, 2.0])).is_err());
}

#[test]
fn evaluation_counts() {
    let e = Evaluation::from_predictions(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
    assert_eq!(e.accuracy, 1.0);
    let e = Evaluation::from_predictions(&[1], &[0], 2).unwrap();
    assert_eq!(e.accuracy, 0.0);
    let e = Evaluation::from_predictions(&[0, 0, 1, 1, 1], &[0, 1, 1, 1, 0], 2).unwrap();
    let total: usize = e.confusion.iter().flatten().sum();
    assert_eq!(total, 5);
    let trace: usize = (0..2).map(|i| e.confusion[i][i]).sum();
    assert_eq!(e.accuracy, trace as f64 / 5.0);
    assert_eq!(e.row_percentages()[0], vec![50.0, 50.0]);
}

#[test]
fn splitters_partition_the_samples() {
    let folds = k_fold(23, 5, 9).unwrap();
    let mut seen = vec![0; 23];
    for (train, test) in &folds {
        assert_eq!(train.len() + test.len(), 23);
        for &i in test {
            seen[i] += 1;
            assert!(!train.contains(&i));
        }
    }
    assert!(seen.iter().all(|&s| s == 1));
    assert_eq!(folds, k_fold(23, 5, 9).unwrap());
    assert!(k_fold(3, 5, 9).is_err());

    let groups: Vec<String> = ["b", "a", "b", "c", "a"].iter().map(|s| s.to_string()).collect();
    let splits = leave_one_group_out(&groups);
    let names: Vec<&str> = splits.iter().map(|s| s.0.as_str()).collect();
    assert_eq!(names, ["a", "b", "c"]);
    assert_eq!(splits[1].2, vec![0, 2]);
    assert_eq!(splits[1].1, vec![1, 3, 4]);
}

proptest! {
    #[test]
    fn positive_rescaling_keeps_the_argmax(scores in prop::collection::vec(-5.0f64..5.0, 1..8), scale in 0.01f64..100.0) {
        let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
        prop_assert_eq!(argmax(&scores), argmax(&scaled));
    }
}
