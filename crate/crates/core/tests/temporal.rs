mod common;

use common::*;
use kscdl::intrinsic::Dictionary;
use kscdl::shape::ShapePoint;
use kscdl::temporal::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn series(codes: DMatrix<f64>) -> SparseSeries {
    let w = codes.ncols();
    SparseSeries::new(codes, vec![w], vec!["s".into()]).unwrap()
}

fn matrix_strategy(max_rows: usize, width: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_rows).prop_flat_map(move |rows| {
        prop::collection::vec(-2.0f64..2.0, rows * width).prop_map(move |v| DMatrix::from_row_slice(rows, width, &v))
    })
}

fn valid_path(path: &[(usize, usize)], n: usize, m: usize) -> bool {
    path.first() == Some(&(0, 0))
        && path.last() == Some(&(n - 1, m - 1))
        && path.windows(2).all(|p| {
            let (di, dj) = (p[1].0 - p[0].0, p[1].1 - p[0].1);
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dtw_matches_path_enumeration(a in matrix_strategy(6, 3), b in matrix_strategy(6, 3)) {
        let (cost, path) = dtw_matrices(&a, &b).unwrap();
        prop_assert_eq!(cost, brute_force_dtw(&a, &b));
        prop_assert!(valid_path(&path, a.nrows(), b.nrows()));
        prop_assert_eq!(path_cost(&a, &b, &path), cost);
        prop_assert!((dtw_matrices(&b, &a).unwrap().0 - cost).abs() < 1e-12);
    }

    #[test]
    fn ftp_matches_a_naive_dft(codes in matrix_strategy(40, 2), levels in 1usize..5, coeffs in 1usize..6) {
        let f = ftp_matrix(&codes, levels, coeffs).unwrap();
        prop_assert_eq!(f.values.len(), ftp_length(2, levels, coeffs));
        let l = codes.nrows();
        let mut idx = 0;
        for level in 0..levels {
            let parts = 1usize << level;
            for s in 0..parts {
                let (start, end) = (s * l / parts, (s + 1) * l / parts);
                for c in 0..2 {
                    let x: Vec<f64> = (start..end).map(|t| codes[(t, c)]).collect();
                    for k in 0..coeffs {
                        let want = if x.is_empty() { 0.0 } else { dft_magnitude(&x, x.len().max(coeffs), k) / x.len() as f64 };
                        prop_assert!((f.values[idx] - want).abs() < 1e-12);
                        idx += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn ftp_length_does_not_depend_on_duration(l1 in 1usize..80, l2 in 1usize..80) {
        let a = ftp_matrix(&DMatrix::from_element(l1, 8, 0.3), 6, 4).unwrap();
        let b = ftp_matrix(&DMatrix::from_element(l2, 8, 0.3), 6, 4).unwrap();
        prop_assert_eq!(a.values.len(), 2016);
        prop_assert_eq!(b.values.len(), 2016);
    }
}

#[test]
fn displacement_blocks_sum_to_zero() {
    let mut r = rng(60);
    let codes = DMatrix::from_fn(7, 5, |_, _| gaussian(&mut r));
    let mut codes = codes;
    for mut row in codes.row_iter_mut() {
        let s = row.columns(0, 2).sum();
        row[0] += 1.0 - s;
        let s = row.columns(2, 3).sum();
        row[2] += 1.0 - s;
    }
    let s = SparseSeries::new(codes, vec![2, 3], vec!["a".into(), "b".into()]).unwrap();
    let d = displacement_series(&s).unwrap();
    assert_eq!(d.len(), 6);
    assert!(d.block_sums().amax() < 2e-6);
    let constant = series(DMatrix::from_element(4, 3, 0.25));
    assert_eq!(displacement_series(&constant).unwrap().codes.amax(), 0.0);
    let two = series(DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.6, 0.4]));
    let diff = displacement_series(&two).unwrap();
    assert!((diff.codes.row(0) - two.codes.row(1) + two.codes.row(0)).amax() < 1e-15);
    assert!(displacement_series(&series(DMatrix::from_element(1, 2, 0.5))).is_err());
}

#[test]
fn time_shift_keeps_level_zero_magnitudes() {
    let l = 24;
    let x = DMatrix::from_fn(l, 1, |t, _| (2.0 * std::f64::consts::PI * 3.0 * t as f64 / l as f64).sin() + 0.5);
    let shifted = DMatrix::from_fn(l, 1, |t, _| x[((t + 5) % l, 0)]);
    let a = ftp_matrix(&x, 1, 4).unwrap();
    let b = ftp_matrix(&shifted, 1, 4).unwrap();
    assert!((a.values - b.values).amax() < 1e-8);
}

#[test]
fn constant_series_has_only_a_dc_term() {
    let f = ftp_matrix(&DMatrix::from_element(13, 1, -0.7), 1, 4).unwrap();
    assert!((f.values[0] - 0.7).abs() < 1e-12);
    assert!(f.values.rows(1, 3).amax() < 1e-12);
}

fn dictionaries(r: &mut rand_chacha::ChaCha8Rng, q: usize) -> (Vec<Dictionary>, ShapePoint) {
    let base = random_shape(r, 6, 2);
    let dicts = (0..q)
        .map(|c| {
            let atoms: Vec<ShapePoint> = (0..3 + c).map(|_| nearby_shape(r, &base, 0.3)).collect();
            Dictionary::new(atoms, Some(format!("c{c}")), 0.01).unwrap()
        })
        .collect();
    (dicts, base)
}

#[test]
fn encoding_concatenates_class_blocks() {
    let mut r = rng(61);
    let (dicts, base) = dictionaries(&mut r, 2);
    let frames: Vec<ShapePoint> = (0..5).map(|_| nearby_shape(&mut r, &base, 0.1)).collect();
    let traj = Trajectory::new(frames, None, "t").unwrap();
    let set = DictionarySet::Intrinsic(dicts.clone());
    let s = encode_trajectory(&traj, &set, 0.01).unwrap();
    assert_eq!(s.width(), 3 + 4);
    assert_eq!(s.blocks, vec![3, 4]);
    assert!((s.block_sums() - DMatrix::from_element(5, 2, 1.0)).amax() < 1e-6);

    // Swapping the classes swaps the blocks.
    let swapped = DictionarySet::Intrinsic(vec![dicts[1].clone(), dicts[0].clone()]);
    let t = encode_trajectory(&traj, &swapped, 0.01).unwrap();
    assert_eq!(t.codes.columns(0, 4), s.codes.columns(3, 4));
    assert_eq!(t.codes.columns(4, 3), s.codes.columns(0, 3));
}

#[test]
fn frame_equal_to_an_atom_is_coded_exactly() {
    let mut r = rng(62);
    let (dicts, base) = dictionaries(&mut r, 1);
    let atom = dicts[0].atoms()[1].clone();
    let traj = Trajectory::new(vec![atom.clone(), nearby_shape(&mut r, &base, 0.1)], None, "t").unwrap();
    let s = encode_trajectory(&traj, &DictionarySet::Intrinsic(dicts.clone()), 0.01).unwrap();
    let w = s.codes.row(0).transpose();
    let obj = kscdl::intrinsic::coding_objective(&atom, &dicts[0], &w, 0.01).unwrap();
    assert!(obj <= 0.01 + 1e-6);

    let constant = Trajectory::new(vec![atom.clone(); 4], None, "c").unwrap();
    let c = encode_trajectory(&constant, &DictionarySet::Intrinsic(dicts), 0.01).unwrap();
    for t in 1..4 {
        assert!((c.codes.row(t) - c.codes.row(0)).amax() < 1e-8);
    }
}

/// Unit planar pre-shape orthogonal to `z` in the complex inner product, so at
/// geodesic distance pi/2 from it.
fn complex_orthogonal(r: &mut rand_chacha::ChaCha8Rng, z: &DMatrix<f64>) -> ShapePoint {
    let mut u = gaussian_matrix(r, z.nrows(), 2);
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..z.nrows() {
        re += z[(k, 0)] * u[(k, 0)] + z[(k, 1)] * u[(k, 1)];
        im += z[(k, 0)] * u[(k, 1)] - z[(k, 1)] * u[(k, 0)];
    }
    for k in 0..z.nrows() {
        let (x, y) = (z[(k, 0)], z[(k, 1)]);
        u[(k, 0)] -= x * re - y * im;
        u[(k, 1)] -= x * im + y * re;
    }
    let n = u.norm();
    ShapePoint::new(kscdl::PreShape::from_unit(u / n).unwrap())
}

#[test]
fn coding_errors_name_the_frame_and_class() {
    let mut r = rng(63);
    let (dicts, base) = dictionaries(&mut r, 2);
    let far = complex_orthogonal(&mut r, dicts[1].atoms()[0].coords());
    assert!(kscdl::shape::geodesic_distance(&far, &dicts[1].atoms()[0]) > 1.57);
    let traj = Trajectory::new(vec![base.clone(), base.clone(), far], None, "t").unwrap();
    match encode_trajectory(&traj, &DictionarySet::Intrinsic(dicts), 0.01) {
        Err(kscdl::Error::Coding { frame, class, .. }) => {
            assert_eq!(frame, 2);
            // Class 0 may fail first if its atoms are also too far.
            assert!(class <= 1);
        }
        other => panic!("expected a coding error, got {other:?}"),
    }
}

#[test]
fn warping_onto_a_reference_keeps_its_length() {
    let mut r = rng(64);
    let reference = series(DMatrix::from_fn(9, 2, |_, _| gaussian(&mut r)));
    let other = series(DMatrix::from_fn(14, 2, |_, _| gaussian(&mut r)));
    let w = warp_to_reference(&other, &reference).unwrap();
    assert_eq!(w.len(), 9);
    let all = vec![reference.clone(), other.clone(), reference.clone()];
    assert_ne!(choose_reference(&all).unwrap(), 1);
}
