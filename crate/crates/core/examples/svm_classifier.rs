//! One-vs-rest linear SVM on standardized features, with k-fold and
//! leave-one-group-out evaluation.

use kscdl::classify::{evaluate, k_fold, leave_one_group_out, train, train_binary};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> kscdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let centers = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut groups = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for i in 0..20 {
            x.push(DVector::from_fn(3, |j, _| {
                let e: f64 = StandardNormal.sample(&mut rng);
                c[j] + 0.8 * e
            }));
            y.push(label);
            groups.push(format!("subject{}", i % 4));
        }
    }

    let targets: Vec<f64> = y.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
    let sol = train_binary(&x, &targets, 1.0)?;
    println!(
        "class 0 vs rest: primal {:.6}, dual {:.6}, {} passes",
        sol.primal, sol.dual, sol.passes
    );

    let model = train(&x, &y, 1.0)?;
    println!("training accuracy {:.3}", evaluate(&model, &x, &y)?.accuracy);

    let pick = |idx: &[usize]| -> (Vec<DVector<f64>>, Vec<usize>) {
        (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };
    let mut correct = 0.0;
    for (tr, te) in k_fold(x.len(), 5, 1)? {
        let (xtr, ytr) = pick(&tr);
        let (xte, yte) = pick(&te);
        correct += evaluate(&train(&xtr, &ytr, 1.0)?, &xte, &yte)?.accuracy * te.len() as f64;
    }
    println!("5-fold accuracy {:.3}", correct / x.len() as f64);

    for (group, tr, te) in leave_one_group_out(&groups) {
        let (xtr, ytr) = pick(&tr);
        let (xte, yte) = pick(&te);
        let eval = evaluate(&train(&xtr, &ytr, 1.0)?, &xte, &yte)?;
        println!("held out {group}: accuracy {:.3}, confusion {:?}", eval.accuracy, eval.confusion);
    }
    Ok(())
}
