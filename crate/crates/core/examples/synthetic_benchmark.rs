//! Synthetic benchmark: intrinsic pipeline against the linear ablation.
//!
//! Run with `cargo run --release --example synthetic_benchmark`.

use std::time::Instant;

use kscdl::pipeline::{fit, CodingMode, PipelineConfig};
use kscdl::synth::{generate_synthetic, split_half, SyntheticSpec};
use kscdl::temporal::Trajectory;

fn main() -> kscdl::Result<()> {
    let spec = SyntheticSpec::default();
    let seqs = generate_synthetic(&spec)?;
    let (train_idx, test_idx) = split_half(&seqs);
    let trajs: Vec<Trajectory> = seqs.iter().map(|s| s.to_trajectory()).collect::<kscdl::Result<_>>()?;
    let train: Vec<Trajectory> = train_idx.iter().map(|&i| trajs[i].clone()).collect();
    let test: Vec<Trajectory> = test_idx.iter().map(|&i| trajs[i].clone()).collect();

    for mode in [CodingMode::Intrinsic, CodingMode::Extrinsic, CodingMode::Linear] {
        let start = Instant::now();
        let config = PipelineConfig {
            mode,
            ..PipelineConfig::default()
        };
        let model = fit(&train, &config)?;
        let eval = model.evaluate(&test)?;
        println!(
            "{mode:<10} sigma {:<5} accuracy {:.3}  ({:.1?})",
            model.sigma,
            eval.accuracy,
            start.elapsed()
        );
        for row in eval.row_percentages() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:5.1}")).collect();
            println!("    {}", cells.join(" "));
        }
    }
    Ok(())
}
