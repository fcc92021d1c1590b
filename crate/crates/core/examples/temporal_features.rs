//! From a landmark sequence to a fixed-length feature vector: per-frame codes
//! against class dictionaries, displacement, DTW alignment and the Fourier
//! temporal pyramid.

use kscdl::init::init_dictionary;
use kscdl::synth::{generate_synthetic, SyntheticSpec};
use kscdl::temporal::{
    apply_displacement, dtw_align, encode_trajectory, ftp_features, ftp_length, warp_to_reference, DictionarySet,
    DisplacementMode, Trajectory,
};

fn main() -> kscdl::Result<()> {
    let spec = SyntheticSpec {
        num_classes: 2,
        per_class: 3,
        min_length: 20,
        max_length: 30,
        landmarks: 8,
        dim: 2,
        ..SyntheticSpec::default()
    };
    let trajs: Vec<Trajectory> = generate_synthetic(&spec)?
        .iter()
        .map(|s| s.to_trajectory())
        .collect::<kscdl::Result<_>>()?;

    let mut shapes = Vec::new();
    let mut labels = Vec::new();
    for t in &trajs {
        shapes.extend(t.frames().iter().cloned());
        labels.extend(std::iter::repeat_n(t.label.clone().unwrap_or_default(), t.len()));
    }
    let dicts = DictionarySet::Intrinsic(init_dictionary(&shapes, &labels, 0.5, 2, 0.01)?);
    println!("dictionary blocks {:?} ({:?})", dicts.block_widths(), dicts.labels());

    let a = encode_trajectory(&trajs[0], &dicts, 0.01)?;
    let b = encode_trajectory(&trajs[1], &dicts, 0.01)?;
    println!("series of {} frames x {} codes; first-frame block sums {:.6?}", a.len(), a.width(), a.block_sums().row(0).iter().collect::<Vec<_>>());

    for mode in [DisplacementMode::Replace, DisplacementMode::Fuse] {
        let d = apply_displacement(&a, mode)?;
        println!("displacement {mode}: {} x {}", d.len(), d.width());
    }

    let (cost, path) = dtw_align(&b, &a)?;
    println!("DTW cost {cost:.4}, path length {}", path.len());
    let warped = warp_to_reference(&b, &a)?;
    println!("warped onto the reference: {} frames", warped.len());

    let f = ftp_features(&warped, 6, 4)?;
    println!(
        "FTP: {} values (= {}), first eight {:.4?}",
        f.values.len(),
        ftp_length(warped.width(), 6, 4),
        &f.values.as_slice()[..8]
    );
    Ok(())
}
