//! Sequence files, manifests, model bundles and code-series dumps, as read and
//! written by the `kscdl` command-line tool.

use kscdl::io::{format_sequence, load_manifest, load_sequence, load_series, write_series};
use kscdl::pipeline::{fit, load_trajectories, Model, PipelineConfig};
use kscdl::synth::{write_synthetic, SyntheticSpec};

fn main() -> kscdl::Result<()> {
    let dir = tempfile::tempdir()?;
    let spec = SyntheticSpec {
        num_classes: 2,
        per_class: 4,
        min_length: 4,
        max_length: 6,
        landmarks: 5,
        dim: 2,
        ..SyntheticSpec::default()
    };
    write_synthetic(dir.path(), &spec)?;

    let manifest = load_manifest(&dir.path().join("train.txt"))?;
    println!("train manifest: {} entries, first {:?}", manifest.len(), manifest[0]);

    let seq = load_sequence(&manifest[0].path)?;
    let text = format_sequence(&seq)?;
    let mut lines = text.lines();
    println!("header: {}", lines.next().unwrap_or(""));
    println!("row 0:  {}", lines.next().unwrap_or(""));

    let train = load_trajectories(&dir.path().join("train.txt"))?;
    let config = PipelineConfig {
        sigma: Some(0.5),
        ftp_levels: 3,
        ..PipelineConfig::default()
    };
    let model = fit(&train, &config)?;
    let path = dir.path().join("model.json");
    model.save(&path)?;
    let loaded = Model::load(&path)?;
    println!(
        "bundle: {} bytes, reload identical: {}",
        std::fs::metadata(&path)?.len(),
        loaded.to_bundle() == model.to_bundle()
    );

    let series = loaded.encode(&seq.to_trajectory()?)?;
    let out = dir.path().join("codes.seq");
    write_series(&out, &series, seq.label.as_deref(), seq.source_id.as_deref())?;
    let back = load_series(&out)?;
    println!("code series {} x {}, blocks {:?}, round trip exact: {}", back.len(), back.width(), back.blocks, back == series);
    Ok(())
}
