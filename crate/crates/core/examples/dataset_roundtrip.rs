//! Generates a small labelled dataset, writes it in the on-disk format,
//! reads it back and prints the manifest and a few labels.
//!
//! Run with `cargo run --release --example dataset_roundtrip`.

use statelab::datasets::{generate, Dataset, Family, GenConfig};

fn main() -> statelab::Result<()> {
    let ds = generate(&GenConfig { count: 20, train_count: 16, seed: 11, ..GenConfig::for_family(Family::Noon) })?;
    let path = std::env::temp_dir().join("statelab-roundtrip.statelab");
    ds.save(&path)?;
    let back = Dataset::load(&path)?;
    assert_eq!(back, ds);
    println!("wrote and re-read {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    print!("{}", back.manifest.summary());
    for e in back.entries.iter().take(5) {
        let labels: Vec<String> = e.labels.iter().map(|l| format!("{:?}={:.4}", l.kind, l.value)).collect();
        println!("entry {} ({:?}, {} records): {}", e.id, e.split, e.records.len(), labels.join(", "));
    }
    Ok(())
}
