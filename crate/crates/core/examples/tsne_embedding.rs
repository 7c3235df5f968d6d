//! Embeds held-out desk states with the pretrained representation network
//! and projects them with t-SNE. Prints how well Gaussian states separate
//! from states of stellar rank two or more, and writes the embedding CSV.
//!
//! Uses the checkpoint written by `pretrain_desk`.
//! Run with `cargo run --release --example tsne_embedding`.

use statelab::analysis::{embedding_csv, silhouette, tsne_embed, EmbeddingRow, TsneConfig};
use statelab::datasets::{generate, Family, GenConfig};
use statelab::neural::Checkpoint;

fn main() -> statelab::Result<()> {
    let path = std::env::temp_dir().join("statelab-pretrain-desk.json");
    if !path.exists() {
        println!("no pretrained checkpoint at {}; run the pretrain_desk example first", path.display());
        return Ok(());
    }
    let model = Checkpoint::load(&path)?.trainer.model;
    let ds = generate(&GenConfig { count: 100, train_count: 0, seed: 2, ..GenConfig::desk(Family::Pretrain) })?;
    let vectors: Vec<Vec<f64>> = ds
        .entries
        .iter()
        .map(|e| Ok(model.encode_representation(&e.records, e.meta.num_modes)?.iter().copied().collect()))
        .collect::<statelab::Result<_>>()?;
    let tsne = tsne_embed(&vectors, &TsneConfig { perplexity: 25.0, ..TsneConfig::default() })?;
    println!("t-SNE KL divergence {:.4} -> {:.4}", tsne.kl_initial, tsne.kl_final);

    let (mut points, mut groups) = (Vec::new(), Vec::new());
    for (e, p) in ds.entries.iter().zip(&tsne.points) {
        match e.meta.stellar_rank {
            Some(0) => groups.push(0),
            Some(r) if r >= 2 => groups.push(1),
            _ => continue,
        }
        points.push(p.to_vec());
    }
    println!("silhouette, Gaussian vs rank >= 2: {:.4}", silhouette(&points, &groups)?);

    let rows: Vec<EmbeddingRow> = ds
        .entries
        .iter()
        .zip(&tsne.points)
        .map(|(e, p)| EmbeddingRow {
            x: p[0],
            y: p[1],
            family: e.family.to_string(),
            rank: e.meta.stellar_rank,
            modes: e.meta.num_modes,
            xi: e.meta.max_xi(),
        })
        .collect();
    let out = std::env::temp_dir().join("statelab-embedding.csv");
    std::fs::write(&out, embedding_csv(&rows))?;
    println!("embedding written to {}", out.display());
    Ok(())
}
