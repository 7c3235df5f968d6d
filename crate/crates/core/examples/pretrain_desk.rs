//! Desk-scale pretraining: generate states, train the representation and
//! generation networks, and report held-out query fidelity by stellar rank.
//!
//! The checkpoint is saved to the temp directory for `finetune_tasks`.
//!
//! Run with `cargo run --release --example pretrain_desk -- [epochs] [states] [learning rate]`.

use std::time::Instant;

use statelab::analysis::fidelity_report;
use statelab::datasets::{generate, Family, GenConfig};
use statelab::neural::{Checkpoint, ModelDims, OsfmModel, TrainConfig, Trainer};

fn main() -> statelab::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(400);
    let states: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(500);
    let lr: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1e-3);

    let t0 = Instant::now();
    let train = generate(&GenConfig { count: states, train_count: states, seed: 1, ..GenConfig::desk(Family::Pretrain) })?;
    let held_out = generate(&GenConfig { count: 100, train_count: 0, seed: 2, ..GenConfig::desk(Family::Pretrain) })?;
    let ood = generate(&GenConfig { seed: 3, ..GenConfig::desk(Family::Ood) })?;
    println!("generated {} + {} + {} states in {:.1?}", train.entries.len(), held_out.entries.len(), ood.entries.len(), t0.elapsed());

    let mut config = TrainConfig { epochs, seed: 1, ..TrainConfig::default() };
    config.adam.lr = lr;
    let mut trainer = Trainer::new(OsfmModel::new(ModelDims::default(), 1), config);
    let t1 = Instant::now();
    trainer.train(&train.pretrain_states()?, |log| {
        println!("epoch {:>3}  recon {:.4}  kl {:.4}  triplet {:.4}  lambda {:.3}", log.epoch, log.recon, log.kl, log.triplet, log.lambda)
    })?;
    println!("trained {epochs} epochs in {:.1?}", t1.elapsed());
    let path = std::env::temp_dir().join("statelab-pretrain-desk.json");
    Checkpoint::new(trainer.clone(), Vec::new()).save(&path)?;
    println!("checkpoint written to {}", path.display());

    let report = fidelity_report(&trainer.model, &[(&held_out, false), (&ood, true)], 0)?;
    for (r, f, n) in report.by_rank(false) {
        println!("in-distribution r={r}: fidelity {f:.4} over {n} states");
    }
    for (r, f, n) in report.by_rank(true) {
        println!("out-of-distribution r={r}: fidelity {f:.4} over {n} states");
    }
    Ok(())
}
