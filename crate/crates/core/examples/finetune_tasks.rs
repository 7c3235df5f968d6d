//! Stage-3 transfer: fine-tune task heads on the downstream families and
//! compare against training from scratch and the FCNN baseline.
//!
//! Uses the checkpoint written by `pretrain_desk` when present.
//! Run with `cargo run --release --example finetune_tasks -- [train labels]`.

use std::time::Instant;

use statelab::analysis::{classification_metrics, r_squared};
use statelab::datasets::{generate, Dataset, Family, GenConfig, Split};
use statelab::neural::{finetune, predict_property, Checkpoint, FcnnBaseline, FinetuneConfig, ModelDims, OsfmModel, TaskId};

fn score(model: &OsfmModel, ds: &Dataset, task: TaskId) -> statelab::Result<f64> {
    let test = ds.labelled_examples(task, Split::Test)?;
    let pred: Vec<f64> =
        test.iter().map(|e| predict_property(model, task, &e.records, e.num_modes, &e.extra)).collect::<statelab::Result<_>>()?;
    let truth: Vec<f64> = test.iter().map(|e| e.target).collect();
    if task.is_classification() {
        Ok(classification_metrics(&pred, &truth, 0.5)?.accuracy)
    } else {
        r_squared(&pred, &truth)
    }
}

fn main() -> statelab::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let train_labels: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let path = std::env::temp_dir().join("statelab-pretrain-desk.json");
    let pretrained = if path.exists() {
        Checkpoint::load(&path)?.trainer.model
    } else {
        println!("no pretrained checkpoint at {}; run the pretrain_desk example first", path.display());
        return Ok(());
    };
    for (family, task) in [
        (Family::Negativity, TaskId::Negativity(5)),
        (Family::Squeezed, TaskId::SqueezedQfi),
        (Family::Cat, TaskId::CatSize),
        (Family::Noon, TaskId::NoonPurity),
    ] {
        let t0 = Instant::now();
        let ds = generate(&GenConfig { seed: 5, ..GenConfig::for_family(family) })?;
        let gen_time = t0.elapsed();
        let mut train = ds.labelled_examples(task, Split::Train)?;
        if let Some(n) = train_labels {
            train.truncate(n);
        }
        let cfg = FinetuneConfig { seed: 4, ..FinetuneConfig::for_task(task) };
        let t1 = Instant::now();
        let mut tuned = pretrained.clone();
        finetune(&mut tuned, task, &train, &cfg)?;
        let mut scratch = OsfmModel::new(ModelDims::default(), 99);
        finetune(&mut scratch, task, &train, &cfg)?;
        print!(
            "{task}: generated in {gen_time:.1?}, pretrained {:.4}, from scratch {:.4}",
            score(&tuned, &ds, task)?,
            score(&scratch, &ds, task)?
        );
        if task.is_classification() {
            let fcnn = FcnnBaseline::fit(task, &train, &cfg)?;
            let test = ds.labelled_examples(task, Split::Test)?;
            let pred: Vec<f64> = test.iter().map(|e| fcnn.predict(e)).collect::<statelab::Result<_>>()?;
            let truth: Vec<f64> = test.iter().map(|e| e.target).collect();
            print!(", fcnn {:.4}", classification_metrics(&pred, &truth, 0.5)?.accuracy);
        }
        println!(" ({:.1?})", t1.elapsed());
    }
    Ok(())
}
