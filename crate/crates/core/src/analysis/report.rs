use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::datasets::{Dataset, StateDatasetEntry};
use crate::error::{Error, Result};
use crate::homodyne::{sample_measurement_plan, Histogram, MeasurementPlan, PlanStage};
use crate::neural::model::{settings_matrix, LatentMode, OsfmModel};
use crate::properties::classical_fidelity;
use crate::seeds::derive_seed;

/// Anything that predicts query marginals of a state from its context.
pub trait MarginalPredictor: Sync {
    fn predict(&self, entry: &StateDatasetEntry, plan: &MeasurementPlan) -> Result<Vec<Histogram>>;
}

impl MarginalPredictor for OsfmModel {
    fn predict(&self, entry: &StateDatasetEntry, plan: &MeasurementPlan) -> Result<Vec<Histogram>> {
        let context: Vec<_> = plan.context.iter().map(|&i| entry.records[i].clone()).collect();
        let z = self.encode_representation(&context, entry.meta.num_modes)?;
        let queries = settings_matrix(&plan.query_settings(), entry.meta.num_modes);
        let out = self.generate_batch(&z, &queries, LatentMode::Mean);
        Ok(out.column_iter().map(|c| Histogram { bins: c.iter().copied().collect() }).collect())
    }
}

/// Returns the true query marginals; an upper-bound reference.
pub struct TruthPredictor;

impl MarginalPredictor for TruthPredictor {
    fn predict(&self, entry: &StateDatasetEntry, plan: &MeasurementPlan) -> Result<Vec<Histogram>> {
        Ok(plan.query.iter().map(|&i| entry.records[i].histogram.clone()).collect())
    }
}

/// Width of the squeezing bands used for bucketing.
pub const XI_BAND: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct BucketKey {
    pub ood: bool,
    pub rank: Option<usize>,
    pub modes: usize,
    /// Index `k` of the band `[k, k+1) * XI_BAND` holding the largest squeezing.
    pub xi_band: usize,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StateScore {
    pub id: u64,
    pub key: BucketKey,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BucketStat {
    pub key: BucketKey,
    pub count: usize,
    pub mean_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TaskMetric {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub buckets: Vec<BucketStat>,
    pub scores: Vec<StateScore>,
    pub tasks: Vec<TaskMetric>,
}

/// Plan used to score one entry; fixed by the seed and the entry id.
pub fn evaluation_plan(entry: &StateDatasetEntry, seed: u64) -> Result<MeasurementPlan> {
    if !entry.family.has_full_table() {
        return Err(Error::InvalidArgument(format!("{} entries cannot be scored on held-out queries", entry.family)));
    }
    sample_measurement_plan(entry.meta.num_modes, PlanStage::Pretrain, derive_seed(seed, &[entry.id]))
}

/// Mean classical fidelity over the held-out queries of one entry.
pub fn state_query_fidelity(predictor: &impl MarginalPredictor, entry: &StateDatasetEntry, seed: u64) -> Result<f64> {
    let plan = evaluation_plan(entry, seed)?;
    let pred = predictor.predict(entry, &plan)?;
    if pred.len() != plan.query.len() {
        return Err(Error::DimensionMismatch { expected: plan.query.len(), actual: pred.len() });
    }
    let mut total = 0.0;
    for (p, &i) in pred.iter().zip(&plan.query) {
        total += classical_fidelity(p, &entry.records[i].histogram)?;
    }
    Ok(total / pred.len() as f64)
}

fn bucket_key(entry: &StateDatasetEntry, ood: bool) -> BucketKey {
    BucketKey {
        ood,
        rank: entry.meta.stellar_rank,
        modes: entry.meta.num_modes,
        xi_band: (entry.meta.max_xi() / XI_BAND + 1e-9).floor() as usize,
    }
}

/// Scores every entry of each `(dataset, is_ood)` pair and groups the
/// scores into buckets that partition the entries.
pub fn fidelity_report(predictor: &impl MarginalPredictor, datasets: &[(&Dataset, bool)], seed: u64) -> Result<EvalReport> {
    let mut scores = Vec::new();
    for (ds, ood) in datasets {
        let part: Vec<StateScore> = ds
            .entries
            .par_iter()
            .map(|e| Ok(StateScore { id: e.id, key: bucket_key(e, *ood), fidelity: state_query_fidelity(predictor, e, seed)? }))
            .collect::<Result<_>>()?;
        scores.extend(part);
    }
    let mut groups: BTreeMap<BucketKey, (usize, f64)> = BTreeMap::new();
    for s in &scores {
        let g = groups.entry(s.key.clone()).or_default();
        g.0 += 1;
        g.1 += s.fidelity;
    }
    let buckets =
        groups.into_iter().map(|(key, (count, sum))| BucketStat { key, count, mean_fidelity: sum / count as f64 }).collect();
    Ok(EvalReport { buckets, scores, tasks: Vec::new() })
}

impl EvalReport {
    /// Mean fidelity of the scores selected by `keep`, with their count.
    pub fn mean_where(&self, keep: impl Fn(&BucketKey) -> bool) -> Option<(f64, usize)> {
        let sel: Vec<f64> = self.scores.iter().filter(|s| keep(&s.key)).map(|s| s.fidelity).collect();
        (!sel.is_empty()).then(|| (sel.iter().sum::<f64>() / sel.len() as f64, sel.len()))
    }

    /// Mean fidelity per stellar rank over in-distribution states.
    pub fn by_rank(&self, ood: bool) -> Vec<(usize, f64, usize)> {
        let mut ranks: Vec<usize> = self.scores.iter().filter(|s| s.key.ood == ood).filter_map(|s| s.key.rank).collect();
        ranks.sort_unstable();
        ranks.dedup();
        ranks
            .into_iter()
            .filter_map(|r| self.mean_where(|k| k.ood == ood && k.rank == Some(r)).map(|(f, n)| (r, f, n)))
            .collect()
    }

    /// Mean fidelity per mode count.
    pub fn by_modes(&self) -> Vec<(usize, f64, usize)> {
        let mut modes: Vec<usize> = self.scores.iter().map(|s| s.key.modes).collect();
        modes.sort_unstable();
        modes.dedup();
        modes.into_iter().filter_map(|m| self.mean_where(|k| k.modes == m).map(|(f, n)| (m, f, n))).collect()
    }

    /// Whether the in-distribution fidelity never increases with rank.
    pub fn non_increasing_in_rank(&self) -> bool {
        self.by_rank(false).windows(2).all(|w| w[1].1 <= w[0].1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,split,rank,modes,xi_band,count,value\n");
        let split = |ood: bool| if ood { "ood" } else { "id" };
        let rank = |r: Option<usize>| r.map_or("inf".to_string(), |r| r.to_string());
        for b in &self.buckets {
            let k = &b.key;
            let band = format!("{:.1}-{:.1}", k.xi_band as f64 * XI_BAND, (k.xi_band + 1) as f64 * XI_BAND);
            let _ = writeln!(out, "bucket,{},{},{},{band},{},{:.6}", split(k.ood), rank(k.rank), k.modes, b.count, b.mean_fidelity);
        }
        for ood in [false, true] {
            for (r, f, n) in self.by_rank(ood) {
                let _ = writeln!(out, "rank,{},{r},,,{n},{f:.6}", split(ood));
            }
        }
        for (m, f, n) in self.by_modes() {
            let _ = writeln!(out, "modes,all,,{m},,{n},{f:.6}");
        }
        if !self.scores.is_empty() {
            let _ = writeln!(out, "trend,id,,,,,{}", u8::from(self.non_increasing_in_rank()));
        }
        for t in &self.tasks {
            let _ = writeln!(out, "task:{}:{},,,,,{},{:.6}", t.task, t.metric, t.count, t.value);
        }
        out
    }
}

/// One embedded state with its metadata.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingRow {
    pub x: f64,
    pub y: f64,
    pub family: String,
    pub rank: Option<usize>,
    pub modes: usize,
    pub xi: f64,
}

pub fn embedding_csv(rows: &[EmbeddingRow]) -> String {
    let mut out = String::from("x,y,family,rank,modes,xi\n");
    for r in rows {
        let rank = r.rank.map_or("inf".to_string(), |v| v.to_string());
        let _ = writeln!(out, "{:.6},{:.6},{},{rank},{},{:.6}", r.x, r.y, r.family, r.modes, r.xi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate, Family, GenConfig};
    use crate::neural::ModelDims;

    fn data() -> Dataset {
        generate(&GenConfig { count: 4, train_count: 4, seed: 1, ..GenConfig::desk(Family::Pretrain) }).unwrap()
    }

    #[test]
    fn truth_predictor_scores_one() {
        let ds = data();
        let rep = fidelity_report(&TruthPredictor, &[(&ds, false)], 0).unwrap();
        assert!(rep.buckets.iter().all(|b| (b.mean_fidelity - 1.0).abs() < 1e-12));
        assert_eq!(rep.buckets.iter().map(|b| b.count).sum::<usize>(), 4);
        assert!(rep.to_csv().starts_with("kind,split"));
    }

    #[test]
    fn untrained_model_report_is_well_formed() {
        let ds = data();
        let model = OsfmModel::new(ModelDims::default(), 0);
        let rep = fidelity_report(&model, &[(&ds, false)], 0).unwrap();
        assert_eq!(rep.scores.len(), 4);
        assert!(rep.scores.iter().all(|s| s.fidelity > 0.0 && s.fidelity < 0.99));
        assert_eq!(rep, fidelity_report(&model, &[(&ds, false)], 0).unwrap());
    }
}
