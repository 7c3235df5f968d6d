use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{Adam, AdamConfig};
use super::mlp::{sigmoid, Activation, Mlp};
use super::model::{OsfmModel, RecordBatch};
use crate::error::{Error, Result};
use crate::homodyne::HomodyneRecord;
use crate::properties::LabelKind;
use crate::seeds::derive_seed;

/// Downstream prediction task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskId {
    /// Wigner-negativity class of m-mode degaussified states.
    Negativity(usize),
    NoonPurity,
    NoonFidelity,
    CatSize,
    CatFidelity,
    SqueezedQfi,
    SqueezedFidelity,
}

impl TaskId {
    pub fn label_kind(self) -> LabelKind {
        match self {
            TaskId::Negativity(_) => LabelKind::NegativityClass,
            TaskId::NoonPurity => LabelKind::Purity,
            TaskId::NoonFidelity | TaskId::CatFidelity | TaskId::SqueezedFidelity => LabelKind::Fidelity,
            TaskId::CatSize => LabelKind::CatSize,
            TaskId::SqueezedQfi => LabelKind::Qfi,
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, TaskId::Negativity(_))
    }

    /// Scalar inputs appended to the representation (the photon number N for N00N tasks).
    pub fn extra_inputs(self) -> usize {
        match self {
            TaskId::NoonPurity | TaskId::NoonFidelity => 1,
            _ => 0,
        }
    }

    pub fn head_dims(self, z_dim: usize) -> Vec<usize> {
        match self {
            TaskId::Negativity(_) => vec![z_dim, 8, 4, 1],
            _ => vec![z_dim + self.extra_inputs(), 16, 1],
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::Negativity(m) => write!(f, "negativity-{m}"),
            TaskId::NoonPurity => f.write_str("noon-purity"),
            TaskId::NoonFidelity => f.write_str("noon-fidelity"),
            TaskId::CatSize => f.write_str("cat-size"),
            TaskId::CatFidelity => f.write_str("cat-fidelity"),
            TaskId::SqueezedQfi => f.write_str("squeezed-qfi"),
            TaskId::SqueezedFidelity => f.write_str("squeezed-fidelity"),
        }
    }
}

impl FromStr for TaskId {
    type Err = Error;

    /// Accepts the display names; bare family names pick the family's first label.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if let Some(m) = t.strip_prefix("negativity-") {
            let m: usize = m.parse().map_err(|_| Error::UnknownTask(s.into()))?;
            return if m == 0 { Err(Error::UnknownTask(s.into())) } else { Ok(TaskId::Negativity(m)) };
        }
        match t.as_str() {
            "noon" | "noon-purity" => Ok(TaskId::NoonPurity),
            "noon-fidelity" => Ok(TaskId::NoonFidelity),
            "cat" | "cat-size" => Ok(TaskId::CatSize),
            "cat-fidelity" => Ok(TaskId::CatFidelity),
            "squeezed" | "squeezed-qfi" => Ok(TaskId::SqueezedQfi),
            "squeezed-fidelity" => Ok(TaskId::SqueezedFidelity),
            _ => Err(Error::UnknownTask(s.into())),
        }
    }
}

impl serde::Serialize for TaskId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for TaskId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Affine map of a target range onto [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max - min).is_finite() || max <= min {
            return Err(Error::InvalidArgument("cannot scale constant or empty targets".into()));
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }
}

/// A task head. Its output is a logit for classification tasks and a
/// scaled target for regression tasks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Head {
    pub task: TaskId,
    pub mlp: Mlp,
    pub scaler: Option<MinMaxScaler>,
}

impl Head {
    pub fn new(task: TaskId, z_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { task, mlp: Mlp::new(&task.head_dims(z_dim), Activation::Linear, &mut rng), scaler: None }
    }

    /// Maps the raw head output to a probability or a target-unit value.
    pub fn finish(&self, raw: f64) -> Result<f64> {
        if self.task.is_classification() {
            return Ok(sigmoid(raw));
        }
        let scaler = self.scaler.ok_or_else(|| Error::Missing(format!("scaler for task {}", self.task)))?;
        Ok(scaler.inverse(raw))
    }
}

/// A labelled state: its measurement records plus task-specific extra inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledExample {
    pub records: Vec<HomodyneRecord>,
    pub num_modes: usize,
    pub extra: Vec<f64>,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Update only the head, keeping the representation network fixed.
    pub freeze_encoder: bool,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self { epochs: 150, batch_size: 32, adam: AdamConfig::default(), freeze_encoder: false, seed: 0 }
    }
}

impl FinetuneConfig {
    /// Defaults tuned per task kind: regression heads need more and larger
    /// steps, while the classifier overfits under that schedule.
    pub fn for_task(task: TaskId) -> Self {
        if task.is_classification() {
            Self::default()
        } else {
            Self { epochs: 300, batch_size: 16, adam: AdamConfig { lr: 3e-3, ..AdamConfig::default() }, ..Self::default() }
        }
    }
}

fn head_input(z: &DVector<f64>, extra: &[f64], expected: usize) -> Result<DMatrix<f64>> {
    if extra.len() != expected {
        return Err(Error::Missing(format!("{expected} extra head input(s), got {}", extra.len())));
    }
    Ok(DMatrix::from_iterator(z.len() + extra.len(), 1, z.iter().chain(extra).copied()))
}

/// Loss of one raw output and its derivative: BCE on a logit, or squared error.
fn task_loss(classification: bool, raw: f64, target: f64) -> (f64, f64) {
    if classification {
        // log(1 + e^raw) - target * raw, computed stably
        let softplus = raw.max(0.0) + (-raw.abs()).exp().ln_1p();
        (softplus - target * raw, sigmoid(raw) - target)
    } else {
        let d = raw - target;
        (d * d, 2.0 * d)
    }
}

fn check_targets(task: TaskId, data: &[LabelledExample]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no labelled examples".into()));
    }
    for ex in data {
        if ex.extra.len() != task.extra_inputs() {
            return Err(Error::DimensionMismatch { expected: task.extra_inputs(), actual: ex.extra.len() });
        }
        if task.is_classification() && ex.target != 0.0 && ex.target != 1.0 {
            return Err(Error::InvalidArgument(format!("class label {} is not 0 or 1", ex.target)));
        }
    }
    Ok(())
}

/// Loss of one example under `head` (BCE on the logit or squared error on
/// the scaled target) with its gradients for the head and, when
/// `through_encoder`, for the three encoder networks (zeros otherwise).
pub fn head_loss_and_grads(
    model: &OsfmModel,
    head: &Head,
    records: &RecordBatch,
    extra: &[f64],
    target: f64,
    through_encoder: bool,
) -> Result<(f64, Mlp, Vec<Mlp>)> {
    let (z, cache) = model.encode_cached(records)?;
    let x = head_input(&z, extra, head.task.extra_inputs())?;
    let (out, hc) = head.mlp.forward_cached(&x);
    let (loss, dout) = task_loss(head.task.is_classification(), out[(0, 0)], target);
    let mut hg = head.mlp.zeros_like();
    let dx = head.mlp.backward(&hc, &DMatrix::from_element(1, 1, dout), &mut hg);
    let mut eg: Vec<Mlp> = model.networks()[..3].iter().map(|(_, n)| n.zeros_like()).collect();
    if through_encoder {
        let dz = dx.rows(0, z.len()).column(0).into_owned();
        model.encoder_backward(&cache, &dz, &mut eg);
    }
    Ok((loss, hg, eg))
}

/// Trains (or continues training) the task's head together with the
/// representation network. Returns the mean loss per epoch.
pub fn finetune(model: &mut OsfmModel, task: TaskId, data: &[LabelledExample], config: &FinetuneConfig) -> Result<Vec<f64>> {
    check_targets(task, data)?;
    let key = task.to_string();
    let mut head = match model.heads.remove(&key) {
        Some(h) if h.task == task => h,
        _ => Head::new(task, model.dims.z_dim, derive_seed(config.seed, &[7])),
    };
    if !task.is_classification() && head.scaler.is_none() {
        let targets: Vec<f64> = data.iter().map(|e| e.target).collect();
        head.scaler = Some(MinMaxScaler::fit(&targets)?);
    }
    let bins = model.dims.bins;
    let batches: Vec<RecordBatch> = data.iter().map(|e| RecordBatch::from_records(&e.records, e.num_modes, bins)).collect();
    let targets: Vec<f64> = data.iter().map(|e| head.scaler.map_or(e.target, |s| s.transform(e.target))).collect();
    let mut adam = Adam::new(config.adam);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[epoch as u64])));
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let scale = 1.0 / chunk.len() as f64;
            let model_ref = &*model;
            let head_ref = &head;
            let parts: Vec<(f64, Mlp, Vec<Mlp>)> = chunk
                .par_iter()
                .map(|&i| -> Result<(f64, Mlp, Vec<Mlp>)> {
                    let (loss, mut hg, mut eg) =
                        head_loss_and_grads(model_ref, head_ref, &batches[i], &data[i].extra, targets[i], !config.freeze_encoder)?;
                    hg.scale(scale);
                    eg.iter_mut().for_each(|g| g.scale(scale));
                    Ok((loss, hg, eg))
                })
                .collect::<Result<_>>()?;
            let mut head_grad = head.mlp.zeros_like();
            let mut enc_grad: Vec<Mlp> = model.networks()[..3].iter().map(|(_, n)| n.zeros_like()).collect();
            for (loss, hg, eg) in &parts {
                total += loss;
                head_grad.add_assign(hg);
                for (a, g) in enc_grad.iter_mut().zip(eg) {
                    a.add_assign(g);
                }
            }
            let mut entries: Vec<(&str, &mut Mlp, &Mlp)> = vec![("head", &mut head.mlp, &head_grad)];
            if !config.freeze_encoder {
                let [(n0, e0), (n1, e1), (n2, e2), ..] = model.networks_mut();
                entries.push((n0, e0, &enc_grad[0]));
                entries.push((n1, e1, &enc_grad[1]));
                entries.push((n2, e2, &enc_grad[2]));
            }
            adam.step(entries)?;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical(format!("non-finite fine-tuning loss at epoch {epoch}")));
        }
        log::debug!("finetune {key} epoch {epoch}: loss {mean:.6}");
        losses.push(mean);
    }
    model.heads.insert(key, head);
    Ok(losses)
}

/// Encodes the records and applies the task head: a class probability for
/// classification tasks, a target-unit value otherwise.
pub fn predict_property(model: &OsfmModel, task: TaskId, records: &[HomodyneRecord], num_modes: usize, extra: &[f64]) -> Result<f64> {
    let head = model.heads.get(&task.to_string()).ok_or_else(|| Error::Missing(format!("head for task {task}")))?;
    let z = model.encode_representation(records, num_modes)?;
    let out = head.mlp.forward(&head_input(&z, extra, task.extra_inputs())?);
    head.finish(out[(0, 0)])
}

/// Fully connected baseline on the concatenated raw histograms, no encoder.
/// Only defined for datasets measured at fixed settings.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FcnnBaseline {
    pub head: Head,
    pub input_dim: usize,
}

fn flatten(ex: &LabelledExample) -> Vec<f64> {
    ex.records.iter().flat_map(|r| r.histogram.bins.iter().copied()).chain(ex.extra.iter().copied()).collect()
}

impl FcnnBaseline {
    pub fn fit(task: TaskId, data: &[LabelledExample], config: &FinetuneConfig) -> Result<Self> {
        check_targets(task, data)?;
        let inputs: Vec<Vec<f64>> = data.iter().map(flatten).collect();
        let input_dim = inputs[0].len();
        if inputs.iter().any(|v| v.len() != input_dim) {
            return Err(Error::InvalidArgument(
                "the FCNN baseline needs the same measurement settings for every state (fixed-phase families only)".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[11]));
        let mut head = Head { task, mlp: Mlp::new(&[input_dim, 64, 32, 1], Activation::Linear, &mut rng), scaler: None };
        if !task.is_classification() {
            head.scaler = Some(MinMaxScaler::fit(&data.iter().map(|e| e.target).collect::<Vec<_>>())?);
        }
        let targets: Vec<f64> = data.iter().map(|e| head.scaler.map_or(e.target, |s| s.transform(e.target))).collect();
        let mut adam = Adam::new(config.adam);
        for epoch in 0..config.epochs {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[epoch as u64])));
            for chunk in order.chunks(config.batch_size.max(1)) {
                let x = DMatrix::from_fn(input_dim, chunk.len(), |i, j| inputs[chunk[j]][i]);
                let (out, cache) = head.mlp.forward_cached(&x);
                let dout = DMatrix::from_fn(1, chunk.len(), |_, j| {
                    task_loss(task.is_classification(), out[(0, j)], targets[chunk[j]]).1 / chunk.len() as f64
                });
                let mut grad = head.mlp.zeros_like();
                head.mlp.backward(&cache, &dout, &mut grad);
                adam.step(vec![("fcnn", &mut head.mlp, &grad)])?;
            }
        }
        head.mlp.validate()?;
        Ok(Self { head, input_dim })
    }

    pub fn predict(&self, ex: &LabelledExample) -> Result<f64> {
        let x = flatten(ex);
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, actual: x.len() });
        }
        let out = self.head.mlp.forward(&DMatrix::from_vec(x.len(), 1, x));
        self.head.finish(out[(0, 0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::{Histogram, HomodyneSetting};
    use crate::neural::model::ModelDims;

    #[test]
    fn task_ids_round_trip() {
        for t in [
            TaskId::Negativity(5),
            TaskId::NoonPurity,
            TaskId::NoonFidelity,
            TaskId::CatSize,
            TaskId::CatFidelity,
            TaskId::SqueezedQfi,
            TaskId::SqueezedFidelity,
        ] {
            assert_eq!(t.to_string().parse::<TaskId>().unwrap(), t);
        }
        assert_eq!("cat".parse::<TaskId>().unwrap(), TaskId::CatSize);
        assert!("negativity-0".parse::<TaskId>().is_err());
        assert!(matches!("banana".parse::<TaskId>(), Err(Error::UnknownTask(_))));
    }

    #[test]
    fn head_shapes() {
        assert_eq!(TaskId::Negativity(7).head_dims(32), vec![32, 8, 4, 1]);
        assert_eq!(TaskId::NoonPurity.head_dims(32), vec![33, 16, 1]);
        assert_eq!(TaskId::CatSize.head_dims(32), vec![32, 16, 1]);
    }

    #[test]
    fn scaler_inverts() {
        let s = MinMaxScaler::fit(&[2.0, 6.0, 3.0]).unwrap();
        assert_eq!(s.transform(2.0), 0.0);
        assert_eq!(s.transform(6.0), 1.0);
        assert!((s.inverse(s.transform(4.3)) - 4.3).abs() < 1e-15);
        assert!(MinMaxScaler::fit(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn bce_gradient_matches_difference() {
        for (raw, t) in [(0.3, 1.0), (-2.0, 0.0), (40.0, 0.0), (-40.0, 1.0)] {
            let h = 1e-6;
            let num = (task_loss(true, raw + h, t).0 - task_loss(true, raw - h, t).0) / (2.0 * h);
            assert!((num - task_loss(true, raw, t).1).abs() < 1e-6);
        }
    }

    fn examples(n: usize, extra: usize) -> Vec<LabelledExample> {
        (0..n)
            .map(|k| {
                let c = 2.0 + 3.0 * (k as f64 / n as f64);
                let raw: Vec<f64> = (0..6).map(|b| (-(b as f64 - c).powi(2)).exp() + 1e-3).collect();
                let s: f64 = raw.iter().sum();
                let records = vec![HomodyneRecord {
                    setting: HomodyneSetting { mode: 0, phase: 0.0 },
                    histogram: Histogram { bins: raw.iter().map(|v| v / s).collect() },
                }];
                LabelledExample { records, num_modes: 1, extra: vec![1.0; extra], target: (k % 2) as f64 }
            })
            .collect()
    }

    #[test]
    fn prediction_errors_and_ranges() {
        let mut model = OsfmModel::new(ModelDims::tiny(6), 0);
        let data = examples(8, 0);
        let cfg = FinetuneConfig { epochs: 3, batch_size: 4, ..FinetuneConfig::default() };
        let before = model.trunk.clone();
        finetune(&mut model, TaskId::Negativity(1), &data, &cfg).unwrap();
        assert_ne!(model.trunk, before);
        let p = predict_property(&model, TaskId::Negativity(1), &data[0].records, 1, &[]).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(p, predict_property(&model, TaskId::Negativity(1), &data[0].records, 1, &[]).unwrap());
        assert!(matches!(predict_property(&model, TaskId::CatSize, &data[0].records, 1, &[]), Err(Error::Missing(_))));

        let noon = examples(8, 1);
        finetune(&mut model, TaskId::NoonPurity, &noon, &cfg).unwrap();
        assert!(predict_property(&model, TaskId::NoonPurity, &noon[0].records, 1, &[2.0]).is_ok());
        assert!(predict_property(&model, TaskId::NoonPurity, &noon[0].records, 1, &[]).is_err());
        assert!(finetune(&mut model, TaskId::NoonPurity, &data, &cfg).is_err());
    }

    #[test]
    fn frozen_encoder_is_untouched() {
        let mut model = OsfmModel::new(ModelDims::tiny(6), 0);
        let before = model.clone();
        let cfg = FinetuneConfig { epochs: 2, batch_size: 4, freeze_encoder: true, ..FinetuneConfig::default() };
        finetune(&mut model, TaskId::Negativity(1), &examples(8, 0), &cfg).unwrap();
        assert_eq!(model.networks(), before.networks());
    }

    #[test]
    fn fcnn_baseline_learns_separable_labels() {
        let data = examples(40, 0);
        let cfg = FinetuneConfig { epochs: 300, batch_size: 8, ..FinetuneConfig::default() };
        let data: Vec<LabelledExample> =
            data.into_iter().enumerate().map(|(k, mut e)| {
                e.target = if k < 20 { 0.0 } else { 1.0 };
                e
            }).collect();
        let fcnn = FcnnBaseline::fit(TaskId::Negativity(1), &data, &cfg).unwrap();
        let correct = data.iter().filter(|e| (fcnn.predict(e).unwrap() > 0.5) == (e.target == 1.0)).count();
        assert!(correct >= 36, "{correct}");
    }
}
