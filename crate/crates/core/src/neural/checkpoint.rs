use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::pretrain::{EpochLog, Trainer};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training or run inference: parameters,
/// task heads with their scalers, optimizer moments and the training config.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub trainer: Trainer,
    pub history: Vec<EpochLog>,
}

impl Checkpoint {
    pub fn new(trainer: Trainer, history: Vec<EpochLog>) -> Self {
        Self { version: CHECKPOINT_VERSION, trainer, history }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Version { found: self.version, expected: CHECKPOINT_VERSION });
        }
        self.trainer.model.validate()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        ck.check()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::{ModelDims, OsfmModel};
    use crate::neural::pretrain::TrainConfig;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = OsfmModel::new(ModelDims::default(), 5);
        let mut trainer = Trainer::new(model, TrainConfig::default());
        trainer.adam.moments.insert("decoder".into(), vec![Default::default()]);
        trainer.step = 17;
        let ck = Checkpoint::new(trainer, vec![EpochLog { epoch: 0, recon: 0.1 + 0.2, ..Default::default() }]);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let bits = |c: &Checkpoint| c.trainer.model.decoder.layers[0].w.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&ck));
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut ck = Checkpoint::new(Trainer::new(OsfmModel::new(ModelDims::tiny(4), 0), TrainConfig::default()), vec![]);
        ck.version = 99;
        assert!(matches!(Checkpoint::from_json(&ck.to_json().unwrap()), Err(Error::Version { .. })));
    }
}
