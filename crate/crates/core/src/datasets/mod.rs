//! Dataset generation for every stage, the on-disk format, and adapters to
//! the training inputs of the neural module.

pub mod gen;
pub mod io;
pub mod types;

pub use gen::{generate, median};
pub use io::{read_dataset, write_dataset, DatasetReader, DatasetWriter};
pub use types::{Dataset, DatasetManifest, Family, GenConfig, Split, StateDatasetEntry, StateMeta, FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::neural::{LabelledExample, PretrainState, TaskId};

/// The family a task's labels come from.
pub fn task_family(task: TaskId) -> Family {
    match task {
        TaskId::Negativity(_) => Family::Negativity,
        TaskId::NoonPurity | TaskId::NoonFidelity => Family::Noon,
        TaskId::CatSize | TaskId::CatFidelity => Family::Cat,
        TaskId::SqueezedQfi | TaskId::SqueezedFidelity => Family::Squeezed,
    }
}

impl StateDatasetEntry {
    /// Extra head inputs for a task: the photon number for N00N tasks.
    pub fn task_extras(&self, task: TaskId) -> Result<Vec<f64>> {
        Ok(if task.extra_inputs() == 1 { vec![self.meta.param("n")?] } else { Vec::new() })
    }

    pub fn labelled(&self, task: TaskId) -> Result<LabelledExample> {
        Ok(LabelledExample {
            records: self.records.clone(),
            num_modes: self.meta.num_modes,
            extra: self.task_extras(task)?,
            target: self.label(task.label_kind())?,
        })
    }

    pub fn pretrain_state(&self) -> Result<PretrainState> {
        if !self.family.has_full_table() {
            return Err(Error::InvalidArgument(format!("{} entries have no full measurement table", self.family)));
        }
        Ok(PretrainState { num_modes: self.meta.num_modes, table: self.records.clone() })
    }
}

impl Dataset {
    fn check_task(&self, task: TaskId) -> Result<()> {
        let family = task_family(task);
        if self.manifest.family != family {
            return Err(Error::InvalidArgument(format!("task {task} needs a {family} dataset, got {}", self.manifest.family)));
        }
        if let TaskId::Negativity(m) = task {
            if self.manifest.config.modes != [m] {
                return Err(Error::InvalidArgument(format!("task {task} needs {m}-mode states, got {:?}", self.manifest.config.modes)));
            }
        }
        Ok(())
    }

    pub fn labelled_examples(&self, task: TaskId, split: Split) -> Result<Vec<LabelledExample>> {
        self.check_task(task)?;
        self.split(split).map(|e| e.labelled(task)).collect()
    }

    pub fn pretrain_states(&self) -> Result<Vec<PretrainState>> {
        self.entries.iter().map(StateDatasetEntry::pretrain_state).collect()
    }
}
