use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::homodyne::{HomodyneRecord, NUM_BINS};
use crate::properties::{xi_from_db, LabelKind, PropertyLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pretrain,
    Ood,
    Negativity,
    Noon,
    Cat,
    Squeezed,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Pretrain, Family::Ood, Family::Negativity, Family::Noon, Family::Cat, Family::Squeezed];

    pub fn name(self) -> &'static str {
        match self {
            Family::Pretrain => "pretrain",
            Family::Ood => "ood",
            Family::Negativity => "negativity",
            Family::Noon => "noon",
            Family::Cat => "cat",
            Family::Squeezed => "squeezed",
        }
    }

    /// Whether entries carry the full 100-phase table of every mode.
    pub fn has_full_table(self) -> bool {
        matches!(self, Family::Pretrain | Family::Ood)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Generation parameters of one state.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StateMeta {
    pub num_modes: usize,
    /// `None` for infinite rank (cat states).
    pub stellar_rank: Option<usize>,
    /// Squeezing magnitudes per mode.
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// Family-specific values such as `n`, `alpha`, `phase`, `degauss`.
    pub params: BTreeMap<String, f64>,
}

impl StateMeta {
    pub fn param(&self, key: &str) -> Result<f64> {
        self.params.get(key).copied().ok_or_else(|| Error::Missing(format!("state parameter '{key}'")))
    }

    pub fn max_xi(&self) -> f64 {
        self.xi.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StateDatasetEntry {
    pub id: u64,
    pub family: Family,
    pub split: Split,
    pub meta: StateMeta,
    pub labels: Vec<PropertyLabel>,
    pub records: Vec<HomodyneRecord>,
}

impl StateDatasetEntry {
    pub fn label(&self, kind: LabelKind) -> Result<f64> {
        self.labels
            .iter()
            .find(|l| l.kind == kind)
            .map(|l| l.value)
            .ok_or_else(|| Error::Missing(format!("{kind:?} label on entry {}", self.id)))
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            r.histogram.validate()?;
            if r.setting.mode >= self.meta.num_modes {
                return Err(Error::ModeOutOfRange { mode: r.setting.mode, modes: self.meta.num_modes });
            }
        }
        for l in &self.labels {
            l.validate()?;
        }
        if self.family.has_full_table() != self.labels.is_empty() {
            return Err(Error::InvalidArgument(format!("entry {} has unexpected labels for its family", self.id)));
        }
        Ok(())
    }
}

/// Generation settings. One struct serves every family; fields a family
/// does not use are ignored.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenConfig {
    pub family: Family,
    pub count: usize,
    /// Entries with index below this are the training split.
    pub train_count: usize,
    pub seed: u64,
    /// Mode counts drawn uniformly per state.
    pub modes: Vec<usize>,
    /// Stellar ranks drawn uniformly per state.
    pub ranks: Vec<usize>,
    /// Squeezing magnitude range `[lo, hi)`.
    pub xi_range: [f64; 2],
    pub max_displacement: f64,
    pub eta_range: [f64; 2],
    pub kraus_truncation: usize,
    pub max_retries: usize,
    /// Share of negativity states that are photon-subtracted or -added.
    pub degauss_fraction: f64,
    pub max_photons: usize,
    pub max_alpha: f64,
}

impl GenConfig {
    /// Full-size defaults.
    pub fn for_family(family: Family) -> Self {
        let base = Self {
            family,
            count: 0,
            train_count: 0,
            seed: 0,
            modes: vec![1],
            ranks: vec![0],
            xi_range: [0.0, 0.0],
            max_displacement: 0.0,
            eta_range: [0.5, 1.0],
            kraus_truncation: crate::states::DEFAULT_KRAUS_TRUNCATION,
            max_retries: 20,
            degauss_fraction: 2.0 / 3.0,
            max_photons: 8,
            max_alpha: 2.0,
        };
        match family {
            Family::Pretrain => Self {
                count: 6000,
                train_count: 6000,
                modes: vec![1, 2, 3],
                ranks: (0..=5).collect(),
                xi_range: [0.1, 0.2],
                max_displacement: 0.5,
                eta_range: [0.6, 1.0],
                ..base
            },
            Family::Ood => Self {
                count: 500,
                train_count: 0,
                modes: vec![4],
                ranks: vec![3, 4, 5],
                xi_range: [0.1, 0.2],
                max_displacement: 0.5,
                eta_range: [0.6, 1.0],
                ..base
            },
            Family::Negativity => Self {
                count: 750,
                train_count: 600,
                modes: vec![5],
                xi_range: [0.0, xi_from_db(8.0)],
                eta_range: [0.6, 1.0],
                ..base
            },
            Family::Noon => Self { count: 2000, train_count: 600, modes: vec![2], ..base },
            Family::Cat => Self { count: 1500, train_count: 600, ..base },
            Family::Squeezed => Self { count: 1500, train_count: 600, xi_range: [0.0, 1.2], ..base },
        }
    }

    /// Desk-scale presets: smaller pretraining and OOD sets, one mode fewer.
    pub fn desk(family: Family) -> Self {
        let full = Self::for_family(family);
        match family {
            Family::Pretrain => Self { count: 500, train_count: 500, modes: vec![1, 2], ranks: (0..=3).collect(), ..full },
            Family::Ood => Self { count: 100, modes: vec![3], ranks: vec![3], ..full },
            _ => full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.count == 0 {
            return bad("dataset count must be positive".into());
        }
        if self.train_count > self.count {
            return bad(format!("train count {} exceeds count {}", self.train_count, self.count));
        }
        if self.modes.is_empty() || self.modes.contains(&0) {
            return bad("mode choices must be nonempty and positive".into());
        }
        if self.ranks.is_empty() {
            return bad("rank choices must be nonempty".into());
        }
        let [lo, hi] = self.eta_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("efficiency range [{lo}, {hi}] must lie in (0, 1]"));
        }
        if !(self.xi_range[0] >= 0.0 && self.xi_range[0] <= self.xi_range[1]) {
            return bad(format!("invalid squeezing range {:?}", self.xi_range));
        }
        if !(0.0..=1.0).contains(&self.degauss_fraction) {
            return bad(format!("degaussified fraction {} outside [0, 1]", self.degauss_fraction));
        }
        if self.family == Family::Negativity && self.modes.len() != 1 {
            return bad("negativity datasets use a single mode count".into());
        }
        if self.family == Family::Noon && self.max_photons == 0 {
            return bad("N00N photon number must be positive".into());
        }
        Ok(())
    }
}

pub const FORMAT_VERSION: u32 = 1;

/// Dataset header written ahead of the entry blocks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub family: Family,
    pub count: usize,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
    pub config: GenConfig,
    /// Wigner-minimum threshold separating the negativity classes.
    pub negativity_threshold: Option<f64>,
    pub bins: usize,
    /// Column layout of each record row in the binary blocks.
    pub record_fields: Vec<String>,
}

impl DatasetManifest {
    pub fn new(config: &GenConfig, negativity_threshold: Option<f64>) -> Self {
        let mut record_fields = vec!["mode".to_string(), "phase".to_string()];
        record_fields.extend((0..NUM_BINS).map(|i| format!("p{i}")));
        Self {
            format_version: FORMAT_VERSION,
            family: config.family,
            count: config.count,
            train: config.train_count,
            test: config.count - config.train_count,
            seed: config.seed,
            config: config.clone(),
            negativity_threshold,
            bins: NUM_BINS,
            record_fields,
        }
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "family: {}\nformat version: {}\nentries: {} ({} train, {} test)\nseed: {}\nmodes: {:?}\n",
            self.family, self.format_version, self.count, self.train, self.test, self.seed, c.modes
        );
        match self.family {
            Family::Pretrain | Family::Ood => {
                s += &format!(
                    "stellar ranks: {:?}\nsqueezing: [{}, {})\nmax displacement: {}\nefficiency: [{}, {}]\nkraus truncation: {}\n",
                    c.ranks, c.xi_range[0], c.xi_range[1], c.max_displacement, c.eta_range[0], c.eta_range[1], c.kraus_truncation
                )
            }
            Family::Negativity => {
                s += &format!(
                    "max squeezing: {}\nefficiency: [{}, {}]\ndegaussified fraction: {:.4}\n",
                    c.xi_range[1], c.eta_range[0], c.eta_range[1], c.degauss_fraction
                )
            }
            Family::Noon => s += &format!("photon numbers: 1..={}\nefficiency: [{}, {}]\n", c.max_photons, c.eta_range[0], c.eta_range[1]),
            Family::Cat => s += &format!("alpha: [0, {}]\nefficiency: [{}, {}]\n", c.max_alpha, c.eta_range[0], c.eta_range[1]),
            Family::Squeezed => {
                s += &format!("squeezing: [{}, {}]\nefficiency: [{}, {}]\n", c.xi_range[0], c.xi_range[1], c.eta_range[0], c.eta_range[1])
            }
        }
        if let Some(t) = self.negativity_threshold {
            s += &format!("negativity threshold: {t:.6e}\n");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub entries: Vec<StateDatasetEntry>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &StateDatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}
