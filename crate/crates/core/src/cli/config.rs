use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::analysis::TsneConfig;
use crate::datasets::GenConfig;
use crate::error::{Error, Result};
use crate::neural::{FinetuneConfig, TrainConfig};

/// Contents of a `--config` TOML file. Every table is optional and may
/// set any subset of the fields of the matching config struct.
#[derive(Clone, Debug, Default, PartialEq, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub desk: Option<bool>,
    pub gen: Value,
    pub train: Value,
    pub finetune: Value,
    pub tsne: Value,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("config file: {e}")))
    }
}

fn merge_into(base: &mut Value, over: &Value, path: &str) -> Result<()> {
    match (base, over) {
        (_, Value::Null) => Ok(()),
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let key = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b.get_mut(k).ok_or_else(|| Error::InvalidArgument(format!("unknown config key '{key}'")))?;
                merge_into(slot, v, &key)?;
            }
            Ok(())
        }
        (b, o) => {
            *b = o.clone();
            Ok(())
        }
    }
}

/// Overlays the fields present in `over` onto `defaults`. Keys that the
/// target struct does not have are rejected.
pub fn merge<T: Serialize + DeserializeOwned>(defaults: &T, over: &Value) -> Result<T> {
    let mut base = serde_json::to_value(defaults)?;
    merge_into(&mut base, over, "")?;
    serde_json::from_value(base).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
}

/// The fully resolved settings of one command, after defaults, the config
/// file and the flags are combined. Written into every output manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen: Option<GenConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finetune: Option<FinetuneConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsne: Option<TsneConfig>,
    /// Command-specific flags that are not part of a config struct.
    pub options: serde_json::Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every output as `<output>.manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

impl RunManifest {
    pub fn new(config: RunConfig, inputs: &[&Path], outputs: &[&Path]) -> Result<Self> {
        let inputs = inputs.iter().map(|p| Ok(InputHash { path: p.to_path_buf(), sha256: sha256_file(p)? })).collect::<Result<_>>()?;
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs,
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
        })
    }

    /// Writes the manifest beside the first output.
    pub fn write(&self) -> Result<PathBuf> {
        let first = self.outputs.first().ok_or_else(|| Error::InvalidArgument("manifest without outputs".into()))?;
        let path = manifest_path(first);
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Family;

    #[test]
    fn file_values_override_defaults() {
        let file = FileConfig::parse("seed = 3\n[gen]\ncount = 12\nxi_range = [0.0, 0.5]\n[train]\nadam = { lr = 0.01 }\n").unwrap();
        assert_eq!(file.seed, Some(3));
        let gen = merge(&GenConfig::desk(Family::Cat), &file.gen).unwrap();
        assert_eq!(gen.count, 12);
        assert_eq!(gen.xi_range, [0.0, 0.5]);
        assert_eq!(gen.family, Family::Cat);
        let train = merge(&TrainConfig::default(), &file.train).unwrap();
        assert_eq!(train.adam.lr, 0.01);
        assert_eq!(train.epochs, TrainConfig::default().epochs);
        let untouched = merge(&TsneConfig::default(), &file.tsne).unwrap();
        assert_eq!(untouched, TsneConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let file = FileConfig::parse("[gen]\ncuont = 12\n").unwrap();
        assert!(matches!(merge(&GenConfig::desk(Family::Cat), &file.gen), Err(Error::InvalidArgument(_))));
        assert!(FileConfig::parse("banana = 1\n").is_err());
        let file = FileConfig::parse("[train]\nepochs = \"many\"\n").unwrap();
        assert!(merge(&TrainConfig::default(), &file.train).is_err());
    }

    #[test]
    fn manifests_hash_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        // SHA-256 of "abc"
        assert_eq!(sha256_file(&input).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let out = dir.path().join("out.csv");
        fs::write(&out, "x").unwrap();
        let m = RunManifest::new(RunConfig { command: "gen".into(), ..RunConfig::default() }, &[&input], &[&out]).unwrap();
        let written = m.write().unwrap();
        assert_eq!(written, dir.path().join("out.csv.manifest.json"));
        let back: RunManifest = serde_json::from_str(&fs::read_to_string(written).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
