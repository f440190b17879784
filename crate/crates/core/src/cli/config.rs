use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{generate_synthetic_year, load_csv, OperatingPointSet, SyntheticYearConfig};
use crate::error::{Error, Result};
use crate::scanning::ScanConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv(PathBuf),
    Synthetic(SyntheticYearConfig),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticYearConfig::default())
    }
}

/// Everything a run needs; one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub scan: ScanConfig,
    pub out: Option<PathBuf>,
    /// Keep the full-scan trace from a previous run in the same directory.
    pub reuse_full_trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            scan: ScanConfig::default(),
            out: None,
            reuse_full_trace: true,
        }
    }
}

/// Metadata written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub synthetic: SyntheticYearConfig,
    pub informative: Vec<usize>,
    pub informative_names: Vec<String>,
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

/// The dataset plus the attributes known to drive the synthetic oracle.
pub fn load_dataset(source: &DatasetSource) -> Result<(OperatingPointSet, Option<Vec<usize>>)> {
    match source {
        DatasetSource::Synthetic(cfg) => {
            let year = generate_synthetic_year(cfg)?;
            Ok((year.set, Some(year.informative)))
        }
        DatasetSource::Csv(path) => {
            let set = load_csv(path)?;
            let meta = meta_path(path);
            let informative = if meta.exists() {
                let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
                let m: DatasetMeta = serde_json::from_str(&text)?;
                Some(m.informative)
            } else {
                None
            };
            Ok((set, informative))
        }
    }
}

/// Parse a `--set` value: JSON when it parses, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Apply `dotted.path=value` to a JSON document, creating objects on the
/// way.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::InvalidConfig(format!("override `{assignment}` is not of the form path=value"))
    })?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::InvalidConfig(format!("override path `{path}` is malformed")));
    }
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return Err(Error::InvalidConfig(format!(
                    "override `{path}`: `{}` is not an object",
                    keys[..i].join(".")
                )));
            }
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            map.insert(key.to_string(), parse_value(raw));
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Deserialize with the failing key path in the error message.
pub fn from_value(doc: Value) -> Result<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        Error::InvalidConfig(format!("at `{path}`: {}", e.into_inner()))
    })?;
    cfg.scan.validate()?;
    if let DatasetSource::Synthetic(s) = &cfg.dataset {
        s.validate()?;
    }
    Ok(cfg)
}

/// Start from `base` (a manifest's config) or the optional config file,
/// apply overrides and validate.
pub fn resolve(
    base: Option<Value>,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<(RunConfig, Value)> {
    let mut doc = match (base, file) {
        (Some(v), _) => v,
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| {
                Error::InvalidConfig(format!("{}: {e}", p.display()))
            })?
        }
        (None, None) => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg = from_value(doc)?;
    let canonical = serde_json::to_value(&cfg)?;
    Ok((cfg, canonical))
}
