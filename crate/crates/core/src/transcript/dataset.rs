use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::record::{parse_encounter, FieldMap, RecordError};
use super::Encounter;
use crate::orders::OrderType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Custom,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Custom => "custom",
        }
    }

    /// Published encounter and order counts for the official shared-task
    /// splits.
    pub fn reference_stats(self) -> Option<DatasetStats> {
        match self {
            Split::Train => Some(DatasetStats {
                encounters: 63,
                followup: 25,
                imaging: 14,
                lab: 29,
                medication: 75,
                total: 143,
            }),
            Split::Dev => Some(DatasetStats {
                encounters: 100,
                followup: 41,
                imaging: 26,
                lab: 71,
                medication: 117,
                total: 255,
            }),
            Split::Custom => None,
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "valid" | "validation" => Ok(Split::Dev),
            "custom" => Ok(Split::Custom),
            other => Err(format!("unknown split `{other}` (expected train, dev or custom)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub encounters: usize,
    pub followup: usize,
    pub imaging: usize,
    pub lab: usize,
    pub medication: usize,
    pub total: usize,
}

impl DatasetStats {
    pub fn from_encounters(encounters: &[Encounter]) -> Self {
        let mut stats = DatasetStats {
            encounters: encounters.len(),
            ..Default::default()
        };
        for order in encounters.iter().flat_map(|e| e.gold_orders.iter().flatten()) {
            *stats.count_mut(order.order_type) += 1;
            stats.total += 1;
        }
        stats
    }

    pub fn count(&self, t: OrderType) -> usize {
        match t {
            OrderType::Medication => self.medication,
            OrderType::Lab => self.lab,
            OrderType::Imaging => self.imaging,
            OrderType::Followup => self.followup,
        }
    }

    fn count_mut(&mut self, t: OrderType) -> &mut usize {
        match t {
            OrderType::Medication => &mut self.medication,
            OrderType::Lab => &mut self.lab,
            OrderType::Imaging => &mut self.imaging,
            OrderType::Followup => &mut self.followup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    Strict,
    #[default]
    Lenient,
}

/// A record that could not be loaded, with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordIssue {
    pub location: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {source}")]
    Record {
        location: String,
        #[source]
        source: RecordError,
    },
    #[error("{location}: {message}")]
    Format { location: String, message: String },
    #[error("{location}: duplicate encounter id `{id}`")]
    DuplicateId { location: String, id: String },
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub encounters: Vec<Encounter>,
    pub stats: DatasetStats,
    /// Records skipped in lenient mode.
    pub issues: Vec<RecordIssue>,
}

/// Loads a dataset with the default field names.
pub fn load_dataset(path: &Path, split: Split, mode: LoadMode) -> Result<LoadReport, DatasetError> {
    load_dataset_with(path, split, mode, &FieldMap::default())
}

/// Loads every encounter found under `path`.
///
/// `path` may be a `.json` file (one record or an array of records), a
/// `.jsonl` file, or a directory of such files read in name order. For the
/// train and dev splits, a directory containing a `train`/`dev` entry
/// (subdirectory, `.json` or `.jsonl`) resolves to that entry.
///
/// In strict mode the first bad record aborts the load; in lenient mode it is
/// skipped and listed in [`LoadReport::issues`].
pub fn load_dataset_with(
    path: &Path,
    split: Split,
    mode: LoadMode,
    fields: &FieldMap,
) -> Result<LoadReport, DatasetError> {
    let root = resolve_split(path, split);
    let files = collect_files(&root)?;

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|source| DatasetError::Io {
            path: file.clone(),
            source,
        })?;
        for (location, doc) in documents(&file, &text) {
            let outcome = doc
                .map_err(|message| DatasetError::Format {
                    location: location.clone(),
                    message,
                })
                .and_then(|doc| {
                    parse_encounter(&doc, fields).map_err(|source| DatasetError::Record {
                        location: location.clone(),
                        source,
                    })
                })
                .and_then(|e| {
                    if seen.insert(e.id.clone()) {
                        Ok(e)
                    } else {
                        Err(DatasetError::DuplicateId {
                            location: location.clone(),
                            id: e.id,
                        })
                    }
                });
            match (outcome, mode) {
                (Ok(e), _) => report.encounters.push(e),
                (Err(err), LoadMode::Strict) => return Err(err),
                (Err(err), LoadMode::Lenient) => {
                    tracing::warn!(%location, error = %err, "skipping record");
                    report.issues.push(RecordIssue {
                        location,
                        message: err.to_string(),
                    });
                }
            }
        }
    }
    report.stats = DatasetStats::from_encounters(&report.encounters);
    Ok(report)
}

fn resolve_split(path: &Path, split: Split) -> PathBuf {
    if split == Split::Custom || !path.is_dir() {
        return path.to_path_buf();
    }
    let name = split.as_str();
    [
        path.join(name),
        path.join(format!("{name}.json")),
        path.join(format!("{name}.jsonl")),
    ]
    .into_iter()
    .find(|p| p.exists())
    .unwrap_or_else(|| path.to_path_buf())
}

fn collect_files(root: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let io = |source| DatasetError::Io {
        path: root.to_path_buf(),
        source,
    };
    let meta = fs::metadata(root).map_err(io)?;
    if meta.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(root).map_err(io)? {
        let p = entry.map_err(io)?.path();
        let is_data = matches!(p.extension().and_then(|e| e.to_str()), Some("json") | Some("jsonl"));
        if p.is_file() && is_data {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

type Document = (String, Result<Value, String>);

fn documents(file: &Path, text: &str) -> Vec<Document> {
    let name = file.display().to_string();
    if file.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        return text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(n, line)| {
                (
                    format!("{name}:{}", n + 1),
                    serde_json::from_str(line).map_err(|e| e.to_string()),
                )
            })
            .collect();
    }
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(items)) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("{name}[{i}]"), Ok(v)))
            .collect(),
        Ok(v) => vec![(name, Ok(v))],
        Err(e) => vec![(name, Err(e.to_string()))],
    }
}
