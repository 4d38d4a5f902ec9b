use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::{load_embedding_file, save_embedding_file, EmbeddingFile};
use super::{normalize_f32, EmbeddingVector, ProxyMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileRole {
    IdProxies,
    NegProxies,
    TestStream,
}

impl FileRole {
    pub const ALL: [FileRole; 3] = [FileRole::IdProxies, FileRole::NegProxies, FileRole::TestStream];

    fn default_file_name(self) -> &'static str {
        match self {
            FileRole::IdProxies => "id_proxies.emb1",
            FileRole::NegProxies => "neg_proxies.emb1",
            FileRole::TestStream => "test_stream.emb1",
        }
    }
}

/// Ground-truth tag for one test sample. Only metrics ever look at it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroundTruth {
    Id {
        class: usize,
    },
    Ood {
        /// Optional OOD dataset name, used for per-dataset metric breakdowns.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset: Option<String>,
    },
}

impl GroundTruth {
    pub fn ood() -> Self {
        GroundTruth::Ood { dataset: None }
    }

    pub fn is_id(&self) -> bool {
        matches!(self, GroundTruth::Id { .. })
    }

    /// Compact text form used in record CSVs: `id:<class>`, `ood` or `ood:<dataset>`.
    pub fn to_tag(&self) -> String {
        match self {
            GroundTruth::Id { class } => format!("id:{class}"),
            GroundTruth::Ood { dataset: None } => "ood".to_string(),
            GroundTruth::Ood { dataset: Some(d) } => format!("ood:{d}"),
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        if tag == "ood" {
            return Some(GroundTruth::ood());
        }
        if let Some(d) = tag.strip_prefix("ood:") {
            return Some(GroundTruth::Ood {
                dataset: Some(d.to_string()),
            });
        }
        let class = tag.strip_prefix("id:")?.parse().ok()?;
        Some(GroundTruth::Id { class })
    }
}

/// The JSON manifest tying label names to EMB1 files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub id_label_names: Vec<String>,
    pub neg_label_names: Vec<String>,
    pub files: BTreeMap<FileRole, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<GroundTruth>>,
}

impl DatasetManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: DatasetManifest = serde_json::from_str(text)?;
        m.validate_labels()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that label lists are nonempty and that no name is both an ID and
    /// a negative label.
    pub fn validate_labels(&self) -> Result<()> {
        if self.id_label_names.is_empty() {
            return Err(Error::Manifest("id_label_names is empty".into()));
        }
        if self.neg_label_names.is_empty() {
            return Err(Error::Manifest("neg_label_names is empty".into()));
        }
        let ids: HashSet<&str> = self.id_label_names.iter().map(String::as_str).collect();
        if let Some(shared) = self.neg_label_names.iter().find(|n| ids.contains(n.as_str())) {
            return Err(Error::Manifest(format!(
                "label {shared:?} appears in both ID and negative label lists"
            )));
        }
        Ok(())
    }

    fn path_for(&self, role: FileRole, base: &Path) -> Result<PathBuf> {
        let rel = self
            .files
            .get(&role)
            .ok_or_else(|| Error::Manifest(format!("missing file entry for role {role:?}")))?;
        Ok(if rel.is_absolute() {
            rel.clone()
        } else {
            base.join(rel)
        })
    }
}

/// A fully ingested dataset: normalized proxies, normalized test stream and
/// optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id_label_names: Vec<String>,
    pub neg_label_names: Vec<String>,
    pub proxies: ProxyMatrix,
    pub stream: Vec<EmbeddingVector>,
    pub ground_truth: Option<Vec<GroundTruth>>,
}

fn check_count(role: FileRole, file: &EmbeddingFile, expected: usize) -> Result<()> {
    if file.count() != expected {
        return Err(Error::Manifest(format!(
            "{role:?} file holds {} rows but the manifest declares {expected}",
            file.count()
        )));
    }
    Ok(())
}

fn normalize_rows(file: &EmbeddingFile) -> Result<Vec<EmbeddingVector>> {
    file.rows()
        .enumerate()
        .map(|(i, row)| {
            normalize_f32(row).map_err(|e| match e {
                Error::NonFiniteValue { col, .. } => Error::NonFiniteValue { row: i, col },
                Error::ZeroVector { .. } => Error::Manifest(format!("row {i} is a zero vector")),
                other => other,
            })
        })
        .collect()
}

impl Dataset {
    pub fn new(
        id_label_names: Vec<String>,
        neg_label_names: Vec<String>,
        proxies: ProxyMatrix,
        stream: Vec<EmbeddingVector>,
        ground_truth: Option<Vec<GroundTruth>>,
    ) -> Result<Self> {
        let ds = Dataset {
            id_label_names,
            neg_label_names,
            proxies,
            stream,
            ground_truth,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let manifest = self.manifest();
        manifest.validate_labels()?;
        if self.id_label_names.len() != self.proxies.id_count()
            || self.neg_label_names.len() != self.proxies.neg_count()
        {
            return Err(Error::Manifest(format!(
                "{}+{} label names for a {}+{} proxy matrix",
                self.id_label_names.len(),
                self.neg_label_names.len(),
                self.proxies.id_count(),
                self.proxies.neg_count()
            )));
        }
        if let Some(v) = self.stream.iter().find(|v| v.dim() != self.proxies.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.proxies.dim(),
                found: v.dim(),
            });
        }
        if let Some(truth) = &self.ground_truth {
            if truth.len() != self.stream.len() {
                return Err(Error::LengthMismatch {
                    left: truth.len(),
                    right: self.stream.len(),
                });
            }
            let c = self.proxies.id_count();
            if let Some(bad) = truth.iter().find_map(|t| match t {
                GroundTruth::Id { class } if *class >= c => Some(*class),
                _ => None,
            }) {
                return Err(Error::Manifest(format!(
                    "ground truth class {bad} out of range for {c} ID labels"
                )));
            }
        }
        Ok(())
    }

    /// Loads a manifest and every file it references. Relative paths resolve
    /// against the manifest's directory.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let manifest = DatasetManifest::load(manifest_path)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

        let id_file = load_embedding_file(manifest.path_for(FileRole::IdProxies, base)?)?;
        let neg_file = load_embedding_file(manifest.path_for(FileRole::NegProxies, base)?)?;
        let test_file = load_embedding_file(manifest.path_for(FileRole::TestStream, base)?)?;
        check_count(FileRole::IdProxies, &id_file, manifest.id_label_names.len())?;
        check_count(FileRole::NegProxies, &neg_file, manifest.neg_label_names.len())?;

        let dim = id_file.dim();
        for f in [&neg_file, &test_file] {
            if f.count() > 0 && f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.dim(),
                });
            }
        }

        let id_rows = normalize_rows(&id_file)?;
        let neg_rows = normalize_rows(&neg_file)?;
        let proxies = ProxyMatrix::from_vectors(&id_rows, &neg_rows)?;
        let stream = normalize_rows(&test_file)?;
        Dataset::new(
            manifest.id_label_names,
            manifest.neg_label_names,
            proxies,
            stream,
            manifest.ground_truth,
        )
    }

    /// Manifest describing this dataset with the default file names.
    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            id_label_names: self.id_label_names.clone(),
            neg_label_names: self.neg_label_names.clone(),
            files: FileRole::ALL
                .iter()
                .map(|&r| (r, PathBuf::from(r.default_file_name())))
                .collect(),
            ground_truth: self.ground_truth.clone(),
        }
    }

    /// Writes the three EMB1 files and `manifest.json` into `dir`. Rows are
    /// unit-norm, so the unit-norm flag is set. Returns the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let c = self.proxies.id_count();
        let id_rows: Vec<&[f64]> = self.proxies.rows().take(c).collect();
        let neg_rows: Vec<&[f64]> = self.proxies.rows().skip(c).collect();
        let files = [
            (FileRole::IdProxies, EmbeddingFile::from_f64_rows(&id_rows)?),
            (FileRole::NegProxies, EmbeddingFile::from_f64_rows(&neg_rows)?),
            (FileRole::TestStream, EmbeddingFile::from_f64_rows(&self.stream)?),
        ];
        for (role, file) in files {
            let file = file.with_flags(super::FLAG_UNIT_NORM);
            save_embedding_file(dir.join(role.default_file_name()), &file)?;
        }
        let manifest_path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest())?;
        fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest_path)
    }

    pub fn len(&self) -> usize {
        self.stream.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stream.is_empty()
    }

    /// Number of ID and OOD samples according to ground truth.
    pub fn counts(&self) -> Option<(usize, usize)> {
        let truth = self.ground_truth.as_ref()?;
        let n_id = truth.iter().filter(|t| t.is_id()).count();
        Some((n_id, truth.len() - n_id))
    }

    /// Copy of the dataset whose stream (and ground truth) is `indices` in order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            id_label_names: self.id_label_names.clone(),
            neg_label_names: self.neg_label_names.clone(),
            proxies: self.proxies.clone(),
            stream: indices.iter().map(|&i| self.stream[i].clone()).collect(),
            ground_truth: self
                .ground_truth
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i].clone()).collect()),
        }
    }

    pub fn without_ground_truth(&self) -> Dataset {
        Dataset {
            ground_truth: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MANIFEST: &str = r#"{
        "id_label_names": ["goldfish", "tabby"],
        "neg_label_names": ["volcano", "scaffold", "lichen"],
        "files": {
            "id_proxies": "id.emb1",
            "neg_proxies": "neg.emb1",
            "test_stream": "test.emb1"
        },
        "ground_truth": [{"kind": "id", "class": 1}, {"kind": "ood"}, {"kind": "ood", "dataset": "sun"}]
    }"#;

    #[test]
    fn parses_manifest_json() {
        let m = DatasetManifest::from_json(MANIFEST).unwrap();
        assert_eq!(m.id_label_names.len(), 2);
        assert_eq!(m.files[&FileRole::TestStream], PathBuf::from("test.emb1"));
        let gt = m.ground_truth.unwrap();
        assert_eq!(gt[0], GroundTruth::Id { class: 1 });
        assert_eq!(gt[1], GroundTruth::ood());
        assert_eq!(
            gt[2],
            GroundTruth::Ood {
                dataset: Some("sun".into())
            }
        );
    }

    #[test]
    fn rejects_shared_label_names() {
        let bad = MANIFEST.replace("\"lichen\"", "\"tabby\"");
        let err = DatasetManifest::from_json(&bad).unwrap_err();
        assert!(matches!(err, Error::Manifest(msg) if msg.contains("tabby")));
    }

    #[test]
    fn truth_tags_round_trip() {
        for t in [
            GroundTruth::Id { class: 7 },
            GroundTruth::ood(),
            GroundTruth::Ood {
                dataset: Some("inat".into()),
            },
        ] {
            assert_eq!(GroundTruth::from_tag(&t.to_tag()), Some(t));
        }
        assert_eq!(GroundTruth::from_tag(""), None);
        assert_eq!(GroundTruth::from_tag("id:x"), None);
    }

    fn write(dir: &Path, name: &str, rows: &[&[f32]]) {
        let f = EmbeddingFile::from_rows(rows).unwrap();
        save_embedding_file(dir.join(name), &f).unwrap();
    }

    #[test]
    fn loads_dataset_and_checks_counts() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        write(d, "id.emb1", &[&[2.0, 0.0], &[0.0, 3.0]]);
        write(d, "neg.emb1", &[&[1.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]);
        write(d, "test.emb1", &[&[1.0, 0.0], &[0.0, 5.0], &[1.0, -1.0]]);
        fs::write(d.join("manifest.json"), MANIFEST).unwrap();
        let ds = Dataset::load(d.join("manifest.json")).unwrap();
        assert_eq!(ds.proxies.len(), 5);
        assert_eq!(ds.stream.len(), 3);
        assert!(ds.stream.iter().all(|v| (v.norm() - 1.0).abs() < 1e-5));
        assert_eq!(ds.counts(), Some((1, 2)));

        write(d, "neg.emb1", &[&[1.0, 1.0], &[-1.0, 0.0]]);
        assert!(matches!(
            Dataset::load(d.join("manifest.json")),
            Err(Error::Manifest(_))
        ));

        write(d, "neg.emb1", &[&[1.0, 1.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert!(matches!(
            Dataset::load(d.join("manifest.json")),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn zero_rows_are_rejected_at_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        write(d, "id.emb1", &[&[2.0, 0.0], &[0.0, 3.0]]);
        write(d, "neg.emb1", &[&[1.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]);
        write(d, "test.emb1", &[&[1.0, 0.0], &[0.0, 0.0], &[1.0, -1.0]]);
        fs::write(d.join("manifest.json"), MANIFEST).unwrap();
        assert!(matches!(
            Dataset::load(d.join("manifest.json")),
            Err(Error::Manifest(msg)) if msg.contains("row 1")
        ));
    }
}
