use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ColumnKind, Schema};
use crate::error::{Error, Result};

const BUNDLED_MANIFEST: &str = include_str!("../../data/datasets.toml");

const CENSUS_COLUMNS: [(&str, ColumnKind); 15] = [
    ("age", ColumnKind::Continuous),
    ("workclass", ColumnKind::Categorical),
    ("fnlwgt", ColumnKind::Continuous),
    ("education", ColumnKind::Categorical),
    ("education_num", ColumnKind::Continuous),
    ("marital_status", ColumnKind::Categorical),
    ("occupation", ColumnKind::Categorical),
    ("relationship", ColumnKind::Categorical),
    ("race", ColumnKind::Categorical),
    ("sex", ColumnKind::Categorical),
    ("capital_gain", ColumnKind::Continuous),
    ("capital_loss", ColumnKind::Continuous),
    ("hours_per_week", ColumnKind::Continuous),
    ("native_country", ColumnKind::Categorical),
    ("income", ColumnKind::Categorical),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteFile {
    pub name: String,
    pub url: String,
    /// Hex digest; empty when not yet pinned.
    #[serde(default)]
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteDataset {
    #[serde(default)]
    pub description: String,
    pub files: Vec<RemoteFile>,
}

/// Checksum manifest of downloadable datasets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FetchManifest(pub BTreeMap<String, RemoteDataset>);

impl FetchManifest {
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_MANIFEST).expect("bundled manifest parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Result<&RemoteDataset> {
        self.0
            .get(name)
            .ok_or_else(|| Error::Config(format!("dataset '{name}' is not in the fetch manifest")))
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// Destination for raw and prepared files.
    pub dir: PathBuf,
    pub manifest: FetchManifest,
    /// Accept files whose manifest entry has no checksum.
    pub allow_unpinned: bool,
    /// Read raw files from this directory instead of downloading.
    pub source_dir: Option<PathBuf>,
}

/// Outcome of census preparation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCensus {
    pub csv: String,
    pub schema: Schema,
    pub rows: usize,
    /// Rows dropped for a missing (`?`) field.
    pub dropped: usize,
}

/// Convert raw Adult files (comma-separated, no header) into one CSV with a
/// header. Comment lines (leading `|`) and blank lines are ignored, label
/// suffixes `.` from the test file are stripped, rows with a `?` field are
/// dropped and counted.
pub fn prepare_census(raw: &[&str]) -> Result<PreparedCensus> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CENSUS_COLUMNS.iter().map(|c| c.0))?;
    let (mut rows, mut dropped) = (0, 0);
    for text in raw {
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('|') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != CENSUS_COLUMNS.len() {
                return Err(Error::Parse {
                    row: line_no + 1,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", CENSUS_COLUMNS.len(), fields.len()),
                });
            }
            if fields.iter().any(|f| *f == "?" || f.is_empty()) {
                dropped += 1;
                continue;
            }
            let mut record = fields.clone();
            let label = record[14].trim_end_matches('.');
            record[14] = label;
            w.write_record(&record)?;
            rows += 1;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let schema = Schema {
        name: Some("census".into()),
        target: "income".into(),
        columns: CENSUS_COLUMNS[..14].iter().map(|(n, k)| (n.to_string(), *k)).collect(),
    };
    Ok(PreparedCensus {
        csv: String::from_utf8(bytes).expect("csv output is utf-8"),
        schema,
        rows,
        dropped,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn obtain(file: &RemoteFile, opts: &FetchOptions) -> Result<Vec<u8>> {
    match &opts.source_dir {
        Some(dir) => Ok(fs::read(dir.join(&file.name))?),
        None => {
            let mut response = ureq::get(&file.url)
                .call()
                .map_err(|e| Error::Download(format!("{}: {e}", file.url)))?;
            response
                .body_mut()
                .with_config()
                .limit(64 * 1024 * 1024)
                .read_to_vec()
                .map_err(|e| Error::Download(format!("{}: {e}", file.url)))
        }
    }
}

/// Download (or read) the census files, verify checksums, and write
/// `census.csv` plus `census.schema.toml` into `opts.dir`. Returns the
/// preparation summary and the computed digest of each raw file.
pub fn fetch_census(opts: &FetchOptions) -> Result<(PreparedCensus, Vec<(String, String)>)> {
    let entry = opts.manifest.get("census")?;
    let mut raw = Vec::new();
    let mut digests = Vec::new();
    for file in &entry.files {
        let path = opts.dir.join(&file.name);
        if file.sha256.is_empty() && !opts.allow_unpinned {
            return Err(Error::Checksum {
                path,
                expected: "<unpinned>".into(),
                got: "not downloaded; pass --allow-unpinned to accept an unverified file".into(),
            });
        }
        let bytes = obtain(file, opts)?;
        let got = sha256_hex(&bytes);
        if !file.sha256.is_empty() && !file.sha256.eq_ignore_ascii_case(&got) {
            return Err(Error::Checksum {
                path,
                expected: file.sha256.clone(),
                got,
            });
        }
        digests.push((file.name.clone(), got));
        raw.push(String::from_utf8_lossy(&bytes).into_owned());
    }
    let prepared = prepare_census(&raw.iter().map(String::as_str).collect::<Vec<_>>())?;
    fs::create_dir_all(&opts.dir)?;
    for (file, text) in entry.files.iter().zip(&raw) {
        fs::write(opts.dir.join(&file.name), text)?;
    }
    fs::write(opts.dir.join("census.csv"), &prepared.csv)?;
    fs::write(opts.dir.join("census.schema.toml"), prepared.schema.to_toml_string())?;
    Ok((prepared, digests))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_csv_str;

    const TRAIN: &str = "\
39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K
50, Self-emp-not-inc, 83311, Bachelors, 13, Married-civ-spouse, Exec-managerial, Husband, White, Male, 0, 0, 13, United-States, <=50K
38, Private, 215646, HS-grad, 9, Divorced, Handlers-cleaners, Not-in-family, White, Male, 0, 0, 40, United-States, <=50K
54, ?, 180211, Some-college, 10, Married-civ-spouse, ?, Husband, Asian-Pac-Islander, Male, 0, 0, 60, South, >50K
52, Self-emp-not-inc, 209642, HS-grad, 9, Married-civ-spouse, Exec-managerial, Husband, White, Male, 0, 0, 45, United-States, >50K

";
    const TEST: &str = "\
|1x3 Cross validator
25, Private, 226802, 11th, 7, Never-married, Machine-op-inspct, Own-child, Black, Male, 0, 0, 40, United-States, <=50K.
44, Private, 160323, Some-college, 10, Married-civ-spouse, Machine-op-inspct, Wife, Black, Female, 7688, 0, 40, Mexico, >50K.
";

    #[test]
    fn census_rows_are_cleaned_and_counted() {
        let p = prepare_census(&[TRAIN, TEST]).unwrap();
        assert_eq!((p.rows, p.dropped), (6, 1));
        assert!(!p.csv.contains(">50K."));
        let ds = load_csv_str(&p.csv, &p.schema, "census").unwrap();
        assert_eq!(ds.features().len(), 14);
        assert_eq!(ds.class_names(), &["<=50K".to_string(), ">50K".to_string()]);
        // Distinct categories per categorical column in the six kept rows:
        // workclass 3, education 4, marital 3, occupation 4, relationship 4,
        // race 2, sex 2, country 2; plus 6 continuous columns.
        assert_eq!(ds.n_columns(), 3 + 4 + 3 + 4 + 4 + 2 + 2 + 2 + 6);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(matches!(prepare_census(&["1, 2, 3"]), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn unpinned_files_need_explicit_consent() {
        let dir = tempfile::tempdir().unwrap();
        let opts = FetchOptions {
            dir: dir.path().join("out"),
            manifest: FetchManifest::bundled(),
            allow_unpinned: false,
            source_dir: None,
        };
        assert!(matches!(fetch_census(&opts), Err(Error::Checksum { .. })));
    }

    #[test]
    fn local_source_is_verified_and_prepared() {
        let src = tempfile::tempdir().unwrap();
        fs::write(src.path().join("adult.data"), TRAIN).unwrap();
        fs::write(src.path().join("adult.test"), TEST).unwrap();
        let mut manifest = FetchManifest::bundled();
        let census = manifest.0.get_mut("census").unwrap();
        census.files[0].sha256 = sha256_hex(TRAIN.as_bytes());
        census.files[1].sha256 = "00".repeat(32);
        let out = tempfile::tempdir().unwrap();
        let mut opts = FetchOptions {
            dir: out.path().to_path_buf(),
            manifest,
            allow_unpinned: false,
            source_dir: Some(src.path().to_path_buf()),
        };
        assert!(matches!(fetch_census(&opts), Err(Error::Checksum { .. })));
        opts.manifest.0.get_mut("census").unwrap().files[1].sha256 = sha256_hex(TEST.as_bytes());
        let (prepared, digests) = fetch_census(&opts).unwrap();
        assert_eq!(prepared.rows, 6);
        assert_eq!(digests.len(), 2);
        assert!(out.path().join("census.csv").is_file());
        assert!(out.path().join("census.schema.toml").is_file());
    }
}
