//! Dataset manifest: one CSV row per eye with image/mask paths, split and
//! diagnosis label.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fundus_core::classifier::DiagLabel;
use thiserror::Error;

pub const MANIFEST_HEADER: &str = "id,image,disc_mask,cup_mask,split,label";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("manifest references missing files: {0}")]
    MissingFiles(String),
    #[error("manifest has no entries")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseLabel {
    Glaucoma,
    Normal,
    Unknown,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Glaucoma => "glaucoma",
            CaseLabel::Normal => "normal",
            CaseLabel::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "glaucoma" => Some(CaseLabel::Glaucoma),
            "normal" => Some(CaseLabel::Normal),
            "unknown" | "" => Some(CaseLabel::Unknown),
            _ => None,
        }
    }

    pub fn to_diag(self) -> Option<DiagLabel> {
        match self {
            CaseLabel::Glaucoma => Some(DiagLabel::Glaucoma),
            CaseLabel::Normal => Some(DiagLabel::Normal),
            CaseLabel::Unknown => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub disc_mask: PathBuf,
    pub cup_mask: PathBuf,
    pub split: Split,
    pub label: CaseLabel,
}

#[derive(Clone, Debug)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Loads and validates a manifest. Relative paths resolve against the
    /// manifest's directory; every referenced file must exist.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(ManifestError::Empty)?;
        if header.trim() != MANIFEST_HEADER {
            return Err(ManifestError::Malformed {
                line: 1,
                msg: format!("header must be `{MANIFEST_HEADER}`"),
            });
        }

        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(ManifestError::Malformed {
                    line: line_no,
                    msg: format!("expected 6 fields, found {}", fields.len()),
                });
            }
            let id = fields[0].to_string();
            if id.is_empty() {
                return Err(ManifestError::Malformed {
                    line: line_no,
                    msg: "empty id".into(),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(ManifestError::DuplicateId(id));
            }
            let split = Split::parse(fields[4]).ok_or_else(|| ManifestError::Malformed {
                line: line_no,
                msg: format!("split must be train or test, got `{}`", fields[4]),
            })?;
            let label = CaseLabel::parse(fields[5]).ok_or_else(|| ManifestError::Malformed {
                line: line_no,
                msg: format!(
                    "label must be glaucoma, normal or unknown, got `{}`",
                    fields[5]
                ),
            })?;
            entries.push(ManifestEntry {
                id,
                image: base.join(fields[1]),
                disc_mask: base.join(fields[2]),
                cup_mask: base.join(fields[3]),
                split,
                label,
            });
        }
        if entries.is_empty() {
            return Err(ManifestError::Empty);
        }

        let mut missing = Vec::new();
        for e in &entries {
            for p in [&e.image, &e.disc_mask, &e.cup_mask] {
                if !p.is_file() {
                    missing.push(format!("{} ({})", e.id, p.display()));
                }
            }
        }
        if !missing.is_empty() {
            return Err(ManifestError::MissingFiles(missing.join(", ")));
        }
        Ok(Self { entries })
    }

    pub fn split_counts(&self) -> (usize, usize) {
        let train = self
            .entries
            .iter()
            .filter(|e| e.split == Split::Train)
            .count();
        (train, self.entries.len() - train)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_dataset(dir: &Path, rows: &[&str]) -> PathBuf {
        std::fs::create_dir_all(dir).unwrap();
        // a tiny valid png for existence checks
        let img = fundus_core::imaging::GrayImage::filled(2, 2, 7);
        fundus_core::imaging::save_gray_png(&img, &dir.join("f.png")).unwrap();
        let manifest = dir.join("manifest.csv");
        let mut text = format!("{MANIFEST_HEADER}\n");
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        std::fs::write(&manifest, text).unwrap();
        manifest
    }

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir()
            .join("fundus-manifest-tests")
            .join(name);
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn loads_and_counts_splits() {
        let dir = tmp("ok");
        let m = write_dataset(
            &dir,
            &[
                "a,f.png,f.png,f.png,train,glaucoma",
                "b,f.png,f.png,f.png,train,normal",
                "c,f.png,f.png,f.png,test,unknown",
            ],
        );
        let manifest = Manifest::load(&m).unwrap();
        assert_eq!(manifest.split_counts(), (2, 1));
        assert_eq!(manifest.entries[0].label, CaseLabel::Glaucoma);
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tmp("dup");
        let m = write_dataset(
            &dir,
            &[
                "a,f.png,f.png,f.png,train,glaucoma",
                "a,f.png,f.png,f.png,test,normal",
            ],
        );
        match Manifest::load(&m) {
            Err(ManifestError::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_is_reported_with_id() {
        let dir = tmp("missing");
        let m = write_dataset(&dir, &["a,f.png,nope.png,f.png,train,glaucoma"]);
        match Manifest::load(&m) {
            Err(ManifestError::MissingFiles(msg)) => assert!(msg.contains('a')),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_malformed() {
        let dir = tmp("empty");
        std::fs::create_dir_all(&dir).unwrap();
        let m = dir.join("manifest.csv");
        std::fs::write(&m, "").unwrap();
        assert!(matches!(Manifest::load(&m), Err(ManifestError::Empty)));

        std::fs::write(&m, format!("{MANIFEST_HEADER}\n")).unwrap();
        assert!(matches!(Manifest::load(&m), Err(ManifestError::Empty)));
    }

    #[test]
    fn bad_split_and_field_count_are_rejected() {
        let dir = tmp("badsplit");
        let m = write_dataset(&dir, &["a,f.png,f.png,f.png,validation,glaucoma"]);
        assert!(matches!(
            Manifest::load(&m),
            Err(ManifestError::Malformed { line: 2, .. })
        ));

        let m = write_dataset(&tmp("badfields"), &["a,f.png,f.png,train,glaucoma"]);
        assert!(matches!(
            Manifest::load(&m),
            Err(ManifestError::Malformed { .. })
        ));
    }
}
