//! JSON corpus manifests and corpus loading.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Trace;
use crate::io::plt::{parse_plt, read_geolife_dir};
use crate::io::trace_csv::{read_trace_csv, ColumnMap};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Plt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub user_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub files: Vec<PathBuf>,
    pub format: TraceFormat,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub users: Vec<ManifestEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CorpusManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for u in &self.users {
            if !seen.insert(u.user_id.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate user id '{}' in manifest",
                    u.user_id
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: CorpusManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads every listed user. `base` anchors relative paths.
    pub fn read(&self, base: &Path, columns: &ColumnMap) -> Result<Vec<Trace>> {
        self.validate()?;
        let mut csv_cache: HashMap<PathBuf, Vec<Trace>> = HashMap::new();
        let mut traces = Vec::with_capacity(self.users.len());
        for entry in &self.users {
            let mut parts = Vec::new();
            for file in &entry.files {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base.join(file)
                };
                match entry.format {
                    TraceFormat::Plt => parts.push(parse_plt(&path, &entry.user_id)?),
                    TraceFormat::Csv => {
                        if !csv_cache.contains_key(&path) {
                            let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                            let read = read_trace_csv(
                                f,
                                columns,
                                &entry.user_id,
                                &path.display().to_string(),
                            )?;
                            csv_cache.insert(path.clone(), read);
                        }
                        let found: Vec<Trace> = csv_cache[&path]
                            .iter()
                            .filter(|t| t.user_id == entry.user_id)
                            .cloned()
                            .collect();
                        if found.is_empty() {
                            log::warn!("{}: no rows for user '{}'", path.display(), entry.user_id);
                        }
                        parts.extend(found);
                    }
                }
            }
            traces.push(merge_traces(&entry.user_id, parts)?);
        }
        Ok(traces)
    }
}

/// Concatenates traces of one user, keeping each part's sessions. Parts
/// that interleave in time collapse into one sorted single-session trace.
pub fn merge_traces(user_id: &str, parts: Vec<Trace>) -> Result<Trace> {
    let mut points = Vec::new();
    let mut sessions = Vec::new();
    for part in parts {
        let offset = points.len();
        sessions.extend(
            part.session_ranges()
                .into_iter()
                .map(|r| r.start + offset..r.end + offset),
        );
        points.extend(part.points);
    }
    if points.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Ok(Trace::new(user_id, points));
    }
    Trace::with_sessions(user_id, points, sessions)
}

/// Loads a corpus from a manifest file, a directory holding `manifest.json`,
/// a GeoLife `Data/` directory, a trace CSV or a single PLT file.
pub fn load_corpus(path: &Path) -> Result<Vec<Trace>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let columns = ColumnMap::default();
    if meta.is_dir() {
        let manifest = path.join(MANIFEST_FILE);
        if manifest.is_file() {
            return CorpusManifest::load(&manifest)?.read(path, &columns);
        }
        return read_geolife_dir(path);
    }
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "user".into());
    match ext.as_str() {
        "json" => {
            CorpusManifest::load(path)?.read(path.parent().unwrap_or(Path::new(".")), &columns)
        }
        "csv" => {
            let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_trace_csv(f, &columns, &stem, &path.display().to_string())
        }
        "plt" => Ok(vec![parse_plt(path, &stem)?]),
        _ => Err(Error::Config(format!(
            "{}: expected a directory, .json manifest, .csv or .plt file",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_users_are_rejected() {
        let text = r#"{"users":[{"user_id":"a","files":["x.csv"],"format":"csv"},{"user_id":"a","files":["y.csv"],"format":"csv"}]}"#;
        assert!(matches!(
            CorpusManifest::from_json(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn manifest_selects_users_from_shared_csv() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("t.csv"),
            "user,lat,lon,timestamp,session\na,1,1,2016-01-01T00:00:00,0\nb,2,2,2016-01-01T00:00:00,0\na,1,1,2016-01-01T01:00:00,1\n",
        )
        .unwrap();
        let m = CorpusManifest {
            users: vec![
                ManifestEntry {
                    user_id: "b".into(),
                    files: vec!["t.csv".into()],
                    format: TraceFormat::Csv,
                },
                ManifestEntry {
                    user_id: "a".into(),
                    files: vec!["t.csv".into()],
                    format: TraceFormat::Csv,
                },
            ],
            notes: vec!["test".into()],
        };
        m.save(&dir.path().join(MANIFEST_FILE)).unwrap();
        let traces = load_corpus(dir.path()).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].user_id, "b");
        assert_eq!(traces[1].len(), 2);
        assert_eq!(traces[1].sessions, vec![0..1, 1..2]);
        assert_eq!(
            CorpusManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap(),
            m
        );
    }

    #[test]
    fn unknown_extension_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, "").unwrap();
        assert!(matches!(load_corpus(&p), Err(Error::Config(_))));
    }
}
