//! Corpus manifests: one utterance per line, tab-separated
//! `utterance_id speaker_id label_path mcep_path logf0_path ap_path`.
//! Lines starting with `#` and blank lines are ignored. Relative paths are
//! resolved against the directory holding the manifest.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::io::read_feature_file;
use super::sequence::{FeatureKind, FeatureSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub label_path: PathBuf,
    pub mcep_path: PathBuf,
    pub logf0_path: PathBuf,
    pub ap_path: PathBuf,
}

/// All four streams of one utterance, length-checked.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub labels: FeatureSequence,
    pub mcep: FeatureSequence,
    pub logf0: FeatureSequence,
    pub ap: FeatureSequence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    base_dir: PathBuf,
    records: Vec<UtteranceRecord>,
}

impl CorpusManifest {
    pub fn new(base_dir: impl Into<PathBuf>, records: Vec<UtteranceRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            for (name, v) in [
                ("utterance_id", &r.utterance_id),
                ("speaker_id", &r.speaker_id),
            ] {
                if v.is_empty() || v.contains(['\t', '\n']) {
                    return Err(Error::Validation(format!("invalid {name} {v:?}")));
                }
            }
            if !seen.insert((r.speaker_id.as_str(), r.utterance_id.as_str())) {
                return Err(Error::Validation(format!(
                    "duplicate utterance {} for speaker {}",
                    r.utterance_id, r.speaker_id
                )));
            }
        }
        Ok(Self {
            base_dir: base_dir.into(),
            records,
        })
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(Error::Validation(format!(
                    "manifest line {}: expected 6 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            records.push(UtteranceRecord {
                utterance_id: fields[0].to_string(),
                speaker_id: fields[1].to_string(),
                label_path: fields[2].into(),
                mcep_path: fields[3].into(),
                logf0_path: fields[4].into(),
                ap_path: fields[5].into(),
            });
        }
        Self::new(base_dir, records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# utterance_id\tspeaker_id\tlabel\tmcep\tlogf0\tap\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.utterance_id,
                r.speaker_id,
                r.label_path.display(),
                r.mcep_path.display(),
                r.logf0_path.display(),
                r.ap_path.display()
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct speakers in order of first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .map(|r| r.speaker_id.as_str())
            .filter(|s| seen.insert(*s))
            .collect()
    }

    pub fn filter(&self, mut keep: impl FnMut(&UtteranceRecord) -> bool) -> Self {
        Self {
            base_dir: self.base_dir.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    pub fn for_speaker(&self, speaker: &str) -> Self {
        self.filter(|r| r.speaker_id == speaker)
    }

    pub fn find(&self, speaker: &str, utterance: &str) -> Option<&UtteranceRecord> {
        self.records
            .iter()
            .find(|r| r.speaker_id == speaker && r.utterance_id == utterance)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Reads all four streams and checks they share one frame count.
    pub fn load_utterance(&self, r: &UtteranceRecord) -> Result<Utterance> {
        let labels = read_feature_file(self.resolve(&r.label_path), FeatureKind::Label)?;
        let mcep = read_feature_file(self.resolve(&r.mcep_path), FeatureKind::Mcep)?;
        let logf0 = read_feature_file(self.resolve(&r.logf0_path), FeatureKind::LogF0)?;
        let ap = read_feature_file(self.resolve(&r.ap_path), FeatureKind::Aperiodicity)?;
        let t = labels.len();
        for (name, s) in [("mcep", &mcep), ("logf0", &logf0), ("aperiodicity", &ap)] {
            if s.len() != t {
                return Err(Error::Validation(format!(
                    "utterance {}/{}: {name} has {} frames, labels have {t}",
                    r.speaker_id,
                    r.utterance_id,
                    s.len()
                )));
            }
        }
        Ok(Utterance {
            id: r.utterance_id.clone(),
            speaker: r.speaker_id.clone(),
            labels,
            mcep,
            logf0,
            ap,
        })
    }

    pub fn load_all(&self) -> Result<Vec<Utterance>> {
        self.records
            .iter()
            .map(|r| self.load_utterance(r))
            .collect()
    }
}
