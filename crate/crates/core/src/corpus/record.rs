//! Labeled and unlabeled requirement corpora and their file loaders.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::clean::Cleaner;
use crate::error::{Error, Result};

/// Largest effort accepted on ingest.
pub const MAX_EFFORT: f64 = 100.0;

/// One user story with its story-point label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementRecord {
    pub id: String,
    #[serde(rename = "project")]
    pub project_id: String,
    pub text: String,
    pub effort: f64,
}

/// Labeled corpus. Record ids are unique and every project is listed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCorpus {
    records: Vec<RequirementRecord>,
    projects: BTreeSet<String>,
}

impl LabeledCorpus {
    pub fn new(records: Vec<RequirementRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Config(format!("duplicate record id `{}`", r.id)));
            }
            check_effort(r.effort).map_err(|reason| Error::Config(format!("record `{}`: {reason}", r.id)))?;
        }
        let projects = records.iter().map(|r| r.project_id.clone()).collect();
        Ok(Self { records, projects })
    }

    pub fn records(&self) -> &[RequirementRecord] {
        &self.records
    }

    pub fn projects(&self) -> &BTreeSet<String> {
        &self.projects
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ids of records whose text is empty after cleaning.
    pub fn degenerate_ids(&self, cleaner: &Cleaner) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| cleaner.clean(&r.text).is_empty())
            .map(|r| r.id.clone())
            .collect()
    }

    /// Writes the canonical JSONL form (`id`, `project`, `text`, `effort`).
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Unlabeled requirement documents in raw form, with sentence punctuation intact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnlabeledCorpus {
    documents: Vec<String>,
}

impl UnlabeledCorpus {
    /// Drops documents that are empty after cleaning.
    pub fn new(documents: impl IntoIterator<Item = String>, cleaner: &Cleaner) -> Self {
        Self {
            documents: documents
                .into_iter()
                .filter(|d| !cleaner.clean(d).is_empty())
                .collect(),
        }
    }

    pub fn documents(&self) -> &[String] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

impl From<&LabeledCorpus> for UnlabeledCorpus {
    fn from(corpus: &LabeledCorpus) -> Self {
        Self {
            documents: corpus.records.iter().map(|r| r.text.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabeledFormat {
    Csv,
    Jsonl,
}

impl LabeledFormat {
    /// Guesses from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => LabeledFormat::Csv,
            _ => LabeledFormat::Jsonl,
        }
    }
}

/// A record that could not be ingested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    /// 1-based line (jsonl) or data row (csv).
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

/// Result of [`load_labeled`]: the corpus plus everything that was set aside.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: LabeledCorpus,
    pub rejected: Vec<Rejection>,
    /// Records kept in the corpus whose text cleans to nothing.
    pub degenerate: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct IngestSummary {
    pub records: usize,
    pub projects: usize,
    pub rejected: Vec<Rejection>,
    pub degenerate: Vec<String>,
}

impl Ingested {
    pub fn summary(&self) -> IngestSummary {
        IngestSummary {
            records: self.corpus.len(),
            projects: self.corpus.projects().len(),
            rejected: self.rejected.clone(),
            degenerate: self.degenerate.clone(),
        }
    }
}

fn check_effort(effort: f64) -> std::result::Result<(), String> {
    if !effort.is_finite() {
        Err(format!("effort {effort} is not finite"))
    } else if effort <= 0.0 {
        Err(format!("effort must be positive, got {effort}"))
    } else if effort > MAX_EFFORT {
        Err(format!("effort {effort} exceeds {MAX_EFFORT}"))
    } else {
        Ok(())
    }
}

fn parse_effort(raw: &str) -> std::result::Result<f64, String> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("effort `{raw}` is not numeric"))?;
    check_effort(value)?;
    Ok(value)
}

/// Loads a labeled corpus. Per-record problems become [`Rejection`]s.
///
/// CSV files need the columns `issuekey`, `title`, `description` and
/// `storypoint`; `project` is read when present and otherwise taken from the
/// issue key prefix (`XD-123` belongs to `XD`). Title and description are
/// joined with a single space.
pub fn load_labeled(path: &Path, format: LabeledFormat) -> Result<Ingested> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let (records, mut rejected) = match format {
        LabeledFormat::Csv => read_csv(path)?,
        LabeledFormat::Jsonl => read_jsonl(path)?,
    };
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(records.len());
    for (line, record) in records {
        if seen.insert(record.id.clone()) {
            kept.push(record);
        } else {
            rejected.push(Rejection {
                line,
                id: Some(record.id),
                reason: "duplicate id".into(),
            });
        }
    }
    rejected.sort_by_key(|r| r.line);
    let corpus = LabeledCorpus::new(kept)?;
    let degenerate = corpus.degenerate_ids(&Cleaner::default());
    Ok(Ingested {
        corpus,
        rejected,
        degenerate,
    })
}

type Parsed = (Vec<(usize, RequirementRecord)>, Vec<Rejection>);

fn read_csv(path: &Path) -> Result<Parsed> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let key_col = column("issuekey")?;
    let title_col = column("title")?;
    let desc_col = column("description")?;
    let sp_col = column("storypoint")?;
    let project_col = column("project").ok();

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 1;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                rejected.push(Rejection {
                    line,
                    id: None,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let field = |c: usize| row.get(c).unwrap_or("").trim();
        let id = field(key_col).to_string();
        if id.is_empty() {
            rejected.push(Rejection {
                line,
                id: None,
                reason: "missing issuekey".into(),
            });
            continue;
        }
        let effort = match parse_effort(field(sp_col)) {
            Ok(e) => e,
            Err(reason) => {
                rejected.push(Rejection {
                    line,
                    id: Some(id),
                    reason,
                });
                continue;
            }
        };
        let project_id = match project_col {
            Some(c) if !field(c).is_empty() => field(c).to_string(),
            _ => id.rsplit_once('-').map_or(id.as_str(), |(p, _)| p).to_string(),
        };
        let text = match (field(title_col), field(desc_col)) {
            (t, "") => t.to_string(),
            ("", d) => d.to_string(),
            (t, d) => format!("{t} {d}"),
        };
        records.push((
            line,
            RequirementRecord {
                id,
                project_id,
                text,
                effort,
            },
        ));
    }
    Ok((records, rejected))
}

fn read_jsonl(path: &Path) -> Result<Parsed> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_jsonl_record(&line) {
            Ok(r) => records.push((line_no, r)),
            Err((id, reason)) => rejected.push(Rejection {
                line: line_no,
                id,
                reason,
            }),
        }
    }
    Ok((records, rejected))
}

fn parse_jsonl_record(line: &str) -> std::result::Result<RequirementRecord, (Option<String>, String)> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| (None, e.to_string()))?;
    let text_field = |key: &str| match value.get(key) {
        Some(serde_json::Value::String(s)) => Some(s.clone()),
        Some(serde_json::Value::Number(n)) => Some(n.to_string()),
        _ => None,
    };
    let id = text_field("id").ok_or((None, "missing `id`".to_string()))?;
    let project_id = text_field("project").ok_or((Some(id.clone()), "missing `project`".to_string()))?;
    let text = text_field("text").ok_or((Some(id.clone()), "missing `text`".to_string()))?;
    let effort = match value.get("effort") {
        Some(serde_json::Value::Number(n)) => {
            let e = n.as_f64().unwrap_or(f64::NAN);
            check_effort(e).map(|_| e)
        }
        Some(serde_json::Value::String(s)) => parse_effort(s),
        Some(other) => Err(format!("effort `{other}` is not numeric")),
        None => Err("missing `effort`".to_string()),
    }
    .map_err(|reason| (Some(id.clone()), reason))?;
    Ok(RequirementRecord {
        id,
        project_id,
        text,
        effort,
    })
}

/// Loads one document per line. Lines that parse as a JSON object contribute
/// their `text` field; other lines are taken verbatim. Blank lines and lines
/// that clean to nothing are dropped.
pub fn load_unlabeled(path: &Path) -> Result<UnlabeledCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let cleaner = Cleaner::default();
    let mut documents = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let doc = if trimmed.starts_with('{') {
            match serde_json::from_str::<serde_json::Value>(trimmed) {
                Ok(v) => match v.get("text").and_then(|t| t.as_str()) {
                    Some(t) => t.to_string(),
                    None => continue,
                },
                Err(_) => trimmed.to_string(),
            }
        } else {
            trimmed.to_string()
        };
        documents.push(doc);
    }
    let corpus = UnlabeledCorpus::new(documents, &cleaner);
    if corpus.is_empty() {
        return Err(Error::NoDocuments(path.to_path_buf()));
    }
    Ok(corpus)
}
