//! Ingestion of crowd-written user stories.
//!
//! Each data row of the requirements file becomes one [`UserStory`]. The
//! full sentence is rebuilt from the role/feature/benefit columns using the
//! user-story template, and the annotated application domain is parsed into
//! one of five [`DomainLabel`]s that serve as the evaluation reference.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("malformed row at line {0}")]
    MalformedRow(u64),
    #[error("duplicate story id {0}")]
    DuplicateId(u64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Application domain annotated by the story's author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainLabel {
    Health,
    Energy,
    Entertainment,
    Safety,
    Other,
}

impl DomainLabel {
    pub const ALL: [DomainLabel; 5] = [
        DomainLabel::Health,
        DomainLabel::Energy,
        DomainLabel::Entertainment,
        DomainLabel::Safety,
        DomainLabel::Other,
    ];

    /// Case-insensitive parse; anything that is not one of the four concrete
    /// domains (or "other" itself) lands in `Other`.
    pub fn parse(raw: &str) -> DomainLabel {
        let v = raw.trim();
        for label in Self::ALL {
            if v.eq_ignore_ascii_case(label.name()) {
                return label;
            }
        }
        DomainLabel::Other
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainLabel::Health => "Health",
            DomainLabel::Energy => "Energy",
            DomainLabel::Entertainment => "Entertainment",
            DomainLabel::Safety => "Safety",
            DomainLabel::Other => "Other",
        }
    }

    pub fn index(self) -> usize {
        match self {
            DomainLabel::Health => 0,
            DomainLabel::Energy => 1,
            DomainLabel::Entertainment => 2,
            DomainLabel::Safety => 3,
            DomainLabel::Other => 4,
        }
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserStory {
    pub id: u64,
    pub role: String,
    pub feature: String,
    pub benefit: String,
    pub domain: DomainLabel,
    pub tags: Vec<String>,
    pub full_text: String,
}

impl UserStory {
    pub fn new(
        id: u64,
        role: &str,
        feature: &str,
        benefit: &str,
        domain: DomainLabel,
        tags: Vec<String>,
    ) -> Self {
        let full_text = render_story(role, feature, benefit);
        UserStory {
            id,
            role: role.to_string(),
            feature: feature.to_string(),
            benefit: benefit.to_string(),
            domain,
            tags,
            full_text,
        }
    }
}

/// "As a {role}, I want {feature} so that {benefit}"
pub fn render_story(role: &str, feature: &str, benefit: &str) -> String {
    format!("As a {role}, I want {feature} so that {benefit}")
}

/// Comma-separated tag list, trimmed, empty entries dropped.
pub fn split_tags(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Header names for each field of a story.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub id: String,
    pub role: String,
    pub feature: String,
    pub benefit: String,
    pub domain: String,
    pub tags: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: "id".into(),
            role: "role".into(),
            feature: "feature".into(),
            benefit: "benefit".into(),
            domain: "domain".into(),
            tags: "tags".into(),
        }
    }
}

/// Stories in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    stories: Vec<UserStory>,
}

impl Corpus {
    /// Fails with `DuplicateId` if two stories share an id.
    pub fn from_stories(stories: Vec<UserStory>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(stories.len());
        for s in &stories {
            if !seen.insert(s.id) {
                return Err(CorpusError::DuplicateId(s.id));
            }
        }
        Ok(Corpus { stories })
    }

    pub fn stories(&self) -> &[UserStory] {
        &self.stories
    }

    pub fn len(&self) -> usize {
        self.stories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stories.is_empty()
    }

    pub fn labels(&self) -> Vec<DomainLabel> {
        self.stories.iter().map(|s| s.domain).collect()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.stories.iter().map(|s| s.id).collect()
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.stories.iter().position(|s| s.id == id)
    }

    /// Subset of stories at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Corpus {
        Corpus {
            stories: positions.iter().map(|&i| self.stories[i].clone()).collect(),
        }
    }
}

pub fn load_corpus(path: &Path, mapping: &ColumnMapping) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    read_corpus(file, mapping)
}

pub fn read_corpus<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .clone();
    let find = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let id_col = find(&mapping.id)?;
    let role_col = find(&mapping.role)?;
    let feature_col = find(&mapping.feature)?;
    let benefit_col = find(&mapping.benefit)?;
    let domain_col = find(&mapping.domain)?;
    let tags_col = find(&mapping.tags)?;

    let mut stories = Vec::new();
    let mut seen = HashSet::new();
    for (row_no, record) in rdr.records().enumerate() {
        // header is line 1
        let fallback_line = row_no as u64 + 2;
        let record = record.map_err(|e| csv_error(e, fallback_line))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(fallback_line);
        let field = |c: usize| record.get(c).ok_or(CorpusError::MalformedRow(line));

        let id: u64 = field(id_col)?
            .trim()
            .parse()
            .map_err(|_| CorpusError::MalformedRow(line))?;
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateId(id));
        }
        stories.push(UserStory::new(
            id,
            field(role_col)?.trim(),
            field(feature_col)?.trim(),
            field(benefit_col)?.trim(),
            DomainLabel::parse(field(domain_col)?),
            split_tags(field(tags_col)?),
        ));
    }
    Ok(Corpus { stories })
}

fn csv_error(err: csv::Error, fallback_line: u64) -> CorpusError {
    let line = err
        .position()
        .map(|p| p.line())
        .unwrap_or(fallback_line);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CorpusError::Io(e),
        _ => CorpusError::MalformedRow(line),
    }
}

/// Story count per domain; every label is present, possibly with zero.
pub fn domain_histogram(corpus: &Corpus) -> BTreeMap<DomainLabel, usize> {
    let mut hist: BTreeMap<DomainLabel, usize> =
        DomainLabel::ALL.iter().map(|&d| (d, 0)).collect();
    for s in corpus.stories() {
        *hist.entry(s.domain).or_default() += 1;
    }
    hist
}
