//! Reproducibility record written at the end of every configured command.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use storytopics::embed::CoverageReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheUse {
    Hit,
    Miss,
    Uncached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    pub cache: CacheUse,
    /// Cache key of the stage output, when it is cached.
    pub key: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    /// Stories left with no token after preprocessing.
    pub empty_after_preprocessing: Vec<u64>,
    /// Stories with no token in the embedding table (A2 zero rows, A3
    /// imputed rows).
    pub without_embeddable_tokens: Vec<u64>,
    /// A3 distance entries replaced by row medians before t-SNE.
    pub imputed_distance_pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub approach: Option<String>,
    /// SHA-256 of the effective configuration JSON.
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    /// SHA-256 of each input file, by role.
    pub inputs: BTreeMap<String, String>,
    pub timings: Vec<StageTiming>,
    pub coverage: Option<CoverageReport>,
    pub drops: DropReport,
    pub seeds: Vec<(String, u64)>,
    /// Per stage: whether its output is a pure function of inputs, config
    /// and seeds (independent of thread count and cache state).
    pub determinism: BTreeMap<String, bool>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("storytopics-core".to_string(), storytopics::VERSION.to_string());
        versions.insert("storytopics-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
        RunManifest {
            command: command.to_string(),
            versions,
            ..RunManifest::default()
        }
    }

    pub fn reproducible(&self) -> bool {
        self.determinism.values().all(|&d| d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
