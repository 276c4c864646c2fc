//! Run configuration, stored as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use storytopics::corpus::ColumnMapping;
use storytopics::embed::SkipgramConfig;
use storytopics::lda::{LdaConfig, LdaMode};
use storytopics::project::TsneConfig;
use storytopics::vectorize::IdfScheme;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    /// LDA topic mixtures over bag-of-words counts.
    A1,
    /// Word embeddings reduced per story by PCA.
    A2,
    /// Word Mover's Distance between stories.
    A3,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::A1 => "a1",
            Approach::A2 => "a2",
            Approach::A3 => "a3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmbeddingChoice {
    SelfTrained,
    Pretrained { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansConfig {
    pub k: usize,
    /// One k-means run per seed; the lowest inertia wins.
    pub seeds: Vec<u64>,
    pub max_iterations: usize,
    /// Classical-MDS dimensions for clustering A3 distances directly.
    pub mds_dims: usize,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            k: 5,
            seeds: (0..10).collect(),
            max_iterations: 300,
            mds_dims: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub columns: ColumnMapping,
    /// `None` uses the bundled English list.
    pub stopwords: Option<PathBuf>,
    /// `None` uses the eight template words.
    pub template_words: Option<PathBuf>,
    pub approach: Approach,
    pub embedding: EmbeddingChoice,
    pub lda: LdaConfig,
    pub idf: IdfScheme,
    pub skipgram: SkipgramConfig,
    pub pca_center: bool,
    pub tsne: TsneConfig,
    pub kmeans: KmeansConfig,
    /// Worker threads for pairwise WMD; 0 lets rayon decide. Results do not
    /// depend on it.
    pub pairs_parallelism: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::from("data/crowdre.csv"),
            columns: ColumnMapping::default(),
            stopwords: None,
            template_words: None,
            approach: Approach::A3,
            embedding: EmbeddingChoice::SelfTrained,
            lda: LdaConfig::with_topics(5),
            idf: IdfScheme::Plain,
            skipgram: SkipgramConfig::default(),
            pca_center: true,
            tsne: TsneConfig::default(),
            kmeans: KmeansConfig::default(),
            pairs_parallelism: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config("config", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Points every seeded stage at `seed`; k-means uses `seed..seed + n`
    /// for its `n` restarts.
    pub fn apply_seed(&mut self, seed: u64) {
        self.lda.seed = seed;
        self.skipgram.seed = seed;
        self.tsne.seed = seed;
        let n = self.kmeans.seeds.len().max(1) as u64;
        self.kmeans.seeds = (seed..seed + n).collect();
    }

    /// Every seed the run may consume, by stage.
    pub fn seeds(&self) -> Vec<(String, u64)> {
        let mut out = vec![("tsne".to_string(), self.tsne.seed)];
        match self.approach {
            Approach::A1 => out.push(("lda".into(), self.lda.seed)),
            Approach::A2 | Approach::A3 => {
                if self.embedding == EmbeddingChoice::SelfTrained {
                    out.push(("skipgram".into(), self.skipgram.seed));
                }
            }
        }
        for (i, s) in self.kmeans.seeds.iter().enumerate() {
            out.push((format!("kmeans[{i}]"), *s));
        }
        out
    }

    /// Checks referenced files and parameter ranges.
    pub fn validate(&self) -> CliResult<()> {
        let must_exist = |what: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(CliError::config("config", format!("{what} not found: {}", p.display())))
            }
        };
        must_exist("dataset", &self.dataset)?;
        if let Some(p) = &self.stopwords {
            must_exist("stopword list", p)?;
        }
        if let Some(p) = &self.template_words {
            must_exist("template word list", p)?;
        }
        if let EmbeddingChoice::Pretrained { path } = &self.embedding {
            must_exist("pretrained vectors", path)?;
        }
        self.lda.validate().map_err(|e| CliError::config("config", e))?;
        if self.lda.mode == LdaMode::TfidfWeighted && self.approach != Approach::A1 {
            // harmless, but almost certainly a mistake in the file
            return Err(CliError::config("config", "lda.mode = tfidf_weighted only applies to approach a1"));
        }
        self.skipgram.validate().map_err(|e| CliError::config("config", e))?;
        if self.kmeans.k == 0 || self.kmeans.seeds.is_empty() || self.kmeans.max_iterations == 0 {
            return Err(CliError::config("config", "kmeans needs k >= 1, at least one seed and max_iterations >= 1"));
        }
        if self.kmeans.mds_dims == 0 {
            return Err(CliError::config("config", "kmeans.mds_dims must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_lossless() {
        let mut cfg = RunConfig {
            approach: Approach::A2,
            embedding: EmbeddingChoice::Pretrained {
                path: PathBuf::from("vectors.bin"),
            },
            stopwords: Some(PathBuf::from("stop.txt")),
            idf: IdfScheme::Smoothed,
            ..RunConfig::default()
        };
        cfg.tsne.learning_rate = 123.456789012345;
        cfg.lda.alpha = 0.1 + 0.2;
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"approach": "a1", "tsne": {"perplexity": 5.0}}"#).unwrap();
        assert_eq!(cfg.approach, Approach::A1);
        assert_eq!(cfg.tsne.perplexity, 5.0);
        assert_eq!(cfg.tsne.iterations, TsneConfig::default().iterations);
        assert_eq!(cfg.kmeans, KmeansConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"aproach": "a1"}"#).is_err());
    }

    #[test]
    fn seed_flag_reaches_every_stage() {
        let mut cfg = RunConfig::default();
        cfg.apply_seed(40);
        assert_eq!((cfg.lda.seed, cfg.skipgram.seed, cfg.tsne.seed), (40, 40, 40));
        assert_eq!(cfg.kmeans.seeds, (40..50).collect::<Vec<_>>());
        let seeds = cfg.seeds();
        assert!(seeds.contains(&("skipgram".to_string(), 40)));
        assert_eq!(seeds.len(), 12);
    }
}
