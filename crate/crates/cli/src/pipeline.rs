//! Stage orchestration with content-addressed caching.
//!
//! Every cached stage's key hashes its own config together with the keys of
//! the stages it consumes, so any upstream change produces a new key.

use std::collections::{BTreeMap, HashSet};
use std::io::Cursor;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use storytopics::corpus::{domain_histogram, load_corpus, Corpus, DomainLabel};
use storytopics::docgeom::{read_flat, reduce_corpus, write_flat, FlatRepresentation, PcaOptions};
use storytopics::embed::{
    coverage_report, load_word2vec_binary_with, lookup_forms, read_word2vec_binary, train_skipgram,
    write_word2vec_binary, EmbeddingSource, EmbeddingTable, LoadOptions,
};
use storytopics::evalcluster::{
    agreement, best_of_kmeans, classical_mds, majority_labels, AgreementScores, ClusterAssignment, EvalError,
};
use storytopics::lda::{fit_lda, LdaError, LdaMode, LdaModel};
use storytopics::project::{tsne, Projection2D, TsneError, TsneInput};
use storytopics::textprep::{
    bundled_stopwords, default_template_words, load_word_list, preprocess_corpus, Preprocessed,
};
use storytopics::vectorize::{bow, tfidf_with};
use storytopics::wmd::{corpus_nbow, distance_matrix, read_matrix, write_matrix, DistanceMatrix};

use crate::config::{Approach, EmbeddingChoice, RunConfig};
use crate::error::{CliError, CliResult, ErrorKind, StageContext};
use crate::manifest::{CacheUse, RunManifest, StageTiming};
use crate::store::{file_digest, json_digest, Cache};

/// Input to t-SNE for the selected approach.
pub enum Representation {
    Features(Vec<Vec<f64>>),
    Distances(DistanceMatrix),
}

pub struct Pipeline<'a> {
    pub cfg: &'a RunConfig,
    cache: Cache,
    pub manifest: RunManifest,
    verbose: bool,
    corpus: Option<(Corpus, String)>,
    pre: Option<(Preprocessed, String)>,
    lda: Option<(LdaModel, String)>,
    table: Option<(EmbeddingTable, String)>,
    repr: Option<(Representation, String)>,
    matrix: Option<(DistanceMatrix, String)>,
    projection: Option<(Projection2D, String)>,
}

fn tsne_error(e: TsneError) -> CliError {
    match e {
        TsneError::PerplexityTooLarge { .. } | TsneError::InvalidConfig(_) => CliError::config("tsne", e),
        TsneError::NonFiniteInput => CliError::numeric("tsne", e),
        TsneError::LengthMismatch(_) => CliError::data("tsne", e),
    }
}

fn lda_error(e: LdaError) -> CliError {
    match e {
        LdaError::InvalidConfig(_) | LdaError::MissingWeights => CliError::config("lda", e),
        LdaError::EmptyCorpus | LdaError::AllEmptyDocuments => CliError::data("lda", e),
    }
}

fn eval_error(stage: &str, e: EvalError) -> CliError {
    match e {
        EvalError::KTooLarge { .. } | EvalError::ZeroK => CliError::config(stage, e),
        EvalError::NonFiniteInput => CliError::numeric(stage, e),
        EvalError::UnknownStory(_) | EvalError::LengthMismatch(..) => CliError::data(stage, e),
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig, cache: Cache, command: &str, verbose: bool) -> Self {
        let mut manifest = RunManifest::new(command);
        manifest.config_hash = json_digest(cfg);
        Pipeline {
            cfg,
            cache,
            manifest,
            verbose,
            corpus: None,
            pre: None,
            lda: None,
            table: None,
            repr: None,
            matrix: None,
            projection: None,
        }
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }

    fn timed(&mut self, stage: &str, start: Instant, cache: CacheUse, key: Option<&str>) {
        let seconds = start.elapsed().as_secs_f64();
        self.log(&format!("{stage}: {seconds:.2} s ({cache:?})"));
        self.manifest.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds,
            cache,
            key: key.map(str::to_string),
        });
    }

    fn deterministic(&mut self, stage: &str) {
        self.manifest.determinism.insert(stage.to_string(), true);
    }

    /// Reads `stage` from the cache or computes and stores it.
    fn cached<T>(
        &mut self,
        stage: &str,
        key: &str,
        ext: &str,
        decode: impl Fn(&[u8]) -> Option<T>,
        encode: impl Fn(&T) -> Vec<u8>,
        compute: impl FnOnce(&mut Self) -> CliResult<T>,
    ) -> CliResult<T> {
        let start = Instant::now();
        if let Some(value) = self.cache.read(stage, key, ext).and_then(|b| decode(&b)) {
            self.timed(stage, start, CacheUse::Hit, Some(key));
            return Ok(value);
        }
        let value = compute(self)?;
        self.cache.write(stage, key, ext, &encode(&value))?;
        self.timed(stage, start, CacheUse::Miss, Some(key));
        Ok(value)
    }

    pub fn corpus(&mut self) -> CliResult<&Corpus> {
        if self.corpus.is_none() {
            let start = Instant::now();
            let digest = file_digest(&self.cfg.dataset).map_err(|e| CliError::io("ingest", e))?;
            let corpus = load_corpus(&self.cfg.dataset, &self.cfg.columns).stage(ErrorKind::Data, "ingest")?;
            if corpus.is_empty() {
                return Err(CliError::data("ingest", "dataset has no stories"));
            }
            self.manifest.inputs.insert("dataset".into(), digest.clone());
            let key = json_digest(&("corpus", &digest, &self.cfg.columns));
            self.timed("ingest", start, CacheUse::Uncached, None);
            self.corpus = Some((corpus, key));
        }
        Ok(&self.corpus.as_ref().unwrap().0)
    }

    fn word_list_digest(&mut self, role: &str, path: &Option<std::path::PathBuf>) -> CliResult<String> {
        let digest = match path {
            None => "bundled".to_string(),
            Some(p) => file_digest(p).map_err(|e| CliError::io("preprocess", e))?,
        };
        self.manifest.inputs.insert(role.to_string(), digest.clone());
        Ok(digest)
    }

    pub fn preprocessed(&mut self) -> CliResult<&Preprocessed> {
        if self.pre.is_none() {
            self.corpus()?;
            let corpus_key = self.corpus.as_ref().unwrap().1.clone();
            let stop = self.word_list_digest("stopwords", &self.cfg.stopwords.clone())?;
            let template = self.word_list_digest("template_words", &self.cfg.template_words.clone())?;
            let key = json_digest(&("preprocess", &corpus_key, &stop, &template));
            let pre = self.cached(
                "preprocess",
                &key,
                "json",
                |b| serde_json::from_slice::<Preprocessed>(b).ok(),
                |p| serde_json::to_vec(p).expect("preprocessed serializes"),
                |me| {
                    let read = |p: &std::path::Path| load_word_list(p).map_err(|e| CliError::io("preprocess", e));
                    let stopwords = match &me.cfg.stopwords {
                        Some(p) => read(p)?,
                        None => bundled_stopwords(),
                    };
                    let template = match &me.cfg.template_words {
                        Some(p) => read(p)?,
                        None => default_template_words(),
                    };
                    Ok(preprocess_corpus(&me.corpus.as_ref().unwrap().0, &stopwords, &template))
                },
            )?;
            let ids: Vec<u64> = pre.empty_positions().iter().map(|&i| pre.stories[i].story_id).collect();
            self.manifest.drops.empty_after_preprocessing = ids;
            self.pre = Some((pre, key));
        }
        Ok(&self.pre.as_ref().unwrap().0)
    }

    pub fn lda(&mut self) -> CliResult<&LdaModel> {
        if self.lda.is_none() {
            self.preprocessed()?;
            let pre_key = self.pre.as_ref().unwrap().1.clone();
            let lda_cfg = self.cfg.lda.clone();
            let idf = (lda_cfg.mode == LdaMode::TfidfWeighted).then_some(self.cfg.idf);
            let key = json_digest(&("lda", &pre_key, &lda_cfg, idf));
            let model = self.cached(
                "lda",
                &key,
                "json",
                |b| serde_json::from_slice::<LdaModel>(b).ok(),
                |m| serde_json::to_vec(m).expect("model serializes"),
                |me| {
                    let pre = &me.pre.as_ref().unwrap().0;
                    let weights = idf.map(|scheme| tfidf_with(&bow(&pre.stories, &pre.vocab_after), &pre.vocab_after, scheme));
                    fit_lda(&pre.stories, &pre.vocab_after, &lda_cfg, weights.as_ref()).map_err(lda_error)
                },
            )?;
            self.deterministic("lda");
            self.lda = Some((model, key));
        }
        Ok(&self.lda.as_ref().unwrap().0)
    }

    pub fn embeddings(&mut self) -> CliResult<&EmbeddingTable> {
        if self.table.is_none() {
            self.preprocessed()?;
            let pre_key = self.pre.as_ref().unwrap().1.clone();
            let (source_key, source) = match &self.cfg.embedding {
                EmbeddingChoice::SelfTrained => (json_digest(&self.cfg.skipgram), EmbeddingSource::SelfTrained),
                EmbeddingChoice::Pretrained { path } => {
                    let d = file_digest(path).map_err(|e| CliError::io("embed", e))?;
                    self.manifest.inputs.insert("pretrained_vectors".into(), d.clone());
                    (d, EmbeddingSource::Pretrained)
                }
            };
            let key = json_digest(&("embed", &pre_key, &self.cfg.embedding, &source_key));
            let table = self.cached(
                "embed",
                &key,
                "bin",
                |b| {
                    let t = read_word2vec_binary(Cursor::new(b), &LoadOptions::default()).ok()?;
                    let rows = (0..t.len()).map(|i| (t.tokens()[i].clone(), t.row(i).to_vec()));
                    Some(EmbeddingTable::from_rows(t.dim(), source, rows.collect::<Vec<_>>()))
                },
                |t| {
                    let mut buf = Vec::new();
                    write_word2vec_binary(t, &mut buf).expect("in-memory write");
                    buf
                },
                |me| {
                    let pre = &me.pre.as_ref().unwrap().0;
                    match &me.cfg.embedding {
                        EmbeddingChoice::SelfTrained => train_skipgram(&pre.stories, &me.cfg.skipgram).stage(ErrorKind::Data, "embed"),
                        EmbeddingChoice::Pretrained { path } => {
                            me.log("loading pretrained vectors");
                            let opts = LoadOptions {
                                keep: Some(lookup_forms(pre.vocab_after.tokens().iter().map(String::as_str))),
                                ..LoadOptions::default()
                            };
                            load_word2vec_binary_with(path, &opts).stage(ErrorKind::Data, "embed")
                        }
                    }
                },
            )?;
            if source == EmbeddingSource::SelfTrained {
                self.deterministic("skipgram");
            }
            let pre = &self.pre.as_ref().unwrap().0;
            let report = coverage_report(&pre.stories, &pre.vocab_after, &table);
            let docs = corpus_nbow(&pre.stories, &table);
            self.manifest.drops.without_embeddable_tokens =
                docs.iter().zip(&pre.stories).filter(|(d, _)| d.is_none()).map(|(_, s)| s.story_id).collect();
            self.manifest.coverage = Some(report);
            self.table = Some((table, key));
        }
        Ok(&self.table.as_ref().unwrap().0)
    }

    /// Full A3 distance matrix, NaN rows for stories without embeddable
    /// tokens.
    pub fn distance_matrix(&mut self) -> CliResult<&DistanceMatrix> {
        if self.matrix.is_none() {
            self.embeddings()?;
            let emb_key = self.table.as_ref().unwrap().1.clone();
            let key = json_digest(&("wmd", &emb_key));
            let matrix = self.cached(
                "wmd",
                &key,
                "wmdm",
                |b| read_matrix(Cursor::new(b)).ok(),
                |m| {
                    let mut buf = Vec::new();
                    write_matrix(m, &mut buf).expect("in-memory write");
                    buf
                },
                |me| {
                    let pre = &me.pre.as_ref().unwrap().0;
                    let table = &me.table.as_ref().unwrap().0;
                    let docs = corpus_nbow(&pre.stories, table);
                    let verbose = me.verbose;
                    let progress = move |done: usize, n: usize| {
                        if verbose && (done.is_multiple_of(100) || done == n) {
                            eprintln!("wmd: {done}/{n} rows");
                        }
                    };
                    Ok(distance_matrix(&docs, table, me.cfg.pairs_parallelism, Some(&progress)))
                },
            )?;
            self.deterministic("wmd");
            self.matrix = Some((matrix, key));
        }
        Ok(&self.matrix.as_ref().unwrap().0)
    }

    pub fn representation(&mut self) -> CliResult<&Representation> {
        if self.repr.is_none() {
            let (repr, key) = match self.cfg.approach {
                Approach::A1 => {
                    let theta = self.lda()?.theta.clone();
                    (Representation::Features(theta), self.lda.as_ref().unwrap().1.clone())
                }
                Approach::A2 => {
                    self.embeddings()?;
                    let emb_key = self.table.as_ref().unwrap().1.clone();
                    let center = self.cfg.pca_center;
                    let key = json_digest(&("flat", &emb_key, center));
                    let flat = self.cached(
                        "pca",
                        &key,
                        "flat",
                        |b| read_flat(Cursor::new(b)).ok(),
                        |f: &FlatRepresentation| {
                            let mut buf = Vec::new();
                            write_flat(f, &mut buf).expect("in-memory write");
                            buf
                        },
                        |me| {
                            let pre = &me.pre.as_ref().unwrap().0;
                            let table = &me.table.as_ref().unwrap().0;
                            reduce_corpus(&pre.stories, table, PcaOptions { center })
                                .map(|r| r.flat)
                                .stage(ErrorKind::Data, "pca")
                        },
                    )?;
                    self.deterministic("pca");
                    (Representation::Features(flat.rows()), key)
                }
                Approach::A3 => {
                    let start = Instant::now();
                    let m = self.distance_matrix()?;
                    let imputed = m.imputed();
                    let n = m.n;
                    let nan_pairs = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|&(i, j)| m.get(i, j).is_nan()).count();
                    self.manifest.drops.imputed_distance_pairs = nan_pairs;
                    let key = self.matrix.as_ref().unwrap().1.clone();
                    self.timed("impute", start, CacheUse::Uncached, None);
                    (Representation::Distances(imputed), key)
                }
            };
            self.repr = Some((repr, key));
        }
        Ok(&self.repr.as_ref().unwrap().0)
    }

    pub fn projection(&mut self) -> CliResult<&Projection2D> {
        if self.projection.is_none() {
            self.representation()?;
            let repr_key = self.repr.as_ref().unwrap().1.clone();
            let key = json_digest(&("tsne", &repr_key, &self.cfg.tsne));
            let projection = self.cached(
                "tsne",
                &key,
                "json",
                |b| serde_json::from_slice::<Projection2D>(b).ok(),
                |p| serde_json::to_vec(p).expect("projection serializes"),
                |me| {
                    let corpus = &me.corpus.as_ref().unwrap().0;
                    let input = match &me.repr.as_ref().unwrap().0 {
                        Representation::Features(x) => TsneInput::Features(x),
                        Representation::Distances(d) => TsneInput::Distances(d),
                    };
                    tsne(input, &me.cfg.tsne, &corpus.labels(), &corpus.ids()).map_err(tsne_error)
                },
            )?;
            self.deterministic("tsne");
            self.projection = Some((projection, key));
        }
        Ok(&self.projection.as_ref().unwrap().0)
    }

    /// Classical-MDS coordinates of the imputed A3 distances.
    pub fn mds(&mut self) -> CliResult<Vec<Vec<f64>>> {
        self.representation()?;
        let matrix_key = self.matrix.as_ref().unwrap().1.clone();
        let dims = self.cfg.kmeans.mds_dims;
        let key = json_digest(&("mds", &matrix_key, dims));
        let coords = self.cached(
            "mds",
            &key,
            "json",
            |b| serde_json::from_slice::<Vec<Vec<f64>>>(b).ok(),
            |c| serde_json::to_vec(c).expect("coordinates serialize"),
            |me| match &me.repr.as_ref().unwrap().0 {
                Representation::Distances(d) => classical_mds(d, dims).map_err(|e| eval_error("mds", e)),
                Representation::Features(_) => unreachable!("mds runs on A3 only"),
            },
        )?;
        self.deterministic("mds");
        Ok(coords)
    }

    /// k-means on the projection (and, for A3, on MDS coordinates; for A1,
    /// dominant topics) scored against domain labels.
    pub fn evaluate(&mut self) -> CliResult<Evaluation> {
        let coords: Vec<Vec<f64>> = self.projection()?.coords.iter().map(|c| c.to_vec()).collect();
        let corpus = &self.corpus.as_ref().unwrap().0;
        let labels = corpus.labels();
        let histogram = domain_histogram(corpus).into_iter().map(|(k, v)| (k.name().to_string(), v)).collect();
        let km = self.cfg.kmeans.clone();

        let start = Instant::now();
        let cluster = |stage: &str, points: &[Vec<f64>]| -> CliResult<ClusterSummary> {
            let best = best_of_kmeans(points, km.k, &km.seeds, km.max_iterations).map_err(|e| eval_error(stage, e))?;
            ClusterSummary::new(&best, &labels).map_err(|e| eval_error(stage, e))
        };
        let tsne_clusters = cluster("evaluate", &coords)?;
        self.deterministic("kmeans");
        self.timed("kmeans_tsne", start, CacheUse::Uncached, None);

        let mds_clusters = if self.cfg.approach == Approach::A3 {
            let mds = self.mds()?;
            let start = Instant::now();
            let s = cluster("evaluate", &mds)?;
            self.timed("kmeans_mds", start, CacheUse::Uncached, None);
            Some(s)
        } else {
            None
        };
        let lda_topics = match self.cfg.approach {
            Approach::A1 => {
                let topics = self.lda()?.dominant_topics();
                Some(agreement(&topics, &labels).map_err(|e| eval_error("evaluate", e))?)
            }
            _ => None,
        };
        Ok(Evaluation {
            approach: self.cfg.approach.name().to_string(),
            stories: labels.len(),
            domain_histogram: histogram,
            k: km.k,
            tsne_kmeans: tsne_clusters,
            mds_kmeans: mds_clusters,
            dominant_topic_agreement: lda_topics,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub scores: AgreementScores,
    pub inertia: f64,
    pub cluster_sizes: Vec<usize>,
    /// Majority domain per cluster.
    pub majority: BTreeMap<usize, String>,
    /// Per cluster, story count per domain.
    pub contingency: BTreeMap<usize, BTreeMap<String, usize>>,
}

impl ClusterSummary {
    fn new(a: &ClusterAssignment, labels: &[DomainLabel]) -> Result<Self, EvalError> {
        let scores = agreement(&a.cluster_ids, labels)?;
        let mut sizes = vec![0usize; a.k];
        let mut contingency: BTreeMap<usize, BTreeMap<String, usize>> = BTreeMap::new();
        for (&c, l) in a.cluster_ids.iter().zip(labels) {
            sizes[c] += 1;
            *contingency.entry(c).or_default().entry(l.name().to_string()).or_default() += 1;
        }
        Ok(ClusterSummary {
            scores,
            inertia: a.inertia,
            cluster_sizes: sizes,
            majority: majority_labels(&a.cluster_ids, labels).into_iter().map(|(c, l)| (c, l.name().to_string())).collect(),
            contingency,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub approach: String,
    pub stories: usize,
    pub domain_histogram: BTreeMap<String, usize>,
    pub k: usize,
    pub tsne_kmeans: ClusterSummary,
    pub mds_kmeans: Option<ClusterSummary>,
    pub dominant_topic_agreement: Option<AgreementScores>,
}

/// Token statistics after preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub stories: usize,
    pub unique_tokens_after_tokenization: usize,
    pub unique_tokens_after_removal: usize,
    pub empty_story_ids: Vec<u64>,
}

impl PreprocessSummary {
    pub fn of(pre: &Preprocessed) -> Self {
        PreprocessSummary {
            stories: pre.stories.len(),
            unique_tokens_after_tokenization: pre.vocab_before.len(),
            unique_tokens_after_removal: pre.vocab_after.len(),
            empty_story_ids: pre.empty_positions().iter().map(|&i| pre.stories[i].story_id).collect(),
        }
    }
}

/// Story count per domain and the set of tags seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub stories: usize,
    pub domain_histogram: BTreeMap<String, usize>,
    pub distinct_tags: usize,
}

impl IngestSummary {
    pub fn of(corpus: &Corpus) -> Self {
        let tags: HashSet<&str> = corpus.stories().iter().flat_map(|s| s.tags.iter().map(String::as_str)).collect();
        IngestSummary {
            stories: corpus.len(),
            domain_histogram: domain_histogram(corpus).into_iter().map(|(k, v)| (k.name().to_string(), v)).collect(),
            distinct_tags: tags.len(),
        }
    }
}
