//! Text cleaning, tokenization, stopword/template-word removal and
//! vocabulary statistics.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

/// Bundled English stopword list.
pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Boilerplate words shared by every story of the template.
pub const TEMPLATE_WORDS: [&str; 8] = ["as", "smart", "home", "owner", "i", "want", "be", "able"];

/// Lowercases, deletes every character that is not an ASCII letter or
/// whitespace, and collapses whitespace runs to a single space.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        if ch.is_whitespace() {
            pending_space = true;
            continue;
        }
        let lower = ch.to_ascii_lowercase();
        if lower.is_ascii_lowercase() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(lower);
        }
    }
    out
}

pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned.split_whitespace().map(str::to_string).collect()
}

pub fn remove_stopwords(
    tokens: &[String],
    stopwords: &HashSet<String>,
    template_words: &HashSet<String>,
) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stopwords.contains(t.as_str()) && !template_words.contains(t.as_str()))
        .cloned()
        .collect()
}

/// Parses a word list: one token per line, `#` starts a comment, blank lines
/// ignored. Entries are cleaned like story text so they compare equal to
/// tokens.
pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .map(clean_text)
        .filter(|w| !w.is_empty() && !w.contains(' '))
        .collect()
}

pub fn load_word_list(path: &Path) -> io::Result<HashSet<String>> {
    Ok(parse_word_list(&fs::read_to_string(path)?))
}

pub fn bundled_stopwords() -> HashSet<String> {
    parse_word_list(BUNDLED_STOPWORDS)
}

pub fn default_template_words() -> HashSet<String> {
    TEMPLATE_WORDS.iter().map(|w| w.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedStory {
    pub story_id: u64,
    pub tokens: Vec<String>,
}

/// Dense token index with per-token document and corpus frequencies.
///
/// Indices are assigned in order of first occurrence when scanning stories
/// in corpus order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawVocabulary")]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    corpus_freq: Vec<usize>,
}

impl Vocabulary {
    pub fn build(stories: &[TokenizedStory]) -> Self {
        let mut vocab = Vocabulary::default();
        let mut seen_in_doc: Vec<usize> = Vec::new();
        for (doc, story) in stories.iter().enumerate() {
            for tok in &story.tokens {
                let idx = match vocab.index.get(tok) {
                    Some(&i) => i,
                    None => {
                        let i = vocab.tokens.len();
                        vocab.tokens.push(tok.clone());
                        vocab.index.insert(tok.clone(), i);
                        vocab.doc_freq.push(0);
                        vocab.corpus_freq.push(0);
                        seen_in_doc.push(usize::MAX);
                        i
                    }
                };
                vocab.corpus_freq[idx] += 1;
                if seen_in_doc[idx] != doc {
                    seen_in_doc[idx] = doc;
                    vocab.doc_freq[idx] += 1;
                }
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freq(&self, idx: usize) -> usize {
        self.doc_freq[idx]
    }

    pub fn corpus_freq(&self, idx: usize) -> usize {
        self.corpus_freq[idx]
    }

    pub fn doc_freqs(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn corpus_freqs(&self) -> &[usize] {
        &self.corpus_freq
    }
}

#[derive(Deserialize)]
struct RawVocabulary {
    tokens: Vec<String>,
    doc_freq: Vec<usize>,
    corpus_freq: Vec<usize>,
}

impl From<RawVocabulary> for Vocabulary {
    fn from(raw: RawVocabulary) -> Self {
        let index = raw
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens: raw.tokens,
            index,
            doc_freq: raw.doc_freq,
            corpus_freq: raw.corpus_freq,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preprocessed {
    pub stories: Vec<TokenizedStory>,
    /// Vocabulary right after tokenization.
    pub vocab_before: Vocabulary,
    /// Vocabulary after stopword and template-word removal.
    pub vocab_after: Vocabulary,
}

impl Preprocessed {
    /// Positions of stories whose token list ended up empty.
    pub fn empty_positions(&self) -> Vec<usize> {
        self.stories
            .iter()
            .enumerate()
            .filter(|(_, s)| s.tokens.is_empty())
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn preprocess_corpus(
    corpus: &Corpus,
    stopwords: &HashSet<String>,
    template_words: &HashSet<String>,
) -> Preprocessed {
    let pairs: Vec<(TokenizedStory, TokenizedStory)> = corpus
        .stories()
        .par_iter()
        .map(|story| {
            let raw_tokens = tokenize(&clean_text(&story.full_text));
            let filtered = remove_stopwords(&raw_tokens, stopwords, template_words);
            (
                TokenizedStory {
                    story_id: story.id,
                    tokens: raw_tokens,
                },
                TokenizedStory {
                    story_id: story.id,
                    tokens: filtered,
                },
            )
        })
        .collect();
    let (raw, filtered): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Preprocessed {
        vocab_before: Vocabulary::build(&raw),
        vocab_after: Vocabulary::build(&filtered),
        stories: filtered,
    }
}
