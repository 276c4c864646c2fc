#![allow(dead_code)]

pub mod oracles;
pub mod suites;
pub mod synth;

use storytopics::textprep::TokenizedStory;

pub fn tokenized(docs: &[Vec<String>]) -> Vec<TokenizedStory> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| TokenizedStory {
            story_id: i as u64 + 1,
            tokens: d.clone(),
        })
        .collect()
}

pub fn toks(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}
