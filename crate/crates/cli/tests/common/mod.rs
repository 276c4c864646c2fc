#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const WORDS: [(&str, [&str; 8]); 5] = [
    ("Health", ["pills", "doctor", "heart", "sleep", "medicine", "pulse", "diet", "exercise"]),
    ("Energy", ["solar", "power", "bill", "heating", "thermostat", "battery", "usage", "watts"]),
    ("Entertainment", ["music", "movie", "speaker", "party", "games", "playlist", "dance", "tv"]),
    ("Safety", ["door", "lock", "alarm", "camera", "smoke", "intruder", "window", "fire"]),
    ("Other", ["plants", "laundry", "grocery", "mail", "pets", "garden", "recipes", "clean"]),
];

/// CSV in the default column layout with `per_domain` stories per domain.
pub fn write_dataset(dir: &Path, per_domain: usize) -> PathBuf {
    let mut csv = String::from("id,role,feature,benefit,domain,tags\n");
    let mut id = 1;
    for k in 0..per_domain {
        for (domain, words) in WORDS {
            let w = |i: usize| words[(k * 3 + i * 5) % 8];
            let _ = writeln!(
                csv,
                "{id},home owner,my home to watch the {} and {} {},I can {} the {},{},{}",
                w(0),
                w(1),
                w(2),
                w(3),
                w(4),
                domain.to_lowercase(),
                w(5)
            );
            id += 1;
        }
    }
    let path = dir.join("stories.csv");
    fs::write(&path, csv).unwrap();
    path
}

/// Config with short training so tests stay fast. `overrides` is a JSON
/// object whose top-level fields replace the defaults.
pub fn write_config(dir: &Path, dataset: &Path, overrides: &str) -> PathBuf {
    let mut cfg = serde_json::json!({
        "dataset": dataset,
        "output_dir": dir.join("out"),
        "lda": {"k": 5, "alpha": 10.0, "beta": 0.01, "iterations": 100, "seed": 0},
        "skipgram": {"dim": 10, "epochs": 5, "min_count": 2},
        "tsne": {"perplexity": 10.0, "iterations": 400},
        "kmeans": {"k": 5, "seeds": [0, 1, 2]}
    });
    if !overrides.is_empty() {
        let extra: serde_json::Value = serde_json::from_str(overrides).unwrap();
        for (k, v) in extra.as_object().unwrap() {
            cfg[k] = v.clone();
        }
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storytopics")).args(args).arg("--quiet").output().unwrap()
}

pub fn cli_with_config(config: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--config", config.to_str().unwrap()];
    all.extend_from_slice(args);
    cli(&all)
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
