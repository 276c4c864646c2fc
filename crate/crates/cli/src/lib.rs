//! Command-line driver: runs the three clustering approaches end to end
//! with caching, manifests, plots and reports.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod store;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use storytopics::evalcluster::{format_neighbors, neighbor_report, NeighborSource};
use storytopics::project::Projection2D;

use config::{Approach, RunConfig};
use error::{CliError, CliResult};
use pipeline::{IngestSummary, Pipeline, PreprocessSummary};
use store::{Cache, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "storytopics", version, about = "Cluster crowd-sourced user stories and compare clusters with domain labels")]
pub struct Cli {
    /// JSON run configuration; missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized stage (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for pairwise WMD, 0 = all cores.
    #[arg(long, global = true)]
    pub pairs_parallelism: Option<usize>,
    /// Dataset CSV (overrides the config).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the dataset and write the domain histogram.
    Ingest,
    /// Tokenize and filter stories; write vocabulary statistics.
    Preprocess,
    /// Run every stage: projection, evaluation, plot and report.
    Run {
        #[arg(long, value_enum)]
        approach: Option<Approach>,
    },
    /// Compute the 2-D projection (coords.csv, kl.csv).
    Project {
        #[arg(long, value_enum)]
        approach: Option<Approach>,
    },
    /// Cluster the projection and score it against domain labels.
    Evaluate {
        #[arg(long, value_enum)]
        approach: Option<Approach>,
    },
    /// Render an SVG scatter plot from a coordinates CSV.
    Plot {
        /// Defaults to <out>/coords.csv.
        #[arg(long)]
        coords: Option<PathBuf>,
    },
    /// Write report.md; with --story also the story's nearest neighbors.
    Report {
        #[arg(long, value_enum)]
        approach: Option<Approach>,
        #[arg(long)]
        story: Option<u64>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Preprocess => "preprocess",
            Command::Run { .. } => "run",
            Command::Project { .. } => "project",
            Command::Evaluate { .. } => "evaluate",
            Command::Plot { .. } => "plot",
            Command::Report { .. } => "report",
        }
    }

    fn approach(&self) -> Option<Approach> {
        match self {
            Command::Run { approach } | Command::Project { approach } | Command::Evaluate { approach } => *approach,
            Command::Report { approach, .. } => *approach,
            _ => None,
        }
    }
}

/// Config file plus command-line overrides.
pub fn effective_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(p) = cli.pairs_parallelism {
        cfg.pairs_parallelism = p;
    }
    if let Some(d) = &cli.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(a) = cli.command.approach() {
        cfg.approach = a;
    }
    Ok(cfg)
}

fn json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("output serializes");
    v.push(b'\n');
    v
}

fn csv_bytes(p: &Projection2D) -> (Vec<u8>, Vec<u8>) {
    let (mut coords, mut kl) = (Vec::new(), Vec::new());
    p.write_csv(&mut coords).expect("in-memory write");
    p.write_kl_csv(&mut kl).expect("in-memory write");
    (coords, kl)
}

fn plot_title(approach: Approach, n: usize) -> String {
    format!("Approach {}: t-SNE projection of {n} stories", approach.name().to_uppercase())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = effective_config(cli)?;
    if let Command::Plot { coords } = &cli.command {
        return plot_only(&cfg, coords.as_ref());
    }
    cfg.validate()?;
    let out = OutputDir::acquire(&cfg.output_dir)?;
    let mut p = Pipeline::new(&cfg, Cache::new(out.cache_dir()), cli.command.name(), !cli.quiet);
    if cli.command.approach().is_some() || matches!(cli.command, Command::Run { .. }) {
        p.manifest.approach = Some(cfg.approach.name().to_string());
    }
    let mut written: Vec<&str> = Vec::new();
    let mut stage = |name: &'static str, bytes: &[u8]| -> CliResult<()> {
        written.push(name);
        out.stage(name, bytes)
    };

    match &cli.command {
        Command::Ingest => {
            let summary = IngestSummary::of(p.corpus()?);
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            stage("ingest.json", &json(&summary))?;
        }
        Command::Preprocess => {
            let summary = PreprocessSummary::of(p.preprocessed()?);
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            stage("preprocess.json", &json(&summary))?;
        }
        Command::Project { .. } => {
            let (coords, kl) = csv_bytes(p.projection()?);
            stage("coords.csv", &coords)?;
            stage("kl.csv", &kl)?;
        }
        Command::Evaluate { .. } => {
            let eval = p.evaluate()?;
            stage("evaluation.json", &json(&eval))?;
        }
        Command::Run { .. } => {
            let projection = p.projection()?.clone();
            let (coords, kl) = csv_bytes(&projection);
            stage("coords.csv", &coords)?;
            stage("kl.csv", &kl)?;
            stage("plot.svg", plot::render_svg(&projection, &plot_title(cfg.approach, projection.len())).as_bytes())?;
            let eval = p.evaluate()?;
            stage("evaluation.json", &json(&eval))?;
            stage("report.md", report::render(&eval, &p.manifest).as_bytes())?;
        }
        Command::Report { story, top_k, .. } => {
            let eval = p.evaluate()?;
            stage("report.md", report::render(&eval, &p.manifest).as_bytes())?;
            if let Some(id) = *story {
                let table = neighbors(&mut p, id, *top_k)?;
                print!("{table}");
                stage("neighbors.tsv", table.as_bytes())?;
            }
        }
        Command::Plot { .. } => unreachable!("handled above"),
    }

    let mut manifest = p.manifest.clone();
    manifest.seeds = cfg.seeds();
    written.extend(["config.json", "manifest.json"]);
    manifest.outputs = written.iter().map(|s| s.to_string()).collect();
    out.stage("config.json", cfg.to_json().as_bytes())?;
    out.stage("manifest.json", manifest.to_json().as_bytes())?;
    out.commit()
}

/// Nearest stories by WMD for A3, otherwise by distance in the projection.
fn neighbors(p: &mut Pipeline<'_>, id: u64, top_k: usize) -> CliResult<String> {
    let approach = p.cfg.approach;
    let list = if approach == Approach::A3 {
        let m = p.distance_matrix()?.clone();
        let corpus = p.corpus()?;
        neighbor_report(&NeighborSource::Distances(&m), corpus, id, top_k)
    } else {
        let coords = p.projection()?.coords.clone();
        let corpus = p.corpus()?;
        neighbor_report(&NeighborSource::Coords(&coords), corpus, id, top_k)
    }
    .map_err(|e| CliError::data("report", e))?;
    let corpus = p.corpus()?;
    let query = &corpus.stories()[corpus.position_of(id).expect("checked by neighbor_report")].full_text;
    Ok(format_neighbors(query, &list))
}

fn plot_only(cfg: &RunConfig, coords: Option<&PathBuf>) -> CliResult<()> {
    let out = OutputDir::acquire(&cfg.output_dir)?;
    let path = coords.cloned().unwrap_or_else(|| out.final_path("coords.csv"));
    let file = fs::File::open(&path).map_err(|e| CliError::data("plot", format!("{}: {e}", path.display())))?;
    let projection = Projection2D::read_csv(file).map_err(|e| CliError::data("plot", e))?;
    let title = format!("t-SNE projection of {} stories", projection.len());
    out.stage("plot.svg", plot::render_svg(&projection, &title).as_bytes())?;
    out.commit()
}
