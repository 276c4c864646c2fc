//! Markdown run report.

use std::fmt::Write;

use storytopics::corpus::DomainLabel;
use storytopics::evalcluster::AgreementScores;

use crate::manifest::RunManifest;
use crate::pipeline::{ClusterSummary, Evaluation};

fn scores_row(out: &mut String, name: &str, s: &AgreementScores) {
    let _ = writeln!(
        out,
        "| {name} | {:.4} | {:.4} | {:.4} |",
        s.purity, s.adjusted_rand_index, s.normalized_mutual_information
    );
}

fn contingency(out: &mut String, title: &str, c: &ClusterSummary) {
    let _ = writeln!(out, "\n### {title}\n");
    let mut header = "| cluster | size | majority |".to_string();
    let mut rule = "|---|---|---|".to_string();
    for l in DomainLabel::ALL {
        header.push_str(&format!(" {} |", l.name()));
        rule.push_str("---|");
    }
    let _ = writeln!(out, "{header}\n{rule}");
    for (cluster, size) in c.cluster_sizes.iter().enumerate() {
        let majority = c.majority.get(&cluster).map_or("-", String::as_str);
        let _ = write!(out, "| {cluster} | {size} | {majority} |");
        let counts = c.contingency.get(&cluster);
        for l in DomainLabel::ALL {
            let v = counts.and_then(|m| m.get(l.name())).copied().unwrap_or(0);
            let _ = write!(out, " {v} |");
        }
        out.push('\n');
    }
}

pub fn render(eval: &Evaluation, manifest: &RunManifest) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Run report: approach {}\n", eval.approach.to_uppercase());
    let _ = writeln!(out, "- stories: {}", eval.stories);
    let _ = writeln!(out, "- config hash: `{}`", manifest.config_hash);
    if let Some(d) = manifest.inputs.get("dataset") {
        let _ = writeln!(out, "- dataset sha256: `{d}`");
    }
    let _ = writeln!(out, "- reproducible from manifest: {}", if manifest.reproducible() { "yes" } else { "no" });
    let hist: Vec<String> = eval.domain_histogram.iter().map(|(k, v)| format!("{k} {v}")).collect();
    let _ = writeln!(out, "- domains: {}", hist.join(", "));

    let _ = writeln!(out, "\n## Agreement with domain labels (k = {})\n", eval.k);
    let _ = writeln!(out, "| clustering | purity | ARI | NMI |\n|---|---|---|---|");
    scores_row(&mut out, "k-means on t-SNE", &eval.tsne_kmeans.scores);
    if let Some(m) = &eval.mds_kmeans {
        scores_row(&mut out, "k-means on MDS", &m.scores);
    }
    if let Some(t) = &eval.dominant_topic_agreement {
        scores_row(&mut out, "dominant LDA topic", t);
    }
    contingency(&mut out, "k-means on t-SNE coordinates", &eval.tsne_kmeans);
    if let Some(m) = &eval.mds_kmeans {
        contingency(&mut out, "k-means on MDS coordinates", m);
    }

    if let Some(c) = &manifest.coverage {
        let _ = writeln!(out, "\n## Embedding coverage\n");
        let _ = writeln!(
            out,
            "- vocabulary {} tokens, {} embeddable ({:.2}%)",
            c.vocab_size,
            c.embeddable_tokens,
            100.0 * c.token_coverage
        );
        let _ = writeln!(
            out,
            "- stories losing at least one token: {} ({:.2}%)",
            c.affected_stories,
            100.0 * c.affected_story_fraction
        );
    }
    let d = &manifest.drops;
    let _ = writeln!(out, "\n## Dropped data\n");
    let _ = writeln!(out, "- empty after preprocessing: {}", d.empty_after_preprocessing.len());
    let _ = writeln!(out, "- without embeddable tokens: {}", d.without_embeddable_tokens.len());
    let _ = writeln!(out, "- imputed distance pairs: {}", d.imputed_distance_pairs);

    let _ = writeln!(out, "\n## Stage timings\n\n| stage | seconds | cache |\n|---|---|---|");
    for t in &manifest.timings {
        let _ = writeln!(out, "| {} | {:.2} | {:?} |", t.stage, t.seconds, t.cache);
    }
    out
}
