//! Report bundle: summary JSON, plot-ready CSVs and a Markdown report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assess::{bool_str, AppAssessment};
use crate::error::{Error, Result};
use crate::model::{DataCategory, FeatureCategory, LedgerEntry};
use crate::stats::CorpusStats;

pub const BUNDLE_FILES: [&str; 8] = [
    "summary.json",
    "embedded_trackers.csv",
    "contacted_hosts.csv",
    "transmissions_by_type.csv",
    "transmissions_by_specificity.csv",
    "scope_matrix.csv",
    "label_accuracy.csv",
    "report.md",
];

/// Per-app lines of the Markdown report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppDetail {
    pub app_id: String,
    pub display_name: String,
    pub feature_category: FeatureCategory,
    pub trackers: Vec<String>,
    pub tracker_hosts: usize,
    pub non_tracker_hosts: usize,
    pub transmitted_types: Vec<String>,
    pub out_of_scope: Vec<DataCategory>,
    /// `label:verdict` pairs that are violations.
    pub undeclared: Vec<String>,
}

impl AppDetail {
    pub fn undeclared_from(assessment: &AppAssessment) -> Vec<String> {
        let mut out = Vec::new();
        for v in &assessment.verdicts {
            for verdict in &v.verdicts {
                if verdict.is_violation() {
                    out.push(format!("{}:{}", v.label, verdict));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub observation_crawl: String,
    pub apps: usize,
    pub stats: CorpusStats,
    pub ledger: Vec<LedgerEntry>,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory csv flush")
}

fn p1(x: f64) -> String {
    format!("{x:.1}")
}

fn embedded_csv(stats: &CorpusStats) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(["rank", "tracker_name", "app_count", "pct_apps"])?;
    for (i, l) in stats.embedded.library_ranking.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            l.tracker_name.clone(),
            l.app_count.to_string(),
            p1(l.pct_apps),
        ])?;
    }
    Ok(finish(w))
}

fn contacts_csv(stats: &CorpusStats) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record([
        "app_id",
        "tracker_hosts",
        "non_tracker_hosts",
        "tracker_domains",
        "more_trackers",
    ])?;
    for a in &stats.contacted.per_app {
        w.write_record([
            a.app_id.clone(),
            a.tracker_hosts.to_string(),
            a.non_tracker_hosts.to_string(),
            a.tracker_domains.to_string(),
            bool_str(a.tracker_hosts > a.non_tracker_hosts).to_string(),
        ])?;
    }
    Ok(finish(w))
}

fn by_type_csv(stats: &CorpusStats) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record([
        "data_type_id",
        "category",
        "specificity",
        "apps",
        "non_tracker_apps",
        "tracker_apps",
    ])?;
    for t in &stats.transmissions.by_type {
        w.write_record([
            t.data_type_id.clone(),
            t.category.to_string(),
            t.specificity.to_string(),
            t.apps.to_string(),
            t.non_tracker_apps.to_string(),
            t.tracker_apps.to_string(),
        ])?;
    }
    Ok(finish(w))
}

fn by_specificity_csv(stats: &CorpusStats) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record([
        "specificity",
        "manual_apps",
        "automated_apps",
        "observed_apps",
        "pct_observed_apps",
    ])?;
    for s in &stats.transmissions.by_specificity {
        w.write_record([
            s.specificity.to_string(),
            s.manual_apps.to_string(),
            s.automated_apps.to_string(),
            s.observed_apps.to_string(),
            p1(s.pct_observed_apps),
        ])?;
    }
    Ok(finish(w))
}

fn scope_csv(stats: &CorpusStats) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    let mut header = vec!["feature_category".to_string(), "apps".to_string()];
    header.extend(DataCategory::ALL.iter().map(|c| c.to_string()));
    header.extend(DataCategory::ALL.iter().map(|c| format!("{c}_in_scope")));
    w.write_record(&header)?;
    for row in &stats.scope_matrix.rows {
        let mut rec = vec![row.feature_category.to_string(), row.apps.to_string()];
        rec.extend(row.cells.iter().map(|c| c.apps.to_string()));
        rec.extend(row.cells.iter().map(|c| bool_str(c.in_scope).to_string()));
        w.write_record(&rec)?;
    }
    Ok(finish(w))
}

fn labels_csv(stats: &CorpusStats) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record([
        "label",
        "declared_ok_collect",
        "undeclared_collect",
        "pct_undeclared_collect",
        "declared_ok_share",
        "undeclared_share",
        "pct_undeclared_share",
        "unobserved_declarations",
    ])?;
    for r in &stats.label_accuracy.rows {
        w.write_record([
            r.label.to_string(),
            r.declared_ok_collect.to_string(),
            r.undeclared_collect.to_string(),
            p1(r.pct_undeclared_collect),
            r.declared_ok_share.to_string(),
            r.undeclared_share.to_string(),
            p1(r.pct_undeclared_share),
            r.unobserved_declarations.to_string(),
        ])?;
    }
    Ok(finish(w))
}

fn list_or_dash<T: ToString>(items: &[T]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn render_markdown(summary: &Summary, details: &[AppDetail]) -> String {
    let s = &summary.stats;
    let mut md = String::new();
    let _ = writeln!(md, "# Privacy audit report\n");
    let _ = writeln!(
        md,
        "{} apps audited; observations from the {} crawl.\n",
        summary.apps, summary.observation_crawl
    );

    let _ = writeln!(md, "## Embedded trackers\n");
    let e = &s.embedded;
    let _ = writeln!(
        md,
        "- Apps with at least one tracker: {} of {} ({:.1}%)",
        e.apps_with_tracker, e.apps, e.pct_apps_with_tracker
    );
    let _ = writeln!(
        md,
        "- Mean trackers per app: {:.2} ({} embeddings)\n",
        e.mean_trackers_per_app, e.total_embeddings
    );
    if !e.library_ranking.is_empty() {
        let _ = writeln!(md, "| Tracker | Apps | % |\n|---|---:|---:|");
        for l in e.library_ranking.iter().take(10) {
            let _ = writeln!(
                md,
                "| {} | {} | {:.1} |",
                l.tracker_name, l.app_count, l.pct_apps
            );
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Contacted hosts\n");
    let c = &s.contacted;
    let _ = writeln!(
        md,
        "- {} unique hosts across {} domains ({} tracker domains)",
        c.unique_hosts, c.unique_domains, c.tracker_domains
    );
    let _ = writeln!(
        md,
        "- Apps contacting more tracker than non-tracker hosts: {} of {}",
        c.apps_more_trackers, c.apps
    );
    let _ = writeln!(
        md,
        "- Apps contacting no tracker host: {}\n",
        c.apps_zero_trackers
    );
    if !c.domain_ranking.is_empty() {
        let _ = writeln!(md, "| Domain | Tracker | Apps | % |\n|---|---|---:|---:|");
        for d in c.domain_ranking.iter().take(10) {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.1} |",
                d.domain,
                if d.tracker { "yes" } else { "no" },
                d.app_count,
                d.pct_apps
            );
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Transmissions\n");
    let t = &s.transmissions;
    let _ = writeln!(
        md,
        "- Requests with content: {} of {} ({:.1}%)\n",
        t.reviewed_requests, t.total_requests, t.pct_reviewed_requests
    );
    let _ = writeln!(
        md,
        "| Specificity | Manual | Automated | Observed | % |\n|---|---:|---:|---:|---:|"
    );
    for r in &t.by_specificity {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.1} |",
            r.specificity, r.manual_apps, r.automated_apps, r.observed_apps, r.pct_observed_apps
        );
    }
    md.push('\n');

    let _ = writeln!(md, "## Scope\n");
    let _ = writeln!(
        md,
        "Apps with at least one out-of-scope transmission: {}. Out-of-scope cells are marked with `*`.\n",
        s.scope_matrix.apps_out_of_scope
    );
    let mut header = String::from("| Feature category | Apps |");
    let mut rule = String::from("|---|---:|");
    for c in DataCategory::ALL {
        let _ = write!(header, " {} |", c.display_name());
        rule.push_str("---:|");
    }
    let _ = writeln!(md, "{header}\n{rule}");
    for row in &s.scope_matrix.rows {
        let _ = write!(
            md,
            "| {} | {} |",
            row.feature_category.display_name(),
            row.apps
        );
        for cell in &row.cells {
            let mark = if cell.in_scope { "" } else { "*" };
            let _ = write!(md, " {}{} |", cell.apps, mark);
        }
        md.push('\n');
    }
    md.push('\n');

    let _ = writeln!(md, "## Privacy labels\n");
    let l = &s.label_accuracy;
    let _ = writeln!(
        md,
        "- Apps without labels: {} ({:.1}%)",
        l.apps_without_labels, l.pct_apps_without_labels
    );
    let _ = writeln!(
        md,
        "- Apps declaring sharing without collection: {} ({:.1}%)",
        l.apps_sharing_without_collecting, l.pct_apps_sharing_without_collecting
    );
    let _ = writeln!(
        md,
        "- Apps with an undeclared practice: {} ({:.1}%)\n",
        l.apps_with_undeclared, l.pct_apps_with_undeclared
    );
    let _ = writeln!(
        md,
        "| Label | Collect ok | Collect undeclared | Share ok | Share undeclared | Unobserved |\n|---|---:|---:|---:|---:|---:|"
    );
    for r in &l.rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} |",
            r.label,
            r.declared_ok_collect,
            r.undeclared_collect,
            r.declared_ok_share,
            r.undeclared_share,
            r.unobserved_declarations
        );
    }
    md.push('\n');

    let _ = writeln!(md, "## Apps\n");
    for d in details {
        let _ = writeln!(md, "### {} ({})\n", d.app_id, d.display_name);
        let _ = writeln!(md, "- Category: {}", d.feature_category.display_name());
        let _ = writeln!(md, "- Trackers: {}", list_or_dash(&d.trackers));
        let _ = writeln!(
            md,
            "- Hosts: {} tracker, {} non-tracker",
            d.tracker_hosts, d.non_tracker_hosts
        );
        let _ = writeln!(md, "- Transmitted: {}", list_or_dash(&d.transmitted_types));
        let _ = writeln!(md, "- Out of scope: {}", list_or_dash(&d.out_of_scope));
        let _ = writeln!(md, "- Undeclared: {}\n", list_or_dash(&d.undeclared));
    }

    if !summary.ledger.is_empty() {
        let _ = writeln!(md, "## Errors\n");
        for e in &summary.ledger {
            let _ = writeln!(md, "- {} [{}]: {}", e.app_id, e.stage, e.message);
        }
        md.push('\n');
    }
    md
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the eight bundle files into `dir`, returning their paths.
pub fn render_report(dir: &Path, summary: &Summary, details: &[AppDetail]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut json = serde_json::to_vec_pretty(summary).map_err(|e| Error::json(dir, e))?;
    json.push(b'\n');
    let stats = &summary.stats;
    let contents: [Vec<u8>; 8] = [
        json,
        embedded_csv(stats)?,
        contacts_csv(stats)?,
        by_type_csv(stats)?,
        by_specificity_csv(stats)?,
        scope_csv(stats)?,
        labels_csv(stats)?,
        render_markdown(summary, details).into_bytes(),
    ];
    BUNDLE_FILES
        .iter()
        .zip(contents.iter())
        .map(|(name, bytes)| write_file(dir, name, bytes))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_bundle_has_headers() {
        let dir = tempfile::tempdir().unwrap();
        let paths = render_report(dir.path(), &Summary::default(), &[]).unwrap();
        assert_eq!(paths.len(), 8);
        let scope = std::fs::read_to_string(dir.path().join("scope_matrix.csv")).unwrap();
        let header = scope.lines().next().unwrap();
        assert!(header.starts_with(
            "feature_category,apps,device_ids,location,user_info,body_measurements,fitness_info,female_health_info,medical_info,"
        ));
        let emb = std::fs::read_to_string(dir.path().join("embedded_trackers.csv")).unwrap();
        assert_eq!(emb, "rank,tracker_name,app_count,pct_apps\n");
    }
}
