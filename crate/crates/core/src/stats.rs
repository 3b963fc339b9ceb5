//! Corpus-level aggregations over per-app results.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::assess::{AppAssessment, ExpectationPolicy, Verdict};
use crate::capture::FlowRecord;
use crate::detect::DetectionSet;
use crate::error::{Error, Result};
use crate::hostclass::{registrable_domain, HostLabel, PublicSuffixList};
use crate::model::{
    CrawlKind, DataCategory, FeatureCategory, LabelCategory, Specificity, Taxonomy,
};
use crate::staticscan::EmbeddedTrackerReport;

/// Percentage rounded to one decimal; 0 for an empty denominator.
pub fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        round_to(100.0 * count as f64 / total as f64, 1)
    }
}

pub fn round_to(value: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (value * f).round() / f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryCount {
    pub tracker_name: String,
    pub app_count: usize,
    pub pct_apps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSection {
    pub apps: usize,
    pub apps_with_tracker: usize,
    pub pct_apps_with_tracker: f64,
    pub total_embeddings: usize,
    pub mean_trackers_per_app: f64,
    pub library_ranking: Vec<LibraryCount>,
}

/// Ranks by count descending, then name ascending.
fn ranking(counts: BTreeMap<String, usize>) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

pub fn embedded_stats(reports: &[EmbeddedTrackerReport]) -> Result<EmbeddedSection> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let apps = reports.len();
    let mut libraries: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0;
    let mut with_tracker = 0;
    for r in reports {
        let names: BTreeSet<&String> = r.tracker_names.iter().collect();
        total += names.len();
        if !names.is_empty() {
            with_tracker += 1;
        }
        for name in names {
            *libraries.entry(name.clone()).or_default() += 1;
        }
    }
    Ok(EmbeddedSection {
        apps,
        apps_with_tracker: with_tracker,
        pct_apps_with_tracker: pct(with_tracker, apps),
        total_embeddings: total,
        mean_trackers_per_app: round_to(total as f64 / apps as f64, 2),
        library_ranking: ranking(libraries)
            .into_iter()
            .map(|(tracker_name, app_count)| LibraryCount {
                tracker_name,
                app_count,
                pct_apps: pct(app_count, apps),
            })
            .collect(),
    })
}

/// Distinct hosts one app contacted, split by label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppContacts {
    pub app_id: String,
    pub tracker_hosts: BTreeSet<String>,
    pub non_tracker_hosts: BTreeSet<String>,
}

impl AppContacts {
    /// Every request counts, including those without content. `crawl`
    /// restricts to one crawl kind.
    pub fn from_flows(app_id: &str, flows: &[FlowRecord], crawl: Option<CrawlKind>) -> Self {
        let mut out = AppContacts {
            app_id: app_id.to_string(),
            ..Default::default()
        };
        for f in flows {
            if crawl.is_some_and(|c| c != f.crawl_kind) {
                continue;
            }
            match f.host_label.unwrap_or(HostLabel::NonTracker) {
                HostLabel::Tracker => out.tracker_hosts.insert(f.host.clone()),
                HostLabel::NonTracker => out.non_tracker_hosts.insert(f.host.clone()),
            };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppContactCount {
    pub app_id: String,
    pub tracker_hosts: usize,
    pub non_tracker_hosts: usize,
    pub tracker_domains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainShare {
    pub domain: String,
    pub tracker: bool,
    pub app_count: usize,
    pub pct_apps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactSection {
    pub apps: usize,
    pub unique_hosts: usize,
    pub unique_domains: usize,
    pub tracker_domains: usize,
    pub apps_more_trackers: usize,
    pub apps_zero_trackers: usize,
    /// Sorted by tracker hosts descending, then app id.
    pub per_app: Vec<AppContactCount>,
    pub domain_ranking: Vec<DomainShare>,
}

fn domain_of(host: &str, psl: Option<&PublicSuffixList>) -> String {
    registrable_domain(host, psl).unwrap_or_else(|_| host.to_ascii_lowercase())
}

pub fn contact_stats(contacts: &[AppContacts], psl: Option<&PublicSuffixList>) -> ContactSection {
    let apps = contacts.len();
    let mut hosts = BTreeSet::new();
    let mut domain_apps: BTreeMap<String, usize> = BTreeMap::new();
    let mut tracker_domains = BTreeSet::new();
    let mut per_app = Vec::with_capacity(apps);
    for c in contacts {
        let mut domains = BTreeSet::new();
        let mut own_tracker_domains = BTreeSet::new();
        for h in &c.tracker_hosts {
            let d = domain_of(h, psl);
            tracker_domains.insert(d.clone());
            own_tracker_domains.insert(d.clone());
            domains.insert(d);
            hosts.insert(h.as_str());
        }
        for h in &c.non_tracker_hosts {
            domains.insert(domain_of(h, psl));
            hosts.insert(h.as_str());
        }
        for d in domains {
            *domain_apps.entry(d).or_default() += 1;
        }
        per_app.push(AppContactCount {
            app_id: c.app_id.clone(),
            tracker_hosts: c.tracker_hosts.len(),
            non_tracker_hosts: c.non_tracker_hosts.len(),
            tracker_domains: own_tracker_domains.len(),
        });
    }
    per_app.sort_by(|a, b| {
        b.tracker_hosts
            .cmp(&a.tracker_hosts)
            .then_with(|| a.app_id.cmp(&b.app_id))
    });
    let unique_domains = domain_apps.len();
    ContactSection {
        apps,
        unique_hosts: hosts.len(),
        unique_domains,
        tracker_domains: tracker_domains.len(),
        apps_more_trackers: per_app
            .iter()
            .filter(|a| a.tracker_hosts > a.non_tracker_hosts)
            .count(),
        apps_zero_trackers: per_app.iter().filter(|a| a.tracker_hosts == 0).count(),
        per_app,
        domain_ranking: ranking(domain_apps)
            .into_iter()
            .map(|(domain, app_count)| DomainShare {
                tracker: tracker_domains.contains(&domain),
                domain,
                app_count,
                pct_apps: pct(app_count, apps),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeTransmission {
    pub data_type_id: String,
    pub category: DataCategory,
    pub specificity: Specificity,
    pub apps: usize,
    pub non_tracker_apps: usize,
    pub tracker_apps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificityTransmission {
    pub specificity: Specificity,
    pub manual_apps: usize,
    pub automated_apps: usize,
    /// Over the observation crawl selection.
    pub observed_apps: usize,
    pub pct_observed_apps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSection {
    pub apps: usize,
    pub total_requests: usize,
    pub reviewed_requests: usize,
    pub pct_reviewed_requests: f64,
    pub by_type: Vec<TypeTransmission>,
    pub by_specificity: Vec<SpecificityTransmission>,
}

/// Per-type destination app counts over `crawl`, and per-specificity app
/// counts for each crawl kind.
pub fn transmission_stats(
    detections: &DetectionSet,
    taxonomy: &Taxonomy,
    crawl: Option<CrawlKind>,
) -> TransmissionSection {
    let apps = detections.rollup.len();
    let mut to_any: BTreeMap<&str, usize> = BTreeMap::new();
    let mut to_non: BTreeMap<&str, usize> = BTreeMap::new();
    let mut to_tracker: BTreeMap<&str, usize> = BTreeMap::new();
    let mut spec_apps: BTreeMap<(Specificity, Option<CrawlKind>), usize> = BTreeMap::new();
    let mut selections = vec![Some(CrawlKind::Manual), Some(CrawlKind::Automated)];
    if !selections.contains(&crawl) {
        selections.push(crawl);
    }
    for rollup in detections.rollup.values() {
        for (id, d) in rollup.transmitted(crawl) {
            let Some(entry) = taxonomy.entry(&id) else {
                continue;
            };
            let id = entry.id.as_str();
            *to_any.entry(id).or_default() += 1;
            if d.to_non_tracker {
                *to_non.entry(id).or_default() += 1;
            }
            if d.to_tracker {
                *to_tracker.entry(id).or_default() += 1;
            }
        }
        for &selection in &selections {
            let specs: BTreeSet<Specificity> = rollup
                .transmitted(selection)
                .keys()
                .filter_map(|id| taxonomy.entry(id).map(|e| e.specificity()))
                .collect();
            for s in specs {
                *spec_apps.entry((s, selection)).or_default() += 1;
            }
        }
    }
    let get = |m: &BTreeMap<&str, usize>, id: &str| m.get(id).copied().unwrap_or(0);
    let by_type = taxonomy
        .sorted_entries()
        .into_iter()
        .map(|e| TypeTransmission {
            data_type_id: e.id.clone(),
            category: e.category,
            specificity: e.specificity(),
            apps: get(&to_any, &e.id),
            non_tracker_apps: get(&to_non, &e.id),
            tracker_apps: get(&to_tracker, &e.id),
        })
        .collect();
    let count =
        |s: Specificity, sel: Option<CrawlKind>| spec_apps.get(&(s, sel)).copied().unwrap_or(0);
    let by_specificity = Specificity::ALL
        .iter()
        .map(|&s| {
            let observed = count(s, crawl);
            SpecificityTransmission {
                specificity: s,
                manual_apps: count(s, Some(CrawlKind::Manual)),
                automated_apps: count(s, Some(CrawlKind::Automated)),
                observed_apps: observed,
                pct_observed_apps: pct(observed, apps),
            }
        })
        .collect();
    TransmissionSection {
        apps,
        total_requests: detections.total_requests,
        reviewed_requests: detections.reviewed_requests,
        pct_reviewed_requests: pct(detections.reviewed_requests, detections.total_requests),
        by_type,
        by_specificity,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeCell {
    pub apps: usize,
    pub in_scope: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeRow {
    pub feature_category: FeatureCategory,
    pub apps: usize,
    /// In column order of [`DataCategory::ALL`].
    pub cells: Vec<ScopeCell>,
}

impl ScopeRow {
    pub fn cell(&self, category: DataCategory) -> ScopeCell {
        let i = DataCategory::ALL
            .iter()
            .position(|c| *c == category)
            .expect("known category");
        self.cells[i]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeMatrix {
    pub rows: Vec<ScopeRow>,
    /// Apps with at least one out-of-scope transmission.
    pub apps_out_of_scope: usize,
}

impl ScopeMatrix {
    pub fn row(&self, category: FeatureCategory) -> &ScopeRow {
        self.rows
            .iter()
            .find(|r| r.feature_category == category)
            .expect("every feature category has a row")
    }

    pub fn cell(&self, feature: FeatureCategory, data: DataCategory) -> ScopeCell {
        self.row(feature).cell(data)
    }
}

/// Feature category × data category app counts, one row per category.
pub fn scope_matrix(assessments: &[AppAssessment], policy: &ExpectationPolicy) -> ScopeMatrix {
    let mut rows: Vec<ScopeRow> = FeatureCategory::ALL
        .iter()
        .map(|&fc| {
            let rule = policy.rules.get(&fc).copied();
            ScopeRow {
                feature_category: fc,
                apps: 0,
                cells: DataCategory::ALL
                    .iter()
                    .map(|&dc| ScopeCell {
                        apps: 0,
                        in_scope: rule.is_some_and(|r| r.allows(dc)),
                    })
                    .collect(),
            }
        })
        .collect();
    let mut out_of_scope = 0;
    for a in assessments {
        let row = &mut rows[FeatureCategory::ALL
            .iter()
            .position(|c| *c == a.feature_category)
            .expect("known category")];
        row.apps += 1;
        let mut violates = false;
        for f in &a.findings {
            if !f.transmitted {
                continue;
            }
            let i = DataCategory::ALL
                .iter()
                .position(|c| *c == f.data_category)
                .expect("known category");
            row.cells[i].apps += 1;
            violates |= !f.in_scope;
        }
        if violates {
            out_of_scope += 1;
        }
    }
    ScopeMatrix {
        rows,
        apps_out_of_scope: out_of_scope,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: LabelCategory,
    pub declared_ok_collect: usize,
    pub undeclared_collect: usize,
    pub declared_ok_share: usize,
    pub undeclared_share: usize,
    pub unobserved_declarations: usize,
    /// undeclared / (declared + undeclared), as percentages.
    pub pct_undeclared_collect: f64,
    pub pct_undeclared_share: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSection {
    pub apps: usize,
    pub apps_without_labels: usize,
    pub pct_apps_without_labels: f64,
    pub apps_sharing_without_collecting: usize,
    pub pct_apps_sharing_without_collecting: f64,
    pub apps_with_undeclared: usize,
    pub pct_apps_with_undeclared: f64,
    pub rows: Vec<LabelRow>,
}

impl LabelSection {
    pub fn row(&self, label: &LabelCategory) -> Option<&LabelRow> {
        self.rows.iter().find(|r| &r.label == label)
    }
}

pub fn label_accuracy(assessments: &[AppAssessment]) -> LabelSection {
    let apps = assessments.len();
    let mut rows: BTreeMap<LabelCategory, [usize; 5]> = LabelCategory::RELEVANT
        .iter()
        .map(|l| (l.clone(), [0; 5]))
        .collect();
    let mut without = 0;
    let mut share_only = 0;
    let mut undeclared = 0;
    for a in assessments {
        if !a.labels_published {
            without += 1;
        }
        if a.declares_sharing_without_collection {
            share_only += 1;
        }
        let mut any_undeclared = false;
        for v in &a.verdicts {
            let counts = rows.entry(v.label.clone()).or_insert([0; 5]);
            for verdict in &v.verdicts {
                let slot = match verdict {
                    Verdict::CorrectCollection => 0,
                    Verdict::UndeclaredCollection => 1,
                    Verdict::CorrectSharing => 2,
                    Verdict::UndeclaredSharing => 3,
                    Verdict::UnobservedDeclaration => 4,
                };
                counts[slot] += 1;
                any_undeclared |= verdict.is_violation();
            }
        }
        if any_undeclared {
            undeclared += 1;
        }
    }
    let order = |l: &LabelCategory| {
        LabelCategory::RELEVANT
            .iter()
            .position(|r| r == l)
            .unwrap_or(usize::MAX)
    };
    let mut rows: Vec<LabelRow> = rows
        .into_iter()
        .map(|(label, c)| LabelRow {
            label,
            declared_ok_collect: c[0],
            undeclared_collect: c[1],
            declared_ok_share: c[2],
            undeclared_share: c[3],
            unobserved_declarations: c[4],
            pct_undeclared_collect: pct(c[1], c[0] + c[1]),
            pct_undeclared_share: pct(c[3], c[2] + c[3]),
        })
        .collect();
    rows.sort_by(|a, b| (order(&a.label), &a.label).cmp(&(order(&b.label), &b.label)));
    LabelSection {
        apps,
        apps_without_labels: without,
        pct_apps_without_labels: pct(without, apps),
        apps_sharing_without_collecting: share_only,
        pct_apps_sharing_without_collecting: pct(share_only, apps),
        apps_with_undeclared: undeclared,
        pct_apps_with_undeclared: pct(undeclared, apps),
        rows,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub embedded: EmbeddedSection,
    pub contacted: ContactSection,
    pub transmissions: TransmissionSection,
    pub scope_matrix: ScopeMatrix,
    pub label_accuracy: LabelSection,
}
