//! Canned fixture plans.

use serde::{Deserialize, Serialize};

use super::{AppPlan, ArtifactStyle, CaptureStyle, FixtureConfig, LeakPlan};
use crate::capture::Location;
use crate::detect::{percent_encoded, Persona, VariantKind};
use crate::error::{Error, Result};
use crate::hostclass::HostLabel;
use crate::model::{CrawlKind, DataCategory, FeatureCategory, Taxonomy};
use crate::staticscan::default_signature_db;

/// Corpus-level figures a solved plan must reproduce exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetStats {
    pub apps: usize,
    pub apps_with_tracker: usize,
    pub total_embeddings: usize,
    /// Apps embedding the most common library.
    pub top_library_apps: usize,
    /// Manual crawl.
    pub total_requests: usize,
    pub reviewable_requests: usize,
    /// Apps contacting strictly more tracker than non-tracker hosts.
    pub apps_more_trackers: usize,
    pub apps_zero_trackers: usize,
    pub top_app_tracker_hosts: usize,
    pub top_app_tracker_domains: usize,
}

impl TargetStats {
    /// A 152-app corpus at one tenth of the request volume of a large study.
    pub fn anchor_corpus() -> Self {
        TargetStats {
            apps: 152,
            apps_with_tracker: 144,
            total_embeddings: 958,
            top_library_apps: 137,
            total_requests: 2651,
            reviewable_requests: 717,
            apps_more_trackers: 94,
            apps_zero_trackers: 4,
            top_app_tracker_hosts: 44,
            top_app_tracker_domains: 23,
        }
    }
}

fn infeasible(msg: impl Into<String>) -> Error {
    Error::InvalidPlan(format!("target_stats: {}", msg.into()))
}

fn tracker_host(host: usize, domain: usize) -> String {
    format!("h{host}.t{domain:02}-analytics.com")
}

/// Builds app plans that reproduce `t`.
pub fn solve_targets(t: &TargetStats) -> Result<Vec<AppPlan>> {
    let db = default_signature_db();
    let n_sigs = db.len();
    if t.apps == 0 {
        return Err(infeasible("no apps"));
    }
    if t.apps_with_tracker > t.apps || t.top_library_apps > t.apps_with_tracker {
        return Err(infeasible("app counts out of order"));
    }
    if t.total_embeddings < t.apps_with_tracker || t.total_embeddings > t.apps_with_tracker * n_sigs
    {
        return Err(infeasible(
            "embedding total unreachable with the signature set",
        ));
    }
    if t.apps_with_tracker > 0 && t.top_library_apps == 0 {
        return Err(infeasible("top library must be embedded somewhere"));
    }
    if t.apps_more_trackers == 0 || t.apps_more_trackers + t.apps_zero_trackers > t.apps {
        return Err(infeasible("contact groups do not fit"));
    }
    if t.top_app_tracker_domains == 0
        || t.top_app_tracker_domains > t.top_app_tracker_hosts
        || t.top_app_tracker_hosts < 2
    {
        return Err(infeasible("top app hosts and domains inconsistent"));
    }

    // Embedded libraries.
    let base = t.total_embeddings / t.apps_with_tracker.max(1);
    let extra = t.total_embeddings % t.apps_with_tracker.max(1);
    let mut embedded: Vec<Vec<String>> = vec![Vec::new(); t.apps];
    let mut lib_counts = vec![0usize; n_sigs];
    let mut cursor = 0;
    for (i, libs) in embedded.iter_mut().enumerate().take(t.apps_with_tracker) {
        let k = base + usize::from(i < extra);
        let mut want = k;
        if i < t.top_library_apps {
            libs.push(db[0].signature_id.clone());
            lib_counts[0] += 1;
            want -= 1;
        }
        if want > n_sigs - 1 {
            return Err(infeasible("too many libraries per app"));
        }
        for _ in 0..want {
            let s = 1 + cursor % (n_sigs - 1);
            cursor += 1;
            libs.push(db[s].signature_id.clone());
            lib_counts[s] += 1;
        }
    }
    if lib_counts[1..].iter().any(|&c| c >= lib_counts[0]) {
        return Err(infeasible("top library is not the most common"));
    }

    // Contacted hosts. Group order: the top app, the other "more" apps,
    // the remaining tracker-contacting apps, then the zero-tracker apps.
    let zero_from = t.apps - t.apps_zero_trackers;
    let mut plans = Vec::with_capacity(t.apps);
    for (i, libs) in embedded.into_iter().enumerate() {
        let app_id = format!("org.fixture.app{i:03}");
        let category = FeatureCategory::ALL[i % FeatureCategory::ALL.len()];
        let mut plan = AppPlan::new(&app_id, category);
        plan.embedded = libs;
        let (trackers, first_party) = if i == 0 {
            let hosts: Vec<String> = (0..t.top_app_tracker_hosts)
                .map(|h| {
                    let d = if h < t.top_app_tracker_domains {
                        h
                    } else {
                        (h - t.top_app_tracker_domains) % t.top_app_tracker_domains
                    };
                    tracker_host(h, d)
                })
                .collect();
            (hosts, 1)
        } else if i < t.apps_more_trackers {
            let n = 1 + i % 2;
            let k = (3 + i % 6).min(t.top_app_tracker_hosts - 1).max(n + 1);
            ((0..k).map(|h| tracker_host(h, (i + h) % 40)).collect(), n)
        } else if i < zero_from {
            let k = 1 + i % 2;
            (
                (0..k).map(|h| tracker_host(h, (i + h) % 40)).collect(),
                k + i % 3,
            )
        } else {
            (Vec::new(), 2)
        };
        plan.tracker_hosts = trackers;
        plan.non_tracker_hosts = (0..first_party)
            .map(|k| format!("{}.app{i:03}.example", ["api", "cdn", "auth", "img"][k % 4]))
            .collect();
        if i % 10 == 0 {
            plan.leaks.push(if plan.tracker_hosts.is_empty() {
                LeakPlan {
                    data_type: "email".into(),
                    variant: VariantKind::Plain,
                    location: Location::Body,
                    destination: HostLabel::NonTracker,
                    crawl: CrawlKind::Manual,
                }
            } else {
                LeakPlan {
                    data_type: "advertising_id".into(),
                    variant: VariantKind::Md5Hex,
                    location: Location::Query,
                    destination: HostLabel::Tracker,
                    crawl: CrawlKind::Manual,
                }
            });
        }
        plans.push(plan);
    }
    if t.apps_more_trackers > 1 && t.top_app_tracker_hosts <= 3 {
        return Err(infeasible("top app needs more hosts than the other apps"));
    }

    // Request volumes.
    let hosts_of = |p: &AppPlan| p.tracker_hosts.len() + p.non_tracker_hosts.len();
    let mut reviewable: Vec<usize> = plans.iter().map(|p| p.leaks.len()).collect();
    let floor: usize = reviewable.iter().sum();
    if t.reviewable_requests < floor {
        return Err(infeasible("fewer reviewable requests than planted leaks"));
    }
    spread(&mut reviewable, t.reviewable_requests - floor);
    let mut requests: Vec<usize> = plans
        .iter()
        .zip(&reviewable)
        .map(|(p, &r)| hosts_of(p).max(r))
        .collect();
    let floor: usize = requests.iter().sum();
    if t.total_requests < floor {
        return Err(infeasible(format!("needs at least {floor} requests")));
    }
    spread(&mut requests, t.total_requests - floor);
    for ((plan, r), q) in plans.iter_mut().zip(reviewable).zip(requests) {
        plan.reviewable = Some(r);
        plan.requests = Some(q);
    }
    Ok(plans)
}

/// Adds `amount` round-robin, one unit at a time.
fn spread(counts: &mut [usize], amount: usize) {
    let n = counts.len();
    for k in 0..amount {
        counts[k % n] += 1;
    }
}

/// One feature-category row of a scope matrix: app count and per-column
/// transmitting-app counts in [`DataCategory::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeTableRow {
    pub feature_category: FeatureCategory,
    pub apps: usize,
    pub counts: [usize; 7],
}

/// A data type of `category` the default persona has a value for, and the
/// variant used to plant it.
fn representative(
    taxonomy: &Taxonomy,
    persona: &Persona,
    category: DataCategory,
) -> (String, VariantKind) {
    let attr = taxonomy
        .sorted_entries()
        .into_iter()
        .filter(|e| e.category == category)
        .find_map(|e| persona.attribute(&e.id))
        .expect("default persona covers every category");
    let kind = if attr.numeric {
        VariantKind::KeyedNumeric
    } else {
        VariantKind::Plain
    };
    (attr.data_type_id.clone(), kind)
}

fn can_plant(persona: &Persona, data_type: &str, kind: VariantKind, location: Location) -> bool {
    let Some(attr) = persona.attribute(data_type) else {
        return false;
    };
    if attr.numeric != (kind == VariantKind::KeyedNumeric) {
        return false;
    }
    let in_url = matches!(location, Location::Path | Location::Query);
    attr.values.iter().any(|v| match kind {
        VariantKind::Plain => {
            !in_url
                || v.bytes().all(|b| {
                    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~' | b'@')
                })
        }
        VariantKind::PercentEncoded => percent_encoded(v) != *v,
        _ => true,
    })
}

fn leak(
    data_type: &str,
    variant: VariantKind,
    location: Location,
    to_tracker: bool,
    crawl: CrawlKind,
) -> LeakPlan {
    LeakPlan {
        data_type: data_type.to_string(),
        variant,
        location,
        destination: if to_tracker {
            HostLabel::Tracker
        } else {
            HostLabel::NonTracker
        },
        crawl,
    }
}

const LOCATIONS: [Location; 4] = [
    Location::Path,
    Location::Query,
    Location::Header,
    Location::Body,
];

impl FixtureConfig {
    /// Every variant in every location, spread over eight apps with mixed
    /// artifact and capture formats and both crawls.
    pub fn roundtrip(seed: u64) -> Self {
        let persona = Persona::default_persona();
        let types: Vec<&str> = persona
            .attributes
            .iter()
            .map(|a| a.data_type_id.as_str())
            .collect();
        let db = default_signature_db();
        let mut apps = Vec::new();
        for a in 0..8 {
            let mut plan = AppPlan::new(
                &format!("org.fixture.roundtrip{a}"),
                FeatureCategory::ALL[a],
            );
            plan.artifact = [
                ArtifactStyle::ClassList,
                ArtifactStyle::Dex,
                ArtifactStyle::Apk,
            ][a % 3];
            plan.capture = [
                CaptureStyle::Jsonl,
                CaptureStyle::JsonlGzip,
                CaptureStyle::Har,
            ][a % 3];
            plan.embedded = (0..1 + a % 4)
                .map(|k| db[(a * 5 + k) % db.len()].signature_id.clone())
                .collect();
            plan.tracker_hosts = vec![
                format!("collect.rt{a}-metrics.com"),
                format!("events.rt{a}-ads.net"),
            ];
            plan.non_tracker_hosts = vec![format!("api.roundtrip{a}.example")];
            let mut c = 0;
            for kind in VariantKind::ALL {
                for location in LOCATIONS {
                    let candidates: Vec<&str> = types
                        .iter()
                        .copied()
                        .filter(|t| can_plant(&persona, t, kind, location))
                        .collect();
                    let data_type = candidates[(a * 3 + c) % candidates.len()];
                    let n = a * 28 + c;
                    let crawl = if n % 4 == 3 {
                        CrawlKind::Automated
                    } else {
                        CrawlKind::Manual
                    };
                    plan.leaks
                        .push(leak(data_type, kind, location, n % 2 == 0, crawl));
                    c += 1;
                }
            }
            apps.push(plan);
        }
        let mut config = FixtureConfig::new(seed, apps);
        config.decoy_flow_count = 3;
        config
    }

    /// Apps whose automated crawl reaches fewer health screens than the
    /// manual one.
    pub fn crawl_comparison(seed: u64) -> Self {
        // (data type, variant, apps in manual crawl, apps in automated crawl)
        let plants = [
            ("email", VariantKind::Plain, 20, 19),
            ("advertising_id", VariantKind::Sha256Hex, 14, 14),
            ("body_weight", VariantKind::KeyedNumeric, 15, 6),
            ("workout_type", VariantKind::Base64, 8, 2),
            ("medical_condition", VariantKind::Plain, 10, 3),
            ("pregnancy_status", VariantKind::PercentEncoded, 4, 1),
        ];
        let apps = (0..24)
            .map(|i| {
                let mut plan = AppPlan::new(
                    &format!("org.fixture.crawl{i:02}"),
                    FeatureCategory::ALL[i % 14],
                );
                plan.tracker_hosts = vec![format!("sdk.crawl{i:02}-track.io")];
                for (p, (data_type, kind, manual, automated)) in plants.iter().enumerate() {
                    let location = LOCATIONS[(i + p) % 4];
                    let location =
                        if can_plant(&Persona::default_persona(), data_type, *kind, location) {
                            location
                        } else {
                            Location::Body
                        };
                    if i < *manual {
                        plan.leaks.push(leak(
                            data_type,
                            *kind,
                            location,
                            (i + p) % 2 == 0,
                            CrawlKind::Manual,
                        ));
                    }
                    if i < *automated {
                        plan.leaks.push(leak(
                            data_type,
                            *kind,
                            location,
                            (i + p) % 3 == 0,
                            CrawlKind::Automated,
                        ));
                    }
                }
                plan
            })
            .collect();
        FixtureConfig::new(seed, apps)
    }

    /// Traffic without any persona value.
    pub fn decoy_only(seed: u64, apps: usize, flows_per_app: usize) -> Self {
        let plans = (0..apps)
            .map(|i| {
                let mut plan = AppPlan::new(
                    &format!("org.fixture.decoy{i:03}"),
                    FeatureCategory::ALL[i % 14],
                );
                plan.capture = [
                    CaptureStyle::Jsonl,
                    CaptureStyle::JsonlGzip,
                    CaptureStyle::Har,
                ][i % 3];
                plan.tracker_hosts = vec![format!("px.decoy{i:03}-ads.com")];
                plan
            })
            .collect();
        let mut config = FixtureConfig::new(seed, plans);
        config.decoy_flow_count = flows_per_app;
        config
    }

    /// Apps whose transmissions reproduce a scope matrix: the i-th app of
    /// a row transmits column c iff i < counts[c].
    pub fn from_scope_table(seed: u64, rows: &[ScopeTableRow]) -> Result<Self> {
        let taxonomy = Taxonomy::default_taxonomy();
        let persona = Persona::default_persona();
        let mut apps = Vec::new();
        for row in rows {
            if let Some(c) = row.counts.iter().position(|&c| c > row.apps) {
                return Err(Error::InvalidPlan(format!(
                    "{}: {} apps transmit {} but the row has {}",
                    row.feature_category,
                    row.counts[c],
                    DataCategory::ALL[c],
                    row.apps
                )));
            }
            for i in 0..row.apps {
                let app_id = format!("org.fixture.{}.app{i:02}", row.feature_category.as_str());
                let mut plan = AppPlan::new(&app_id, row.feature_category);
                plan.tracker_hosts = vec![format!(
                    "t.{}{i:02}-sdk.com",
                    row.feature_category.as_str().replace('_', "")
                )];
                for (c, category) in DataCategory::ALL.into_iter().enumerate() {
                    if i < row.counts[c] {
                        let (data_type, kind) = representative(&taxonomy, &persona, category);
                        plan.leaks.push(leak(
                            &data_type,
                            kind,
                            Location::Body,
                            (i + c) % 2 == 0,
                            CrawlKind::Manual,
                        ));
                    }
                }
                apps.push(plan);
            }
        }
        Ok(FixtureConfig::new(seed, apps))
    }

    /// A named preset.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "roundtrip" => Ok(Self::roundtrip(seed)),
            "crawl-comparison" => Ok(Self::crawl_comparison(seed)),
            "decoy" => Ok(Self::decoy_only(seed, 12, 8)),
            "anchors" => Ok(FixtureConfig {
                seed,
                apps: Vec::new(),
                decoy_flow_count: 1,
                target_stats: Some(TargetStats::anchor_corpus()),
            }),
            other => Err(Error::InvalidPlan(format!(
                "unknown preset `{other}` (roundtrip, crawl-comparison, decoy, anchors)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_targets_solve() {
        let t = TargetStats::anchor_corpus();
        let plans = solve_targets(&t).unwrap();
        assert_eq!(plans.len(), t.apps);
        assert_eq!(
            plans.iter().map(|p| p.requests.unwrap()).sum::<usize>(),
            t.total_requests
        );
        assert_eq!(
            plans.iter().map(|p| p.reviewable.unwrap()).sum::<usize>(),
            t.reviewable_requests
        );
        assert_eq!(
            plans.iter().map(|p| p.embedded.len()).sum::<usize>(),
            t.total_embeddings
        );
        let more = plans
            .iter()
            .filter(|p| p.tracker_hosts.len() > p.non_tracker_hosts.len())
            .count();
        assert_eq!(more, t.apps_more_trackers);
    }

    #[test]
    fn infeasible_targets_rejected() {
        let mut t = TargetStats::anchor_corpus();
        t.total_requests = 10;
        assert!(matches!(solve_targets(&t), Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn roundtrip_covers_every_combination() {
        let c = FixtureConfig::roundtrip(1);
        let mut combos = std::collections::BTreeSet::new();
        for app in &c.apps {
            for l in &app.leaks {
                combos.insert((l.variant, l.location));
            }
        }
        assert_eq!(combos.len(), 28);
        assert!(c.apps.iter().map(|a| a.leaks.len()).sum::<usize>() >= 200);
    }
}
