use std::collections::BTreeSet;
use std::sync::OnceLock;

use mhealth_audit::assess::{scope_findings, ExpectationPolicy, ScopeRule};
use mhealth_audit::detect::{
    compile_persona_with, scan_corpus, AppRollup, AppTraffic, CompileOptions, DetectionHit,
    VariantKind,
};
use mhealth_audit::fixtures::{generate_corpus, FixtureConfig};
use mhealth_audit::model::{DataCategory, FeatureCategory, Specificity};
use mhealth_audit::pipeline::{load_corpus_traffic, run_detect, Audit};
use proptest::prelude::*;

/// Labelled traffic of the round-trip corpus, loaded once.
fn traffic() -> &'static (Audit, Vec<AppTraffic>) {
    static CELL: OnceLock<(Audit, Vec<AppTraffic>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let corpus = generate_corpus(&FixtureConfig::roundtrip(5), &dir).unwrap();
        let audit = Audit::load(&corpus.manifest, None).unwrap();
        let traffic = load_corpus_traffic(&audit);
        (audit, traffic)
    })
}

fn scan(kinds: &BTreeSet<VariantKind>, apps: &[AppTraffic]) -> mhealth_audit::detect::DetectionSet {
    let (audit, _) = traffic();
    let options = CompileOptions {
        kinds: kinds.clone(),
        ..Default::default()
    };
    let m = compile_persona_with(&audit.persona, &audit.taxonomy, &options).unwrap();
    scan_corpus(&m, apps)
}

fn specificity() -> impl Strategy<Value = Specificity> {
    prop::sample::select(Specificity::ALL.to_vec())
}

fn kind_subset() -> impl Strategy<Value = BTreeSet<VariantKind>> {
    prop::collection::btree_set(prop::sample::select(VariantKind::ALL.to_vec()), 0..=7)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn raising_max_specificity_keeps_findings_in_scope(
        feature in prop::sample::select(FeatureCategory::ALL.to_vec()),
        low in specificity(),
        high in specificity(),
        location in any::<bool>(),
        transmitted in prop::collection::btree_set(prop::sample::select(DataCategory::ALL.to_vec()), 0..=7),
    ) {
        prop_assume!(low <= high);
        let mut narrow = ExpectationPolicy::default_policy();
        narrow.rules.insert(feature, ScopeRule { max_specificity: low, location_in_scope: location });
        let mut wide = narrow.clone();
        wide.rules.insert(feature, ScopeRule { max_specificity: high, location_in_scope: location });
        let a = scope_findings(&narrow, "x", feature, &transmitted).unwrap();
        let b = scope_findings(&wide, "x", feature, &transmitted).unwrap();
        for (n, w) in a.iter().zip(&b) {
            prop_assert_eq!(n.transmitted, w.transmitted);
            prop_assert!(!n.in_scope || w.in_scope, "{:?} became out of scope", n.data_category);
        }
    }

    #[test]
    fn flow_and_app_order_do_not_change_results(
        seed in any::<u64>(),
    ) {
        let (_, apps) = traffic();
        let all: BTreeSet<VariantKind> = VariantKind::ALL.into_iter().collect();
        let base = scan(&all, apps);
        let mut rng = seed;
        let mut next = move || { rng ^= rng << 13; rng ^= rng >> 7; rng ^= rng << 17; rng };
        let mut shuffled: Vec<AppTraffic> = apps.clone();
        for app in &mut shuffled {
            for i in (1..app.flows.len()).rev() {
                let j = (next() % (i as u64 + 1)) as usize;
                app.flows.swap(i, j);
            }
        }
        shuffled.reverse();
        let other = scan(&all, &shuffled);
        prop_assert_eq!(&base.rollup, &other.rollup);
        let a: BTreeSet<&DetectionHit> = base.hits.iter().collect();
        let b: BTreeSet<&DetectionHit> = other.hits.iter().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn adding_variant_kinds_never_removes_hits(small in kind_subset(), extra in kind_subset()) {
        let (_, apps) = traffic();
        let large: BTreeSet<VariantKind> = small.union(&extra).copied().collect();
        let a = scan(&small, apps);
        let b = scan(&large, apps);
        let big: BTreeSet<&DetectionHit> = b.hits.iter().collect();
        for hit in &a.hits {
            prop_assert!(big.contains(hit), "{:?} lost", hit);
        }
    }

    #[test]
    fn rollup_merge_is_order_independent(
        picks in prop::collection::vec((0usize..6, any::<bool>(), any::<bool>()), 0..40),
        split in any::<prop::sample::Index>(),
    ) {
        let types = ["email", "city", "body_weight", "heart_rate", "imei", "medication"];
        let hits: Vec<DetectionHit> = picks.iter().enumerate().map(|(i, &(t, tracker, auto))| DetectionHit {
            app_id: "a".into(),
            flow_id: format!("f#{i}"),
            data_type_id: types[t].into(),
            variant_kind: VariantKind::Plain,
            location: mhealth_audit::capture::Location::Body,
            destination_host: "h".into(),
            host_label: if tracker { mhealth_audit::hostclass::HostLabel::Tracker } else { mhealth_audit::hostclass::HostLabel::NonTracker },
            crawl_kind: if auto { mhealth_audit::model::CrawlKind::Automated } else { mhealth_audit::model::CrawlKind::Manual },
        }).collect();
        let cut = if hits.is_empty() { 0 } else { split.index(hits.len() + 1) };
        let mut left = AppRollup::default();
        let mut right = AppRollup::default();
        let mut whole = AppRollup::default();
        for (i, h) in hits.iter().enumerate() {
            whole.record(h);
            if i < cut { left.record(h) } else { right.record(h) }
        }
        prop_assert_eq!(left.clone().merge(right.clone()), whole.clone());
        prop_assert_eq!(right.merge(left), whole);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn decoy_traffic_never_matches(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(&FixtureConfig::decoy_only(seed, 6, 12), dir.path()).unwrap();
        let audit = Audit::load(&corpus.manifest, None).unwrap();
        let set = run_detect(&audit).unwrap();
        prop_assert!(set.hits.is_empty(), "{:?}", set.hits.first());
    }

    #[test]
    fn hits_are_unique_per_flow_type_kind_location(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(&FixtureConfig::crawl_comparison(seed), dir.path()).unwrap();
        let audit = Audit::load(&corpus.manifest, None).unwrap();
        let set = run_detect(&audit).unwrap();
        let keys: BTreeSet<_> = set
            .hits
            .iter()
            .map(|h| (&h.app_id, &h.flow_id, &h.data_type_id, h.variant_kind, h.location))
            .collect();
        prop_assert_eq!(keys.len(), set.hits.len());
    }
}

#[test]
fn default_policy_places_location_in_scope_for_seven_categories() {
    let policy = ExpectationPolicy::default_policy();
    assert_eq!(policy.rules.len(), 14);
    assert_eq!(
        policy
            .rules
            .values()
            .filter(|r| r.location_in_scope)
            .count(),
        7
    );
}
