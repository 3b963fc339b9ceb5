//! Expectation (scope of collected data per feature category) and
//! declaration (privacy-label accuracy) checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::{AppRollup, Destinations};
use crate::error::{Error, Result};
use crate::model::{
    AppRecord, CrawlKind, DataCategory, FeatureCategory, LabelCategory, PrivacyLabelSet,
    Specificity, Taxonomy,
};

const DEFAULT_POLICY: &str = include_str!("../data/policy.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeRule {
    pub max_specificity: Specificity,
    pub location_in_scope: bool,
}

impl ScopeRule {
    /// Location has its own rule regardless of its standard rank.
    pub fn allows(&self, category: DataCategory) -> bool {
        if category == DataCategory::Location {
            self.location_in_scope
        } else {
            category.specificity() <= self.max_specificity
        }
    }
}

/// What each feature category may legitimately transmit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpectationPolicy {
    pub rules: BTreeMap<FeatureCategory, ScopeRule>,
}

impl ExpectationPolicy {
    pub fn from_json(text: &str) -> Result<Self> {
        let policy: ExpectationPolicy =
            serde_json::from_str(text).map_err(|e| Error::InvalidPolicy(e.to_string()))?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn default_policy() -> Self {
        Self::from_json(DEFAULT_POLICY).expect("embedded policy is valid")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_POLICY
    }

    pub fn validate(&self) -> Result<()> {
        let missing: Vec<&str> = FeatureCategory::ALL
            .iter()
            .filter(|c| !self.rules.contains_key(c))
            .map(|c| c.as_str())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidPolicy(format!(
                "no rule for {}",
                missing.join(", ")
            )))
        }
    }

    pub fn rule(&self, category: FeatureCategory) -> Result<ScopeRule> {
        self.rules
            .get(&category)
            .copied()
            .ok_or_else(|| Error::MissingPolicyRule(category.as_str().to_string()))
    }
}

impl Default for ExpectationPolicy {
    fn default() -> Self {
        Self::default_policy()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeFinding {
    pub app_id: String,
    pub data_category: DataCategory,
    pub transmitted: bool,
    pub in_scope: bool,
}

/// Data categories of the transmitted types, unknown ids skipped.
pub fn transmitted_categories(
    taxonomy: &Taxonomy,
    transmitted: &BTreeMap<String, Destinations>,
) -> BTreeSet<DataCategory> {
    transmitted
        .keys()
        .filter_map(|id| taxonomy.entry(id).map(|e| e.category))
        .collect()
}

/// One finding per data category, in column order.
pub fn scope_findings(
    policy: &ExpectationPolicy,
    app_id: &str,
    feature_category: FeatureCategory,
    transmitted: &BTreeSet<DataCategory>,
) -> Result<Vec<ScopeFinding>> {
    let rule = policy.rule(feature_category)?;
    Ok(DataCategory::ALL
        .iter()
        .map(|&category| ScopeFinding {
            app_id: app_id.to_string(),
            data_category: category,
            transmitted: transmitted.contains(&category),
            in_scope: rule.allows(category),
        })
        .collect())
}

/// Scope findings for one app from its detection rollup. `crawl` selects
/// which crawl's observations count (`None` for all).
pub fn evaluate_scope(
    policy: &ExpectationPolicy,
    taxonomy: &Taxonomy,
    rollup: &AppRollup,
    app: &AppRecord,
    crawl: Option<CrawlKind>,
) -> Result<Vec<ScopeFinding>> {
    let categories = transmitted_categories(taxonomy, &rollup.transmitted(crawl));
    scope_findings(policy, &app.app_id, app.feature_category, &categories)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CorrectCollection,
    CorrectSharing,
    UndeclaredCollection,
    UndeclaredSharing,
    UnobservedDeclaration,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CorrectCollection => "correct_collection",
            Verdict::CorrectSharing => "correct_sharing",
            Verdict::UndeclaredCollection => "undeclared_collection",
            Verdict::UndeclaredSharing => "undeclared_sharing",
            Verdict::UnobservedDeclaration => "unobserved_declaration",
        }
    }

    pub fn is_violation(self) -> bool {
        matches!(
            self,
            Verdict::UndeclaredCollection | Verdict::UndeclaredSharing
        )
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdicts for one label category from observed and declared flags.
pub fn verdicts_for(
    observed_collected: bool,
    observed_shared: bool,
    declared_collected: bool,
    declared_shared: bool,
) -> BTreeSet<Verdict> {
    let mut out = BTreeSet::new();
    if observed_collected {
        out.insert(if declared_collected {
            Verdict::CorrectCollection
        } else {
            Verdict::UndeclaredCollection
        });
    }
    if observed_shared {
        out.insert(if declared_shared {
            Verdict::CorrectSharing
        } else {
            Verdict::UndeclaredSharing
        });
    }
    if (declared_collected || declared_shared) && !observed_collected {
        out.insert(Verdict::UnobservedDeclaration);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclarationVerdict {
    pub app_id: String,
    pub label: LabelCategory,
    pub observed_collected: bool,
    pub observed_shared: bool,
    pub declared_collected: bool,
    pub declared_shared: bool,
    pub verdicts: BTreeSet<Verdict>,
}

impl DeclarationVerdict {
    pub fn new(
        app_id: &str,
        label: LabelCategory,
        observed: (bool, bool),
        declared: (bool, bool),
    ) -> Self {
        // A tracker transmission is also a transmission.
        let observed_collected = observed.0 || observed.1;
        DeclarationVerdict {
            app_id: app_id.to_string(),
            label,
            observed_collected,
            observed_shared: observed.1,
            declared_collected: declared.0,
            declared_shared: declared.1,
            verdicts: verdicts_for(observed_collected, observed.1, declared.0, declared.1),
        }
    }
}

/// Observed (collected, shared) per label category.
pub fn observed_by_label(
    taxonomy: &Taxonomy,
    transmitted: &BTreeMap<String, Destinations>,
) -> BTreeMap<LabelCategory, (bool, bool)> {
    let mut out: BTreeMap<LabelCategory, (bool, bool)> = BTreeMap::new();
    for (id, d) in transmitted {
        let Some(entry) = taxonomy.entry(id) else {
            continue;
        };
        let slot = out.entry(entry.label.clone()).or_default();
        slot.0 |= d.to_non_tracker || d.to_tracker;
        slot.1 |= d.to_tracker;
    }
    out
}

/// One verdict per relevant label category.
pub fn label_verdicts(
    app_id: &str,
    labels: &PrivacyLabelSet,
    observed: &BTreeMap<LabelCategory, (bool, bool)>,
) -> Vec<DeclarationVerdict> {
    LabelCategory::RELEVANT
        .iter()
        .map(|label| {
            let seen = observed.get(label).copied().unwrap_or_default();
            DeclarationVerdict::new(app_id, label.clone(), seen, labels.declared(label))
        })
        .collect()
}

pub fn evaluate_labels(
    app: &AppRecord,
    rollup: &AppRollup,
    taxonomy: &Taxonomy,
    crawl: Option<CrawlKind>,
) -> Vec<DeclarationVerdict> {
    if app.labels.shares_without_collecting() {
        log::warn!("{}: label declares sharing without collection", app.app_id);
    }
    let observed = observed_by_label(taxonomy, &rollup.transmitted(crawl));
    label_verdicts(&app.app_id, &app.labels, &observed)
}

/// Assessment of one app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppAssessment {
    pub app_id: String,
    pub feature_category: FeatureCategory,
    pub labels_published: bool,
    pub declares_sharing_without_collection: bool,
    pub findings: Vec<ScopeFinding>,
    pub verdicts: Vec<DeclarationVerdict>,
}

pub fn assess_app(
    policy: &ExpectationPolicy,
    taxonomy: &Taxonomy,
    rollup: &AppRollup,
    app: &AppRecord,
    crawl: Option<CrawlKind>,
) -> Result<AppAssessment> {
    Ok(AppAssessment {
        app_id: app.app_id.clone(),
        feature_category: app.feature_category,
        labels_published: app.labels.is_published(),
        declares_sharing_without_collection: app.labels.shares_without_collecting(),
        findings: evaluate_scope(policy, taxonomy, rollup, app, crawl)?,
        verdicts: evaluate_labels(app, rollup, taxonomy, crawl),
    })
}

/// Verdict CSV, one row per (app, label).
pub fn write_verdicts_csv<W: std::io::Write>(out: W, assessments: &[AppAssessment]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "app_id",
        "label",
        "labels_published",
        "observed_collected",
        "observed_shared",
        "declared_collected",
        "declared_shared",
        "verdicts",
    ])?;
    for a in assessments {
        for v in &a.verdicts {
            let verdicts: Vec<&str> = v.verdicts.iter().map(|x| x.as_str()).collect();
            w.write_record([
                v.app_id.as_str(),
                v.label.as_str(),
                bool_str(a.labels_published),
                bool_str(v.observed_collected),
                bool_str(v.observed_shared),
                bool_str(v.declared_collected),
                bool_str(v.declared_shared),
                &verdicts.join(";"),
            ])?;
        }
    }
    w.flush()
        .map_err(|e| Error::io(Path::new("<verdicts>"), e))?;
    Ok(())
}

pub(crate) fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_policy_shape() {
        let p = ExpectationPolicy::default_policy();
        assert_eq!(p.rules.len(), 14);
        let located: Vec<_> = p
            .rules
            .iter()
            .filter(|(_, r)| r.location_in_scope)
            .map(|(c, _)| *c)
            .collect();
        assert_eq!(located.len(), 7);
        assert_eq!(
            p.rule(FeatureCategory::HealthEducation)
                .unwrap()
                .max_specificity,
            Specificity::Standard
        );
    }

    #[test]
    fn incomplete_policy_is_rejected() {
        let err = ExpectationPolicy::from_json(
            r#"{"screen_overlay":{"max_specificity":"standard","location_in_scope":false}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPolicy(_)));
        let partial = ExpectationPolicy {
            rules: BTreeMap::new(),
        };
        assert!(matches!(
            partial.rule(FeatureCategory::Diagnostic),
            Err(Error::MissingPolicyRule(_))
        ));
    }

    fn one(cat: DataCategory, feature: FeatureCategory) -> ScopeFinding {
        let set: BTreeSet<_> = [cat].into_iter().collect();
        scope_findings(&ExpectationPolicy::default_policy(), "a", feature, &set)
            .unwrap()
            .into_iter()
            .find(|f| f.data_category == cat)
            .unwrap()
    }

    #[test]
    fn scope_examples() {
        let f = one(
            DataCategory::BodyMeasurements,
            FeatureCategory::HealthEducation,
        );
        assert!(f.transmitted && !f.in_scope);
        assert!(!one(DataCategory::Location, FeatureCategory::ScreenOverlay).in_scope);
        assert!(one(DataCategory::Location, FeatureCategory::Telemedicine).in_scope);
        assert!(one(DataCategory::DeviceIds, FeatureCategory::ScreenOverlay).in_scope);
    }

    #[test]
    fn label_examples() {
        let v = DeclarationVerdict::new(
            "a",
            LabelCategory::FitnessInfo,
            (false, true),
            (false, false),
        );
        assert_eq!(
            v.verdicts,
            [Verdict::UndeclaredCollection, Verdict::UndeclaredSharing]
                .into_iter()
                .collect()
        );
        let v =
            DeclarationVerdict::new("a", LabelCategory::HealthInfo, (true, false), (true, false));
        assert_eq!(
            v.verdicts,
            [Verdict::CorrectCollection].into_iter().collect()
        );
        let v =
            DeclarationVerdict::new("a", LabelCategory::Location, (false, false), (false, true));
        assert_eq!(
            v.verdicts,
            [Verdict::UnobservedDeclaration].into_iter().collect()
        );
    }
}
