//! Shared domain vocabulary: data-type taxonomy, specificity levels,
//! privacy-label categories, feature categories and app records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_TAXONOMY: &str = include_str!("../data/taxonomy.json");

/// How sensitive a piece of health-related information is.
///
/// Ordered: `Standard < Nonstandard < Medical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Specificity {
    Standard,
    Nonstandard,
    Medical,
}

impl Specificity {
    pub const ALL: [Specificity; 3] = [
        Specificity::Standard,
        Specificity::Nonstandard,
        Specificity::Medical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Specificity::Standard => "standard",
            Specificity::Nonstandard => "nonstandard",
            Specificity::Medical => "medical",
        }
    }
}

impl fmt::Display for Specificity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Specificity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Specificity::Standard),
            "nonstandard" => Ok(Specificity::Nonstandard),
            "medical" => Ok(Specificity::Medical),
            other => Err(format!("unknown specificity `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataCategory {
    DeviceIds,
    Location,
    UserInfo,
    BodyMeasurements,
    FitnessInfo,
    FemaleHealthInfo,
    MedicalInfo,
}

impl DataCategory {
    /// Column order of the scope matrix.
    pub const ALL: [DataCategory; 7] = [
        DataCategory::DeviceIds,
        DataCategory::Location,
        DataCategory::UserInfo,
        DataCategory::BodyMeasurements,
        DataCategory::FitnessInfo,
        DataCategory::FemaleHealthInfo,
        DataCategory::MedicalInfo,
    ];

    pub fn specificity(self) -> Specificity {
        match self {
            DataCategory::DeviceIds | DataCategory::Location | DataCategory::UserInfo => {
                Specificity::Standard
            }
            DataCategory::BodyMeasurements | DataCategory::FitnessInfo => Specificity::Nonstandard,
            DataCategory::FemaleHealthInfo | DataCategory::MedicalInfo => Specificity::Medical,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataCategory::DeviceIds => "device_ids",
            DataCategory::Location => "location",
            DataCategory::UserInfo => "user_info",
            DataCategory::BodyMeasurements => "body_measurements",
            DataCategory::FitnessInfo => "fitness_info",
            DataCategory::FemaleHealthInfo => "female_health_info",
            DataCategory::MedicalInfo => "medical_info",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DataCategory::DeviceIds => "Device IDs",
            DataCategory::Location => "Location",
            DataCategory::UserInfo => "User Info",
            DataCategory::BodyMeasurements => "Body measurements",
            DataCategory::FitnessInfo => "Fitness info",
            DataCategory::FemaleHealthInfo => "Female health info",
            DataCategory::MedicalInfo => "Medical info",
        }
    }
}

impl fmt::Display for DataCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown data category `{s}`"))
    }
}

/// Privacy-label category as declared on the store listing.
///
/// The four categories relevant to PII/PHI are modelled explicitly, with
/// health data split into its fitness and health subcategories. Every other
/// store category is carried through as `Other`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LabelCategory {
    DeviceOrOtherIds,
    Location,
    PersonalInfo,
    FitnessInfo,
    HealthInfo,
    Other(String),
}

impl LabelCategory {
    /// Categories for which observations can exist.
    pub const RELEVANT: [LabelCategory; 5] = [
        LabelCategory::DeviceOrOtherIds,
        LabelCategory::Location,
        LabelCategory::PersonalInfo,
        LabelCategory::FitnessInfo,
        LabelCategory::HealthInfo,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            LabelCategory::DeviceOrOtherIds => "device_or_other_ids",
            LabelCategory::Location => "location",
            LabelCategory::PersonalInfo => "personal_info",
            LabelCategory::FitnessInfo => "fitness_info",
            LabelCategory::HealthInfo => "health_info",
            LabelCategory::Other(name) => name,
        }
    }

    pub fn is_phi(&self) -> bool {
        matches!(self, LabelCategory::FitnessInfo | LabelCategory::HealthInfo)
    }

    /// Whether an entry of `category` may carry this label.
    pub fn is_consistent_with(&self, category: DataCategory) -> bool {
        match category.specificity() {
            Specificity::Standard => matches!(
                self,
                LabelCategory::DeviceOrOtherIds
                    | LabelCategory::Location
                    | LabelCategory::PersonalInfo
            ),
            Specificity::Nonstandard => *self == LabelCategory::FitnessInfo,
            Specificity::Medical => *self == LabelCategory::HealthInfo,
        }
    }
}

impl fmt::Display for LabelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for LabelCategory {
    fn from(s: &str) -> Self {
        match s {
            "device_or_other_ids" => LabelCategory::DeviceOrOtherIds,
            "location" => LabelCategory::Location,
            "personal_info" => LabelCategory::PersonalInfo,
            "fitness_info" => LabelCategory::FitnessInfo,
            "health_info" => LabelCategory::HealthInfo,
            other => LabelCategory::Other(other.to_string()),
        }
    }
}

impl TryFrom<String> for LabelCategory {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s.trim().is_empty() {
            return Err("empty label category".into());
        }
        Ok(LabelCategory::from(s.as_str()))
    }
}

impl From<LabelCategory> for String {
    fn from(l: LabelCategory) -> String {
        l.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    ScreenOverlay,
    HealthEducation,
    StepCounter,
    WorkoutTracker,
    CardioTracker,
    DietTracker,
    Wearable,
    MentalWellbeing,
    Pharmacy,
    PhysicianFinder,
    FemaleHealth,
    Diagnostic,
    HealthMonitor,
    Telemedicine,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 14] = [
        FeatureCategory::ScreenOverlay,
        FeatureCategory::HealthEducation,
        FeatureCategory::StepCounter,
        FeatureCategory::WorkoutTracker,
        FeatureCategory::CardioTracker,
        FeatureCategory::DietTracker,
        FeatureCategory::Wearable,
        FeatureCategory::MentalWellbeing,
        FeatureCategory::Pharmacy,
        FeatureCategory::PhysicianFinder,
        FeatureCategory::FemaleHealth,
        FeatureCategory::Diagnostic,
        FeatureCategory::HealthMonitor,
        FeatureCategory::Telemedicine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::ScreenOverlay => "screen_overlay",
            FeatureCategory::HealthEducation => "health_education",
            FeatureCategory::StepCounter => "step_counter",
            FeatureCategory::WorkoutTracker => "workout_tracker",
            FeatureCategory::CardioTracker => "cardio_tracker",
            FeatureCategory::DietTracker => "diet_tracker",
            FeatureCategory::Wearable => "wearable",
            FeatureCategory::MentalWellbeing => "mental_wellbeing",
            FeatureCategory::Pharmacy => "pharmacy",
            FeatureCategory::PhysicianFinder => "physician_finder",
            FeatureCategory::FemaleHealth => "female_health",
            FeatureCategory::Diagnostic => "diagnostic",
            FeatureCategory::HealthMonitor => "health_monitor",
            FeatureCategory::Telemedicine => "telemedicine",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FeatureCategory::ScreenOverlay => "Screen Overlay",
            FeatureCategory::HealthEducation => "Health Education",
            FeatureCategory::StepCounter => "Step Counter",
            FeatureCategory::WorkoutTracker => "Workout Tracker",
            FeatureCategory::CardioTracker => "Cardio Tracker",
            FeatureCategory::DietTracker => "Diet Tracker",
            FeatureCategory::Wearable => "Wearable",
            FeatureCategory::MentalWellbeing => "Mental Wellbeing",
            FeatureCategory::Pharmacy => "Pharmacy",
            FeatureCategory::PhysicianFinder => "Physician Finder",
            FeatureCategory::FemaleHealth => "Female Health",
            FeatureCategory::Diagnostic => "Diagnostic",
            FeatureCategory::HealthMonitor => "Health Monitor",
            FeatureCategory::Telemedicine => "Telemedicine",
        }
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown feature category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrawlKind {
    Manual,
    Automated,
}

impl CrawlKind {
    pub const ALL: [CrawlKind; 2] = [CrawlKind::Manual, CrawlKind::Automated];

    pub fn as_str(self) -> &'static str {
        match self {
            CrawlKind::Manual => "manual",
            CrawlKind::Automated => "automated",
        }
    }
}

impl fmt::Display for CrawlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub id: String,
    pub category: DataCategory,
    pub label: LabelCategory,
    pub name: String,
}

impl TaxonomyEntry {
    pub fn specificity(&self) -> Specificity {
        self.category.specificity()
    }
}

/// Result of [`Taxonomy::lookup`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataTypeInfo {
    pub category: DataCategory,
    pub specificity: Specificity,
    pub label: LabelCategory,
}

/// Validated mapping of leaf data types to category, specificity and label.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    entries: Vec<TaxonomyEntry>,
    index: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn from_entries(entries: Vec<TaxonomyEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if entry.id.trim().is_empty() {
                return Err(Error::MalformedTaxonomy(format!(
                    "entry {i} has an empty id"
                )));
            }
            if index.insert(entry.id.clone(), i).is_some() {
                return Err(Error::MalformedTaxonomy(format!(
                    "duplicate data type id `{}`",
                    entry.id
                )));
            }
            if !entry.label.is_consistent_with(entry.category) {
                return Err(Error::MalformedTaxonomy(format!(
                    "`{}`: label `{}` is inconsistent with category `{}`",
                    entry.id, entry.label, entry.category
                )));
            }
        }
        Ok(Taxonomy { entries, index })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<TaxonomyEntry> =
            serde_json::from_str(text).map_err(|e| Error::MalformedTaxonomy(e.to_string()))?;
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The shipped taxonomy: 14 standard PII types and 21 PHI types.
    pub fn default_taxonomy() -> Self {
        Self::from_json(DEFAULT_TAXONOMY).expect("embedded taxonomy is valid")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_TAXONOMY
    }

    pub fn lookup(&self, data_type_id: &str) -> Result<DataTypeInfo> {
        let entry = self
            .entry(data_type_id)
            .ok_or_else(|| Error::UnknownDataType(data_type_id.to_string()))?;
        Ok(DataTypeInfo {
            category: entry.category,
            specificity: entry.specificity(),
            label: entry.label.clone(),
        })
    }

    pub fn entry(&self, data_type_id: &str) -> Option<&TaxonomyEntry> {
        self.index.get(data_type_id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[TaxonomyEntry] {
        &self.entries
    }

    pub fn contains(&self, data_type_id: &str) -> bool {
        self.index.contains_key(data_type_id)
    }

    /// Entries ordered by (specificity, category, id).
    pub fn sorted_entries(&self) -> Vec<&TaxonomyEntry> {
        let mut out: Vec<&TaxonomyEntry> = self.entries.iter().collect();
        out.sort_by(|a, b| {
            (a.specificity(), a.category, &a.id).cmp(&(b.specificity(), b.category, &b.id))
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDeclaration {
    pub label: LabelCategory,
    #[serde(default)]
    pub collected: bool,
    #[serde(default)]
    pub shared: bool,
}

/// Declared data practices of one app.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabelSet", into = "RawLabelSet")]
pub struct PrivacyLabelSet {
    published: bool,
    declarations: BTreeMap<LabelCategory, (bool, bool)>,
}

#[derive(Serialize, Deserialize)]
struct RawLabelSet {
    #[serde(default)]
    published: bool,
    #[serde(default)]
    declarations: Vec<LabelDeclaration>,
}

impl TryFrom<RawLabelSet> for PrivacyLabelSet {
    type Error = String;

    fn try_from(raw: RawLabelSet) -> Result<Self, Self::Error> {
        if raw.published {
            PrivacyLabelSet::published(raw.declarations)
        } else if raw.declarations.is_empty() {
            Ok(PrivacyLabelSet::unpublished())
        } else {
            Err("unpublished label set must not carry declarations".into())
        }
    }
}

impl From<PrivacyLabelSet> for RawLabelSet {
    fn from(set: PrivacyLabelSet) -> Self {
        RawLabelSet {
            published: set.published,
            declarations: set.declarations().collect(),
        }
    }
}

impl PrivacyLabelSet {
    pub fn unpublished() -> Self {
        PrivacyLabelSet::default()
    }

    pub fn published(declarations: Vec<LabelDeclaration>) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for d in declarations {
            if map
                .insert(d.label.clone(), (d.collected, d.shared))
                .is_some()
            {
                return Err(format!("label `{}` declared twice", d.label));
            }
        }
        Ok(PrivacyLabelSet {
            published: true,
            declarations: map,
        })
    }

    pub fn is_published(&self) -> bool {
        self.published
    }

    /// (collected, shared) as declared; both false when undeclared.
    pub fn declared(&self, label: &LabelCategory) -> (bool, bool) {
        self.declarations
            .get(label)
            .copied()
            .unwrap_or((false, false))
    }

    pub fn declarations(&self) -> impl Iterator<Item = LabelDeclaration> + '_ {
        self.declarations
            .iter()
            .map(|(label, &(collected, shared))| LabelDeclaration {
                label: label.clone(),
                collected,
                shared,
            })
    }

    /// True if some category is declared shared but not collected.
    pub fn shares_without_collecting(&self) -> bool {
        self.declarations.values().any(|&(c, s)| s && !c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureRef {
    pub path: PathBuf,
    pub crawl: CrawlKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRecord {
    pub app_id: String,
    #[serde(default)]
    pub display_name: String,
    pub feature_category: FeatureCategory,
    #[serde(default)]
    pub labels: PrivacyLabelSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<PathBuf>,
    #[serde(default)]
    pub captures: Vec<CaptureRef>,
}

impl AppRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.app_id.trim().is_empty() {
            return Err("app_id is empty".into());
        }
        if self.artifact.is_none() && self.captures.is_empty() {
            return Err(format!(
                "app `{}` has neither an artifact nor captures",
                self.app_id
            ));
        }
        Ok(())
    }
}

/// A per-app failure recorded without aborting the corpus run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub app_id: String,
    pub stage: String,
    pub message: String,
}

/// Checks app-id uniqueness across a list of records.
pub fn check_unique_app_ids(apps: &[AppRecord]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for app in apps {
        if !seen.insert(app.app_id.as_str()) {
            return Err(format!("duplicate app_id `{}`", app.app_id));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, category: DataCategory, label: LabelCategory) -> TaxonomyEntry {
        TaxonomyEntry {
            id: id.into(),
            category,
            label,
            name: id.into(),
        }
    }

    #[test]
    fn specificity_order() {
        assert!(Specificity::Standard < Specificity::Nonstandard);
        assert!(Specificity::Nonstandard < Specificity::Medical);
    }

    #[test]
    fn body_weight_is_nonstandard() {
        let t = Taxonomy::from_entries(vec![entry(
            "body_weight",
            DataCategory::BodyMeasurements,
            LabelCategory::FitnessInfo,
        )])
        .unwrap();
        assert_eq!(
            t.lookup("body_weight").unwrap().specificity,
            Specificity::Nonstandard
        );
    }

    #[test]
    fn medical_condition_is_medical() {
        let t = Taxonomy::from_entries(vec![entry(
            "medical_condition",
            DataCategory::MedicalInfo,
            LabelCategory::HealthInfo,
        )])
        .unwrap();
        assert_eq!(
            t.lookup("medical_condition").unwrap().specificity,
            Specificity::Medical
        );
    }

    #[test]
    fn inconsistent_label_rejected() {
        let err = Taxonomy::from_entries(vec![entry(
            "body_weight",
            DataCategory::MedicalInfo,
            LabelCategory::FitnessInfo,
        )])
        .unwrap_err();
        assert!(matches!(err, Error::MalformedTaxonomy(_)));
    }

    #[test]
    fn duplicate_and_unknown_category_rejected() {
        let dup = Taxonomy::from_entries(vec![
            entry("x", DataCategory::Location, LabelCategory::Location),
            entry("x", DataCategory::Location, LabelCategory::Location),
        ]);
        assert!(matches!(dup, Err(Error::MalformedTaxonomy(_))));

        let unknown =
            Taxonomy::from_json(r#"[{"id":"x","category":"vibes","label":"location","name":"X"}]"#);
        assert!(matches!(unknown, Err(Error::MalformedTaxonomy(_))));

        let other = Taxonomy::from_json(
            r#"[{"id":"x","category":"location","label":"app_activity","name":"X"}]"#,
        );
        assert!(matches!(other, Err(Error::MalformedTaxonomy(_))));
    }

    #[test]
    fn default_lookups() {
        let t = Taxonomy::default_taxonomy();
        let ad = t.lookup("advertising_id").unwrap();
        assert_eq!(
            (ad.category, ad.specificity, ad.label),
            (
                DataCategory::DeviceIds,
                Specificity::Standard,
                LabelCategory::DeviceOrOtherIds
            )
        );
        let mc = t.lookup("menstrual_cycle").unwrap();
        assert_eq!(
            (mc.category, mc.specificity, mc.label),
            (
                DataCategory::FemaleHealthInfo,
                Specificity::Medical,
                LabelCategory::HealthInfo
            )
        );
        assert!(matches!(
            t.lookup("unknown_xyz"),
            Err(Error::UnknownDataType(_))
        ));
    }

    #[test]
    fn default_taxonomy_counts() {
        let t = Taxonomy::default_taxonomy();
        let standard = t
            .entries()
            .iter()
            .filter(|e| e.specificity() == Specificity::Standard)
            .count();
        let phi = t.entries().len() - standard;
        assert!(standard >= 14, "{standard}");
        assert!(phi >= 21, "{phi}");
    }

    #[test]
    fn every_default_entry_maps_to_fixed_specificity() {
        let t = Taxonomy::default_taxonomy();
        for e in t.entries() {
            let info = t.lookup(&e.id).unwrap();
            assert_eq!(info.specificity, e.category.specificity());
            assert_eq!(info, t.lookup(&e.id).unwrap());
        }
    }

    #[test]
    fn label_set_rules() {
        let unpublished: Result<PrivacyLabelSet, _> = serde_json::from_str(
            r#"{"published":false,"declarations":[{"label":"location","collected":true}]}"#,
        );
        assert!(unpublished.is_err());

        let dup: Result<PrivacyLabelSet, _> = serde_json::from_str(
            r#"{"published":true,"declarations":[{"label":"location"},{"label":"location"}]}"#,
        );
        assert!(dup.is_err());

        let set: PrivacyLabelSet = serde_json::from_str(
            r#"{"published":true,"declarations":[{"label":"location","shared":true}]}"#,
        )
        .unwrap();
        assert_eq!(set.declared(&LabelCategory::Location), (false, true));
        assert!(set.shares_without_collecting());
        assert_eq!(set.declared(&LabelCategory::HealthInfo), (false, false));
    }

    #[test]
    fn feature_categories_are_fourteen() {
        assert_eq!(FeatureCategory::ALL.len(), 14);
        for c in FeatureCategory::ALL {
            assert_eq!(c.as_str().parse::<FeatureCategory>().unwrap(), c);
        }
    }
}
