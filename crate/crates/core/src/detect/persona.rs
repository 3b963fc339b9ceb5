use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Taxonomy;

const DEFAULT_PERSONA: &str = include_str!("../../data/persona.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaAttribute {
    #[serde(rename = "type")]
    pub data_type_id: String,
    pub values: Vec<String>,
    #[serde(default)]
    pub numeric: bool,
    #[serde(default)]
    pub key_hints: Vec<String>,
}

/// Synthetic user profile whose known values are searched for in traffic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Persona {
    pub attributes: Vec<PersonaAttribute>,
}

impl Persona {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidPersona(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn default_persona() -> Self {
        Self::from_json(DEFAULT_PERSONA).expect("embedded persona is valid")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_PERSONA
    }

    pub fn attribute(&self, data_type_id: &str) -> Option<&PersonaAttribute> {
        self.attributes
            .iter()
            .find(|a| a.data_type_id == data_type_id)
    }

    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::EmptyPersona);
        }
        for attr in &self.attributes {
            if !taxonomy.contains(&attr.data_type_id) {
                return Err(Error::UnknownDataType(attr.data_type_id.clone()));
            }
            if attr.values.is_empty() || attr.values.iter().any(|v| v.trim().is_empty()) {
                return Err(Error::InvalidPersona(format!(
                    "`{}` needs at least one non-empty value",
                    attr.data_type_id
                )));
            }
            if attr.numeric {
                if attr.key_hints.iter().all(|h| h.trim().is_empty()) {
                    return Err(Error::InvalidPersona(format!(
                        "numeric attribute `{}` needs a key hint",
                        attr.data_type_id
                    )));
                }
                if let Some(bad) = attr.values.iter().find(|v| !is_number(v)) {
                    return Err(Error::InvalidPersona(format!(
                        "numeric attribute `{}` has non-numeric value `{bad}`",
                        attr.data_type_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `123` or `123.45`.
pub(crate) fn is_number(s: &str) -> bool {
    let mut parts = s.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_persona_is_valid_and_complete() {
        let taxonomy = Taxonomy::default_taxonomy();
        let persona = Persona::default_persona();
        persona.validate(&taxonomy).unwrap();
        for entry in taxonomy.entries() {
            assert!(
                persona.attribute(&entry.id).is_some(),
                "no persona value for {}",
                entry.id
            );
        }
    }

    #[test]
    fn validation_errors() {
        let taxonomy = Taxonomy::default_taxonomy();
        let empty = Persona { attributes: vec![] };
        assert!(matches!(
            empty.validate(&taxonomy),
            Err(Error::EmptyPersona)
        ));

        let unknown = Persona::from_json(r#"[{"type":"shoe_size","values":["44"]}]"#).unwrap();
        assert!(matches!(
            unknown.validate(&taxonomy),
            Err(Error::UnknownDataType(_))
        ));

        let no_hint =
            Persona::from_json(r#"[{"type":"body_weight","values":["82"],"numeric":true}]"#)
                .unwrap();
        assert!(matches!(
            no_hint.validate(&taxonomy),
            Err(Error::InvalidPersona(_))
        ));
    }

    #[test]
    fn numbers() {
        assert!(is_number("82"));
        assert!(is_number("25.9"));
        assert!(!is_number("25."));
        assert!(!is_number(".5"));
        assert!(!is_number("1e3"));
    }
}
