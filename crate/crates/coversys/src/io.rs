//! System files and JSON output conventions: a system is either a list
//! of progressions (moduli factored) or a product space with planes;
//! floats are emitted at 15 significant digits, rationals as "p/q".

use crate::arith::Progression;
use crate::cover::CoverSystem;
use crate::error::{Error, Result};
use crate::space::{Hyperplane, ProductSpace};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// A parsed system file: exactly one of the two forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemFile {
    Progressions {
        progressions: Vec<Progression>,
    },
    Space {
        space: Vec<u64>,
        planes: Vec<Hyperplane>,
    },
}

impl SystemFile {
    /// Parses a document, insisting on exactly one of the two forms.
    /// Syntax errors carry line and column positions.
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("{e} (line {}, column {})", e.line(), e.column())))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("expected a JSON object".into()))?;
        let has_progs = obj.contains_key("progressions");
        let has_space = obj.contains_key("space") || obj.contains_key("planes");
        match (has_progs, has_space) {
            (true, false) => Ok(serde_json::from_value(value)?),
            (false, true) => {
                if !(obj.contains_key("space") && obj.contains_key("planes")) {
                    return Err(Error::Parse(
                        "the space form needs both \"space\" and \"planes\"".into(),
                    ));
                }
                Ok(serde_json::from_value(value)?)
            }
            (true, true) => Err(Error::Parse(
                "a system file holds either progressions or a space, not both".into(),
            )),
            (false, false) => Err(Error::Parse(
                "expected \"progressions\" or \"space\"/\"planes\"".into(),
            )),
        }
    }

    pub fn to_cover_system(&self) -> Result<CoverSystem> {
        match self {
            SystemFile::Progressions { progressions } => {
                CoverSystem::from_progressions(progressions)
            }
            SystemFile::Space { space, planes } => {
                CoverSystem::from_planes(ProductSpace::new(space.clone())?, planes.clone())
            }
        }
    }

    /// The canonical file form of a system: the progressions form when
    /// the integer view exists, the space form otherwise.
    pub fn from_cover_system(system: &CoverSystem) -> Result<Self> {
        match system.crt() {
            Some(_) => Ok(SystemFile::Progressions {
                progressions: system.progressions()?,
            }),
            None => Ok(SystemFile::Space {
                space: system.space().sizes().to_vec(),
                planes: system.planes().to_vec(),
            }),
        }
    }
}

/// Rounds to 15 significant digits, the precision of all emitted floats.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// JSON number carrying a 15-significant-digit float.
pub fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(sig15(x))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Exact rational as a "p/q" string.
pub fn rational_str(r: &Ratio<u64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// System JSON for output, round-trippable as input.
pub fn system_json(system: &CoverSystem) -> Result<Value> {
    Ok(serde_json::to_value(SystemFile::from_cover_system(
        system,
    )?)?)
}

/// Convenience constructor for progression lists.
pub fn progressions_json(progs: &[Progression]) -> Value {
    json!({ "progressions": progs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_progression_form() {
        let text = r#"{"progressions":[{"a":0,"d":{"2":1}},{"a":1,"d":{"2":1}}]}"#;
        let file = SystemFile::parse(text).unwrap();
        let system = file.to_cover_system().unwrap();
        assert!(system.is_cover().unwrap());
    }

    #[test]
    fn parses_space_form() {
        let text = r#"{"space":[2,3],"planes":[[0,"*"],[1,"*"]]}"#;
        let file = SystemFile::parse(text).unwrap();
        let system = file.to_cover_system().unwrap();
        assert!(system.is_cover().unwrap());
        assert!(system.crt().is_none());
    }

    #[test]
    fn rejects_ambiguous_and_empty_forms() {
        assert!(SystemFile::parse(r#"{"progressions":[],"space":[2]}"#).is_err());
        assert!(SystemFile::parse(r#"{"planes":[[0]]}"#).is_err());
        assert!(SystemFile::parse(r#"{}"#).is_err());
        assert!(SystemFile::parse("[1,2,3]").is_err());
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = SystemFile::parse("{\n  \"progressions\": [,]\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn round_trips_own_output() {
        let text =
            r#"{"progressions":[{"a":1,"d":{"2":2}},{"a":0,"d":{"2":2}},{"a":1,"d":{"2":1}}]}"#;
        let system = SystemFile::parse(text).unwrap().to_cover_system().unwrap();
        let emitted = serde_json::to_string(&system_json(&system).unwrap()).unwrap();
        let again = SystemFile::parse(&emitted).unwrap().to_cover_system().unwrap();
        assert_eq!(system.planes(), again.planes());
    }

    #[test]
    fn sig15_rounds() {
        assert_eq!(sig15(2.0f64.ln() * 2.0), 1.38629436111989);
        assert_eq!(sig15(1.0), 1.0);
        assert_eq!(sig15(0.0), 0.0);
    }

    #[test]
    fn rational_formatting() {
        assert_eq!(rational_str(&Ratio::new(1, 2)), "1/2");
        assert_eq!(rational_str(&Ratio::new(3, 1)), "3/1");
    }
}
