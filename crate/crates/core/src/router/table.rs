use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalSpec, RouterError};

const BUILTIN_TABLE: &str = include_str!("../../config/router_table.toml");
pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route {
    /// Question category, or `*` for any.
    pub category: String,
    /// Lower-case substring that must occur in the answer-format hint.
    pub hint: String,
    pub spec: EvalSpec,
}

/// Versioned mapping from question category and answer format to a spec tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterTable {
    pub version: u32,
    pub fallback: EvalSpec,
    #[serde(default)]
    pub routes: Vec<Route>,
}

impl RouterTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE).expect("bundled router table is valid")
    }

    pub fn parse(text: &str) -> Result<Self, RouterError> {
        let table: RouterTable = toml::from_str(text).map_err(|e| RouterError::Config(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RouterError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| RouterError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), RouterError> {
        if self.version != TABLE_VERSION {
            return Err(RouterError::Config(format!(
                "router table version {} unsupported (expected {TABLE_VERSION})",
                self.version
            )));
        }
        self.fallback.validate()?;
        for (i, r) in self.routes.iter().enumerate() {
            if r.hint != r.hint.to_lowercase() {
                return Err(RouterError::Config(format!("route {i}: hint pattern must be lower-case")));
            }
            r.spec.validate().map_err(|e| RouterError::Config(format!("route {i}: {e}")))?;
        }
        Ok(())
    }

    /// Total: unmatched inputs get the fallback spec.
    pub fn route(&self, question_category: &str, answer_format_hint: &str) -> EvalSpec {
        let category = question_category.trim().to_lowercase();
        let hint = answer_format_hint.to_lowercase();
        self.routes
            .iter()
            .find(|r| (r.category == "*" || r.category == category) && hint.contains(&r.hint))
            .map(|r| r.spec.clone())
            .unwrap_or_else(|| self.fallback.clone())
    }
}

/// Routes with the bundled table.
pub fn route(question_category: &str, answer_format_hint: &str) -> EvalSpec {
    RouterTable::builtin().route(question_category, answer_format_hint)
}

#[cfg(test)]
mod tests {
    use super::super::EvalKind;
    use super::*;

    #[test]
    fn default_mappings() {
        assert_eq!(route("metadata", "python string").kind, EvalKind::StringExactMatch);
        assert_eq!(route("text", "python list of strings").kind, EvalKind::ElementListOverlap);
        assert_eq!(route("formula", "latex formula").kind, EvalKind::ComplexMathFormulaWithLlm);
        assert_eq!(route("unknown", "anything at all").kind, EvalKind::StringExactMatch);
        assert_eq!(route("table", "Your answer should be a float").kind, EvalKind::FloatExactMatch);
    }

    #[test]
    fn appendix_style_hints() {
        let hint =
            "Your answer should be a python list of strings, every element of the list is the name of the component";
        assert_eq!(route("text", hint).kind, EvalKind::ElementListOverlap);
        let hint =
            "Your answer should be a python list of three elements, every element is a formula string in latex format.";
        assert_eq!(route("formula", hint).kind, EvalKind::ComplexMathFormulaWithLlm);
        assert_eq!(route("image", "Your answer should be a python string.").kind, EvalKind::StringExactMatch);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(RouterTable::parse("version = 2\n[fallback]\nkind = \"eval_string_exact_match\"\n").is_err());
        let bad = "version = 1\n[fallback]\nkind = \"eval_negation\"\n";
        assert!(RouterTable::parse(bad).is_err());
        let upper = "version = 1\n[fallback]\nkind = \"eval_string_exact_match\"\n[[routes]]\ncategory = \"*\"\nhint = \"Word\"\nspec = { kind = \"eval_string_exact_match\" }\n";
        assert!(RouterTable::parse(upper).is_err());
    }
}
