//! Symbol substitution table applied before the numeric trials.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::formula::{parse_expr, parse_symbol, Expr, Formula, ParseError, UnitTable};

const DEFAULT_CONSTANTS: &str = include_str!("../../data/constants.json");

#[derive(Debug, Clone, PartialEq)]
pub enum ConstantValue {
    /// Replacement expression, substituted in the first pass.
    Expr(Expr),
    /// SI magnitude, substituted in the second pass.
    Number(f64),
}

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error("constants file is not a JSON object")]
    NotAnObject,
    #[error("constants JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("constant key `{key}`: {source}")]
    Key { key: String, source: ParseError },
    #[error("constant `{key}`: {source}")]
    Value { key: String, source: ParseError },
    #[error("constant `{key}` must be a LaTeX string or a number")]
    BadValue { key: String },
    #[error("constant `{0}` is not finite")]
    NotFinite(String),
    #[error("replacement for `{key}` mentions `{other}`, which is itself replaced by an expression")]
    Nested { key: String, other: String },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Map from canonical symbol name to its replacement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstantsMap {
    entries: BTreeMap<String, ConstantValue>,
}

impl ConstantsMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shipped table: pi, e, c_0, k, g, N_A, h, hbar, k_B.
    pub fn default_map(units: &UnitTable) -> Self {
        Self::from_json(DEFAULT_CONSTANTS, units).expect("shipped constants table is valid")
    }

    /// Parse a JSON object of `symbol -> LaTeX string | number`. Keys are
    /// LaTeX symbols and go through the same canonicalization as formulas.
    pub fn from_json(text: &str, units: &UnitTable) -> Result<Self, ConstantsError> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(obj) = value else {
            return Err(ConstantsError::NotAnObject);
        };
        let mut map = ConstantsMap::new();
        for (raw_key, raw_val) in obj {
            let key =
                parse_symbol(&raw_key, units).map_err(|source| ConstantsError::Key { key: raw_key.clone(), source })?;
            let val = match raw_val {
                Value::Number(n) => ConstantValue::Number(n.as_f64().unwrap_or(f64::NAN)),
                Value::String(s) => match parse_expr(&s, units)
                    .map_err(|source| ConstantsError::Value { key: raw_key.clone(), source })?
                {
                    Expr::Num(v) => ConstantValue::Number(v),
                    Expr::Unit(u) => ConstantValue::Number(u.si_magnitude),
                    e => ConstantValue::Expr(e),
                },
                _ => return Err(ConstantsError::BadValue { key: raw_key }),
            };
            map.entries.insert(key, val);
        }
        map.check()?;
        Ok(map)
    }

    pub fn load(path: &Path, units: &UnitTable) -> Result<Self, ConstantsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConstantsError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, units)
    }

    pub fn insert_expr(&mut self, symbol: impl Into<String>, e: Expr) -> Result<(), ConstantsError> {
        self.entries.insert(symbol.into(), ConstantValue::Expr(e));
        self.check()
    }

    pub fn insert_number(&mut self, symbol: impl Into<String>, v: f64) -> Result<(), ConstantsError> {
        self.entries.insert(symbol.into(), ConstantValue::Number(v));
        self.check()
    }

    pub fn get(&self, symbol: &str) -> Option<&ConstantValue> {
        self.entries.get(symbol)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ConstantValue)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    // Expression values may mention numeric keys (the numeric pass runs
    // afterwards) but not other expression keys.
    fn check(&self) -> Result<(), ConstantsError> {
        for (key, val) in &self.entries {
            match val {
                ConstantValue::Number(v) if !v.is_finite() => return Err(ConstantsError::NotFinite(key.clone())),
                ConstantValue::Number(_) => {}
                ConstantValue::Expr(e) => {
                    for other in e.symbols() {
                        if matches!(self.entries.get(&other), Some(ConstantValue::Expr(_))) {
                            return Err(ConstantsError::Nested { key: key.clone(), other });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Replace expression-valued constants, then numeric ones, one pass each.
pub fn substitute_constants(f: &Formula, c: &ConstantsMap) -> Formula {
    if c.is_empty() {
        return f.clone();
    }
    let exprs = |s: &str| match c.get(s) {
        Some(ConstantValue::Expr(e)) => Some(e.clone()),
        _ => None,
    };
    let numbers = |s: &str| match c.get(s) {
        Some(ConstantValue::Number(v)) => Some(Expr::Num(*v)),
        _ => None,
    };
    f.map_sides(|e| e.replace_symbols(&exprs).replace_symbols(&numbers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    fn units() -> UnitTable {
        UnitTable::default()
    }

    #[test]
    fn default_map_loads() {
        let c = ConstantsMap::default_map(&units());
        assert!(matches!(c.get("c_0"), Some(ConstantValue::Expr(_))));
        assert!(matches!(c.get("k"), Some(ConstantValue::Expr(_))));
        assert_eq!(c.get("g"), Some(&ConstantValue::Number(9.8)));
        assert!(c.get("hbar").is_some());
        assert!(c.get("k_B").is_some());
    }

    #[test]
    fn nested_expression_values_are_rejected() {
        let u = units();
        let err = ConstantsMap::from_json(r#"{"a": "b + 1", "b": "c^2"}"#, &u).unwrap_err();
        assert!(matches!(err, ConstantsError::Nested { .. }));
        assert!(ConstantsMap::from_json(r#"{"a": "b + 1", "b": 2}"#, &u).is_ok());
        assert!(ConstantsMap::from_json(r#"[1]"#, &u).is_err());
    }

    #[test]
    fn expressions_go_before_numbers() {
        let u = units();
        let c = ConstantsMap::from_json(r#"{"k": "\\frac{1}{4\\pi a}", "a": 2}"#, &u).unwrap();
        let f = &parse_formula("F = k q", &u).unwrap()[0];
        let g = substitute_constants(f, &c);
        assert_eq!(g.free_variables().into_iter().collect::<Vec<_>>(), vec!["F", "q"]);
    }

    #[test]
    fn empty_map_is_identity() {
        let u = units();
        let f = &parse_formula("F = m a", &u).unwrap()[0];
        assert_eq!(&substitute_constants(f, &ConstantsMap::new()), f);
    }
}
