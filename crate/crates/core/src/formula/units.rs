//! Unit table and `\unit{...}` expression evaluation.
//!
//! Every unit reduces to an SI conversion factor and an integer dimension
//! vector over the seven base quantities. Composite annotations such as
//! `m/s^2` or `C^2/(N m^2)` are evaluated against the table, with SI prefixes
//! applied to table entries that are not themselves listed.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Div, Mul};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

const DEFAULT_TABLE: &str = include_str!("../../data/units.txt");

/// Names of the base quantities, in dimension-vector order.
pub const BASE_UNITS: [&str; 7] = ["m", "kg", "s", "A", "K", "mol", "cd"];

const PREFIXES: &[(&str, f64)] = &[
    ("T", 1e12),
    ("G", 1e9),
    ("M", 1e6),
    ("k", 1e3),
    ("c", 1e-2),
    ("m", 1e-3),
    ("mu", 1e-6),
    ("u", 1e-6),
    ("n", 1e-9),
    ("p", 1e-12),
    ("f", 1e-15),
];

/// Integer exponents over `m, kg, s, A, K, mol, cd`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Dimension(pub [i8; 7]);

impl Dimension {
    pub const NONE: Dimension = Dimension([0; 7]);

    pub fn powi(self, exp: i32) -> Dimension {
        let mut out = [0i8; 7];
        for (o, d) in out.iter_mut().zip(self.0) {
            *o = (d as i32 * exp) as i8;
        }
        Dimension(out)
    }

    pub fn is_dimensionless(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }
}

impl Mul for Dimension {
    type Output = Dimension;
    // exponents add
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Dimension) -> Dimension {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Dimension(out)
    }
}

impl Div for Dimension {
    type Output = Dimension;
    fn div(self, rhs: Dimension) -> Dimension {
        self * rhs.powi(-1)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let mut first = true;
        for (name, &exp) in BASE_UNITS.iter().zip(&self.0) {
            if exp == 0 {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            if exp == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{exp}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitDef {
    pub factor: f64,
    pub dim: Dimension,
}

impl Mul for UnitDef {
    type Output = UnitDef;
    fn mul(self, rhs: UnitDef) -> UnitDef {
        UnitDef { factor: self.factor * rhs.factor, dim: self.dim * rhs.dim }
    }
}

impl Div for UnitDef {
    type Output = UnitDef;
    fn div(self, rhs: UnitDef) -> UnitDef {
        UnitDef { factor: self.factor / rhs.factor, dim: self.dim / rhs.dim }
    }
}

impl UnitDef {
    fn powi(self, exp: i32) -> UnitDef {
        UnitDef { factor: self.factor.powi(exp), dim: self.dim.powi(exp) }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum UnitError {
    #[error("line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("unknown unit `{0}`")]
    Unknown(String),
    #[error("malformed unit expression `{0}`")]
    Malformed(String),
    #[error("reading unit table: {0}")]
    Io(String),
}

/// Map from unit id to SI factor and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTable {
    units: BTreeMap<String, UnitDef>,
}

impl Default for UnitTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled unit table is well-formed")
    }
}

impl UnitTable {
    /// Parse the plain-text table format: one unit per line,
    /// `unit-id factor m kg s A K mol cd`, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, UnitError> {
        let mut units = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| UnitError::Table { line: lineno + 1, msg: msg.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 9 {
                return Err(err("expected `unit-id factor` followed by 7 exponents"));
            }
            let factor: f64 = fields[1].parse().map_err(|_| err("factor is not a number"))?;
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(err("factor must be positive and finite"));
            }
            let mut dim = [0i8; 7];
            for (d, s) in dim.iter_mut().zip(&fields[2..]) {
                *d = s.parse().map_err(|_| err("dimension exponent is not an integer"))?;
            }
            units.insert(fields[0].to_string(), UnitDef { factor, dim: Dimension(dim) });
        }
        Ok(UnitTable { units })
    }

    pub fn load(path: &Path) -> Result<Self, UnitError> {
        let text = std::fs::read_to_string(path).map_err(|e| UnitError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn get(&self, id: &str) -> Option<UnitDef> {
        self.units.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Look up an atomic unit id, trying SI prefixes when the id is not
    /// listed directly.
    fn lookup_atom(&self, id: &str) -> Option<UnitDef> {
        if let Some(def) = self.get(id) {
            return Some(def);
        }
        PREFIXES.iter().find_map(|&(prefix, scale)| {
            let rest = id.strip_prefix(prefix)?;
            let base = self.get(rest)?;
            // prefixed kilograms are not a thing; grams carry the prefix
            (rest != "kg").then_some(UnitDef { factor: base.factor * scale, dim: base.dim })
        })
    }

    /// Evaluate the content of a `\unit{...}` annotation.
    pub fn resolve(&self, text: &str) -> Result<UnitDef, UnitError> {
        let compact: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(def) = self.get(compact.trim()) {
            return Ok(def);
        }
        let toks = lex_unit(text).ok_or_else(|| UnitError::Malformed(text.to_string()))?;
        let mut p = UnitParser { toks: &toks, pos: 0, table: self, src: text };
        let def = p.expr()?;
        if p.pos != toks.len() {
            return Err(UnitError::Malformed(text.to_string()));
        }
        Ok(def)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum UTok {
    Id(String),
    Int(i32),
    Mul,
    Div,
    Caret,
    Minus,
    Open,
    Close,
}

fn lex_unit(text: &str) -> Option<Vec<UTok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '*' | '.' | '·' => {
                toks.push(UTok::Mul);
                i += 1;
            }
            '/' => {
                toks.push(UTok::Div);
                i += 1;
            }
            '^' => {
                toks.push(UTok::Caret);
                i += 1;
            }
            '-' | '−' => {
                toks.push(UTok::Minus);
                i += 1;
            }
            '(' | '{' => {
                toks.push(UTok::Open);
                i += 1;
            }
            ')' | '}' => {
                toks.push(UTok::Close);
                i += 1;
            }
            'Ω' => {
                toks.push(UTok::Id("Omega".into()));
                i += 1;
            }
            'μ' | 'µ' => {
                let mut id = String::from("mu");
                i += 1;
                while i < chars.len() && chars[i].is_ascii_alphabetic() {
                    id.push(chars[i]);
                    i += 1;
                }
                toks.push(UTok::Id(id));
            }
            '\\' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j].is_ascii_alphabetic() {
                    j += 1;
                }
                let name: String = chars[start..j].iter().collect();
                i = j;
                match name.as_str() {
                    "cdot" | "times" => toks.push(UTok::Mul),
                    "Omega" => toks.push(UTok::Id("Omega".into())),
                    "mu" => {
                        // micro prefix binds to the following id
                        while i < chars.len() && chars[i] == ' ' {
                            i += 1;
                        }
                        let mut id = String::from("mu");
                        while i < chars.len() && chars[i].is_ascii_alphabetic() {
                            id.push(chars[i]);
                            i += 1;
                        }
                        toks.push(UTok::Id(id));
                    }
                    _ => return None,
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                toks.push(UTok::Int(s.parse().ok()?));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphabetic() {
                    i += 1;
                }
                toks.push(UTok::Id(chars[start..i].iter().collect()));
            }
            _ => return None,
        }
    }
    Some(toks)
}

struct UnitParser<'a> {
    toks: &'a [UTok],
    pos: usize,
    table: &'a UnitTable,
    src: &'a str,
}

impl UnitParser<'_> {
    fn malformed(&self) -> UnitError {
        UnitError::Malformed(self.src.to_string())
    }

    fn peek(&self) -> Option<&UTok> {
        self.toks.get(self.pos)
    }

    // expr := factor ((Mul)? factor | Div factor)*
    fn expr(&mut self) -> Result<UnitDef, UnitError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(UTok::Mul) => {
                    self.pos += 1;
                    acc = acc * self.factor()?;
                }
                Some(UTok::Div) => {
                    self.pos += 1;
                    acc = acc / self.factor()?;
                }
                Some(UTok::Id(_)) | Some(UTok::Open) | Some(UTok::Int(1)) => {
                    acc = acc * self.factor()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<UnitDef, UnitError> {
        let base = match self.peek().cloned() {
            Some(UTok::Id(id)) => {
                self.pos += 1;
                self.table.lookup_atom(&id).ok_or(UnitError::Unknown(id))?
            }
            Some(UTok::Int(1)) => {
                self.pos += 1;
                UnitDef { factor: 1.0, dim: Dimension::NONE }
            }
            Some(UTok::Open) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&UTok::Close) {
                    return Err(self.malformed());
                }
                self.pos += 1;
                inner
            }
            _ => return Err(self.malformed()),
        };
        if self.peek() == Some(&UTok::Caret) {
            self.pos += 1;
            let exp = self.exponent()?;
            return Ok(base.powi(exp));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, UnitError> {
        let braced = self.peek() == Some(&UTok::Open);
        if braced {
            self.pos += 1;
        }
        let neg = self.peek() == Some(&UTok::Minus);
        if neg {
            self.pos += 1;
        }
        let value = match self.peek() {
            Some(&UTok::Int(v)) => v,
            _ => return Err(self.malformed()),
        };
        self.pos += 1;
        if braced {
            if self.peek() != Some(&UTok::Close) {
                return Err(self.malformed());
            }
            self.pos += 1;
        }
        Ok(if neg { -value } else { value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(v: [i8; 7]) -> Dimension {
        Dimension(v)
    }

    #[test]
    fn default_table_has_required_entries() {
        let t = UnitTable::default();
        for id in
            ["m", "kg", "s", "A", "K", "mol", "cd", "Hz", "N", "J", "W", "Pa", "V", "C", "T", "eV", "km/h", "g", "cm"]
        {
            assert!(t.get(id).is_some(), "missing {id}");
        }
        let hz = t.get("Hz").unwrap();
        assert_eq!(hz.factor, 1.0);
        assert_eq!(hz.dim, dim([0, 0, -1, 0, 0, 0, 0]));
    }

    #[test]
    fn composite_units_reduce() {
        let t = UnitTable::default();
        let v = t.resolve("m/s").unwrap();
        assert_eq!(v.dim, dim([1, 0, -1, 0, 0, 0, 0]));
        let kmh = t.resolve("km/h").unwrap();
        assert!((kmh.factor - 1.0 / 3.6).abs() < 1e-15);
        let eps0 = t.resolve("C^2/(N m^2)").unwrap();
        assert_eq!(eps0.dim, dim([-3, -1, 4, 2, 0, 0, 0]));
        assert_eq!(t.resolve("s^{-1}").unwrap(), t.resolve("Hz").unwrap());
        assert_eq!(t.resolve("V\\cdot m").unwrap().dim, dim([3, 1, -3, -1, 0, 0, 0]));
        assert_eq!(t.resolve("kg m/s^2").unwrap(), t.resolve("N").unwrap());
    }

    #[test]
    fn prefixes_apply_to_table_entries() {
        let t = UnitTable::default();
        let mev = t.resolve("MeV").unwrap();
        assert!((mev.factor - 1.602176634e-13).abs() < 1e-25);
        let um = t.resolve("\\mu m").unwrap();
        assert!((um.factor - 1e-6).abs() < 1e-20);
        assert!(t.resolve("kkg").is_err());
        assert_eq!(t.resolve("furlong"), Err(UnitError::Unknown("furlong".into())));
    }

    #[test]
    fn table_rejects_bad_lines() {
        assert!(matches!(UnitTable::parse("x 0 1 0 0 0 0 0 0"), Err(UnitError::Table { line: 1, .. })));
        assert!(matches!(UnitTable::parse("x 1 1 0 0"), Err(UnitError::Table { .. })));
        let t = UnitTable::parse("# comment\nfoo 2.5 1 0 0 0 0 0 0 # trailing\n").unwrap();
        assert_eq!(t.len(), 1);
    }
}
