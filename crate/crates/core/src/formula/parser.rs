//! Recursive-descent parser for the formula dialect.
//!
//! Precedence, loosest first: relations, `+`/`-`, explicit `\cdot` `\times`
//! `*` and `/` (left-associative, same level), implicit multiplication,
//! unary sign, `^`. Implicit products therefore bind tighter than `/`, so
//! `a/bc` reads as `a/(b c)`.

use thiserror::Error;

use super::expr::{Expr, Formula, Func, NamedConst, Relation, UnitLiteral};
use super::units::{UnitError, UnitTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unsupported command `\\{0}`")]
    Unsupported(String),
    #[error("unexpected {found} at position {pos}")]
    Unexpected { found: String, pos: usize },
    #[error("unexpected end of formula")]
    UnexpectedEnd,
    #[error("formula has no relation")]
    NoRelation,
    #[error("empty formula")]
    Empty,
    #[error("bad number `{0}`")]
    BadNumber(String),
    #[error("unit: {0}")]
    Unit(#[from] UnitError),
}

/// Greek letters accepted as symbols, with the spelling they fold to.
const GREEK: &[(&str, &str)] = &[
    ("alpha", "alpha"),
    ("beta", "beta"),
    ("gamma", "gamma"),
    ("epsilon", "epsilon"),
    ("varepsilon", "epsilon"),
    ("zeta", "zeta"),
    ("eta", "eta"),
    ("theta", "theta"),
    ("vartheta", "theta"),
    ("iota", "iota"),
    ("kappa", "kappa"),
    ("lambda", "lambda"),
    ("mu", "mu"),
    ("nu", "nu"),
    ("xi", "xi"),
    ("varpi", "varpi"),
    ("rho", "rho"),
    ("varrho", "rho"),
    ("sigma", "sigma"),
    ("varsigma", "sigma"),
    ("tau", "tau"),
    ("upsilon", "upsilon"),
    ("phi", "phi"),
    ("varphi", "phi"),
    ("chi", "chi"),
    ("psi", "psi"),
    ("omega", "omega"),
    ("Gamma", "Gamma"),
    ("Delta", "Delta"),
    ("Theta", "Theta"),
    ("Lambda", "Lambda"),
    ("Xi", "Xi"),
    ("Pi", "Pi"),
    ("Sigma", "Sigma"),
    ("Upsilon", "Upsilon"),
    ("Phi", "Phi"),
    ("Psi", "Psi"),
    ("Omega", "Omega"),
    ("hbar", "hbar"),
    ("ell", "ell"),
];

const DECORATORS: &[(&str, &str)] =
    &[("vec", "vec"), ("hat", "hat"), ("bar", "bar"), ("overline", "bar"), ("tilde", "tilde")];

pub fn fold_greek(name: &str) -> Option<&'static str> {
    GREEK.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
}

fn unicode_command(c: char) -> Option<&'static str> {
    Some(match c {
        'π' => "pi",
        'α' => "alpha",
        'β' => "beta",
        'γ' => "gamma",
        'ε' | 'ϵ' => "epsilon",
        'θ' => "theta",
        'λ' => "lambda",
        'μ' => "mu",
        'ρ' => "rho",
        'σ' => "sigma",
        'τ' => "tau",
        'φ' | 'ϕ' => "phi",
        'ω' => "omega",
        'Δ' => "Delta",
        'Ω' => "Omega",
        'ħ' => "hbar",
        '≈' => "approx",
        '≤' => "le",
        '≥' => "ge",
        '·' | '×' => "cdot",
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Letter(char),
    Cmd(String),
    Sub(String),
    UnitText(String),
    Open(char),
    Close(char),
    Caret,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Lt,
    Gt,
    Pipe,
    Prime,
    Other(char),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(s) => format!("number `{s}`"),
            Tok::Letter(c) => format!("`{c}`"),
            Tok::Cmd(c) => format!("`\\{c}`"),
            Tok::Sub(s) => format!("subscript `{s}`"),
            Tok::UnitText(s) => format!("unit `{s}`"),
            Tok::Open(c) | Tok::Close(c) | Tok::Other(c) => format!("`{c}`"),
            Tok::Caret => "`^`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Prime => "`'`".into(),
        }
    }
}

fn braced(chars: &[char], open: usize) -> Option<(String, usize)> {
    let mut depth = 0usize;
    for (k, &c) in chars.iter().enumerate().skip(open) {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((chars[open + 1..k].iter().collect(), k + 1));
                }
            }
            _ => {}
        }
    }
    None
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                toks.push((start, Tok::Num(chars[start..i].iter().collect())));
                continue;
            }
            c if c.is_ascii_alphabetic() => Tok::Letter(c),
            '\\' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_alphabetic() {
                    j += 1;
                }
                if j == i + 1 {
                    let sym = chars.get(j).copied().ok_or(ParseError::UnexpectedEnd)?;
                    i = j + 1;
                    toks.push((start, Tok::Cmd(sym.to_string())));
                    continue;
                }
                let name: String = chars[i + 1..j].iter().collect();
                i = j;
                if name == "unit" {
                    while i < chars.len() && chars[i] == ' ' {
                        i += 1;
                    }
                    if chars.get(i) != Some(&'{') {
                        return Err(ParseError::Unexpected { found: "`\\unit` without braces".into(), pos: start });
                    }
                    let (text, after) = braced(&chars, i).ok_or(ParseError::UnexpectedEnd)?;
                    i = after;
                    toks.push((start, Tok::UnitText(text.split_whitespace().collect::<Vec<_>>().join(" "))));
                } else {
                    toks.push((start, Tok::Cmd(name)));
                }
                continue;
            }
            '_' => {
                i += 1;
                while i < chars.len() && chars[i] == ' ' {
                    i += 1;
                }
                let raw = match chars.get(i) {
                    Some('{') => {
                        let (text, after) = braced(&chars, i).ok_or(ParseError::UnexpectedEnd)?;
                        i = after;
                        text
                    }
                    Some('\\') => {
                        let mut j = i + 1;
                        while j < chars.len() && chars[j].is_ascii_alphabetic() {
                            j += 1;
                        }
                        let text: String = chars[i..j].iter().collect();
                        i = j;
                        text
                    }
                    Some(&ch) => {
                        i += 1;
                        ch.to_string()
                    }
                    None => return Err(ParseError::UnexpectedEnd),
                };
                toks.push((start, Tok::Sub(raw)));
                continue;
            }
            '^' => {
                toks.push((start, Tok::Caret));
                i += 1;
                // a bare digit run after `^` contributes only its first digit
                while i < chars.len() && chars[i] == ' ' {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    toks.push((i, Tok::Num(chars[i].to_string())));
                    i += 1;
                }
                continue;
            }
            '(' | '[' | '{' => Tok::Open(c),
            ')' | ']' | '}' => Tok::Close(c),
            '+' => Tok::Plus,
            '-' | '−' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '|' => Tok::Pipe,
            '\'' => Tok::Prime,
            c => match unicode_command(c) {
                Some(name) => Tok::Cmd(name.to_string()),
                None => Tok::Other(c),
            },
        };
        toks.push((start, tok));
        i += 1;
    }
    Ok(toks)
}

/// Canonical text of a subscript: whitespace and braces dropped, commands
/// replaced by their (alias-folded) names.
fn canonical_subscript(raw: &str) -> String {
    let mut out = String::new();
    let chars: Vec<char> = raw.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            c if c.is_whitespace() || c == '{' || c == '}' => i += 1,
            '\\' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_alphabetic() {
                    j += 1;
                }
                let name: String = chars[i + 1..j].iter().collect();
                out.push_str(fold_greek(&name).unwrap_or(&name));
                i = j.max(i + 1);
            }
            c => {
                match unicode_command(c).and_then(fold_greek) {
                    Some(name) => out.push_str(name),
                    None => out.push(c),
                }
                i += 1;
            }
        }
    }
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    units: &'a UnitTable,
    abs_depth: usize,
}

fn is_function_command(name: &str) -> bool {
    Func::from_command(name).is_some()
}

const MUL_COMMANDS: &[&str] = &["cdot", "times", "ast"];

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        match self.toks.get(self.pos) {
            Some((pos, t)) => ParseError::Unexpected { found: t.describe(), pos: *pos },
            None => ParseError::UnexpectedEnd,
        }
    }

    fn expect_close(&mut self, close: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Close(c)) if *c == close => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected()),
        }
    }

    fn relation(&self) -> Option<Relation> {
        match self.peek()? {
            Tok::Eq => Some(Relation::Eq),
            Tok::Lt => Some(Relation::Lt),
            Tok::Gt => Some(Relation::Gt),
            Tok::Cmd(c) => match c.as_str() {
                "approx" => Some(Relation::Approx),
                "lt" => Some(Relation::Lt),
                "gt" => Some(Relation::Gt),
                "le" | "leq" | "leqslant" => Some(Relation::Le),
                "ge" | "geq" | "geqslant" => Some(Relation::Ge),
                _ => None,
            },
            _ => None,
        }
    }

    fn formulas(&mut self) -> Result<Vec<Formula>, ParseError> {
        if self.toks.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut sides = vec![self.expr()?];
        let mut rels = Vec::new();
        while let Some(rel) = self.relation() {
            self.pos += 1;
            rels.push(rel);
            sides.push(self.expr()?);
        }
        if self.pos < self.toks.len() {
            return Err(self.unexpected());
        }
        if rels.is_empty() {
            return Err(ParseError::NoRelation);
        }
        Ok(rels.iter().enumerate().map(|(k, &rel)| Formula::new(sides[k].clone(), rel, sides[k + 1].clone())).collect())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    terms.push(Expr::negate(self.term()?));
                }
                _ => return Ok(Expr::sum(terms)),
            }
        }
    }

    fn mul_op(&self) -> Option<bool> {
        match self.peek()? {
            Tok::Star => Some(true),
            Tok::Slash => Some(false),
            Tok::Cmd(c) if MUL_COMMANDS.contains(&c.as_str()) => Some(true),
            Tok::Cmd(c) if c == "div" => Some(false),
            _ => None,
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut pending = vec![self.implicit()?];
        while let Some(is_mul) = self.mul_op() {
            self.pos += 1;
            let rhs = self.implicit()?;
            if is_mul {
                pending.push(rhs);
            } else {
                let num = Expr::product(std::mem::take(&mut pending));
                pending.push(Expr::quotient(num, rhs));
            }
        }
        Ok(Expr::product(pending))
    }

    fn starts_factor(&self) -> bool {
        match self.peek() {
            Some(Tok::Num(_)) | Some(Tok::Letter(_)) | Some(Tok::UnitText(_)) | Some(Tok::Open(_)) => true,
            Some(Tok::Pipe) => self.abs_depth == 0,
            Some(Tok::Cmd(c)) => self.relation().is_none() && !MUL_COMMANDS.contains(&c.as_str()) && c != "div",
            _ => false,
        }
    }

    fn implicit(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.factor()?];
        while self.starts_factor() {
            factors.push(self.power()?);
        }
        Ok(Expr::product(factors))
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Expr::negate(self.factor()?))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exp = self.argument()?;
            if self.peek() == Some(&Tok::Caret) {
                return Err(self.unexpected());
            }
            return Ok(Expr::power(base, exp));
        }
        Ok(base)
    }

    /// A braced group, or a single token, as used by `^`, `\frac` and
    /// `\sqrt`.
    fn argument(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Open('{')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_close('}')?;
                Ok(e)
            }
            Some(Tok::Num(s)) if s.chars().filter(|c| c.is_ascii_digit()).count() > 1 => {
                // `\frac12` takes one digit per argument
                let s = s.clone();
                let (head, rest) = s.split_at(1);
                let idx = self.pos;
                self.toks[idx].1 = Tok::Num(rest.to_string());
                number(head).map(Expr::Num)
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Expr::negate(self.argument()?))
            }
            Some(Tok::Num(_)) | Some(Tok::Letter(_)) => {
                let t = self.next().unwrap();
                match t {
                    Tok::Num(s) => number(&s).map(Expr::Num),
                    Tok::Letter(c) => Ok(Expr::sym(c.to_string())),
                    _ => unreachable!(),
                }
            }
            Some(Tok::Cmd(_)) => self.primary(),
            _ => Err(self.unexpected()),
        }
    }

    fn symbol_suffix(&mut self, base: String) -> Expr {
        let mut name = base;
        if let Some(Tok::Sub(raw)) = self.peek() {
            let sub = canonical_subscript(raw);
            self.pos += 1;
            if !sub.is_empty() {
                name.push('_');
                name.push_str(&sub);
            }
        }
        while self.peek() == Some(&Tok::Prime) {
            self.pos += 1;
            name.push('\'');
        }
        Expr::Sym(name)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.next() else {
            return Err(ParseError::UnexpectedEnd);
        };
        match tok {
            Tok::Num(s) => {
                let v = number(&s)?;
                if let Some(Tok::UnitText(_)) = self.peek() {
                    let Some(Tok::UnitText(u)) = self.next() else { unreachable!() };
                    return self.unit_literal(v, u);
                }
                Ok(Expr::Num(v))
            }
            Tok::UnitText(u) => self.unit_literal(1.0, u),
            Tok::Letter('e') if self.peek() == Some(&Tok::Caret) => Ok(Expr::Const(NamedConst::E)),
            Tok::Letter(c) => Ok(self.symbol_suffix(c.to_string())),
            Tok::Open(open) => {
                let close = match open {
                    '(' => ')',
                    '[' => ']',
                    _ => '}',
                };
                let saved = self.abs_depth;
                self.abs_depth = 0;
                let e = self.expr()?;
                self.abs_depth = saved;
                self.expect_close(close)?;
                // `{E}_r`, left behind by stripped font commands
                match e {
                    Expr::Sym(s) if open == '{' => Ok(self.symbol_suffix(s)),
                    e => Ok(e),
                }
            }
            Tok::Pipe => {
                self.abs_depth += 1;
                let e = self.expr()?;
                self.abs_depth -= 1;
                if self.next() != Some(Tok::Pipe) {
                    return Err(ParseError::UnexpectedEnd);
                }
                Ok(Expr::func(Func::Abs, e))
            }
            Tok::Cmd(name) => self.command(name),
            _ => {
                self.pos -= 1;
                Err(self.unexpected())
            }
        }
    }

    fn unit_literal(&self, magnitude: f64, unit: String) -> Result<Expr, ParseError> {
        let def = self.units.resolve(&unit)?;
        Ok(Expr::Unit(UnitLiteral { magnitude, si_magnitude: magnitude * def.factor, dim: def.dim, unit }))
    }

    fn command(&mut self, name: String) -> Result<Expr, ParseError> {
        match name.as_str() {
            "pi" if !matches!(self.peek(), Some(Tok::Sub(_))) => Ok(Expr::Const(NamedConst::Pi)),
            "frac" | "dfrac" | "tfrac" => {
                let start = self.pos;
                let num = self.argument()?;
                let den_start = self.pos;
                let den = self.argument()?;
                if self.is_derivative(start, den_start) {
                    return Err(ParseError::Unsupported("frac{d}{dx}".into()));
                }
                Ok(Expr::quotient(num, den))
            }
            "sqrt" => {
                let index = if self.peek() == Some(&Tok::Open('[')) {
                    self.pos += 1;
                    let e = self.expr()?;
                    self.expect_close(']')?;
                    Some(e)
                } else {
                    None
                };
                let arg = self.argument()?;
                Ok(match index {
                    Some(n) => Expr::power(arg, Expr::quotient(Expr::Num(1.0), n)),
                    None => Expr::func(Func::Sqrt, arg),
                })
            }
            n if is_function_command(n) => self.function(Func::from_command(n).unwrap()),
            n if DECORATORS.iter().any(|(d, _)| *d == n) => {
                let decor = DECORATORS.iter().find(|(d, _)| *d == n).unwrap().1;
                let inner = match self.argument()? {
                    Expr::Sym(s) => s,
                    _ => return Err(ParseError::Unsupported(name.clone())),
                };
                Ok(self.symbol_suffix(format!("{decor}:{inner}")))
            }
            n => match fold_greek(n) {
                Some(sym) => Ok(self.symbol_suffix(sym.to_string())),
                None if n == "pi" => Ok(self.symbol_suffix("pi".into())),
                None => Err(ParseError::Unsupported(name)),
            },
        }
    }

    /// `\frac{d...}{d x}` (Leibniz notation) as seen in the raw tokens.
    fn is_derivative(&self, num_start: usize, den_start: usize) -> bool {
        let first_letter = |from: usize| {
            let mut k = from;
            while let Some((_, Tok::Open('{'))) = self.toks.get(k) {
                k += 1;
            }
            (self.toks.get(k).map(|(_, t)| t.clone()), self.toks.get(k + 1).map(|(_, t)| t.clone()))
        };
        let (n0, _) = first_letter(num_start);
        let (d0, d1) = first_letter(den_start);
        n0 == Some(Tok::Letter('d'))
            && d0 == Some(Tok::Letter('d'))
            && matches!(d1, Some(Tok::Letter(_)) | Some(Tok::Cmd(_)))
    }

    fn function(&mut self, func: Func) -> Result<Expr, ParseError> {
        let log_base = match (func, self.peek()) {
            (Func::Log, Some(Tok::Sub(raw))) => {
                let raw = raw.clone();
                self.pos += 1;
                let inner = parse_expr(&raw, self.units)?;
                Some(inner)
            }
            _ => None,
        };
        let outer_power = if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            Some(self.argument()?)
        } else {
            None
        };
        let arg = match self.peek() {
            Some(Tok::Open(open)) => {
                let open = *open;
                self.pos += 1;
                let close = match open {
                    '(' => ')',
                    '[' => ']',
                    _ => '}',
                };
                let saved = self.abs_depth;
                self.abs_depth = 0;
                let e = self.expr()?;
                self.abs_depth = saved;
                self.expect_close(close)?;
                e
            }
            _ => {
                // unparenthesised argument: a run of non-function factors
                let mut factors = vec![self.factor()?];
                while self.starts_factor()
                    && !matches!(self.peek(), Some(Tok::Cmd(c)) if is_function_command(c) || c == "frac" || c == "sqrt")
                    && !matches!(self.peek(), Some(Tok::Open(_)))
                {
                    factors.push(self.power()?);
                }
                Expr::product(factors)
            }
        };
        let mut applied = Expr::func(func, arg);
        if let Some(base) = log_base {
            let Expr::Func(_, arg) = applied else { unreachable!() };
            applied = Expr::quotient(Expr::func(Func::Ln, *arg), Expr::func(Func::Ln, base));
        }
        Ok(match outer_power {
            Some(p) => Expr::power(applied, p),
            None => applied,
        })
    }
}

fn number(s: &str) -> Result<f64, ParseError> {
    if s.matches('.').count() > 1 {
        return Err(ParseError::BadNumber(s.to_string()));
    }
    s.parse::<f64>().map_err(|_| ParseError::BadNumber(s.to_string()))
}

/// Parse one normalized formula block. Chained relations yield one
/// formula per relation.
pub fn parse_formula(src: &str, units: &UnitTable) -> Result<Vec<Formula>, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, units, abs_depth: 0 };
    p.formulas()
}

/// Parse a bare expression (no relation).
pub fn parse_expr(src: &str, units: &UnitTable) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { toks, pos: 0, units, abs_depth: 0 };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

/// Parse a symbol name such as `\varepsilon_0` to its canonical spelling.
pub fn parse_symbol(src: &str, units: &UnitTable) -> Result<String, ParseError> {
    match parse_expr(src, units)? {
        Expr::Sym(s) => Ok(s),
        Expr::Const(NamedConst::Pi) => Ok("pi".into()),
        _ => Err(ParseError::Unexpected { found: format!("`{src}` is not a single symbol"), pos: 0 }),
    }
}
