//! Expression trees, formulas, and their canonical text form.
//!
//! The canonical printer emits LaTeX that the parser reads back into a
//! structurally identical tree. It brackets conservatively: every quotient is
//! a `\frac`, every exponent is braced, and nested sums or products keep the
//! parentheses the parser needs to rebuild the same nesting.

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use serde::Serialize;

use super::units::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn from_command(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            // `\log` without a base is read as the natural logarithm
            Func::Ln | Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }
}

/// A numeric magnitude carrying a unit annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitLiteral {
    /// Magnitude as written.
    pub magnitude: f64,
    /// Unit text as written inside `\unit{...}`, whitespace-collapsed.
    pub unit: String,
    /// `magnitude * factor`.
    pub si_magnitude: f64,
    pub dim: Dimension,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Unit(UnitLiteral),
    Sym(String),
    Const(NamedConst),
    Neg(Box<Expr>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Quotient(Box<Expr>, Box<Expr>),
    Power(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn sym(name: impl Into<String>) -> Expr {
        Expr::Sym(name.into())
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    pub fn quotient(num: Expr, den: Expr) -> Expr {
        Expr::Quotient(Box::new(num), Box::new(den))
    }

    pub fn power(base: Expr, exp: Expr) -> Expr {
        Expr::Power(Box::new(base), Box::new(exp))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg))
    }

    /// Product of `factors`, collapsing a single factor to itself.
    pub fn product(mut factors: Vec<Expr>) -> Expr {
        if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::Product(factors)
        }
    }

    /// Sum of `terms`, collapsing a single term to itself.
    pub fn sum(mut terms: Vec<Expr>) -> Expr {
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(terms)
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::Unit(_) | Expr::Sym(_) | Expr::Const(_) => vec![],
            Expr::Neg(e) | Expr::Func(_, e) => vec![e],
            Expr::Sum(v) | Expr::Product(v) => v.iter().collect(),
            Expr::Quotient(a, b) | Expr::Power(a, b) => vec![a, b],
        }
    }

    pub fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        if let Expr::Sym(s) = self {
            out.insert(s.clone());
        }
        for c in self.children() {
            c.collect_symbols(out);
        }
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    /// Replace every symbol for which `f` yields a replacement, in a single
    /// bottom-up pass (replacements are not revisited).
    pub fn replace_symbols(&self, f: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Sym(s) => f(s).unwrap_or_else(|| self.clone()),
            Expr::Num(_) | Expr::Unit(_) | Expr::Const(_) => self.clone(),
            Expr::Neg(e) => Expr::negate(e.replace_symbols(f)),
            Expr::Func(func, e) => Expr::func(*func, e.replace_symbols(f)),
            Expr::Sum(v) => Expr::Sum(v.iter().map(|e| e.replace_symbols(f)).collect()),
            Expr::Product(v) => Expr::Product(v.iter().map(|e| e.replace_symbols(f)).collect()),
            Expr::Quotient(a, b) => Expr::quotient(a.replace_symbols(f), b.replace_symbols(f)),
            Expr::Power(a, b) => Expr::power(a.replace_symbols(f), b.replace_symbols(f)),
        }
    }

    /// Direct recursive evaluation. `lookup` supplies symbol values; a
    /// missing symbol evaluates to NaN.
    pub fn eval(&self, lookup: &impl Fn(&str) -> Option<f64>) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Unit(u) => u.si_magnitude,
            Expr::Sym(s) => lookup(s).unwrap_or(f64::NAN),
            Expr::Const(c) => c.value(),
            Expr::Neg(e) => -e.eval(lookup),
            Expr::Sum(v) => v.iter().map(|e| e.eval(lookup)).sum(),
            Expr::Product(v) => v.iter().map(|e| e.eval(lookup)).product(),
            Expr::Quotient(a, b) => a.eval(lookup) / b.eval(lookup),
            Expr::Power(a, b) => pow(a.eval(lookup), b.eval(lookup)),
            Expr::Func(f, e) => f.apply(e.eval(lookup)),
        }
    }

    fn is_atom(&self) -> bool {
        match self {
            Expr::Num(v) => *v >= 0.0 && !v.is_sign_negative(),
            Expr::Sym(_) | Expr::Const(_) => true,
            Expr::Quotient(..) => true,
            Expr::Func(Func::Sqrt, _) | Expr::Func(Func::Abs, _) => true,
            _ => false,
        }
    }
}

/// Real power with the odd-root convention: a negative base raised to a
/// reciprocal odd integer stays real.
pub fn pow(base: f64, exp: f64) -> f64 {
    if base < 0.0 && exp.fract() != 0.0 {
        let inv = 1.0 / exp;
        if (inv - inv.round()).abs() < 1e-12 && (inv.round() as i64) % 2 != 0 {
            return -(-base).powf(exp);
        }
    }
    base.powf(exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Approx,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relation {
    pub fn latex(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Approx => "\\approx",
            Relation::Lt => "<",
            Relation::Le => "\\le",
            Relation::Gt => ">",
            Relation::Ge => "\\ge",
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, Relation::Eq | Relation::Approx)
    }

    /// Relation kind used for grading: `≈` grades as `=`, and `>`/`≥` are
    /// mirrored onto `<`/`≤` with sides swapped.
    pub fn graded(self) -> (Relation, bool) {
        match self {
            Relation::Eq | Relation::Approx => (Relation::Eq, false),
            Relation::Lt => (Relation::Lt, false),
            Relation::Le => (Relation::Le, false),
            Relation::Gt => (Relation::Lt, true),
            Relation::Ge => (Relation::Le, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub lhs: Expr,
    pub rhs: Expr,
    pub relation: Relation,
}

impl Formula {
    pub fn new(lhs: Expr, relation: Relation, rhs: Expr) -> Self {
        Formula { lhs, rhs, relation }
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Self {
        Formula { lhs, rhs, relation: Relation::Eq }
    }

    /// All symbols on either side. Named constants are not symbols.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.lhs.collect_symbols(&mut out);
        self.rhs.collect_symbols(&mut out);
        out
    }

    pub fn map_sides(&self, f: impl Fn(&Expr) -> Expr) -> Formula {
        Formula { lhs: f(&self.lhs), rhs: f(&self.rhs), relation: self.relation }
    }

    /// Canonical text form; reparses to an identical tree.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

/// Free variables of a formula.
pub fn free_variables(f: &Formula) -> BTreeSet<String> {
    f.free_variables()
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.relation.latex(), self.rhs)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        print_expr(self, &mut s);
        f.write_str(&s)
    }
}

fn print_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Num(v) => write_num(*v, out),
        Expr::Unit(u) => {
            write_num(u.magnitude, out);
            let _ = write!(out, "\\unit{{{}}}", u.unit);
        }
        Expr::Sym(s) => print_symbol(s, out),
        Expr::Const(NamedConst::Pi) => out.push_str("\\pi"),
        Expr::Const(NamedConst::E) => out.push('e'),
        Expr::Neg(inner) => {
            out.push('-');
            match **inner {
                Expr::Sum(_) | Expr::Neg(_) | Expr::Product(_) => paren(inner, out),
                _ => print_expr(inner, out),
            }
        }
        Expr::Sum(terms) => {
            for (i, t) in terms.iter().enumerate() {
                let body = match (i, t) {
                    (0, _) => t,
                    (_, Expr::Neg(inner)) => {
                        out.push_str(" - ");
                        inner
                    }
                    _ => {
                        out.push_str(" + ");
                        t
                    }
                };
                match body {
                    Expr::Sum(_) => paren(body, out),
                    _ => print_expr(body, out),
                }
            }
        }
        Expr::Product(factors) => {
            for (i, x) in factors.iter().enumerate() {
                if i > 0 {
                    out.push_str(" \\cdot ");
                }
                match x {
                    Expr::Sum(_) | Expr::Neg(_) | Expr::Product(_) => paren(x, out),
                    Expr::Num(v) if v.is_sign_negative() => paren(x, out),
                    _ => print_expr(x, out),
                }
            }
        }
        Expr::Quotient(num, den) => {
            out.push_str("\\frac{");
            print_expr(num, out);
            out.push_str("}{");
            print_expr(den, out);
            out.push('}');
        }
        Expr::Power(base, exp) => {
            // a bare `e` before `^` would read back as Euler's number
            let plain_base = matches!(&**base, Expr::Sym(s) if s != "e")
                || matches!(**base, Expr::Const(_))
                || matches!(**base, Expr::Num(v) if !v.is_sign_negative());
            if plain_base {
                print_expr(base, out);
            } else {
                paren(base, out);
            }
            out.push_str("^{");
            print_expr(exp, out);
            out.push('}');
        }
        Expr::Func(Func::Sqrt, arg) => {
            out.push_str("\\sqrt{");
            print_expr(arg, out);
            out.push('}');
        }
        Expr::Func(Func::Abs, arg) => {
            out.push('|');
            if arg.is_atom() {
                print_expr(arg, out);
            } else {
                paren(arg, out);
            }
            out.push('|');
        }
        Expr::Func(func, arg) => {
            let _ = write!(out, "\\{}", func.name());
            paren(arg, out);
        }
    }
}

fn paren(e: &Expr, out: &mut String) {
    out.push('(');
    print_expr(e, out);
    out.push(')');
}

fn write_num(v: f64, out: &mut String) {
    // `Display` for f64 is the shortest string that round-trips
    let _ = write!(out, "{v}");
}

fn print_symbol(name: &str, out: &mut String) {
    let (body, primes) = split_primes(name);
    let (decor, body) = match body.split_once(':') {
        Some((d, b)) => (Some(d), b),
        None => (None, body),
    };
    let (base, sub) = match body.split_once('_') {
        Some((b, s)) => (b, Some(s)),
        None => (body, None),
    };
    if let Some(d) = decor {
        let _ = write!(out, "\\{d}{{");
    }
    if base.chars().count() > 1 {
        out.push('\\');
    }
    out.push_str(base);
    if decor.is_some() {
        out.push('}');
    }
    if let Some(s) = sub {
        let _ = write!(out, "_{{{s}}}");
    }
    out.push_str(primes);
}

fn split_primes(name: &str) -> (&str, &str) {
    let trimmed = name.trim_end_matches('\'');
    (trimmed, &name[trimmed.len()..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_variables_skip_named_constants() {
        let f = Formula::eq(Expr::sym("x"), Expr::Product(vec![Expr::Num(2.0), Expr::Const(NamedConst::Pi)]));
        assert_eq!(f.free_variables(), BTreeSet::from(["x".to_string()]));
    }

    #[test]
    fn printer_brackets_nested_structure() {
        let e = Expr::Sum(vec![
            Expr::Sum(vec![Expr::sym("a"), Expr::sym("b")]),
            Expr::negate(Expr::Product(vec![Expr::sym("c"), Expr::sym("d")])),
        ]);
        assert_eq!(e.to_string(), "(a + b) - c \\cdot d");
        let p = Expr::power(Expr::func(Func::Sin, Expr::sym("x")), Expr::Num(2.0));
        assert_eq!(p.to_string(), "(\\sin(x))^{2}");
        assert_eq!(Expr::sym("epsilon_0").to_string(), "\\epsilon_{0}");
        assert_eq!(Expr::sym("vec:E_r'").to_string(), "\\vec{E}_{r}'");
    }

    #[test]
    fn odd_roots_of_negatives_are_real() {
        assert!((pow(-8.0, 1.0 / 3.0) + 2.0).abs() < 1e-12);
        assert!(pow(-8.0, 0.5).is_nan());
        assert_eq!(pow(-2.0, 2.0), 4.0);
    }
}
