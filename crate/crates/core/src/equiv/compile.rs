//! Residual `lhs - rhs` compiled to a flat stack program in one unknown.
//!
//! Everything except the target is known during a trial, so subtrees that do
//! not mention the target are folded to constants at compile time and the
//! solver's thousands of probes only pay for the target-dependent part.

use std::collections::BTreeMap;

use crate::formula::{pow, Expr, Formula, Func};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    X,
    Neg,
    Add(u32),
    Mul(u32),
    Div,
    Pow,
    Apply(Func),
}

/// `lhs - rhs` with every symbol but the target fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    ops: Vec<Op>,
    // max(1, |lhs|, |rhs|) when neither side depends on the target
    scale: f64,
}

enum Piece {
    Known(f64),
    Code(Vec<Op>),
}

impl Residual {
    /// Symbols missing from `values` (other than `target`) evaluate to NaN.
    pub fn compile(f: &Formula, target: &str, values: &BTreeMap<String, f64>) -> Residual {
        let lhs = emit(&f.lhs, target, values);
        let rhs = emit(&f.rhs, target, values);
        if let (Piece::Known(l), Piece::Known(r)) = (&lhs, &rhs) {
            return Residual { ops: vec![Op::Const(l - r)], scale: 1f64.max(l.abs()).max(r.abs()) };
        }
        let neg_rhs = unary(rhs, |v| -v, Op::Neg);
        let ops = match binary(lhs, neg_rhs, |a, b| a + b, Op::Add(2)) {
            Piece::Known(v) => vec![Op::Const(v)],
            Piece::Code(ops) => ops,
        };
        Residual { ops, scale: f64::NAN }
    }

    /// The residual value and the magnitude of the larger side, when the
    /// residual does not depend on the target.
    pub fn constant(&self) -> Option<(f64, f64)> {
        match self.ops.as_slice() {
            [Op::Const(v)] if !self.scale.is_nan() => Some((*v, self.scale)),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64, stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::X => stack.push(x),
                Op::Neg => {
                    let a = stack.pop().unwrap();
                    stack.push(-a);
                }
                Op::Add(n) => {
                    let start = stack.len() - n as usize;
                    let s = stack[start..].iter().sum();
                    stack.truncate(start);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let start = stack.len() - n as usize;
                    let p = stack[start..].iter().product();
                    stack.truncate(start);
                    stack.push(p);
                }
                Op::Div => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(a / b);
                }
                Op::Pow => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(pow(a, b));
                }
                Op::Apply(func) => {
                    let a = stack.pop().unwrap();
                    stack.push(func.apply(a));
                }
            }
        }
        stack.pop().unwrap_or(f64::NAN)
    }

    /// Value together with a first-order bound on its accumulated rounding
    /// error. A value no larger than its bound carries no sign information.
    pub fn eval_bounded(&self, x: f64, stack: &mut Vec<(f64, f64)>) -> (f64, f64) {
        const U: f64 = f64::EPSILON;
        stack.clear();
        for op in &self.ops {
            let next = match *op {
                Op::Const(v) => (v, U * v.abs()),
                Op::X => (x, 0.0),
                Op::Neg => {
                    let (a, e) = stack.pop().unwrap();
                    (-a, e)
                }
                Op::Add(n) => {
                    let start = stack.len() - n as usize;
                    let (mut v, mut e, mut mag) = (0.0f64, 0.0f64, 0.0f64);
                    for &(a, ea) in &stack[start..] {
                        v += a;
                        e += ea;
                        mag += a.abs();
                    }
                    stack.truncate(start);
                    (v, e + U * n as f64 * mag)
                }
                Op::Mul(n) => {
                    let start = stack.len() - n as usize;
                    let (mut v, mut e) = (1.0f64, 0.0f64);
                    for &(a, ea) in &stack[start..] {
                        e = e * a.abs() + ea * v.abs() + e * ea;
                        v *= a;
                    }
                    stack.truncate(start);
                    (v, e + U * v.abs())
                }
                Op::Div => {
                    let (b, eb) = stack.pop().unwrap();
                    let (a, ea) = stack.pop().unwrap();
                    let v = a / b;
                    let e = if b.abs() > eb { (ea + v.abs() * eb) / (b.abs() - eb) } else { f64::INFINITY };
                    (v, e + U * v.abs())
                }
                Op::Pow => {
                    let (b, eb) = stack.pop().unwrap();
                    let (a, ea) = stack.pop().unwrap();
                    let v = pow(a, b);
                    let mut e = U * v.abs();
                    if ea > 0.0 {
                        e += (v * b / a).abs() * ea;
                    }
                    if eb > 0.0 {
                        e += (v * a.abs().ln()).abs() * eb;
                    }
                    (v, e)
                }
                Op::Apply(func) => {
                    let (a, ea) = stack.pop().unwrap();
                    let v = func.apply(a);
                    let slope = match func {
                        Func::Sin => a.cos().abs(),
                        Func::Cos => a.sin().abs(),
                        Func::Tan => 1.0 + v * v,
                        Func::Exp => v.abs(),
                        Func::Ln | Func::Log => 1.0 / a.abs(),
                        Func::Sqrt => 0.5 / v.abs(),
                        Func::Abs => 1.0,
                    };
                    let e = if ea > 0.0 { slope * ea } else { 0.0 };
                    (v, e + U * v.abs())
                }
            };
            stack.push(next);
        }
        stack.pop().unwrap_or((f64::NAN, f64::NAN))
    }
}

fn emit(e: &Expr, target: &str, values: &BTreeMap<String, f64>) -> Piece {
    match e {
        Expr::Num(v) => Piece::Known(*v),
        Expr::Unit(u) => Piece::Known(u.si_magnitude),
        Expr::Const(c) => Piece::Known(c.value()),
        Expr::Sym(s) if s == target => Piece::Code(vec![Op::X]),
        Expr::Sym(s) => Piece::Known(values.get(s).copied().unwrap_or(f64::NAN)),
        Expr::Neg(a) => unary(emit(a, target, values), |v| -v, Op::Neg),
        Expr::Func(func, a) => unary(emit(a, target, values), |v| func.apply(v), Op::Apply(*func)),
        Expr::Sum(items) => nary(items, target, values, 0.0, |a, b| a + b, Op::Add),
        Expr::Product(items) => nary(items, target, values, 1.0, |a, b| a * b, Op::Mul),
        Expr::Quotient(a, b) => binary(emit(a, target, values), emit(b, target, values), |x, y| x / y, Op::Div),
        Expr::Power(a, b) => binary(emit(a, target, values), emit(b, target, values), pow, Op::Pow),
    }
}

fn unary(p: Piece, fold: impl Fn(f64) -> f64, op: Op) -> Piece {
    match p {
        Piece::Known(v) => Piece::Known(fold(v)),
        Piece::Code(mut ops) => {
            ops.push(op);
            Piece::Code(ops)
        }
    }
}

fn binary(a: Piece, b: Piece, fold: impl Fn(f64, f64) -> f64, op: Op) -> Piece {
    let code = |p: Piece| match p {
        Piece::Known(v) => vec![Op::Const(v)],
        Piece::Code(ops) => ops,
    };
    match (a, b) {
        (Piece::Known(x), Piece::Known(y)) => Piece::Known(fold(x, y)),
        (a, b) => {
            let mut ops = code(a);
            ops.extend(code(b));
            ops.push(op);
            Piece::Code(ops)
        }
    }
}

fn nary(
    items: &[Expr],
    target: &str,
    values: &BTreeMap<String, f64>,
    unit: f64,
    fold: impl Fn(f64, f64) -> f64,
    op: fn(u32) -> Op,
) -> Piece {
    let mut known = unit;
    let mut any_known = false;
    let mut ops = Vec::new();
    let mut dynamic = 0u32;
    for item in items {
        match emit(item, target, values) {
            Piece::Known(v) => {
                known = fold(known, v);
                any_known = true;
            }
            Piece::Code(c) => {
                ops.extend(c);
                dynamic += 1;
            }
        }
    }
    if dynamic == 0 {
        return Piece::Known(known);
    }
    if any_known {
        ops.push(Op::Const(known));
        dynamic += 1;
    }
    if dynamic > 1 {
        ops.push(op(dynamic));
    }
    Piece::Code(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, UnitTable};

    fn formula(src: &str) -> Formula {
        parse_formula(src, &UnitTable::default()).unwrap().remove(0)
    }

    #[test]
    fn matches_tree_evaluation() {
        let f = formula("y = \\frac{a x^2 + \\sin(b x)}{\\sqrt{x} + c} - e^{-x}");
        let vals: BTreeMap<String, f64> =
            [("a", 2.5), ("b", 3.0), ("c", 7.0), ("y", 4.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let r = Residual::compile(&f, "x", &vals);
        let mut stack = Vec::new();
        for x in [0.3, 1.0, 2.0, 17.5] {
            let mut all = vals.clone();
            all.insert("x".into(), x);
            let direct = f.lhs.eval(&|s| all.get(s).copied()) - f.rhs.eval(&|s| all.get(s).copied());
            let compiled = r.eval(x, &mut stack);
            assert!((direct - compiled).abs() <= 1e-12 * direct.abs().max(1.0), "{direct} vs {compiled}");
            let (bounded, err) = r.eval_bounded(x, &mut Vec::new());
            assert_eq!(bounded, compiled);
            assert!((0.0..1e-12).contains(&err));
        }
    }

    #[test]
    fn target_free_residual_is_constant() {
        let f = formula("F = m a");
        let vals: BTreeMap<String, f64> =
            [("m", 2.0), ("a", 3.0), ("F", 6.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        assert_eq!(Residual::compile(&f, "q", &vals).constant(), Some((0.0, 6.0)));
        assert_eq!(Residual::compile(&f, "a", &vals).constant(), None);
    }
}
