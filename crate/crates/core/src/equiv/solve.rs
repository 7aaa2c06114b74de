//! Grid-scan root finder for a residual in one unknown.
//!
//! The residual is probed on a fixed composite grid: a logarithmic part
//! reaching from 1e-40 to 1e40 on each side of zero, plus a linear part with
//! step 0.25 (offset by half a step, so it never lands on a power of ten) up
//! to 31.625 on each side. Sign changes between neighbouring
//! probes are refined by bisection; brackets whose residual does not shrink
//! are poles and are dropped. Local minima of |residual| without a sign change
//! are re-probed on a finer grid (which exposes a root hiding next to a pole
//! in the same cell) and otherwise refined by golden-section search, kept
//! when they touch zero.

use std::sync::OnceLock;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use super::compile::Residual;

const LOG_STEPS_PER_DECADE: i32 = 24;
const LOG_MIN_EXP: i32 = -40;
const LOG_MAX_EXP: i32 = 40;
const LINEAR_STEP: f64 = 0.25;
const LINEAR_COUNT: usize = 127;
/// Residual magnitude below which a local minimum counts as a tangent root.
pub const TANGENT_ACCEPT: f64 = 1e-9;
const MAX_TANGENT_SEARCHES: usize = 16;
const MAX_BISECTIONS: usize = 2000;
const GOLDEN_ITERS: usize = 120;
const SUBDIVISIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    /// Sorted, pairwise distinct at the tolerance used to build the set.
    pub roots: Vec<f64>,
    /// Every real value is a solution (the residual is identically zero).
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub all_real: bool,
}

impl SolutionSet {
    pub fn empty() -> Self {
        SolutionSet { roots: Vec::new(), all_real: false }
    }

    pub fn from_roots(mut roots: Vec<f64>, eps: f64) -> Self {
        roots.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::with_capacity(roots.len());
        for r in roots {
            match out.last() {
                Some(&last) if close(last, r, eps) => {}
                _ => out.push(r),
            }
        }
        SolutionSet { roots: out, all_real: false }
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty() && !self.all_real
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveError {
    #[error("residual is undefined at every probe")]
    Domain,
    #[error("solve exceeded its time budget")]
    Timeout,
}

fn close(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps * 1f64.max(a.abs()).max(b.abs())
}

/// Pairwise closeness of two solution sets: same cardinality and each sorted
/// pair within `eps * max(1, |a|, |b|)`.
pub fn all_close(s1: &SolutionSet, s2: &SolutionSet, eps: f64) -> bool {
    if s1.all_real || s2.all_real {
        return s1.all_real && s2.all_real;
    }
    s1.roots.len() == s2.roots.len() && s1.roots.iter().zip(&s2.roots).all(|(&a, &b)| close(a, b, eps))
}

/// The probe abscissae, sorted ascending.
pub fn grid() -> &'static [f64] {
    static GRID: OnceLock<Vec<f64>> = OnceLock::new();
    GRID.get_or_init(|| {
        let mut pts = Vec::new();
        let steps = (LOG_MAX_EXP - LOG_MIN_EXP) * LOG_STEPS_PER_DECADE;
        for k in 0..=steps {
            let x = 10f64.powf(LOG_MIN_EXP as f64 + k as f64 / LOG_STEPS_PER_DECADE as f64);
            pts.push(x);
            pts.push(-x);
        }
        for k in 1..=LINEAR_COUNT {
            let x = (k as f64 - 0.5) * LINEAR_STEP;
            pts.push(x);
            pts.push(-x);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Probe {
    Undefined,
    /// Exactly zero with no rounding involved.
    Zero,
    /// Nonzero in exact arithmetic is not decidable: |value| is within the
    /// rounding bound.
    Noise,
    /// Value and its rounding bound.
    Signed(f64, f64),
}

fn probe(r: &Residual, x: f64, stack: &mut Vec<(f64, f64)>) -> Probe {
    let (v, e) = r.eval_bounded(x, stack);
    if !v.is_finite() {
        Probe::Undefined
    } else if v == 0.0 && e == 0.0 {
        Probe::Zero
    } else if v.abs() <= e || e.is_nan() {
        Probe::Noise
    } else {
        Probe::Signed(v, e)
    }
}

/// All real roots of `r` found by the grid scan. `deadline` bounds wall time.
pub fn solve_residual(r: &Residual, eps: f64, deadline: Option<Instant>) -> Result<SolutionSet, SolveError> {
    if let Some((v, scale)) = r.constant() {
        if !v.is_finite() {
            return Err(SolveError::Domain);
        }
        return Ok(if v.abs() <= eps * scale {
            SolutionSet { roots: Vec::new(), all_real: true }
        } else {
            SolutionSet::empty()
        });
    }
    let xs = grid();
    let mut stack = Vec::with_capacity(16);
    let mut ps = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        if i % 512 == 0 {
            check_deadline(deadline)?;
        }
        ps.push(probe(r, x, &mut stack));
    }
    if ps.iter().all(|p| *p == Probe::Undefined) {
        return Err(SolveError::Domain);
    }
    if !ps.iter().any(|p| matches!(p, Probe::Signed(..))) {
        // zero to working precision wherever it is defined
        return Ok(SolutionSet { roots: Vec::new(), all_real: true });
    }

    let mut roots = Vec::new();
    // last signed probe with no undefined probe after it
    let mut last: Option<(usize, f64)> = None;
    for (j, p) in ps.iter().enumerate() {
        match *p {
            Probe::Undefined => last = None,
            Probe::Zero => roots.push(xs[j]),
            Probe::Noise => {}
            Probe::Signed(y, _) => {
                if let Some((i, yi)) = last {
                    if (yi < 0.0) != (y < 0.0) {
                        if let Some(root) = bisect(r, xs[i], yi, xs[j], y, eps, &mut stack) {
                            roots.push(root);
                        }
                    }
                }
                last = Some((j, y));
            }
        }
    }
    check_deadline(deadline)?;

    let signed = |i: usize| match ps[i] {
        Probe::Signed(y, e) => Some((y, e)),
        _ => None,
    };
    // a dip counts only if it clears the rounding bounds, so flat stretches
    // with rounding jitter do not produce minima
    let mut minima: Vec<(usize, f64)> = (1..xs.len() - 1)
        .filter_map(|i| {
            let ((a, ea), (b, eb), (c, ec)) = (signed(i - 1)?, signed(i)?, signed(i + 1)?);
            let same = (a < 0.0) == (b < 0.0) && (b < 0.0) == (c < 0.0);
            let (a, b, c) = (a.abs(), b.abs(), c.abs());
            let dip = (b + eb < a - ea && b <= c) || (b <= a && b + eb < c - ec);
            (same && dip).then_some((i, b))
        })
        .collect();
    minima.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    for &(i, _) in minima.iter().take(MAX_TANGENT_SEARCHES) {
        refine_minimum(r, xs[i - 1], xs[i + 1], eps, &mut stack, &mut roots);
    }
    Ok(SolutionSet::from_roots(roots, eps))
}

fn check_deadline(deadline: Option<Instant>) -> Result<(), SolveError> {
    match deadline {
        Some(d) if Instant::now() >= d => Err(SolveError::Timeout),
        _ => Ok(()),
    }
}

fn bisect(
    r: &Residual,
    mut a: f64,
    mut ya: f64,
    mut b: f64,
    mut yb: f64,
    eps: f64,
    stack: &mut Vec<(f64, f64)>,
) -> Option<f64> {
    let floor = ya.abs().min(yb.abs());
    let tol = 1e-3 * eps;
    for _ in 0..MAX_BISECTIONS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= tol * a.abs().max(b.abs()) {
            break;
        }
        match probe(r, m, stack) {
            Probe::Zero | Probe::Noise => return Some(m),
            Probe::Undefined => return None,
            Probe::Signed(ym, _) if (ym < 0.0) == (ya < 0.0) => {
                a = m;
                ya = ym;
            }
            Probe::Signed(ym, _) => {
                b = m;
                yb = ym;
            }
        }
    }
    let (x, y) = if ya.abs() <= yb.abs() { (a, ya) } else { (b, yb) };
    // a pole keeps |residual| large all the way into the bracket
    (y.abs() <= 1e-3 * floor || y.abs() <= TANGENT_ACCEPT).then_some(x)
}

/// Look inside a window around a local minimum of |residual|. A pole and a
/// root sharing one grid cell show up here as a hidden pair of sign changes;
/// otherwise the minimum may be a tangent root.
fn refine_minimum(r: &Residual, a: f64, b: f64, eps: f64, stack: &mut Vec<(f64, f64)>, roots: &mut Vec<f64>) {
    let step = (b - a) / SUBDIVISIONS as f64;
    let sub: Vec<(f64, Probe)> = (0..=SUBDIVISIONS)
        .map(|k| {
            let x = if k == SUBDIVISIONS { b } else { a + k as f64 * step };
            (x, probe(r, x, stack))
        })
        .collect();
    let mut found = false;
    let mut last: Option<(f64, f64)> = None;
    for &(x, p) in &sub {
        match p {
            Probe::Undefined => last = None,
            Probe::Zero => {
                roots.push(x);
                found = true;
            }
            Probe::Noise => {}
            Probe::Signed(y, _) => {
                if let Some((xl, yl)) = last {
                    if (yl < 0.0) != (y < 0.0) {
                        if let Some(root) = bisect(r, xl, yl, x, y, eps, stack) {
                            roots.push(root);
                            found = true;
                        }
                    }
                }
                last = Some((x, y));
            }
        }
    }
    if found {
        return;
    }
    let best = sub
        .iter()
        .enumerate()
        .filter_map(|(k, (_, p))| match p {
            Probe::Signed(y, _) => Some((k, y.abs())),
            Probe::Noise => Some((k, 0.0)),
            _ => None,
        })
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    if let Some((k, _)) = best {
        let lo = sub[k.saturating_sub(1)].0;
        let hi = sub[(k + 1).min(SUBDIVISIONS)].0;
        if let Some(root) = golden_min(r, lo, hi, stack) {
            roots.push(root);
        }
    }
}

fn golden_min(r: &Residual, mut a: f64, mut b: f64, stack: &mut Vec<(f64, f64)>) -> Option<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut eval = |x: f64| {
        let (v, e) = r.eval_bounded(x, stack);
        // within rounding of zero counts as touching zero
        if v.abs() <= e {
            0.0
        } else {
            v.abs()
        }
    };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    for _ in 0..GOLDEN_ITERS {
        if fc.min(fd) == 0.0 || c.partial_cmp(&d) != Some(std::cmp::Ordering::Less) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    let (x, f) = if fc <= fd { (c, fc) } else { (d, fd) };
    (f <= TANGENT_ACCEPT).then_some(x)
}
