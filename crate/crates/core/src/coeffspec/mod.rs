//! A small expression language for coefficient functionals on paths.
//!
//! Drift, cross-variation, and diffusion coefficients are specified as
//! expressions over the time variable, segment probes like `x[1](-0.25)`,
//! and segment reductions like `avg(x[2])`. The grammar admits only
//! operations that are Lipschitz on bounded sets (no division, no
//! unbounded-derivative primitives), so every parseable coefficient
//! satisfies a locally Lipschitz bound by construction;
//! [`estimate_lipschitz`](set::CoefficientSet::estimate_lipschitz)
//! validates the declared constant empirically.

mod parser;
mod set;

pub use parser::parse_coeff;
pub use set::{CoefficientSet, DeclaredBound, LipschitzEstimate};

use crate::error::{Error, Result};
use crate::segment::{Segment, SegmentPath};

/// Reduction of a segment component over its whole window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    /// Trapezoidal average over [-r0, 0].
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Sin,
    Cos,
    Tanh,
    Abs,
    Neg,
}

/// Abstract syntax of a scalar coefficient.
///
/// Probe indices are 1-based as written in the source text; `offset` is
/// the (nonpositive) evaluation point within the segment window, so the
/// text `x[2](-0.25)` stores `index: 2, offset: -0.25`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffExpr {
    Const(f64),
    Time,
    Probe { index: usize, offset: f64 },
    Reduce { kind: ReduceKind, index: usize },
    Binary { op: BinOp, lhs: Box<CoeffExpr>, rhs: Box<CoeffExpr> },
    Unary { op: UnOp, arg: Box<CoeffExpr> },
    Clip { arg: Box<CoeffExpr>, lo: f64, hi: f64 },
}

impl CoeffExpr {
    /// Largest 1-based probe/reduce index, 0 when segment-independent.
    pub fn max_index(&self) -> usize {
        match self {
            CoeffExpr::Const(_) | CoeffExpr::Time => 0,
            CoeffExpr::Probe { index, .. } | CoeffExpr::Reduce { index, .. } => *index,
            CoeffExpr::Binary { lhs, rhs, .. } => lhs.max_index().max(rhs.max_index()),
            CoeffExpr::Unary { arg, .. } | CoeffExpr::Clip { arg, .. } => arg.max_index(),
        }
    }

    /// Deepest probe lag (a nonnegative number; reductions count as the
    /// full window so they force `max_lag = r0` handling by the caller).
    pub fn max_lag(&self) -> f64 {
        match self {
            CoeffExpr::Const(_) | CoeffExpr::Time | CoeffExpr::Reduce { .. } => 0.0,
            CoeffExpr::Probe { offset, .. } => -offset,
            CoeffExpr::Binary { lhs, rhs, .. } => lhs.max_lag().max(rhs.max_lag()),
            CoeffExpr::Unary { arg, .. } | CoeffExpr::Clip { arg, .. } => arg.max_lag(),
        }
    }

    fn has_reduce(&self) -> bool {
        match self {
            CoeffExpr::Const(_) | CoeffExpr::Time | CoeffExpr::Probe { .. } => false,
            CoeffExpr::Reduce { .. } => true,
            CoeffExpr::Binary { lhs, rhs, .. } => lhs.has_reduce() || rhs.has_reduce(),
            CoeffExpr::Unary { arg, .. } | CoeffExpr::Clip { arg, .. } => arg.has_reduce(),
        }
    }

    /// Structural sanity for directly constructed trees: finite constants,
    /// ordered clip bounds, indices within 1..=d, lags within [0, r0].
    pub fn validate(&self, d: usize, r0: f64) -> Result<()> {
        match self {
            CoeffExpr::Const(c) => {
                if !c.is_finite() {
                    return Err(Error::invalid("constant must be finite"));
                }
            }
            CoeffExpr::Time => {}
            CoeffExpr::Probe { index, offset } => {
                if *index < 1 || *index > d {
                    return Err(Error::invalid(format!(
                        "segment index {index} outside 1..{d}"
                    )));
                }
                if !offset.is_finite() || *offset > 0.0 || *offset < -r0 {
                    return Err(Error::invalid(format!(
                        "lag {} outside [0, {r0}]",
                        -offset
                    )));
                }
            }
            CoeffExpr::Reduce { index, .. } => {
                if *index < 1 || *index > d {
                    return Err(Error::invalid(format!(
                        "segment index {index} outside 1..{d}"
                    )));
                }
            }
            CoeffExpr::Binary { lhs, rhs, .. } => {
                lhs.validate(d, r0)?;
                rhs.validate(d, r0)?;
            }
            CoeffExpr::Unary { arg, .. } => arg.validate(d, r0)?,
            CoeffExpr::Clip { arg, lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::invalid(format!(
                        "clip bounds [{lo}, {hi}] must be finite and ordered"
                    )));
                }
                arg.validate(d, r0)?;
            }
        }
        Ok(())
    }
}

/// Evaluate without shape checks. The segment must cover every probe the
/// expression makes; the simulation kernel validates once up front and
/// then runs this in the step loop.
pub fn eval_unchecked<S: Segment + ?Sized>(expr: &CoeffExpr, t: f64, seg: &S) -> f64 {
    match expr {
        CoeffExpr::Const(c) => *c,
        CoeffExpr::Time => t,
        CoeffExpr::Probe { index, offset } => seg.eval_at(index - 1, *offset),
        CoeffExpr::Reduce { kind, index } => reduce(*kind, index - 1, seg),
        CoeffExpr::Binary { op, lhs, rhs } => {
            let a = eval_unchecked(lhs, t, seg);
            let b = eval_unchecked(rhs, t, seg);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Min => a.min(b),
                BinOp::Max => a.max(b),
            }
        }
        CoeffExpr::Unary { op, arg } => {
            let v = eval_unchecked(arg, t, seg);
            match op {
                UnOp::Sin => v.sin(),
                UnOp::Cos => v.cos(),
                UnOp::Tanh => v.tanh(),
                UnOp::Abs => v.abs(),
                UnOp::Neg => -v,
            }
        }
        CoeffExpr::Clip { arg, lo, hi } => eval_unchecked(arg, t, seg).max(*lo).min(*hi),
    }
}

fn reduce<S: Segment + ?Sized>(kind: ReduceKind, comp: usize, seg: &S) -> f64 {
    let n = seg.n_lag();
    match kind {
        ReduceKind::Avg => {
            if n == 0 {
                return seg.sample(comp, 0);
            }
            // trapezoid on the uniform grid; the r0 lengths cancel
            let mut acc = 0.5 * (seg.sample(comp, 0) + seg.sample(comp, n));
            for j in 1..n {
                acc += seg.sample(comp, j);
            }
            acc / n as f64
        }
        ReduceKind::Min => (0..=n).map(|j| seg.sample(comp, j)).fold(f64::INFINITY, f64::min),
        ReduceKind::Max => (0..=n)
            .map(|j| seg.sample(comp, j))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Evaluate with shape checks against the segment.
pub fn eval_coeff(expr: &CoeffExpr, t: f64, seg: &SegmentPath) -> Result<f64> {
    let idx = expr.max_index();
    if idx > seg.d() {
        return Err(Error::invalid(format!(
            "expression probes component {idx} but the segment has {} components",
            seg.d()
        )));
    }
    let lag = expr.max_lag();
    if lag > seg.r0() + 1e-12 {
        return Err(Error::invalid(format!(
            "expression probes lag {lag} but the segment covers [-{}, 0]",
            seg.r0()
        )));
    }
    if expr.has_reduce() && seg.d() == 0 {
        return Err(Error::invalid("reduction over an empty segment"));
    }
    Ok(eval_unchecked(expr, t, seg))
}

/// Render the tree back to grammar text. `parse_coeff(print_coeff(e))`
/// reproduces `e` structurally whenever `e` lies in the parser's image
/// (constants nonnegative, negation spelled via the unary node).
pub fn print_coeff(expr: &CoeffExpr) -> String {
    let mut out = String::new();
    write_expr(expr, 1, &mut out);
    out
}

/// Precedence contexts: 1 = sum position, 2 = product position,
/// 3 = factor position. A node whose own level is below the context gets
/// parenthesized, which preserves tree shape through a reparse.
fn write_expr(expr: &CoeffExpr, ctx: u8, out: &mut String) {
    use std::fmt::Write;
    let level = match expr {
        CoeffExpr::Binary { op: BinOp::Add | BinOp::Sub, .. } => 1,
        CoeffExpr::Binary { op: BinOp::Mul, .. } => 2,
        _ => 3,
    };
    if level < ctx {
        out.push('(');
        write_expr(expr, 1, out);
        out.push(')');
        return;
    }
    match expr {
        CoeffExpr::Const(c) => {
            let _ = write!(out, "{c}");
        }
        CoeffExpr::Time => out.push('t'),
        CoeffExpr::Probe { index, offset } => {
            if *offset == 0.0 {
                let _ = write!(out, "x[{index}](0)");
            } else {
                let _ = write!(out, "x[{index}](-{})", -offset);
            }
        }
        CoeffExpr::Reduce { kind, index } => {
            let name = match kind {
                ReduceKind::Avg => "avg",
                ReduceKind::Min => "min",
                ReduceKind::Max => "max",
            };
            let _ = write!(out, "{name}(x[{index}])");
        }
        CoeffExpr::Binary { op: op @ (BinOp::Add | BinOp::Sub), lhs, rhs } => {
            write_expr(lhs, 1, out);
            out.push_str(if *op == BinOp::Add { " + " } else { " - " });
            write_expr(rhs, 2, out);
        }
        CoeffExpr::Binary { op: BinOp::Mul, lhs, rhs } => {
            write_expr(lhs, 2, out);
            out.push('*');
            write_expr(rhs, 3, out);
        }
        CoeffExpr::Binary { op: op @ (BinOp::Min | BinOp::Max), lhs, rhs } => {
            out.push_str(if *op == BinOp::Min { "min(" } else { "max(" });
            write_expr(lhs, 1, out);
            out.push_str(", ");
            write_expr(rhs, 1, out);
            out.push(')');
        }
        CoeffExpr::Unary { op: UnOp::Neg, arg } => {
            out.push('-');
            write_expr(arg, 3, out);
        }
        CoeffExpr::Unary { op, arg } => {
            let name = match op {
                UnOp::Sin => "sin",
                UnOp::Cos => "cos",
                UnOp::Tanh => "tanh",
                UnOp::Abs => "abs",
                UnOp::Neg => unreachable!(),
            };
            out.push_str(name);
            out.push('(');
            write_expr(arg, 1, out);
            out.push(')');
        }
        CoeffExpr::Clip { arg, lo, hi } => {
            use std::fmt::Write;
            out.push_str("clip(");
            write_expr(arg, 1, out);
            let _ = write!(out, ", {lo}, {hi}");
            out.push(')');
        }
    }
}

/// Syntactic (value, Lipschitz) bounds valid on segments with
/// `sup_norm <= amp` and times in [0, t_max]: `|eval| <= value` there,
/// and `|eval(xi) - eval(eta)| <= lip * sup_distance(xi, eta)` for
/// segment pairs within the same ball.
pub fn syntactic_bounds(expr: &CoeffExpr, amp: f64, t_max: f64) -> (f64, f64) {
    match expr {
        CoeffExpr::Const(c) => (c.abs(), 0.0),
        CoeffExpr::Time => (t_max, 0.0),
        // interpolation and all three reductions are 1-Lipschitz in the
        // segment sup norm and bounded by it
        CoeffExpr::Probe { .. } | CoeffExpr::Reduce { .. } => (amp, 1.0),
        CoeffExpr::Binary { op, lhs, rhs } => {
            let (va, la) = syntactic_bounds(lhs, amp, t_max);
            let (vb, lb) = syntactic_bounds(rhs, amp, t_max);
            match op {
                BinOp::Add | BinOp::Sub => (va + vb, la + lb),
                BinOp::Mul => (va * vb, va * lb + vb * la),
                BinOp::Min | BinOp::Max => (va.max(vb), la.max(lb)),
            }
        }
        CoeffExpr::Unary { op, arg } => {
            let (v, l) = syntactic_bounds(arg, amp, t_max);
            match op {
                UnOp::Sin | UnOp::Tanh => (v.min(1.0), l),
                UnOp::Cos => (1.0, l),
                UnOp::Abs | UnOp::Neg => (v, l),
            }
        }
        CoeffExpr::Clip { arg, lo, hi } => {
            let (v, l) = syntactic_bounds(arg, amp, t_max);
            (v.min(lo.abs().max(hi.abs())), l)
        }
    }
}
