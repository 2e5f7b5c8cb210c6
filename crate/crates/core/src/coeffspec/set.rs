//! Coefficient bundles (b, h, sigma) with declared regularity bounds.

use super::{eval_unchecked, BinOp, CoeffExpr};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::rng::CounterRng;
use crate::segment::{Segment, SegmentPath};

/// Affine-in-time declared bound c0 + c1 t, nondecreasing on [0, inf).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredBound {
    c0: f64,
    c1: f64,
}

impl DeclaredBound {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        if !c0.is_finite() || !c1.is_finite() || c0 < 0.0 || c1 < 0.0 {
            return Err(Error::invalid(format!(
                "declared bound {c0} + {c1} t must have finite nonnegative coefficients"
            )));
        }
        Ok(DeclaredBound { c0, c1 })
    }

    pub fn constant(c0: f64) -> Result<Self> {
        DeclaredBound::new(c0, 0.0)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.c0 + self.c1 * t
    }

    pub fn coeffs(&self) -> (f64, f64) {
        (self.c0, self.c1)
    }
}

/// Empirical regularity probe result; see
/// [`CoefficientSet::estimate_lipschitz`].
#[derive(Debug, Clone, Copy)]
pub struct LipschitzEstimate {
    /// Largest observed (squared discrepancy) / (squared segment gap).
    pub ratio_max: f64,
    /// Declared bound evaluated at the probe time.
    pub declared: f64,
    /// Whether the observation exceeds the declaration.
    pub violation: bool,
}

/// The full coefficient bundle of one equation side: drift b (d entries),
/// cross-variation weights h (d symmetric m x m matrices), diffusion
/// sigma (d x m). h is stored symmetrized: both (j,k) and (k,j) hold the
/// same tree (h_jk + h_kj) / 2, so transpose equality is structural.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    d: usize,
    m: usize,
    r0: f64,
    b: Vec<CoeffExpr>,
    /// d blocks of m*m entries, row-major within the block.
    h: Vec<CoeffExpr>,
    /// d rows of m entries.
    sigma: Vec<CoeffExpr>,
    lip_bound: DeclaredBound,
    growth_bound: DeclaredBound,
}

impl CoefficientSet {
    /// `h` carries one m x m row-major block per state component;
    /// `sigma` one m-entry row per state component.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        m: usize,
        r0: f64,
        b: Vec<CoeffExpr>,
        h: Vec<Vec<CoeffExpr>>,
        sigma: Vec<Vec<CoeffExpr>>,
        lip_bound: DeclaredBound,
        growth_bound: DeclaredBound,
    ) -> Result<Self> {
        if d < 1 || m < 1 {
            return Err(Error::invalid("dimensions d and m must be at least 1"));
        }
        if !r0.is_finite() || r0 < 0.0 {
            return Err(Error::invalid("delay r0 must be finite and nonnegative"));
        }
        if b.len() != d {
            return Err(Error::invalid(format!("expected {d} drift entries, got {}", b.len())));
        }
        if h.len() != d || h.iter().any(|block| block.len() != m * m) {
            return Err(Error::invalid(format!(
                "expected {d} cross-variation blocks of {} entries",
                m * m
            )));
        }
        if sigma.len() != d || sigma.iter().any(|row| row.len() != m) {
            return Err(Error::invalid(format!("expected {d} diffusion rows of {m} entries")));
        }
        for e in b.iter().chain(h.iter().flatten()).chain(sigma.iter().flatten()) {
            e.validate(d, r0)?;
        }

        let mut h_sym = Vec::with_capacity(d);
        for block in &h {
            let mut out = block.clone();
            for j in 0..m {
                for k in (j + 1)..m {
                    let avg = CoeffExpr::Binary {
                        op: BinOp::Mul,
                        lhs: Box::new(CoeffExpr::Const(0.5)),
                        rhs: Box::new(CoeffExpr::Binary {
                            op: BinOp::Add,
                            lhs: Box::new(block[j * m + k].clone()),
                            rhs: Box::new(block[k * m + j].clone()),
                        }),
                    };
                    out[j * m + k] = avg.clone();
                    out[k * m + j] = avg;
                }
            }
            h_sym.extend(out);
        }

        Ok(CoefficientSet {
            d,
            m,
            r0,
            b,
            h: h_sym,
            sigma: sigma.into_iter().flatten().collect(),
            lip_bound,
            growth_bound,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn lip_bound(&self) -> DeclaredBound {
        self.lip_bound
    }

    pub fn growth_bound(&self) -> DeclaredBound {
        self.growth_bound
    }

    pub fn b_expr(&self, i: usize) -> &CoeffExpr {
        &self.b[i]
    }

    pub fn h_expr(&self, i: usize, j: usize, k: usize) -> &CoeffExpr {
        &self.h[i * self.m * self.m + j * self.m + k]
    }

    pub fn sigma_expr(&self, i: usize, j: usize) -> &CoeffExpr {
        &self.sigma[i * self.m + j]
    }

    /// Checked segment compatibility for the public eval entry points.
    pub fn check_segment(&self, seg: &SegmentPath) -> Result<()> {
        if seg.d() != self.d {
            return Err(Error::invalid(format!(
                "segment has {} components, coefficients expect {}",
                seg.d(),
                self.d
            )));
        }
        if (seg.r0() - self.r0).abs() > 1e-12 * self.r0.max(1.0) {
            return Err(Error::invalid(format!(
                "segment window r0 = {} does not match coefficient window {}",
                seg.r0(),
                self.r0
            )));
        }
        Ok(())
    }

    pub fn eval_b(&self, t: f64, seg: &SegmentPath) -> Result<Vec<f64>> {
        self.check_segment(seg)?;
        let mut out = vec![0.0; self.d];
        self.eval_b_into(t, seg, &mut out);
        Ok(out)
    }

    pub fn eval_b_into<S: Segment + ?Sized>(&self, t: f64, seg: &S, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d);
        for (o, e) in out.iter_mut().zip(&self.b) {
            *o = eval_unchecked(e, t, seg);
        }
    }

    pub fn eval_h(&self, i: usize, t: f64, seg: &SegmentPath) -> Result<SymMatrix> {
        self.check_segment(seg)?;
        let mut g = SymMatrix::zero(self.m);
        for j in 0..self.m {
            for k in j..self.m {
                g.set_sym(j, k, eval_unchecked(self.h_expr(i, j, k), t, seg));
            }
        }
        Ok(g)
    }

    /// <h^i(t, seg), q> without materializing the matrix; `q` is a
    /// symmetric m x m block in row-major order. Each off-diagonal tree
    /// is evaluated once and paired with both mirror entries.
    pub fn eval_h_pair<S: Segment + ?Sized>(&self, i: usize, t: f64, seg: &S, q: &[f64]) -> f64 {
        debug_assert_eq!(q.len(), self.m * self.m);
        let m = self.m;
        let mut acc = 0.0;
        for j in 0..m {
            acc += eval_unchecked(self.h_expr(i, j, j), t, seg) * q[j * m + j];
            for k in (j + 1)..m {
                acc += 2.0 * eval_unchecked(self.h_expr(i, j, k), t, seg) * q[j * m + k];
            }
        }
        acc
    }

    pub fn eval_sigma(&self, t: f64, seg: &SegmentPath) -> Result<Vec<f64>> {
        self.check_segment(seg)?;
        let mut out = vec![0.0; self.d * self.m];
        for (o, e) in out.iter_mut().zip(&self.sigma) {
            *o = eval_unchecked(e, t, seg);
        }
        Ok(out)
    }

    pub fn eval_sigma_row_into<S: Segment + ?Sized>(
        &self,
        i: usize,
        t: f64,
        seg: &S,
        out: &mut [f64],
    ) {
        debug_assert_eq!(out.len(), self.m);
        for (j, o) in out.iter_mut().enumerate() {
            *o = eval_unchecked(self.sigma_expr(i, j), t, seg);
        }
    }

    /// Monte Carlo probe of the squared-discrepancy Lipschitz ratio
    ///
    /// ```text
    /// (|b(t,xi) - b(t,eta)|^2 + sum_i |h^i(t,xi) - h^i(t,eta)|_F^2
    ///                         + |sigma(t,xi) - sigma(t,eta)|_HS^2)
    ///   / sup-distance(xi, eta)^2
    /// ```
    ///
    /// over random segment pairs with base amplitude 1 and perturbation
    /// within `radius`. Flags a violation when the observed maximum
    /// exceeds the declared bound at `t`.
    pub fn estimate_lipschitz(
        &self,
        t: f64,
        n_probes: usize,
        radius: f64,
        seed: u64,
    ) -> Result<LipschitzEstimate> {
        if n_probes < 1 {
            return Err(Error::invalid("n_probes must be at least 1"));
        }
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::invalid("probe radius must be positive"));
        }
        let n_lag = if self.r0 > 0.0 { 16 } else { 0 };
        let mut rng = CounterRng::from_key(&[seed, 0x6c69_7073]);
        let mut ratio_max = 0.0_f64;
        let mut sig_a = vec![0.0; self.m];
        let mut sig_b = vec![0.0; self.m];
        for _ in 0..n_probes {
            let xi = SegmentPath::from_fn(self.d, self.r0, n_lag, |_, _| {
                rng.next_uniform(-1.0, 1.0)
            })?;
            let eta = SegmentPath::from_fn(self.d, self.r0, n_lag, |c, j| {
                xi.sample(c, j) + rng.next_uniform(-radius, radius)
            })?;
            let dist = xi.sup_distance(&eta)?;
            if dist == 0.0 {
                continue;
            }
            let mut lhs = 0.0;
            for i in 0..self.d {
                let db = eval_unchecked(&self.b[i], t, &xi) - eval_unchecked(&self.b[i], t, &eta);
                lhs += db * db;
                for j in 0..self.m {
                    let djj = eval_unchecked(self.h_expr(i, j, j), t, &xi)
                        - eval_unchecked(self.h_expr(i, j, j), t, &eta);
                    lhs += djj * djj;
                    for k in (j + 1)..self.m {
                        let djk = eval_unchecked(self.h_expr(i, j, k), t, &xi)
                            - eval_unchecked(self.h_expr(i, j, k), t, &eta);
                        lhs += 2.0 * djk * djk;
                    }
                }
                self.eval_sigma_row_into(i, t, &xi, &mut sig_a);
                self.eval_sigma_row_into(i, t, &eta, &mut sig_b);
                for (a, b) in sig_a.iter().zip(&sig_b) {
                    lhs += (a - b) * (a - b);
                }
            }
            ratio_max = ratio_max.max(lhs / (dist * dist));
        }
        let declared = self.lip_bound.at(t);
        Ok(LipschitzEstimate {
            ratio_max,
            declared,
            violation: ratio_max > declared + 1e-9,
        })
    }
}
