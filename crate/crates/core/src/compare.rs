//! Comparison machinery for coupled coefficient sets: sampled checks of
//! the two sufficient conditions, empirical verification of order
//! preservation, and short-time drift probes for the converse direction.
//!
//! Condition one bounds a drift-plus-G margin over ordered segment
//! pairs that agree in one component at the right endpoint; condition
//! two demands that the diffusion rows of both sets coincide and depend
//! on the past only through the matching terminal value. Both are
//! checked by constrained sampling: the exact conditions quantify over
//! all segments, the checker reports the worst margin it found together
//! with a replayable witness.

use crate::bounds::VolBounds;
use crate::coeffspec::CoefficientSet;
use crate::error::{Error, Result};
use crate::gexpect::{estimate_capacity, estimate_gexp, pairwise_sum, GEstimate};
use crate::gfunc::g_eval;
use crate::grid::TimeGrid;
use crate::linalg::SymMatrix;
use crate::rng::CounterRng;
use crate::scenario::drive;
use crate::segment::{segment_order_leq, Segment, SegmentPath};
use crate::sim::{PairKernel, Side};

/// Which sufficient condition a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    One,
    Two,
}

impl std::fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConditionKind::One => write!(f, "one"),
            ConditionKind::Two => write!(f, "two"),
        }
    }
}

/// What a stored witness measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// b^i(t, xi) - bbar^i(t, eta) + 2 G(h^i(t, xi) - hbar^i(t, eta)).
    Drift,
    /// |sigma^{ij}(t, xi) - sigmabar^{ij}(t, xi)| on one segment.
    SigmaEquality,
    /// |sigma^{ij}(t, xi) - sigma^{ij}(t, eta)| for a pair agreeing in
    /// component i at the right endpoint, on the given side's set.
    SigmaLocality { side: Side },
}

/// The probe achieving the reported max margin. Components and columns
/// are 1-based, matching the coefficient syntax.
#[derive(Debug, Clone)]
pub struct Witness {
    pub kind: WitnessKind,
    pub t: f64,
    pub xi: SegmentPath,
    pub eta: SegmentPath,
    pub component: usize,
    /// Diffusion column for condition-two witnesses.
    pub col: Option<usize>,
}

/// One probed margin, kept for CSV emission.
#[derive(Debug, Clone, Copy)]
pub struct MarginSample {
    pub trial: usize,
    pub t: f64,
    /// 1-based component the margin was probed at.
    pub component: usize,
    pub margin: f64,
}

/// Outcome of a sampled condition check.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub condition: ConditionKind,
    pub n_trials: usize,
    /// Largest margin found; condition one requires <= 0.
    pub max_margin: f64,
    pub witness: Witness,
    pub pass: bool,
    pub tol: f64,
    samples: Vec<MarginSample>,
}

impl ConditionReport {
    /// Every probed margin, one row per probe in trial order.
    pub fn samples(&self) -> &[MarginSample] {
        &self.samples
    }

    /// Re-evaluate the stored witness; must reproduce `max_margin`
    /// within 1e-10.
    pub fn replay(
        &self,
        set_x: &CoefficientSet,
        set_xbar: &CoefficientSet,
        bounds: &VolBounds,
    ) -> Result<f64> {
        let w = &self.witness;
        let i0 = w.component - 1;
        match w.kind {
            WitnessKind::Drift => {
                let bx = set_x.eval_b(w.t, &w.xi)?;
                let bxb = set_xbar.eval_b(w.t, &w.eta)?;
                let dh = set_x
                    .eval_h(i0, w.t, &w.xi)?
                    .sub(&set_xbar.eval_h(i0, w.t, &w.eta)?);
                Ok(bx[i0] - bxb[i0] + 2.0 * g_eval(&dh, bounds)?)
            }
            WitnessKind::SigmaEquality => {
                let j0 = w.col.ok_or_else(|| Error::invalid("witness lacks a column"))? - 1;
                let sx = set_x.eval_sigma(w.t, &w.xi)?;
                let sxb = set_xbar.eval_sigma(w.t, &w.xi)?;
                let at = i0 * set_x.m() + j0;
                Ok((sx[at] - sxb[at]).abs())
            }
            WitnessKind::SigmaLocality { side } => {
                let j0 = w.col.ok_or_else(|| Error::invalid("witness lacks a column"))? - 1;
                let set = match side {
                    Side::X => set_x,
                    Side::Xbar => set_xbar,
                };
                let sx = set.eval_sigma(w.t, &w.xi)?;
                let se = set.eval_sigma(w.t, &w.eta)?;
                let at = i0 * set.m() + j0;
                Ok((sx[at] - se[at]).abs())
            }
        }
    }
}

impl std::fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "condition {}: {} over {} trials (tol {:e})",
            self.condition,
            if self.pass { "PASS" } else { "FAIL" },
            self.n_trials,
            self.tol
        )?;
        write!(
            f,
            "  max margin {:.6e} at t = {} component {}",
            self.max_margin, self.witness.t, self.witness.component
        )?;
        if let Some(j) = self.witness.col {
            write!(f, " column {j}")?;
        }
        Ok(())
    }
}

/// Random piecewise-linear samples in [lo, hi] for one component slice
/// of length n_lag + 1: anchor values at a few knots, linear between.
fn fill_piecewise(values: &mut [f64], lo: f64, hi: f64, rng: &mut CounterRng) {
    let n_lag = values.len() - 1;
    if n_lag == 0 {
        values[0] = rng.next_uniform(lo, hi);
        return;
    }
    let mut knots = vec![0usize, n_lag];
    if n_lag >= 2 {
        for _ in 0..rng.next_index(3) {
            knots.push(1 + rng.next_index(n_lag - 1));
        }
    }
    knots.sort_unstable();
    knots.dedup();
    let anchor: Vec<f64> = knots.iter().map(|_| rng.next_uniform(lo, hi)).collect();
    for (w, a) in knots.windows(2).zip(anchor.windows(2)) {
        let (ia, ib) = (w[0], w[1]);
        values[ia] = a[0];
        values[ib] = a[1];
        for j in ia + 1..ib {
            let frac = (j - ia) as f64 / (ib - ia) as f64;
            values[j] = a[0] + (a[1] - a[0]) * frac;
        }
    }
}

fn random_segment(d: usize, r0: f64, n_lag: usize, scale: f64, rng: &mut CounterRng) -> SegmentPath {
    let mut values = vec![0.0; d * (n_lag + 1)];
    for comp in 0..d {
        fill_piecewise(&mut values[comp * (n_lag + 1)..(comp + 1) * (n_lag + 1)], -scale, scale, rng);
    }
    SegmentPath::new(d, r0, n_lag, values).expect("generated segment is well-formed")
}

fn ordered_pair_from(
    d: usize,
    r0: f64,
    n_lag: usize,
    component: usize,
    scale: f64,
    rng: &mut CounterRng,
) -> (SegmentPath, SegmentPath) {
    assert!((1..=d).contains(&component), "component {component} outside 1..={d}");
    let eta = random_segment(d, r0, n_lag, scale, rng);
    let width = n_lag + 1;
    let mut delta = vec![0.0; d * width];
    for comp in 0..d {
        fill_piecewise(&mut delta[comp * width..(comp + 1) * width], 0.0, scale, rng);
    }
    // the pinned component gives up nothing at the right endpoint
    delta[(component - 1) * width + n_lag] = 0.0;
    let values: Vec<f64> = eta
        .values()
        .iter()
        .zip(&delta)
        .map(|(e, d)| e - d)
        .collect();
    let xi = SegmentPath::new(d, r0, n_lag, values).expect("shifted segment is well-formed");
    (xi, eta)
}

/// Draw a random ordered segment pair (xi, eta): eta piecewise-linear
/// with amplitude <= scale, xi = eta - delta for a nonnegative random
/// delta with delta at (component, 0) exactly zero. The result satisfies
/// xi <= eta samplewise and xi^component(0) = eta^component(0) bitwise.
/// `component` is 1-based.
pub fn sample_ordered_pair(
    d: usize,
    r0: f64,
    n_lag: usize,
    component: usize,
    scale: f64,
    seed: u64,
) -> (SegmentPath, SegmentPath) {
    let mut rng = CounterRng::from_key(&[seed, 0x6f72_6470]);
    ordered_pair_from(d, r0, n_lag, component, scale, &mut rng)
}

/// Segment sample count used by the condition checkers.
fn probe_n_lag(r0: f64) -> usize {
    if r0 > 0.0 {
        16
    } else {
        0
    }
}

/// Probe amplitude for sampled segments in the condition checkers.
const PROBE_SCALE: f64 = 1.0;

fn validate_pair_shapes(set_x: &CoefficientSet, set_xbar: &CoefficientSet) -> Result<()> {
    if set_x.d() != set_xbar.d() || set_x.m() != set_xbar.m() {
        return Err(Error::invalid(format!(
            "coefficient sets disagree: ({}, {}) vs ({}, {})",
            set_x.d(),
            set_x.m(),
            set_xbar.d(),
            set_xbar.m()
        )));
    }
    if (set_x.r0() - set_xbar.r0()).abs() > 1e-12 * set_x.r0().max(1.0) {
        return Err(Error::invalid(format!(
            "coefficient sets disagree on the delay window: {} vs {}",
            set_x.r0(),
            set_xbar.r0()
        )));
    }
    Ok(())
}

fn validate_probe_args(t_grid: &[f64], n_trials: usize, tol: f64) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("t_grid must be non-empty and finite"));
    }
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be positive"));
    }
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::invalid(format!("tolerance must be finite and nonnegative, got {tol}")));
    }
    Ok(())
}

/// Sampled check of the drift-and-h condition: for ordered pairs with
/// matching component-i endpoints,
/// b^i(t, xi) - bbar^i(t, eta) + 2 G(h^i(t, xi) - hbar^i(t, eta)) <= 0.
pub fn check_condition1(
    set_x: &CoefficientSet,
    set_xbar: &CoefficientSet,
    bounds: &VolBounds,
    t_grid: &[f64],
    n_trials: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport> {
    validate_pair_shapes(set_x, set_xbar)?;
    validate_probe_args(t_grid, n_trials, tol)?;
    if bounds.m() != set_x.m() {
        return Err(Error::invalid(format!(
            "bounds cover {} driver components, coefficients expect {}",
            bounds.m(),
            set_x.m()
        )));
    }
    let d = set_x.d();
    let n_lag = probe_n_lag(set_x.r0());
    let mut samples = Vec::with_capacity(n_trials);
    let mut best: Option<(f64, Witness)> = None;

    for trial in 0..n_trials {
        let mut rng = CounterRng::from_key(&[seed, 0x6364_3161, trial as u64]);
        let i = 1 + rng.next_index(d);
        let t = t_grid[rng.next_index(t_grid.len())];
        let (xi, eta) = ordered_pair_from(d, set_x.r0(), n_lag, i, PROBE_SCALE, &mut rng);

        let bx = set_x.eval_b(t, &xi)?;
        let bxb = set_xbar.eval_b(t, &eta)?;
        let dh = set_x
            .eval_h(i - 1, t, &xi)?
            .sub(&set_xbar.eval_h(i - 1, t, &eta)?);
        let margin = bx[i - 1] - bxb[i - 1] + 2.0 * g_eval(&dh, bounds)?;

        samples.push(MarginSample { trial, t, component: i, margin });
        // strict > keeps the lowest-trial witness on ties
        if best.as_ref().map_or(true, |(m, _)| margin > *m) {
            best = Some((margin, Witness { kind: WitnessKind::Drift, t, xi, eta, component: i, col: None }));
        }
    }
    let (max_margin, witness) = best.expect("n_trials >= 1");
    Ok(ConditionReport {
        condition: ConditionKind::One,
        n_trials,
        max_margin,
        witness,
        pass: max_margin <= tol,
        tol,
        samples,
    })
}

/// Sampled check of the diffusion condition: sigma and sigmabar agree
/// entrywise, and row i of sigma depends on the past only through the
/// component-i value at the right endpoint.
pub fn check_condition2(
    set_x: &CoefficientSet,
    set_xbar: &CoefficientSet,
    t_grid: &[f64],
    n_trials: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport> {
    validate_pair_shapes(set_x, set_xbar)?;
    validate_probe_args(t_grid, n_trials, tol)?;
    let (d, m, r0) = (set_x.d(), set_x.m(), set_x.r0());
    let n_lag = probe_n_lag(r0);
    let width = n_lag + 1;
    let mut samples = Vec::with_capacity(2 * n_trials);
    let mut best: Option<(f64, Witness)> = None;
    let consider = |margin: f64, witness: Witness, best: &mut Option<(f64, Witness)>| {
        if best.as_ref().map_or(true, |(mv, _)| margin > *mv) {
            *best = Some((margin, witness));
        }
    };

    for trial in 0..n_trials {
        let mut rng = CounterRng::from_key(&[seed, 0x6364_3262, trial as u64]);
        let i = 1 + rng.next_index(d);
        let t = t_grid[rng.next_index(t_grid.len())];

        // equality probe: one segment, all entries of both sets
        let seg = random_segment(d, r0, n_lag, PROBE_SCALE, &mut rng);
        let sx = set_x.eval_sigma(t, &seg)?;
        let sxb = set_xbar.eval_sigma(t, &seg)?;
        let mut eq_margin = f64::NEG_INFINITY;
        let mut eq_at = (1, 1);
        for row in 0..d {
            for col in 0..m {
                let gap = (sx[row * m + col] - sxb[row * m + col]).abs();
                if gap > eq_margin {
                    eq_margin = gap;
                    eq_at = (row + 1, col + 1);
                }
            }
        }
        samples.push(MarginSample { trial, t, component: eq_at.0, margin: eq_margin });
        consider(
            eq_margin,
            Witness {
                kind: WitnessKind::SigmaEquality,
                t,
                xi: seg.clone(),
                eta: seg,
                component: eq_at.0,
                col: Some(eq_at.1),
            },
            &mut best,
        );

        // locality probe: independent pair agreeing only in component i
        // at the right endpoint; row i must coincide on both sets
        let xi = random_segment(d, r0, n_lag, PROBE_SCALE, &mut rng);
        let mut eta_values = random_segment(d, r0, n_lag, PROBE_SCALE, &mut rng)
            .values()
            .to_vec();
        eta_values[(i - 1) * width + n_lag] = xi.terminal(i - 1);
        let eta = SegmentPath::new(d, r0, n_lag, eta_values)?;
        let mut loc_margin = f64::NEG_INFINITY;
        let mut loc_at = (1, Side::X);
        let mut row_a = vec![0.0; m];
        let mut row_b = vec![0.0; m];
        for (side, set) in [(Side::X, set_x), (Side::Xbar, set_xbar)] {
            set.eval_sigma_row_into(i - 1, t, &xi, &mut row_a);
            set.eval_sigma_row_into(i - 1, t, &eta, &mut row_b);
            for col in 0..m {
                let gap = (row_a[col] - row_b[col]).abs();
                if gap > loc_margin {
                    loc_margin = gap;
                    loc_at = (col + 1, side);
                }
            }
        }
        samples.push(MarginSample { trial, t, component: i, margin: loc_margin });
        consider(
            loc_margin,
            Witness {
                kind: WitnessKind::SigmaLocality { side: loc_at.1 },
                t,
                xi,
                eta,
                component: i,
                col: Some(loc_at.0),
            },
            &mut best,
        );
    }
    let (max_margin, witness) = best.expect("n_trials >= 1");
    Ok(ConditionReport {
        condition: ConditionKind::Two,
        n_trials,
        max_margin,
        witness,
        pass: max_margin <= tol,
        tol,
        samples,
    })
}

/// Empirical order-preservation verdict over a policy family.
#[derive(Debug, Clone)]
pub struct OrderVerdict {
    /// Estimate of sup over the policy set of E[sup_t max_i (X^i - Xbar^i)+].
    pub gexp_of_violation: GEstimate,
    /// Capacity of the event that some component exceeds its partner by
    /// more than `band` at some grid time.
    pub capacity_of_crossing: GEstimate,
    pub band: f64,
    pub accept_threshold: f64,
    pub preserved: bool,
}

impl OrderVerdict {
    /// Crossing frequency statistically above zero: at least one policy
    /// with frequency >= 3 binomial standard errors over 0.
    pub fn crossing_detected(&self) -> bool {
        self.capacity_of_crossing
            .per_policy()
            .iter()
            .any(|row| row.mean > 0.0 && row.mean >= 3.0 * row.se)
    }
}

/// Simulate the coupled pair under every policy on common noise and
/// summarize order violations: the G-expectation of the pathwise
/// violation sup and the capacity of crossing by more than `band`.
#[allow(clippy::too_many_arguments)]
pub fn verify_order_preservation(
    set_x: &CoefficientSet,
    set_xbar: &CoefficientSet,
    xi: &SegmentPath,
    xibar: &SegmentPath,
    policies: &[crate::scenario::VolatilityPolicy],
    grid: &TimeGrid,
    n_paths: usize,
    band: f64,
    accept_threshold: f64,
    seed: u64,
) -> Result<OrderVerdict> {
    if !segment_order_leq(xi, xibar)? {
        return Err(Error::invalid("initial segments must satisfy xi <= xibar samplewise"));
    }
    if !band.is_finite() || band < 0.0 {
        return Err(Error::invalid(format!("band must be finite and nonnegative, got {band}")));
    }
    if !accept_threshold.is_finite() || accept_threshold < 0.0 {
        return Err(Error::invalid(format!(
            "accept threshold must be finite and nonnegative, got {accept_threshold}"
        )));
    }
    let kernel = PairKernel::new(set_x, set_xbar, xi, xibar, grid)?;

    let mut counter = 0usize;
    let gexp_of_violation = estimate_gexp(
        |driver| {
            let idx = counter % n_paths.max(1);
            counter += 1;
            let mut worst = 0.0f64;
            kernel.run_path(idx, driver, |_, _, x, xbar| {
                for i in 0..x.len() {
                    worst = worst.max(x[i] - xbar[i]);
                }
            })?;
            Ok(worst.max(0.0))
        },
        policies,
        grid,
        n_paths,
        seed,
    )?;

    let mut counter = 0usize;
    let capacity_of_crossing = estimate_capacity(
        |driver| {
            let idx = counter % n_paths.max(1);
            counter += 1;
            let mut crossed = false;
            kernel.run_path(idx, driver, |_, _, x, xbar| {
                for i in 0..x.len() {
                    crossed |= x[i] > xbar[i] + band;
                }
            })?;
            Ok(crossed)
        },
        policies,
        grid,
        n_paths,
        seed,
    )?;

    let preserved = gexp_of_violation.value() <= accept_threshold;
    Ok(OrderVerdict { gexp_of_violation, capacity_of_crossing, band, accept_threshold, preserved })
}

/// One difference-quotient datum of the short-time drift probe.
#[derive(Debug, Clone, Copy)]
pub struct SlopePoint {
    pub s: f64,
    /// Mean of X^i(t0 + s) - Xbar^i(t0 + s) over paths.
    pub gap_mean: f64,
    pub gap_se: f64,
    /// gap_mean / s, the difference quotient.
    pub quotient: f64,
    pub quotient_se: f64,
}

/// Extrapolated short-time slope of the coupled gap under one constant
/// policy, with the closed-form drift margin for cross-checking.
#[derive(Debug, Clone)]
pub struct DriftProbe {
    pub points: Vec<SlopePoint>,
    /// Intercept of the quotient fit as s drops to 0.
    pub slope: f64,
    pub slope_se: f64,
    /// b^i(t0, xi) - bbar^i(t0, eta) + <h^i(t0, xi) - hbar^i(t0, eta), gamma>.
    pub direct: f64,
}

/// Estimate the short-time slope (1/s) E[X^i(t0+s) - Xbar^i(t0+s)] under
/// the constant-gamma policy, extrapolating over `s_list` (decreasing,
/// positive, on the grid) to control the O(s) bias of the quotient.
/// `component` is 1-based. For order-preserving configurations the slope
/// stays within statistical tolerance of a nonpositive value.
#[allow(clippy::too_many_arguments)]
pub fn necessity_probe_drift(
    set_x: &CoefficientSet,
    set_xbar: &CoefficientSet,
    bounds: &VolBounds,
    gamma: &SymMatrix,
    component: usize,
    xi: &SegmentPath,
    eta: &SegmentPath,
    s_list: &[f64],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<DriftProbe> {
    let d = set_x.d();
    if !(1..=d).contains(&component) {
        return Err(Error::invalid(format!("component {component} outside 1..={d}")));
    }
    if !segment_order_leq(xi, eta)? {
        return Err(Error::invalid("probe pair must satisfy xi <= eta samplewise"));
    }
    let i0 = component - 1;
    if xi.terminal(i0) != eta.terminal(i0) {
        return Err(Error::invalid(format!(
            "probe pair must agree in component {component} at the right endpoint"
        )));
    }
    if s_list.is_empty() || s_list.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::invalid("s_list must be non-empty, finite, positive"));
    }
    if s_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("s_list must be strictly decreasing"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }

    let t0 = grid.t(0);
    let mut step_of = Vec::with_capacity(s_list.len());
    for &s in s_list {
        step_of.push(grid.index_of(t0 + s)?);
    }

    // closed-form short-time margin at t0
    let bx = set_x.eval_b(t0, xi)?;
    let bxb = set_xbar.eval_b(t0, eta)?;
    let dh = set_x
        .eval_h(i0, t0, xi)?
        .sub(&set_xbar.eval_h(i0, t0, eta)?);
    let direct = bx[i0] - bxb[i0] + dh.pair(gamma);

    let policy = crate::scenario::VolatilityPolicy::constant(gamma.clone(), bounds.clone())?;
    let kernel = PairKernel::new(set_x, set_xbar, xi, eta, grid)?;
    let batch = drive(&policy, grid, n_paths, seed);
    let mut slot_of = vec![usize::MAX; grid.n_steps() + 1];
    for (slot, &k) in step_of.iter().enumerate() {
        slot_of[k] = slot;
    }
    let mut gaps = vec![vec![0.0; n_paths]; s_list.len()];
    for p in 0..n_paths {
        let driver = batch.path(p);
        kernel.run_path(p, &driver, |k, _, x, xbar| {
            let slot = slot_of[k];
            if slot != usize::MAX {
                gaps[slot][p] = x[i0] - xbar[i0];
            }
        })?;
    }

    let n = n_paths as f64;
    let mut points = Vec::with_capacity(s_list.len());
    for (slot, &s) in s_list.iter().enumerate() {
        let mean = pairwise_sum(&gaps[slot]) / n;
        let se = if n_paths < 2 {
            0.0
        } else {
            let sq: Vec<f64> = gaps[slot].iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&sq) / (n - 1.0)).sqrt() / n.sqrt()
        };
        points.push(SlopePoint { s, gap_mean: mean, gap_se: se, quotient: mean / s, quotient_se: se / s });
    }

    let (slope, slope_se) = extrapolate_quotients(&points)?;
    Ok(DriftProbe { points, slope, slope_se, direct })
}

/// Least-squares polynomial fit of the quotients in s (degree up to 2);
/// the intercept estimates the s -> 0 limit. The intercept SE combines
/// the per-point Monte Carlo errors pushed through the fit with the
/// residual-based OLS error, floored at 1e-12.
fn extrapolate_quotients(points: &[SlopePoint]) -> Result<(f64, f64)> {
    let k = points.len();
    let p = k.min(3);
    // normal matrix C[a][b] = sum_r s_r^(a+b), rhs[a] = sum_r s_r^a q_r
    let mut c = SymMatrix::zero(p);
    let mut rhs = vec![0.0; p];
    for pt in points {
        for a in 0..p {
            for b in a..p {
                c.set_sym(a, b, c.get(a, b) + pt.s.powi((a + b) as i32));
            }
            rhs[a] += pt.s.powi(a as i32) * pt.quotient;
        }
    }
    let eig = c.eigh();
    let lam_max = eig.values.iter().cloned().fold(0.0, f64::max);
    if lam_max <= 0.0 {
        return Err(Error::Numerical("degenerate quotient fit".into()));
    }
    let cutoff = 1e-12 * lam_max;
    // pseudo-inverse of the normal matrix
    let mut cinv = vec![0.0; p * p];
    for (e, &lam) in eig.values.iter().enumerate() {
        if lam <= cutoff {
            continue;
        }
        let v = &eig.vectors[e];
        for a in 0..p {
            for b in 0..p {
                cinv[a * p + b] += v[a] * v[b] / lam;
            }
        }
    }
    let coeff: Vec<f64> = (0..p)
        .map(|a| (0..p).map(|b| cinv[a * p + b] * rhs[b]).sum())
        .collect();
    let slope = coeff[0];

    // Monte Carlo variance pushed through the linear solve
    let mut var_prop = 0.0;
    for pt in points {
        let weight: f64 = (0..p).map(|b| cinv[b] * pt.s.powi(b as i32)).sum();
        var_prop += (weight * pt.quotient_se).powi(2);
    }
    // residual variance when the fit is overdetermined
    let mut var_ols = 0.0;
    if k > p {
        let mut ss = 0.0;
        for pt in points {
            let fitted: f64 = (0..p).map(|a| coeff[a] * pt.s.powi(a as i32)).sum();
            ss += (pt.quotient - fitted).powi(2);
        }
        var_ols = ss / (k - p) as f64 * cinv[0];
    }
    Ok((slope, (var_prop + var_ols).sqrt().max(1e-12)))
}
