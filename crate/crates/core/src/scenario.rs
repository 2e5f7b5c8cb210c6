//! Admissible volatility policies and scenario-wise driver generation.
//!
//! A policy selects, at each step, a matrix theta with theta*theta'
//! inside the volatility box. Driving a policy over a time grid yields,
//! per path and step, the Brownian increment dW, the driver increment
//! dB = theta dW, and the quadratic-variation increment dQV = gamma dt.
//! dQV uses the policy's stored gamma rather than theta*theta', so box
//! membership and the telescoped identity sum dQV = (T - t0) gamma are
//! exact by construction instead of holding up to a square-root rounding.

use crate::bounds::VolBounds;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::SymMatrix;
use crate::rng::CounterRng;

/// One admissible (gamma, theta = gamma^{1/2}) pair.
#[derive(Debug, Clone)]
struct Regime {
    gamma: SymMatrix,
    theta: SymMatrix,
}

impl Regime {
    fn new(gamma: SymMatrix, bounds: &VolBounds, context: &str) -> Result<Self> {
        bounds.check_in_box(&gamma, 1e-10, context)?;
        let theta = gamma.sqrt_psd()?;
        Ok(Regime { gamma, theta })
    }
}

#[derive(Debug, Clone)]
enum PolicyKind {
    Constant(Regime),
    /// `switch_times[k]` is when regime k+1 takes over; strictly
    /// increasing, one fewer than the regimes.
    PiecewiseConstant { switch_times: Vec<f64>, regimes: Vec<Regime> },
    /// Low regime while the running driver component stays below the
    /// threshold, high regime once at or above it.
    FeedbackThreshold { component: usize, threshold: f64, low: Regime, high: Regime },
}

/// A progressively measurable volatility selection from the parametric
/// family {constant, piecewise-constant, feedback-threshold}.
#[derive(Debug, Clone)]
pub struct VolatilityPolicy {
    kind: PolicyKind,
    bounds: VolBounds,
}

impl VolatilityPolicy {
    pub fn constant(gamma: SymMatrix, bounds: VolBounds) -> Result<Self> {
        check_dim(&gamma, &bounds)?;
        let regime = Regime::new(gamma, &bounds, "constant")?;
        Ok(VolatilityPolicy { kind: PolicyKind::Constant(regime), bounds })
    }

    pub fn piecewise_constant(
        switch_times: Vec<f64>,
        gammas: Vec<SymMatrix>,
        bounds: VolBounds,
    ) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::invalid("piecewise policy needs at least one matrix"));
        }
        if switch_times.len() + 1 != gammas.len() {
            return Err(Error::invalid(format!(
                "{} switch times require {} matrices, got {}",
                switch_times.len(),
                switch_times.len() + 1,
                gammas.len()
            )));
        }
        if switch_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("switch times must be finite"));
        }
        if switch_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("switch times must be strictly increasing"));
        }
        let regimes = gammas
            .into_iter()
            .enumerate()
            .map(|(k, g)| {
                check_dim(&g, &bounds)?;
                Regime::new(g, &bounds, &format!("piecewise regime {k}"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VolatilityPolicy {
            kind: PolicyKind::PiecewiseConstant { switch_times, regimes },
            bounds,
        })
    }

    pub fn feedback_threshold(
        component: usize,
        threshold: f64,
        low: SymMatrix,
        high: SymMatrix,
        bounds: VolBounds,
    ) -> Result<Self> {
        if component >= bounds.m() {
            return Err(Error::invalid(format!(
                "feedback component {component} outside 0..{}",
                bounds.m()
            )));
        }
        if !threshold.is_finite() {
            return Err(Error::invalid("feedback threshold must be finite"));
        }
        check_dim(&low, &bounds)?;
        check_dim(&high, &bounds)?;
        let low = Regime::new(low, &bounds, "feedback low")?;
        let high = Regime::new(high, &bounds, "feedback high")?;
        Ok(VolatilityPolicy {
            kind: PolicyKind::FeedbackThreshold { component, threshold, low, high },
            bounds,
        })
    }

    pub fn bounds(&self) -> &VolBounds {
        &self.bounds
    }

    pub fn m(&self) -> usize {
        self.bounds.m()
    }

    /// The regime in force at time `t` with running driver value `b`
    /// (the value before the step, preserving non-anticipativity).
    fn regime_at(&self, t: f64, b: &[f64]) -> &Regime {
        match &self.kind {
            PolicyKind::Constant(r) => r,
            PolicyKind::PiecewiseConstant { switch_times, regimes } => {
                let k = switch_times.partition_point(|&s| s <= t);
                &regimes[k]
            }
            PolicyKind::FeedbackThreshold { component, threshold, low, high } => {
                if b[*component] < *threshold {
                    low
                } else {
                    high
                }
            }
        }
    }

    /// Comma-free one-line description, safe for CSV fields.
    pub fn label(&self) -> String {
        match &self.kind {
            PolicyKind::Constant(r) => matrix_label(&r.gamma),
            PolicyKind::PiecewiseConstant { switch_times, regimes } => {
                let mut s = String::from("pw(");
                s.push_str(&matrix_label(&regimes[0].gamma));
                for (t, r) in switch_times.iter().zip(&regimes[1..]) {
                    s.push_str(&format!("@{t}{}", matrix_label(&r.gamma)));
                }
                s.push(')');
                s
            }
            PolicyKind::FeedbackThreshold { component, threshold, low, high } => {
                format!(
                    "fb(b{}<{threshold} {} else {})",
                    component + 1,
                    matrix_label(&low.gamma),
                    matrix_label(&high.gamma)
                )
            }
        }
    }
}

fn check_dim(gamma: &SymMatrix, bounds: &VolBounds) -> Result<()> {
    if gamma.dim() != bounds.m() {
        return Err(Error::invalid(format!(
            "policy matrix is {}x{} but the driving dimension is {}",
            gamma.dim(),
            gamma.dim(),
            bounds.m()
        )));
    }
    Ok(())
}

fn matrix_label(g: &SymMatrix) -> String {
    let m = g.dim();
    let mut s = String::from("[");
    for i in 0..m {
        if i > 0 {
            s.push(';');
        }
        for j in 0..m {
            if j > 0 {
                s.push(' ');
            }
            s.push_str(&format!("{}", g.get(i, j)));
        }
    }
    s.push(']');
    s
}

/// All increments of one generated path, step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverPath {
    m: usize,
    n_steps: usize,
    /// n_steps x m
    dw: Vec<f64>,
    /// n_steps x m
    db: Vec<f64>,
    /// n_steps x m x m, each block symmetric row-major
    dqv: Vec<f64>,
}

impl DriverPath {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dw_at(&self, k: usize) -> &[f64] {
        &self.dw[k * self.m..(k + 1) * self.m]
    }

    pub fn db_at(&self, k: usize) -> &[f64] {
        &self.db[k * self.m..(k + 1) * self.m]
    }

    /// Row-major symmetric m x m block.
    pub fn dqv_at(&self, k: usize) -> &[f64] {
        let sz = self.m * self.m;
        &self.dqv[k * sz..(k + 1) * sz]
    }

    /// Driver value B(T) - B(t0) by telescoping.
    pub fn b_total(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.m];
        for k in 0..self.n_steps {
            for (a, v) in acc.iter_mut().zip(self.db_at(k)) {
                *a += v;
            }
        }
        acc
    }

    /// Quadratic variation <B>(T) - <B>(t0) by telescoping, row-major.
    pub fn qv_total(&self) -> Vec<f64> {
        let sz = self.m * self.m;
        let mut acc = vec![0.0; sz];
        for k in 0..self.n_steps {
            for (a, v) in acc.iter_mut().zip(self.dqv_at(k)) {
                *a += v;
            }
        }
        acc
    }

    /// Running driver value before each step: entry k holds
    /// B(t_k) - B(t0), so entry 0 is zero.
    pub fn b_before(&self, k: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.m];
        for s in 0..k {
            for (a, v) in acc.iter_mut().zip(self.db_at(s)) {
                *a += v;
            }
        }
        acc
    }

    /// Merge consecutive increments in blocks of `factor`. The coarse
    /// path has the same totals exactly; used for step-halving studies.
    pub fn coarsen(&self, factor: usize) -> Result<DriverPath> {
        if factor < 1 || self.n_steps % factor != 0 {
            return Err(Error::invalid(format!(
                "factor {factor} does not divide {} steps",
                self.n_steps
            )));
        }
        let n = self.n_steps / factor;
        let sz = self.m * self.m;
        let mut dw = vec![0.0; n * self.m];
        let mut db = vec![0.0; n * self.m];
        let mut dqv = vec![0.0; n * sz];
        for k in 0..self.n_steps {
            let c = k / factor;
            for j in 0..self.m {
                dw[c * self.m + j] += self.dw[k * self.m + j];
                db[c * self.m + j] += self.db[k * self.m + j];
            }
            for j in 0..sz {
                dqv[c * sz + j] += self.dqv[k * sz + j];
            }
        }
        Ok(DriverPath { m: self.m, n_steps: n, dw, db, dqv })
    }
}

/// A deterministic family of driver paths. Paths are generated on
/// demand from counter-based streams keyed by (seed, path, step), so
/// the batch is cheap to hold and identical regardless of the order or
/// concurrency in which paths are materialized.
#[derive(Debug, Clone)]
pub struct DriverBatch {
    policy: VolatilityPolicy,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
}

impl DriverBatch {
    pub fn policy(&self) -> &VolatilityPolicy {
        &self.policy
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Materialize path `p`.
    pub fn path(&self, p: usize) -> DriverPath {
        assert!(p < self.n_paths, "path {p} out of range 0..{}", self.n_paths);
        let m = self.policy.m();
        let n_steps = self.grid.n_steps();
        let dt = self.grid.dt();
        let sqrt_dt = dt.sqrt();
        let sz = m * m;
        let mut dw = vec![0.0; n_steps * m];
        let mut db = vec![0.0; n_steps * m];
        let mut dqv = vec![0.0; n_steps * sz];
        let mut b_running = vec![0.0; m];
        let mut z = vec![0.0; m];
        for k in 0..n_steps {
            let mut rng = CounterRng::for_step(self.seed, p as u64, k as u64);
            rng.fill_normals(&mut z);
            let dw_k = &mut dw[k * m..(k + 1) * m];
            for (w, &g) in dw_k.iter_mut().zip(&z) {
                *w = sqrt_dt * g;
            }
            let regime = self.policy.regime_at(self.grid.t(k), &b_running);
            regime.theta.mul_vec(dw_k, &mut db[k * m..(k + 1) * m]);
            for (q, &g) in dqv[k * sz..(k + 1) * sz].iter_mut().zip(regime.gamma.entries()) {
                *q = g * dt;
            }
            for (b, v) in b_running.iter_mut().zip(&db[k * m..(k + 1) * m]) {
                *b += v;
            }
        }
        DriverPath { m, n_steps, dw, db, dqv }
    }
}

/// Generate the scenario family for `policy` on `grid`.
pub fn drive(policy: &VolatilityPolicy, grid: &TimeGrid, n_paths: usize, seed: u64) -> DriverBatch {
    DriverBatch { policy: policy.clone(), grid: grid.clone(), n_paths, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bounds(m: usize) -> VolBounds {
        VolBounds::new(1.0, 2.0, m).unwrap()
    }

    fn grid(t_end: f64, dt: f64) -> TimeGrid {
        TimeGrid::new(0.0, t_end, dt, 0.0).unwrap()
    }

    #[test]
    fn constant_policy_corners_and_rejection() {
        // top corner: gamma = hi^2 I, theta = hi I exactly
        let p = VolatilityPolicy::constant(SymMatrix::scaled_identity(2, 4.0), bounds(2)).unwrap();
        let r = p.regime_at(0.0, &[0.0, 0.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(r.theta.get(i, j), if i == j { 2.0 } else { 0.0 });
            }
        }

        // mixed corner: diag(lo^2, hi^2) -> theta = diag(lo, hi)
        let p =
            VolatilityPolicy::constant(SymMatrix::from_diag(&[1.0, 4.0]), bounds(2)).unwrap();
        let r = p.regime_at(0.0, &[0.0, 0.0]);
        assert_eq!(r.theta.get(0, 0), 1.0);
        assert_eq!(r.theta.get(1, 1), 2.0);
        assert_eq!(r.theta.get(0, 1), 0.0);

        // above the box: named eigenvalue in the admissibility error
        let err = VolatilityPolicy::constant(SymMatrix::scaled_identity(2, 5.0), bounds(2))
            .unwrap_err();
        match err {
            Error::Admissibility { eigenvalue, hi, .. } => {
                assert_abs_diff_eq!(eigenvalue, 5.0, epsilon = 1e-12);
                assert_eq!(hi, 4.0);
            }
            other => panic!("unexpected {other:?}"),
        }

        // dimension mismatch
        assert!(VolatilityPolicy::constant(SymMatrix::identity(3), bounds(2)).is_err());
    }

    #[test]
    fn piecewise_validation_and_schedule() {
        let g1 = SymMatrix::scaled_identity(1, 1.0);
        let g4 = SymMatrix::scaled_identity(1, 4.0);
        let p = VolatilityPolicy::piecewise_constant(
            vec![0.5],
            vec![g1.clone(), g4.clone()],
            bounds(1),
        )
        .unwrap();
        assert_eq!(p.regime_at(0.0, &[0.0]).gamma.get(0, 0), 1.0);
        assert_eq!(p.regime_at(0.49, &[0.0]).gamma.get(0, 0), 1.0);
        // switch time itself belongs to the later regime
        assert_eq!(p.regime_at(0.5, &[0.0]).gamma.get(0, 0), 4.0);
        assert_eq!(p.regime_at(2.0, &[0.0]).gamma.get(0, 0), 4.0);

        assert!(VolatilityPolicy::piecewise_constant(vec![], vec![], bounds(1)).is_err());
        assert!(VolatilityPolicy::piecewise_constant(
            vec![0.5, 0.5],
            vec![g1.clone(), g4.clone(), g1.clone()],
            bounds(1)
        )
        .is_err());
        assert!(
            VolatilityPolicy::piecewise_constant(vec![0.5], vec![g1.clone()], bounds(1)).is_err()
        );
        assert!(VolatilityPolicy::piecewise_constant(
            vec![f64::NAN],
            vec![g1.clone(), g4],
            bounds(1)
        )
        .is_err());
    }

    #[test]
    fn feedback_switches_on_running_driver() {
        let low = SymMatrix::scaled_identity(1, 1.0);
        let high = SymMatrix::scaled_identity(1, 4.0);
        let p = VolatilityPolicy::feedback_threshold(0, 0.25, low, high, bounds(1)).unwrap();
        assert_eq!(p.regime_at(0.0, &[0.0]).gamma.get(0, 0), 1.0);
        assert_eq!(p.regime_at(0.0, &[0.24]).gamma.get(0, 0), 1.0);
        assert_eq!(p.regime_at(0.0, &[0.25]).gamma.get(0, 0), 4.0);
        assert_eq!(p.regime_at(0.0, &[7.0]).gamma.get(0, 0), 4.0);

        assert!(VolatilityPolicy::feedback_threshold(
            1,
            0.0,
            SymMatrix::identity(1),
            SymMatrix::identity(1),
            bounds(1)
        )
        .is_err());
    }

    #[test]
    fn labels_are_comma_free_and_descriptive() {
        let g = SymMatrix::from_rows(2, &[2.5, 0.5, 0.5, 2.5]).unwrap();
        let p = VolatilityPolicy::constant(g.clone(), bounds(2)).unwrap();
        assert_eq!(p.label(), "[2.5 0.5;0.5 2.5]");

        let pw = VolatilityPolicy::piecewise_constant(
            vec![0.5],
            vec![SymMatrix::scaled_identity(1, 1.0), SymMatrix::scaled_identity(1, 4.0)],
            bounds(1),
        )
        .unwrap();
        assert_eq!(pw.label(), "pw([1]@0.5[4])");

        let fb = VolatilityPolicy::feedback_threshold(
            0,
            0.25,
            SymMatrix::scaled_identity(1, 1.0),
            SymMatrix::scaled_identity(1, 4.0),
            bounds(1),
        )
        .unwrap();
        assert_eq!(fb.label(), "fb(b1<0.25 [1] else [4])");

        for label in [p.label(), pw.label(), fb.label()] {
            assert!(!label.contains(','), "label {label} contains a comma");
        }
    }

    #[test]
    fn batches_are_deterministic_and_lazy() {
        let g = SymMatrix::from_rows(2, &[2.5, 0.5, 0.5, 2.5]).unwrap();
        let p = VolatilityPolicy::constant(g, bounds(2)).unwrap();
        let tg = grid(1.0, 0.0625);
        let a = drive(&p, &tg, 8, 42);
        let b = drive(&p, &tg, 8, 42);
        // bit-identical regardless of materialization order
        for idx in [7usize, 0, 3] {
            assert_eq!(a.path(idx), b.path(idx));
        }
        // different seeds decorrelate
        let c = drive(&p, &tg, 8, 43);
        assert_ne!(a.path(0), c.path(0));

        let empty = drive(&p, &tg, 0, 1);
        assert_eq!(empty.n_paths(), 0);
    }

    #[test]
    fn constant_policy_qv_telescopes_exactly() {
        // dyadic gamma entries and power-of-two dt make gamma * dt and the
        // telescoped sum exact in floating point
        let g = SymMatrix::from_rows(2, &[2.5, 0.5, 0.5, 2.5]).unwrap();
        let p = VolatilityPolicy::constant(g.clone(), bounds(2)).unwrap();
        let tg = grid(1.0, 0.0625);
        let batch = drive(&p, &tg, 4, 7);
        for idx in 0..4 {
            let path = batch.path(idx);
            let qv = path.qv_total();
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(qv[i * 2 + j], g.get(i, j), "entry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn discrete_qv_stays_in_the_box() {
        let low = SymMatrix::scaled_identity(2, 1.0);
        let high = SymMatrix::from_rows(2, &[3.0, 1.0, 1.0, 3.0]).unwrap();
        let p = VolatilityPolicy::feedback_threshold(0, 0.0, low, high, bounds(2)).unwrap();
        let tg = grid(1.0, 0.125);
        let batch = drive(&p, &tg, 16, 5);
        let vb = bounds(2);
        let mut saw_low = false;
        let mut saw_high = false;
        for idx in 0..16 {
            let path = batch.path(idx);
            for k in 0..path.n_steps() {
                let blk = path.dqv_at(k);
                let mut g = SymMatrix::zero(2);
                for i in 0..2 {
                    for j in i..2 {
                        g.set_sym(i, j, blk[i * 2 + j] / tg.dt());
                    }
                }
                vb.check_in_box(&g, 1e-10, "generated step").unwrap();
                if blk[1] == 0.0 {
                    saw_low = true;
                } else {
                    saw_high = true;
                }
            }
        }
        // the feedback threshold at zero must trigger both regimes
        assert!(saw_low && saw_high);
    }

    #[test]
    fn driver_matches_theta_times_noise() {
        let g = SymMatrix::from_rows(2, &[2.5, 0.5, 0.5, 2.5]).unwrap();
        let p = VolatilityPolicy::constant(g, bounds(2)).unwrap();
        let tg = grid(0.5, 0.125);
        let batch = drive(&p, &tg, 3, 9);
        let theta = batch.policy.regime_at(0.0, &[0.0, 0.0]).theta.clone();
        for idx in 0..3 {
            let path = batch.path(idx);
            let mut out = vec![0.0; 2];
            for k in 0..path.n_steps() {
                theta.mul_vec(path.dw_at(k), &mut out);
                assert_eq!(out, path.db_at(k));
            }
        }
    }

    #[test]
    fn truncating_the_horizon_preserves_the_prefix() {
        let p = VolatilityPolicy::constant(SymMatrix::scaled_identity(1, 2.0), bounds(1)).unwrap();
        let long = drive(&p, &grid(1.0, 0.125), 4, 11);
        let short = drive(&p, &grid(0.5, 0.125), 4, 11);
        for idx in 0..4 {
            let lp = long.path(idx);
            let sp = short.path(idx);
            for k in 0..sp.n_steps() {
                assert_eq!(lp.dw_at(k), sp.dw_at(k));
                assert_eq!(lp.db_at(k), sp.db_at(k));
                assert_eq!(lp.dqv_at(k), sp.dqv_at(k));
            }
        }
    }

    #[test]
    fn coarsening_preserves_totals_exactly() {
        let p = VolatilityPolicy::constant(SymMatrix::scaled_identity(1, 2.5), bounds(1)).unwrap();
        let batch = drive(&p, &grid(1.0, 0.0625), 2, 3);
        let fine = batch.path(1);
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.n_steps(), 4);
        assert_eq!(coarse.qv_total(), fine.qv_total());
        // totals agree to rounding (sums reassociate)
        let bf = fine.b_total();
        let bc = coarse.b_total();
        assert_abs_diff_eq!(bf[0], bc[0], epsilon = 1e-12);

        assert!(fine.coarsen(5).is_err());
        assert!(fine.coarsen(0).is_err());
    }

    #[test]
    fn sample_covariance_matches_gamma() {
        // B(T) = theta W(T) with W(T) ~ N(0, I) at T = 1, so
        // cov B(T) = gamma; sample covariance of n paths has entrywise
        // standard error sqrt((g_ii g_jj + g_ij^2) / n)
        let g = SymMatrix::from_diag(&[1.0, 2.0]);
        let p = VolatilityPolicy::constant(g.clone(), bounds(2)).unwrap();
        let tg = grid(1.0, 0.0625);
        let n = 100_000;
        let batch = drive(&p, &tg, n, 2024);
        let mut acc = [0.0f64; 4];
        for idx in 0..n {
            let b = batch.path(idx).b_total();
            acc[0] += b[0] * b[0];
            acc[1] += b[0] * b[1];
            acc[2] += b[1] * b[0];
            acc[3] += b[1] * b[1];
        }
        for (i, j, idx) in [(0, 0, 0), (0, 1, 1), (1, 1, 3)] {
            let cov = acc[idx] / n as f64;
            let se = ((g.get(i, i) * g.get(j, j) + g.get(i, j).powi(2)) / n as f64).sqrt();
            assert!(
                (cov - g.get(i, j)).abs() <= 3.0 * se,
                "cov[{i}{j}] = {cov}, want {} within {}",
                g.get(i, j),
                3.0 * se
            );
        }
    }

    #[test]
    fn b_before_is_the_running_prefix_sum() {
        let p = VolatilityPolicy::constant(SymMatrix::scaled_identity(1, 4.0), bounds(1)).unwrap();
        let path = drive(&p, &grid(0.5, 0.125), 1, 6).path(0);
        assert_eq!(path.b_before(0), vec![0.0]);
        let mut acc = 0.0;
        for k in 0..path.n_steps() {
            assert_eq!(path.b_before(k), vec![acc]);
            acc += path.db_at(k)[0];
        }
        assert_eq!(path.b_total(), vec![acc]);
    }
}
