//! Euler scheme for the coupled pair of path-dependent equations.
//!
//! Both equations consume the same driver increments (common-noise
//! coupling), each reading its own coefficients off its own segment:
//!
//! ```text
//! X(t_{k+1}) = X(t_k) + b(t_k, X_seg) dt
//!            + sum_i <h^i(t_k, X_seg), dQV_k>
//!            + sigma(t_k, X_seg) dB_k
//! ```
//!
//! with coefficients evaluated at the left endpoint. Segments are served
//! from a per-path ring buffer holding the last r0/dt + 1 states, so a
//! step costs O(d m^2) plus coefficient evaluation and no copying.

use crate::coeffspec::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::scenario::{DriverBatch, DriverPath};
use crate::segment::{Segment, SegmentPath};

/// Hard state-magnitude cap; beyond this the step reports divergence
/// instead of running to infinity.
const DIVERGENCE_CAP: f64 = 1e12;

/// Which equation of the coupled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Xbar,
}

/// Rolling window of the most recent r0/dt + 1 states of one equation.
struct Ring {
    d: usize,
    n_lag: usize,
    r0: f64,
    /// (n_lag + 1) slots of d entries; `head` is the oldest slot.
    buf: Vec<f64>,
    head: usize,
}

impl Ring {
    fn from_segment(seg: &SegmentPath) -> Ring {
        let d = seg.d();
        let n_lag = seg.n_lag();
        let mut buf = vec![0.0; (n_lag + 1) * d];
        for slot in 0..=n_lag {
            for comp in 0..d {
                buf[slot * d + comp] = seg.sample(comp, slot);
            }
        }
        Ring { d, n_lag, r0: seg.r0(), buf, head: 0 }
    }

    /// Overwrite the oldest slot with `state` and advance.
    fn push(&mut self, state: &[f64]) {
        let base = self.head * self.d;
        self.buf[base..base + self.d].copy_from_slice(state);
        self.head = (self.head + 1) % (self.n_lag + 1);
    }
}

impl Segment for Ring {
    fn d(&self) -> usize {
        self.d
    }

    fn r0(&self) -> f64 {
        self.r0
    }

    fn n_lag(&self) -> usize {
        self.n_lag
    }

    fn sample(&self, comp: usize, j: usize) -> f64 {
        let slot = (self.head + j) % (self.n_lag + 1);
        self.buf[slot * self.d + comp]
    }
}

/// Validated stepping machine for one coefficient pair and one grid.
/// Drives one path at a time; the observer sees every grid state.
pub struct PairKernel<'a> {
    set_x: &'a CoefficientSet,
    set_xbar: &'a CoefficientSet,
    xi: &'a SegmentPath,
    xibar: &'a SegmentPath,
    grid: &'a TimeGrid,
    d: usize,
    m: usize,
}

impl<'a> PairKernel<'a> {
    pub fn new(
        set_x: &'a CoefficientSet,
        set_xbar: &'a CoefficientSet,
        xi: &'a SegmentPath,
        xibar: &'a SegmentPath,
        grid: &'a TimeGrid,
    ) -> Result<Self> {
        let d = set_x.d();
        let m = set_x.m();
        if set_xbar.d() != d || set_xbar.m() != m {
            return Err(Error::invalid(format!(
                "coefficient sets disagree: ({d}, {m}) vs ({}, {})",
                set_xbar.d(),
                set_xbar.m()
            )));
        }
        for (name, seg) in [("xi", xi), ("xibar", xibar)] {
            if seg.d() != d {
                return Err(Error::invalid(format!(
                    "{name} has {} components, coefficients expect {d}",
                    seg.d()
                )));
            }
            if seg.n_lag() != grid.n_lag() {
                return Err(Error::invalid(format!(
                    "{name} holds {} lag samples but the grid needs {} (r0/dt)",
                    seg.n_lag(),
                    grid.n_lag()
                )));
            }
            if (seg.r0() - grid.r0()).abs() > 1e-12 * grid.r0().max(1.0) {
                return Err(Error::invalid(format!(
                    "{name} window r0 = {} does not match the grid delay {}",
                    seg.r0(),
                    grid.r0()
                )));
            }
        }
        for (name, set) in [("X", set_x), ("Xbar", set_xbar)] {
            if (set.r0() - grid.r0()).abs() > 1e-12 * grid.r0().max(1.0) {
                return Err(Error::invalid(format!(
                    "{name} coefficients declare r0 = {} but the grid delay is {}",
                    set.r0(),
                    grid.r0()
                )));
            }
        }
        Ok(PairKernel { set_x, set_xbar, xi, xibar, grid, d, m })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.grid
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Run one path. `observe(k, t_k, x, xbar)` fires at every grid
    /// index 0..=n_steps, starting with the initial states at t0.
    /// `path_idx` only labels divergence errors.
    pub fn run_path(
        &self,
        path_idx: usize,
        driver: &DriverPath,
        mut observe: impl FnMut(usize, f64, &[f64], &[f64]),
    ) -> Result<()> {
        if driver.m() != self.m {
            return Err(Error::invalid(format!(
                "driver has {} components, coefficients expect {}",
                driver.m(),
                self.m
            )));
        }
        if driver.n_steps() != self.grid.n_steps() {
            return Err(Error::invalid(format!(
                "driver has {} steps, grid has {}",
                driver.n_steps(),
                self.grid.n_steps()
            )));
        }
        let (d, dt) = (self.d, self.grid.dt());
        let mut ring_x = Ring::from_segment(self.xi);
        let mut ring_xbar = Ring::from_segment(self.xibar);
        let mut x: Vec<f64> = (0..d).map(|c| self.xi.terminal(c)).collect();
        let mut xbar: Vec<f64> = (0..d).map(|c| self.xibar.terminal(c)).collect();
        let mut bx = vec![0.0; d];
        let mut bxbar = vec![0.0; d];
        let mut srow = vec![0.0; self.m];

        observe(0, self.grid.t(0), &x, &xbar);
        for k in 0..self.grid.n_steps() {
            let t = self.grid.t(k);
            let dqv = driver.dqv_at(k);
            let db = driver.db_at(k);

            self.set_x.eval_b_into(t, &ring_x, &mut bx);
            self.set_xbar.eval_b_into(t, &ring_xbar, &mut bxbar);
            for i in 0..d {
                let hp = self.set_x.eval_h_pair(i, t, &ring_x, dqv);
                self.set_x.eval_sigma_row_into(i, t, &ring_x, &mut srow);
                let sd: f64 = srow.iter().zip(db).map(|(s, b)| s * b).sum();
                x[i] = x[i] + bx[i] * dt + hp + sd;

                let hp = self.set_xbar.eval_h_pair(i, t, &ring_xbar, dqv);
                self.set_xbar.eval_sigma_row_into(i, t, &ring_xbar, &mut srow);
                let sd: f64 = srow.iter().zip(db).map(|(s, b)| s * b).sum();
                xbar[i] = xbar[i] + bxbar[i] * dt + hp + sd;
            }

            let mag = x
                .iter()
                .chain(xbar.iter())
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            if !mag.is_finite() || mag > DIVERGENCE_CAP {
                return Err(Error::Divergence {
                    path: path_idx,
                    t: self.grid.t(k + 1),
                    magnitude: mag,
                });
            }

            ring_x.push(&x);
            ring_xbar.push(&xbar);
            observe(k + 1, self.grid.t(k + 1), &x, &xbar);
        }
        Ok(())
    }
}

/// All recorded states of both equations over a driver batch, including
/// the initial segments on [t0 - r0, t0].
#[derive(Debug, Clone)]
pub struct TrajectoryPair {
    grid: TimeGrid,
    d: usize,
    n_paths: usize,
    /// Per path: n_lag + n_steps + 1 states of d entries, oldest first.
    x: Vec<f64>,
    xbar: Vec<f64>,
}

impl TrajectoryPair {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// Recorded points per path, spanning [t0 - r0, T].
    pub fn n_points(&self) -> usize {
        self.grid.n_lag() + self.grid.n_steps() + 1
    }

    /// Time of record index `idx` (0 is t0 - r0).
    pub fn time_at(&self, idx: usize) -> f64 {
        let n_lag = self.grid.n_lag();
        if idx < n_lag {
            self.grid.t(0) - (n_lag - idx) as f64 * self.grid.dt()
        } else {
            self.grid.t(idx - n_lag)
        }
    }

    /// State of one side at record index `idx`.
    pub fn state(&self, side: Side, path: usize, idx: usize) -> &[f64] {
        debug_assert!(path < self.n_paths && idx < self.n_points());
        let base = (path * self.n_points() + idx) * self.d;
        let buf = match side {
            Side::X => &self.x,
            Side::Xbar => &self.xbar,
        };
        &buf[base..base + self.d]
    }

    /// State at simulation grid index `k` in 0..=n_steps (time t0 + k dt).
    pub fn state_at_step(&self, side: Side, path: usize, k: usize) -> &[f64] {
        self.state(side, path, self.grid.n_lag() + k)
    }

    /// The recorded segment over [t - r0, t] for a grid time t.
    pub fn segment_at(&self, side: Side, path: usize, t: f64) -> Result<SegmentPath> {
        let k = self.grid.index_of(t)?;
        let n_lag = self.grid.n_lag();
        let mut values = Vec::with_capacity(self.d * (n_lag + 1));
        for comp in 0..self.d {
            for j in 0..=n_lag {
                values.push(self.state(side, path, k + j)[comp]);
            }
        }
        SegmentPath::new(self.d, self.grid.r0(), n_lag, values)
    }
}

/// Simulate every path of `batch` under both coefficient sets with
/// common noise and record the full trajectories.
pub fn simulate_pair(
    set_x: &CoefficientSet,
    set_xbar: &CoefficientSet,
    xi: &SegmentPath,
    xibar: &SegmentPath,
    batch: &DriverBatch,
) -> Result<TrajectoryPair> {
    let grid = batch.grid();
    let kernel = PairKernel::new(set_x, set_xbar, xi, xibar, grid)?;
    if batch.policy().m() != set_x.m() {
        return Err(Error::invalid(format!(
            "batch drives {} components, coefficients expect {}",
            batch.policy().m(),
            set_x.m()
        )));
    }
    let d = set_x.d();
    let n_paths = batch.n_paths();
    let n_lag = grid.n_lag();
    let n_points = n_lag + grid.n_steps() + 1;
    let mut x = vec![0.0; n_paths * n_points * d];
    let mut xbar = vec![0.0; n_paths * n_points * d];

    for p in 0..n_paths {
        let base = p * n_points * d;
        // pin the initial segments exactly
        for comp in 0..d {
            for j in 0..=n_lag {
                x[base + j * d + comp] = xi.sample(comp, j);
                xbar[base + j * d + comp] = xibar.sample(comp, j);
            }
        }
        let driver = batch.path(p);
        let (xs, xbars) = (&mut x, &mut xbar);
        kernel.run_path(p, &driver, |k, _t, xv, xbarv| {
            let at = base + (n_lag + k) * d;
            xs[at..at + d].copy_from_slice(xv);
            xbars[at..at + d].copy_from_slice(xbarv);
        })?;
    }

    Ok(TrajectoryPair { grid: grid.clone(), d, n_paths, x, xbar })
}
