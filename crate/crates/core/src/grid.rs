//! Uniform time grids.

use crate::error::{Error, Result};

/// Uniform grid on [t0, t_end] with step dt, plus the delay length r0.
///
/// dt must tile both the horizon and the delay: segment lookups at lag r0
/// then land exactly on grid points and the segment ring buffer needs no
/// interpolation. Grid times are computed as t0 + k*dt (multiplication,
/// not accumulation) so t(k) is reproducible for any k in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    dt: f64,
    r0: f64,
    n_steps: usize,
    n_lag: usize,
}

const REL_TOL: f64 = 1e-12;

fn divides(step: f64, span: f64) -> Option<usize> {
    let n = (span / step).round();
    if n < 0.0 || n > 1e15 {
        return None;
    }
    let n_int = n as usize;
    if (n_int as f64 * step - span).abs() <= REL_TOL * span.abs().max(1.0) {
        Some(n_int)
    } else {
        None
    }
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64, r0: f64) -> Result<Self> {
        if ![t0, t_end, dt, r0].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("time grid parameters must be finite"));
        }
        if t0 < 0.0 {
            return Err(Error::invalid(format!("t0 must be >= 0, got {t0}")));
        }
        if t_end <= t0 {
            return Err(Error::invalid(format!(
                "t_end must exceed t0, got t0 = {t0}, t_end = {t_end}"
            )));
        }
        if dt <= 0.0 {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if r0 < 0.0 {
            return Err(Error::invalid(format!("r0 must be >= 0, got {r0}")));
        }
        let n_steps = divides(dt, t_end - t0).filter(|&n| n >= 1).ok_or_else(|| {
            Error::invalid(format!(
                "dt = {dt} does not tile the horizon [{t0}, {t_end}]"
            ))
        })?;
        let n_lag = divides(dt, r0).ok_or_else(|| {
            Error::invalid(format!("dt = {dt} does not divide the delay r0 = {r0}"))
        })?;
        Ok(TimeGrid {
            t0,
            t_end,
            dt,
            r0,
            n_steps,
            n_lag,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid intervals spanned by the delay (0 when r0 = 0).
    pub fn n_lag(&self) -> usize {
        self.n_lag
    }

    /// k-th grid time, k in 0..=n_steps.
    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Grid index of a time, rejecting off-grid values.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = ((t - self.t0) / self.dt).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return Err(Error::invalid(format!(
                "t = {t} is outside the grid [{}, {}]",
                self.t0, self.t_end
            )));
        }
        let k = k as usize;
        if (self.t(k) - t).abs() > REL_TOL * t.abs().max(1.0) {
            return Err(Error::invalid(format!("t = {t} is not a grid point")));
        }
        Ok(k)
    }

    /// Same span and delay at half the step.
    pub fn refined(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t0, self.t_end, self.dt * 0.5, self.r0)
    }
}
