//! Path segments: the recent history a delay equation feeds on.
//!
//! A segment is an R^d-valued path on [-r0, 0], stored as uniform samples
//! with piecewise-linear interpolation in between. The simulator keeps its
//! state in ring buffers rather than owned arrays, so evaluation code is
//! written against the [`Segment`] trait and both representations share it.

use crate::error::{Error, Result};

/// Read access to a uniformly sampled segment on [-r0, 0].
///
/// Sample j of component `comp` sits at s_j = -r0 + j * (r0 / n_lag);
/// j = n_lag is the terminal value at s = 0. When r0 = 0 the segment is a
/// single point and n_lag = 0.
pub trait Segment {
    fn d(&self) -> usize;
    fn r0(&self) -> f64;
    fn n_lag(&self) -> usize;
    fn sample(&self, comp: usize, j: usize) -> f64;

    /// Value of the segment at s = 0.
    #[inline]
    fn terminal(&self, comp: usize) -> f64 {
        self.sample(comp, self.n_lag())
    }

    /// Piecewise-linear evaluation at s, clamped to [-r0, 0]. Offsets that
    /// land within 1e-9 of a sample index snap to the stored sample, so
    /// grid-aligned lags reproduce samples exactly despite rounding in the
    /// offset arithmetic.
    fn eval_at(&self, comp: usize, s: f64) -> f64 {
        let n = self.n_lag();
        if n == 0 {
            return self.sample(comp, 0);
        }
        let r0 = self.r0();
        let s = s.clamp(-r0, 0.0);
        let pos = (s + r0) / (r0 / n as f64);
        let j0 = pos.floor();
        let frac = pos - j0;
        let j0 = (j0 as usize).min(n);
        if frac <= 1e-9 || j0 == n {
            self.sample(comp, j0)
        } else if frac >= 1.0 - 1e-9 {
            self.sample(comp, j0 + 1)
        } else {
            (1.0 - frac) * self.sample(comp, j0) + frac * self.sample(comp, j0 + 1)
        }
    }
}

/// Owned segment with samples stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPath {
    d: usize,
    r0: f64,
    n_lag: usize,
    values: Vec<f64>, // values[comp * (n_lag + 1) + j]
}

impl SegmentPath {
    /// `values` is component-major: d blocks of n_lag + 1 samples each.
    pub fn new(d: usize, r0: f64, n_lag: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("segment dimension d must be at least 1"));
        }
        if !r0.is_finite() || r0 < 0.0 {
            return Err(Error::invalid(format!("delay r0 must be >= 0, got {r0}")));
        }
        if r0 == 0.0 && n_lag != 0 {
            return Err(Error::invalid("r0 = 0 requires a single-sample segment"));
        }
        if r0 > 0.0 && n_lag == 0 {
            return Err(Error::invalid("r0 > 0 requires at least two samples"));
        }
        if values.len() != d * (n_lag + 1) {
            return Err(Error::invalid(format!(
                "expected {} samples ({} components x {}), got {}",
                d * (n_lag + 1),
                d,
                n_lag + 1,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("segment samples must be finite"));
        }
        Ok(SegmentPath {
            d,
            r0,
            n_lag,
            values,
        })
    }

    /// Constant segment pinned at `point`.
    /// Segment frozen at one point; the dimension is the point's length.
    pub fn constant(point: &[f64], r0: f64, n_lag: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(point.len() * (n_lag + 1));
        for &x in point {
            values.extend(std::iter::repeat(x).take(n_lag + 1));
        }
        SegmentPath::new(point.len(), r0, n_lag, values)
    }

    /// Build from a sample generator called as `f(component, sample_index)`
    /// in storage order (component-major, oldest sample first).
    pub fn from_fn(
        d: usize,
        r0: f64,
        n_lag: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(d * (n_lag + 1));
        for comp in 0..d {
            for j in 0..=n_lag {
                values.push(f(comp, j));
            }
        }
        SegmentPath::new(d, r0, n_lag, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// New segment with `shift[comp]` added to every sample of each
    /// component.
    pub fn offset_by(&self, shift: &[f64]) -> Result<SegmentPath> {
        if shift.len() != self.d {
            return Err(Error::invalid(format!(
                "expected {} components, got {}",
                self.d,
                shift.len()
            )));
        }
        let mut values = self.values.clone();
        let stride = self.n_lag + 1;
        for (comp, &c) in shift.iter().enumerate() {
            for v in &mut values[comp * stride..(comp + 1) * stride] {
                *v += c;
            }
        }
        SegmentPath::new(self.d, self.r0, self.n_lag, values)
    }

    /// Largest |xi - eta| over components and samples. Because both
    /// segments are piecewise linear on the same sample grid, this equals
    /// the sup-norm distance of the interpolants.
    pub fn sup_distance(&self, other: &SegmentPath) -> Result<f64> {
        check_shapes(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

impl Segment for SegmentPath {
    fn d(&self) -> usize {
        self.d
    }
    fn r0(&self) -> f64 {
        self.r0
    }
    fn n_lag(&self) -> usize {
        self.n_lag
    }
    #[inline]
    fn sample(&self, comp: usize, j: usize) -> f64 {
        self.values[comp * (self.n_lag + 1) + j]
    }
}

/// Offset s_j of sample j, with s_{n_lag} = 0 held exact.
pub fn sample_offset(r0: f64, n_lag: usize, j: usize) -> f64 {
    if n_lag == 0 || j == n_lag {
        0.0
    } else {
        -r0 + j as f64 * (r0 / n_lag as f64)
    }
}

fn check_shapes(a: &SegmentPath, b: &SegmentPath) -> Result<()> {
    if a.d != b.d || a.n_lag != b.n_lag || a.r0 != b.r0 {
        return Err(Error::invalid(format!(
            "segment shapes differ: (d = {}, r0 = {}, samples = {}) vs (d = {}, r0 = {}, samples = {})",
            a.d,
            a.r0,
            a.n_lag + 1,
            b.d,
            b.r0,
            b.n_lag + 1
        )));
    }
    Ok(())
}

/// Componentwise, samplewise partial order: xi <= eta everywhere.
/// Comparisons are exact; no tolerance is applied.
pub fn segment_order_leq(xi: &SegmentPath, eta: &SegmentPath) -> Result<bool> {
    check_shapes(xi, eta)?;
    Ok(xi.values.iter().zip(&eta.values).all(|(a, b)| a <= b))
}

/// Componentwise, samplewise minimum.
pub fn segment_min(a: &SegmentPath, b: &SegmentPath) -> Result<SegmentPath> {
    check_shapes(a, b)?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.min(*y))
        .collect();
    SegmentPath::new(a.d, a.r0, a.n_lag, values)
}
