//! The volatility box.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Volatility bounds sigma_lo < sigma_hi (not squared) and the driving
/// dimension m. The admissible covariance box is [sigma_lo^2 I, sigma_hi^2 I].
#[derive(Debug, Clone, PartialEq)]
pub struct VolBounds {
    sigma_lo: f64,
    sigma_hi: f64,
    m: usize,
}

impl VolBounds {
    pub fn new(sigma_lo: f64, sigma_hi: f64, m: usize) -> Result<Self> {
        if !sigma_lo.is_finite() || !sigma_hi.is_finite() {
            return Err(Error::invalid("volatility bounds must be finite"));
        }
        if !(0.0 < sigma_lo && sigma_lo < sigma_hi) {
            return Err(Error::invalid(format!(
                "volatility bounds must satisfy 0 < sigma_lo < sigma_hi, got ({sigma_lo}, {sigma_hi})"
            )));
        }
        if m < 1 {
            return Err(Error::invalid("driving dimension m must be at least 1"));
        }
        Ok(VolBounds {
            sigma_lo,
            sigma_hi,
            m,
        })
    }

    pub fn sigma_lo(&self) -> f64 {
        self.sigma_lo
    }

    pub fn sigma_hi(&self) -> f64 {
        self.sigma_hi
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// sigma_lo^2, the lower edge of the covariance box.
    pub fn lo_sq(&self) -> f64 {
        self.sigma_lo * self.sigma_lo
    }

    /// sigma_hi^2, the upper edge of the covariance box.
    pub fn hi_sq(&self) -> f64 {
        self.sigma_hi * self.sigma_hi
    }

    /// Checks that gamma's eigenvalues lie in [lo_sq - tol, hi_sq + tol];
    /// returns them (ascending) on success. The error names the first
    /// offending eigenvalue, which is what a user needs to fix a policy.
    pub fn check_in_box(&self, gamma: &SymMatrix, tol: f64, context: &str) -> Result<Vec<f64>> {
        if gamma.dim() != self.m {
            return Err(Error::invalid(format!(
                "gamma is {}x{} but the driving dimension is {}",
                gamma.dim(),
                gamma.dim(),
                self.m
            )));
        }
        let values = gamma.eigh().values;
        for &lam in &values {
            if lam < self.lo_sq() - tol || lam > self.hi_sq() + tol {
                return Err(Error::Admissibility {
                    eigenvalue: lam,
                    lo: self.lo_sq(),
                    hi: self.hi_sq(),
                    context: context.to_string(),
                });
            }
        }
        Ok(values)
    }
}
