//! C^2 approximations of the positive part.
//!
//! For sharpness index n >= 1, psi_n is the twice continuously
//! differentiable function whose second derivative is the triangular bump
//!
//! ```text
//! psi_n''(s) = 4n^2 s            on [0, 1/(2n)]
//!            = -4n^2 (s - 1/n)   on [1/(2n), 1/n]
//!            = 0                 elsewhere,
//! ```
//!
//! with psi_n = psi_n' = 0 on (-inf, 0]. Integrating twice gives the
//! closed forms below. psi_n increases to s+ as n grows, with the uniform
//! gap s+ - psi_n(s) equal to exactly 1/(2n) once s >= 1/n; these are the
//! properties the order-preservation argument leans on, exposed here as a
//! checkable report. The production estimator uses the raw positive part;
//! this family is diagnostic.

use crate::error::{Error, Result};

/// The approximation at one sharpness index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsiFamily {
    n: u32,
}

impl PsiFamily {
    pub fn new(n: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("sharpness index n must be at least 1"));
        }
        Ok(PsiFamily { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// First breakpoint 1/(2n), where the second derivative peaks.
    pub fn knee_half(&self) -> f64 {
        1.0 / (2.0 * self.n as f64)
    }

    /// Second breakpoint 1/n, beyond which psi is exactly s - 1/(2n).
    pub fn knee(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn psi(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let a = self.knee_half();
        let b = self.knee();
        if s <= 0.0 {
            0.0
        } else if s <= a {
            (2.0 / 3.0) * n * n * s * s * s
        } else if s < b {
            // psi(a) = 1/(12n)
            let w = s - b;
            1.0 / (12.0 * n) + (s - a) - (2.0 * n * n / 3.0) * (w * w * w + 1.0 / (8.0 * n * n * n))
        } else {
            // s >= 1/n: the gap to s+ is exactly 1/(2n)
            s - a
        }
    }

    pub fn psi_prime(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let a = self.knee_half();
        let b = self.knee();
        if s <= 0.0 {
            0.0
        } else if s <= a {
            2.0 * n * n * s * s
        } else if s < b {
            let w = s - b;
            1.0 - 2.0 * n * n * w * w
        } else {
            1.0
        }
    }

    pub fn psi_second(&self, s: f64) -> f64 {
        let n = self.n as f64;
        let a = self.knee_half();
        let b = self.knee();
        if s <= 0.0 {
            0.0
        } else if s <= a {
            4.0 * n * n * s
        } else if s < b {
            -4.0 * n * n * (s - b)
        } else {
            0.0
        }
    }
}

/// Limit behavior across a family of indices on a fixed grid.
#[derive(Debug, Clone)]
pub struct PsiLimitReport {
    /// 0 <= psi' <= 1 everywhere and psi' = 0 for s <= 0.
    pub prime_in_range: bool,
    /// psi_n <= psi_{n'} <= s+ pointwise for n < n'.
    pub monotone_in_n: bool,
    /// s * psi''(s) <= 1, with the near-equality region confined to
    /// (0, 1/n).
    pub curvature_product_ok: bool,
    /// Largest observed s * psi''(s); 1 exactly at s = 1/(2n) when the
    /// grid contains it.
    pub max_curvature_product: f64,
    /// Largest deviation of s+ - psi_n from 1/(2n) over grid points with
    /// s >= 1/n.
    pub max_gap_error_beyond_knee: f64,
}

impl PsiLimitReport {
    pub fn pass(&self) -> bool {
        self.prime_in_range && self.monotone_in_n && self.curvature_product_ok
    }
}

/// Evaluates the limit properties for strictly increasing `n_list` on
/// `s_grid`. Tolerance 1e-12 throughout.
pub fn psi_limit_check(n_list: &[u32], s_grid: &[f64]) -> Result<PsiLimitReport> {
    if n_list.is_empty() {
        return Err(Error::invalid("n_list must be non-empty"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_list must be strictly increasing"));
    }
    const TOL: f64 = 1e-12;

    let families: Vec<PsiFamily> = n_list
        .iter()
        .map(|&n| PsiFamily::new(n))
        .collect::<Result<_>>()?;

    let mut prime_in_range = true;
    let mut monotone_in_n = true;
    let mut curvature_product_ok = true;
    let mut max_curvature_product = f64::NEG_INFINITY;
    let mut max_gap_error_beyond_knee: f64 = 0.0;

    for &s in s_grid {
        let s_plus = s.max(0.0);
        let mut prev = f64::NEG_INFINITY;
        for fam in &families {
            let p = fam.psi(s);
            let dp = fam.psi_prime(s);
            let ddp = fam.psi_second(s);

            if !(-TOL..=1.0 + TOL).contains(&dp) || (s <= 0.0 && dp != 0.0) {
                prime_in_range = false;
            }
            if p < prev - TOL || p > s_plus + TOL {
                monotone_in_n = false;
            }
            prev = p;

            let prod = s * ddp;
            max_curvature_product = max_curvature_product.max(prod);
            if prod > 1.0 + TOL {
                curvature_product_ok = false;
            }
            if prod > 1.0 - TOL && !(s > 0.0 && s < fam.knee()) {
                curvature_product_ok = false;
            }

            if s >= fam.knee() {
                let err = (s_plus - p - fam.knee_half()).abs();
                max_gap_error_beyond_knee = max_gap_error_beyond_knee.max(err);
            }
        }
    }

    Ok(PsiLimitReport {
        prime_in_range,
        monotone_in_n,
        curvature_product_ok,
        max_curvature_product,
        max_gap_error_beyond_knee,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vanishes_on_the_nonpositive_axis() {
        let f = PsiFamily::new(3).unwrap();
        for &s in &[-10.0, -1.0, -1e-9, 0.0] {
            assert_eq!(f.psi(s), 0.0);
            assert_eq!(f.psi_prime(s), 0.0);
            assert_eq!(f.psi_second(s), 0.0);
        }
    }

    #[test]
    fn pinned_values() {
        let f = PsiFamily::new(1).unwrap();
        // s = 0.5 is the first breakpoint of psi_1
        assert_abs_diff_eq!(f.psi(0.5), 1.0 / 12.0, epsilon = 1e-15);
        assert_eq!(f.psi_prime(1.0), 1.0);
        // beyond the knee the gap to s+ is exactly 1/(2n)
        for &s in &[1.0, 1.5, 7.0] {
            assert_eq!(s - f.psi(s), 0.5);
        }
        let f4 = PsiFamily::new(4).unwrap();
        for &s in &[0.25, 0.3, 2.0] {
            assert_abs_diff_eq!(s - f4.psi(s), 1.0 / 8.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn curvature_product_peaks_at_one() {
        for n in [1u32, 2, 5, 16] {
            let f = PsiFamily::new(n).unwrap();
            let s = f.knee_half();
            // 4 n^2 * (1/2n) * (1/2n) = 1
            assert_abs_diff_eq!(s * f.psi_second(s), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn branches_agree_at_breakpoints() {
        // evaluate the closed form of each adjacent branch at the knot
        // itself; C^2 means all three levels agree there
        for n in [1u32, 2, 3, 8, 50] {
            let nf = n as f64;
            let a = 1.0 / (2.0 * nf);
            let b = 1.0 / nf;

            let cubic = |s: f64| (2.0 / 3.0) * nf * nf * s * s * s;
            let middle = |s: f64| {
                let w = s - b;
                1.0 / (12.0 * nf) + (s - a)
                    - (2.0 * nf * nf / 3.0) * (w * w * w + 1.0 / (8.0 * nf * nf * nf))
            };
            let tail = |s: f64| s - a;

            assert!((cubic(0.0) - 0.0).abs() <= 1e-12);
            assert!((cubic(a) - middle(a)).abs() <= 1e-12);
            assert!((middle(b) - tail(b)).abs() <= 1e-12);

            let cubic_p = |s: f64| 2.0 * nf * nf * s * s;
            let middle_p = |s: f64| 1.0 - 2.0 * nf * nf * (s - b) * (s - b);
            assert!((cubic_p(0.0) - 0.0).abs() <= 1e-12);
            assert!((cubic_p(a) - middle_p(a)).abs() <= 1e-12);
            assert!((middle_p(b) - 1.0).abs() <= 1e-12);

            let cubic_pp = |s: f64| 4.0 * nf * nf * s;
            let middle_pp = |s: f64| -4.0 * nf * nf * (s - b);
            assert!((cubic_pp(0.0) - 0.0).abs() <= 1e-12);
            assert!((cubic_pp(a) - middle_pp(a)).abs() <= 1e-12);
            assert!((middle_pp(b) - 0.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn finite_differences_match_derivatives() {
        // central differences are only 10 h^2 accurate while the third
        // derivative stays below 60: |psi'''| = 4 n^2, so n <= 3.  the
        // stencil must also not straddle a curvature kink, where the
        // error degrades to O(n^2 h); the grid keeps clear of the three
        // breakpoints by more than h.
        let h = 1e-4;
        let tol = 10.0 * h * h;
        for n in [1u32, 2, 3] {
            let f = PsiFamily::new(n).unwrap();
            let mut s = -2.0;
            while s <= 2.0 {
                let near_knot = [0.0, f.knee_half(), f.knee()]
                    .iter()
                    .any(|&k| (s - k).abs() <= 2.0 * h);
                if !near_knot {
                    let fd1 = (f.psi(s + h) - f.psi(s - h)) / (2.0 * h);
                    assert!(
                        (fd1 - f.psi_prime(s)).abs() <= tol,
                        "psi' mismatch at n = {n}, s = {s}"
                    );
                    let fd2 = (f.psi_prime(s + h) - f.psi_prime(s - h)) / (2.0 * h);
                    assert!(
                        (fd2 - f.psi_second(s)).abs() <= tol,
                        "psi'' mismatch at n = {n}, s = {s}"
                    );
                }
                s += 0.0371;
            }
        }
    }

    #[test]
    fn limit_report_on_standard_grid() {
        let s_grid: Vec<f64> = (0..=4000).map(|k| -1.0 + 3.0 * k as f64 / 4000.0).collect();
        let rep = psi_limit_check(&[1, 2, 4, 8], &s_grid).unwrap();
        assert!(rep.pass());
        assert!(rep.max_curvature_product <= 1.0 + 1e-12);
        assert!(rep.max_gap_error_beyond_knee <= 1e-12);

        // all-negative grid: everything is identically zero
        let neg: Vec<f64> = (1..=100).map(|k| -(k as f64) / 50.0).collect();
        let rep = psi_limit_check(&[1, 3], &neg).unwrap();
        assert!(rep.pass());
        assert_eq!(rep.max_curvature_product, 0.0);
    }

    #[test]
    fn rejects_bad_index_lists() {
        assert!(psi_limit_check(&[], &[0.0]).is_err());
        assert!(psi_limit_check(&[2, 2], &[0.0]).is_err());
        assert!(psi_limit_check(&[3, 1], &[0.0]).is_err());
        assert!(PsiFamily::new(0).is_err());
    }
}
