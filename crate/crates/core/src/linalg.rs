//! Dense symmetric matrices and a deterministic eigensolver.
//!
//! Everything here assumes small dimensions (the driving dimension m stays
//! in single digits), so matrices are dense and the eigensolver is a cyclic
//! Jacobi iteration. Jacobi was chosen over an external LAPACK-style
//! backend for one reason: determinism. For a fixed input the sweep order,
//! the eigenvalue sort, and the eigenvector sign convention are all fixed,
//! so callers that reconstruct maximizers or matrix square roots get
//! bit-identical results on every run.

use crate::error::{Error, Result};

/// Real symmetric matrix, stored dense row-major.
///
/// The symmetrizing constructor stores (M + M^T)/2, and every mutating
/// entry point writes both triangles, so `get(i, j)` and `get(j, i)` are
/// always bitwise equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Eigendecomposition of a `SymMatrix`.
///
/// `values` are sorted ascending; `vectors[k]` is the unit eigenvector for
/// `values[k]`, sign-fixed so that its largest-magnitude component (first
/// such index on ties) is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SymMatrix {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut a = Self::zero(dim);
        for i in 0..dim {
            a.entries[i * dim + i] = c;
        }
        a
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut a = Self::zero(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            a.entries[i * diag.len() + i] = v;
        }
        a
    }

    /// Builds from row-major entries, symmetrizing as (M + M^T)/2.
    pub fn from_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if rows.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                rows.len()
            )));
        }
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let v = 0.5 * (rows[i * dim + j] + rows[j * dim + i]);
                entries[i * dim + j] = v;
            }
        }
        Ok(SymMatrix { dim, entries })
    }

    /// Builds from row-major entries, rejecting any asymmetry instead of
    /// repairing it. Used at configuration boundaries where a lopsided
    /// matrix is a user mistake, not noise.
    pub fn from_rows_strict(dim: usize, rows: &[f64]) -> Result<Self> {
        let a = Self::from_rows(dim, rows)?;
        for i in 0..dim {
            for j in (i + 1)..dim {
                if rows[i * dim + j] != rows[j * dim + i] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric: entry ({}, {}) = {} but ({}, {}) = {}",
                        i + 1,
                        j + 1,
                        rows[i * dim + j],
                        j + 1,
                        i + 1,
                        rows[j * dim + i]
                    )));
                }
            }
        }
        Ok(a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Sets entry (i, j) and its mirror (j, i).
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
        self.entries[j * self.dim + i] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        SymMatrix {
            dim: self.dim,
            entries,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        SymMatrix {
            dim: self.dim,
            entries,
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|a| c * a).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
    }

    /// Frobenius pairing sum_{k,l} M_kl N_kl. Dimensions must match; use
    /// [`matrix_pair`] for the checked variant.
    #[inline]
    pub fn pair(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for i in 0..self.dim {
            let row = &self.entries[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// A * A. Symmetric and positive semidefinite for symmetric A.
    pub fn matrix_square(&self) -> SymMatrix {
        let m = self.dim;
        let mut out = SymMatrix::zero(m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += self.get(i, k) * self.get(k, j);
                }
                out.set_sym(i, j, s);
            }
        }
        out
    }

    /// Reassembles sum_k weights[k] * v_k v_k^T from eigenvectors.
    pub fn from_eigen_basis(vectors: &[Vec<f64>], weights: &[f64]) -> SymMatrix {
        let m = vectors.len();
        assert_eq!(weights.len(), m);
        let mut out = SymMatrix::zero(m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for (k, v) in vectors.iter().enumerate() {
                    s += weights[k] * v[i] * v[j];
                }
                out.set_sym(i, j, s);
            }
        }
        out
    }

    /// Cyclic Jacobi eigendecomposition.
    ///
    /// Sweeps upper-triangle pivots in a fixed order until the off-diagonal
    /// mass is negligible relative to the input scale. Small matrices
    /// converge in a handful of sweeps; 64 is a hard cap that in practice
    /// is never approached.
    pub fn eigh(&self) -> EigenDecomp {
        let m = self.dim;
        let mut a = self.entries.clone();
        let mut v = vec![0.0; m * m];
        for i in 0..m {
            v[i * m + i] = 1.0;
        }

        let scale_sq: f64 = a.iter().map(|x| x * x).sum();
        let stop = (1e-30 * scale_sq).max(f64::MIN_POSITIVE);

        for _sweep in 0..64 {
            let mut off_sq = 0.0;
            for p in 0..m {
                for q in (p + 1)..m {
                    off_sq += a[p * m + q] * a[p * m + q];
                }
            }
            if off_sq <= stop {
                break;
            }
            for p in 0..m {
                for q in (p + 1)..m {
                    let apq = a[p * m + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                    // smaller root of t^2 + 2*theta*t - 1 = 0
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..m {
                        if r == p || r == q {
                            continue;
                        }
                        let arp = a[r * m + p];
                        let arq = a[r * m + q];
                        let nrp = c * arp - s * arq;
                        let nrq = s * arp + c * arq;
                        a[r * m + p] = nrp;
                        a[p * m + r] = nrp;
                        a[r * m + q] = nrq;
                        a[q * m + r] = nrq;
                    }
                    a[p * m + p] -= t * apq;
                    a[q * m + q] += t * apq;
                    a[p * m + q] = 0.0;
                    a[q * m + p] = 0.0;
                    for r in 0..m {
                        let vrp = v[r * m + p];
                        let vrq = v[r * m + q];
                        v[r * m + p] = c * vrp - s * vrq;
                        v[r * m + q] = s * vrp + c * vrq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| {
            a[i * m + i]
                .partial_cmp(&a[j * m + j])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });

        let mut values = Vec::with_capacity(m);
        let mut vectors = Vec::with_capacity(m);
        for &k in &order {
            values.push(a[k * m + k]);
            let mut col: Vec<f64> = (0..m).map(|r| v[r * m + k]).collect();
            // sign convention: largest-magnitude component nonnegative
            let mut lead = 0;
            for (r, x) in col.iter().enumerate() {
                if x.abs() > col[lead].abs() {
                    lead = r;
                }
            }
            if col[lead] < 0.0 {
                for x in col.iter_mut() {
                    *x = -*x;
                }
            }
            vectors.push(col);
        }
        EigenDecomp { values, vectors }
    }

    /// Symmetric square root of a positive semidefinite matrix.
    ///
    /// Eigenvalues in [-1e-10, 0) are treated as rounding noise and
    /// clamped to zero; anything more negative is an error.
    pub fn sqrt_psd(&self) -> Result<SymMatrix> {
        let dec = self.eigh();
        let mut roots = Vec::with_capacity(self.dim);
        for &lam in &dec.values {
            if lam < -1e-10 {
                return Err(Error::Numerical(format!(
                    "matrix is not positive semidefinite: eigenvalue {lam}"
                )));
            }
            roots.push(lam.max(0.0).sqrt());
        }
        Ok(SymMatrix::from_eigen_basis(&dec.vectors, &roots))
    }
}

/// Frobenius pairing <M, N> = sum_{k,l} M_kl N_kl.
pub fn matrix_pair(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "matrix pairing requires equal dimensions, got {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.pair(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn random_sym(m: usize, rng: &mut CounterRng) -> SymMatrix {
        let rows: Vec<f64> = (0..m * m).map(|_| rng.next_uniform(-2.0, 2.0)).collect();
        SymMatrix::from_rows(m, &rows).unwrap()
    }

    #[test]
    fn pairing_matches_hand_arithmetic() {
        let i2 = SymMatrix::identity(2);
        assert_eq!(matrix_pair(&i2, &i2).unwrap(), 2.0);

        let z3 = SymMatrix::zero(3);
        let a = SymMatrix::from_rows(3, &[1.0, 2.0, 3.0, 2.0, -1.0, 0.5, 3.0, 0.5, 7.0]).unwrap();
        assert_eq!(matrix_pair(&z3, &a).unwrap(), 0.0);

        let d1 = SymMatrix::from_diag(&[2.0, -1.0]);
        let d2 = SymMatrix::from_diag(&[3.0, 5.0]);
        // 2*3 + (-1)*5
        assert_eq!(matrix_pair(&d1, &d2).unwrap(), 1.0);

        assert!(matrix_pair(&i2, &z3).is_err());
    }

    #[test]
    fn symmetrization_is_idempotent() {
        let rows = [1.0, 4.0, -2.0, 0.0, 3.0, 5.0, 8.0, 1.0, 2.0];
        let once = SymMatrix::from_rows(3, &rows).unwrap();
        let twice = SymMatrix::from_rows(3, once.entries()).unwrap();
        assert_eq!(once, twice);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(once.get(i, j).to_bits(), once.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn strict_constructor_rejects_asymmetry() {
        let rows = [1.0, 2.0, 2.0 + 1e-14, 3.0];
        assert!(SymMatrix::from_rows_strict(2, &rows).is_err());
        assert!(SymMatrix::from_rows_strict(2, &[1.0, 2.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn eigh_known_cases() {
        let a = SymMatrix::from_diag(&[3.0, -1.0, 2.0]);
        let dec = a.eigh();
        assert_eq!(dec.values, vec![-1.0, 2.0, 3.0]);

        // [[2, 1], [1, 2]] has eigenvalues 1 and 3
        let b = SymMatrix::from_rows(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let dec = b.eigh();
        assert_abs_diff_eq!(dec.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.values[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigh_is_deterministic() {
        let mut rng = CounterRng::from_key(&[17, 3]);
        for m in 1..=6 {
            let a = random_sym(m, &mut rng);
            let d1 = a.eigh();
            let d2 = a.clone().eigh();
            assert_eq!(d1, d2);
        }
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let mut rng = CounterRng::from_key(&[99]);
        for m in 1..=5 {
            let b = random_sym(m, &mut rng);
            let a = b.matrix_square(); // PSD by construction
            let r = a.sqrt_psd().unwrap();
            let rr = r.matrix_square();
            for i in 0..m {
                for j in 0..m {
                    assert_abs_diff_eq!(rr.get(i, j), a.get(i, j), epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn sqrt_psd_rejects_indefinite() {
        let a = SymMatrix::from_diag(&[1.0, -0.5]);
        assert!(a.sqrt_psd().is_err());
    }

    proptest! {
        #[test]
        fn eigh_reconstructs_and_is_orthonormal(
            m in 1usize..=5,
            seed in any::<u64>(),
        ) {
            let mut rng = CounterRng::from_key(&[seed, m as u64]);
            let a = random_sym(m, &mut rng);
            let dec = a.eigh();

            // ascending order
            for w in dec.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            // A v = lambda v
            let scale = a.frobenius().max(1.0);
            for (k, v) in dec.vectors.iter().enumerate() {
                let mut av = vec![0.0; m];
                a.mul_vec(v, &mut av);
                for i in 0..m {
                    prop_assert!((av[i] - dec.values[k] * v[i]).abs() <= 1e-10 * scale);
                }
            }
            // orthonormality
            for p in 0..m {
                for q in 0..m {
                    let dot: f64 = dec.vectors[p].iter().zip(&dec.vectors[q]).map(|(x, y)| x * y).sum();
                    let target = if p == q { 1.0 } else { 0.0 };
                    prop_assert!((dot - target).abs() <= 1e-10);
                }
            }
            // reconstruction
            let back = SymMatrix::from_eigen_basis(&dec.vectors, &dec.values);
            for i in 0..m {
                for j in 0..m {
                    prop_assert!((back.get(i, j) - a.get(i, j)).abs() <= 1e-9 * scale);
                }
            }
            // sign convention
            for v in &dec.vectors {
                let mut lead = 0;
                for (r, x) in v.iter().enumerate() {
                    if x.abs() > v[lead].abs() {
                        lead = r;
                    }
                }
                prop_assert!(v[lead] >= 0.0);
            }
        }
    }
}
