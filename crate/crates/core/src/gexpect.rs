//! Sublinear expectation estimates by Monte Carlo within volatility
//! policies and search across them.
//!
//! Every policy induces an ordinary probability law on driver paths, so
//! the sup over a finite policy set is estimated from below: per-policy
//! sample means, then the max. All estimates are statistically
//! consistent lower bounds of the sup over the full admissible class.
//! Policies share the same (seed, path, step) noise streams, so
//! comparisons between them are common-random-number comparisons.

use crate::bounds::VolBounds;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::SymMatrix;
use crate::rng::CounterRng;
use crate::scenario::{drive, DriverPath, VolatilityPolicy};

/// Sum with pairwise splitting: deterministic, order-stable, and with
/// O(log n) error growth instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Monte Carlo summary for one policy.
#[derive(Debug, Clone)]
pub struct PolicyEstimate {
    pub id: String,
    /// Human-readable parameter label, comma-free for CSV embedding.
    pub params: String,
    pub mean: f64,
    pub se: f64,
    pub n_paths: usize,
}

/// Estimate of a sublinear expectation: per-policy means and their max.
#[derive(Debug, Clone)]
pub struct GEstimate {
    per_policy: Vec<PolicyEstimate>,
    argmax: usize,
    capacity_mode: bool,
}

impl GEstimate {
    fn from_rows(per_policy: Vec<PolicyEstimate>, capacity_mode: bool) -> Result<Self> {
        if per_policy.is_empty() {
            return Err(Error::invalid("estimate needs at least one policy"));
        }
        let mut argmax = 0;
        for (i, row) in per_policy.iter().enumerate() {
            if row.mean > per_policy[argmax].mean {
                argmax = i;
            }
        }
        Ok(GEstimate { per_policy, argmax, capacity_mode })
    }

    /// Max of the per-policy means, exactly.
    pub fn value(&self) -> f64 {
        self.per_policy[self.argmax].mean
    }

    pub fn argmax_index(&self) -> usize {
        self.argmax
    }

    pub fn argmax_policy(&self) -> &PolicyEstimate {
        &self.per_policy[self.argmax]
    }

    /// Standard error attached to the maximizing policy.
    pub fn value_se(&self) -> f64 {
        self.per_policy[self.argmax].se
    }

    pub fn per_policy(&self) -> &[PolicyEstimate] {
        &self.per_policy
    }

    pub fn capacity_mode(&self) -> bool {
        self.capacity_mode
    }
}

/// Mean and standard error of `values` by pairwise reduction. In
/// capacity mode the SE is binomial, sqrt(p(1-p)/n); otherwise it is
/// the sample standard deviation over sqrt(n).
fn summarize(values: &[f64], capacity: bool) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let se = if capacity {
        (mean * (1.0 - mean) / n).sqrt()
    } else if values.len() < 2 {
        0.0
    } else {
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&sq) / (n - 1.0)).sqrt() / n.sqrt()
    };
    (mean, se)
}

fn run_policies(
    mut functional: impl FnMut(&DriverPath) -> Result<f64>,
    policies: &[VolatilityPolicy],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    capacity: bool,
) -> Result<GEstimate> {
    if policies.is_empty() {
        return Err(Error::invalid("policy set is empty"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }
    let mut rows = Vec::with_capacity(policies.len());
    let mut values = vec![0.0; n_paths];
    for (i, policy) in policies.iter().enumerate() {
        let batch = drive(policy, grid, n_paths, seed);
        for (p, slot) in values.iter_mut().enumerate() {
            let v = functional(&batch.path(p))?;
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "functional returned {v} on policy {i} path {p}"
                )));
            }
            *slot = v;
        }
        let (mean, se) = summarize(&values, capacity);
        rows.push(PolicyEstimate {
            id: format!("policy_{i}"),
            params: policy.label(),
            mean,
            se,
            n_paths,
        });
    }
    GEstimate::from_rows(rows, capacity)
}

/// Estimate sup over `policies` of the mean of `functional` on driver
/// paths. Same seed per policy: common random numbers.
pub fn estimate_gexp(
    functional: impl FnMut(&DriverPath) -> Result<f64>,
    policies: &[VolatilityPolicy],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<GEstimate> {
    run_policies(functional, policies, grid, n_paths, seed, false)
}

/// Estimate the capacity of `event`: sup over policies of its empirical
/// frequency, with binomial standard errors. A value of 0 across all
/// sampled policies means "empirically polar at this resolution", never
/// a proof of polarity.
pub fn estimate_capacity(
    mut event: impl FnMut(&DriverPath) -> Result<bool>,
    policies: &[VolatilityPolicy],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<GEstimate> {
    run_policies(
        |path| Ok(if event(path)? { 1.0 } else { 0.0 }),
        policies,
        grid,
        n_paths,
        seed,
        true,
    )
}

/// Parametric slice of the admissible class searched by `policy_search`.
#[derive(Debug, Clone)]
pub enum PolicyFamily {
    /// Constant diagonal matrices with entries in the volatility box.
    ConstantDiag,
    /// `n_stages` constant diagonal regimes separated by movable switch
    /// times inside the horizon.
    PiecewiseConstantDiag { n_stages: usize },
    /// Two diagonal regimes selected by thresholding one driver
    /// component, with a movable threshold.
    FeedbackThreshold { component: usize, threshold_lo: f64, threshold_hi: f64 },
}

/// Parameter-vector view of a family: ranges, corner seeds, decoding.
struct FamilySpace<'a> {
    family: &'a PolicyFamily,
    bounds: &'a VolBounds,
    grid: &'a TimeGrid,
}

impl FamilySpace<'_> {
    fn n_params(&self) -> usize {
        let m = self.bounds.m();
        match self.family {
            PolicyFamily::ConstantDiag => m,
            PolicyFamily::PiecewiseConstantDiag { n_stages } => (n_stages - 1) + n_stages * m,
            PolicyFamily::FeedbackThreshold { .. } => 1 + 2 * m,
        }
    }

    /// Inclusive search range of parameter `i`.
    fn range(&self, i: usize) -> (f64, f64) {
        let box_rng = (self.bounds.lo_sq(), self.bounds.hi_sq());
        match self.family {
            PolicyFamily::ConstantDiag => box_rng,
            PolicyFamily::PiecewiseConstantDiag { n_stages } => {
                // switch-time fractions first, then stage entries
                if i < n_stages - 1 {
                    (0.0, 1.0)
                } else {
                    box_rng
                }
            }
            PolicyFamily::FeedbackThreshold { threshold_lo, threshold_hi, .. } => {
                if i == 0 {
                    (*threshold_lo, *threshold_hi)
                } else {
                    box_rng
                }
            }
        }
    }

    /// Deterministic starting candidates: the box corners of each
    /// regime (structure parameters at midpoints).
    fn corners(&self) -> Vec<Vec<f64>> {
        let m = self.bounds.m();
        let (lo, hi) = (self.bounds.lo_sq(), self.bounds.hi_sq());
        match self.family {
            PolicyFamily::ConstantDiag => vec![vec![lo; m], vec![hi; m]],
            PolicyFamily::PiecewiseConstantDiag { n_stages } => {
                let fractions: Vec<f64> =
                    (1..*n_stages).map(|i| i as f64 / *n_stages as f64).collect();
                let mut low = fractions.clone();
                low.extend(std::iter::repeat(lo).take(n_stages * m));
                let mut high = fractions;
                high.extend(std::iter::repeat(hi).take(n_stages * m));
                vec![low, high]
            }
            PolicyFamily::FeedbackThreshold { threshold_lo, threshold_hi, .. } => {
                let mid = 0.5 * (threshold_lo + threshold_hi);
                let mut up = vec![mid];
                up.extend(std::iter::repeat(lo).take(m));
                up.extend(std::iter::repeat(hi).take(m));
                let mut down = vec![mid];
                down.extend(std::iter::repeat(hi).take(m));
                down.extend(std::iter::repeat(lo).take(m));
                vec![up, down]
            }
        }
    }

    fn decode(&self, params: &[f64]) -> Result<VolatilityPolicy> {
        let m = self.bounds.m();
        match self.family {
            PolicyFamily::ConstantDiag => VolatilityPolicy::constant(
                SymMatrix::from_diag(params),
                self.bounds.clone(),
            ),
            PolicyFamily::PiecewiseConstantDiag { n_stages } => {
                let s = *n_stages;
                let (t0, span) = (self.grid.t(0), self.grid.t(self.grid.n_steps()) - self.grid.t(0));
                let mut fractions: Vec<f64> = params[..s - 1].to_vec();
                fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut times = Vec::with_capacity(s - 1);
                let mut prev = t0;
                for f in fractions {
                    // keep switch times strictly increasing inside the horizon
                    let t = (t0 + span * f.clamp(0.01, 0.99)).max(prev + span * 1e-3);
                    times.push(t);
                    prev = t;
                }
                let regimes: Vec<SymMatrix> = params[s - 1..]
                    .chunks(m)
                    .map(SymMatrix::from_diag)
                    .collect();
                VolatilityPolicy::piecewise_constant(times, regimes, self.bounds.clone())
            }
            PolicyFamily::FeedbackThreshold { component, .. } => {
                VolatilityPolicy::feedback_threshold(
                    *component,
                    params[0],
                    SymMatrix::from_diag(&params[1..1 + m]),
                    SymMatrix::from_diag(&params[1 + m..]),
                    self.bounds.clone(),
                )
            }
        }
    }
}

/// Random search plus coordinate refinement over a policy family.
/// `budget` counts policy evaluations. The returned estimate holds one
/// row per evaluated candidate; its value is monotone in the evaluated
/// set by construction.
pub fn policy_search(
    mut functional: impl FnMut(&DriverPath) -> Result<f64>,
    family: &PolicyFamily,
    bounds: &VolBounds,
    budget: usize,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<(VolatilityPolicy, GEstimate)> {
    if budget == 0 {
        return Err(Error::invalid("search budget must be at least 1"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }
    if let PolicyFamily::PiecewiseConstantDiag { n_stages } = family {
        if *n_stages == 0 {
            return Err(Error::invalid("piecewise family needs at least one stage"));
        }
    }
    if let PolicyFamily::FeedbackThreshold { component, threshold_lo, threshold_hi } = family {
        if *component >= bounds.m() {
            return Err(Error::invalid(format!(
                "feedback component {component} outside 0..{}",
                bounds.m()
            )));
        }
        if !(threshold_lo.is_finite() && threshold_hi.is_finite() && threshold_lo < threshold_hi) {
            return Err(Error::invalid("threshold range must be finite and ordered"));
        }
    }

    let space = FamilySpace { family, bounds, grid };
    let mut rng = CounterRng::from_key(&[seed, 0x7365_6172]);
    let mut rows: Vec<PolicyEstimate> = Vec::new();
    let mut values = vec![0.0; n_paths];
    let mut best: Option<(Vec<f64>, f64, VolatilityPolicy)> = None;

    // same seed for every candidate: common random numbers
    let mut evaluate = |params: &[f64],
                        rows: &mut Vec<PolicyEstimate>,
                        best: &mut Option<(Vec<f64>, f64, VolatilityPolicy)>|
     -> Result<()> {
        let policy = space.decode(params)?;
        let batch = drive(&policy, grid, n_paths, seed);
        for (p, slot) in values.iter_mut().enumerate() {
            let v = functional(&batch.path(p))?;
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "functional returned {v} during search (candidate {})",
                    rows.len()
                )));
            }
            *slot = v;
        }
        let (mean, se) = summarize(&values, false);
        rows.push(PolicyEstimate {
            id: format!("eval_{}", rows.len()),
            params: policy.label(),
            mean,
            se,
            n_paths,
        });
        if best.as_ref().map_or(true, |(_, b, _)| mean > *b) {
            *best = Some((params.to_vec(), mean, policy));
        }
        Ok(())
    };

    // phase 1: deterministic corners
    for corner in space.corners() {
        if rows.len() >= budget {
            break;
        }
        evaluate(&corner, &mut rows, &mut best)?;
    }

    // phase 2: uniform random candidates over half the remaining budget
    let n_random = (budget - rows.len()).div_ceil(2);
    for _ in 0..n_random {
        if rows.len() >= budget {
            break;
        }
        let params: Vec<f64> = (0..space.n_params())
            .map(|i| {
                let (lo, hi) = space.range(i);
                rng.next_uniform(lo, hi)
            })
            .collect();
        evaluate(&params, &mut rows, &mut best)?;
    }

    // phase 3: coordinate refinement around the incumbent, halving steps
    let mut scale = 0.25;
    'refine: while rows.len() < budget {
        let incumbent = best.as_ref().unwrap().0.clone();
        let mut improved = false;
        for i in 0..space.n_params() {
            let (lo, hi) = space.range(i);
            let step = scale * (hi - lo);
            for dir in [1.0, -1.0] {
                if rows.len() >= budget {
                    break 'refine;
                }
                let mut params = incumbent.clone();
                params[i] = (params[i] + dir * step).clamp(lo, hi);
                let before = best.as_ref().unwrap().1;
                evaluate(&params, &mut rows, &mut best)?;
                if best.as_ref().unwrap().1 > before {
                    improved = true;
                }
            }
        }
        if !improved {
            scale *= 0.5;
            if scale < 1e-6 {
                break;
            }
        }
    }

    let (_, _, policy) = best.unwrap();
    let trace = GEstimate::from_rows(rows, false)?;
    Ok((policy, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bounds() -> VolBounds {
        VolBounds::new(1.0, 2.0, 1).unwrap()
    }

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 1.0, 0.015625, 0.0).unwrap()
    }

    fn constant_policies(gammas: &[f64]) -> Vec<VolatilityPolicy> {
        gammas
            .iter()
            .map(|&g| {
                VolatilityPolicy::constant(SymMatrix::scaled_identity(1, g), bounds()).unwrap()
            })
            .collect()
    }

    fn terminal_sq(path: &DriverPath) -> Result<f64> {
        Ok(path.b_total()[0].powi(2))
    }

    #[test]
    fn constant_functional_is_reproduced_exactly() {
        let policies = constant_policies(&[1.0, 4.0]);
        let est = estimate_gexp(|_| Ok(2.5), &policies, &grid(), 100, 3).unwrap();
        assert_eq!(est.value(), 2.5);
        assert_eq!(est.value_se(), 0.0);
        for row in est.per_policy() {
            assert_eq!(row.mean, 2.5);
            assert_eq!(row.se, 0.0);
            assert_eq!(row.n_paths, 100);
        }
    }

    #[test]
    fn terminal_quadratic_is_maximized_at_the_upper_bound() {
        // E[B(1)^2] = gamma under a constant policy; sup over the box is
        // hi^2 = 4
        let policies = constant_policies(&[1.0, 1.75, 2.5, 3.25, 4.0]);
        let est = estimate_gexp(terminal_sq, &policies, &grid(), 4000, 11).unwrap();
        assert!((est.value() - 4.0).abs() <= 3.0 * est.value_se(), "{} vs 4", est.value());
        assert_eq!(est.argmax_index(), 4);

        // negated functional: sup of -B(1)^2 sits at the lower bound
        let est = estimate_gexp(|p| Ok(-terminal_sq(p)?), &policies, &grid(), 4000, 11).unwrap();
        assert!((est.value() + 1.0).abs() <= 3.0 * est.value_se(), "{} vs -1", est.value());
        assert_eq!(est.argmax_index(), 0);
    }

    #[test]
    fn capacity_handles_trivial_and_symmetric_events() {
        let policies = constant_policies(&[1.0, 2.5, 4.0]);
        let g = grid();

        let est = estimate_capacity(|_| Ok(false), &policies, &g, 500, 5).unwrap();
        assert_eq!(est.value(), 0.0);
        assert!(est.capacity_mode());

        let est = estimate_capacity(|_| Ok(true), &policies, &g, 500, 5).unwrap();
        assert_eq!(est.value(), 1.0);

        // driven Gaussian is symmetric around zero under any constant policy
        let est =
            estimate_capacity(|p| Ok(p.b_total()[0] > 0.0), &policies, &g, 4000, 5).unwrap();
        for row in est.per_policy() {
            assert!((row.mean - 0.5).abs() <= 3.0 * row.se, "{} vs 0.5", row.mean);
        }
    }

    #[test]
    fn value_is_monotone_in_the_policy_set() {
        let small = constant_policies(&[1.0, 2.0]);
        let large = constant_policies(&[1.0, 2.0, 3.0, 4.0]);
        let e_small = estimate_gexp(terminal_sq, &small, &grid(), 300, 9).unwrap();
        let e_large = estimate_gexp(terminal_sq, &large, &grid(), 300, 9).unwrap();
        assert!(e_small.value() <= e_large.value());
        // shared policies produce bitwise identical rows under CRN
        for i in 0..2 {
            assert_eq!(e_small.per_policy()[i].mean, e_large.per_policy()[i].mean);
        }
    }

    #[test]
    fn estimator_algebra_holds_on_shared_samples() {
        let policies = constant_policies(&[1.0, 2.5, 4.0]);
        let g = grid();
        let n = 500;
        let fx = |p: &DriverPath| Ok(p.b_total()[0].powi(2));
        let fy = |p: &DriverPath| Ok(p.b_total()[0].sin());
        let fxy = |p: &DriverPath| Ok(p.b_total()[0].powi(2) + p.b_total()[0].sin());

        let ex = estimate_gexp(fx, &policies, &g, n, 2).unwrap();
        let ey = estimate_gexp(fy, &policies, &g, n, 2).unwrap();
        let exy = estimate_gexp(fxy, &policies, &g, n, 2).unwrap();
        for i in 0..policies.len() {
            assert_abs_diff_eq!(
                exy.per_policy()[i].mean,
                ex.per_policy()[i].mean + ey.per_policy()[i].mean,
                epsilon = 1e-12
            );
        }
        // sub-additivity of the max follows from per-policy additivity
        assert!(exy.value() <= ex.value() + ey.value() + 1e-12);

        // positive homogeneity, argmax unchanged
        let e3 = estimate_gexp(|p| Ok(3.0 * p.b_total()[0].powi(2)), &policies, &g, n, 2).unwrap();
        assert_abs_diff_eq!(e3.value(), 3.0 * ex.value(), epsilon = 1e-12);
        assert_eq!(e3.argmax_index(), ex.argmax_index());

        // constant shift
        let ec = estimate_gexp(|p| Ok(p.b_total()[0].powi(2) + 7.0), &policies, &g, n, 2).unwrap();
        assert_abs_diff_eq!(ec.value(), ex.value() + 7.0, epsilon = 1e-12);
    }

    #[test]
    fn estimates_are_deterministic() {
        let policies = constant_policies(&[1.5, 3.5]);
        let a = estimate_gexp(terminal_sq, &policies, &grid(), 400, 77).unwrap();
        let b = estimate_gexp(terminal_sq, &policies, &grid(), 400, 77).unwrap();
        assert_eq!(a.value(), b.value());
        for (ra, rb) in a.per_policy().iter().zip(b.per_policy()) {
            assert_eq!(ra.mean, rb.mean);
            assert_eq!(ra.se, rb.se);
        }
        // a different seed moves the sample means
        let c = estimate_gexp(terminal_sq, &policies, &grid(), 400, 78).unwrap();
        assert_ne!(a.per_policy()[0].mean, c.per_policy()[0].mean);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let policies = constant_policies(&[2.0]);
        assert!(estimate_gexp(terminal_sq, &[], &grid(), 10, 1).is_err());
        assert!(estimate_gexp(terminal_sq, &policies, &grid(), 0, 1).is_err());
        assert!(estimate_gexp(|_| Ok(f64::NAN), &policies, &grid(), 10, 1).is_err());
        let fam = PolicyFamily::ConstantDiag;
        assert!(policy_search(terminal_sq, &fam, &bounds(), 0, &grid(), 10, 1).is_err());
    }

    #[test]
    fn search_over_constant_diagonals_finds_the_upper_corner() {
        // per path, B(1)^2 = sum_j gamma_j W_j(1)^2 is increasing in every
        // diagonal entry, so under CRN the exact argmax is the hi corner
        let b2 = VolBounds::new(1.0, 2.0, 2).unwrap();
        let f = |p: &DriverPath| {
            let b = p.b_total();
            Ok(b[0] * b[0] + b[1] * b[1])
        };
        let (best, trace) =
            policy_search(f, &PolicyFamily::ConstantDiag, &b2, 12, &grid(), 400, 21).unwrap();
        let corner = VolatilityPolicy::constant(SymMatrix::scaled_identity(2, 4.0), b2).unwrap();
        assert_eq!(best.label(), corner.label());
        assert_eq!(trace.per_policy().len(), 12);
        assert_eq!(trace.argmax_policy().params, corner.label());
        // trace value is the max over all evaluated rows
        let max_row = trace.per_policy().iter().map(|r| r.mean).fold(f64::MIN, f64::max);
        assert_eq!(trace.value(), max_row);
    }

    #[test]
    fn single_budget_returns_one_candidate() {
        let (best, trace) = policy_search(
            terminal_sq,
            &PolicyFamily::ConstantDiag,
            &bounds(),
            1,
            &grid(),
            50,
            4,
        )
        .unwrap();
        assert_eq!(trace.per_policy().len(), 1);
        assert_eq!(best.label(), trace.per_policy()[0].params);

        // zero functional: any policy optimal, value 0
        let (_, trace) = policy_search(
            |_| Ok(0.0),
            &PolicyFamily::ConstantDiag,
            &bounds(),
            5,
            &grid(),
            50,
            4,
        )
        .unwrap();
        assert_eq!(trace.value(), 0.0);
    }

    #[test]
    fn search_handles_structured_families() {
        let g = TimeGrid::new(0.0, 1.0, 0.0625, 0.0).unwrap();
        // piecewise: two stages, quadratic target still favors hi everywhere
        let fam = PolicyFamily::PiecewiseConstantDiag { n_stages: 2 };
        let (best, trace) =
            policy_search(terminal_sq, &fam, &bounds(), 8, &g, 300, 13).unwrap();
        assert_eq!(trace.per_policy().len(), 8);
        assert!(best.label().starts_with("pw("));
        // hi corner was evaluated second and dominates every mixed candidate
        assert!(trace.value() >= trace.per_policy()[1].mean);

        let fam = PolicyFamily::FeedbackThreshold {
            component: 0,
            threshold_lo: -1.0,
            threshold_hi: 1.0,
        };
        let (best, _) = policy_search(terminal_sq, &fam, &bounds(), 8, &g, 300, 13).unwrap();
        assert!(best.label().starts_with("fb("));

        // invalid family parameters
        let bad = PolicyFamily::FeedbackThreshold {
            component: 3,
            threshold_lo: -1.0,
            threshold_hi: 1.0,
        };
        assert!(policy_search(terminal_sq, &bad, &bounds(), 2, &g, 10, 1).is_err());
    }

    #[test]
    fn search_is_deterministic() {
        let fam = PolicyFamily::ConstantDiag;
        let a = policy_search(terminal_sq, &fam, &bounds(), 9, &grid(), 200, 31).unwrap();
        let b = policy_search(terminal_sq, &fam, &bounds(), 9, &grid(), 200, 31).unwrap();
        assert_eq!(a.0.label(), b.0.label());
        for (ra, rb) in a.1.per_policy().iter().zip(b.1.per_policy()) {
            assert_eq!(ra.params, rb.params);
            assert_eq!(ra.mean, rb.mean);
        }
    }

    #[test]
    fn pairwise_sum_matches_a_compensated_reference() {
        // Kahan summation as the independent reference
        fn kahan(xs: &[f64]) -> f64 {
            let (mut s, mut c) = (0.0f64, 0.0f64);
            for &x in xs {
                let y = x - c;
                let t = s + y;
                c = (t - s) - y;
                s = t;
            }
            s
        }
        let mut rng = CounterRng::from_key(&[99]);
        for n in [1usize, 31, 32, 33, 1000, 4097] {
            let xs: Vec<f64> = (0..n).map(|_| rng.next_uniform(-1.0, 1.0)).collect();
            let want = kahan(&xs);
            assert_abs_diff_eq!(pairwise_sum(&xs), want, epsilon = 1e-12 * n as f64);
        }
        // dyadic values sum exactly
        let xs = vec![0.25; 1024];
        assert_eq!(pairwise_sum(&xs), 256.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
