//! Numerical laboratory for path-dependent SDEs under volatility
//! uncertainty: worst-case (sublinear) expectations over admissible
//! volatility policies, coupled simulation of delay equations, and
//! empirical checks of the drift/diffusion conditions under which the
//! solution order is preserved.

pub mod bounds;
pub mod coeffspec;
pub mod compare;
pub mod error;
pub mod gexpect;
pub mod gfunc;
pub mod grid;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod segment;
pub mod sim;
pub mod smoothing;

pub use bounds::VolBounds;
pub use coeffspec::{
    eval_coeff, parse_coeff, print_coeff, CoeffExpr, CoefficientSet, DeclaredBound,
    LipschitzEstimate,
};
pub use compare::{check_condition1, check_condition2, necessity_probe_drift, sample_ordered_pair, verify_order_preservation, ConditionKind, ConditionReport, DriftProbe, MarginSample, OrderVerdict, SlopePoint, Witness, WitnessKind};
pub use error::{Error, Result};
pub use gexpect::{estimate_capacity, estimate_gexp, pairwise_sum, policy_search, GEstimate, PolicyEstimate, PolicyFamily};
pub use gfunc::{g_eval, g_maximizer, g_oracle_lower_bound, g_report, GReport};
pub use grid::TimeGrid;
pub use linalg::{matrix_pair, EigenDecomp, SymMatrix};
pub use rng::CounterRng;
pub use scenario::{drive, DriverBatch, DriverPath, VolatilityPolicy};
pub use segment::{segment_min, segment_order_leq, Segment, SegmentPath};
pub use sim::{simulate_pair, PairKernel, Side, TrajectoryPair};
pub use smoothing::PsiFamily;
