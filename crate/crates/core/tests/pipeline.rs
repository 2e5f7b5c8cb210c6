//! Cross-module pipelines through the public API only: parsed
//! coefficients into simulation, condition checks against the order
//! verdict, generator values against estimator ceilings.

use gsde_core::{
    check_condition1, check_condition2, drive, estimate_gexp, g_eval, necessity_probe_drift,
    parse_coeff, policy_search, CoefficientSet, DeclaredBound, DriverPath, PolicyFamily,
    PsiFamily, SegmentPath, Side, SymMatrix, TimeGrid, VolBounds, VolatilityPolicy,
    WitnessKind,
};

const R0: f64 = 0.25;

fn bounds() -> VolBounds {
    VolBounds::new(1.0, 2.0, 1).unwrap()
}

fn coeff_set(b: &str, h: &str, sigma: &str) -> CoefficientSet {
    let flat = DeclaredBound::new(4.0, 0.0).unwrap();
    CoefficientSet::new(
        1,
        1,
        R0,
        vec![parse_coeff(b, 1, R0).unwrap()],
        vec![vec![parse_coeff(h, 1, R0).unwrap()]],
        vec![vec![parse_coeff(sigma, 1, R0).unwrap()]],
        flat.clone(),
        flat,
    )
    .unwrap()
}

/// Drift dominated by mean reversion, local diffusion: both structural
/// conditions hold, so order must be preserved pathwise.
fn monotone_set() -> CoefficientSet {
    coeff_set(
        "-x[1](0) + 0.5*x[1](-0.25)",
        "0.1*tanh(x[1](-0.25))",
        "0.5 + 0.2*sin(x[1](0))",
    )
}

/// Same drift, but the diffusion reads a lagged value: condition two's
/// locality requirement fails.
fn nonlocal_set() -> CoefficientSet {
    coeff_set("-x[1](0)", "0", "0.5*x[1](-0.25)")
}

fn policies() -> Vec<VolatilityPolicy> {
    let b = bounds();
    vec![
        VolatilityPolicy::constant(SymMatrix::scaled_identity(1, 1.0), b.clone()).unwrap(),
        VolatilityPolicy::constant(SymMatrix::scaled_identity(1, 4.0), b.clone()).unwrap(),
        VolatilityPolicy::feedback_threshold(
            0,
            0.0,
            SymMatrix::scaled_identity(1, 1.0),
            SymMatrix::scaled_identity(1, 4.0),
            b,
        )
        .unwrap(),
    ]
}

#[test]
fn parsed_coefficients_preserve_order_pathwise() {
    let set = monotone_set();
    let grid = TimeGrid::new(0.0, 1.0, 0.015625, R0).unwrap();
    let xi = SegmentPath::constant(&[0.5], R0, grid.n_lag()).unwrap();
    let xibar = SegmentPath::constant(&[1.0], R0, grid.n_lag()).unwrap();
    for (pi, policy) in policies().iter().enumerate() {
        let batch = drive(policy, &grid, 100, 0x9100 + pi as u64);
        let pair = gsde_core::simulate_pair(&set, &set, &xi, &xibar, &batch).unwrap();
        for p in 0..pair.n_paths() {
            for idx in 0..pair.n_points() {
                let x = pair.state(Side::X, p, idx)[0];
                let xb = pair.state(Side::Xbar, p, idx)[0];
                assert!(
                    x <= xb + 1e-9,
                    "policy {pi} path {p} point {idx}: {x} > {xb}"
                );
            }
        }
    }
}

#[test]
fn condition_checks_and_the_verdict_agree() {
    let set = monotone_set();
    let b = bounds();
    let t_grid: Vec<f64> = (0..9).map(|j| j as f64 / 8.0).collect();
    let c1 = check_condition1(&set, &set, &b, &t_grid, 500, 1e-8, 0x9201).unwrap();
    assert!(c1.pass, "max margin {}", c1.max_margin);
    let c2 = check_condition2(&set, &set, &t_grid, 500, 1e-8, 0x9202).unwrap();
    assert!(c2.pass, "max margin {}", c2.max_margin);

    let grid = TimeGrid::new(0.0, 1.0, 0.015625, R0).unwrap();
    let xi = SegmentPath::constant(&[0.5], R0, grid.n_lag()).unwrap();
    let xibar = SegmentPath::constant(&[1.0], R0, grid.n_lag()).unwrap();
    let band = 5.0 * 0.015625_f64.sqrt();
    let verdict = gsde_core::verify_order_preservation(
        &set,
        &set,
        &xi,
        &xibar,
        &policies(),
        &grid,
        200,
        band,
        0.02,
        0x9203,
    )
    .unwrap();
    assert!(verdict.preserved, "violation {}", verdict.gexp_of_violation.value());
    assert!(!verdict.crossing_detected());
}

#[test]
fn nonlocal_diffusion_is_witnessed_and_replays() {
    let set = nonlocal_set();
    let b = bounds();
    let t_grid: Vec<f64> = (0..9).map(|j| j as f64 / 8.0).collect();
    let report = check_condition2(&set, &set, &t_grid, 500, 1e-8, 0x9301).unwrap();
    assert!(!report.pass);
    assert!(
        matches!(report.witness.kind, WitnessKind::SigmaLocality { .. }),
        "{:?}",
        report.witness.kind
    );
    let replayed = report.replay(&set, &set, &b).unwrap();
    assert!(
        (replayed - report.max_margin).abs() <= 1e-10,
        "replay {replayed} vs reported {}",
        report.max_margin
    );
}

#[test]
fn generator_value_caps_the_estimator() {
    // E[B(1)^2] = 2 G(1) T for the scalar driver: the worst constant
    // policy saturates the generator's upper corner
    let b = bounds();
    let grid = TimeGrid::new(0.0, 1.0, 0.03125, 0.0).unwrap();
    let pols: Vec<VolatilityPolicy> = [1.0, 2.5, 4.0]
        .iter()
        .map(|&g| {
            VolatilityPolicy::constant(SymMatrix::scaled_identity(1, g), b.clone()).unwrap()
        })
        .collect();
    let est = estimate_gexp(
        |p: &DriverPath| Ok(p.b_total()[0].powi(2)),
        &pols,
        &grid,
        2000,
        0x9401,
    )
    .unwrap();
    let ceiling = 2.0 * g_eval(&SymMatrix::scaled_identity(1, 1.0), &b).unwrap();
    assert!(
        (est.value() - ceiling).abs() <= 3.0 * est.value_se(),
        "{} vs 2G(1) = {ceiling} (se {})",
        est.value(),
        est.value_se()
    );
}

#[test]
fn policy_search_finds_the_high_corner() {
    let b = bounds();
    let grid = TimeGrid::new(0.0, 1.0, 0.03125, 0.0).unwrap();
    let low = estimate_gexp(
        |p: &DriverPath| Ok(p.b_total()[0].powi(2)),
        &[VolatilityPolicy::constant(SymMatrix::scaled_identity(1, 1.0), b.clone()).unwrap()],
        &grid,
        500,
        0x9501,
    )
    .unwrap();
    let (_, best) = policy_search(
        |p: &DriverPath| Ok(p.b_total()[0].powi(2)),
        &PolicyFamily::ConstantDiag,
        &b,
        6,
        &grid,
        500,
        0x9501,
    )
    .unwrap();
    assert!(
        best.value() >= low.value(),
        "search {} fell below the low corner {}",
        best.value(),
        low.value()
    );
}

#[test]
fn smoothing_sandwiches_simulated_gaps() {
    // psi_n(s) lies in [s+ - 1/(2n), s+] for every s, simulated gap
    // values included
    let set = monotone_set();
    let grid = TimeGrid::new(0.0, 0.5, 0.03125, R0).unwrap();
    let xi = SegmentPath::constant(&[1.0], R0, grid.n_lag()).unwrap();
    let xibar = SegmentPath::constant(&[0.25], R0, grid.n_lag()).unwrap();
    let policy =
        VolatilityPolicy::constant(SymMatrix::scaled_identity(1, 2.0), bounds()).unwrap();
    let batch = drive(&policy, &grid, 50, 0x9601);
    let pair = gsde_core::simulate_pair(&set, &set, &xi, &xibar, &batch).unwrap();
    for n in [1u32, 4, 16] {
        let fam = PsiFamily::new(n).unwrap();
        let half_knee = 0.5 / n as f64;
        for p in 0..pair.n_paths() {
            for idx in 0..pair.n_points() {
                let s = pair.state(Side::X, p, idx)[0] - pair.state(Side::Xbar, p, idx)[0];
                let plus = s.max(0.0);
                let v = fam.psi(s);
                assert!(
                    v <= plus + 1e-12 && v >= plus - half_knee - 1e-12,
                    "n = {n} s = {s}: psi = {v}"
                );
            }
        }
    }
}

#[test]
fn declared_envelopes_cover_sampled_quotients() {
    let set = monotone_set();
    for t in [0.0, 0.5, 1.0] {
        let est = set.estimate_lipschitz(t, 500, 0.5, 0x9701).unwrap();
        assert!(
            !est.violation,
            "t = {t}: observed {} over declared {}",
            est.ratio_max, est.declared
        );
        assert!(est.ratio_max > 0.0);
    }
}

#[test]
fn probe_rejects_disagreeing_endpoints() {
    let set = monotone_set();
    let grid = TimeGrid::new(0.0, 0.5, 0.015625, R0).unwrap();
    let xi = SegmentPath::constant(&[0.5], R0, grid.n_lag()).unwrap();
    let eta = SegmentPath::constant(&[1.0], R0, grid.n_lag()).unwrap();
    let err = necessity_probe_drift(
        &set,
        &set,
        &bounds(),
        &SymMatrix::scaled_identity(1, 4.0),
        1,
        &xi,
        &eta,
        &[0.25, 0.125],
        &grid,
        50,
        0x9801,
    )
    .unwrap_err();
    assert!(err.to_string().contains("right endpoint"), "{err}");
}
