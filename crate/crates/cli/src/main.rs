//! Command-line front end. Exit codes: 0 on success, 1 on usage or
//! runtime errors, 2 when a verification subcommand ran cleanly and the
//! property under test failed.

mod config;
mod report;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::{ConfigFile, Experiment, FamilyKind, FunctionalTarget, GexpectConfig, Overrides};
use gsde_core::smoothing::psi_limit_check;
use gsde_core::{
    check_condition1, check_condition2, drive, estimate_capacity, estimate_gexp, eval_coeff,
    g_report, necessity_probe_drift, parse_coeff, policy_search, simulate_pair,
    verify_order_preservation, CoeffExpr, DriverPath, PairKernel, PolicyFamily, PsiFamily,
    Segment, SegmentPath, Side, TimeGrid, VolBounds, WitnessKind,
};

#[derive(Parser)]
#[command(
    name = "gsde",
    version,
    about = "Coupled simulation and order-preservation checks for path-dependent SDEs under volatility uncertainty"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the seed; beats GSDE_SEED, which beats the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Override the number of Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Override the grid step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the worst-case generator on one symmetric matrix.
    GEval {
        /// Inline matrix, rows separated by ';' (e.g. "1 0.5; 0.5 -2");
        /// falls back to the config's [gfunc] table.
        #[arg(long)]
        matrix: Option<String>,
        /// Lower volatility bound (default 1, or the config's).
        #[arg(long)]
        sigma_lo: Option<f64>,
        /// Upper volatility bound (default 2, or the config's).
        #[arg(long)]
        sigma_hi: Option<f64>,
        /// Random feasible pairings behind the lower-bound certificate.
        #[arg(long)]
        oracle_samples: Option<usize>,
    },
    /// Tabulate the positive-part smoothing family and its limit checks.
    PsiTable {
        /// Smoothing indices (comma-separated; default 1,2,4,8).
        #[arg(long, value_delimiter = ',')]
        n: Vec<u32>,
        #[arg(long, allow_negative_numbers = true)]
        s_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        s_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Simulate the coupled pair under the first configured policy.
    Simulate,
    /// Worst-case expectation of the configured functional.
    Gexpect,
    /// Worst-case probability of the configured event.
    Capacity,
    /// Sample the drift and diffusion comparison conditions.
    Check,
    /// Estimate order preservation across the configured policies.
    Verify,
    /// Short-time slope of the coupled gap under a constant policy.
    NecessityProbe,
    /// Search the configured policy family for order violations.
    FindViolation,
    /// Re-emit the configuration in normalized form.
    Normalize,
}

fn main() {
    // a downstream consumer closing the pipe early (`gsde ... | head`)
    // should end the process quietly, not panic a println!
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::GEval { matrix, sigma_lo, sigma_hi, oracle_samples } => {
            cmd_g_eval(cli, matrix.as_deref(), *sigma_lo, *sigma_hi, *oracle_samples)
        }
        Cmd::PsiTable { n, s_min, s_max, points } => {
            cmd_psi_table(cli, n, *s_min, *s_max, *points)
        }
        Cmd::Simulate => cmd_simulate(cli),
        Cmd::Gexpect => cmd_estimate(cli, false),
        Cmd::Capacity => cmd_estimate(cli, true),
        Cmd::Check => cmd_check(cli),
        Cmd::Verify => cmd_verify(cli),
        Cmd::NecessityProbe => cmd_necessity(cli),
        Cmd::FindViolation => cmd_find_violation(cli),
        Cmd::Normalize => cmd_normalize(cli),
    }
}

/// Seed precedence: --seed flag, then GSDE_SEED, then the config.
fn seed_override(cli: &Cli) -> Result<Option<u64>> {
    if let Some(seed) = cli.seed {
        return Ok(Some(seed));
    }
    match std::env::var("GSDE_SEED") {
        Ok(text) => {
            let seed = text
                .trim()
                .parse::<u64>()
                .with_context(|| format!("GSDE_SEED must be an unsigned integer, got {text:?}"))?;
            Ok(Some(seed))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(err).context("reading GSDE_SEED"),
    }
}

fn overrides(cli: &Cli) -> Result<Overrides> {
    Ok(Overrides {
        seed: seed_override(cli)?,
        out_dir: cli.out_dir.clone(),
        n_paths: cli.paths,
        dt: cli.dt,
    })
}

fn load_config(cli: &Cli) -> Result<Option<ConfigFile>> {
    cli.config.as_ref().map(|p| config::load(p)).transpose()
}

fn experiment(cli: &Cli) -> Result<(ConfigFile, Experiment)> {
    let path = cli
        .config
        .as_ref()
        .context("this command needs --config pointing at an experiment file")?;
    let file = config::load(path)?;
    let exp = file.experiment(&overrides(cli)?)?;
    Ok((file, exp))
}

fn parse_inline_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, row_text) in text.split(';').enumerate() {
        let entries: Vec<f64> = row_text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .with_context(|| format!("matrix row {}: bad number {s:?}", i + 1))
            })
            .collect::<Result<_>>()?;
        if entries.is_empty() {
            bail!("matrix row {} is empty", i + 1);
        }
        rows.push(entries);
    }
    if rows.iter().any(|r| r.len() != rows.len()) {
        bail!("matrix must be square, got {} rows", rows.len());
    }
    Ok(rows)
}

fn cmd_g_eval(
    cli: &Cli,
    matrix: Option<&str>,
    sigma_lo: Option<f64>,
    sigma_hi: Option<f64>,
    oracle_samples: Option<usize>,
) -> Result<i32> {
    let file = load_config(cli)?;
    let rows = if let Some(text) = matrix {
        parse_inline_matrix(text)?
    } else if let Some(gf) = file.as_ref().and_then(|f| f.gfunc.as_ref()) {
        gf.matrix.clone()
    } else {
        bail!("provide --matrix or a [gfunc] table in the config");
    };
    let m = rows.len();
    let a = config::build_matrix(&rows, m, "matrix")?;
    let lo = sigma_lo
        .or_else(|| file.as_ref().map(|f| f.bounds.sigma_lo))
        .unwrap_or(1.0);
    let hi = sigma_hi
        .or_else(|| file.as_ref().map(|f| f.bounds.sigma_hi))
        .unwrap_or(2.0);
    let bounds = VolBounds::new(lo, hi, m)?;
    let n_samples = oracle_samples
        .or_else(|| file.as_ref().and_then(|f| f.gfunc.as_ref()).map(|g| g.oracle_samples))
        .unwrap_or(10_000);
    let seed = seed_override(cli)?
        .or_else(|| file.as_ref().map(|f| f.run.seed))
        .unwrap_or(1);
    let rep = g_report(&a, &bounds, n_samples, seed)?;
    println!("G(A) = {}", rep.value);
    println!(
        "certificate gap = {} over {} sampled pairings (negative past -1e-10 would refute the closed form)",
        rep.certificate_gap, n_samples
    );
    println!("maximizer:");
    for i in 0..m {
        let row: Vec<String> = (0..m).map(|j| rep.maximizer.get(i, j).to_string()).collect();
        println!("  [{}]", row.join("  "));
    }
    Ok(0)
}

fn cmd_psi_table(
    cli: &Cli,
    n: &[u32],
    s_min: Option<f64>,
    s_max: Option<f64>,
    points: Option<usize>,
) -> Result<i32> {
    let file = load_config(cli)?;
    let psi_cfg = file
        .as_ref()
        .and_then(|f| f.psi.clone())
        .unwrap_or_default();
    let mut n_list = if n.is_empty() { psi_cfg.n.clone() } else { n.to_vec() };
    n_list.sort_unstable();
    n_list.dedup();
    if n_list.is_empty() {
        bail!("need at least one smoothing index");
    }
    let s_min = s_min.unwrap_or(psi_cfg.s_min);
    let s_max = s_max.unwrap_or(psi_cfg.s_max);
    let points = points.unwrap_or(psi_cfg.points);
    if points < 2 {
        bail!("need at least two grid points");
    }
    if !(s_max > s_min) {
        bail!("need s_max > s_min, got [{s_min}, {s_max}]");
    }
    let grid: Vec<f64> = (0..points)
        .map(|j| s_min + (s_max - s_min) * j as f64 / (points - 1) as f64)
        .collect();

    let mut rows = Vec::with_capacity(n_list.len() * points);
    for &nv in &n_list {
        let fam = PsiFamily::new(nv)?;
        for &s in &grid {
            rows.push(format!(
                "{nv},{s},{},{},{}",
                fam.psi(s),
                fam.psi_prime(s),
                fam.psi_second(s)
            ));
        }
    }
    let limit = psi_limit_check(&n_list, &grid)?;
    println!(
        "indices {:?} on {} points over [{s_min}, {s_max}]",
        n_list, points
    );
    println!(
        "limit checks: {} (derivative in range {}, monotone in n {}, curvature bounded {})",
        if limit.pass() { "PASS" } else { "FAIL" },
        limit.prime_in_range,
        limit.monotone_in_n,
        limit.curvature_product_ok
    );
    println!(
        "max s*psi''(s) = {}, max |(s+ - psi) - 1/(2n)| beyond the knee = {}",
        limit.max_curvature_product, limit.max_gap_error_beyond_knee
    );

    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| file.as_ref().map(|f| f.run.out_dir.clone()));
    match out_dir {
        Some(dir) => {
            let path = report::write_csv(&dir, "psi_table.csv", "n,s,psi,psi_prime,psi_second", &rows)?;
            println!("wrote {}", path.display());
        }
        None => {
            println!("n,s,psi,psi_prime,psi_second");
            for row in &rows {
                println!("{row}");
            }
        }
    }
    Ok(if limit.pass() { 0 } else { 2 })
}

fn cmd_simulate(cli: &Cli) -> Result<i32> {
    let (_file, exp) = experiment(cli)?;
    let policy = exp
        .policies
        .first()
        .context("simulate needs at least one [[policy]]")?;
    let batch = drive(policy, &exp.grid, exp.n_paths, exp.seed);
    let traj = simulate_pair(&exp.set_x, &exp.set_xbar, &exp.xi, &exp.xibar, &batch)?;
    let mut rows = Vec::with_capacity(exp.n_paths * traj.n_points());
    for p in 0..exp.n_paths {
        for idx in 0..traj.n_points() {
            let mut row = format!("{p},{}", traj.time_at(idx));
            for v in traj.state(Side::X, p, idx) {
                row.push(',');
                row.push_str(&v.to_string());
            }
            for v in traj.state(Side::Xbar, p, idx) {
                row.push(',');
                row.push_str(&v.to_string());
            }
            rows.push(row);
        }
    }
    let mut header = String::from("path,t");
    for c in 1..=exp.d {
        header.push_str(&format!(",x{c}"));
    }
    for c in 1..=exp.d {
        header.push_str(&format!(",xbar{c}"));
    }
    let path = report::write_csv(&exp.out_dir, "trajectory.csv", &header, &rows)?;
    println!(
        "wrote {} ({} paths, {} points each, window included)",
        path.display(),
        exp.n_paths,
        traj.n_points()
    );
    Ok(0)
}

/// Rolling window of the most recent n_lag+1 states on the X side,
/// reassembled into the terminal segment after the run.
struct TerminalWindow {
    d: usize,
    width: usize,
    slots: Vec<f64>,
}

impl TerminalWindow {
    fn new(xi: &SegmentPath) -> TerminalWindow {
        let d = xi.d();
        let width = xi.n_lag() + 1;
        let mut slots = vec![0.0; d * width];
        for j in 0..width {
            for c in 0..d {
                slots[j * d + c] = xi.sample(c, j);
            }
        }
        TerminalWindow { d, width, slots }
    }

    /// State at grid index k, absolute sample index n_lag + k.
    fn record(&mut self, n_lag: usize, k: usize, x: &[f64]) {
        let slot = (n_lag + k) % self.width;
        self.slots[slot * self.d..(slot + 1) * self.d].copy_from_slice(x);
    }

    fn segment(&self, r0: f64, n_steps: usize) -> gsde_core::Result<SegmentPath> {
        // sample j sits at absolute index n_steps + j
        let mut values = vec![0.0; self.d * self.width];
        for j in 0..self.width {
            let slot = (n_steps + j) % self.width;
            for c in 0..self.d {
                values[c * self.width + j] = self.slots[slot * self.d + c];
            }
        }
        SegmentPath::new(self.d, r0, self.width - 1, values)
    }
}

/// Driver path over its terminal window, zero before the start time.
fn driver_terminal_segment(
    path: &DriverPath,
    r0: f64,
    n_lag: usize,
) -> gsde_core::Result<SegmentPath> {
    let m = path.m();
    let n_steps = path.n_steps();
    let width = n_lag + 1;
    let mut b = vec![0.0f64; m];
    let mut values = vec![0.0; m * width];
    for k in 0..n_steps {
        for (c, db) in path.db_at(k).iter().enumerate() {
            b[c] += db;
        }
        // sample j holds the value at grid index n_steps - n_lag + j
        let idx = k + 1;
        if idx + n_lag >= n_steps {
            let j = idx + n_lag - n_steps;
            for c in 0..m {
                values[c * width + j] = b[c];
            }
        }
    }
    SegmentPath::new(m, r0, n_lag, values)
}

fn driver_functional<'a>(
    expr: &'a CoeffExpr,
    grid: &'a TimeGrid,
) -> impl FnMut(&DriverPath) -> gsde_core::Result<f64> + 'a {
    move |path| {
        let seg = driver_terminal_segment(path, grid.r0(), grid.n_lag())?;
        eval_coeff(expr, grid.t_end(), &seg)
    }
}

fn state_functional<'a>(
    kernel: &'a PairKernel<'a>,
    xi: &'a SegmentPath,
    expr: &'a CoeffExpr,
    n_paths: usize,
) -> impl FnMut(&DriverPath) -> gsde_core::Result<f64> + 'a {
    let mut counter = 0usize;
    move |driver| {
        let path_idx = counter % n_paths.max(1);
        counter += 1;
        let n_lag = kernel.grid().n_lag();
        let mut window = TerminalWindow::new(xi);
        kernel.run_path(path_idx, driver, |k, _t, x, _xbar| window.record(n_lag, k, x))?;
        let seg = window.segment(kernel.grid().r0(), driver.n_steps())?;
        eval_coeff(expr, kernel.grid().t_end(), &seg)
    }
}

fn cmd_estimate(cli: &Cli, capacity: bool) -> Result<i32> {
    let (file, exp) = experiment(cli)?;
    let gcfg: &GexpectConfig = file
        .gexpect
        .as_ref()
        .context("this command needs a [gexpect] table")?;
    if exp.policies.is_empty() {
        bail!("need at least one [[policy]]");
    }
    let est = match gcfg.target {
        FunctionalTarget::B => {
            let expr =
                parse_coeff(&gcfg.functional, exp.m, exp.r0).context("gexpect.functional")?;
            let mut f = driver_functional(&expr, &exp.grid);
            if capacity {
                let thr = gcfg.threshold;
                estimate_capacity(
                    |p| Ok(f(p)? > thr),
                    &exp.policies,
                    &exp.grid,
                    exp.n_paths,
                    exp.seed,
                )?
            } else {
                estimate_gexp(f, &exp.policies, &exp.grid, exp.n_paths, exp.seed)?
            }
        }
        FunctionalTarget::X => {
            let expr =
                parse_coeff(&gcfg.functional, exp.d, exp.r0).context("gexpect.functional")?;
            let kernel =
                PairKernel::new(&exp.set_x, &exp.set_xbar, &exp.xi, &exp.xibar, &exp.grid)?;
            let mut f = state_functional(&kernel, &exp.xi, &expr, exp.n_paths);
            if capacity {
                let thr = gcfg.threshold;
                estimate_capacity(
                    |p| Ok(f(p)? > thr),
                    &exp.policies,
                    &exp.grid,
                    exp.n_paths,
                    exp.seed,
                )?
            } else {
                estimate_gexp(f, &exp.policies, &exp.grid, exp.n_paths, exp.seed)?
            }
        }
    };
    let (label, name) = if capacity {
        ("worst-case probability", "capacity.csv")
    } else {
        ("worst-case expectation", "gexpect.csv")
    };
    let path = report::write_csv(&exp.out_dir, name, report::ESTIMATE_HEADER, &report::estimate_rows(&est))?;
    report::print_estimate(label, &est);
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_check(cli: &Cli) -> Result<i32> {
    let (_file, exp) = experiment(cli)?;
    let (t0, t_end) = (exp.grid.t0(), exp.grid.t_end());
    let t_grid: Vec<f64> = (0..17).map(|j| t0 + (t_end - t0) * j as f64 / 16.0).collect();
    let c1 = check_condition1(
        &exp.set_x,
        &exp.set_xbar,
        &exp.bounds,
        &t_grid,
        exp.n_trials,
        exp.tol,
        exp.seed,
    )?;
    let c2 = check_condition2(&exp.set_x, &exp.set_xbar, &t_grid, exp.n_trials, exp.tol, exp.seed)?;
    for (name, rep) in [("condition1.csv", &c1), ("condition2.csv", &c2)] {
        let rows: Vec<String> = rep
            .samples()
            .iter()
            .map(|s| format!("{},{},{},{}", s.trial, s.t, s.component, s.margin))
            .collect();
        report::write_csv(&exp.out_dir, name, "trial,t,component,margin", &rows)?;
    }
    println!("{c1}");
    println!("{c2}");
    let mut code = 0;
    for rep in [&c1, &c2] {
        if !rep.pass {
            let kind = match rep.witness.kind {
                WitnessKind::Drift => "drift margin".to_string(),
                WitnessKind::SigmaEquality => "diffusion equality".to_string(),
                WitnessKind::SigmaLocality { side } => format!(
                    "diffusion locality ({} side)",
                    match side {
                        Side::X => "X",
                        Side::Xbar => "Xbar",
                    }
                ),
            };
            let replayed = rep.replay(&exp.set_x, &exp.set_xbar, &exp.bounds)?;
            println!("  {kind} witness replays to margin {replayed}");
            code = 2;
        }
    }
    println!("wrote {}", exp.out_dir.join("condition{1,2}.csv").display());
    Ok(code)
}

fn cmd_verify(cli: &Cli) -> Result<i32> {
    let (_file, exp) = experiment(cli)?;
    if exp.policies.is_empty() {
        bail!("need at least one [[policy]]");
    }
    let verdict = verify_order_preservation(
        &exp.set_x,
        &exp.set_xbar,
        &exp.xi,
        &exp.xibar,
        &exp.policies,
        &exp.grid,
        exp.n_paths,
        exp.band,
        exp.accept_threshold,
        exp.seed,
    )?;
    report::write_csv(
        &exp.out_dir,
        "verify_gexp.csv",
        report::ESTIMATE_HEADER,
        &report::estimate_rows(&verdict.gexp_of_violation),
    )?;
    report::write_csv(
        &exp.out_dir,
        "verify_capacity.csv",
        report::ESTIMATE_HEADER,
        &report::estimate_rows(&verdict.capacity_of_crossing),
    )?;
    report::print_estimate("violation", &verdict.gexp_of_violation);
    report::print_estimate("crossing capacity", &verdict.capacity_of_crossing);
    let crossing = verdict.crossing_detected();
    println!(
        "band = {}, accept threshold = {}, order preserved: {}, crossing detected: {}",
        verdict.band, verdict.accept_threshold, verdict.preserved, crossing
    );
    Ok(if verdict.preserved && !crossing { 0 } else { 2 })
}

fn cmd_necessity(cli: &Cli) -> Result<i32> {
    let (file, exp) = experiment(cli)?;
    let cfg = file
        .necessity
        .as_ref()
        .context("this command needs a [necessity] table")?;
    let gamma = config::build_matrix(&cfg.gamma, exp.m, "necessity.gamma")?;
    let probe = necessity_probe_drift(
        &exp.set_x,
        &exp.set_xbar,
        &exp.bounds,
        &gamma,
        cfg.component,
        &exp.xi,
        &exp.xibar,
        &cfg.s_list,
        &exp.grid,
        exp.n_paths,
        exp.seed,
    )?;
    let rows: Vec<String> = probe
        .points
        .iter()
        .map(|p| format!("{},{},{},{},{}", p.s, p.gap_mean, p.gap_se, p.quotient, p.quotient_se))
        .collect();
    let path = report::write_csv(
        &exp.out_dir,
        "necessity_probe.csv",
        "s,gap_mean,gap_se,quotient,quotient_se",
        &rows,
    )?;
    println!(
        "short-time slope = {} (se {}), direct margin = {}",
        probe.slope, probe.slope_se, probe.direct
    );
    println!("wrote {}", path.display());
    Ok(0)
}

fn crossing_indicator<'a>(
    kernel: &'a PairKernel<'a>,
    band: f64,
    n_paths: usize,
) -> impl FnMut(&DriverPath) -> gsde_core::Result<f64> + 'a {
    let mut counter = 0usize;
    move |driver| {
        let path_idx = counter % n_paths.max(1);
        counter += 1;
        let mut crossed = false;
        kernel.run_path(path_idx, driver, |_k, _t, x, xbar| {
            if !crossed {
                crossed = x.iter().zip(xbar).any(|(a, b)| *a > *b + band);
            }
        })?;
        Ok(if crossed { 1.0 } else { 0.0 })
    }
}

fn cmd_find_violation(cli: &Cli) -> Result<i32> {
    let (file, exp) = experiment(cli)?;
    let scfg = file
        .search
        .as_ref()
        .context("this command needs a [search] table")?;
    let family = match scfg.family {
        FamilyKind::ConstantDiag => PolicyFamily::ConstantDiag,
        FamilyKind::PiecewiseDiag => PolicyFamily::PiecewiseConstantDiag {
            n_stages: scfg.n_stages.unwrap_or(2),
        },
        FamilyKind::Feedback => {
            let component = scfg
                .component
                .context("search.component is required for the feedback family")?;
            if component == 0 || component > exp.m {
                bail!("search.component: 1-based driver component out of range");
            }
            PolicyFamily::FeedbackThreshold {
                component: component - 1,
                threshold_lo: scfg.threshold_lo.unwrap_or(-1.0),
                threshold_hi: scfg.threshold_hi.unwrap_or(1.0),
            }
        }
    };
    let kernel = PairKernel::new(&exp.set_x, &exp.set_xbar, &exp.xi, &exp.xibar, &exp.grid)?;
    let f = crossing_indicator(&kernel, exp.band, exp.n_paths);
    let (_best, trace) = policy_search(
        f,
        &family,
        &exp.bounds,
        scfg.budget,
        &exp.grid,
        exp.n_paths,
        exp.seed,
    )?;
    let path = report::write_csv(
        &exp.out_dir,
        "find_violation.csv",
        report::ESTIMATE_HEADER,
        &report::estimate_rows(&trace),
    )?;
    let top = trace.argmax_policy();
    println!(
        "best crossing frequency {} (se {}) with {} over {} evaluations",
        top.mean,
        top.se,
        top.params,
        trace.per_policy().len()
    );
    let detected = top.mean > 0.0 && top.mean >= 3.0 * top.se;
    println!("violation detected: {detected} (band = {})", exp.band);
    println!("wrote {}", path.display());
    Ok(if detected { 2 } else { 0 })
}

fn cmd_normalize(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .context("normalize needs --config pointing at an experiment file")?;
    let file = config::load(path)?;
    print!("{}", config::normalize(&file)?);
    Ok(0)
}
