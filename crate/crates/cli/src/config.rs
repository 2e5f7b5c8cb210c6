//! Experiment configuration: TOML schema, validation, and conversion
//! into core types. Every table rejects unknown keys so typos fail the
//! parse instead of silently changing the experiment, and the parsed
//! form re-serializes to a normalized document that parses back to an
//! identical configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use gsde_core::{
    eval_coeff, parse_coeff, CoefficientSet, DeclaredBound, SegmentPath, SymMatrix, TimeGrid,
    VolBounds, VolatilityPolicy,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dimensions: Dimensions,
    pub bounds: Bounds,
    pub grid: Grid,
    pub coefficients: Coefficients,
    pub initial: Initial,
    #[serde(default, rename = "policy", skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<PolicyConfig>,
    pub run: RunConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gexpect: Option<GexpectConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gfunc: Option<GfuncConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub necessity: Option<NecessityConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub d: usize,
    pub m: usize,
    pub r0: f64,
}

/// Volatility bounds as sigma values; the box covers [lo^2, hi^2].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub x: CoeffSide,
    /// Defaults to the same coefficients as `x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xbar: Option<CoeffSide>,
}

/// One equation's coefficient texts. `b` holds d entries, `h` holds d
/// blocks of m*m entries in row-major order, `sigma` holds d rows of m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSide {
    pub b: Vec<String>,
    pub h: Vec<Vec<String>>,
    pub sigma: Vec<Vec<String>>,
    pub lip_bound: BoundCfg,
    pub growth_bound: BoundCfg,
}

/// Affine-in-time envelope c0 + c1 t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCfg {
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub xi: InitialConfig,
    /// Defaults to the same segment as `xi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xibar: Option<InitialConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialConfig {
    /// One value per component, held flat over the whole window.
    Constant { values: Vec<f64> },
    /// Explicit samples: d rows of r0/dt + 1 values, oldest first.
    Samples { samples: Vec<Vec<f64>> },
    /// One expression per component in the offset variable t over
    /// [-r0, 0]; no path probes allowed.
    Expr { exprs: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    Constant {
        gamma: Vec<Vec<f64>>,
    },
    Piecewise {
        switch_times: Vec<f64>,
        gammas: Vec<Vec<Vec<f64>>>,
    },
    Feedback {
        /// 1-based driver component, matching the x[i] convention.
        component: usize,
        threshold: f64,
        low: Vec<Vec<f64>>,
        high: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Trials for the sampled condition checks.
    #[serde(default = "default_n_trials")]
    pub n_trials: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_n_trials() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Margin tolerance for the condition checks.
    pub tol: f64,
    /// Crossing allowance; 0 resolves to 5 sqrt(dt) coefficient_scale.
    pub band: f64,
    /// Acceptance threshold on the violation estimate.
    pub accept_threshold: f64,
    /// Scale of the coefficients, used by the automatic band.
    pub coefficient_scale: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { tol: 1e-8, band: 0.0, accept_threshold: 0.02, coefficient_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    ConstantDiag,
    PiecewiseDiag,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub family: FamilyKind,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_stages: Option<usize>,
    /// 1-based driver component for the feedback family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalTarget {
    /// Evaluate on the driver path's terminal window.
    B,
    /// Evaluate on the simulated X trajectory's terminal window.
    X,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GexpectConfig {
    pub target: FunctionalTarget,
    /// Coefficient-grammar expression over the terminal window.
    pub functional: String,
    /// Capacity event: functional > threshold.
    #[serde(default)]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfuncConfig {
    pub matrix: Vec<Vec<f64>>,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: usize,
}

fn default_oracle_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiConfig {
    pub n: Vec<u32>,
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

impl Default for PsiConfig {
    fn default() -> Self {
        PsiConfig { n: vec![1, 2, 4, 8], s_min: -1.0, s_max: 2.0, points: 49 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NecessityConfig {
    /// 1-based state component.
    pub component: usize,
    pub gamma: Vec<Vec<f64>>,
    pub s_list: Vec<f64>,
}

/// Command-line overrides applied on top of the parsed file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
}

/// Fully validated experiment, ready to hand to the core modules.
pub struct Experiment {
    pub d: usize,
    pub m: usize,
    pub r0: f64,
    pub bounds: VolBounds,
    pub grid: TimeGrid,
    pub set_x: CoefficientSet,
    pub set_xbar: CoefficientSet,
    pub xi: SegmentPath,
    pub xibar: SegmentPath,
    pub policies: Vec<VolatilityPolicy>,
    pub n_paths: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub tol: f64,
    /// Resolved crossing allowance (the automatic rule applied).
    pub band: f64,
    pub accept_threshold: f64,
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn normalize(config: &ConfigFile) -> Result<String> {
    toml::to_string_pretty(config).context("serializing normalized config")
}

pub fn build_matrix(rows: &[Vec<f64>], m: usize, field: &str) -> Result<SymMatrix> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        bail!("{field}: expected an {m}x{m} matrix");
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    SymMatrix::from_rows_strict(m, &flat).with_context(|| field.to_string())
}

fn build_side(side: &CoeffSide, d: usize, m: usize, r0: f64, field: &str) -> Result<CoefficientSet> {
    let parse_list = |texts: &[String], what: &str| -> Result<Vec<_>> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| parse_coeff(t, d, r0).with_context(|| format!("{field}.{what}[{i}]")))
            .collect()
    };
    let b = parse_list(&side.b, "b")?;
    let mut h = Vec::with_capacity(side.h.len());
    for (i, block) in side.h.iter().enumerate() {
        h.push(parse_list(block, &format!("h[{i}]"))?);
    }
    let mut sigma = Vec::with_capacity(side.sigma.len());
    for (i, row) in side.sigma.iter().enumerate() {
        sigma.push(parse_list(row, &format!("sigma[{i}]"))?);
    }
    let lip = DeclaredBound::new(side.lip_bound.c0, side.lip_bound.c1)
        .with_context(|| format!("{field}.lip_bound"))?;
    let growth = DeclaredBound::new(side.growth_bound.c0, side.growth_bound.c1)
        .with_context(|| format!("{field}.growth_bound"))?;
    CoefficientSet::new(d, m, r0, b, h, sigma, lip, growth).with_context(|| field.to_string())
}

fn build_initial(
    init: &InitialConfig,
    d: usize,
    r0: f64,
    n_lag: usize,
    dt: f64,
    field: &str,
) -> Result<SegmentPath> {
    match init {
        InitialConfig::Constant { values } => {
            if values.len() != d {
                bail!("{field}: expected {d} values, got {}", values.len());
            }
            SegmentPath::constant(values, r0, n_lag).with_context(|| field.to_string())
        }
        InitialConfig::Samples { samples } => {
            if samples.len() != d {
                bail!("{field}: expected {d} sample rows, got {}", samples.len());
            }
            let mut values = Vec::with_capacity(d * (n_lag + 1));
            for (c, row) in samples.iter().enumerate() {
                if row.len() != n_lag + 1 {
                    bail!(
                        "{field}: component {} holds {} samples but the grid needs {} (r0/dt + 1)",
                        c + 1,
                        row.len(),
                        n_lag + 1
                    );
                }
                values.extend_from_slice(row);
            }
            SegmentPath::new(d, r0, n_lag, values).with_context(|| field.to_string())
        }
        InitialConfig::Expr { exprs } => {
            if exprs.len() != d {
                bail!("{field}: expected {d} expressions, got {}", exprs.len());
            }
            // expressions live on the offset variable t in [-r0, 0]
            let dummy = SegmentPath::constant(&[0.0], 0.0, 0)
                .expect("trivial segment is well-formed");
            let mut values = Vec::with_capacity(d * (n_lag + 1));
            for (c, text) in exprs.iter().enumerate() {
                let expr = parse_coeff(text, 1, 0.0)
                    .with_context(|| format!("{field}.exprs[{c}]"))?;
                if expr.max_index() > 0 {
                    bail!("{field}.exprs[{c}]: initial expressions may reference only t");
                }
                for j in 0..=n_lag {
                    let s = -r0 + j as f64 * dt;
                    values.push(
                        eval_coeff(&expr, s, &dummy)
                            .with_context(|| format!("{field}.exprs[{c}] at t = {s}"))?,
                    );
                }
            }
            SegmentPath::new(d, r0, n_lag, values).with_context(|| field.to_string())
        }
    }
}

pub fn build_policy(
    cfg: &PolicyConfig,
    m: usize,
    bounds: &VolBounds,
    field: &str,
) -> Result<VolatilityPolicy> {
    match cfg {
        PolicyConfig::Constant { gamma } => {
            let g = build_matrix(gamma, m, &format!("{field}.gamma"))?;
            VolatilityPolicy::constant(g, bounds.clone()).with_context(|| field.to_string())
        }
        PolicyConfig::Piecewise { switch_times, gammas } => {
            let mats: Result<Vec<SymMatrix>> = gammas
                .iter()
                .enumerate()
                .map(|(i, g)| build_matrix(g, m, &format!("{field}.gammas[{i}]")))
                .collect();
            VolatilityPolicy::piecewise_constant(switch_times.clone(), mats?, bounds.clone())
                .with_context(|| field.to_string())
        }
        PolicyConfig::Feedback { component, threshold, low, high } => {
            if *component == 0 {
                bail!("{field}.component: components are 1-based");
            }
            let lo = build_matrix(low, m, &format!("{field}.low"))?;
            let hi = build_matrix(high, m, &format!("{field}.high"))?;
            VolatilityPolicy::feedback_threshold(component - 1, *threshold, lo, hi, bounds.clone())
                .with_context(|| field.to_string())
        }
    }
}

impl ConfigFile {
    /// Validate everything and build the core objects, applying the
    /// command-line overrides.
    pub fn experiment(&self, overrides: &Overrides) -> Result<Experiment> {
        let d = self.dimensions.d;
        let m = self.dimensions.m;
        let r0 = self.dimensions.r0;
        let bounds = VolBounds::new(self.bounds.sigma_lo, self.bounds.sigma_hi, m)
            .context("bounds")?;
        let dt = overrides.dt.unwrap_or(self.grid.dt);
        let grid = TimeGrid::new(self.grid.t0, self.grid.t_end, dt, r0).context("grid")?;

        let set_x = build_side(&self.coefficients.x, d, m, r0, "coefficients.x")?;
        let set_xbar = match &self.coefficients.xbar {
            Some(side) => build_side(side, d, m, r0, "coefficients.xbar")?,
            None => set_x.clone(),
        };

        let n_lag = grid.n_lag();
        let xi = build_initial(&self.initial.xi, d, r0, n_lag, dt, "initial.xi")?;
        let xibar = match &self.initial.xibar {
            Some(init) => build_initial(init, d, r0, n_lag, dt, "initial.xibar")?,
            None => xi.clone(),
        };

        let policies: Result<Vec<VolatilityPolicy>> = self
            .policies
            .iter()
            .enumerate()
            .map(|(i, p)| build_policy(p, m, &bounds, &format!("policy[{i}]")))
            .collect();

        let n_paths = overrides.n_paths.unwrap_or(self.run.n_paths);
        let seed = overrides.seed.unwrap_or(self.run.seed);
        let out_dir = overrides
            .out_dir
            .clone()
            .unwrap_or_else(|| self.run.out_dir.clone());

        let th = &self.thresholds;
        if th.band < 0.0 || !th.band.is_finite() {
            bail!("thresholds.band: must be finite and nonnegative");
        }
        let band = if th.band == 0.0 {
            5.0 * dt.sqrt() * th.coefficient_scale
        } else {
            th.band
        };

        Ok(Experiment {
            d,
            m,
            r0,
            bounds,
            grid,
            set_x,
            set_xbar,
            xi,
            xibar,
            policies: policies?,
            n_paths,
            n_trials: self.run.n_trials,
            seed,
            out_dir,
            tol: th.tol,
            band,
            accept_threshold: th.accept_threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsde_core::Segment;

    const SAMPLE: &str = r#"
[dimensions]
d = 1
m = 1
r0 = 0.25

[bounds]
sigma_lo = 1.0
sigma_hi = 2.0

[grid]
t0 = 0.0
t_end = 1.0
dt = 0.0625

[coefficients.x]
b = ["-x[1](0) + 0.5*x[1](-0.25)"]
h = [["0.1*tanh(x[1](-0.25))"]]
sigma = [["0.5 + 0.2*sin(x[1](0))"]]
lip_bound = { c0 = 4.0 }
growth_bound = { c0 = 4.0 }

[initial.xi]
kind = "constant"
values = [0.5]

[initial.xibar]
kind = "expr"
exprs = ["1 + 0.5*t"]

[[policy]]
kind = "constant"
gamma = [[4.0]]

[[policy]]
kind = "piecewise"
switch_times = [0.5]
gammas = [[[1.0]], [[4.0]]]

[run]
n_paths = 100
seed = 7
"#;

    #[test]
    fn sample_config_builds_an_experiment() {
        let cfg: ConfigFile = toml::from_str(SAMPLE).unwrap();
        let exp = cfg.experiment(&Overrides::default()).unwrap();
        assert_eq!(exp.d, 1);
        assert_eq!(exp.grid.n_lag(), 4);
        assert_eq!(exp.policies.len(), 2);
        assert_eq!(exp.xi.terminal(0), 0.5);
        // expression segment: 1 + 0.5 t at t = -0.25 is 0.875
        assert_eq!(exp.xibar.sample(0, 0), 1.0 + 0.5 * -0.25);
        assert_eq!(exp.xibar.terminal(0), 1.0);
        // xbar coefficients default to x
        assert_eq!(exp.set_x.d(), exp.set_xbar.d());
        // automatic band: 5 sqrt(dt)
        assert!((exp.band - 5.0 * 0.0625f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalized_form_round_trips() {
        let cfg: ConfigFile = toml::from_str(SAMPLE).unwrap();
        let text = normalize(&cfg).unwrap();
        let back: ConfigFile = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        // and a second normalization is byte-identical
        assert_eq!(text, normalize(&back).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_field_path() {
        let bad = SAMPLE.replace("[run]", "[run]\nhuh = 3");
        let err = toml::from_str::<ConfigFile>(&bad).unwrap_err().to_string();
        assert!(err.contains("huh"), "{err}");
    }

    #[test]
    fn overrides_replace_run_settings() {
        let cfg: ConfigFile = toml::from_str(SAMPLE).unwrap();
        let ov = Overrides {
            seed: Some(99),
            n_paths: Some(7),
            dt: Some(0.03125),
            out_dir: Some(PathBuf::from("elsewhere")),
        };
        let exp = cfg.experiment(&ov).unwrap();
        assert_eq!(exp.seed, 99);
        assert_eq!(exp.n_paths, 7);
        assert_eq!(exp.grid.n_lag(), 8);
        assert_eq!(exp.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn asymmetric_matrices_are_rejected() {
        let cfg: ConfigFile = toml::from_str(SAMPLE).unwrap();
        let mut bad = cfg;
        bad.dimensions.m = 2;
        bad.coefficients.x.h = vec![vec!["0".into(); 4]];
        bad.coefficients.x.sigma = vec![vec!["0".into(); 2]];
        bad.policies = vec![PolicyConfig::Constant {
            gamma: vec![vec![2.0, 0.5], vec![0.4, 2.0]],
        }];
        let err = bad.experiment(&Overrides::default()).map(|_| ()).unwrap_err();
        assert!(format!("{err:#}").contains("not symmetric"), "{err:#}");
    }

    #[test]
    fn sample_rows_must_match_the_lag_grid() {
        let bad = SAMPLE.replace(
            "kind = \"constant\"\nvalues = [0.5]",
            "kind = \"samples\"\nsamples = [[0.1, 0.2]]",
        );
        let cfg: ConfigFile = toml::from_str(&bad).unwrap();
        let err = cfg.experiment(&Overrides::default()).map(|_| ()).unwrap_err();
        assert!(format!("{err:#}").contains("r0/dt"), "{err:#}");
    }
}
