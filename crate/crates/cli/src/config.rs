//! Experiment configuration. Every table rejects unknown keys.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use zeroflow_core::dynamics::{Antiderivative, ForcingFn, Nonlinearity, Scheme, StepperConfig, TimeDependence};
use zeroflow_core::field::{make_grid, sample, Field, GridSpec};

use crate::expr::{parse_expression, Expr, Var};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Balance,
    Vfamily,
    Colehopf,
    Ensemble,
    Allencahn,
    Check,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Balance => "balance",
            Experiment::Vfamily => "vfamily",
            Experiment::Colehopf => "colehopf",
            Experiment::Ensemble => "ensemble",
            Experiment::Allencahn => "allencahn",
            Experiment::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<Experiment>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub stepper: StepperSection,
    /// Defaults to Allen-Cahn for `allencahn` and to the reference forced Burgers otherwise.
    pub nonlinearity: Option<NonlinearityConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub simulate: Option<SimulateConfig>,
    pub balance: Option<BalanceConfig>,
    pub vfamily: Option<VFamilyConfig>,
    pub colehopf: Option<ColeHopfConfig>,
    pub ensemble: Option<EnsembleConfig>,
    pub allencahn: Option<AllenCahnConfig>,
    pub check: Option<CheckConfig>,
}

fn default_seed() -> u64 {
    zeroflow_core::suite::SuiteOptions::default().seed
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: usize,
    pub points_per_cell: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cells: 1,
            points_per_cell: 256,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, CliError> {
        make_grid(self.cells, self.points_per_cell).map_err(|e| CliError::Config(format!("[grid]: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_cfl_guard")]
    pub cfl_guard: f64,
    #[serde(default)]
    pub probes: Vec<f64>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_cfl_guard() -> f64 {
    StepperConfig::new(1.0).cfl_guard
}

fn default_stride() -> usize {
    1
}

impl Default for StepperSection {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            scheme: Scheme::default(),
            cfl_guard: default_cfl_guard(),
            probes: Vec::new(),
            snapshot_stride: default_stride(),
        }
    }
}

impl StepperSection {
    pub fn config(&self) -> Result<StepperConfig, CliError> {
        let cfg = StepperConfig {
            dt: self.dt,
            scheme: self.scheme,
            cfl_guard: self.cfl_guard,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("[stepper]: {e}")))?;
        if self.snapshot_stride == 0 {
            return Err(CliError::Config("[stepper]: snapshot_stride must be at least 1".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    Heat,
    /// `h(u) = u`.
    Burgers,
    /// General `h` given as an expression in `u`; `H` by quadrature.
    BurgersGeneral,
    Reaction,
    Gradient,
    AllenCahn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityKind,
    /// `ĝ(t, x)` for the Burgers kinds.
    #[serde(default)]
    pub forcing: Option<String>,
    /// `h(u)` for `burgers_general`.
    #[serde(default)]
    pub h: Option<String>,
    /// `g(t, x, u)` for `reaction`.
    #[serde(default)]
    pub reaction: Option<String>,
    /// `V(x, u)` for `gradient`.
    #[serde(default)]
    pub potential: Option<String>,
    /// Whether the forcing or reaction is one-periodic in `t` (otherwise autonomous).
    #[serde(default)]
    pub periodic: Option<bool>,
}

pub const REFERENCE_FORCING: &str = "0.2*sin(2*pi*x)*cos(2*pi*t)";

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            kind: NonlinearityKind::Burgers,
            forcing: Some(REFERENCE_FORCING.into()),
            h: None,
            reaction: None,
            potential: None,
            periodic: None,
        }
    }
}

/// Parses `src` and checks that it only uses the variables in `allowed`.
pub fn expression(key: &str, src: &str, allowed: &[Var]) -> Result<Expr, CliError> {
    let e = parse_expression(src)
        .map_err(|e| CliError::Config(format!("{key} = {src:?}: {e}")))?
        .simplify();
    if let Some(v) = e.variables().into_iter().find(|v| !allowed.contains(v)) {
        let names: Vec<&str> = allowed.iter().map(|v| v.name()).collect();
        return Err(CliError::Config(format!(
            "{key} = {src:?}: variable `{}` is not allowed here (allowed: {})",
            v.name(),
            names.join(", ")
        )));
    }
    Ok(e)
}

/// Samples a profile expression in `x` on `grid`.
pub fn profile(key: &str, src: &str, grid: GridSpec) -> Result<Field, CliError> {
    let e = expression(key, src, &[Var::X])?;
    Ok(sample(|x| e.eval(0.0, x, 0.0), grid)?)
}

impl NonlinearityConfig {
    fn require<'a>(&self, field: &'a Option<String>, name: &str) -> Result<&'a str, CliError> {
        field
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("[nonlinearity]: kind {:?} needs `{name}`", self.kind)))
    }

    fn reject(&self, fields: &[(&Option<String>, &str)]) -> Result<(), CliError> {
        for (f, name) in fields {
            if f.is_some() {
                return Err(CliError::Config(format!(
                    "[nonlinearity]: `{name}` has no meaning for kind {:?}",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    fn time_dependence(&self, e: &Expr) -> TimeDependence {
        match self.periodic {
            Some(true) => TimeDependence::Periodic,
            Some(false) => TimeDependence::Autonomous,
            None if e.depends_on(Var::T) => TimeDependence::Periodic,
            None => TimeDependence::Autonomous,
        }
    }

    /// The forcing `ĝ(t, x)`; absent means zero.
    pub fn forcing_fn(&self) -> Result<(ForcingFn, TimeDependence), CliError> {
        let src = self.forcing.as_deref().unwrap_or("0");
        let e = Arc::new(expression("nonlinearity.forcing", src, &[Var::T, Var::X])?);
        let time = self.time_dependence(&e);
        Ok((Arc::new(move |t, x| e.eval(t, x, 0.0)), time))
    }

    pub fn build(&self) -> Result<Nonlinearity, CliError> {
        use NonlinearityKind as K;
        let forcing = |this: &Self| this.forcing_fn();
        let nl = match self.kind {
            K::Heat => {
                self.reject(&[(&self.forcing, "forcing"), (&self.h, "h"), (&self.reaction, "reaction"), (&self.potential, "potential")])?;
                Nonlinearity::heat()
            }
            K::AllenCahn => {
                self.reject(&[(&self.forcing, "forcing"), (&self.h, "h"), (&self.reaction, "reaction"), (&self.potential, "potential")])?;
                Nonlinearity::allen_cahn()
            }
            K::Burgers => {
                self.reject(&[(&self.h, "h"), (&self.reaction, "reaction"), (&self.potential, "potential")])?;
                let (g_hat, time) = forcing(self)?;
                Nonlinearity::classical_burgers(g_hat, time)
            }
            K::BurgersGeneral => {
                self.reject(&[(&self.reaction, "reaction"), (&self.potential, "potential")])?;
                let h = Arc::new(expression("nonlinearity.h", self.require(&self.h, "h")?, &[Var::U])?);
                let (g_hat, time) = forcing(self)?;
                Nonlinearity::burgers(Arc::new(move |u| h.eval(0.0, 0.0, u)), Antiderivative::Quadrature, g_hat, time)
            }
            K::Reaction => {
                self.reject(&[(&self.forcing, "forcing"), (&self.h, "h"), (&self.potential, "potential")])?;
                let src = self.require(&self.reaction, "reaction")?;
                let g = Arc::new(expression("nonlinearity.reaction", src, &[Var::T, Var::X, Var::U])?);
                let time = self.time_dependence(&g);
                Nonlinearity::reaction(Arc::new(move |t, x, u| g.eval(t, x, u)), time)
            }
            K::Gradient => {
                self.reject(&[(&self.forcing, "forcing"), (&self.h, "h"), (&self.reaction, "reaction")])?;
                let src = self.require(&self.potential, "potential")?;
                let v = Arc::new(expression("nonlinearity.potential", src, &[Var::X, Var::U])?);
                let dv = Arc::new(v.derivative(Var::U));
                Nonlinearity::gradient(Arc::new(move |x, u| v.eval(0.0, x, u)), Arc::new(move |x, u| dv.eval(0.0, x, u)))
            }
        };
        Ok(nl)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_fixed_point")]
    pub fixed_point: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Allowed relative sup error of the Cole-Hopf cross-check.
    #[serde(default = "default_colehopf")]
    pub colehopf: f64,
    /// Allowed increase of `Z_mu` per iterate.
    #[serde(default = "default_z_mu")]
    pub z_mu: f64,
    /// Allowed energy increase per step along gradient flows.
    #[serde(default = "default_energy")]
    pub energy: f64,
}

fn default_fixed_point() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    200
}
fn default_colehopf() -> f64 {
    1e-3
}
fn default_z_mu() -> f64 {
    1e-12
}
fn default_energy() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fixed_point: default_fixed_point(),
            max_iter: default_max_iter(),
            colehopf: default_colehopf(),
            z_mu: default_z_mu(),
            energy: default_energy(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub initial: String,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    pub u0: String,
    #[serde(default = "zero_expr")]
    pub v0: String,
    pub x_left: f64,
    pub x_right: f64,
    #[serde(default)]
    pub s: f64,
    pub t: f64,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VFamilyConfig {
    pub ys: Vec<f64>,
    /// Optional initial profile whose convergence to its `v^y` is recorded.
    #[serde(default)]
    pub converge_from: Option<String>,
    #[serde(default = "default_max_n")]
    pub max_iterates: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_max_n() -> usize {
    500
}
fn default_threshold() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColeHopfConfig {
    pub initial: String,
    pub t_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Letters as expressions in `x` on `[0, letter_cells)`.
    pub p0: String,
    pub p1: String,
    #[serde(default = "default_letter_cells")]
    pub letter_cells: usize,
    pub count: usize,
    pub iterates: usize,
    #[serde(default = "default_prob")]
    pub prob_one: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Mass of the `v^y` used as weak* target; omitted means no target.
    #[serde(default)]
    pub target_y: Option<f64>,
    #[serde(default)]
    pub stop_below: Option<f64>,
}

fn default_letter_cells() -> usize {
    1
}
fn default_prob() -> f64 {
    0.5
}
fn default_jitter() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllenCahnConfig {
    pub letter_cells: usize,
    pub count: usize,
    pub horizon: f64,
    #[serde(default = "default_sign_tol")]
    pub sign_tol: f64,
}

fn default_sign_tol() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "all_criteria")]
    pub criteria: Vec<u32>,
}

fn all_criteria() -> Vec<u32> {
    zeroflow_core::suite::CRITERIA.to_vec()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies command-line overrides and checks that the selected section is present.
    pub fn resolve(mut self, experiment: Experiment, seed: Option<u64>, output: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(CliError::Config(format!(
                    "config is for experiment `{}`, command line asks for `{}`",
                    e.name(),
                    experiment.name()
                )));
            }
        }
        self.experiment = Some(experiment);
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = output {
            self.output = o;
        }
        let missing = match experiment {
            Experiment::Simulate => self.simulate.is_none(),
            Experiment::Balance => self.balance.is_none(),
            Experiment::Vfamily => self.vfamily.is_none(),
            Experiment::Colehopf => self.colehopf.is_none(),
            Experiment::Ensemble => self.ensemble.is_none(),
            Experiment::Allencahn => self.allencahn.is_none(),
            Experiment::Check => {
                self.check.get_or_insert(CheckConfig { criteria: all_criteria() });
                false
            }
        };
        if missing {
            return Err(CliError::Config(format!("missing [{}] table", experiment.name())));
        }
        self.nonlinearity.get_or_insert_with(|| match experiment {
            Experiment::Allencahn => NonlinearityConfig {
                kind: NonlinearityKind::AllenCahn,
                forcing: None,
                ..Default::default()
            },
            _ => NonlinearityConfig::default(),
        });
        self.stepper.config()?;
        self.grid.spec()?;
        self.nonlinearity()?.build()?;
        Ok(self)
    }

    pub fn nonlinearity(&self) -> Result<&NonlinearityConfig, CliError> {
        self.nonlinearity
            .as_ref()
            .ok_or_else(|| CliError::Config("config has not been resolved".into()))
    }
}
