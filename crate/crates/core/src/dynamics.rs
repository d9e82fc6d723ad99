//! Time integration of `u_t = u_xx + g(t, x, u, u_x)` on the periodic grid.
//!
//! Diffusion is treated implicitly with Crank-Nicolson on the fourth-order
//! five-point Laplacian, the nonlinear term explicitly with Heun's method.
//! Both linear solves are circulant and are done in Fourier space. For the
//! Burgers family the advective term is `-(H(u))_x` with the same fourth-order
//! stencil as [`crate::field::derivative`], so the zero mode is untouched and
//! the discrete mass is conserved to round-off.

use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, GridSpec};
use crate::quadrature::adaptive_simpson;
use crate::trajectory::{step_count, Recorder, Trajectory};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Forcing `ĝ(t, x)`.
pub type ForcingFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Reaction `g(t, x, u)`.
pub type ReactionFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Potential-type function of `(x, u)`.
pub type PotentialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Tolerance for flux antiderivatives computed by quadrature.
pub const FLUX_QUADRATURE_TOL: f64 = 1e-12;
/// Maximum number of step halvings before a step is rejected.
pub const MAX_HALVINGS: u32 = 8;

/// The antiderivative `H` of the advection coefficient `h`, normalized by `H(0) = 0`.
#[derive(Clone)]
pub enum Antiderivative {
    Analytic(ScalarFn),
    /// Adaptive quadrature of `h` from 0 to `u`.
    Quadrature,
}

#[derive(Clone)]
pub enum NonlinearityKind {
    /// `g = -h(u) u_x + ĝ(t, x)` with `ĝ` of zero spatial mean.
    BurgersGeneral {
        h: ScalarFn,
        flux: Antiderivative,
        g_hat: ForcingFn,
    },
    Reaction {
        g: ReactionFn,
    },
    /// `g = -∂V/∂u (x, u)`.
    Gradient {
        potential: PotentialFn,
        dv_du: PotentialFn,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDependence {
    Autonomous,
    /// One-periodic in time.
    Periodic,
}

#[derive(Clone)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    time: TimeDependence,
    label: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            NonlinearityKind::BurgersGeneral { .. } => "burgers_general",
            NonlinearityKind::Reaction { .. } => "reaction",
            NonlinearityKind::Gradient { .. } => "gradient",
        };
        f.debug_struct("Nonlinearity")
            .field("kind", &kind)
            .field("time", &self.time)
            .field("label", &self.label)
            .finish()
    }
}

impl Nonlinearity {
    pub fn burgers(h: ScalarFn, flux: Antiderivative, g_hat: ForcingFn, time: TimeDependence) -> Self {
        Self {
            kind: NonlinearityKind::BurgersGeneral { h, flux, g_hat },
            time,
            label: "burgers_general".into(),
        }
    }

    /// Viscous Burgers, `h(u) = u`, `H(u) = u²/2`.
    pub fn classical_burgers(g_hat: ForcingFn, time: TimeDependence) -> Self {
        Self::burgers(
            Arc::new(|u| u),
            Antiderivative::Analytic(Arc::new(|u| 0.5 * u * u)),
            g_hat,
            time,
        )
        .with_label("burgers")
    }

    /// Unforced viscous Burgers.
    pub fn unforced_burgers() -> Self {
        Self::classical_burgers(Arc::new(|_, _| 0.0), TimeDependence::Autonomous)
    }

    pub fn reaction(g: ReactionFn, time: TimeDependence) -> Self {
        Self {
            kind: NonlinearityKind::Reaction { g },
            time,
            label: "reaction".into(),
        }
    }

    /// The heat equation, `g = 0`.
    pub fn heat() -> Self {
        Self::reaction(Arc::new(|_, _, _| 0.0), TimeDependence::Autonomous).with_label("heat")
    }

    pub fn gradient(potential: PotentialFn, dv_du: PotentialFn) -> Self {
        Self {
            kind: NonlinearityKind::Gradient { potential, dv_du },
            time: TimeDependence::Autonomous,
            label: "gradient".into(),
        }
    }

    /// Allen-Cahn: `V = u⁴/4 - u²/2`, so `g = u - u³`.
    pub fn allen_cahn() -> Self {
        Self::gradient(
            Arc::new(|_, u| 0.25 * u.powi(4) - 0.5 * u * u),
            Arc::new(|_, u| u * u * u - u),
        )
        .with_label("allen_cahn")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn time_dependence(&self) -> TimeDependence {
        self.time
    }

    pub fn is_burgers(&self) -> bool {
        matches!(self.kind, NonlinearityKind::BurgersGeneral { .. })
    }

    /// `H(u)`; zero for non-Burgers kinds.
    pub fn flux(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::BurgersGeneral { flux, h, .. } => match flux {
                Antiderivative::Analytic(big_h) => big_h(u),
                Antiderivative::Quadrature => {
                    let h = h.clone();
                    adaptive_simpson(&move |s| h(s), 0.0, u, FLUX_QUADRATURE_TOL)
                }
            },
            _ => 0.0,
        }
    }

    /// Advective speed `|h(u)|`; zero for non-Burgers kinds.
    pub fn speed(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::BurgersGeneral { h, .. } => h(u).abs(),
            _ => 0.0,
        }
    }

    /// Forcing `ĝ(t, x)` as supplied (before re-centering), for Burgers kinds.
    pub fn forcing(&self, t: f64, x: f64) -> Option<f64> {
        match &self.kind {
            NonlinearityKind::BurgersGeneral { g_hat, .. } => Some(g_hat(t, x)),
            _ => None,
        }
    }

    /// Re-centered forcing sampled at the nodes of `grid`.
    pub fn forcing_field(&self, t: f64, grid: GridSpec) -> Option<Vec<f64>> {
        let NonlinearityKind::BurgersGeneral { g_hat, .. } = &self.kind else {
            return None;
        };
        let mut vals: Vec<f64> = (0..grid.len()).map(|j| g_hat(t, grid.node_x(j))).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter_mut().for_each(|v| *v -= mean);
        Some(vals)
    }

    /// Pointwise right-hand side `g(t, x, u, u_x)`.
    pub fn eval(&self, t: f64, x: f64, u: f64, ux: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::BurgersGeneral { h, g_hat, .. } => -h(u) * ux + g_hat(t, x),
            NonlinearityKind::Reaction { g } => g(t, x, u),
            NonlinearityKind::Gradient { dv_du, .. } => -dv_du(x, u),
        }
    }

    pub fn potential(&self, x: f64, u: f64) -> Option<f64> {
        match &self.kind {
            NonlinearityKind::Gradient { potential, .. } => Some(potential(x, u)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Crank-Nicolson diffusion, Heun nonlinear term.
    #[default]
    Imex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Maximum admissible `dt · sup|h(u)| / dx`.
    #[serde(default = "default_cfl_guard")]
    pub cfl_guard: f64,
}

fn default_cfl_guard() -> f64 {
    0.5
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::Imex,
            cfl_guard: default_cfl_guard(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cfl_guard > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_guard must be positive, got {}",
                self.cfl_guard
            )));
        }
        Ok(())
    }

    /// Number of steps per unit time, if `dt` divides 1.
    pub fn steps_per_period(&self) -> Option<usize> {
        let r = 1.0 / self.dt;
        let k = r.round();
        ((r - k).abs() <= 1e-9 * r && k >= 1.0).then_some(k as usize)
    }
}

type C64 = Complex<f64>;

/// Crank-Nicolson multipliers `(1 + dt/2 λ)/(1 - dt/2 λ)` and `dt/(1 - dt/2 λ)` per mode.
struct Coeffs {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Coeffs {
    fn new(lap: &[f64], dt: f64) -> Self {
        let (a, b) = lap
            .iter()
            .map(|&l| {
                let den = 1.0 - 0.5 * dt * l;
                ((1.0 + 0.5 * dt * l) / den, dt / den)
            })
            .unzip();
        Self { a, b }
    }
}

/// Spectral forcing, one entry per step of the period (or a single entry if autonomous).
struct ForcingTable {
    dt: f64,
    hats: Vec<Vec<C64>>,
}

struct Workspace {
    phys: Vec<f64>,
    uhat: Vec<C64>,
    n1: Vec<C64>,
    n2: Vec<C64>,
    tmp: Vec<C64>,
    fhat: Vec<C64>,
    ustar: Vec<f64>,
    fwd_scratch: Vec<C64>,
    inv_scratch: Vec<C64>,
}

/// Reusable integrator for one nonlinearity, grid and step configuration.
///
/// Holds FFT plans, Crank-Nicolson multipliers and, for periodic forcing,
/// a precomputed table of the forcing spectrum on the time grid. It is
/// immutable after construction and can be shared between threads.
pub struct Propagator {
    grid: GridSpec,
    nl: Nonlinearity,
    cfg: StepperConfig,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    lap: Vec<f64>,
    deriv: Vec<f64>,
    base: Coeffs,
    forcing: Option<ForcingTable>,
    xs: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: GridSpec, nl: &Nonlinearity, cfg: StepperConfig) -> Result<Self> {
        let mut p = Self::without_forcing_table(grid, nl, cfg)?;
        p.forcing = p.build_forcing_table();
        Ok(p)
    }

    /// A propagator that evaluates the forcing on the fly (cheaper to build for single steps).
    pub fn without_forcing_table(grid: GridSpec, nl: &Nonlinearity, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let n = grid.len();
        let mut planner = RealFftPlanner::<f64>::new();
        let r2c = planner.plan_fft_forward(n);
        let c2r = planner.plan_fft_inverse(n);
        let dx = grid.dx();
        let modes = n / 2 + 1;
        let mut lap = Vec::with_capacity(modes);
        let mut deriv = Vec::with_capacity(modes);
        for k in 0..modes {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            // (-u_{j+2} + 16u_{j+1} - 30u_j + 16u_{j-1} - u_{j-2}) / 12dx²
            lap.push((-2.0 * (2.0 * th).cos() + 32.0 * th.cos() - 30.0) / (12.0 * dx * dx));
            // (-u_{j+2} + 8u_{j+1} - 8u_{j-1} + u_{j-2}) / 12dx  has symbol i·deriv
            deriv.push((8.0 * th.sin() - (2.0 * th).sin()) / (6.0 * dx));
        }
        // The zero mode must be exactly neutral for mass conservation.
        lap[0] = 0.0;
        deriv[0] = 0.0;
        let base = Coeffs::new(&lap, cfg.dt);
        Ok(Self {
            grid,
            nl: nl.clone(),
            cfg,
            r2c,
            c2r,
            lap,
            deriv,
            base,
            forcing: None,
            xs: (0..n).map(|j| grid.node_x(j)).collect(),
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn config(&self) -> StepperConfig {
        self.cfg
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    fn build_forcing_table(&self) -> Option<ForcingTable> {
        let NonlinearityKind::BurgersGeneral { g_hat, .. } = &self.nl.kind else {
            return None;
        };
        let entries = match self.nl.time {
            TimeDependence::Autonomous => 1,
            TimeDependence::Periodic => self.cfg.steps_per_period()?,
        };
        let mut ws = self.workspace();
        let hats = (0..entries)
            .map(|i| {
                let t = i as f64 * self.cfg.dt;
                for (p, &x) in ws.phys.iter_mut().zip(&self.xs) {
                    *p = g_hat(t, x);
                }
                let mut out = vec![C64::default(); self.lap.len()];
                self.forward(&mut ws.phys, &mut out, &mut ws.fwd_scratch);
                out[0] = C64::default();
                out
            })
            .collect();
        Some(ForcingTable {
            dt: self.cfg.dt,
            hats,
        })
    }

    fn workspace(&self) -> Workspace {
        let n = self.grid.len();
        let modes = self.lap.len();
        Workspace {
            phys: vec![0.0; n],
            uhat: vec![C64::default(); modes],
            n1: vec![C64::default(); modes],
            n2: vec![C64::default(); modes],
            tmp: vec![C64::default(); modes],
            fhat: vec![C64::default(); modes],
            ustar: vec![0.0; n],
            fwd_scratch: self.r2c.make_scratch_vec(),
            inv_scratch: self.c2r.make_scratch_vec(),
        }
    }

    fn forward(&self, input: &mut [f64], output: &mut [C64], scratch: &mut [C64]) {
        self.r2c
            .process_with_scratch(input, output, scratch)
            .expect("buffer sizes fixed at construction");
    }

    /// Unnormalized inverse transform; callers fold in the `1/N` factor.
    fn inverse(&self, input: &mut [C64], output: &mut [f64], scratch: &mut [C64]) {
        input[0].im = 0.0;
        if output.len() % 2 == 0 {
            let last = input.len() - 1;
            input[last].im = 0.0;
        }
        self.c2r
            .process_with_scratch(input, output, scratch)
            .expect("buffer sizes fixed at construction");
    }

    fn table_entry(&self, t: f64) -> Option<&[C64]> {
        let table = self.forcing.as_ref()?;
        if table.hats.len() == 1 {
            return Some(&table.hats[0]);
        }
        let r = t / table.dt;
        let k = r.round();
        if (r - k).abs() > 1e-6 {
            return None;
        }
        let idx = (k as i64).rem_euclid(table.hats.len() as i64) as usize;
        Some(&table.hats[idx])
    }

    /// Spectrum of the nonlinear term at time `t` for the state `u`.
    #[allow(clippy::too_many_arguments)]
    fn nonlinear_hat(
        &self,
        t: f64,
        u: &[f64],
        out: &mut [C64],
        phys: &mut [f64],
        fhat: &mut [C64],
        scratch: &mut [C64],
    ) {
        match &self.nl.kind {
            NonlinearityKind::BurgersGeneral { g_hat, flux, .. } => {
                match flux {
                    Antiderivative::Analytic(big_h) => {
                        for (p, &v) in phys.iter_mut().zip(u) {
                            *p = big_h(v);
                        }
                    }
                    Antiderivative::Quadrature => {
                        for (p, &v) in phys.iter_mut().zip(u) {
                            *p = self.nl.flux(v);
                        }
                    }
                }
                self.forward(phys, out, scratch);
                for (z, &d) in out.iter_mut().zip(&self.deriv) {
                    // -(i d) z
                    *z = C64::new(d * z.im, -d * z.re);
                }
                match self.table_entry(t) {
                    Some(hat) => out.iter_mut().zip(hat).for_each(|(z, f)| *z += f),
                    None => {
                        for (p, &x) in phys.iter_mut().zip(&self.xs) {
                            *p = g_hat(t, x);
                        }
                        self.forward(phys, fhat, scratch);
                        fhat[0] = C64::default();
                        out.iter_mut().zip(fhat.iter()).for_each(|(z, f)| *z += f);
                    }
                }
            }
            NonlinearityKind::Reaction { g } => {
                for ((p, &v), &x) in phys.iter_mut().zip(u).zip(&self.xs) {
                    *p = g(t, x, v);
                }
                self.forward(phys, out, scratch);
            }
            NonlinearityKind::Gradient { dv_du, .. } => {
                for ((p, &v), &x) in phys.iter_mut().zip(u).zip(&self.xs) {
                    *p = -dv_du(x, v);
                }
                self.forward(phys, out, scratch);
            }
        }
    }

    /// One Crank-Nicolson/Heun step of size `dt` in place.
    fn heun(&self, ws: &mut Workspace, u: &mut [f64], t: f64, dt: f64, c: &Coeffs) -> Result<()> {
        ws.phys.copy_from_slice(u);
        self.forward(&mut ws.phys, &mut ws.uhat, &mut ws.fwd_scratch);
        self.nonlinear_hat(t, u, &mut ws.n1, &mut ws.phys, &mut ws.fhat, &mut ws.fwd_scratch);
        let inv_n = 1.0 / u.len() as f64;
        for k in 0..ws.uhat.len() {
            ws.uhat[k] *= c.a[k];
            ws.tmp[k] = (ws.uhat[k] + ws.n1[k] * c.b[k]) * inv_n;
        }
        self.inverse(&mut ws.tmp, &mut ws.ustar, &mut ws.inv_scratch);
        self.nonlinear_hat(
            t + dt,
            &ws.ustar,
            &mut ws.n2,
            &mut ws.phys,
            &mut ws.fhat,
            &mut ws.fwd_scratch,
        );
        for k in 0..ws.uhat.len() {
            ws.tmp[k] = (ws.uhat[k] + (ws.n1[k] + ws.n2[k]) * (0.5 * c.b[k])) * inv_n;
        }
        self.inverse(&mut ws.tmp, u, &mut ws.inv_scratch);
        if u.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::BlowUp { t: t + dt })
        }
    }

    /// Advances `u` from `t` by `dt`, halving the step while the CFL guard is violated.
    fn advance_step(&self, ws: &mut Workspace, u: &mut [f64], t: f64, dt: f64) -> Result<()> {
        let dx = self.grid.dx();
        let halvings = if self.nl.is_burgers() {
            let NonlinearityKind::BurgersGeneral { h, .. } = &self.nl.kind else {
                unreachable!()
            };
            let speed = u.iter().fold(0.0_f64, |m, &v| m.max(h(v).abs()));
            let mut m = 0;
            while dt / f64::from(1u32 << m) * speed / dx > self.cfg.cfl_guard {
                m += 1;
                if m > MAX_HALVINGS {
                    let sup_u = u.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
                    return Err(Error::StepRejected { t, sup_u });
                }
            }
            m
        } else {
            0
        };
        if halvings == 0 {
            if dt == self.cfg.dt {
                return self.heun(ws, u, t, dt, &self.base);
            }
            return self.heun(ws, u, t, dt, &Coeffs::new(&self.lap, dt));
        }
        let parts = 1usize << halvings;
        let sub = dt / parts as f64;
        let c = Coeffs::new(&self.lap, sub);
        for i in 0..parts {
            self.heun(ws, u, t + i as f64 * sub, sub, &c)?;
        }
        Ok(())
    }

    /// One step from time `t`.
    pub fn step(&self, u: &Field, t: f64) -> Result<Field> {
        self.grid.ensure_same(&u.grid())?;
        let mut ws = self.workspace();
        let mut next = u.clone();
        self.advance_step(&mut ws, next.values_mut(), t, self.cfg.dt)?;
        Ok(next)
    }

    fn run(&self, u0: &Field, t0: f64, t1: f64, mut rec: Option<&mut Recorder>) -> Result<Field> {
        self.grid.ensure_same(&u0.grid())?;
        let steps = step_count(t0, t1, self.cfg.dt)?;
        let mut ws = self.workspace();
        let mut u = u0.clone();
        for n in 0..steps {
            let t = t0 + n as f64 * self.cfg.dt;
            let last = n + 1 == steps;
            let t_next = if last { t1 } else { t0 + (n + 1) as f64 * self.cfg.dt };
            let h = if last { t1 - t } else { self.cfg.dt };
            let h = if (h - self.cfg.dt).abs() <= 1e-12 * self.cfg.dt { self.cfg.dt } else { h };
            self.advance_step(&mut ws, u.values_mut(), t, h)?;
            if let Some(rec) = rec.as_deref_mut() {
                rec.record(n + 1, t_next, &u, last);
            }
        }
        Ok(u)
    }

    /// Final state at `t1` without recording.
    pub fn advance(&self, u0: &Field, t0: f64, t1: f64) -> Result<Field> {
        self.run(u0, t0, t1, None)
    }

    /// Integrates over `[t0, t1]`, recording probes every step and snapshots every `stride` steps.
    pub fn evolve(
        &self,
        u0: &Field,
        t0: f64,
        t1: f64,
        probes: &[f64],
        snapshot_stride: usize,
    ) -> Result<Trajectory> {
        let mut rec = Recorder::new(u0, t0, t1, self.cfg.dt, probes, snapshot_stride)?;
        self.run(u0, t0, t1, Some(&mut rec))?;
        Ok(rec.finish())
    }

    /// The time-one map `T`, from `t0` to `t0 + 1`.
    pub fn time_one_map(&self, u0: &Field, t0: f64) -> Result<Field> {
        if self.cfg.steps_per_period().is_none() {
            return Err(Error::StepNotDividingPeriod { dt: self.cfg.dt });
        }
        self.advance(u0, t0, t0 + 1.0)
    }

    /// Iterates of the time-one map, `[u0, T u0, ..., T^count u0]`, starting at integer time `t0`.
    pub fn iterate(&self, u0: &Field, t0: f64, count: usize) -> Result<Vec<Field>> {
        let mut out = Vec::with_capacity(count + 1);
        out.push(u0.clone());
        for k in 0..count {
            let next = self.time_one_map(&out[k], t0 + k as f64)?;
            out.push(next);
        }
        Ok(out)
    }
}

pub fn step(u: &Field, nl: &Nonlinearity, t: f64, cfg: StepperConfig) -> Result<Field> {
    Propagator::without_forcing_table(u.grid(), nl, cfg)?.step(u, t)
}

pub fn evolve(
    u0: &Field,
    nl: &Nonlinearity,
    t0: f64,
    t1: f64,
    cfg: StepperConfig,
    probes: &[f64],
    snapshot_stride: usize,
) -> Result<Trajectory> {
    Propagator::new(u0.grid(), nl, cfg)?.evolve(u0, t0, t1, probes, snapshot_stride)
}

pub fn time_one_map(u0: &Field, nl: &Nonlinearity, t0: f64, cfg: StepperConfig) -> Result<Field> {
    if cfg.steps_per_period().is_none() {
        return Err(Error::StepNotDividingPeriod { dt: cfg.dt });
    }
    Propagator::new(u0.grid(), nl, cfg)?.time_one_map(u0, t0)
}
