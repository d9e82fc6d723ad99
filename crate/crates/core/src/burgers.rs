//! Burgers-type equations: mass conservation, the sup-norm band around a mass
//! level, the ordered family of time-periodic orbits `v^y`, and the Cole-Hopf
//! cross-check of the solver.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::RealFftPlanner;
use serde::Serialize;

use crate::dynamics::{Nonlinearity, Propagator, TimeDependence};
use crate::error::{Error, Result};
use crate::field::{derivative, mass, save_csv, Field, GridSpec};
use crate::quadrature::gauss_legendre;
use crate::trajectory::Trajectory;

/// Slack allowed on the band radius when checking a trajectory.
pub const BAND_SLACK: f64 = 1e-6;
/// Tolerance on the mass of an orbit and on mass matching.
pub const MASS_TOL: f64 = 1e-12;

fn require_burgers(nl: &Nonlinearity) -> Result<()> {
    if nl.is_burgers() {
        Ok(())
    } else {
        Err(Error::NotBurgers)
    }
}

/// Largest deviation of the mass from its initial value over all snapshots.
pub fn check_mass_invariance(traj: &Trajectory, nl: &Nonlinearity) -> Result<f64> {
    require_burgers(nl)?;
    let m0 = mass(traj.initial_state());
    Ok(traj
        .snapshots
        .iter()
        .map(|s| (mass(&s.field) - m0).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriBand {
    pub c0: f64,
    /// `(p, c_{2p})` pairs.
    pub c2p: Vec<(u32, f64)>,
}

/// `c_{2p} = (p² / ((2p - 1) π²))^{1/(2p)} · c0`.
pub fn c2p(p: u32, c0: f64) -> f64 {
    let p = f64::from(p);
    (p * p / ((2.0 * p - 1.0) * PI * PI)).powf(1.0 / (2.0 * p)) * c0
}

impl AprioriBand {
    pub fn from_c0(c0: f64, max_p: u32) -> Self {
        Self {
            c0,
            c2p: (1..=max_p).map(|p| (p, c2p(p, c0))).collect(),
        }
    }

    /// The stored constants increase towards `c0` and never exceed it.
    pub fn is_monotone(&self) -> bool {
        self.c2p.windows(2).all(|w| w[0].1 <= w[1].1) && self.c2p.iter().all(|&(_, c)| c <= self.c0)
    }
}

/// Band constants for a Burgers nonlinearity; `c0` is the maximum of `|ĝ|` over the
/// nodes of `grid` and 64 phases of the period.
pub fn apriori_band(nl: &Nonlinearity, grid: GridSpec, max_p: u32) -> Result<AprioriBand> {
    require_burgers(nl)?;
    let phases = match nl.time_dependence() {
        TimeDependence::Autonomous => 1,
        TimeDependence::Periodic => 64,
    };
    let mut c0 = 0.0_f64;
    for k in 0..phases {
        let t = k as f64 / phases as f64;
        for j in 0..grid.len() {
            c0 = c0.max(nl.forcing(t, grid.node_x(j)).unwrap_or(0.0).abs());
        }
    }
    Ok(AprioriBand::from_c0(c0, max_p))
}

/// Whether every snapshot stays within `c0 + BAND_SLACK` of the level `y`.
pub fn check_band(traj: &Trajectory, y: f64, band: &AprioriBand) -> bool {
    traj.snapshots
        .iter()
        .all(|s| s.field.values().iter().all(|v| (v - y).abs() <= band.c0 + BAND_SLACK))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub y: f64,
    #[serde(skip)]
    pub profile: Field,
    /// `‖T(profile) - profile‖∞`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Picard weight: `u ← (1 - θ) u + θ T(u)`.
    pub damping: f64,
}

impl FixedPointOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            damping: 1.0,
        }
    }
}

/// Fixed point of the time-one map started from `seed`, which fixes the mass level.
pub fn solve_orbit(prop: &Propagator, seed: &Field, opts: FixedPointOptions) -> Result<PeriodicOrbit> {
    if !(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument(
            "tolerance must be positive and damping in (0, 1]".into(),
        ));
    }
    let y = mass(seed);
    let mut u = seed.clone();
    let mut residual = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let tu = prop.time_one_map(&u, 0.0)?;
        residual = tu.distance(&u)?;
        if residual <= opts.tol {
            return Ok(PeriodicOrbit {
                y,
                profile: u,
                residual,
                iterations: it,
            });
        }
        u = if opts.damping == 1.0 { tu } else { u.blend(&tu, opts.damping)? };
    }
    Err(Error::NoConvergence {
        y,
        iterations: opts.max_iter,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VFamily {
    pub orbits: Vec<PeriodicOrbit>,
    /// `min_x (v^{y_{i+1}} - v^{y_i})` for consecutive levels.
    pub min_gaps: Vec<f64>,
}

impl VFamily {
    /// `family.json` with levels, residuals, iterations and gaps, plus one CSV profile per orbit.
    pub fn write_archive(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (i, o) in self.orbits.iter().enumerate() {
            let name = format!("orbit_{i:03}.csv");
            save_csv(&o.profile, &dir.join(&name))?;
            files.push(name);
        }
        let doc = serde_json::json!({
            "orbits": self.orbits,
            "profiles": files,
            "min_gaps": self.min_gaps,
        });
        fs::write(dir.join("family.json"), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

/// Periodic orbits for each mass level, iterated from the constants, with the
/// strict ordering certified by positive pointwise gaps.
pub fn solve_v_family(
    nl: &Nonlinearity,
    grid: GridSpec,
    ys: &[f64],
    opts: FixedPointOptions,
    prop: &Propagator,
) -> Result<VFamily> {
    require_burgers(nl)?;
    let mut ys = ys.to_vec();
    ys.sort_by(f64::total_cmp);
    let orbits = ys
        .iter()
        .map(|&y| solve_orbit(prop, &Field::constant(grid, y), opts))
        .collect::<Result<Vec<_>>>()?;
    let family = ordered_family(orbits)?;
    Ok(family)
}

/// Wraps sorted orbits, checking strict pointwise ordering.
pub fn ordered_family(orbits: Vec<PeriodicOrbit>) -> Result<VFamily> {
    let mut min_gaps = Vec::with_capacity(orbits.len().saturating_sub(1));
    for w in orbits.windows(2) {
        let gap = w[1].profile.sub(&w[0].profile)?.min();
        if !(gap > 0.0) {
            return Err(Error::OrderingViolation {
                lower: w[0].y,
                upper: w[1].y,
                gap,
            });
        }
        min_gaps.push(gap);
    }
    Ok(VFamily { orbits, min_gaps })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSeries {
    /// `d_k = ‖T^k u0 - v‖∞`, starting at `k = 0`.
    pub distances: Vec<f64>,
    /// First `k` with `d_k ≤ threshold`.
    pub reached: Option<usize>,
}

impl ConvergenceSeries {
    /// Length of the initial stretch after which the series is strictly decreasing.
    pub fn transient(&self) -> usize {
        let d = &self.distances;
        (1..d.len()).rev().find(|&k| d[k] >= d[k - 1]).unwrap_or(0)
    }
}

/// Distance of the iterates of `u0` to an orbit of the same mass, until it drops
/// below `threshold` or `max_n` iterates are done.
pub fn converge_to_vy(
    u0: &Field,
    prop: &Propagator,
    orbit: &PeriodicOrbit,
    max_n: usize,
    threshold: f64,
) -> Result<ConvergenceSeries> {
    let m = mass(u0);
    if (m - orbit.y).abs() > MASS_TOL {
        return Err(Error::MassMismatch {
            expected: orbit.y,
            found: m,
        });
    }
    let mut u = u0.clone();
    let mut distances = vec![u.distance(&orbit.profile)?];
    let mut reached = (distances[0] <= threshold).then_some(0);
    let mut k = 0;
    while reached.is_none() && k < max_n {
        u = prop.time_one_map(&u, k as f64)?;
        k += 1;
        let d = u.distance(&orbit.profile)?;
        distances.push(d);
        if d <= threshold {
            reached = Some(k);
        }
    }
    Ok(ConvergenceSeries { distances, reached })
}

/// Periodic antiderivative of a mass-zero field, spectrally, normalized to vanish at `x = 0`.
pub fn antiderivative(u: &Field) -> Result<Field> {
    let grid = u.grid();
    if mass(u).abs() > MASS_TOL * u.sup_norm().max(1.0) {
        return Err(Error::MassMismatch {
            expected: 0.0,
            found: mass(u),
        });
    }
    let n = grid.len();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = u.values().to_vec();
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut buf, &mut spec).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let omega = 2.0 * PI / grid.circumference();
    for (k, c) in spec.iter_mut().enumerate() {
        *c = if k == 0 || (n % 2 == 0 && k == n / 2) {
            Complex::new(0.0, 0.0)
        } else {
            *c / Complex::new(0.0, omega * k as f64)
        };
    }
    inv.process(&mut spec, &mut buf).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let scale = 1.0 / n as f64;
    let base = buf[0] * scale;
    Field::from_values(grid, buf.iter().map(|v| v * scale - base).collect())
}

/// Relative sup distance at `t_end` between classical Burgers started from `u0`
/// and `-2 φ_x / φ`, where `φ_t = φ_xx - ½ G φ`, `G_x = ĝ`, `φ(0) = exp(-½ ∫_0^x u0)`.
pub fn cole_hopf_crosscheck(
    u0: &Field,
    g_hat: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    time: TimeDependence,
    t_end: f64,
    cfg: crate::dynamics::StepperConfig,
) -> Result<f64> {
    let grid = u0.grid();
    let phi0 = antiderivative(u0)?.map(|a| (-0.5 * a).exp());

    let burgers = Nonlinearity::classical_burgers(g_hat.clone(), time);
    let u = Propagator::new(grid, &burgers, cfg)?.advance(u0, 0.0, t_end)?;

    let potential = move |t: f64, x: f64| {
        let panels = (x.abs() * 4.0).ceil().max(1.0) as usize;
        gauss_legendre(|s| g_hat(t, s), 0.0, x, panels)
    };
    let linear = Nonlinearity::reaction(Arc::new(move |t, x, phi| -0.5 * potential(t, x) * phi), time)
        .with_label("cole_hopf_potential");
    let phi = Propagator::new(grid, &linear, cfg)?.advance(&phi0, 0.0, t_end)?;
    if phi.min() <= 0.0 {
        return Err(Error::NonPositivePotential { min: phi.min() });
    }
    let phi_x = derivative(&phi);
    let transformed = Field::from_values(
        grid,
        phi.values()
            .iter()
            .zip(phi_x.values())
            .map(|(p, px)| -2.0 * px / p)
            .collect(),
    )?;
    let norm = u.sup_norm();
    let diff = u.distance(&transformed)?;
    if norm == 0.0 {
        return Ok(diff);
    }
    Ok(diff / norm)
}

/// `a sin 2πx cos 2πt`.
pub fn reference_forcing(amplitude: f64) -> Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> {
    Arc::new(move |t, x| amplitude * (2.0 * PI * x).sin() * (2.0 * PI * t).cos())
}

/// Classical Burgers with the reference forcing of the given amplitude.
pub fn reference_burgers(amplitude: f64) -> Nonlinearity {
    Nonlinearity::classical_burgers(reference_forcing(amplitude), TimeDependence::Periodic)
        .with_label("forced_burgers")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StepperConfig;
    use crate::field::{make_grid, sample};

    #[test]
    fn band_constants() {
        let b = AprioriBand::from_c0(0.2, 12);
        let c4 = (4.0 / (3.0 * PI * PI)).powf(0.25) * 0.2;
        assert!((b.c2p[1].1 - c4).abs() < 1e-15);
        assert!((c4 - 0.121_25).abs() < 5e-5);
        assert!((b.c2p[0].1 - 0.2 / PI).abs() < 1e-15);
        assert!(b.is_monotone());
        let g = make_grid(1, 64).unwrap();
        let band = apriori_band(&reference_burgers(0.2), g, 4).unwrap();
        assert!((band.c0 - 0.2).abs() < 1e-12);
        assert!(matches!(apriori_band(&Nonlinearity::heat(), g, 4), Err(Error::NotBurgers)));
    }

    #[test]
    fn mass_check_requires_burgers() {
        let g = make_grid(1, 32).unwrap();
        let tr = Trajectory::from_fn(g, |_, x| x.sin(), 0.0, 0.1, 0.05, &[], 1).unwrap();
        assert!(matches!(
            check_mass_invariance(&tr, &Nonlinearity::heat()),
            Err(Error::NotBurgers)
        ));
    }

    #[test]
    fn unforced_mass_drift() {
        let g = make_grid(1, 64).unwrap();
        let nl = Nonlinearity::unforced_burgers();
        let u0 = sample(|x| 0.3 + 0.1 * (2.0 * PI * x).sin(), g).unwrap();
        let tr = Propagator::new(g, &nl, StepperConfig::new(1e-3))
            .unwrap()
            .evolve(&u0, 0.0, 5.0, &[], 100)
            .unwrap();
        assert!(check_mass_invariance(&tr, &nl).unwrap() <= 1e-12);
    }

    #[test]
    fn constants_are_the_unforced_family() {
        let g = make_grid(1, 32).unwrap();
        let nl = Nonlinearity::unforced_burgers();
        let prop = Propagator::new(g, &nl, StepperConfig::new(1e-2)).unwrap();
        let fam = solve_v_family(&nl, g, &[0.5, -0.5, 0.0], FixedPointOptions::new(1e-12, 3), &prop)
            .unwrap();
        assert_eq!(fam.orbits.len(), 3);
        for o in &fam.orbits {
            assert_eq!(o.iterations, 0);
            assert!(o.profile.values().iter().all(|&v| v == o.y));
        }
        assert!(fam.min_gaps.iter().all(|&gap| (gap - 0.5).abs() < 1e-15));
    }

    #[test]
    fn nonconvergence_is_reported() {
        let g = make_grid(1, 32).unwrap();
        let nl = reference_burgers(0.5);
        let prop = Propagator::new(g, &nl, StepperConfig::new(1e-2)).unwrap();
        let err = solve_orbit(&prop, &Field::constant(g, 0.0), FixedPointOptions::new(1e-14, 0)).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 0, .. }));
    }

    #[test]
    fn ordering_violation_detected() {
        let g = make_grid(1, 16).unwrap();
        let orbit = |y: f64, f: Field| PeriodicOrbit { y, profile: f, residual: 0.0, iterations: 0 };
        let a = orbit(0.0, sample(|x| (2.0 * PI * x).sin(), g).unwrap());
        let b = orbit(0.1, Field::constant(g, 0.1));
        assert!(matches!(ordered_family(vec![a, b]), Err(Error::OrderingViolation { .. })));
    }

    #[test]
    fn mass_mismatch_rejected() {
        let g = make_grid(1, 16).unwrap();
        let nl = Nonlinearity::unforced_burgers();
        let prop = Propagator::new(g, &nl, StepperConfig::new(1e-2)).unwrap();
        let orbit = PeriodicOrbit { y: 0.2, profile: Field::constant(g, 0.2), residual: 0.0, iterations: 0 };
        let u0 = Field::constant(g, 0.3);
        assert!(matches!(
            converge_to_vy(&u0, &prop, &orbit, 3, 1e-6),
            Err(Error::MassMismatch { .. })
        ));
        let s = converge_to_vy(&orbit.profile, &prop, &orbit, 3, 1e-6).unwrap();
        assert_eq!(s.reached, Some(0));
    }

    #[test]
    fn transient_length() {
        let s = ConvergenceSeries { distances: vec![1.0, 2.0, 1.5, 1.6, 1.0, 0.5], reached: None };
        assert_eq!(s.transient(), 3);
        let s = ConvergenceSeries { distances: vec![1.0, 0.5, 0.2], reached: None };
        assert_eq!(s.transient(), 0);
    }

    #[test]
    fn spectral_antiderivative() {
        let g = make_grid(1, 64).unwrap();
        let u = sample(|x| (2.0 * PI * x).cos(), g).unwrap();
        let a = antiderivative(&u).unwrap();
        let exact = sample(|x| (2.0 * PI * x).sin() / (2.0 * PI), g).unwrap();
        assert!(a.distance(&exact).unwrap() < 1e-14);
        assert!(antiderivative(&Field::constant(g, 1.0)).is_err());
    }

    #[test]
    fn cole_hopf_of_zero_is_exact() {
        let g = make_grid(1, 32).unwrap();
        let err = cole_hopf_crosscheck(
            &Field::zeros(g),
            Arc::new(|_, _| 0.0),
            TimeDependence::Autonomous,
            0.05,
            StepperConfig::new(1e-3),
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn cole_hopf_requires_zero_mass() {
        let g = make_grid(1, 32).unwrap();
        let u0 = Field::constant(g, 0.1);
        let r = cole_hopf_crosscheck(&u0, Arc::new(|_, _| 0.0), TimeDependence::Autonomous, 0.05, StepperConfig::new(1e-3));
        assert!(matches!(r, Err(Error::MassMismatch { .. })));
    }
}
