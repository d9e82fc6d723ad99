//! Finite ensembles on the `L`-cell torus standing in for shift-invariant measures.
//!
//! An ensemble is a weighted list of members. Every expectation is taken with
//! respect to the shift closure, i.e. each member also stands for its `L`
//! cyclic cell shifts with equal share, which makes the empirical measure
//! exactly invariant under [`shift_cell`].

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::dynamics::{NonlinearityKind, Nonlinearity, Propagator};
use crate::error::{Error, Result};
use crate::field::{derivative_at, shift_cell, Field, GridSpec};
use crate::nodal::{circle_count, pair_floor};
use crate::trajectory::Trajectory;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    #[serde(skip)]
    members: Vec<Field>,
    weights: Vec<f64>,
    seed: u64,
    /// Construction and evolution steps, oldest first.
    lineage: Vec<String>,
}

impl Ensemble {
    pub fn new(members: Vec<Field>, weights: Vec<f64>, seed: u64, lineage: impl Into<String>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidArgument("an ensemble needs at least one member".into()));
        };
        let grid = first.grid();
        if grid.cells() < 2 {
            return Err(Error::InvalidArgument("ensembles live on tori with at least 2 cells".into()));
        }
        for m in &members {
            grid.ensure_same(&m.grid())?;
        }
        if weights.len() != members.len() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("one nonnegative weight per member required".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            members,
            weights,
            seed,
            lineage: vec![lineage.into()],
        })
    }

    pub fn uniform(members: Vec<Field>, seed: u64, lineage: impl Into<String>) -> Result<Self> {
        let w = 1.0 / members.len().max(1) as f64;
        let weights = vec![w; members.len()];
        Self::new(members, weights, seed, lineage)
    }

    pub fn members(&self) -> &[Field] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lineage(&self) -> &[String] {
        &self.lineage
    }

    pub fn grid(&self) -> GridSpec {
        self.members[0].grid()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Same weights and seed with new members, recording `step` in the lineage.
    pub fn derive(&self, members: Vec<Field>, step: impl Into<String>) -> Self {
        let mut lineage = self.lineage.clone();
        lineage.push(step.into());
        Self {
            members,
            weights: self.weights.clone(),
            seed: self.seed,
            lineage,
        }
    }

    /// Weighted expectation of a shift-invariant observable.
    pub fn expectation(&self, f: impl Fn(&Field) -> f64) -> f64 {
        self.members.iter().zip(&self.weights).map(|(m, w)| w * f(m)).sum()
    }

    /// Manifest line: seed, lineage, grid, weights.
    pub fn write_manifest_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        let grid = self.grid();
        let doc = serde_json::json!({
            "seed": self.seed,
            "lineage": self.lineage,
            "cells": grid.cells(),
            "points_per_cell": grid.points_per_cell(),
            "count": self.len(),
            "weights": self.weights,
        });
        serde_json::to_writer(&mut writer, &doc)?;
        writer.write_all(b"\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliOptions {
    /// Probability of drawing the second letter.
    pub prob_one: f64,
    /// Relative per-cell amplitude jitter.
    pub jitter: f64,
    /// Also require the endpoint slopes of the two letters to agree.
    pub match_slopes: bool,
}

impl Default for BernoulliOptions {
    fn default() -> Self {
        Self {
            prob_one: 0.5,
            jitter: 1e-3,
            match_slopes: false,
        }
    }
}

/// Members made of i.i.d. letters `p0`/`p1` laid side by side on an `L`-cell torus.
///
/// Letters may span several cells (their grid fixes the width), which must
/// divide `L`. Each cell of each member is scaled by `1 + jitter·ξ`, `ξ`
/// uniform in `[-1, 1]`, so exact tangencies at letter junctions do not persist.
pub fn bernoulli_ensemble(
    p0: &Field,
    p1: &Field,
    cells: usize,
    count: usize,
    seed: u64,
    opts: BernoulliOptions,
) -> Result<Ensemble> {
    p0.grid().ensure_same(&p1.grid())?;
    if count < 2 {
        return Err(Error::InvalidArgument("a Bernoulli ensemble needs at least 2 members".into()));
    }
    let width = p0.grid().cells();
    if cells % width != 0 {
        return Err(Error::InvalidArgument(format!(
            "letters of {width} cells do not tile {cells} cells"
        )));
    }
    if !(0.0..=1.0).contains(&opts.prob_one) {
        return Err(Error::InvalidArgument("letter probability must lie in [0, 1]".into()));
    }
    let gap = (p0.values()[0] - p1.values()[0]).abs();
    if gap > 1e-12 {
        return Err(Error::EndpointMismatch { gap });
    }
    if opts.match_slopes {
        let gap = (derivative_at(p0, 0) - derivative_at(p1, 0)).abs();
        if gap > 1e-12 {
            return Err(Error::EndpointMismatch { gap });
        }
    }

    let grid = p0.grid().with_cells(cells)?;
    let n = grid.points_per_cell();
    let letter_len = p0.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(count);
    for _ in 0..count {
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..cells / width {
            let letter = if rng.random_bool(opts.prob_one) { p1 } else { p0 };
            values.extend_from_slice(letter.values());
        }
        for cell in values.chunks_mut(n) {
            let scale = 1.0 + opts.jitter * rng.random_range(-1.0..=1.0);
            cell.iter_mut().for_each(|v| *v *= scale);
        }
        debug_assert_eq!(values.len() % letter_len, 0);
        members.push(Field::from_values(grid, values)?);
    }
    Ensemble::uniform(
        members,
        seed,
        format!(
            "bernoulli(cells={cells}, letter_cells={width}, count={count}, p={}, jitter={})",
            opts.prob_one, opts.jitter
        ),
    )
}

/// `C = Σ_d circle_count(u, S^d v)` over all `L` cell shifts.
fn shifted_circle_counts(u: &Field, v: &Field) -> u64 {
    let cells = u.grid().cells() as i64;
    let floor = pair_floor(u, v);
    let mut w = vec![0.0; u.len()];
    (0..cells)
        .map(|d| {
            let sv = shift_cell(v, d);
            for ((o, a), b) in w.iter_mut().zip(u.values()).zip(sv.values()) {
                *o = a - b;
            }
            circle_count(&w, floor) as u64
        })
        .sum()
}

fn combine(e: &Ensemble, f: &Ensemble, counts: &[Vec<u64>]) -> f64 {
    let l = e.grid().cells() as f64;
    let mut z = 0.0;
    for (i, wi) in e.weights.iter().enumerate() {
        for (j, wj) in f.weights.iter().enumerate() {
            z += wi * wj * counts[i][j] as f64;
        }
    }
    z / (l * l)
}

/// Expected number of zeroes per unit cell between independent draws of the
/// shift closures of `e` and `f`: `Σ_ij w_i w_j (1/L²) Σ_{k,l} z(S^k u_i, S^l v_j)`.
pub fn zero_functional(e: &Ensemble, f: &Ensemble) -> Result<f64> {
    e.grid().ensure_same(&f.grid())?;
    // No (i, j) <-> (j, i) shortcut: the sign rule is not symmetric under w -> -w
    // for values inside the noise floor.
    let counts: Vec<Vec<u64>> = e
        .members
        .iter()
        .map(|u| f.members.iter().map(|v| shifted_circle_counts(u, v)).collect())
        .collect();
    Ok(combine(e, f, &counts))
}

/// `Z(μ) = Ẑ(μ, μ)`.
pub fn zero_functional_self(e: &Ensemble) -> f64 {
    zero_functional(e, e).expect("members share a grid")
}

/// [`zero_functional`] against the shift closure of a single field.
pub fn zero_functional_field(e: &Ensemble, v: &Field) -> Result<f64> {
    let single = Ensemble::new(vec![v.clone()], vec![1.0], e.seed, "single")?;
    zero_functional(e, &single)
}

/// Literal evaluation of the zero functional: every ordered member pair, every
/// pair of shifts, one-cell window `[0, 1)`.
pub fn zero_functional_exhaustive(e: &Ensemble) -> f64 {
    let cells = e.grid().cells() as i64;
    let n = e.grid().points_per_cell() as i64;
    let shifted: Vec<Vec<Field>> = e
        .members
        .iter()
        .map(|m| (0..cells).map(|k| shift_cell(m, k)).collect())
        .collect();
    let mut counts = vec![vec![0u64; e.len()]; e.len()];
    for (i, ui) in shifted.iter().enumerate() {
        for (j, uj) in shifted.iter().enumerate() {
            let floor = pair_floor(&e.members[i], &e.members[j]);
            let mut c = 0u64;
            for a in ui {
                for b in uj {
                    let (a, b) = (a.values(), b.values());
                    let sign = |m: i64| a[m as usize] - b[m as usize] >= -floor;
                    c += (0..n).filter(|&m| sign(m) != sign(m + 1)).count() as u64;
                }
            }
            counts[i][j] = c;
        }
    }
    combine(e, e, &counts)
}

/// Zero count of `u - v` over the whole torus, per cell.
pub fn density_of_zeroes(u: &Field, v: &Field) -> Result<f64> {
    u.grid().ensure_same(&v.grid())?;
    let w = u.sub(v)?;
    Ok(circle_count(w.values(), pair_floor(u, v)) as f64 / u.grid().cells() as f64)
}

/// Weighted mean sup distance of the members to `target`.
pub fn weakstar_distance(e: &Ensemble, target: &Field) -> Result<f64> {
    e.grid().ensure_same(&target.grid())?;
    let mut total = 0.0;
    for (m, w) in e.members.iter().zip(&e.weights) {
        total += w * m.distance(target)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    /// `Z(μ_k)` for `k = 0..=iterates`.
    pub z_mu: Vec<f64>,
    /// Largest zero density over member pairs at the start.
    pub zeta_hat: f64,
    /// Distance to the target orbit per iterate, when one was given.
    pub weakstar_dist: Vec<f64>,
    /// Iterates `k` with `Z(μ_k) > Z(μ_{k-1}) + tol`.
    pub violations: Vec<usize>,
}

impl EnsembleReport {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }

    /// `k,z_mu,weakstar_dist` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "z_mu", "weakstar_dist"])?;
        for (k, z) in self.z_mu.iter().enumerate() {
            let d = self.weakstar_dist.get(k).map(|d| d.to_string()).unwrap_or_default();
            w.write_record([k.to_string(), z.to_string(), d])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer(&mut writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }
}

/// Options for [`evolve_ensemble`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions<'a> {
    pub iterates: usize,
    /// Allowed increase of `Z(μ)` per iterate.
    pub tol: f64,
    pub target: Option<&'a Field>,
    /// Stop early once the distance to the target drops below this value.
    pub stop_below: Option<f64>,
}

impl EvolveOptions<'_> {
    pub fn new(iterates: usize) -> Self {
        Self {
            iterates,
            tol: 1e-12,
            target: None,
            stop_below: None,
        }
    }
}

/// Applies the time-one map to every member `iterates` times, tracking `Z(μ)`
/// and optionally the distance to a target orbit.
pub fn evolve_ensemble(e: &Ensemble, prop: &Propagator, opts: EvolveOptions<'_>) -> Result<(EnsembleReport, Ensemble)> {
    let mut zeta_hat = 0.0_f64;
    for u in &e.members {
        for v in &e.members {
            zeta_hat = zeta_hat.max(density_of_zeroes(u, v)?);
        }
    }
    let mut members = e.members.clone();
    let mut z_mu = vec![zero_functional_self(e)];
    let mut weakstar_dist = Vec::new();
    if let Some(t) = opts.target {
        weakstar_dist.push(weakstar_distance(e, t)?);
    }
    let mut violations = Vec::new();
    for k in 0..opts.iterates {
        if let (Some(limit), Some(&d)) = (opts.stop_below, weakstar_dist.last()) {
            if d < limit {
                break;
            }
        }
        for (i, m) in members.iter_mut().enumerate() {
            *m = prop.time_one_map(m, k as f64).map_err(|source| Error::Member {
                member: i,
                source: Box::new(source),
            })?;
        }
        let current = e.derive(members.clone(), "");
        let z = zero_functional_self(&current);
        if z > z_mu[k] + opts.tol {
            violations.push(k + 1);
        }
        z_mu.push(z);
        if let Some(t) = opts.target {
            weakstar_dist.push(weakstar_distance(&current, t)?);
        }
    }
    let out = e.derive(members, format!("evolve({}, {} iterates)", prop.nonlinearity().label(), z_mu.len() - 1));
    Ok((
        EnsembleReport {
            z_mu,
            zeta_hat,
            weakstar_dist,
            violations,
        },
        out,
    ))
}

/// Fraction of snapshots within `epsilon` (sup norm) of `target`.
pub fn omega_average_stats(traj: &Trajectory, target: &Field, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let mut hits = 0usize;
    for s in &traj.snapshots {
        if s.field.distance(target)? < epsilon {
            hits += 1;
        }
    }
    Ok(hits as f64 / traj.snapshots.len() as f64)
}

/// Energy per cell, `(1/L) Σ_j [½ u_j (-Δ_h u)_j + V(x_j, u_j)] dx`, with `Δ_h`
/// the fourth-order five-point Laplacian used by the stepper.
pub fn gradient_energy(u: &Field, nl: &Nonlinearity) -> Result<f64> {
    let NonlinearityKind::Gradient { potential, .. } = nl.kind() else {
        return Err(Error::NotGradient);
    };
    let grid = u.grid();
    let dx = grid.dx();
    let inv = 1.0 / (12.0 * dx * dx);
    let mut total = 0.0;
    for j in 0..u.len() {
        let k = j as i64;
        let lap = (-(u.at(k + 2) + u.at(k - 2)) + 16.0 * (u.at(k + 1) + u.at(k - 1)) - 30.0 * u.at(k)) * inv;
        total += -0.5 * u.at(k) * lap + potential(grid.node_x(j), u.at(k));
    }
    Ok(total * dx / grid.cells() as f64)
}

/// Weighted fractions of grid points within `tol` of `+1` and of `-1`.
pub fn sign_fractions(e: &Ensemble, tol: f64) -> (f64, f64) {
    let frac = |m: &Field, c: f64| m.values().iter().filter(|v| (**v - c).abs() < tol).count() as f64 / m.len() as f64;
    (e.expectation(|m| frac(m, 1.0)), e.expectation(|m| frac(m, -1.0)))
}

/// `π(u) = (u(0), u_x(0))`.
pub fn projection_pi(u: &Field) -> (f64, f64) {
    (u.values()[0], derivative_at(u, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub min_distance: f64,
    /// Indices of the closest pair.
    pub closest: (usize, usize),
    /// First coordinates strictly increase along the input order.
    pub first_increasing: bool,
}

pub fn injectivity_report(fields: &[Field]) -> Result<InjectivityReport> {
    if fields.len() < 2 {
        return Err(Error::InvalidArgument("need at least two fields".into()));
    }
    let pts: Vec<_> = fields.iter().map(projection_pi).collect();
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            if d < best.0 {
                best = (d, (i, j));
            }
        }
    }
    Ok(InjectivityReport {
        min_distance: best.0,
        closest: best.1,
        first_increasing: pts.windows(2).all(|w| w[0].0 < w[1].0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StepperConfig;
    use crate::field::{make_grid, mass, mass_per_cell, sample};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn letter(n: usize) -> Field {
        let g = make_grid(1, n).unwrap();
        sample(|x| 0.4 * (2.0 * PI * x).sin() * (PI * x).sin().powi(2), g).unwrap()
    }

    fn reference(count: usize, seed: u64) -> Ensemble {
        let p0 = letter(32);
        let p1 = p0.map(|v| -v);
        bernoulli_ensemble(&p0, &p1, 8, count, seed, BernoulliOptions::default()).unwrap()
    }

    #[test]
    fn bernoulli_construction() {
        let e = reference(64, 7);
        assert_eq!(e.len(), 64);
        assert!((e.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m0 = mass(&letter(32));
        // The letter has zero mass, so only the shape distinguishes cells.
        assert!(m0.abs() < 1e-15);
        let peak = letter(32).max();
        for m in e.members() {
            for (k, cell) in m.values().chunks(32).enumerate() {
                let top = cell.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                assert!((top / peak - 1.0).abs() <= 1.001e-3, "cell {k}");
            }
            assert!(mass_per_cell(m).iter().all(|c| c.abs() < 1e-15));
        }
        assert_eq!(reference(64, 7), e);
        assert_ne!(reference(64, 8).members(), e.members());
    }

    #[test]
    fn bernoulli_rejections() {
        let p0 = letter(32);
        let p1 = p0.map(|v| v + 0.1);
        assert!(matches!(
            bernoulli_ensemble(&p0, &p1, 8, 4, 1, BernoulliOptions::default()),
            Err(Error::EndpointMismatch { .. })
        ));
        let p1 = p0.map(|v| -v);
        assert!(bernoulli_ensemble(&p0, &p1, 8, 1, 1, BernoulliOptions::default()).is_err());
        let strict = BernoulliOptions { match_slopes: true, ..Default::default() };
        assert!(bernoulli_ensemble(&p0, &p0, 8, 2, 1, strict).is_ok());
    }

    #[test]
    fn identical_letters_differ_only_by_jitter() {
        let p0 = letter(32);
        let e = bernoulli_ensemble(&p0, &p0, 8, 5, 3, BernoulliOptions::default()).unwrap();
        let first = &e.members()[0];
        for m in e.members() {
            assert!(m.distance(first).unwrap() <= 2.0 * 1e-3 * p0.sup_norm() + 1e-15);
        }
    }

    #[test]
    fn two_member_example() {
        let g = make_grid(8, 32).unwrap();
        let u = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        let e = Ensemble::uniform(vec![u.clone(), Field::zeros(g)], 0, "pair").unwrap();
        assert_eq!(zero_functional_self(&e), 1.0);
        assert_eq!(zero_functional_exhaustive(&e), 1.0);
        let same = Ensemble::uniform(vec![u.clone(), u], 0, "same").unwrap();
        assert_eq!(zero_functional_self(&same), 0.0);
    }

    #[test]
    fn densities() {
        let g = make_grid(8, 32).unwrap();
        let u = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        assert_eq!(density_of_zeroes(&u, &Field::zeros(g)).unwrap(), 2.0);
        assert_eq!(density_of_zeroes(&u, &u).unwrap(), 0.0);
        let e = reference(16, 11);
        let zero = Field::zeros(e.grid());
        for m in e.members() {
            let d = density_of_zeroes(m, &zero).unwrap();
            let direct = circle_count(m.values(), pair_floor(m, &zero)) as f64 / 8.0;
            assert_eq!(d, direct);
            assert!((1.0..=3.0).contains(&d), "density {d}");
        }
    }

    #[test]
    fn fast_and_exhaustive_agree() {
        let e = reference(12, 5);
        assert_eq!(zero_functional_self(&e), zero_functional_exhaustive(&e));
    }

    #[test]
    fn constants_keep_zero_functional_zero() {
        let g = make_grid(2, 16).unwrap();
        let e = Ensemble::uniform(vec![Field::constant(g, 0.1), Field::constant(g, -0.2)], 0, "c").unwrap();
        let prop = Propagator::new(g, &Nonlinearity::heat(), StepperConfig::new(0.05)).unwrap();
        let (rep, out) = evolve_ensemble(&e, &prop, EvolveOptions::new(3)).unwrap();
        assert_eq!(rep.z_mu, vec![0.0; 4]);
        assert!(rep.is_monotone());
        assert_eq!(out.lineage().len(), 2);
    }

    #[test]
    fn heat_decreases_zero_functional() {
        let p0 = letter(16);
        let p1 = p0.map(|v| -v);
        let e = bernoulli_ensemble(&p0, &p1, 4, 6, 2, BernoulliOptions::default()).unwrap();
        let prop = Propagator::new(e.grid(), &Nonlinearity::heat(), StepperConfig::new(1e-2)).unwrap();
        let (rep, _) = evolve_ensemble(&e, &prop, EvolveOptions::new(5)).unwrap();
        assert!(rep.is_monotone(), "{:?}", rep.z_mu);
        assert!(rep.z_mu[1] < rep.z_mu[0]);
        assert!(rep.zeta_hat.is_finite());
    }

    #[test]
    fn weakstar_and_omega() {
        let g = make_grid(2, 16).unwrap();
        let target = Field::constant(g, 0.3);
        let e = Ensemble::uniform(vec![target.clone(), Field::constant(g, 0.5)], 0, "c").unwrap();
        assert!((weakstar_distance(&e, &target).unwrap() - 0.1).abs() < 1e-15);
        let tr = Trajectory::from_fn(g, |_, _| 0.3, 0.0, 3.0, 1.0, &[], 1).unwrap();
        assert_eq!(omega_average_stats(&tr, &target, 1e-3).unwrap(), 1.0);
        assert_eq!(omega_average_stats(&tr, &Field::constant(g, 0.4), 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn energies() {
        let g = make_grid(2, 16).unwrap();
        let ac = Nonlinearity::allen_cahn();
        for c in [1.0, -1.0] {
            assert!((gradient_energy(&Field::constant(g, c), &ac).unwrap() + 0.25).abs() < 1e-15);
        }
        assert_eq!(gradient_energy(&Field::zeros(g), &ac).unwrap(), 0.0);
        assert!(matches!(gradient_energy(&Field::zeros(g), &Nonlinearity::heat()), Err(Error::NotGradient)));
        // ½∫(u_x)² over one cell is π² for sin 2πx; dx⁴ error at 16 points per cell.
        let u = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        let e = gradient_energy(&u, &Nonlinearity::gradient(std::sync::Arc::new(|_, _| 0.0), std::sync::Arc::new(|_, _| 0.0)))
            .unwrap();
        assert!((e / (PI * PI) - 1.0).abs() < 1e-3, "{e}");
    }

    #[test]
    fn projections() {
        let g = make_grid(1, 64).unwrap();
        assert_eq!(projection_pi(&Field::constant(g, 0.7)), (0.7, 0.0));
        let a = sample(|x| (2.0 * PI * x).sin().powi(3), g).unwrap();
        let b = sample(|x| (2.0 * PI * x).sin().powi(3) + 0.5 * (PI * x).sin().powi(8), g).unwrap();
        let rep = injectivity_report(&[a, b]).unwrap();
        assert!(rep.min_distance < 1e-6);
        let fam: Vec<_> = (0..3).map(|k| Field::constant(g, k as f64)).collect();
        let rep = injectivity_report(&fam).unwrap();
        assert!(rep.first_increasing && rep.min_distance == 1.0);
    }

    proptest! {
        #[test]
        fn expectations_are_shift_invariant(seed in 0u64..1000, k in 0i64..8) {
            let e = reference(4, seed);
            let shifted = e.derive(e.members().iter().map(|m| shift_cell(m, k)).collect(), "shift");
            prop_assert_eq!(zero_functional_self(&e), zero_functional_self(&shifted));
            let zero = Field::zeros(e.grid());
            let a = zero_functional_field(&e, &zero).unwrap();
            let b = zero_functional_field(&shifted, &zero).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn self_functional_is_symmetric_sum(seed in 0u64..1000) {
            let e = reference(5, seed);
            prop_assert_eq!(zero_functional_self(&e), zero_functional_exhaustive(&e));
        }
    }
}
