//! Zero counting, nodal-curve tracking and the flux/dissipation balance of zeroes.
//!
//! Signs are classified with a single global rule: a value `w` is negative iff
//! `w < -floor`, where `floor` is a round-off threshold derived from the
//! magnitude of the operands (see [`crate::trajectory::noise_floor`]). Exact
//! zeroes therefore count as positive. Using the same rule for node counts,
//! boundary probes and curve matching keeps count, flux and dissipation
//! consistent as integers.
//!
//! All windows are half-open, `[x_left, x_right)` in space and `[s, t)` for
//! crossings in time. A zero "lives" in the node interval `(x_j, x_{j+1})`
//! where the sign changes; the interval belongs to the window when `x_j` does.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{derivative, Field, GridSpec};
use crate::trajectory::{noise_floor, Trajectory};

#[inline]
fn positive(w: f64, floor: f64) -> bool {
    w >= -floor
}

/// Round-off floor for the difference of two fields.
pub fn pair_floor(u: &Field, v: &Field) -> f64 {
    noise_floor(u.sup_norm().max(v.sup_norm()))
}

/// Node-index range `[start, end)` of a spatial window given in cell units.
fn node_window(grid: GridSpec, window: (f64, f64)) -> Result<(i64, i64)> {
    let n = grid.points_per_cell() as f64;
    let (a, b) = ((window.0 * n).round() as i64, (window.1 * n).round() as i64);
    if b <= a || (b - a) as usize > grid.len() {
        return Err(Error::InvalidArgument(format!(
            "window [{}, {}) is empty or longer than the circle",
            window.0, window.1
        )));
    }
    Ok((a, b))
}

fn wrap(j: i64, n: usize) -> usize {
    j.rem_euclid(n as i64) as usize
}

/// Sign changes of `w` across the node pairs `(j, j+1)`, `j ∈ [start, end)`.
pub(crate) fn count_changes(w: &[f64], floor: f64, start: i64, end: i64) -> usize {
    let n = w.len();
    (start..end)
        .filter(|&j| positive(w[wrap(j, n)], floor) != positive(w[wrap(j + 1, n)], floor))
        .count()
}

/// Sign changes on the whole circle.
pub(crate) fn circle_count(w: &[f64], floor: f64) -> usize {
    count_changes(w, floor, 0, w.len() as i64)
}

/// Number of sign changes of `u - v` in the half-open cell window `[a, b)`.
pub fn zero_count(u: &Field, v: &Field, window: (f64, f64)) -> Result<usize> {
    u.grid().ensure_same(&v.grid())?;
    let (a, b) = node_window(u.grid(), window)?;
    let w = u.sub(v)?;
    Ok(count_changes(w.values(), pair_floor(u, v), a, b))
}

fn crossings(w: &[f64], grid: GridSpec, floor: f64, start: i64, end: i64) -> Vec<f64> {
    let n = w.len();
    let dx = grid.dx();
    let c = grid.circumference();
    (start..end)
        .filter_map(|j| {
            let (w0, w1) = (w[wrap(j, n)], w[wrap(j + 1, n)]);
            if positive(w0, floor) == positive(w1, floor) {
                return None;
            }
            let frac = w0 / (w0 - w1);
            let frac = if frac.is_finite() { frac.clamp(0.0, 1.0) } else { 0.0 };
            Some((j as f64 + frac) * dx)
        })
        .map(|x| x.rem_euclid(c))
        .collect()
}

/// Linearly interpolated zero positions of `u - v` in `[a, b)`, in order along the circle
/// starting from `a`.
pub fn subgrid_zeroes(u: &Field, v: &Field, window: (f64, f64)) -> Result<Vec<f64>> {
    u.grid().ensure_same(&v.grid())?;
    let (a, b) = node_window(u.grid(), window)?;
    let w = u.sub(v)?;
    Ok(crossings(w.values(), u.grid(), pair_floor(u, v), a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tangency {
    pub x: f64,
    pub value: f64,
    pub slope: f64,
}

/// Nodes where `|w| < tol_v` and `|w_x| < tol_d` simultaneously, `w = u - v`.
///
/// An empty result certifies transversality of all zeroes at these tolerances.
pub fn tangency_scan(u: &Field, v: &Field, tol_v: f64, tol_d: f64) -> Result<Vec<Tangency>> {
    if !(tol_v > 0.0 && tol_d > 0.0) {
        return Err(Error::InvalidArgument("tangency tolerances must be positive".into()));
    }
    let w = u.sub(v)?;
    let wx = derivative(&w);
    Ok(w.values()
        .iter()
        .zip(wx.values())
        .enumerate()
        .filter(|(_, (a, b))| a.abs() < tol_v && b.abs() < tol_d)
        .map(|(j, (a, b))| Tangency {
            x: u.grid().node_x(j),
            value: a.abs(),
            slope: b.abs(),
        })
        .collect())
}

fn time_tol(times: &[f64]) -> f64 {
    if times.len() < 2 {
        1e-12
    } else {
        1e-6 * (times[1] - times[0]).abs()
    }
}

fn check_time_window(times: &[f64], s: f64, t: f64) -> Result<()> {
    let (t0, t1) = (times[0], *times.last().expect("non-empty probe"));
    let eps = time_tol(times);
    if !(s < t) || s < t0 - eps || t > t1 + eps {
        return Err(Error::WindowOutOfRange { s, t, t0, t1 });
    }
    Ok(())
}

/// Indices `n` with `times[n] ∈ [s, t)` that have a successor.
fn window_steps(times: &[f64], s: f64, t: f64) -> impl Iterator<Item = usize> + '_ {
    let eps = time_tol(times);
    (0..times.len().saturating_sub(1)).filter(move |&n| times[n] >= s - eps && times[n] < t - eps)
}

/// Net flux of zeroes through a fixed point, from its probe series.
///
/// Each sign change of the probe between consecutive steps whose earlier time
/// lies in `[s, t)` contributes `-sgn(w_t)`: `+1` for a downward crossing,
/// `-1` for an upward one.
pub fn boundary_flux(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<i64> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::InvalidArgument("probe and time series differ in length".into()));
    }
    check_time_window(times, window.0, window.1)?;
    Ok(window_steps(times, window.0, window.1)
        .filter_map(|n| {
            let (a, b) = (positive(values[n], 0.0), positive(values[n + 1], 0.0));
            (a != b).then_some(if a { 1 } else { -1 })
        })
        .sum())
}

/// Net number of zeroes crossing the probe point leftwards, `Σ sgn(w_t)·sgn(w_x)`.
///
/// This is the flux oriented for the balance `ΔZ = F_right - F_left - D`;
/// it coincides with [`boundary_flux`] wherever `w_x < 0`.
fn leftward_flux(
    times: &[f64],
    values: &[f64],
    slopes: &[f64],
    window: (f64, f64),
    floor: f64,
) -> Result<i64> {
    check_time_window(times, window.0, window.1)?;
    let mut total = 0;
    for n in window_steps(times, window.0, window.1) {
        let (a, b) = (positive(values[n], floor), positive(values[n + 1], floor));
        if a == b {
            continue;
        }
        let upward = if a { -1 } else { 1 };
        let (s0, s1) = (slopes[n], slopes[n + 1]);
        if s0 == 0.0 || s1 == 0.0 || s0.signum() != s1.signum() {
            return Err(Error::UnresolvedMatching {
                t: times[n],
                reason: "tangential crossing of a window edge".into(),
            });
        }
        total += upward * s0.signum() as i64;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Terminal {
    Open,
    Annihilated { t: f64, x: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalCurve {
    pub id: usize,
    /// `(t, x)` samples in time order.
    pub samples: Vec<(f64, f64)>,
    pub terminal: Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnihilationEvent {
    pub x: f64,
    pub t: f64,
    pub multiplicity_drop: u32,
    pub curves: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CurveSet {
    pub curves: Vec<NodalCurve>,
    pub events: Vec<AnnihilationEvent>,
}

impl CurveSet {
    /// Polylines as `curve_id,t,x,terminal` rows; the terminal flag is set on the last sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["curve_id", "t", "x", "terminal"])?;
        for c in &self.curves {
            for (i, &(t, x)) in c.samples.iter().enumerate() {
                let flag = if i + 1 < c.samples.len() {
                    ""
                } else {
                    match c.terminal {
                        Terminal::Open => "open",
                        Terminal::Annihilated { .. } => "annihilated",
                    }
                };
                w.serialize((c.id, t, x, flag))?;
            }
            if let Terminal::Annihilated { t, x } = c.terminal {
                w.serialize((c.id, t, x, "annihilation_point"))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn circ_dist(a: f64, b: f64, c: f64) -> f64 {
    let d = (a - b).rem_euclid(c);
    d.min(c - d)
}

fn circ_midpoint(a: f64, b: f64, c: f64) -> f64 {
    let d = (b - a).rem_euclid(c);
    if d <= 0.5 * c {
        (a + 0.5 * d).rem_euclid(c)
    } else {
        (b + 0.5 * (c - d)).rem_euclid(c)
    }
}

/// Order-preserving alignment of `new` into a subsequence of the rotated `old` list.
/// Returns `(cost, kept old indices in new order)` for the best rotation.
fn align_with_losses(old: &[f64], new: &[f64], c: f64) -> (f64, Vec<usize>) {
    let (m, n) = (old.len(), new.len());
    let mut best = (f64::INFINITY, Vec::new());
    for r in 0..m {
        let rot = |j: usize| (j + r) % m;
        // dp[i][j]: cost of placing new[..i] into rotated old[..j]
        let mut dp = vec![vec![f64::INFINITY; m + 1]; n + 1];
        for row in dp[0].iter_mut() {
            *row = 0.0;
        }
        for i in 1..=n {
            for j in i..=m {
                let skip = dp[i][j - 1];
                let take = dp[i - 1][j - 1] + circ_dist(old[rot(j - 1)], new[i - 1], c).powi(2);
                dp[i][j] = skip.min(take);
            }
        }
        if dp[n][m] < best.0 {
            let mut kept = vec![0; n];
            let (mut i, mut j) = (n, m);
            while i > 0 {
                let take = dp[i - 1][j - 1] + circ_dist(old[rot(j - 1)], new[i - 1], c).powi(2);
                if j > i && dp[i][j - 1] <= take {
                    j -= 1;
                } else {
                    kept[i - 1] = rot(j - 1);
                    i -= 1;
                    j -= 1;
                }
            }
            best = (dp[n][m], kept);
        }
    }
    best
}

/// Cyclic rotation matching for equal counts; errors when two rotations are comparably good.
fn align_equal(old: &[f64], new: &[f64], c: f64, t: f64) -> Result<Vec<usize>> {
    let m = old.len();
    let mut costs: Vec<(f64, usize)> = (0..m)
        .map(|r| {
            let worst = (0..m).fold(0.0_f64, |w, i| w.max(circ_dist(old[(i + r) % m], new[i], c)));
            (worst, r)
        })
        .collect();
    costs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // With two zeroes the alternative is a swap of the pair, which happens
    // just before every collision and changes no count.
    if m >= 3 && costs[0].0 >= 0.5 * costs[1].0 {
        return Err(Error::UnresolvedMatching {
            t,
            reason: format!(
                "zero displacement {:.3e} is comparable to the alternative matching {:.3e}; refine the snapshot stride",
                costs[0].0, costs[1].0
            ),
        });
    }
    let r = costs[0].1;
    Ok((0..m).map(|i| (i + r) % m).collect())
}

/// Tracks zeroes of the difference trajectory `w` between snapshots in `[s, t]`.
///
/// Zeroes on the circle keep their cyclic order, so equal counts are matched by
/// the best rotation. When the count drops by `2k`, the surviving zeroes are
/// chosen by an order-preserving least-squares alignment and the `2k` lost ones
/// are paired with their nearest neighbour, each pair being one annihilation
/// event of multiplicity drop 2 at the pair midpoint and the later snapshot time.
pub fn match_curves(w: &Trajectory, window: (f64, f64)) -> Result<CurveSet> {
    let (s, t) = window;
    let eps = 0.5 * w.dt;
    let snaps: Vec<_> = w
        .snapshots
        .iter()
        .filter(|sn| sn.t >= s - eps && sn.t <= t + eps)
        .collect();
    if snaps.is_empty() {
        return Err(Error::WindowOutOfRange { s, t, t0: w.t0, t1: w.t1 });
    }
    let grid = w.grid;
    let c = grid.circumference();
    let floor = w.noise_floor();
    let zeros_of = |f: &Field| crossings(f.values(), grid, floor, 0, grid.len() as i64);

    let mut set = CurveSet::default();
    let mut prev = zeros_of(&snaps[0].field);
    let mut active: Vec<usize> = Vec::with_capacity(prev.len());
    for &x in &prev {
        active.push(set.curves.len());
        set.curves.push(NodalCurve {
            id: set.curves.len(),
            samples: vec![(snaps[0].t, x)],
            terminal: Terminal::Open,
        });
    }

    for sn in &snaps[1..] {
        let next = zeros_of(&sn.field);
        let (m, n) = (prev.len(), next.len());
        if n > m {
            return Err(Error::UnresolvedMatching {
                t: sn.t,
                reason: format!("zero count increased from {m} to {n}"),
            });
        }
        if m == 0 {
            prev = next;
            continue;
        }
        let kept = if n == m {
            align_equal(&prev, &next, c, sn.t)?
        } else {
            if (m - n) % 2 != 0 {
                return Err(Error::UnresolvedMatching {
                    t: sn.t,
                    reason: format!("odd change of the circle count ({m} -> {n})"),
                });
            }
            let (_, kept) = align_with_losses(&prev, &next, c);
            // Lost zeroes in cyclic order, starting right after the first kept one.
            let mut lost: Vec<usize> = (0..m).filter(|j| !kept.contains(j)).collect();
            if let Some(&k0) = kept.first() {
                lost.sort_by_key(|&j| (j + m - k0) % m);
            }
            let pairing = |offset: usize| -> (f64, Vec<(usize, usize)>) {
                let len = lost.len();
                let pairs: Vec<_> = (0..len / 2)
                    .map(|p| (lost[(2 * p + offset) % len], lost[(2 * p + 1 + offset) % len]))
                    .collect();
                let cost = pairs.iter().map(|&(a, b)| circ_dist(prev[a], prev[b], c)).sum();
                (cost, pairs)
            };
            let (c0, p0) = pairing(0);
            let (c1, p1) = pairing(1);
            let pairs = if c1 < c0 { p1 } else { p0 };
            for (a, b) in pairs {
                let x = circ_midpoint(prev[a], prev[b], c);
                let (ca, cb) = (active[a], active[b]);
                set.curves[ca].terminal = Terminal::Annihilated { t: sn.t, x };
                set.curves[cb].terminal = Terminal::Annihilated { t: sn.t, x };
                set.events.push(AnnihilationEvent {
                    x,
                    t: sn.t,
                    multiplicity_drop: 2,
                    curves: [ca, cb],
                });
            }
            kept
        };
        let mut next_active = Vec::with_capacity(n);
        for (i, &j) in kept.iter().enumerate() {
            let id = active[j];
            set.curves[id].samples.push((sn.t, next[i]));
            next_active.push(id);
        }
        active = next_active;
        prev = next;
    }
    Ok(set)
}

/// Space-time window `[x_left, x_right) × [s, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerWindow {
    pub x_left: f64,
    pub x_right: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroLedger {
    pub window: LedgerWindow,
    pub z_start: usize,
    pub z_end: usize,
    pub f_left: i64,
    pub f_right: i64,
    pub d: u32,
    pub residual: i64,
    pub events: Vec<AnnihilationEvent>,
}

impl ZeroLedger {
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer(&mut writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }
}

/// Zero count, edge fluxes and dissipation of `u - v` on a window, with the balance residual.
///
/// Both trajectories must share the time grid and carry probes at both window
/// edges. A nonzero residual means the window is not resolved and is returned
/// as an error.
pub fn balance_ledger(u: &Trajectory, v: &Trajectory, window: LedgerWindow) -> Result<ZeroLedger> {
    let w = Trajectory::difference(u, v)?;
    ledger_of_difference(&w, window)
}

/// [`balance_ledger`] for an already formed difference trajectory.
pub fn ledger_of_difference(w: &Trajectory, window: LedgerWindow) -> Result<ZeroLedger> {
    let grid = w.grid;
    let c = grid.circumference();
    let (a, b) = node_window(grid, (window.x_left, window.x_right))?;
    let floor = w.noise_floor();
    let z_start = count_changes(w.snapshot_at(window.s)?.field.values(), floor, a, b);
    let z_end = count_changes(w.snapshot_at(window.t)?.field.values(), floor, a, b);

    let left = w.probe_at(window.x_left)?;
    let right = w.probe_at(window.x_right)?;
    let span = (window.s, window.t);
    let f_left = leftward_flux(&w.times, &left.values, &left.slopes, span, floor)?;
    let f_right = leftward_flux(&w.times, &right.values, &right.slopes, span, floor)?;

    let width = window.x_right - window.x_left;
    let curves = match_curves(w, span)?;
    let events: Vec<_> = curves
        .events
        .into_iter()
        .filter(|e| (e.x - window.x_left).rem_euclid(c) < width)
        .collect();
    let d: u32 = events.iter().map(|e| e.multiplicity_drop).sum();
    let residual = (z_end as i64 - z_start as i64) - (f_right - f_left - i64::from(d));
    if residual != 0 {
        return Err(Error::UnresolvedMatching {
            t: window.t,
            reason: format!(
                "balance residual {residual} (Z {z_start} -> {z_end}, F_left {f_left}, F_right {f_right}, D {d})"
            ),
        });
    }
    Ok(ZeroLedger {
        window,
        z_start,
        z_end,
        f_left,
        f_right,
        d,
        residual,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_grid, sample, shift_cell};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn four_zero(g: GridSpec) -> Field {
        sample(|x| (2.0 * PI * x).sin() + 0.6 * (4.0 * PI * x).sin(), g).unwrap()
    }

    #[test]
    fn counts() {
        let g = make_grid(1, 128).unwrap();
        let s = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        let z = Field::zeros(g);
        assert_eq!(zero_count(&s, &z, (0.0, 1.0)).unwrap(), 2);
        assert_eq!(zero_count(&s, &s, (0.0, 1.0)).unwrap(), 0);
        assert_eq!(zero_count(&four_zero(g), &z, (0.0, 1.0)).unwrap(), 4);
        let other = make_grid(1, 64).unwrap();
        assert!(matches!(
            zero_count(&s, &Field::zeros(other), (0.0, 1.0)),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn interpolated_positions() {
        let g = make_grid(1, 128).unwrap();
        let dx = g.dx();
        let z = Field::zeros(g);
        let s = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        let xs = subgrid_zeroes(&s, &z, (0.0, 1.0)).unwrap();
        assert_eq!(xs.len(), 2);
        assert!(xs.iter().any(|&x| circ_dist(x, 0.0, 1.0) < dx));
        assert!(xs.iter().any(|&x| circ_dist(x, 0.5, 1.0) < dx));

        let ramp = sample(|x| x - 0.25, g).unwrap();
        let xs = subgrid_zeroes(&ramp, &z, (0.0, 0.5)).unwrap();
        assert_eq!(xs.len(), 1);
        assert!((xs[0] - 0.25).abs() < 1e-12);

        let root = (-5.0f64 / 6.0).acos() / (2.0 * PI);
        let xs = subgrid_zeroes(&four_zero(g), &z, (0.0, 1.0)).unwrap();
        assert_eq!(xs.len(), 4);
        for want in [0.0, root, 0.5, 1.0 - root] {
            assert!(xs.iter().any(|&x| circ_dist(x, want, 1.0) < 2.0 * dx), "{want} missing in {xs:?}");
        }
    }

    #[test]
    fn tangencies() {
        let g = make_grid(1, 256).unwrap();
        let z = Field::zeros(g);
        let s = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        assert!(tangency_scan(&s, &z, 1e-8, 1e-8).unwrap().is_empty());
        let touch = sample(|x| 0.1 * (PI * x).sin().powi(2), g).unwrap();
        let hits = tangency_scan(&touch, &z, 1e-6, 1e-3).unwrap();
        assert!(hits.iter().any(|h| h.x.abs() < 1e-12));
        assert!(tangency_scan(&touch, &z, 0.0, 1.0).is_err());
    }

    #[test]
    fn probe_flux() {
        let dt = 1e-3;
        let times: Vec<f64> = (0..=1000).map(|n| n as f64 * dt).collect();
        let values: Vec<f64> = times.iter().map(|t| -(2.0 * PI * t).cos()).collect();
        assert_eq!(boundary_flux(&times, &values, (0.0, 0.5)).unwrap(), -1);
        assert_eq!(boundary_flux(&times, &values, (0.0, 1.0)).unwrap(), 0);
        let flat = vec![0.3; times.len()];
        assert_eq!(boundary_flux(&times, &flat, (0.0, 1.0)).unwrap(), 0);
        assert!(matches!(
            boundary_flux(&times, &values, (0.5, 1.5)),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn translating_wave_curves() {
        let g = make_grid(1, 128).unwrap();
        let w = Trajectory::from_fn(g, |t, x| (2.0 * PI * (x - t)).sin(), 0.0, 0.25, 1e-3, &[0.0, 0.5], 5)
            .unwrap();
        let set = match_curves(&w, (0.0, 0.25)).unwrap();
        assert!(set.events.is_empty());
        assert_eq!(set.curves.len(), 2);
        for c in &set.curves {
            assert_eq!(c.terminal, Terminal::Open);
            let (t0, x0) = c.samples[0];
            let (t1, x1) = *c.samples.last().unwrap();
            let slope = (x1 - x0).rem_euclid(1.0) / (t1 - t0);
            assert!((slope - 1.0).abs() < 0.02, "slope {slope}");
        }
    }

    #[test]
    fn translating_wave_balances_with_flux() {
        let g = make_grid(1, 128).unwrap();
        let w = Trajectory::from_fn(g, |t, x| (2.0 * PI * (x - t)).sin(), 0.0, 0.25, 1e-3, &[0.0, 0.5], 1)
            .unwrap();
        let window = LedgerWindow { x_left: 0.0, x_right: 0.5, s: 0.0, t: 0.25 };
        let ledger = ledger_of_difference(&w, window).unwrap();
        assert_eq!(ledger.d, 0);
        assert_eq!(ledger.residual, 0);
        assert_eq!(ledger.z_end as i64 - ledger.z_start as i64, ledger.f_right - ledger.f_left);
        assert_ne!(ledger.f_left, 0);
    }

    #[test]
    fn constant_difference_has_no_curves() {
        let g = make_grid(1, 32).unwrap();
        let w = Trajectory::from_fn(g, |_, _| 0.7, 0.0, 0.1, 0.01, &[], 1).unwrap();
        let set = match_curves(&w, (0.0, 0.1)).unwrap();
        assert!(set.curves.is_empty() && set.events.is_empty());
    }

    #[test]
    fn identical_trajectories_give_empty_ledger() {
        let g = make_grid(1, 32).unwrap();
        let u = Trajectory::from_fn(g, |t, x| (2.0 * PI * x).sin() * (-t).exp(), 0.0, 0.1, 0.01, &[0.0], 1)
            .unwrap();
        let l = balance_ledger(&u, &u, LedgerWindow { x_left: 0.0, x_right: 1.0, s: 0.0, t: 0.1 }).unwrap();
        assert_eq!((l.z_start, l.z_end, l.f_left, l.f_right, l.d, l.residual), (0, 0, 0, 0, 0, 0));
    }

    #[test]
    fn synthetic_annihilation_is_recorded() {
        // Two zeroes of -cos(2πx) - 0.8 - 0.4t merge at x = 0.5 when t = 0.5.
        let g = make_grid(1, 256).unwrap();
        let w = Trajectory::from_fn(g, |t, x| -(2.0 * PI * x).cos() - 0.8 - 0.4 * t, 0.0, 1.0, 1e-3, &[0.25], 1)
            .unwrap();
        let set = match_curves(&w, (0.0, 1.0)).unwrap();
        assert_eq!(set.events.len(), 1);
        let e = set.events[0];
        assert!((e.x - 0.5).abs() < 1e-9, "x = {}", e.x);
        assert!((e.t - 0.5).abs() < 0.01, "t = {}", e.t);
        let l = ledger_of_difference(&w, LedgerWindow { x_left: 0.25, x_right: 1.25, s: 0.0, t: 1.0 });
        let l = l.unwrap();
        assert_eq!((l.z_start, l.z_end, l.d), (2, 0, 2));
    }

    #[test]
    fn creation_is_unresolved() {
        let g = make_grid(1, 64).unwrap();
        let w = Trajectory::from_fn(g, |t, x| (2.0 * PI * x).cos() + 1.5 - 2.0 * t, 0.0, 1.0, 0.01, &[], 1)
            .unwrap();
        assert!(matches!(match_curves(&w, (0.0, 1.0)), Err(Error::UnresolvedMatching { .. })));
    }

    #[test]
    fn curve_csv_export() {
        let g = make_grid(1, 64).unwrap();
        let w = Trajectory::from_fn(g, |t, x| (2.0 * PI * (x - t)).sin(), 0.0, 0.02, 0.01, &[], 1).unwrap();
        let set = match_curves(&w, (0.0, 0.02)).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("curve_id,t,x,terminal\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.lines().last().unwrap().ends_with(",open"));
    }

    fn arb_pair() -> impl Strategy<Value = (Field, Field)> {
        (2usize..5).prop_flat_map(|cells| {
            let g = make_grid(cells, 16).unwrap();
            (
                prop::collection::vec(-1.0f64..1.0, g.len()),
                prop::collection::vec(-1.0f64..1.0, g.len()),
            )
                .prop_map(move |(a, b)| {
                    (Field::from_values(g, a).unwrap(), Field::from_values(g, b).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn circle_count_is_even((u, v) in arb_pair()) {
            let c = u.grid().circumference();
            prop_assert_eq!(zero_count(&u, &v, (0.0, c)).unwrap() % 2, 0);
        }

        #[test]
        fn shift_equivariance((u, v) in arb_pair(), a in -3i64..3, len in 1i64..3) {
            let (a, b) = (a as f64, (a + len) as f64);
            let lhs = zero_count(&shift_cell(&u, 1), &shift_cell(&v, 1), (a, b)).unwrap();
            let rhs = zero_count(&u, &v, (a - 1.0, b - 1.0)).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn window_counts_are_additive((u, v) in arb_pair()) {
            let c = u.grid().cells();
            let per_cell: usize = (0..c).map(|k| zero_count(&u, &v, (k as f64, k as f64 + 1.0)).unwrap()).sum();
            prop_assert_eq!(per_cell, zero_count(&u, &v, (0.0, c as f64)).unwrap());
            prop_assert_eq!(subgrid_zeroes(&u, &v, (0.0, c as f64)).unwrap().len(), per_cell);
        }
    }
}
