//! Recorded solutions: strided snapshots plus dense per-step probe series.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{derivative_at, Field, GridSpec};

/// Round-off multiple below which a difference of two states is treated as an exact zero.
pub const NOISE_ULPS: f64 = 4096.0;

/// Absolute threshold under which `u - v` is indistinguishable from zero for
/// operands of magnitude `scale`.
pub fn noise_floor(scale: f64) -> f64 {
    NOISE_ULPS * f64::EPSILON * scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

/// Value and fourth-order slope at one node, recorded after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSeries {
    pub x: f64,
    pub node: usize,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    /// Times of all recorded steps, `t0` included; probe series are aligned with it.
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub probes: Vec<ProbeSeries>,
    /// Largest magnitude of the underlying states over the run.
    pub scale: f64,
}

/// Incremental builder used by the integrators.
pub(crate) struct Recorder {
    traj: Trajectory,
    stride: usize,
}

impl Recorder {
    pub(crate) fn new(
        u0: &Field,
        t0: f64,
        t1: f64,
        dt: f64,
        probes: &[f64],
        stride: usize,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("snapshot stride must be positive".into()));
        }
        let grid = u0.grid();
        let probes = probes
            .iter()
            .map(|&x| {
                let node = grid.nearest_node(x);
                ProbeSeries {
                    x: grid.node_x(node),
                    node,
                    values: Vec::new(),
                    slopes: Vec::new(),
                }
            })
            .collect();
        let mut rec = Self {
            traj: Trajectory {
                grid,
                t0,
                t1,
                dt,
                times: Vec::new(),
                snapshots: Vec::new(),
                probes,
                scale: 0.0,
            },
            stride,
        };
        rec.record(0, t0, u0, false);
        Ok(rec)
    }

    pub(crate) fn record(&mut self, step: usize, t: f64, u: &Field, last: bool) {
        self.traj.times.push(t);
        self.traj.scale = self.traj.scale.max(u.sup_norm());
        for p in &mut self.traj.probes {
            p.values.push(u.values()[p.node]);
            p.slopes.push(derivative_at(u, p.node));
        }
        if step % self.stride == 0 || last {
            self.traj.snapshots.push(Snapshot {
                t,
                field: u.clone(),
            });
        }
    }

    pub(crate) fn finish(self) -> Trajectory {
        self.traj
    }
}

impl Trajectory {
    /// Samples an analytic space-time function on the grid, as if it had been integrated.
    pub fn from_fn(
        grid: GridSpec,
        f: impl Fn(f64, f64) -> f64,
        t0: f64,
        t1: f64,
        dt: f64,
        probes: &[f64],
        stride: usize,
    ) -> Result<Self> {
        let steps = step_count(t0, t1, dt)?;
        let field_at = |t: f64| crate::field::sample(|x| f(t, x), grid);
        let mut rec = Recorder::new(&field_at(t0)?, t0, t1, dt, probes, stride)?;
        for n in 1..=steps {
            let t = if n == steps { t1 } else { t0 + n as f64 * dt };
            rec.record(n, t, &field_at(t)?, n == steps);
        }
        Ok(rec.finish())
    }

    pub fn final_state(&self) -> &Field {
        &self
            .snapshots
            .last()
            .expect("a trajectory always holds its initial snapshot")
            .field
    }

    pub fn initial_state(&self) -> &Field {
        &self.snapshots[0].field
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn noise_floor(&self) -> f64 {
        noise_floor(self.scale)
    }

    /// Snapshot recorded at `t`, to within half a step.
    pub fn snapshot_at(&self, t: f64) -> Result<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 0.5 * self.dt)
            .ok_or(Error::MissingSnapshot { t })
    }

    pub fn probe_at(&self, x: f64) -> Result<&ProbeSeries> {
        let node = self.grid.nearest_node(x);
        let c = self.grid.circumference();
        let off = (x.rem_euclid(c) - self.grid.node_x(node)).abs();
        if off.min(c - off) > 1e-9 {
            return Err(Error::MissingProbe { x });
        }
        self.probes
            .iter()
            .find(|p| p.node == node)
            .ok_or(Error::MissingProbe { x })
    }

    /// The difference trajectory `u - v`, sharing the time grid of both inputs.
    pub fn difference(u: &Trajectory, v: &Trajectory) -> Result<Trajectory> {
        u.grid.ensure_same(&v.grid)?;
        if u.times != v.times || u.snapshots.len() != v.snapshots.len() {
            return Err(Error::InvalidArgument(
                "trajectories do not share a time grid".into(),
            ));
        }
        let snapshots = u
            .snapshots
            .iter()
            .zip(&v.snapshots)
            .map(|(a, b)| {
                if a.t != b.t {
                    return Err(Error::InvalidArgument(
                        "trajectories do not share snapshot times".into(),
                    ));
                }
                Ok(Snapshot {
                    t: a.t,
                    field: a.field.sub(&b.field)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let probes = u
            .probes
            .iter()
            .map(|p| {
                let q = v
                    .probes
                    .iter()
                    .find(|q| q.node == p.node)
                    .ok_or(Error::MissingProbe { x: p.x })?;
                Ok(ProbeSeries {
                    x: p.x,
                    node: p.node,
                    values: p.values.iter().zip(&q.values).map(|(a, b)| a - b).collect(),
                    slopes: p.slopes.iter().zip(&q.slopes).map(|(a, b)| a - b).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            grid: u.grid,
            t0: u.t0,
            t1: u.t1,
            dt: u.dt,
            times: u.times.clone(),
            snapshots,
            probes,
            scale: u.scale.max(v.scale),
        })
    }

    /// Snapshots as `t,x,value` rows.
    pub fn write_snapshots_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "value"])?;
        for s in &self.snapshots {
            for (j, v) in s.field.values().iter().enumerate() {
                w.serialize((s.t, self.grid.node_x(j), v))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Probe series as `t,x,value,slope` rows.
    pub fn write_probes_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "value", "slope"])?;
        for p in &self.probes {
            for (n, t) in self.times.iter().enumerate() {
                w.serialize((t, p.x, p.values[n], p.slopes[n]))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of steps of size `dt` covering `[t0, t1]`, the last one possibly shorter.
pub(crate) fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if t1 < t0 {
        return Err(Error::InvalidArgument(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let ratio = (t1 - t0) / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        Ok(rounded as usize)
    } else {
        Ok(ratio.ceil() as usize)
    }
}
