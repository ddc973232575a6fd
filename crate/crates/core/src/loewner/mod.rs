//! Chordal Loewner equations: the classical flow `g' = a'/(g - U)`, the
//! multiply connected ER flow `h' = -b' H^ER(h, U~)`, curve-to-driving
//! extraction by zipping, and diagnostics.

mod classical;
mod diagnostics;
mod er;
mod zipper;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub use classical::{classical_derivative, solve_classical};
pub use diagnostics::{
    continuity_diagnostics, hull_bound_check, leat0_residual, random_hull, tip_track, ContinuityReport, ContinuityRow,
    HullBoundReport, Leat0Report, TipTrack,
};
pub use er::{
    composition_check, er_schedule, solve_er, CompositionOptions, CompositionReport, CompositionRow, ErSchedule,
    ErSolution, ScheduleKnot, SlitState,
};
pub use zipper::{curve_to_driving, HullMap, TiltedSlit};

/// Piecewise-linear driving function through knots `(t_k, U_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingFunction {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
}

fn check_knots(t: &[f64], v: &[f64], what: &str) -> Result<()> {
    if t.is_empty() || t.len() != v.len() {
        return Err(Error::InvalidArgument(format!("{what} needs equal-length, nonempty knots")));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(format!("{what} knot times must increase strictly")));
    }
    if t.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} knots must be finite")));
    }
    Ok(())
}

fn interp(t: &[f64], v: &[f64], s: f64) -> f64 {
    if s <= t[0] {
        return v[0];
    }
    let k = t.partition_point(|&x| x <= s);
    if k >= t.len() {
        return v[v.len() - 1];
    }
    let a = (s - t[k - 1]) / (t[k] - t[k - 1]);
    v[k - 1] + a * (v[k] - v[k - 1])
}

fn parse_csv(s: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut t = vec![];
    let mut v = vec![];
    for (n, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 2 {
            return Err(Error::Config(format!("line {}: expected two columns", n + 1)));
        }
        match (f[0].parse::<f64>(), f[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                t.push(a);
                v.push(b);
            }
            _ if t.is_empty() => continue,
            _ => return Err(Error::Config(format!("line {}: not a number", n + 1))),
        }
    }
    Ok((t, v))
}

impl DrivingFunction {
    pub fn new(t: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        check_knots(&t, &u, "driving function")?;
        Ok(DrivingFunction { t, u })
    }

    pub fn constant(u: f64, t_end: f64) -> Self {
        DrivingFunction { t: vec![0.0, t_end.max(1e-300)], u: vec![u, u] }
    }

    /// Parses CSV rows `t,U` (an optional header is skipped).
    pub fn from_csv(s: &str) -> Result<Self> {
        let (t, u) = parse_csv(s)?;
        Self::new(t, u).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        interp(&self.t, &self.u, t)
    }
}

/// Piecewise-linear nondecreasing capacity `b(t)` with `b(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySchedule {
    pub t: Vec<f64>,
    pub b: Vec<f64>,
}

impl CapacitySchedule {
    pub fn new(t: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_knots(&t, &b, "capacity schedule")?;
        if t[0] != 0.0 || b[0] != 0.0 {
            return Err(Error::InvalidArgument("capacity schedule must start at (0, 0)".into()));
        }
        if b.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("capacity must be nondecreasing".into()));
        }
        Ok(CapacitySchedule { t, b })
    }

    /// `b(t) = rate * t` on `[0, t_end]`.
    pub fn linear(rate: f64, t_end: f64) -> Result<Self> {
        Self::new(vec![0.0, t_end], vec![0.0, rate * t_end])
    }

    /// Parses CSV rows `t,b`.
    pub fn from_csv(s: &str) -> Result<Self> {
        let (t, b) = parse_csv(s)?;
        Self::new(t, b).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        interp(&self.t, &self.b, t)
    }

    /// Rate on the knot interval containing `t` (right-continuous); zero
    /// beyond the last knot.
    pub fn rate(&self, t: f64) -> f64 {
        let k = self.t.partition_point(|&x| x <= t);
        if k == 0 || k >= self.t.len() {
            return 0.0;
        }
        (self.b[k] - self.b[k - 1]) / (self.t[k] - self.t[k - 1])
    }
}

/// Status of a tracked point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointStatus {
    Alive,
    Swallowed { t: f64 },
}

impl PointStatus {
    pub fn label(&self) -> &'static str {
        match self {
            PointStatus::Alive => "alive",
            PointStatus::Swallowed { .. } => "swallowed",
        }
    }
}

/// A tracked point in the final state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub id: usize,
    pub z: C64,
    pub status: PointStatus,
}

/// One recorded trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub id: usize,
    pub z: C64,
    pub status: PointStatus,
}

/// Solver output: samples at every base step and the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub final_state: Vec<TrackedPoint>,
    pub t: f64,
}

impl Trajectory {
    /// Writes `t,point_id,x,y,status`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        use crate::brownian::histogram::fmt17;
        writeln!(out, "t,point_id,x,y,status")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", fmt17(r.t), r.id, fmt17(r.z.re), fmt17(r.z.im), r.status.label())?;
        }
        Ok(())
    }

    /// Recorded position of point `id` at the recorded time closest to `t`.
    pub fn at(&self, id: usize, t: f64) -> Option<C64> {
        self.rows.iter().filter(|r| r.id == id).min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).map(|r| r.z)
    }
}

/// Integration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Base step.
    pub dt: f64,
    /// Swallowing distance to the driving point.
    pub delta_swallow: f64,
    /// Record every `record_every` base steps (the final time is always
    /// recorded).
    pub record_every: usize,
}

impl SolverOptions {
    pub fn new(dt: f64) -> Self {
        SolverOptions { dt, delta_swallow: 1e-6, record_every: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.delta_swallow > 0.0) || self.record_every == 0 {
            return Err(Error::InvalidArgument("dt, delta_swallow and record_every must be positive".into()));
        }
        Ok(())
    }
}

/// Sorted union of the knot times inside `(0, t_end)`.
pub(crate) fn breakpoints(a: &[f64], b: &[f64], t_end: f64) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().filter(|t| *t > 0.0 && *t < t_end).collect();
    v.push(t_end);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Shared RK4 stepping for the classical and ER flows.
///
/// `field(t, rate, u, z, alive)` returns `dz/dt` for every component;
/// components flagged `exempt` are never swallowed. The base step is halved
/// while `rate * h > 0.05 |z - U|^2` for some live point, which resolves the
/// square-root approach to the driving point, and a point is swallowed once
/// `|z - U| <= delta`.
pub(crate) struct Flow<'a> {
    pub driving: &'a DrivingFunction,
    pub schedule: &'a CapacitySchedule,
    pub opts: SolverOptions,
}

pub(crate) type Field<'f> = dyn FnMut(f64, f64, f64, &[C64], &[bool]) -> Result<Vec<C64>> + 'f;

impl Flow<'_> {
    pub fn run(
        &self,
        z0: &[C64],
        exempt: &[bool],
        t_end: f64,
        field: &mut Field,
        record: &mut dyn FnMut(f64, &[C64], &[PointStatus]),
    ) -> Result<(Vec<C64>, Vec<PointStatus>)> {
        self.opts.validate()?;
        if !(t_end >= 0.0) {
            return Err(Error::InvalidArgument("final time must be nonnegative".into()));
        }
        let n = z0.len();
        let mut z = z0.to_vec();
        let mut status = vec![PointStatus::Alive; n];
        let delta = self.opts.delta_swallow;
        let mark = |t: f64, z: &[C64], status: &mut [PointStatus]| {
            let u = self.driving.eval(t);
            for k in 0..n {
                if !exempt[k] && status[k] == PointStatus::Alive && (z[k] - u).norm() <= delta {
                    status[k] = PointStatus::Swallowed { t };
                }
            }
        };
        mark(0.0, &z, &mut status);
        record(0.0, &z, &status);
        let knots = breakpoints(&self.driving.t, &self.schedule.t, t_end);
        let mut t = 0.0;
        let mut step = 0usize;
        while t < t_end {
            let mut target = ((step + 1) as f64 * self.opts.dt).min(t_end);
            if t_end - target <= 1e-9 * self.opts.dt {
                target = t_end;
            }
            while t < target {
                let next_knot = knots.iter().copied().find(|k| *k > t).unwrap_or(t_end);
                let mut h = (target - t).min(next_knot - t);
                let rate = self.schedule.rate(t + 0.5 * h);
                let u = self.driving.eval(t);
                for k in 0..n {
                    if exempt[k] || status[k] != PointStatus::Alive {
                        continue;
                    }
                    let d = (z[k] - u).norm();
                    while rate * h > 0.05 * d * d && h > 1e-300 {
                        h *= 0.5;
                    }
                }
                let alive: Vec<bool> = status.iter().map(|s| *s == PointStatus::Alive).collect();
                let mut tries = 0;
                loop {
                    if let Some(znew) = self.rk4(field, t, h, &z, &alive)? {
                        z = znew;
                        break;
                    }
                    tries += 1;
                    if tries > 60 {
                        return Err(Error::Numerical(format!("Loewner flow produced a non-finite value at t = {t}")));
                    }
                    h *= 0.5;
                }
                t = if h >= target - t { target } else { t + h };
                mark(t, &z, &mut status);
            }
            step += 1;
            if step.is_multiple_of(self.opts.record_every) || t >= t_end {
                record(t, &z, &status);
            }
        }
        Ok((z, status))
    }

    fn rk4(&self, field: &mut Field, t: f64, h: f64, z: &[C64], alive: &[bool]) -> Result<Option<Vec<C64>>> {
        let rate = self.schedule.rate(t + 0.5 * h);
        let du = |s: f64| self.driving.eval(s);
        let add = |a: &[C64], k: &[C64], c: f64| -> Vec<C64> {
            a.iter().zip(k).zip(alive).map(|((x, y), l)| if *l { x + y * c } else { *x }).collect()
        };
        let k1 = field(t, rate, du(t), z, alive)?;
        let k2 = field(t + 0.5 * h, rate, du(t + 0.5 * h), &add(z, &k1, 0.5 * h), alive)?;
        let k3 = field(t + 0.5 * h, rate, du(t + 0.5 * h), &add(z, &k2, 0.5 * h), alive)?;
        let k4 = field(t + h, rate, du(t + h), &add(z, &k3, h), alive)?;
        let out: Vec<C64> = (0..z.len())
            .map(|k| if alive[k] { z[k] + (k1[k] + k2[k] * 2.0 + k3[k] * 2.0 + k4[k]) * (h / 6.0) } else { z[k] })
            .collect();
        if out.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Ok(None);
        }
        Ok(Some(out))
    }
}
