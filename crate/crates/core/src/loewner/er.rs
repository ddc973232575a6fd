//! The multiply connected chordal Loewner flow
//! `h' = -b'(t) H^ER_{h_t(D_t)}(h, U~_t)` in chordal standard domains, and
//! the composition check `h_t = phi_t o g_t`.

use serde::{Deserialize, Serialize};

use super::{
    CapacitySchedule, DrivingFunction, Flow, PointStatus, SolverOptions, TrackedPoint, Trajectory, TrajectoryRow,
};
use std::f64::consts::PI;

use super::{curve_to_driving, solve_classical};
use crate::confmap::hull_map_er;
use crate::geometry::{CurveSample, Domain, Hole, Hull, Slit};
use crate::kernels::{Backend, BieConfig, ChebCurve, Curve, ErSolver, FourierCurve};
use crate::{Error, Result, C64};

/// Image of one slit at a recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitState {
    pub t: f64,
    pub slit_id: usize,
    pub x1: f64,
    pub x2: f64,
    pub height: f64,
}

/// Output of [`solve_er`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErSolution {
    pub trajectory: Trajectory,
    pub slits: Vec<SlitState>,
}

impl ErSolution {
    /// Writes `t,slit_id,x1,x2,height`.
    pub fn write_slits_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        use crate::brownian::histogram::fmt17;
        writeln!(out, "t,slit_id,x1,x2,height")?;
        for s in &self.slits {
            writeln!(out, "{},{},{},{},{}", fmt17(s.t), s.slit_id, fmt17(s.x1), fmt17(s.x2), fmt17(s.height))?;
        }
        Ok(())
    }

    /// Final slits.
    pub fn final_slits(&self) -> Vec<Slit> {
        let t = self.trajectory.t;
        self.slits.iter().filter(|s| s.t == t).map(|s| Slit { y: s.height, x1: s.x1, x2: s.x2 }).collect()
    }
}

fn standard_slits(domain: &Domain) -> Result<Vec<Slit>> {
    match domain {
        Domain::ChordalStandard { slits } => Ok(slits.clone()),
        Domain::HalfplaneHoles { holes, hull: None } => holes
            .iter()
            .map(|h| match h {
                Hole::Slit(s) => Ok(*s),
                Hole::Disk(_) => Err(Error::InvalidArgument("ER Loewner flow needs a chordal standard domain".into())),
            })
            .collect(),
        _ => Err(Error::InvalidArgument("ER Loewner flow needs a chordal standard domain".into())),
    }
}

/// Rebuilds the slits from endpoint images, asserting horizontality.
fn slits_from_state(ends: &[C64], tol_slit: f64, t: f64) -> Result<Vec<Slit>> {
    ends.chunks(2)
        .enumerate()
        .map(|(k, e)| {
            let (l, r) = (e[0], e[1]);
            if (l.im - r.im).abs() > tol_slit {
                return Err(Error::Numerical(format!(
                    "slit {} lost horizontality at t = {t}: endpoint heights {} and {}",
                    k + 1,
                    l.im,
                    r.im
                )));
            }
            let y = 0.5 * (l.im + r.im);
            if !(y > 0.0) {
                return Err(Error::Numerical(format!("slit {} reached the real line at t = {t}", k + 1)));
            }
            if !(r.re > l.re) {
                return Err(Error::Numerical(format!("slit {} degenerated at t = {t}", k + 1)));
            }
            Ok(Slit { y, x1: l.re, x2: r.re })
        })
        .collect()
}

/// Integrates the ER Loewner equation from the chordal standard domain
/// `domain0`. Slit endpoints move under the same equation, evaluated on the
/// boundary; the slits are rebuilt from them at every stage, so each kernel
/// evaluation uses the current domain `h_t(D_t)`.
///
/// Kernel evaluations use the boundary integral solver (`bie` or `chain`
/// backends); `analytic` is accepted for zero slits.
#[allow(clippy::too_many_arguments)]
pub fn solve_er(
    domain0: &Domain,
    driving: &DrivingFunction,
    schedule: &CapacitySchedule,
    points: &[C64],
    t_end: f64,
    opts: SolverOptions,
    backend: &Backend,
    tol_slit: f64,
) -> Result<ErSolution> {
    backend.validate()?;
    let slits0 = standard_slits(domain0)?;
    let cfg = match (backend.bie_config(), slits0.is_empty()) {
        (Some(c), _) => Some(c),
        (None, true) if *backend == Backend::Analytic => None,
        _ => return Err(Error::Config(format!("solve_er supports bie and chain backends, got {backend:?}"))),
    };
    for z in points {
        if !domain0.contains(*z) {
            return Err(Error::outside(*z, "initial domain"));
        }
    }
    let np = points.len();
    let mut z0 = points.to_vec();
    for s in &slits0 {
        z0.push(s.left());
        z0.push(s.right());
    }
    let mut exempt = vec![false; np];
    exempt.resize(z0.len(), true);

    let mut field = |t: f64, rate: f64, u: f64, z: &[C64], alive: &[bool]| -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); z.len()];
        if rate == 0.0 {
            return Ok(out);
        }
        let slits = slits_from_state(&z[np..], tol_slit, t)?;
        let idx: Vec<usize> = (0..z.len()).filter(|&k| alive[k]).collect();
        // Endpoints are evaluated on the rebuilt slit: off-slit points next
        // to a tip would pick up the square-root singularity of the kernel.
        let pts: Vec<C64> = idx
            .iter()
            .map(|&k| match k.checked_sub(np) {
                Some(e) if e % 2 == 0 => slits[e / 2].left(),
                Some(e) => slits[e / 2].right(),
                None => z[k],
            })
            .collect();
        let h = if slits.is_empty() {
            pts.iter().map(|w| -(w - u).inv()).collect()
        } else {
            let d = Domain::chordal(slits)?;
            ErSolver::new(&d, cfg.expect("bie config"))?.complex_pk_many(&pts, u)?
        };
        for (k, v) in idx.into_iter().zip(h) {
            out[k] = -v * rate;
        }
        Ok(out)
    };
    let mut rows = Vec::new();
    let mut slit_rows = Vec::new();
    let mut record = |t: f64, z: &[C64], s: &[PointStatus]| {
        for id in 0..np {
            rows.push(TrajectoryRow { t, id, z: z[id], status: s[id] });
        }
        for (k, e) in z[np..].chunks(2).enumerate() {
            slit_rows.push(SlitState {
                t,
                slit_id: k + 1,
                x1: e[0].re,
                x2: e[1].re,
                height: 0.5 * (e[0].im + e[1].im),
            });
        }
    };
    let flow = Flow { driving, schedule, opts };
    let (z, status) = flow.run(&z0, &exempt, t_end, &mut field, &mut record)?;
    let final_state = (0..np).map(|id| TrackedPoint { id, z: z[id], status: status[id] }).collect();
    Ok(ErSolution { trajectory: Trajectory { rows, final_state, t: t_end }, slits: slit_rows })
}

/// Nodes per hole when hole images are tracked by the classical flow.
const HOLE_NODES: usize = 128;

/// One knot of an [`ErSchedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleKnot {
    pub t: f64,
    /// Classical driving value `U_t`.
    pub u: f64,
    /// `a(t) = hcap(gamma_t)`.
    pub a: f64,
    /// `U~_t = phi_t(U_t)`.
    pub u_tilde: f64,
    /// `b(t) = hcap^ER(gamma_t)`.
    pub b: f64,
    /// `phi_t'(U_t)`.
    pub phi_prime: f64,
}

/// The ER driving data of a classical chain: `g_t` is integrated for the
/// hole boundaries, `phi_t` is built on the image domain `g_t(D_t)`, and
/// `U~_t = phi_t(U_t)`, `b(t) = a(t) + c_t` with `c_t` the `1/z` coefficient
/// of `phi_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErSchedule {
    pub knots: Vec<ScheduleKnot>,
}

impl ErSchedule {
    /// `U~` and `b` as flow inputs; `b` is made nondecreasing by a running
    /// maximum.
    pub fn driving(&self) -> Result<(DrivingFunction, CapacitySchedule)> {
        let t: Vec<f64> = self.knots.iter().map(|k| k.t).collect();
        let u = self.knots.iter().map(|k| k.u_tilde).collect();
        let mut b: Vec<f64> = Vec::with_capacity(t.len());
        for k in &self.knots {
            let prev = b.last().copied().unwrap_or(0.0);
            b.push(if k.t == 0.0 { 0.0 } else { k.b.max(prev) });
        }
        Ok((DrivingFunction::new(t.clone(), u)?, CapacitySchedule::new(t, b)?))
    }
}

/// Parameter nodes of a hole boundary.
fn hole_nodes(h: &Hole) -> Vec<C64> {
    let c = Curve::from_hole(h);
    let s = if c.is_open() { ChebCurve::nodes(HOLE_NODES) } else { FourierCurve::nodes(HOLE_NODES) };
    s.into_iter().map(|s| c.point(s)).collect()
}

fn curve_from_nodes(open: bool, vals: &[C64]) -> Curve {
    if open {
        Curve::Arc(ChebCurve::from_values(vals))
    } else {
        Curve::Loop(FourierCurve::from_values(vals))
    }
}

/// Classical flow of `points` together with the hole boundary nodes,
/// returning per time the images of the points and the image domain solver.
#[allow(clippy::type_complexity)]
fn classical_images(
    domain0: &Domain,
    driving: &DrivingFunction,
    schedule: &CapacitySchedule,
    points: &[C64],
    times: &[f64],
    dt: f64,
    cfg: Option<BieConfig>,
) -> Result<Vec<(Vec<C64>, Option<ErSolver>)>> {
    let holes = domain0.holes();
    if domain0.is_annulus() || domain0.hull().is_some() {
        return Err(Error::InvalidArgument("the chain needs the half-plane minus holes".into()));
    }
    if !holes.is_empty() && cfg.is_none() {
        return Err(Error::Config("image domains need the bie or chain backend".into()));
    }
    let mut all = points.to_vec();
    for h in &holes {
        all.extend(hole_nodes(h));
    }
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let tr = solve_classical(driving, schedule, &all, t_end, SolverOptions::new(dt))?;
    let np = points.len();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut imgs = Vec::with_capacity(all.len());
        for id in 0..all.len() {
            imgs.push(tr.at(id, t).ok_or_else(|| Error::Numerical("missing trajectory row".into()))?);
        }
        let solver = match cfg {
            Some(cfg) if !holes.is_empty() => {
                let curves = holes
                    .iter()
                    .enumerate()
                    .map(|(k, h)| {
                        let lo = np + k * HOLE_NODES;
                        curve_from_nodes(Curve::from_hole(h).is_open(), &imgs[lo..lo + HOLE_NODES])
                    })
                    .collect();
                Some(ErSolver::from_curves(curves, cfg)?)
            }
            _ => None,
        };
        imgs.truncate(np);
        out.push((imgs, solver));
    }
    Ok(out)
}

/// Builds the [`ErSchedule`] of the classical chain `(U, a)` at `times`
/// (each a multiple of `dt`).
pub fn er_schedule(
    domain0: &Domain,
    driving: &DrivingFunction,
    a_schedule: &CapacitySchedule,
    times: &[f64],
    dt: f64,
    backend: &Backend,
) -> Result<ErSchedule> {
    let imgs = classical_images(domain0, driving, a_schedule, &[], times, dt, backend.bie_config())?;
    let mut knots = Vec::with_capacity(times.len());
    for (&t, (_, solver)) in times.iter().zip(imgs) {
        let u = driving.eval(t);
        let a = a_schedule.eval(t);
        let (u_tilde, b, phi_prime) = match solver {
            None => (u, a, 1.0),
            Some(s) => {
                let layer = s.phi_raw_layer()?;
                let (f, df) = s.bie().complex(&layer, C64::new(u, 0.0));
                (u + f.re, a - 2.0 / PI * s.bie().im_moment(&layer), 1.0 + df.re)
            }
        };
        knots.push(ScheduleKnot { t, u, a, u_tilde, b, phi_prime });
    }
    Ok(ErSchedule { knots })
}

/// Parameters of [`composition_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionOptions {
    /// Base step of both flows.
    pub dt: f64,
    /// Schedule knots every `knot_every` base steps.
    pub knot_every: usize,
    /// Kernel backend of the ER flow and of `phi_t`.
    pub backend: Backend,
    /// Optional independent evaluation of `h_t` on `D` minus the polyline
    /// `gamma[0, t]` (the `grid` backend solves it directly).
    pub reference: Option<Backend>,
    pub tol_slit: f64,
}

impl CompositionOptions {
    pub fn new(dt: f64) -> Self {
        CompositionOptions { dt, knot_every: 5, backend: Backend::bie(), reference: None, tol_slit: 1e-4 }
    }
}

/// One probe of the composition check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub t: f64,
    pub point_id: usize,
    /// `h_t(z)` from the ER flow.
    pub flow: C64,
    /// `phi_t(g_t(z))`.
    pub composed: C64,
    /// `h_t(z)` on `D` minus the polyline hull, when requested.
    pub reference: Option<C64>,
    /// Largest distance between the flow and the other values.
    pub residual: f64,
}

/// Output of [`composition_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub rows: Vec<CompositionRow>,
    pub max_residual: f64,
    pub schedule: ErSchedule,
}

/// Runs the classical chain of `gamma`, builds `phi_t` on `g_t(D_t)`, feeds
/// `U~ = phi_t(U_t)` and `b = hcap^ER` to the ER flow, and compares the
/// flow with `phi_t(g_t(z))` at `times` (multiples of `dt`).
pub fn composition_check(
    domain0: &Domain,
    gamma: &CurveSample,
    times: &[f64],
    probes: &[C64],
    opts: &CompositionOptions,
) -> Result<CompositionReport> {
    if !(opts.dt > 0.0) || opts.knot_every == 0 {
        return Err(Error::InvalidArgument("dt and knot_every must be positive".into()));
    }
    for z in probes {
        if !domain0.contains(*z) {
            return Err(Error::outside(*z, "initial domain"));
        }
    }
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let (u, a) = curve_to_driving(gamma)?;
    if t_end > *u.t.last().unwrap() {
        return Err(Error::InvalidArgument("check times exceed the curve".into()));
    }
    let mut knot_times = vec![];
    let step = opts.dt * opts.knot_every as f64;
    let n = (t_end / step).ceil() as usize;
    for k in 0..=n {
        knot_times.push((k as f64 * step).min(t_end));
    }
    knot_times.dedup();
    let schedule = er_schedule(domain0, &u, &a, &knot_times, opts.dt, &opts.backend)?;
    let (ut, b) = schedule.driving()?;
    let images = classical_images(domain0, &u, &a, probes, times, opts.dt, opts.backend.bie_config())?;
    let sol = if t_end > 0.0 {
        Some(solve_er(domain0, &ut, &b, probes, t_end, SolverOptions::new(opts.dt), &opts.backend, opts.tol_slit)?)
    } else {
        None
    };
    let mut rows = vec![];
    for (&t, (g, solver)) in times.iter().zip(images) {
        let layer = solver.as_ref().map(|s| s.phi_raw_layer()).transpose()?;
        let reference = match (&opts.reference, t > 0.0) {
            (Some(b), true) => Some(hull_map_er(domain0, &Hull::Polyline { points: gamma.prefix(t) }, b)?.map),
            _ => None,
        };
        for (id, z) in probes.iter().enumerate() {
            let flow = match &sol {
                Some(s) => s.trajectory.at(id, t).ok_or_else(|| Error::Numerical("missing trajectory row".into()))?,
                None => *z,
            };
            let composed = match (&solver, &layer) {
                (Some(s), Some(l)) => g[id] + s.bie().complex(l, g[id]).0,
                _ => g[id],
            };
            let reference = match &reference {
                Some(m) => Some(m.eval(*z)?),
                None if opts.reference.is_some() => Some(*z),
                None => None,
            };
            let mut residual = (flow - composed).norm();
            if let Some(r) = reference {
                residual = residual.max((flow - r).norm());
            }
            rows.push(CompositionRow { t, point_id: id, flow, composed, reference, residual });
        }
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(CompositionReport { rows, max_residual, schedule })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::solve_classical;

    #[test]
    fn zero_slits_match_classical() {
        let u = DrivingFunction::new(vec![0.0, 0.3, 1.0], vec![0.0, 0.5, -0.2]).unwrap();
        let b = CapacitySchedule::linear(2.0, 1.0).unwrap();
        let pts = [C64::new(0.2, 0.5), C64::new(-1.0, 2.0)];
        let opts = SolverOptions::new(1e-2);
        let er = solve_er(&Domain::halfplane(), &u, &b, &pts, 1.0, opts, &Backend::bie(), 1e-4).unwrap();
        let cl = solve_classical(&u, &b, &pts, 1.0, opts).unwrap();
        assert_eq!(er.trajectory.rows.len(), cl.rows.len());
        for (a, c) in er.trajectory.rows.iter().zip(&cl.rows) {
            assert_eq!(a.t, c.t);
            assert!((a.z - c.z).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_capacity_is_identity() {
        let d = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let u = DrivingFunction::constant(0.0, 1.0);
        let b = CapacitySchedule::linear(0.0, 1.0).unwrap();
        let z = C64::new(0.3, 2.0);
        let s = solve_er(&d, &u, &b, &[z], 1.0, SolverOptions::new(0.1), &Backend::bie(), 1e-4).unwrap();
        assert_eq!(s.trajectory.final_state[0].z, z);
        assert_eq!(s.final_slits(), vec![Slit::new(1.0, -1.0, 1.0).unwrap()]);
    }

    #[test]
    fn slits_stay_horizontal_and_normalization_holds() {
        let d = Domain::chordal(vec![Slit::new(1.0, 1.0, 2.0).unwrap()]).unwrap();
        let u = DrivingFunction::constant(0.0, 0.2);
        let b = CapacitySchedule::linear(2.0, 0.2).unwrap();
        let y = 1e3;
        let s =
            solve_er(&d, &u, &b, &[C64::new(0.0, y)], 0.2, SolverOptions::new(0.02), &Backend::bie(), 1e-4).unwrap();
        let h = s.trajectory.final_state[0].z;
        let zz = C64::new(0.0, y);
        assert!((h - zz - 0.4 / zz).norm() < 10.0 / (y * y));
        let sl = s.final_slits()[0];
        assert!(sl.y < 1.0 && sl.x1 > 1.0);
    }

    fn sqrt_curve() -> CurveSample {
        let ts: Vec<f64> = (0..=60).map(|k| 0.005 * k as f64).collect();
        CurveSample::from_fn(&ts, |t| C64::new(0.0, 2.0 * t.sqrt())).unwrap()
    }

    #[test]
    fn composition_zero_slits_and_start() {
        let probes = [C64::new(0.5, 1.5), C64::new(-1.0, 0.5)];
        let rep = composition_check(
            &Domain::halfplane(),
            &sqrt_curve(),
            &[0.0, 0.1, 0.25],
            &probes,
            &CompositionOptions::new(1e-3),
        )
        .unwrap();
        assert!(rep.max_residual < 1e-9, "{}", rep.max_residual);
        let d = Domain::chordal(vec![Slit::new(1.0, 1.0, 2.0).unwrap()]).unwrap();
        let rep = composition_check(&d, &sqrt_curve(), &[0.0], &probes, &CompositionOptions::new(1e-3)).unwrap();
        assert!(rep.rows.iter().all(|r| r.flow == probes[r.point_id]) && rep.max_residual < 1e-12);
    }

    #[test]
    fn composition_one_slit_bie() {
        let d = Domain::chordal(vec![Slit::new(1.0, 1.0, 2.0).unwrap()]).unwrap();
        let probes = [C64::new(0.5, 1.5), C64::new(-1.0, 0.5), C64::new(0.0, 3.0)];
        let rep = composition_check(&d, &sqrt_curve(), &[0.1, 0.2], &probes, &CompositionOptions::new(2e-3)).unwrap();
        assert!(rep.max_residual < 1e-5, "{}", rep.max_residual);
        let k = rep.schedule.knots.last().unwrap();
        assert!(k.b > k.a && k.phi_prime > 1.0);
    }
}
