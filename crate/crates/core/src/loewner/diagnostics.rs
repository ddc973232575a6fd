//! Numerical diagnostics of the Loewner chains: the small-hull expansion of
//! `h_A`, tip tracking, continuity ratios and the `|g_A(z) - z| <= 3 rad(A)`
//! bound.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::er::{er_schedule, ScheduleKnot};
use super::{curve_to_driving, HullMap};
use crate::brownian::RngStream;
use crate::confmap::{complex_pk, hull_map_er, probe_points};
use crate::geometry::{CurveSample, Domain, Hull};
use crate::kernels::{pk_er_infinity, Backend};
use crate::{Error, Result, C64};

/// Output of [`leat0_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leat0Report {
    pub residual: f64,
    /// `residual / (hcap^ER * rad)`.
    pub bound_factor: f64,
    pub hcap_er: f64,
    pub rad: f64,
}

/// `|z - h_A(z) - hcap^ER(A) H^ER(z, x) / (pi H^ER(infinity, x))|` with `x`
/// the centre of `rad(A)`.
pub fn leat0_residual(domain: &Domain, hull: &Hull, z: C64, backend: &Backend) -> Result<Leat0Report> {
    if hull.is_empty() {
        return Ok(Leat0Report { residual: 0.0, bound_factor: 0.0, hcap_er: 0.0, rad: 0.0 });
    }
    let (rad, x) = hull.rad_and_center();
    if (z - x).norm() < 2.0 * rad {
        return Err(Error::InvalidArgument("probe must satisfy |z - x| >= 2 rad(A)".into()));
    }
    let m = hull_map_er(domain, hull, backend)?;
    let pi_h_inf = PI * pk_er_infinity(domain, x, backend)?.value;
    let h = complex_pk(domain, z, x, backend)?;
    let residual = (z - m.eval(z)? - h * (m.hcap_er / pi_h_inf)).norm();
    Ok(Leat0Report { residual, bound_factor: residual / (m.hcap_er * rad), hcap_er: m.hcap_er, rad })
}

/// Output of [`tip_track`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TipTrack {
    pub knots: Vec<ScheduleKnot>,
    /// Largest `|U~(t_{k+1}) - U~(t_k)|`.
    pub max_jump: f64,
}

/// `U~_t = phi_t(U_t)` at `times` (multiples of `dt`) for the classical
/// chain of `gamma`.
pub fn tip_track(domain0: &Domain, gamma: &CurveSample, times: &[f64], dt: f64, backend: &Backend) -> Result<TipTrack> {
    let (u, a) = curve_to_driving(gamma)?;
    let s = er_schedule(domain0, &u, &a, times, dt, backend)?;
    let max_jump = s.knots.windows(2).map(|w| (w[1].u_tilde - w[0].u_tilde).abs()).fold(0.0, f64::max);
    Ok(TipTrack { knots: s.knots, max_jump })
}

/// One window of [`continuity_diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub delta: f64,
    /// `osc(gamma, delta, t0)`.
    pub osc: f64,
    /// `diam h_s(gamma[s, t0])` with `s = t0 - delta`.
    pub diam: f64,
    /// `max |h_s - h_t0|` over probe points.
    pub sup_diff: f64,
    pub diam_ratio: f64,
    pub sup_ratio: f64,
}

/// Output of [`continuity_diagnostics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    /// Largest ratio growth between consecutive windows.
    pub max_growth: f64,
    /// `max_growth < 3`.
    pub stable: bool,
}

fn growth(v: &[f64]) -> f64 {
    v.windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::INFINITY
            } else {
                1.0
            }
        })
        .fold(1.0, f64::max)
}

/// Empirical ratios `diam / osc^(1/2)` and `sup |h_s - h_t| / osc^(1/4)` over
/// the windows `delta` (decreasing), with hulls `gamma[0, s]` as polylines.
pub fn continuity_diagnostics(
    domain0: &Domain,
    gamma: &CurveSample,
    t0: f64,
    windows: &[f64],
    backend: &Backend,
) -> Result<ContinuityReport> {
    if windows.windows(2).any(|w| !(w[1] < w[0])) || windows.iter().any(|d| !(*d > 0.0 && *d <= t0)) {
        return Err(Error::InvalidArgument("windows must decrease within (0, t0]".into()));
    }
    let hull_t = Hull::Polyline { points: gamma.prefix(t0) };
    let h_t = hull_map_er(domain0, &hull_t, backend)?;
    let probes = probe_points(&domain0.with_hull(Some(hull_t))?, 0.05);
    let mut rows = vec![];
    for &delta in windows {
        let s = t0 - delta;
        let h_s = hull_map_er(domain0, &Hull::Polyline { points: gamma.prefix(s) }, backend)?;
        let mut img = vec![];
        if let Some(u) = h_s.u_tilde {
            img.push(C64::new(u, 0.0));
        }
        for (k, &t) in gamma.t.iter().enumerate() {
            if t > s && t < t0 {
                img.push(h_s.eval(C64::new(gamma.x[k], gamma.y[k]))?);
            }
        }
        img.push(h_s.eval(gamma.at(t0))?);
        let mut diam: f64 = 0.0;
        for i in 0..img.len() {
            for j in i + 1..img.len() {
                diam = diam.max((img[i] - img[j]).norm());
            }
        }
        let mut sup_diff: f64 = 0.0;
        for z in &probes {
            sup_diff = sup_diff.max((h_s.eval(*z)? - h_t.eval(*z)?).norm());
        }
        let osc = gamma.osc(delta, t0);
        rows.push(ContinuityRow {
            delta,
            osc,
            diam,
            sup_diff,
            diam_ratio: diam / osc.sqrt(),
            sup_ratio: sup_diff / osc.powf(0.25),
        });
    }
    let dr: Vec<f64> = rows.iter().map(|r| r.diam_ratio).collect();
    let sr: Vec<f64> = rows.iter().map(|r| r.sup_ratio).collect();
    let max_growth = growth(&dr).max(growth(&sr));
    Ok(ContinuityReport { rows, max_growth, stable: max_growth < 3.0 })
}

/// Output of [`hull_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullBoundReport {
    pub n: usize,
    /// Largest `|g_A(z) - z| / rad(A)`.
    pub max_ratio: f64,
    pub violations: usize,
}

/// A random hull: a vertical slit, a half-disk or a short upward polyline.
pub fn random_hull<R: Rng + ?Sized>(rng: &mut R) -> Hull {
    let x: f64 = rng.random_range(-1.0..1.0);
    match rng.random_range(0..3) {
        0 => Hull::VerticalSlit { x, height: rng.random_range(0.05..2.0) },
        1 => Hull::HalfDisk { x, radius: rng.random_range(0.05..1.5) },
        _ => loop {
            let n = rng.random_range(2..7);
            let mut pts = vec![C64::new(x, 0.0)];
            let mut p = pts[0];
            for _ in 0..n {
                p += C64::new(rng.random_range(-0.5..0.5), rng.random_range(0.05..0.6));
                pts.push(p);
            }
            if !crate::geometry::polyline_self_intersects(&pts) {
                break Hull::Polyline { points: pts };
            }
        },
    }
}

/// Samples `n` hull/point pairs and checks `|g_A(z) - z| <= 3 rad(A)`.
pub fn hull_bound_check(n: usize, stream: RngStream) -> Result<HullBoundReport> {
    let idx: Vec<u64> = (0..n as u64).collect();
    let ratios = crate::parallel::map_items(&idx, |&i| -> Result<f64> {
        let mut rng = stream.path(i).rng();
        let hull = random_hull(&mut rng);
        let g = HullMap::new(&hull)?;
        let z = loop {
            let z = C64::new(rng.random_range(-4.0..4.0), rng.random_range(1e-3..4.0));
            if !hull.covers(z) && hull.dist(z) > 1e-3 {
                break z;
            }
        };
        Ok((g.eval(z)? - z).norm() / hull.rad())
    });
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for r in ratios {
        let r = r?;
        max_ratio = max_ratio.max(r);
        if r > 3.0 {
            violations += 1;
        }
    }
    Ok(HullBoundReport { n, max_ratio, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    #[test]
    fn leat0_zero_slits_is_fourth_order() {
        let d = Domain::halfplane();
        let z = C64::new(0.5, 1.0);
        let r: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&e| {
                leat0_residual(&d, &Hull::VerticalSlit { x: 0.0, height: e }, z, &Backend::Analytic).unwrap().residual
            })
            .collect();
        for w in r.windows(2) {
            assert!((w[0] / w[1]).log2() >= 2.8, "{r:?}");
        }
        let e =
            leat0_residual(&d, &Hull::Polyline { points: vec![C64::new(0.0, 0.0)] }, z, &Backend::Analytic).unwrap();
        assert_eq!(e.residual, 0.0);
    }

    #[test]
    fn leat0_bound_factor_one_slit() {
        let d = Domain::chordal(vec![Slit::new(1.0, 1.0, 2.0).unwrap()]).unwrap();
        let z = C64::new(-0.5, 1.5);
        let f: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&e| {
                leat0_residual(&d, &Hull::VerticalSlit { x: 0.0, height: e }, z, &Backend::bie()).unwrap().bound_factor
            })
            .collect();
        assert!(f[1] <= f[0] * 1.05 && f[2] <= f[1] * 1.05, "{f:?}");
    }

    #[test]
    fn tip_track_zero_slits_and_symmetry() {
        let ts: Vec<f64> = (0..=40).map(|k| 0.01 * k as f64).collect();
        let gamma = CurveSample::from_fn(&ts, |t| C64::new(0.0, 2.0 * t.sqrt())).unwrap();
        let times = [0.0, 0.1, 0.2];
        let tr = tip_track(&Domain::halfplane(), &gamma, &times, 1e-3, &Backend::bie()).unwrap();
        assert!(tr.knots.iter().all(|k| k.u_tilde == k.u));
        let sym = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let tr = tip_track(&sym, &gamma, &[0.0], 1e-3, &Backend::bie()).unwrap();
        assert!(tr.knots[0].u_tilde.abs() < 1e-10);
    }

    #[test]
    fn continuity_ratios_bounded() {
        let ts: Vec<f64> = (0..=200).map(|k| 0.002 * k as f64).collect();
        let gamma = CurveSample::from_fn(&ts, |t| C64::new(0.3 * t, 2.0 * t.sqrt())).unwrap();
        let d = Domain::chordal(vec![Slit::new(1.0, 1.0, 2.0).unwrap()]).unwrap();
        let rep = continuity_diagnostics(&d, &gamma, 0.3, &[0.08, 0.04, 0.02], &Backend::bie()).unwrap();
        assert!(rep.stable, "{rep:?}");
        assert!(rep.rows.windows(2).all(|w| w[1].osc <= w[0].osc));
    }

    #[test]
    fn hull_bound_holds_on_samples() {
        let r = hull_bound_check(200, RngStream::new(7, 0)).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
    }
}
