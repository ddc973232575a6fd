//! Half-plane capacity `hcap` and its excursion reflected analogue
//! `hcap^ER`: closed forms, circle-average Monte Carlo estimators, the
//! boundary measure `mu_A`, the small-radius law and the rates `a'`, `b'`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::brownian::RngStream;
use crate::confmap::hull_map_er;
use crate::erbm::{ErbmState, Sampler};
use crate::geometry::{CurveSample, Domain, Hull};
use crate::kernels::{pk_er_infinity, Backend, KernelEstimate, Method};
use crate::loewner::HullMap;
use crate::stats::{Estimate, MeanAcc};
use crate::{Error, Result, C64};

/// Estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CapMethod {
    /// Closed-form `g_A` (zipper maps for polylines); zero-hole domains only
    /// for `hcap^ER`.
    ClosedForm,
    /// Boundary integral solver for the hull map.
    Bie,
    /// Circle-average Monte Carlo with `n` paths.
    Mc { n: u64 },
}

/// `hcap` and `hcap^ER` of a hull in a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub hcap: KernelEstimate,
    pub hcap_er: KernelEstimate,
    /// `rad(A)`.
    pub radius: f64,
    pub method: CapMethod,
}

/// `int_0^pi E^{x + r e^{i theta}}[g(B_tau)] sin(theta) d theta` with
/// stratified `theta`. Starting points covered by the hull contribute
/// `g(z)`.
fn circle_integral(
    sampler: &Sampler,
    hull: &Hull,
    x: f64,
    r: f64,
    stream: RngStream,
    n: u64,
    g: &(dyn Fn(C64) -> f64 + Sync),
) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let parts = crate::parallel::map_ranges(n, |range| -> Result<MeanAcc> {
        let mut acc = MeanAcc::default();
        for p in range {
            let mut rng = stream.path(p).rng();
            let th = PI * (p as f64 + rng.random::<f64>()) / n as f64;
            let z = C64::new(x, 0.0) + C64::from_polar(r, th);
            let v = if hull.covers(z) || hull.dist(z) == 0.0 {
                g(z)
            } else {
                g(sampler.run(ErbmState::interior(z), &mut rng, None, None)?.0)
            };
            acc.push(PI * th.sin() * v);
        }
        Ok(acc)
    });
    let mut acc = MeanAcc::default();
    for p in parts {
        acc.merge(&p?);
    }
    Ok(acc.estimate())
}

/// `hcap^ER(hi) - hcap^ER(lo)` from common random numbers: both circle
/// averages use the same angles and path streams.
fn paired_difference(domain: &Domain, lo: &Hull, hi: &Hull, stream: RngStream, n: u64) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let r = average_radius(domain, hi).max(average_radius(domain, lo));
    let (s_lo, s_hi) = (sampler_with_hull(domain, lo)?, sampler_with_hull(domain, hi)?);
    let value = |s: &Sampler, hull: &Hull, z: C64, p: u64| -> Result<f64> {
        if hull.covers(z) || hull.dist(z) == 0.0 {
            return Ok(z.im);
        }
        Ok(s.run(ErbmState::interior(z), &mut stream.path(p).derive("walk").rng(), None, None)?.0.im)
    };
    let parts = crate::parallel::map_ranges(n, |range| -> Result<MeanAcc> {
        let mut acc = MeanAcc::default();
        for p in range {
            let th = PI * (p as f64 + stream.path(p).rng().random::<f64>()) / n as f64;
            let z = C64::from_polar(r, th);
            let d = value(&s_hi, hi, z, p)? - value(&s_lo, lo, z, p)?;
            acc.push(PI * th.sin() * d);
        }
        Ok(acc)
    });
    let mut acc = MeanAcc::default();
    for p in parts {
        acc.merge(&p?);
    }
    Ok(acc.estimate().scale(2.0 * r / PI))
}

fn sampler_with_hull(domain: &Domain, hull: &Hull) -> Result<Sampler> {
    Sampler::for_domain(&domain.with_hull(Some(hull.clone()))?)
}

/// Radius of the averaging circle: twice the larger of the hull and hole
/// extents.
fn average_radius(domain: &Domain, hull: &Hull) -> f64 {
    2.0 * hull.extent().max(domain.hole_extent()).max(0.25)
}

fn mc_estimate(e: Estimate, n: u64) -> KernelEstimate {
    KernelEstimate::mc(e, n)
}

/// `hcap(A)`.
pub fn hcap(hull: &Hull, method: CapMethod, stream: RngStream) -> Result<KernelEstimate> {
    hull.validate()?;
    match method {
        CapMethod::ClosedForm | CapMethod::Bie => {
            Ok(KernelEstimate::exact(HullMap::new(hull)?.hcap(), Method::Analytic))
        }
        CapMethod::Mc { n } => {
            let d = Domain::halfplane();
            let r = average_radius(&d, hull);
            let e = circle_integral(&sampler_with_hull(&d, hull)?, hull, 0.0, r, stream, n, &|w| w.im)?;
            Ok(mc_estimate(e.scale(2.0 * r / PI), n))
        }
    }
}

/// `hcap^ER(A)` in `domain`.
pub fn hcap_er(domain: &Domain, hull: &Hull, method: CapMethod, stream: RngStream) -> Result<KernelEstimate> {
    hull.validate()?;
    match method {
        CapMethod::ClosedForm => {
            if domain.n_holes() > 0 {
                return Err(Error::InvalidArgument("closed-form hcap^ER needs a zero-hole domain".into()));
            }
            hcap(hull, method, stream)
        }
        CapMethod::Bie => Ok(KernelEstimate::exact(hull_map_er(domain, hull, &Backend::bie())?.hcap_er, Method::Bie)),
        CapMethod::Mc { n } => {
            let r = average_radius(domain, hull);
            let e = circle_integral(&sampler_with_hull(domain, hull)?, hull, 0.0, r, stream, n, &|w| w.im)?;
            Ok(mc_estimate(e.scale(2.0 * r / PI), n))
        }
    }
}

/// Both capacities with one method (independent streams).
pub fn capacity_report(domain: &Domain, hull: &Hull, method: CapMethod, stream: RngStream) -> Result<CapacityReport> {
    Ok(CapacityReport {
        hcap: hcap(hull, method, stream.derive("hcap"))?,
        hcap_er: hcap_er(domain, hull, method, stream.derive("hcap_er"))?,
        radius: hull.rad(),
        method,
    })
}

/// `E^z[Im B^ER(tau)]` with `tau` the hitting time of the real line or the
/// hull.
pub fn expected_exit_height(domain: &Domain, hull: &Hull, z: C64, stream: RngStream, n: u64) -> Result<KernelEstimate> {
    let dh = domain.with_hull(Some(hull.clone()))?;
    if !dh.contains(z) {
        return Err(Error::outside(z, "domain minus hull"));
    }
    let s = Sampler::for_domain(&dh)?;
    let parts = crate::parallel::map_ranges(n, |range| -> Result<MeanAcc> {
        let mut acc = MeanAcc::default();
        for p in range {
            let mut rng = stream.path(p).rng();
            acc.push(s.run(ErbmState::interior(z), &mut rng, None, None)?.0.im);
        }
        Ok(acc)
    });
    let mut acc = MeanAcc::default();
    for p in parts {
        acc.merge(&p?);
    }
    Ok(mc_estimate(acc.estimate(), n))
}

/// The limit form `y E^{iy}[Im B^ER(tau)]` at finite `y`.
pub fn hcap_er_limit(domain: &Domain, hull: &Hull, y: f64, stream: RngStream, n: u64) -> Result<KernelEstimate> {
    let e = expected_exit_height(domain, hull, C64::new(0.0, y), stream, n)?;
    Ok(KernelEstimate { value: y * e.value, stderr: y * e.stderr, ..e })
}

/// A box selecting part of the hull boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullArc {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl HullArc {
    pub fn contains(&self, z: C64) -> bool {
        z.im > 0.0 && z.re >= self.re[0] && z.re <= self.re[1] && z.im >= self.im[0] && z.im < self.im[1]
    }
}

/// `mu_A(V) = (2R/pi) int_0^pi hm(R e^{i theta}, V) sin(theta) d theta`.
pub fn mu_measure(hull: &Hull, arc: &HullArc, stream: RngStream, n: u64) -> Result<KernelEstimate> {
    Ok(mu_profile(hull, std::slice::from_ref(arc), stream, n)?.remove(0))
}

/// `mu_A` of several arcs from one set of paths.
pub fn mu_profile(hull: &Hull, arcs: &[HullArc], stream: RngStream, n: u64) -> Result<Vec<KernelEstimate>> {
    hull.validate()?;
    let d = Domain::halfplane();
    let r = average_radius(&d, hull);
    let s = sampler_with_hull(&d, hull)?;
    let m = arcs.len();
    let parts = crate::parallel::map_ranges(n, |range| -> Result<Vec<MeanAcc>> {
        let mut acc = vec![MeanAcc::default(); m];
        for p in range {
            let mut rng = stream.path(p).rng();
            let th = PI * (p as f64 + rng.random::<f64>()) / n as f64;
            let exit = s.run(ErbmState::interior(C64::from_polar(r, th)), &mut rng, None, None)?.0;
            for (k, a) in acc.iter_mut().enumerate() {
                a.push(if arcs[k].contains(exit) { 2.0 * r * th.sin() } else { 0.0 });
            }
        }
        Ok(acc)
    });
    let mut acc = vec![MeanAcc::default(); m];
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p?) {
            a.merge(&b);
        }
    }
    Ok(acc.iter().map(|a| mc_estimate(a.estimate(), n)).collect())
}

/// Output of [`small_radius_law`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallRadiusReport {
    pub rad: f64,
    pub hcap_er: KernelEstimate,
    /// `int_0^pi E^{x + r e^{i theta}}[Im B^ER(tau)] sin(theta) d theta`.
    pub m: KernelEstimate,
    pub h_inf: f64,
    /// `hcap^ER / (2 r H^ER(infinity, x) M)`.
    pub ratio: Estimate,
}

/// Joint Monte Carlo estimate of the small-radius law for `hcap^ER`.
pub fn small_radius_law(domain: &Domain, hull: &Hull, stream: RngStream, n: u64) -> Result<SmallRadiusReport> {
    let (r, x) = hull.rad_and_center();
    let s = sampler_with_hull(domain, hull)?;
    let he = hcap_er(domain, hull, CapMethod::Mc { n }, stream.derive("hcap_er"))?;
    let m = circle_integral(&s, hull, x, r, stream.derive("inner"), n, &|w| w.im)?;
    let h_inf = pk_er_infinity(domain, x, &Backend::bie())?.value;
    let den = 2.0 * r * h_inf;
    let q = he.value / (den * m.value);
    let rel = ((he.stderr / he.value).powi(2) + (m.stderr / m.value).powi(2)).sqrt();
    Ok(SmallRadiusReport {
        rad: r,
        hcap_er: he,
        m: mc_estimate(m, n),
        h_inf,
        ratio: Estimate { value: q, stderr: q * rel },
    })
}

/// One window of [`capacity_rate_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub window: f64,
    pub delta_a: f64,
    pub delta_b: KernelEstimate,
    /// `delta_b / delta_a`.
    pub ratio: Estimate,
}

/// Output of [`capacity_rate_ratio`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub t: f64,
    pub rows: Vec<RateRow>,
    /// Extrapolation of the ratio to a zero window.
    pub extrapolated: Estimate,
    /// `pi H^ER(infinity, gamma(0))` at `t = 0`, `phi_t'(U_t)^2` otherwise.
    pub reference: f64,
    /// Monte Carlo noise above 2% of some ratio.
    pub inconclusive: bool,
}

/// Least-squares intercept of `ys` against `xs` with propagated errors.
fn intercept(xs: &[f64], ys: &[Estimate]) -> Estimate {
    let n = xs.len() as f64;
    if xs.len() == 1 {
        return ys[0];
    }
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let w: Vec<f64> = xs.iter().map(|x| 1.0 / n - mx * (x - mx) / sxx).collect();
    Estimate {
        value: w.iter().zip(ys).map(|(w, y)| w * y.value).sum(),
        stderr: w.iter().zip(ys).map(|(w, y)| (w * y.stderr).powi(2)).sum::<f64>().sqrt(),
    }
}

/// `Delta b / Delta a` over windows: one-sided `[0, Delta]` at `t = 0`
/// (extrapolated linearly in `sqrt(Delta)`, the scale of `rad`), centred
/// `[t - Delta, t + Delta]` otherwise (extrapolated in `Delta^2`). Monte
/// Carlo differences over centred windows use common random numbers.
pub fn capacity_rate_ratio(
    domain: &Domain,
    gamma: &CurveSample,
    t: f64,
    windows: &[f64],
    method: CapMethod,
    stream: RngStream,
) -> Result<RateReport> {
    gamma.validate()?;
    if windows.is_empty() || windows.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidArgument("windows must be positive".into()));
    }
    let t_max = *gamma.t.last().unwrap();
    let cap_b = |s: f64, label: String| -> Result<KernelEstimate> {
        if s <= gamma.t[0] {
            return Ok(KernelEstimate::exact(0.0, Method::Analytic));
        }
        hcap_er(domain, &Hull::Polyline { points: gamma.prefix(s) }, method, stream.derive(&label))
    };
    let mut rows = vec![];
    for (k, &w) in windows.iter().enumerate() {
        let (lo, hi) = if t == 0.0 { (0.0, w) } else { (t - w, t + w) };
        if lo < 0.0 || hi > t_max {
            return Err(Error::InvalidArgument(format!("window {w} leaves the curve's time range")));
        }
        let db = match method {
            CapMethod::Mc { n } if lo > gamma.t[0] => {
                let h0 = Hull::Polyline { points: gamma.prefix(lo) };
                let h1 = Hull::Polyline { points: gamma.prefix(hi) };
                let e = paired_difference(domain, &h0, &h1, stream.derive(&format!("pair{k}")), n)?;
                KernelEstimate::mc(e, n)
            }
            _ => {
                let b0 = cap_b(lo, format!("lo{k}"))?;
                let b1 = cap_b(hi, format!("hi{k}"))?;
                KernelEstimate { value: b1.value - b0.value, stderr: b1.stderr.hypot(b0.stderr), ..b1 }
            }
        };
        let cap_a = |s: f64| -> Result<f64> {
            if s <= gamma.t[0] {
                return Ok(0.0);
            }
            HullMap::new(&Hull::Polyline { points: gamma.prefix(s) }).map(|m| m.hcap())
        };
        let da = cap_a(hi)? - cap_a(lo)?;
        rows.push(RateRow {
            window: w,
            delta_a: da,
            delta_b: db,
            ratio: Estimate { value: db.value / da, stderr: db.stderr / da },
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| if t == 0.0 { r.window.sqrt() } else { r.window * r.window }).collect();
    let ys: Vec<Estimate> = rows.iter().map(|r| r.ratio).collect();
    let extrapolated = intercept(&xs, &ys);
    let reference = if t == 0.0 {
        PI * pk_er_infinity(domain, gamma.x[0], &Backend::bie())?.value
    } else {
        let m = hull_map_er(domain, &Hull::Polyline { points: gamma.prefix(t) }, &Backend::bie())?;
        m.phi_prime.ok_or_else(|| Error::Numerical("no tip derivative".into()))?.powi(2)
    };
    let inconclusive = rows.iter().any(|r| r.ratio.stderr > 0.02 * r.ratio.value.abs());
    Ok(RateReport { t, rows, extrapolated, reference, inconclusive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    fn s() -> RngStream {
        RngStream::new(11, 0)
    }

    #[test]
    fn closed_forms_and_scaling() {
        let slit = Hull::VerticalSlit { x: 0.0, height: 1.0 };
        let disk = Hull::HalfDisk { x: 0.0, radius: 1.0 };
        assert_eq!(hcap(&slit, CapMethod::ClosedForm, s()).unwrap().value, 0.5);
        assert_eq!(hcap(&disk, CapMethod::ClosedForm, s()).unwrap().value, 1.0);
        for r in [0.5, 2.0] {
            let a = hcap(&Hull::VerticalSlit { x: 0.0, height: r }, CapMethod::ClosedForm, s()).unwrap().value;
            assert!((a - r * r * 0.5).abs() < 1e-9);
            let p = Hull::Polyline { points: vec![C64::new(0.0, 0.0), C64::new(0.3, 0.5), C64::new(0.1, 1.0)] };
            let q =
                Hull::Polyline { points: vec![C64::new(0.0, 0.0), C64::new(0.3 * r, 0.5 * r), C64::new(0.1 * r, r)] };
            let (a, b) = (HullMap::new(&p).unwrap().hcap(), HullMap::new(&q).unwrap().hcap());
            assert!((b - r * r * a).abs() < 1e-9);
        }
        let small = hcap(&Hull::VerticalSlit { x: 0.0, height: 0.5 }, CapMethod::ClosedForm, s()).unwrap().value;
        assert!(small <= 0.5);
    }

    #[test]
    fn mc_matches_closed_form() {
        let slit = Hull::VerticalSlit { x: 0.0, height: 1.0 };
        let e = hcap(&slit, CapMethod::Mc { n: 20_000 }, s()).unwrap();
        assert!((e.value - 0.5).abs() < 4.0 * e.stderr, "{e:?}");
        let er = hcap_er(&Domain::halfplane(), &slit, CapMethod::Mc { n: 20_000 }, RngStream::new(12, 0)).unwrap();
        assert!(er.z_score(&e) < 4.0);
    }

    #[test]
    fn mu_additivity_and_total() {
        let slit = Hull::VerticalSlit { x: 0.0, height: 1.0 };
        let arcs = [
            HullArc { re: [-1.0, 1.0], im: [0.0, 0.5] },
            HullArc { re: [-1.0, 1.0], im: [0.5, 1.01] },
            HullArc { re: [-1.0, 1.0], im: [0.0, 1.01] },
        ];
        let m = mu_profile(&slit, &arcs, s(), 20_000).unwrap();
        assert!((m[0].value + m[1].value - m[2].value).abs() < 1e-12);
        assert!(m[0].value > 0.0 && m[1].value > 0.0);
    }

    #[test]
    fn bie_hcap_er_near_hcap_for_far_holes() {
        let hull = Hull::VerticalSlit { x: 0.0, height: 0.5 };
        let r: Vec<f64> = [5.0, 10.0, 20.0]
            .iter()
            .map(|&d| {
                let dom = Domain::chordal(vec![Slit::new(1.0, d, d + 1.0).unwrap()]).unwrap();
                hcap_er(&dom, &hull, CapMethod::Bie, s()).unwrap().value / 0.125
            })
            .collect();
        assert!((r[2] - 1.0).abs() <= (r[1] - 1.0).abs() && (r[1] - 1.0).abs() <= (r[0] - 1.0).abs(), "{r:?}");
        assert!((r[2] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn rate_ratio_bie() {
        let ts: Vec<f64> = (0..=80).map(|k| 0.0025 * k as f64).collect();
        let gamma = CurveSample::from_fn(&ts, |t| C64::new(0.2 * t, 2.0 * t.sqrt())).unwrap();
        let d = Domain::chordal(vec![Slit::new(1.0, 1.0, 2.0).unwrap()]).unwrap();
        let r0 = capacity_rate_ratio(&d, &gamma, 0.0, &[0.04, 0.02, 0.01], CapMethod::Bie, s()).unwrap();
        assert!((r0.extrapolated.value - r0.reference).abs() < 2e-2, "{r0:?}");
        assert!((r0.reference - 1.0).abs() < 1e-6);
        let r1 = capacity_rate_ratio(&d, &gamma, 0.1, &[0.04, 0.02], CapMethod::Bie, s()).unwrap();
        assert!((r1.extrapolated.value / r1.reference - 1.0).abs() < 1e-2, "{r1:?}");
        let z = capacity_rate_ratio(&Domain::halfplane(), &gamma, 0.1, &[0.02], CapMethod::Bie, s()).unwrap();
        assert!((z.rows[0].ratio.value - 1.0).abs() < 1e-9);
    }
}
