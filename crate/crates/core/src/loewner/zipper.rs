//! Hull maps `g_A`: closed forms for vertical slits and half-disks, and a
//! zipper of tilted-slit maps for polylines, which also extracts driving
//! functions from sampled curves.

use super::{CapacitySchedule, DrivingFunction};
use crate::geometry::{CurveSample, Hull};
use crate::{Error, Result, C64};

/// The map removing the straight slit `[u, u + zeta]` from the upper
/// half-plane, hydrodynamically normalized.
///
/// With `alpha = arg(zeta) / pi`, its inverse is
/// `u + (w - u - p)^(1 - alpha) (w - u - q)^alpha` where `p = -alpha s` and
/// `q = (1 - alpha) s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedSlit {
    pub u: f64,
    pub alpha: f64,
    pub s: f64,
}

impl TiltedSlit {
    pub fn from_tip(u: f64, zeta: C64) -> Result<Self> {
        if !(zeta.im > 0.0) || !zeta.re.is_finite() {
            return Err(Error::InvalidArgument(format!("slit tip {zeta} is not in the upper half-plane")));
        }
        let alpha = zeta.arg() / std::f64::consts::PI;
        let s = zeta.norm() / ((1.0 - alpha).powf(1.0 - alpha) * alpha.powf(alpha));
        Ok(TiltedSlit { u, alpha, s })
    }

    fn p(&self) -> f64 {
        -self.alpha * self.s
    }

    fn q(&self) -> f64 {
        (1.0 - self.alpha) * self.s
    }

    /// Half-plane capacity of the slit.
    pub fn hcap(&self) -> f64 {
        0.5 * self.alpha * (1.0 - self.alpha) * self.s * self.s
    }

    /// Image of the tip.
    pub fn u_after(&self) -> f64 {
        self.u + self.s * (1.0 - 2.0 * self.alpha)
    }

    fn log_f(&self, w: C64) -> C64 {
        (w - self.p()).ln() * (1.0 - self.alpha) + (w - self.q()).ln() * self.alpha
    }

    /// The inverse map, from the upper half-plane onto the slit domain.
    pub fn forward(&self, w: C64) -> C64 {
        let w = w - self.u;
        if w.im <= 0.0 {
            let x = w.re;
            if x > self.p() && x < self.q() {
                let m = (x - self.p()).powf(1.0 - self.alpha) * (self.q() - x).powf(self.alpha);
                return C64::from_polar(m, std::f64::consts::PI * self.alpha) + self.u;
            }
            return C64::new(self.u + self.real_forward(x), 0.0);
        }
        self.log_f(w).exp() + self.u
    }

    fn real_forward(&self, x: f64) -> f64 {
        let m = (x - self.p()).abs().powf(1.0 - self.alpha) * (x - self.q()).abs().powf(self.alpha);
        if x >= self.q() {
            m
        } else if x <= self.p() {
            -m
        } else {
            0.0
        }
    }

    /// `g(z)`: removes the slit. Boundary points on the real line map to the
    /// real line; the base point maps to the right foot `u + q`.
    pub fn apply(&self, z: C64) -> Result<C64> {
        let z = z - self.u;
        if z.im <= 0.0 {
            return Ok(C64::new(self.u + self.real_inverse(z.re), 0.0));
        }
        let c2 = self.hcap();
        let lift = 4.0 * self.s + z.norm();
        let mut w = {
            let z0 = z + C64::new(0.0, lift);
            z0 + c2 / z0
        };
        let steps = 16;
        for k in 1..=steps {
            let zk = z + C64::new(0.0, lift * (1.0 - k as f64 / steps as f64));
            w = self.newton(zk, w)?;
        }
        Ok(w + self.u)
    }

    fn newton(&self, z: C64, mut w: C64) -> Result<C64> {
        let target = z.ln();
        let (p, q, a) = (self.p(), self.q(), self.alpha);
        let mut res = (self.log_f(w) - target).norm();
        for _ in 0..100 {
            if res < 1e-15 {
                return Ok(w);
            }
            let d = (1.0 - a) / (w - p) + a / (w - q);
            let step = (self.log_f(w) - target) / d;
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = w - step * lam;
                if cand.im > 0.0 {
                    let r = (self.log_f(cand) - target).norm();
                    if r < res || r < 1e-14 {
                        w = cand;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if res < 1e-9 {
            Ok(w)
        } else {
            Err(Error::Numerical(format!("tilted-slit inversion stalled at residual {res:e}")))
        }
    }

    fn real_inverse(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.q();
        }
        let (mut lo, mut hi) = if x > 0.0 {
            let mut hi = self.q() + x.abs() + self.s;
            while self.real_forward(hi) < x {
                hi *= 2.0;
            }
            (self.q(), hi)
        } else {
            let mut lo = self.p() - x.abs() - self.s;
            while self.real_forward(lo) > x {
                lo *= 2.0;
            }
            (lo, self.p())
        };
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if self.real_forward(m) < x {
                lo = m;
            } else {
                hi = m;
            }
            if hi - lo <= 1e-16 * (1.0 + m.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// The hydrodynamically normalized map `g_A` of a compact hull.
#[derive(Debug, Clone, PartialEq)]
pub enum HullMap {
    Identity,
    VerticalSlit {
        x: f64,
        height: f64,
    },
    HalfDisk {
        x: f64,
        radius: f64,
    },
    /// Composition of tilted-slit maps, applied in order.
    Zipper {
        steps: Vec<TiltedSlit>,
    },
}

impl HullMap {
    pub fn new(hull: &Hull) -> Result<Self> {
        hull.validate()?;
        if hull.is_empty() {
            return Ok(HullMap::Identity);
        }
        Ok(match hull {
            Hull::VerticalSlit { x, height } => HullMap::VerticalSlit { x: *x, height: *height },
            Hull::HalfDisk { x, radius } => HullMap::HalfDisk { x: *x, radius: *radius },
            Hull::Polyline { points } => HullMap::from_polyline(points)?,
        })
    }

    /// Zips the polyline segment by segment.
    pub fn from_polyline(points: &[C64]) -> Result<Self> {
        Ok(HullMap::Zipper { steps: zip(points)?.0 })
    }

    /// Half-plane capacity of the hull.
    pub fn hcap(&self) -> f64 {
        match self {
            HullMap::Identity => 0.0,
            HullMap::VerticalSlit { height, .. } => 0.5 * height * height,
            HullMap::HalfDisk { radius, .. } => radius * radius,
            HullMap::Zipper { steps } => steps.iter().map(TiltedSlit::hcap).sum(),
        }
    }

    /// Image of the tip for curve hulls.
    pub fn tip_image(&self) -> Option<f64> {
        match self {
            HullMap::Identity | HullMap::HalfDisk { .. } => None,
            HullMap::VerticalSlit { x, .. } => Some(*x),
            HullMap::Zipper { steps } => steps.last().map(TiltedSlit::u_after),
        }
    }

    /// `g_A(z)` for `z` in the closed upper half-plane off the hull.
    pub fn eval(&self, z: C64) -> Result<C64> {
        if !(z.im >= 0.0) {
            return Err(Error::Outside { re: z.re, im: z.im, what: "closed upper half-plane".into() });
        }
        match self {
            HullMap::Identity => Ok(z),
            HullMap::VerticalSlit { x, height } => {
                let w = z - x;
                if w.norm() == 0.0 {
                    return Ok(C64::new(x + height, 0.0));
                }
                let h2 = height * height;
                Ok(w * (C64::from(1.0) + h2 / (w * w)).sqrt() + x)
            }
            HullMap::HalfDisk { x, radius } => {
                let w = z - x;
                if w.norm() < *radius {
                    return Err(Error::Outside { re: z.re, im: z.im, what: "complement of the half-disk".into() });
                }
                Ok(w + radius * radius / w + x)
            }
            HullMap::Zipper { steps } => {
                let mut w = z;
                for s in steps {
                    w = s.apply(w)?;
                }
                Ok(w)
            }
        }
    }
}

/// Zips a polyline, returning the slit maps and the `(U, a)` values after
/// each vertex.
fn zip(points: &[C64]) -> Result<(Vec<TiltedSlit>, Vec<f64>, Vec<f64>)> {
    if points.is_empty() || points[0].im != 0.0 {
        return Err(Error::InvalidArgument("polyline must start on the real line".into()));
    }
    if crate::geometry::polyline_self_intersects(points) {
        return Err(Error::InvalidArgument("polyline crosses its earlier hull".into()));
    }
    let mut u = points[0].re;
    let mut a = 0.0;
    let mut images: Vec<C64> = points[1..].to_vec();
    let mut steps = Vec::with_capacity(images.len());
    let mut us = vec![u];
    let mut as_ = vec![a];
    for j in 0..images.len() {
        let zeta = images[j] - u;
        if !(zeta.im > 0.0) {
            return Err(Error::InvalidArgument(format!("segment {} crosses the earlier hull", j + 1)));
        }
        let step = TiltedSlit::from_tip(u, zeta)?;
        for w in images[j + 1..].iter_mut() {
            *w = step.apply(*w)?;
        }
        a += step.hcap();
        u = step.u_after();
        steps.push(step);
        us.push(u);
        as_.push(a);
    }
    Ok((steps, us, as_))
}

/// Driving function and capacity of a sampled curve, with knots at the
/// sample times. The curve must start at time 0.
pub fn curve_to_driving(gamma: &CurveSample) -> Result<(DrivingFunction, CapacitySchedule)> {
    gamma.validate()?;
    if gamma.t[0] != 0.0 {
        return Err(Error::InvalidArgument("curve sample must start at t = 0".into()));
    }
    let (_, u, a) = zip(&gamma.points())?;
    Ok((DrivingFunction::new(gamma.t.clone(), u)?, CapacitySchedule::new(gamma.t.clone(), a)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::{solve_classical, SolverOptions};
    use proptest::prelude::*;

    #[test]
    fn tilted_slit_roundtrip() {
        let s = TiltedSlit::from_tip(0.3, C64::new(0.4, 0.9)).unwrap();
        assert!((s.forward(C64::new(s.u_after(), 0.0)) - C64::new(0.7, 0.9)).norm() < 1e-12);
        for z in [C64::new(0.1, 0.05), C64::new(-2.0, 3.0), C64::new(0.7, 0.95), C64::new(5.0, 0.0)] {
            let w = s.apply(z).unwrap();
            assert!((s.forward(w) - z).norm() < 1e-12, "{z}");
        }
        let big = C64::new(0.0, 1e4);
        let g = s.apply(big).unwrap();
        assert!((g - big - s.hcap() / big).norm() < 1e-6);
    }

    #[test]
    fn zipper_reproduces_vertical_slit() {
        let pts: Vec<C64> = (0..=20).map(|k| C64::new(0.5, 0.1 * k as f64)).collect();
        let z = HullMap::from_polyline(&pts).unwrap();
        let v = HullMap::VerticalSlit { x: 0.5, height: 2.0 };
        assert!((z.hcap() - 2.0).abs() < 1e-12);
        for p in [C64::new(1.0, 1.0), C64::new(-3.0, 0.5), C64::new(0.5, 2.5)] {
            assert!((z.eval(p).unwrap() - v.eval(p).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn sqrt_curve_driving() {
        let ts: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        let g = CurveSample::from_fn(&ts, |t| C64::new(0.0, 2.0 * t.sqrt())).unwrap();
        let (u, a) = curve_to_driving(&g).unwrap();
        for (k, t) in ts.iter().enumerate() {
            assert!(u.u[k].abs() < 1e-3);
            assert!((a.b[k] - 2.0 * t).abs() < 1e-3);
        }
        let shifted = CurveSample::from_fn(&ts, |t| C64::new(1.5, 2.0 * t.sqrt())).unwrap();
        let (u2, _) = curve_to_driving(&shifted).unwrap();
        assert!(u2.u.iter().all(|x| (x - 1.5).abs() < 1e-9));
    }

    /// Backward flow from `U_t + i eps`, which traces `gamma(t)`.
    fn trace_point(u: &DrivingFunction, a: &CapacitySchedule, t: f64) -> C64 {
        let h0 = t / 4000.0;
        let mut z = C64::new(u.eval(t), 1e-6);
        let f = |s: f64, z: C64, r: f64| -C64::from(r) / (z - u.eval(t - s));
        let mut s = 0.0;
        while s < t {
            let r = a.rate(t - s - 1e-14).max(1e-300);
            let d = (z - u.eval(t - s)).norm();
            let h = h0.min(0.05 * d * d / r).min(t - s);
            let k1 = f(s, z, r);
            let k2 = f(s + 0.5 * h, z + k1 * (0.5 * h), r);
            let k3 = f(s + 0.5 * h, z + k2 * (0.5 * h), r);
            let k4 = f(s + h, z + k3 * h, r);
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            s += h;
        }
        z
    }

    #[test]
    fn driving_roundtrip() {
        let ts: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
        let g = CurveSample::from_fn(&ts, |t| C64::new(0.3 * t + 0.2 * (3.0 * t).sin() * t, 1.5 * t.sqrt())).unwrap();
        let (u, a) = curve_to_driving(&g).unwrap();
        let pts = g.points();
        for k in [10, 20, 30, 40] {
            let z = trace_point(&u, &a, ts[k]);
            let d =
                pts.windows(2).map(|w| crate::geometry::dist_to_segment(z, w[0], w[1]).0).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-2, "vertex {k}: {d}");
        }
        let tr = solve_classical(&u, &a, &pts[5..6], 1.0, SolverOptions::new(1e-3)).unwrap();
        assert!(
            matches!(tr.final_state[0].status, crate::loewner::PointStatus::Swallowed { .. }) || {
                let z = tr.at(0, ts[5]).unwrap();
                (z - u.eval(ts[5])).norm() < 1e-1
            }
        );
    }

    #[test]
    fn crossing_rejected() {
        let pts = [C64::new(0.0, 0.0), C64::new(0.0, 1.0), C64::new(1.0, 1.0), C64::new(1.0, 0.5), C64::new(-1.0, 0.5)];
        assert!(HullMap::from_polyline(&pts).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn hull_displacement_bound(h in 0.05f64..2.0, x in -1.0f64..1.0, zr in -5.0f64..5.0, zi in 0.0f64..5.0) {
            for m in [HullMap::VerticalSlit { x, height: h }, HullMap::HalfDisk { x, radius: h }] {
                let z = C64::new(zr, zi);
                if let Ok(g) = m.eval(z) {
                    prop_assert!((g - z).norm() <= 3.0 * h + 1e-12);
                }
            }
        }
    }
}
