//! Harmonic conjugation along paths: `u(z) = u(z0) + int_gamma dv/dn |dz|`
//! with `n` the left normal, and automatic routing of paths around holes.

use std::sync::Arc;

use crate::brownian::GridSolution;
use crate::geometry::{segment_intersection, Domain, Hole};
use crate::{Error, Result, C64};

/// A harmonic function with gradient access.
pub trait HarmonicEvaluator: Sync {
    fn value(&self, z: C64) -> Result<f64>;
    /// Gradient packed as `v_x + i v_y`.
    fn gradient(&self, z: C64) -> Result<C64>;
    fn contains(&self, z: C64) -> bool;
    /// Points where `v` is singular.
    fn singularities(&self) -> Vec<C64> {
        vec![]
    }
    /// Smallest length the evaluator resolves; 0 for exact evaluators.
    fn resolution(&self) -> f64 {
        0.0
    }
    /// The domain, when known, for crossing checks on zero-width holes.
    fn domain(&self) -> Option<&Domain> {
        None
    }
}

/// A harmonic function given by closures on a domain.
pub struct FnHarmonic<V, G> {
    pub value: V,
    pub gradient: G,
    pub domain: Domain,
    pub singular: Vec<C64>,
}

impl<V, G> HarmonicEvaluator for FnHarmonic<V, G>
where
    V: Fn(C64) -> Result<f64> + Sync,
    G: Fn(C64) -> Result<C64> + Sync,
{
    fn value(&self, z: C64) -> Result<f64> {
        (self.value)(z)
    }
    fn gradient(&self, z: C64) -> Result<C64> {
        (self.gradient)(z)
    }
    fn contains(&self, z: C64) -> bool {
        self.domain.contains(z) && self.singular.iter().all(|s| *s != z)
    }
    fn singularities(&self) -> Vec<C64> {
        self.singular.clone()
    }
    fn domain(&self) -> Option<&Domain> {
        Some(&self.domain)
    }
}

/// `scale * v` for a grid solution `v`.
#[derive(Clone)]
pub struct GridHarmonic {
    pub sol: Arc<GridSolution>,
    pub scale: f64,
}

impl HarmonicEvaluator for GridHarmonic {
    fn value(&self, z: C64) -> Result<f64> {
        Ok(self.scale * self.sol.eval(z)?)
    }
    fn gradient(&self, z: C64) -> Result<C64> {
        Ok(self.sol.gradient(z)? * self.scale)
    }
    fn contains(&self, z: C64) -> bool {
        self.sol.domain().contains(z)
    }
    fn resolution(&self) -> f64 {
        self.sol.min_spacing()
    }
    fn domain(&self) -> Option<&Domain> {
        Some(self.sol.domain())
    }
}

/// Left-normal derivative integral of `v` over one segment: Simpson
/// estimates on doubling meshes until successive values agree to `1e-8`
/// (or the mesh reaches a quarter of the evaluator's resolution).
fn segment_integral(v: &dyn HarmonicEvaluator, a: C64, b: C64) -> Result<f64> {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let normal = C64::i() * d;
    let f = |s: f64| -> Result<f64> {
        let z = a + d * s;
        if !v.contains(z) {
            return Err(Error::outside(z, "conjugation path leaves the domain"));
        }
        let g = v.gradient(z)?;
        Ok(g.re * normal.re + g.im * normal.im)
    };
    let floor = 0.25 * v.resolution();
    let mut n = 16usize;
    let mut vals: Vec<f64> = (0..=n).map(|k| f(k as f64 / n as f64)).collect::<Result<_>>()?;
    let trap = |vals: &[f64]| {
        let n = vals.len() - 1;
        (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[n])) / n as f64
    };
    let mut t_prev = trap(&vals);
    let mut s_prev = f64::NAN;
    loop {
        let mut next = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            next.push(vals[k]);
            next.push(f((2 * k + 1) as f64 / (2 * n) as f64)?);
        }
        next.push(vals[n]);
        n *= 2;
        vals = next;
        let t = trap(&vals);
        let s = (4.0 * t - t_prev) / 3.0;
        if (s - s_prev).abs() < 1e-8 || len / n as f64 <= floor {
            return Ok(s);
        }
        if n > 1 << 20 {
            return Err(Error::Numerical("conjugation quadrature did not converge".into()));
        }
        t_prev = t;
        s_prev = s;
    }
}

/// The harmonic conjugate `u(z)` of `v` with `u(z0) = u0`, integrated along
/// the polyline `path` from `z0` to `z` (an empty path means the segment).
pub fn conjugate(v: &dyn HarmonicEvaluator, z0: C64, u0: f64, z: C64, path: &[C64]) -> Result<f64> {
    let pts: Vec<C64> = if path.is_empty() { vec![z0, z] } else { path.to_vec() };
    if pts.len() < 2 || (pts[0] - z0).norm() > 1e-12 || (pts[pts.len() - 1] - z).norm() > 1e-12 {
        return Err(Error::InvalidArgument("conjugation path must run from z0 to z".into()));
    }
    let margin = 10.0 * v.resolution();
    for s in v.singularities() {
        for w in pts.windows(2) {
            if crate::geometry::dist_to_segment(s, w[0], w[1]).0 <= margin.max(1e-12) {
                return Err(Error::InvalidArgument("conjugation path passes a singularity".into()));
            }
        }
    }
    if let Some(d) = v.domain() {
        if pts.windows(2).any(|w| crosses_boundary(d, w[0], w[1])) {
            return Err(Error::InvalidArgument("conjugation path crosses the boundary".into()));
        }
    }
    let mut u = u0;
    for w in pts.windows(2) {
        u += segment_integral(v, w[0], w[1])?;
    }
    Ok(u)
}

/// Increment of the conjugate of `v` around the closed polyline `loop_`.
pub fn period(v: &dyn HarmonicEvaluator, loop_: &[C64]) -> Result<f64> {
    let mut pts = loop_.to_vec();
    if pts.first() != pts.last() {
        pts.push(pts[0]);
    }
    conjugate(v, pts[0], 0.0, pts[0], &pts)
}

/// Whether the segment `[a, b]` crosses a slit or a hull segment.
fn crosses_boundary(domain: &Domain, a: C64, b: C64) -> bool {
    let mut segs: Vec<(C64, C64)> = domain
        .holes()
        .iter()
        .filter_map(|h| match h {
            Hole::Slit(s) => Some((s.left(), s.right())),
            Hole::Disk(_) => None,
        })
        .collect();
    if let Some(h) = domain.hull() {
        segs.extend(h.segments());
    }
    segs.iter().any(|&(p, q)| segment_intersection(a, b, p, q).is_some())
}

fn path_clear(domain: &Domain, pts: &[C64], need: f64) -> bool {
    for w in pts.windows(2) {
        let len = (w[1] - w[0]).norm();
        let n = ((len / (0.5 * need)).ceil() as usize).clamp(1, 200_000);
        for k in 0..=n {
            let z = w[0] + (w[1] - w[0]) * (k as f64 / n as f64);
            match domain.dist_boundary(z) {
                Ok(d) if d >= need => {}
                _ => return false,
            }
        }
    }
    true
}

fn path_length(p: &[C64]) -> f64 {
    p.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// A polyline from `a` to `b` in a half-plane domain keeping distance
/// `clearance` from the boundary (relaxed near the endpoints). Tries the
/// straight segment, routes over the top of all holes and routes along a
/// corridor below them, each leaving the endpoints vertically or sideways.
pub fn auto_path(domain: &Domain, a: C64, b: C64, clearance: f64) -> Result<Vec<C64>> {
    if domain.is_annulus() {
        return Err(Error::InvalidArgument("path routing supports half-plane domains".into()));
    }
    let da = domain.dist_boundary(a)?;
    let db = domain.dist_boundary(b)?;
    let need = clearance.min(0.5 * da.min(db));
    let direct = vec![a, b];
    if path_clear(domain, &direct, need) {
        return Ok(direct);
    }
    let mut x0 = a.re.min(b.re);
    let mut x1 = a.re.max(b.re);
    let mut top = a.im.max(b.im);
    let mut bottom = f64::INFINITY;
    let mut boxes: Vec<(f64, f64, f64, f64)> = domain.holes().iter().map(|h| h.bbox()).collect();
    if let Some(h) = domain.hull() {
        for (p, q) in h.segments() {
            boxes.push((p.re.min(q.re), p.re.max(q.re), p.im.min(q.im), p.im.max(q.im)));
        }
    }
    for (l, r, lo, hi) in &boxes {
        x0 = x0.min(*l);
        x1 = x1.max(*r);
        top = top.max(*hi);
        if domain.hull().is_none() || *lo > 0.0 {
            bottom = bottom.min(*lo);
        }
    }
    let margin = 4.0 * clearance + 0.05 * (x1 - x0 + top);
    let xl = x0 - margin;
    let xr = x1 + margin;
    let yt = top + margin;
    let mut levels = vec![yt];
    if bottom.is_finite() && bottom > 2.0 * need {
        levels.push(0.5 * bottom);
    }
    let mut best: Option<Vec<C64>> = None;
    for &y in &levels {
        let legs = |p: C64| {
            vec![
                vec![p, C64::new(p.re, y)],
                vec![p, C64::new(xl, p.im), C64::new(xl, y)],
                vec![p, C64::new(xr, p.im), C64::new(xr, y)],
            ]
        };
        for la in legs(a) {
            for lb in legs(b) {
                let mut p = la.clone();
                p.extend(lb.iter().rev());
                p.dedup();
                if best.as_ref().is_some_and(|q| path_length(q) <= path_length(&p)) {
                    continue;
                }
                if path_clear(domain, &p, need) {
                    best = Some(p);
                }
            }
        }
    }
    best.ok_or_else(|| Error::Numerical(format!("no clear conjugation path from {a} to {b}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    fn im_z(domain: Domain) -> FnHarmonic<impl Fn(C64) -> Result<f64>, impl Fn(C64) -> Result<C64>> {
        FnHarmonic { value: |z: C64| Ok(z.im), gradient: |_z: C64| Ok(C64::new(0.0, 1.0)), domain, singular: vec![] }
    }

    #[test]
    fn conjugate_of_im_z_is_re_z() {
        let v = im_z(Domain::halfplane());
        let z0 = C64::new(0.3, 1.0);
        for z in [C64::new(-2.0, 0.5), C64::new(4.0, 3.0)] {
            let u = conjugate(&v, z0, z0.re, z, &[]).unwrap();
            assert!((u - z.re).abs() < 1e-12);
        }
    }

    #[test]
    fn path_independence_and_routing() {
        let d = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let v = FnHarmonic {
            value: |z: C64| Ok((z * z).im),
            gradient: |z: C64| Ok(C64::new(2.0 * z.im, 2.0 * z.re)),
            domain: d.clone(),
            singular: vec![],
        };
        let a = C64::new(0.0, 0.5);
        let b = C64::new(0.2, 2.0);
        let p = auto_path(&d, a, b, 0.05).unwrap();
        assert!(p.len() > 2);
        let u1 = conjugate(&v, a, (a * a).re, b, &p).unwrap();
        let p2 = [a, C64::new(3.0, 0.5), C64::new(3.0, 2.0), b];
        let u2 = conjugate(&v, a, (a * a).re, b, &p2).unwrap();
        assert!((u1 - (b * b).re).abs() < 1e-7 && (u1 - u2).abs() < 1e-7);
        assert!(conjugate(&v, a, 0.0, b, &[a, b]).is_err());
    }

    #[test]
    fn period_of_log_modulus() {
        let d = Domain::chordal(vec![Slit::new(1.0, -0.5, 0.5).unwrap()]).unwrap();
        let c = C64::new(0.0, 1.0);
        let v = FnHarmonic {
            value: move |z: C64| Ok((z - c).norm().ln()),
            gradient: move |z: C64| {
                let w = z - c;
                Ok(w / w.norm_sqr())
            },
            domain: d,
            singular: vec![c],
        };
        let sq = [C64::new(-1.0, 0.5), C64::new(1.0, 0.5), C64::new(1.0, 1.5), C64::new(-1.0, 1.5)];
        let p = period(&v, &sq).unwrap();
        assert!((p + std::f64::consts::TAU).abs() < 1e-8, "{p}");
    }
}
