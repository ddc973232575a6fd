//! Hybrid walk-on-spheres and Euler exit sampler.
//!
//! Far from the boundary the walk jumps to a uniform point of the largest
//! empty circle. Within `eps_wos` of the boundary it switches to Gaussian
//! steps with explicit crossing detection, so that the side of a slit that is
//! hit is decided by the approach direction. A path is captured once it is
//! within `eps_hit` of the boundary or a step crosses it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::{gaussian_step, green_ball_point, unit_circle, RngStream};
use crate::geometry::{dist_to_segment, segment_intersection, BoundaryId, Domain, Hole, Hull, Side};
use crate::stats::{proportion, Estimate};
use crate::{Error, Result, C64};

/// Discretisation parameters of the exit sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub eps_hit: f64,
    pub eps_wos: f64,
    pub dt_euler: f64,
    pub max_steps: u64,
}

impl StepPolicy {
    /// Defaults scaled to a characteristic length.
    pub fn for_scale(scale: f64) -> Self {
        let eps_hit = 1e-4 * scale;
        let eps_wos = 1e-3 * scale;
        StepPolicy { eps_hit, eps_wos, dt_euler: (0.25 * eps_wos).powi(2), max_steps: 100_000_000 }
    }

    pub fn for_domain(domain: &Domain) -> Self {
        Self::for_scale(domain.scale())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_hit > 0.0 && self.eps_wos > 0.0 && self.dt_euler > 0.0) {
            return Err(Error::InvalidArgument("step policy values must be positive".into()));
        }
        if self.eps_wos < self.eps_hit {
            return Err(Error::InvalidArgument("eps_wos must be at least eps_hit".into()));
        }
        Ok(())
    }
}

/// A cell over which occupation time is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cell {
    /// Closed disk in the plane.
    Disk { center: C64, r: f64 },
    /// Annular cell `r_lo <= |zeta| < r_hi` in the disk coordinates of hole
    /// `hole` (numbered from 1), weighted by `|dzeta/dz|^2`.
    Ring { hole: usize, r_lo: f64, r_hi: f64 },
    /// Axis-parallel rectangle.
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Cell {
    /// Area of the cell, measured in disk coordinates for rings.
    pub fn area(&self) -> f64 {
        match self {
            Cell::Disk { r, .. } => std::f64::consts::PI * r * r,
            Cell::Ring { r_lo, r_hi, .. } => std::f64::consts::PI * (r_hi * r_hi - r_lo * r_lo),
            Cell::Rect { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    fn bound(&self, holes: &[Hole]) -> (C64, f64) {
        match self {
            Cell::Disk { center, r } => (*center, *r),
            Cell::Ring { hole, r_hi, .. } => match holes[hole - 1] {
                Hole::Slit(s) => (s.center(), 0.5 * s.half_length() * (r_hi + 1.0 / r_hi)),
                Hole::Disk(d) => (d.center(), d.r * r_hi),
            },
            Cell::Rect { x0, x1, y0, y1 } => {
                let c = C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
                (c, 0.5 * ((x1 - x0).hypot(y1 - y0)))
            }
        }
    }

    /// Weight of the point `w`: zero outside the cell.
    fn weight(&self, holes: &[Hole], w: C64) -> f64 {
        match self {
            Cell::Disk { center, r } => {
                if (w - center).norm_sqr() <= r * r {
                    1.0
                } else {
                    0.0
                }
            }
            Cell::Ring { hole, r_lo, r_hi } => {
                let h = &holes[hole - 1];
                match h.to_disk(w) {
                    Ok(zeta) => {
                        let m = zeta.norm();
                        if m >= *r_lo && m < *r_hi {
                            1.0 / h.from_disk_derivative(zeta).norm_sqr()
                        } else {
                            0.0
                        }
                    }
                    Err(_) => 0.0,
                }
            }
            Cell::Rect { x0, x1, y0, y1 } => {
                if w.re >= *x0 && w.re < *x1 && w.im >= *y0 && w.im < *y1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Per-path occupation accumulator over a list of cells.
#[derive(Debug, Clone)]
pub struct Occupation {
    cells: Vec<Cell>,
    bounds: Vec<(C64, f64)>,
    holes: Vec<Hole>,
    /// Weighted time spent in each cell by the current path.
    pub path: Vec<f64>,
}

impl Occupation {
    pub fn new(cells: &[Cell], domain: &Domain) -> Self {
        let holes = domain.holes();
        Occupation {
            cells: cells.to_vec(),
            bounds: cells.iter().map(|c| c.bound(&holes)).collect(),
            holes,
            path: vec![0.0; cells.len()],
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn reset(&mut self) {
        self.path.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds the expected occupation of a ball step by sampling one point from
    /// the ball's Green density with total weight `r^2 / 2`.
    #[inline]
    fn ball<R: Rng + ?Sized>(&mut self, c: C64, r: f64, rng: &mut R) {
        let touches = self.bounds.iter().any(|(b, rb)| (c - b).norm_sqr() <= (r + rb) * (r + rb));
        if !touches {
            return;
        }
        let w = c + green_ball_point(rng, r);
        self.point(w, 0.5 * r * r);
    }

    #[inline]
    fn point(&mut self, w: C64, dt: f64) {
        for k in 0..self.cells.len() {
            let (b, rb) = self.bounds[k];
            if (w - b).norm_sqr() <= rb * rb {
                let wt = self.cells[k].weight(&self.holes, w);
                self.path[k] += wt * dt;
            }
        }
    }

    /// Adds `amount` to cell `k` directly.
    pub fn add(&mut self, k: usize, amount: f64) {
        self.path[k] += amount;
    }
}

/// Boundary piece reached by a path.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Comp {
    Real,
    Outer,
    Hull,
    Slit(usize),
    Disk(usize),
}

/// Exit location of a Brownian path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub point: C64,
    pub boundary: BoundaryId,
    pub steps: u64,
    pub occupation: Option<Vec<f64>>,
}

/// Pre-processed domain geometry for the sampler's inner loop.
#[derive(Debug, Clone)]
pub struct Region {
    annulus: Option<f64>,
    holes: Vec<Hole>,
    hull: Option<Hull>,
    hull_center: C64,
    hull_radius: f64,
    hull_segments: Vec<(C64, C64)>,
}

impl Region {
    pub fn new(domain: &Domain) -> Self {
        let hull = domain.hull().cloned();
        let (hull_center, hull_radius, hull_segments) = match &hull {
            Some(h) => {
                let (r, c) = h.rad_and_center();
                (C64::new(c, 0.0), r, h.segments())
            }
            None => (C64::new(0.0, 0.0), 0.0, vec![]),
        };
        Region {
            annulus: match domain {
                Domain::Annulus { r } => Some(*r),
                _ => None,
            },
            holes: domain.holes(),
            hull,
            hull_center,
            hull_radius,
            hull_segments,
        }
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    /// Distance to the hull, or a lower bound for it when that bound already
    /// exceeds `below`.
    #[inline]
    fn hull_dist(&self, z: C64, below: f64) -> f64 {
        match &self.hull {
            None => f64::INFINITY,
            Some(h) => {
                let lb = (z - self.hull_center).norm() - self.hull_radius;
                if lb >= below {
                    lb
                } else {
                    h.dist(z)
                }
            }
        }
    }

    /// Distance to the boundary and the nearest piece.
    #[inline]
    fn nearest(&self, z: C64) -> (f64, Comp) {
        let mut best = match self.annulus {
            Some(r) => {
                let m = z.norm();
                if r - m <= m - 1.0 {
                    (r - m, Comp::Outer)
                } else {
                    return (m - 1.0, Comp::Disk(0));
                }
            }
            None => (z.im, Comp::Real),
        };
        if self.annulus.is_none() {
            if self.hull.is_some() {
                let d = self.hull_dist(z, best.0);
                if d < best.0 {
                    best = (d, Comp::Hull);
                }
            }
            for (k, h) in self.holes.iter().enumerate() {
                let d = h.dist(z);
                if d < best.0 {
                    best = (
                        d,
                        match h {
                            Hole::Slit(_) => Comp::Slit(k),
                            Hole::Disk(_) => Comp::Disk(k),
                        },
                    );
                }
            }
        }
        best
    }

    /// Distance from `z` to the boundary.
    pub fn dist(&self, z: C64) -> f64 {
        self.nearest(z).0
    }

    fn id(&self, c: Comp, side: Option<Side>) -> BoundaryId {
        match c {
            Comp::Real | Comp::Outer | Comp::Hull => BoundaryId::A0,
            Comp::Slit(k) => BoundaryId::Hole(k + 1, side),
            Comp::Disk(k) => BoundaryId::Hole(k + 1, None),
        }
    }

    /// Projects `z` onto the boundary piece `c`.
    fn project(&self, z: C64, c: Comp) -> (C64, Option<Side>) {
        match c {
            Comp::Real => (C64::new(z.re, 0.0), None),
            Comp::Outer => (z * (self.annulus.unwrap() / z.norm()), None),
            Comp::Hull => (self.hull.as_ref().unwrap().project(z), None),
            Comp::Slit(k) => match &self.holes[k] {
                Hole::Slit(s) => {
                    let (p, side) = s.project(z);
                    (p, Some(side))
                }
                Hole::Disk(_) => unreachable!(),
            },
            Comp::Disk(k) => {
                let (c, r) = match self.annulus {
                    Some(_) => (C64::new(0.0, 0.0), 1.0),
                    None => match &self.holes[k] {
                        Hole::Disk(d) => (d.center(), d.r),
                        Hole::Slit(_) => unreachable!(),
                    },
                };
                let w = z - c;
                let n = w.norm();
                (if n > 0.0 { c + w * (r / n) } else { c + r }, None)
            }
        }
    }

    /// Earliest crossing of the boundary along the segment `p -> q`.
    fn crossing(&self, p: C64, q: C64) -> Option<(f64, C64, Comp, Option<Side>)> {
        let step = (q - p).norm();
        let mut best: Option<(f64, C64, Comp, Option<Side>)> = None;
        let mut consider = |t: f64, c: Comp, side: Option<Side>| {
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, p + (q - p) * t, c, side));
            }
        };
        match self.annulus {
            Some(r) => {
                if q.norm() >= r {
                    consider(circle_exit(p, q, C64::new(0.0, 0.0), r), Comp::Outer, None);
                }
                if q.norm() <= 1.0 {
                    consider(circle_entry(p, q, C64::new(0.0, 0.0), 1.0), Comp::Disk(0), None);
                }
                return best;
            }
            None => {
                if q.im <= 0.0 {
                    consider(p.im / (p.im - q.im), Comp::Real, None);
                }
            }
        }
        for (k, h) in self.holes.iter().enumerate() {
            if h.dist(p) > step {
                continue;
            }
            match h {
                Hole::Slit(s) => {
                    if let Some(t) = segment_intersection(p, q, s.left(), s.right()) {
                        let side = if p.im >= s.y { Side::Top } else { Side::Bottom };
                        consider(t, Comp::Slit(k), Some(side));
                    }
                }
                Hole::Disk(d) => {
                    if (q - d.center()).norm() <= d.r {
                        consider(circle_entry(p, q, d.center(), d.r), Comp::Disk(k), None);
                    }
                }
            }
        }
        if let Some(h) = &self.hull {
            if self.hull_dist(p, step + 1.0) <= step {
                match h {
                    Hull::HalfDisk { x, radius } => {
                        let c = C64::new(*x, 0.0);
                        if (q - c).norm() <= *radius && q.im >= 0.0 {
                            consider(circle_entry(p, q, c, *radius), Comp::Hull, None);
                        }
                    }
                    _ => {
                        for (a, b) in &self.hull_segments {
                            if dist_to_segment(p, *a, *b).0 > step {
                                continue;
                            }
                            if let Some(t) = segment_intersection(p, q, *a, *b) {
                                consider(t, Comp::Hull, None);
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Parameter at which `p -> q` enters the closed disk `|z - c| <= r`.
fn circle_entry(p: C64, q: C64, c: C64, r: f64) -> f64 {
    let d = q - p;
    let f = p - c;
    let a = d.norm_sqr();
    let b = 2.0 * (f.re * d.re + f.im * d.im);
    let cc = f.norm_sqr() - r * r;
    let disc = (b * b - 4.0 * a * cc).max(0.0);
    ((-b - disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0)
}

/// Parameter at which `p -> q` leaves the open disk `|z - c| < r`.
fn circle_exit(p: C64, q: C64, c: C64, r: f64) -> f64 {
    let d = q - p;
    let f = p - c;
    let a = d.norm_sqr();
    let b = 2.0 * (f.re * d.re + f.im * d.im);
    let cc = f.norm_sqr() - r * r;
    let disc = (b * b - 4.0 * a * cc).max(0.0);
    ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0)
}

/// Runs one Brownian path from `z0` until it leaves the region.
pub fn run_exit<R: Rng + ?Sized>(
    region: &Region,
    z0: C64,
    policy: &StepPolicy,
    rng: &mut R,
    mut occ: Option<&mut Occupation>,
) -> Result<(C64, BoundaryId, u64)> {
    let mut z = z0;
    let mut steps = 0u64;
    loop {
        steps += 1;
        if steps > policy.max_steps {
            return Err(Error::StepBudget(policy.max_steps));
        }
        let (d, comp) = region.nearest(z);
        if d <= policy.eps_hit {
            let (p, side) = region.project(z, comp);
            return Ok((p, region.id(comp, side), steps));
        }
        if d > policy.eps_wos {
            if let Some(o) = occ.as_deref_mut() {
                o.ball(z, d, rng);
            }
            z += unit_circle(rng) * d;
        } else {
            let q = z + gaussian_step(rng, policy.dt_euler);
            if let Some(o) = occ.as_deref_mut() {
                o.point(z, policy.dt_euler);
            }
            if let Some((_, p, comp, side)) = region.crossing(z, q) {
                let (p, side) = match comp {
                    Comp::Slit(_) => (p, side),
                    _ => (region.project(p, comp).0, side),
                };
                return Ok((p, region.id(comp, side), steps));
            }
            z = q;
        }
    }
}

/// Samples the exit of Brownian motion started at `z0` from the domain.
pub fn sample_bm_exit(
    domain: &Domain,
    z0: C64,
    policy: &StepPolicy,
    stream: RngStream,
    cells: Option<&[Cell]>,
) -> Result<ExitSample> {
    policy.validate()?;
    if !domain.contains(z0) {
        return Err(Error::outside(z0, "sample_bm_exit needs an interior start"));
    }
    let region = Region::new(domain);
    let mut rng = stream.rng();
    let mut occ = cells.map(|c| Occupation::new(c, domain));
    let (point, boundary, steps) = run_exit(&region, z0, policy, &mut rng, occ.as_mut())?;
    Ok(ExitSample { point, boundary, steps, occupation: occ.map(|o| o.path) })
}

/// Monte Carlo estimate of the harmonic measure of hole `i` from `z`.
pub fn harmonic_measure_hole(domain: &Domain, z: C64, i: usize, stream: RngStream, n: u64) -> Result<Estimate> {
    if i == 0 || i > domain.n_holes() {
        return Err(Error::InvalidArgument(format!("hole index {i} out of range")));
    }
    if !domain.contains(z) {
        return Err(Error::outside(z, "harmonic_measure_hole needs an interior point"));
    }
    let region = Region::new(domain);
    let policy = StepPolicy::for_domain(domain);
    let hits = crate::parallel::map_ranges(n, |range| -> Result<u64> {
        let mut k = 0;
        for p in range {
            let mut rng = stream.path(p).rng();
            let (_, id, _) = run_exit(&region, z, &policy, &mut rng, None)?;
            if id.index() == i {
                k += 1;
            }
        }
        Ok(k)
    });
    let mut total = 0;
    for h in hits {
        total += h?;
    }
    Ok(proportion(total, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    #[test]
    fn halfplane_exit_is_on_real_line_and_reproducible() {
        let d = Domain::halfplane();
        let p = StepPolicy::for_domain(&d);
        let a = sample_bm_exit(&d, C64::i(), &p, RngStream::new(3, 9), None).unwrap();
        let b = sample_bm_exit(&d, C64::i(), &p, RngStream::new(3, 9), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.boundary, BoundaryId::A0);
        assert_eq!(a.point.im, 0.0);
    }

    #[test]
    fn halfplane_harmonic_measure_of_unit_interval() {
        let d = Domain::halfplane();
        let region = Region::new(&d);
        let p = StepPolicy::for_domain(&d);
        let n = 20000u64;
        let s = RngStream::new(11, 0);
        let mut k = 0;
        for i in 0..n {
            let (x, _, _) = run_exit(&region, C64::i(), &p, &mut s.path(i).rng(), None).unwrap();
            if x.re.abs() <= 1.0 {
                k += 1;
            }
        }
        let e = proportion(k, n);
        assert!((e.value - 0.5).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn slit_sides_are_reported() {
        let d = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let region = Region::new(&d);
        let p = StepPolicy::for_domain(&d);
        let s = RngStream::new(5, 0);
        let mut top = 0;
        let mut bottom = 0;
        for i in 0..2000 {
            let (x, id, _) = run_exit(&region, C64::new(0.0, 1.01), &p, &mut s.path(i).rng(), None).unwrap();
            if let BoundaryId::Hole(1, side) = id {
                assert!((x.im - 1.0).abs() < 1e-12);
                match side.unwrap() {
                    Side::Top => top += 1,
                    Side::Bottom => bottom += 1,
                }
            }
        }
        assert!(top > 1500, "top {top}, bottom {bottom}");
    }

    #[test]
    fn annulus_harmonic_measure() {
        let r = std::f64::consts::E;
        let d = Domain::Annulus { r };
        let z = C64::new(r.sqrt(), 0.0);
        let e = harmonic_measure_hole(&d, z, 1, RngStream::new(1, 1), 20000).unwrap();
        assert!((e.value - 0.5).abs() < 4.0 * e.stderr, "{e:?}");
    }
}
