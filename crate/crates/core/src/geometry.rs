//! Domain descriptions, region predicates and explicit conformal primitives.
//!
//! A domain is the complement of a killing boundary `A0` and finitely many
//! holes `A1..An`. Three families are supported: chordal standard domains
//! (upper half-plane minus horizontal slits), the annulus `1 < |z| < r`, and
//! the upper half-plane minus slits and closed disks with an optional compact
//! hull attached to the real line.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// A point of the plane. Finite components are checked at API boundaries.
pub type ComplexPoint = C64;

/// Rejects points with NaN or infinite components.
pub fn check_finite(z: C64) -> Result<C64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::InvalidArgument(format!("non-finite point {z}")))
    }
}

/// Which side of a horizontal slit a boundary point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Bottom,
}

/// Distance from `z` to the segment `[a, b]` and the parameter of the nearest
/// point in [0, 1].
#[inline]
pub fn dist_to_segment(z: C64, a: C64, b: C64) -> (f64, f64) {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 == 0.0 { 0.0 } else { (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0) };
    ((z - (a + d * t)).norm(), t)
}

/// Intersection parameter `s` in [0, 1] along `p -> q` with segment `[a, b]`.
pub fn segment_intersection(p: C64, q: C64, a: C64, b: C64) -> Option<f64> {
    let r = q - p;
    let s = b - a;
    let cross = r.re * s.im - r.im * s.re;
    if cross.abs() < 1e-300 {
        return None;
    }
    let ap = a - p;
    let t = (ap.re * s.im - ap.im * s.re) / cross;
    let u = (ap.re * r.im - ap.im * r.re) / cross;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// A horizontal slit `[x1 + iy, x2 + iy]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slit {
    pub y: f64,
    pub x1: f64,
    pub x2: f64,
}

impl Slit {
    pub fn new(y: f64, x1: f64, x2: f64) -> Result<Self> {
        let s = Slit { y, x1, x2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y.is_finite() && self.x1.is_finite() && self.x2.is_finite()) {
            return Err(Error::Domain("slit has non-finite coordinates".into()));
        }
        if self.y <= 0.0 {
            return Err(Error::Domain(format!("slit height {} must be positive", self.y)));
        }
        if self.x1 >= self.x2 {
            return Err(Error::Domain(format!("slit needs x1 < x2, got [{}, {}]", self.x1, self.x2)));
        }
        Ok(())
    }

    pub fn left(&self) -> C64 {
        C64::new(self.x1, self.y)
    }

    pub fn right(&self) -> C64 {
        C64::new(self.x2, self.y)
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.x1 + self.x2), self.y)
    }

    pub fn half_length(&self) -> f64 {
        0.5 * (self.x2 - self.x1)
    }

    /// True when `z` lies on the closed segment.
    pub fn on_slit(&self, z: C64) -> bool {
        z.im == self.y && z.re >= self.x1 && z.re <= self.x2
    }

    #[inline]
    pub fn dist(&self, z: C64) -> f64 {
        let dx = if z.re < self.x1 {
            self.x1 - z.re
        } else if z.re > self.x2 {
            z.re - self.x2
        } else {
            0.0
        };
        let dy = z.im - self.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Nearest slit point and the side it is approached from.
    pub fn project(&self, z: C64) -> (C64, Side) {
        let x = z.re.clamp(self.x1, self.x2);
        let side = if z.im >= self.y { Side::Top } else { Side::Bottom };
        (C64::new(x, self.y), side)
    }

    fn normalized(&self, z: C64) -> C64 {
        (z - self.center()) * (2.0 / self.half_length())
    }
}

/// Closed disk hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disk {
    pub fn center(&self) -> C64 {
        C64::new(self.cx, self.cy)
    }

    #[inline]
    pub fn dist(&self, z: C64) -> f64 {
        ((z - self.center()).norm() - self.r).max(0.0)
    }
}

/// A hole of a half-plane domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Hole {
    Slit(Slit),
    Disk(Disk),
}

impl Hole {
    #[inline]
    pub fn dist(&self, z: C64) -> f64 {
        match self {
            Hole::Slit(s) => s.dist(z),
            Hole::Disk(d) => d.dist(z),
        }
    }

    /// True when `z` belongs to the closed hole.
    pub fn covers(&self, z: C64) -> bool {
        match self {
            Hole::Slit(s) => s.on_slit(z),
            Hole::Disk(d) => (z - d.center()).norm() <= d.r,
        }
    }

    /// Conformal transport of the hole's exterior onto `|zeta| > 1`,
    /// fixing infinity.
    pub fn to_disk(&self, z: C64) -> Result<C64> {
        match self {
            Hole::Slit(s) => slit_to_disk(s, z),
            Hole::Disk(d) => {
                let w = (z - d.center()) / d.r;
                if w.norm() <= 1.0 {
                    Err(Error::outside(z, "inside disk hole"))
                } else {
                    Ok(w)
                }
            }
        }
    }

    /// Inverse of [`Hole::to_disk`].
    pub fn from_disk(&self, zeta: C64) -> C64 {
        match self {
            Hole::Slit(s) => s.center() + (zeta + zeta.inv()) * (0.5 * s.half_length()),
            Hole::Disk(d) => d.center() + zeta * d.r,
        }
    }

    /// Derivative of [`Hole::from_disk`].
    pub fn from_disk_derivative(&self, zeta: C64) -> C64 {
        match self {
            Hole::Slit(s) => (C64::new(1.0, 0.0) - (zeta * zeta).inv()) * (0.5 * s.half_length()),
            Hole::Disk(d) => C64::new(d.r, 0.0),
        }
    }

    /// Smallest and largest real and imaginary parts of the hole.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        match self {
            Hole::Slit(s) => (s.x1, s.x2, s.y, s.y),
            Hole::Disk(d) => (d.cx - d.r, d.cx + d.r, d.cy - d.r, d.cy + d.r),
        }
    }

    /// Largest modulus of a hole point.
    pub fn extent(&self) -> f64 {
        match self {
            Hole::Slit(s) => s.left().norm().max(s.right().norm()),
            Hole::Disk(d) => d.center().norm() + d.r,
        }
    }
}

/// A compact half-plane hull attached to the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Hull {
    /// The segment `[x, x + i height]`.
    VerticalSlit { x: f64, height: f64 },
    /// The closed half-disk of the given radius centred at `x`.
    HalfDisk { x: f64, radius: f64 },
    /// A simple polyline starting on the real line.
    Polyline { points: Vec<C64> },
}

impl Hull {
    pub fn validate(&self) -> Result<()> {
        match self {
            Hull::VerticalSlit { x, height } => {
                if !x.is_finite() || !(*height >= 0.0) {
                    return Err(Error::Domain("vertical slit hull needs height >= 0".into()));
                }
            }
            Hull::HalfDisk { x, radius } => {
                if !x.is_finite() || !(*radius >= 0.0) {
                    return Err(Error::Domain("half-disk hull needs radius >= 0".into()));
                }
            }
            Hull::Polyline { points } => {
                if points.is_empty() {
                    return Err(Error::Domain("polyline hull needs at least one point".into()));
                }
                if points[0].im != 0.0 {
                    return Err(Error::Domain("polyline hull must start on the real line".into()));
                }
                if points[1..].iter().any(|p| p.im <= 0.0) {
                    return Err(Error::Domain("polyline hull must stay in the upper half-plane".into()));
                }
                for p in points {
                    check_finite(*p)?;
                }
                if polyline_self_intersects(points) {
                    return Err(Error::Domain("polyline hull is not simple".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Hull::VerticalSlit { height, .. } => *height == 0.0,
            Hull::HalfDisk { radius, .. } => *radius == 0.0,
            Hull::Polyline { points } => points.len() < 2,
        }
    }

    /// Distance from `z` to the hull.
    #[inline]
    pub fn dist(&self, z: C64) -> f64 {
        match self {
            Hull::VerticalSlit { x, height } => dist_to_segment(z, C64::new(*x, 0.0), C64::new(*x, *height)).0,
            Hull::HalfDisk { x, radius } => {
                let w = z - C64::new(*x, 0.0);
                if w.im >= 0.0 {
                    (w.norm() - radius).max(0.0)
                } else {
                    dist_to_segment(z, C64::new(x - radius, 0.0), C64::new(x + radius, 0.0)).0
                }
            }
            Hull::Polyline { points } => {
                points.windows(2).map(|w| dist_to_segment(z, w[0], w[1]).0).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Nearest hull point to `z`.
    pub fn project(&self, z: C64) -> C64 {
        match self {
            Hull::VerticalSlit { x, height } => {
                let (_, t) = dist_to_segment(z, C64::new(*x, 0.0), C64::new(*x, *height));
                C64::new(*x, t * height)
            }
            Hull::HalfDisk { x, radius } => {
                let w = z - C64::new(*x, 0.0);
                if w.norm() == 0.0 {
                    C64::new(*x, *radius)
                } else {
                    C64::new(*x, 0.0) + w * (*radius / w.norm())
                }
            }
            Hull::Polyline { points } => {
                let mut best = (f64::INFINITY, points[0]);
                for w in points.windows(2) {
                    let (d, t) = dist_to_segment(z, w[0], w[1]);
                    if d < best.0 {
                        best = (d, w[0] + (w[1] - w[0]) * t);
                    }
                }
                best.1
            }
        }
    }

    /// True when `z` belongs to the closed hull.
    pub fn covers(&self, z: C64) -> bool {
        match self {
            Hull::HalfDisk { x, radius } => z.im >= 0.0 && (z - C64::new(*x, 0.0)).norm() <= *radius,
            _ => self.dist(z) == 0.0,
        }
    }

    /// Segments approximating the hull boundary, used for crossing tests.
    pub fn segments(&self) -> Vec<(C64, C64)> {
        match self {
            Hull::VerticalSlit { x, height } => vec![(C64::new(*x, 0.0), C64::new(*x, *height))],
            Hull::HalfDisk { x, radius } => {
                let n = 128;
                (0..n)
                    .map(|k| {
                        let a = std::f64::consts::PI * k as f64 / n as f64;
                        let b = std::f64::consts::PI * (k + 1) as f64 / n as f64;
                        (
                            C64::new(*x, 0.0) + C64::from_polar(*radius, a),
                            C64::new(*x, 0.0) + C64::from_polar(*radius, b),
                        )
                    })
                    .collect()
            }
            Hull::Polyline { points } => points.windows(2).map(|w| (w[0], w[1])).collect(),
        }
    }

    /// Largest modulus of a hull point.
    pub fn extent(&self) -> f64 {
        match self {
            Hull::VerticalSlit { x, height } => C64::new(*x, *height).norm(),
            Hull::HalfDisk { x, radius } => x.abs() + radius,
            Hull::Polyline { points } => points.iter().map(|p| p.norm()).fold(0.0, f64::max),
        }
    }

    /// `rad(A)`: the smallest radius of a disk centred on the real line that
    /// contains the hull.
    pub fn rad(&self) -> f64 {
        self.rad_and_center().0
    }

    /// Minimising centre of [`Hull::rad`].
    pub fn rad_and_center(&self) -> (f64, f64) {
        match self {
            Hull::VerticalSlit { x, height } => (*height, *x),
            Hull::HalfDisk { x, radius } => (*radius, *x),
            Hull::Polyline { points } => {
                let f = |c: f64| points.iter().map(|p| (p - C64::new(c, 0.0)).norm()).fold(0.0, f64::max);
                let mut lo = points.iter().map(|p| p.re).fold(f64::INFINITY, f64::min);
                let mut hi = points.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
                for _ in 0..200 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if f(m1) <= f(m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let c = 0.5 * (lo + hi);
                (f(c), c)
            }
        }
    }
}

/// True when two non-adjacent segments of the polyline intersect.
pub fn polyline_self_intersects(points: &[C64]) -> bool {
    let n = points.len();
    if n < 4 {
        return false;
    }
    for i in 0..n - 1 {
        for j in i + 2..n - 1 {
            if segment_intersection(points[i], points[i + 1], points[j], points[j + 1]).is_some() {
                return true;
            }
        }
    }
    false
}

/// Killing boundary or hole index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryId {
    /// The killing boundary `A0` (including an attached hull).
    A0,
    /// Hole `A_i`, numbered from 1, with the side for slits.
    Hole(usize, Option<Side>),
}

impl BoundaryId {
    /// 0 for `A0`, `i` for hole `A_i`.
    pub fn index(&self) -> usize {
        match self {
            BoundaryId::A0 => 0,
            BoundaryId::Hole(i, _) => *i,
        }
    }
}

/// A finitely connected domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// Upper half-plane minus horizontal slits; `A0` is the closed lower
    /// half-plane.
    ChordalStandard { slits: Vec<Slit> },
    /// `1 < |z| < r` with `A1` the closed unit disk and killing circle
    /// `|z| = r`.
    Annulus { r: f64 },
    /// Upper half-plane minus slits and disks, with an optional hull attached
    /// to the real line as part of `A0`.
    HalfplaneHoles {
        holes: Vec<Hole>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hull: Option<Hull>,
    },
}

impl Domain {
    /// The upper half-plane with no holes.
    pub fn halfplane() -> Self {
        Domain::ChordalStandard { slits: vec![] }
    }

    pub fn chordal(slits: Vec<Slit>) -> Result<Self> {
        let d = Domain::ChordalStandard { slits };
        d.validate()?;
        Ok(d)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Domain = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }

    /// The holes in order, numbered from 1 by position.
    pub fn holes(&self) -> Vec<Hole> {
        match self {
            Domain::ChordalStandard { slits } => slits.iter().map(|s| Hole::Slit(*s)).collect(),
            Domain::Annulus { .. } => vec![Hole::Disk(Disk { cx: 0.0, cy: 0.0, r: 1.0 })],
            Domain::HalfplaneHoles { holes, .. } => holes.clone(),
        }
    }

    pub fn n_holes(&self) -> usize {
        match self {
            Domain::ChordalStandard { slits } => slits.len(),
            Domain::Annulus { .. } => 1,
            Domain::HalfplaneHoles { holes, .. } => holes.len(),
        }
    }

    pub fn hull(&self) -> Option<&Hull> {
        match self {
            Domain::HalfplaneHoles { hull: Some(h), .. } if !h.is_empty() => Some(h),
            _ => None,
        }
    }

    pub fn is_annulus(&self) -> bool {
        matches!(self, Domain::Annulus { .. })
    }

    /// Same domain with a different hull.
    pub fn with_hull(&self, hull: Option<Hull>) -> Result<Self> {
        let holes = match self {
            Domain::Annulus { .. } => return Err(Error::Domain("the annulus has no attached hull".into())),
            _ => self.holes(),
        };
        let d = Domain::HalfplaneHoles { holes, hull };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Annulus { r } => {
                if !(r.is_finite() && *r > 1.0) {
                    return Err(Error::Domain(format!("annulus needs r > 1, got {r}")));
                }
                return Ok(());
            }
            Domain::ChordalStandard { slits } => {
                for s in slits {
                    s.validate()?;
                }
            }
            Domain::HalfplaneHoles { holes, hull } => {
                for h in holes {
                    match h {
                        Hole::Slit(s) => s.validate()?,
                        Hole::Disk(d) => {
                            if !(d.r > 0.0 && d.cx.is_finite() && d.cy.is_finite()) {
                                return Err(Error::Domain("disk hole needs r > 0".into()));
                            }
                            if d.cy - d.r <= 0.0 {
                                return Err(Error::Domain(
                                    "disk hole must lie strictly in the upper half-plane".into(),
                                ));
                            }
                        }
                    }
                }
                if let Some(h) = hull {
                    h.validate()?;
                    for (i, hole) in holes.iter().enumerate() {
                        let d = hull_hole_distance(h, hole);
                        if d <= 0.0 {
                            return Err(Error::Domain(format!("hull meets hole {}", i + 1)));
                        }
                    }
                }
            }
        }
        let holes = self.holes();
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                if hole_distance(&holes[i], &holes[j]) <= 0.0 {
                    return Err(Error::Domain(format!("holes {} and {} are not disjoint", i + 1, j + 1)));
                }
            }
        }
        Ok(())
    }

    /// True iff `z` is an interior point of the domain.
    pub fn contains(&self, z: C64) -> bool {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return false;
        }
        match self {
            Domain::Annulus { r } => {
                let m = z.norm();
                m > 1.0 && m < *r
            }
            _ => {
                if z.im <= 0.0 {
                    return false;
                }
                if let Some(h) = self.hull() {
                    if h.covers(z) {
                        return false;
                    }
                }
                !self.holes().iter().any(|h| h.covers(z))
            }
        }
    }

    /// Euclidean distance from `z` to the boundary.
    pub fn dist_boundary(&self, z: C64) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::outside(z, "dist_boundary needs an interior point"));
        }
        Ok(self.nearest(z).0)
    }

    /// Distance to the nearest boundary component and that component.
    pub fn nearest(&self, z: C64) -> (f64, BoundaryId) {
        match self {
            Domain::Annulus { r } => {
                let m = z.norm();
                let d0 = r - m;
                let d1 = m - 1.0;
                if d0 <= d1 {
                    (d0, BoundaryId::A0)
                } else {
                    (d1, BoundaryId::Hole(1, None))
                }
            }
            _ => {
                let mut best = (z.im, BoundaryId::A0);
                if let Some(h) = self.hull() {
                    let d = h.dist(z);
                    if d < best.0 {
                        best = (d, BoundaryId::A0);
                    }
                }
                for (i, h) in self.holes().iter().enumerate() {
                    let d = h.dist(z);
                    if d < best.0 {
                        best = (d, BoundaryId::Hole(i + 1, None));
                    }
                }
                best
            }
        }
    }

    /// Largest modulus of a hole or hull point (0 with nothing to enclose).
    pub fn hole_extent(&self) -> f64 {
        let mut e = self.holes().iter().map(|h| h.extent()).fold(0.0, f64::max);
        if let Some(h) = self.hull() {
            e = e.max(h.extent());
        }
        e
    }

    /// A characteristic length used to scale tolerances.
    pub fn scale(&self) -> f64 {
        match self {
            Domain::Annulus { r } => *r,
            _ => self.hole_extent().max(1.0),
        }
    }
}

fn hole_distance(a: &Hole, b: &Hole) -> f64 {
    match (a, b) {
        (Hole::Disk(p), Hole::Disk(q)) => (p.center() - q.center()).norm() - p.r - q.r,
        (Hole::Slit(s), Hole::Disk(d)) | (Hole::Disk(d), Hole::Slit(s)) => s.dist(d.center()) - d.r,
        (Hole::Slit(s), Hole::Slit(t)) => {
            if s.y == t.y {
                (t.x1 - s.x2).max(s.x1 - t.x2).max(0.0)
            } else {
                [s.left(), s.right()]
                    .iter()
                    .map(|p| t.dist(*p))
                    .chain([t.left(), t.right()].iter().map(|p| s.dist(*p)))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn hull_hole_distance(h: &Hull, hole: &Hole) -> f64 {
    let segs = h.segments();
    match hole {
        Hole::Disk(d) => h.dist(d.center()) - d.r,
        Hole::Slit(s) => {
            let mut m = h.dist(s.left()).min(h.dist(s.right()));
            for (a, b) in segs {
                if segment_intersection(a, b, s.left(), s.right()).is_some() {
                    return 0.0;
                }
                m = m.min(s.dist(a)).min(s.dist(b));
            }
            m
        }
    }
}

/// Principal-branch product `sqrt(t - 2) sqrt(t + 2)`, analytic off [-2, 2]
/// and asymptotic to `t` at infinity.
#[inline]
pub fn sqrt_t2m4(t: C64) -> C64 {
    (t - 2.0).sqrt() * (t + 2.0).sqrt()
}

/// Inverse Joukowski map onto `|zeta| >= 1` for `t` off [-2, 2].
#[inline]
pub fn joukowski_inverse(t: C64) -> C64 {
    let s = sqrt_t2m4(t);
    let z = (t + s) * 0.5;
    if z.norm_sqr() >= 1.0 {
        z
    } else {
        (t - s) * 0.5
    }
}

/// Conformal map from the complement of the slit onto `|zeta| > 1`: the
/// affine map sending the slit to [-2, 2] followed by the inverse Joukowski
/// branch of modulus greater than one.
pub fn slit_to_disk(slit: &Slit, z: C64) -> Result<C64> {
    check_finite(z)?;
    if slit.on_slit(z) {
        return Err(Error::outside(z, "point lies on the slit; use slit_to_disk_sided"));
    }
    Ok(joukowski_inverse(slit.normalized(z)))
}

/// Image of the boundary point `z` of the slit on the given side.
pub fn slit_to_disk_sided(slit: &Slit, z: C64, side: Side) -> Result<C64> {
    if !slit.on_slit(z) {
        return slit_to_disk(slit, z);
    }
    let t = slit.normalized(z).re.clamp(-2.0, 2.0);
    let theta = (t / 2.0).acos();
    Ok(match side {
        Side::Top => C64::from_polar(1.0, theta),
        Side::Bottom => C64::from_polar(1.0, -theta),
    })
}

/// Inverse of [`slit_to_disk`]: Joukowski map followed by the affine inverse.
pub fn disk_to_slit(slit: &Slit, zeta: C64) -> Result<C64> {
    check_finite(zeta)?;
    if zeta.norm() <= 1.0 {
        return Err(Error::outside(zeta, "inverse transport needs |zeta| > 1"));
    }
    Ok(Hole::Slit(*slit).from_disk(zeta))
}

/// The exponential cover `z -> e^{iz}` of the annulus by the strip
/// `0 < Im z < r`.
pub fn strip_to_annulus(r: f64, z: C64) -> C64 {
    let _ = r;
    (C64::i() * z).exp()
}

/// A sampled curve `gamma(t_k)` approximating a simple curve from the real
/// line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CurveSample {
    pub fn new(t: Vec<f64>, points: &[C64]) -> Result<Self> {
        let c = CurveSample { t, x: points.iter().map(|p| p.re).collect(), y: points.iter().map(|p| p.im).collect() };
        c.validate()?;
        Ok(c)
    }

    /// Samples `f` at the given times.
    pub fn from_fn(times: &[f64], f: impl Fn(f64) -> C64) -> Result<Self> {
        let pts: Vec<C64> = times.iter().map(|&t| f(t)).collect();
        CurveSample::new(times.to_vec(), &pts)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: CurveSample = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if n < 2 || self.x.len() != n || self.y.len() != n {
            return Err(Error::InvalidArgument(
                "curve sample needs at least two points and equal-length t, x, y".into(),
            ));
        }
        if self.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("curve times must increase strictly".into()));
        }
        let pts = self.points();
        if pts.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("consecutive curve points coincide".into()));
        }
        if pts[0].im != 0.0 {
            return Err(Error::InvalidArgument("curve must start on the real line".into()));
        }
        if pts[1..].iter().any(|p| !(p.im > 0.0)) {
            return Err(Error::InvalidArgument("curve must enter the upper half-plane".into()));
        }
        if polyline_self_intersects(&pts) {
            return Err(Error::InvalidArgument("curve polyline self-intersects".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<C64> {
        self.x.iter().zip(&self.y).map(|(&x, &y)| C64::new(x, y)).collect()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Point at time `t` by linear interpolation.
    pub fn at(&self, t: f64) -> C64 {
        let pts = self.points();
        if t <= self.t[0] {
            return pts[0];
        }
        for k in 1..self.t.len() {
            if t <= self.t[k] {
                let s = (t - self.t[k - 1]) / (self.t[k] - self.t[k - 1]);
                return pts[k - 1] + (pts[k] - pts[k - 1]) * s;
            }
        }
        *pts.last().unwrap()
    }

    /// Polyline of `gamma[0, t]`.
    pub fn prefix(&self, t: f64) -> Vec<C64> {
        let pts = self.points();
        let mut out = vec![pts[0]];
        for k in 1..self.t.len() {
            if self.t[k] < t {
                out.push(pts[k]);
            } else {
                break;
            }
        }
        let end = self.at(t);
        if *out.last().unwrap() != end {
            out.push(end);
        }
        out
    }

    /// `osc(gamma, delta, t0)`: the largest displacement over time gaps
    /// shorter than `delta` within [0, t0], evaluated on the sample grid.
    pub fn osc(&self, delta: f64, t0: f64) -> f64 {
        let pts = self.points();
        let mut m: f64 = 0.0;
        for i in 0..self.t.len() {
            if self.t[i] > t0 {
                break;
            }
            for j in i + 1..self.t.len() {
                if self.t[j] > t0 || self.t[j] - self.t[i] >= delta {
                    break;
                }
                m = m.max((pts[j] - pts[i]).norm());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_slit() -> Domain {
        Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn contains_examples() {
        let d = one_slit();
        assert!(d.contains(C64::new(0.0, 2.0)));
        assert!(!d.contains(C64::new(0.5, 1.0)));
        assert!(!d.contains(C64::new(0.0, -0.5)));
    }

    #[test]
    fn dist_boundary_examples() {
        assert_eq!(Domain::halfplane().dist_boundary(C64::i()).unwrap(), 1.0);
        assert_eq!(one_slit().dist_boundary(C64::new(0.0, 3.0)).unwrap(), 2.0);
        let a = Domain::Annulus { r: 2.0 };
        assert_eq!(a.dist_boundary(C64::new(1.5, 0.0)).unwrap(), 0.5);
        assert!(one_slit().dist_boundary(C64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn slit_to_disk_examples() {
        let s = Slit::new(1.0, -2.0, 2.0).unwrap();
        let top = slit_to_disk_sided(&s, C64::new(0.0, s.y), Side::Top).unwrap();
        assert!((top - C64::i()).norm() < 1e-15);
        let bottom = slit_to_disk_sided(&s, C64::new(0.0, s.y), Side::Bottom).unwrap();
        assert!((bottom + C64::i()).norm() < 1e-15);
        let end = slit_to_disk_sided(&s, C64::new(2.0, s.y), Side::Top).unwrap();
        assert!((end - 1.0).norm() < 1e-15);
        let near_end = slit_to_disk(&s, C64::new(2.0 + 1e-14, s.y)).unwrap();
        assert!((near_end - 1.0).norm() < 1e-6);
    }

    #[test]
    fn slit_to_disk_approaches_sides_continuously() {
        let s = Slit::new(1.0, -1.0, 3.0).unwrap();
        let z = C64::new(0.3, 1.0);
        let above = slit_to_disk(&s, z + C64::new(0.0, 1e-12)).unwrap();
        let below = slit_to_disk(&s, z - C64::new(0.0, 1e-12)).unwrap();
        assert!((above - slit_to_disk_sided(&s, z, Side::Top).unwrap()).norm() < 1e-5);
        assert!((below - slit_to_disk_sided(&s, z, Side::Bottom).unwrap()).norm() < 1e-5);
        assert!(above.im > 0.0 && below.im < 0.0);
    }

    #[test]
    fn strip_to_annulus_examples() {
        assert!((strip_to_annulus(1.0, C64::new(0.0, 0.0)) - 1.0).norm() < 1e-15);
        let z = C64::new(0.3, 0.7);
        assert!((strip_to_annulus(1.0, z).norm() - (-0.7f64).exp()).abs() < 1e-15);
        let p = C64::new(2.0 * std::f64::consts::PI, 0.0);
        assert!((strip_to_annulus(1.0, z + p) - strip_to_annulus(1.0, z)).norm() < 1e-12);
    }

    #[test]
    fn domain_json_round_trip() {
        let s = r#"{"type":"chordal_standard","slits":[{"y":1.0,"x1":-1.0,"x2":1.0}]}"#;
        let d = Domain::from_json(s).unwrap();
        assert_eq!(d, one_slit());
        let a = Domain::from_json(r#"{"type":"annulus","r":2.5}"#).unwrap();
        assert_eq!(a, Domain::Annulus { r: 2.5 });
        let h = Domain::from_json(
            r#"{"type":"halfplane_holes","holes":[{"type":"disk","cx":0,"cy":3,"r":1},{"type":"slit","y":1,"x1":2,"x2":3}],"hull":{"type":"vertical_slit","x":0,"height":0.5}}"#,
        )
        .unwrap();
        assert_eq!(h.n_holes(), 2);
        assert!(Domain::from_json(r#"{"type":"annulus","r":0.5}"#).is_err());
        assert!(Domain::from_json(r#"{"type":"chordal_standard","slits":[{"y":-1,"x1":0,"x2":1}]}"#).is_err());
    }

    #[test]
    fn curve_sample_rejects_self_intersection() {
        let pts = [C64::new(0.0, 0.0), C64::new(0.0, 1.0), C64::new(1.0, 1.0), C64::new(1.0, 0.5), C64::new(-1.0, 0.5)];
        assert!(CurveSample::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], &pts).is_err());
    }

    #[test]
    fn rad_of_polyline_vertical_segment() {
        let h = Hull::Polyline { points: vec![C64::new(1.0, 0.0), C64::new(1.0, 2.0)] };
        let (r, c) = h.rad_and_center();
        assert!((r - 2.0).abs() < 1e-9 && (c - 1.0).abs() < 1e-6);
    }
}
