//! Boundary-integral solver for harmonic functions in the upper half-plane
//! minus finitely many curves.
//!
//! A harmonic function vanishing on the real line and at infinity is written
//! as a single layer with image charges,
//! `u(z) = (1/pi) int [log|z - conj g(t)| - log|z - g(t)|] mu(t) dt`,
//! whose complex potential is
//! `F(z) = (i/pi) int [log(z - conj g) - log(z - g)] mu dt` with `Im F = u`.
//! Open arcs carry the density `sum a_n T_n(s) / sqrt(1 - s^2)`; closed curves
//! a trigonometric polynomial. Collocation handles the logarithmic
//! self-interaction analytically; segments and circles use exact moments
//! everywhere.
//!
//! A component is either in Dirichlet mode (`u` prescribed) or in ER mode (`u`
//! equal to prescribed data plus an unknown constant, with prescribed total
//! charge). The flux of `u` away from a component equals `-2` times its
//! charge.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::geometry::{sqrt_t2m4, Domain, Hole};
use crate::{Error, Result, C64};

/// Chebyshev expansion of an open curve on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct ChebCurve {
    c: Vec<C64>,
    dc: Vec<C64>,
}

fn clenshaw(c: &[C64], s: f64) -> C64 {
    let mut b1 = C64::new(0.0, 0.0);
    let mut b2 = C64::new(0.0, 0.0);
    for k in (1..c.len()).rev() {
        let b0 = c[k] + b1 * (2.0 * s) - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + b1 * s - b2
}

impl ChebCurve {
    /// Interpolates `f` at `p` Chebyshev points of the first kind.
    pub fn from_fn(f: impl Fn(f64) -> C64, p: usize) -> Self {
        let vals: Vec<C64> = Self::nodes(p).into_iter().map(f).collect();
        Self::from_values(&vals)
    }

    /// The `p` Chebyshev points of the first kind, in decreasing order.
    pub fn nodes(p: usize) -> Vec<f64> {
        (0..p).map(|j| (PI * (j as f64 + 0.5) / p as f64).cos()).collect()
    }

    /// Interpolant through values at [`ChebCurve::nodes`].
    pub fn from_values(vals: &[C64]) -> Self {
        let p = vals.len();
        let mut c = vec![C64::new(0.0, 0.0); p];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for (j, v) in vals.iter().enumerate() {
                s += v * (PI * k as f64 * (j as f64 + 0.5) / p as f64).cos();
            }
            *ck = s * (2.0 / p as f64);
        }
        c[0] *= 0.5;
        let mut dc = vec![C64::new(0.0, 0.0); p + 1];
        for k in (1..p).rev() {
            dc[k - 1] = dc[k + 1] + c[k] * (2.0 * k as f64);
        }
        dc[0] *= 0.5;
        dc.truncate(p.max(1));
        ChebCurve { c, dc }
    }

    pub fn point(&self, s: f64) -> C64 {
        clenshaw(&self.c, s)
    }

    pub fn deriv(&self, s: f64) -> C64 {
        clenshaw(&self.dc, s)
    }

    /// Magnitude of the trailing coefficients relative to the leading ones.
    pub fn tail(&self) -> f64 {
        let n = self.c.len();
        let head = self.c.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let tail = self.c[n - n / 8..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        tail / head.max(1e-300)
    }
}

/// Fourier expansion of a closed curve on `[0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct FourierCurve {
    coeffs: Vec<(f64, C64)>,
}

impl FourierCurve {
    /// Interpolates `f` at `p` equispaced angles.
    pub fn from_fn(f: impl Fn(f64) -> C64, p: usize) -> Self {
        let vals: Vec<C64> = Self::nodes(p).into_iter().map(f).collect();
        Self::from_values(&vals)
    }

    /// The `p` equispaced angles `2 pi j / p`.
    pub fn nodes(p: usize) -> Vec<f64> {
        (0..p).map(|j| TAU * j as f64 / p as f64).collect()
    }

    /// Trigonometric interpolant through values at [`FourierCurve::nodes`].
    pub fn from_values(vals: &[C64]) -> Self {
        let p = vals.len();
        let kmax = (p as i64 - 1) / 2;
        let mut coeffs = vec![];
        for k in -kmax..=kmax {
            let mut s = C64::new(0.0, 0.0);
            for (j, v) in vals.iter().enumerate() {
                s += v * C64::from_polar(1.0, -(k as f64) * TAU * j as f64 / p as f64);
            }
            coeffs.push((k as f64, s / p as f64));
        }
        FourierCurve { coeffs }
    }

    pub fn point(&self, t: f64) -> C64 {
        self.coeffs.iter().map(|(k, c)| c * C64::from_polar(1.0, k * t)).sum()
    }

    pub fn deriv(&self, t: f64) -> C64 {
        self.coeffs.iter().map(|(k, c)| c * C64::new(0.0, *k) * C64::from_polar(1.0, k * t)).sum()
    }
}

/// A boundary curve in the upper half-plane.
#[derive(Debug, Clone)]
pub enum Curve {
    Segment { a: C64, b: C64 },
    Circle { c: C64, r: f64 },
    Arc(ChebCurve),
    Loop(FourierCurve),
}

impl Curve {
    pub fn is_open(&self) -> bool {
        matches!(self, Curve::Segment { .. } | Curve::Arc(_))
    }

    /// Point at parameter `s` (`[-1, 1]` for open, angle for closed curves).
    pub fn point(&self, s: f64) -> C64 {
        match self {
            Curve::Segment { a, b } => (a + b) * 0.5 + (b - a) * (0.5 * s),
            Curve::Circle { c, r } => c + C64::from_polar(*r, s),
            Curve::Arc(f) => f.point(s),
            Curve::Loop(f) => f.point(s),
        }
    }

    pub fn deriv(&self, s: f64) -> C64 {
        match self {
            Curve::Segment { a, b } => (b - a) * 0.5,
            Curve::Circle { r, .. } => C64::new(0.0, *r) * C64::from_polar(1.0, s),
            Curve::Arc(f) => f.deriv(s),
            Curve::Loop(f) => f.deriv(s),
        }
    }

    /// Curve for a hole of the geometry module.
    pub fn from_hole(h: &Hole) -> Self {
        match h {
            Hole::Slit(s) => Curve::Segment { a: s.left(), b: s.right() },
            Hole::Disk(d) => Curve::Circle { c: d.center(), r: d.r },
        }
    }

    /// Image of this curve under a conformal map `f`, as an interpolant.
    pub fn mapped(&self, f: &dyn Fn(C64) -> C64, p: usize) -> Self {
        if self.is_open() {
            Curve::Arc(ChebCurve::from_fn(|s| f(self.point(s)), p))
        } else {
            Curve::Loop(FourierCurve::from_fn(|t| f(self.point(t)), p))
        }
    }
}

/// Discretisation sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BieConfig {
    /// Collocation points per open arc.
    pub n_open: usize,
    /// Collocation points per closed curve (made odd).
    pub n_closed: usize,
}

impl Default for BieConfig {
    fn default() -> Self {
        BieConfig { n_open: 48, n_closed: 49 }
    }
}

#[derive(Debug, Clone)]
struct Comp {
    curve: Curve,
    open: bool,
    n: usize,
    colloc: Vec<f64>,
    colloc_pts: Vec<C64>,
    base_m: usize,
    arclen: f64,
    samples: Vec<C64>,
}

/// Quadrature nodes: Gauss-Chebyshev (open, weight `1/sqrt(1-s^2)` folded
/// into the basis) or shifted trapezoid (closed). Returns `(params, weight)`.
fn nodes(open: bool, m: usize) -> (Vec<f64>, f64) {
    if open {
        ((0..m).map(|k| (PI * (k as f64 + 0.5) / m as f64).cos()).collect(), PI / m as f64)
    } else {
        ((0..m).map(|k| TAU * (k as f64 + 0.5) / m as f64).collect(), TAU / m as f64)
    }
}

/// Basis values at parameter `s`: `T_n(s)` for open curves, or
/// `1, cos t, sin t, cos 2t, ..` for closed ones.
fn basis(open: bool, n: usize, s: f64, out: &mut [f64]) {
    if open {
        out[0] = 1.0;
        if n > 1 {
            out[1] = s;
        }
        for k in 2..n {
            out[k] = 2.0 * s * out[k - 1] - out[k - 2];
        }
    } else {
        out[0] = 1.0;
        let e = C64::from_polar(1.0, s);
        let mut p = C64::new(1.0, 0.0);
        let mut k = 1;
        while 2 * k - 1 < n {
            p *= e;
            out[2 * k - 1] = p.re;
            if 2 * k < n {
                out[2 * k] = p.im;
            }
            k += 1;
        }
    }
}

/// Exact moments of `log(zeta - s)` against `T_n(s)/sqrt(1-s^2)` on
/// `[-1, 1]` and their `zeta`-derivatives.
fn segment_moments(zeta: C64, n: usize, with_log: bool) -> (Vec<C64>, Vec<C64>) {
    let sq = sqrt_t2m4(2.0 * zeta) * 0.5;
    let w = zeta + sq;
    let winv = w.inv();
    let mut m = vec![C64::new(0.0, 0.0); if with_log { n } else { 0 }];
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut p = C64::new(1.0, 0.0);
    for k in 0..n {
        if with_log {
            m[k] = if k == 0 { (w * 0.5).ln() * PI } else { -p * (PI / k as f64) };
        }
        d[k] = p * PI / sq;
        p *= winv;
    }
    (m, d)
}

/// Exact moments of `log(zeta - r e^{i sigma t})` against the closed basis and
/// their `zeta`-derivatives; `sigma = -1` for the mirrored circle.
fn circle_moments(zeta: C64, r: f64, n: usize, sigma: f64, with_log: bool) -> (Vec<C64>, Vec<C64>) {
    let mut m = vec![C64::new(0.0, 0.0); if with_log { n } else { 0 }];
    let mut d = vec![C64::new(0.0, 0.0); n];
    if with_log {
        m[0] = zeta.ln() * TAU;
    }
    d[0] = zeta.inv() * TAU;
    let q = C64::new(r, 0.0) / zeta;
    let mut qm = C64::new(1.0, 0.0);
    let mut k = 1;
    while 2 * k - 1 < n {
        qm *= q;
        let kf = k as f64;
        if with_log {
            m[2 * k - 1] = -qm * (PI / kf);
        }
        d[2 * k - 1] = qm * PI / zeta;
        if 2 * k < n {
            if with_log {
                m[2 * k] = -qm * C64::new(0.0, sigma * PI / kf);
            }
            d[2 * k] = qm * C64::new(0.0, sigma * PI) / zeta;
        }
        k += 1;
    }
    (m, d)
}

/// A factorised boundary-integral discretisation of one domain.
#[derive(Debug, Clone)]
pub struct BieDomain {
    comps: Vec<Comp>,
    offsets: Vec<usize>,
    size: usize,
    lu_dirichlet: Arc<LU<f64, Dyn, Dyn>>,
    lu_er: Arc<LU<f64, Dyn, Dyn>>,
}

/// Solved density with one constant per component (zero in Dirichlet mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub coeffs: Vec<f64>,
    pub constants: Vec<f64>,
}

impl BieDomain {
    /// Discretises the upper half-plane minus the given curves.
    pub fn new(curves: Vec<Curve>, cfg: BieConfig) -> Result<Self> {
        let mut comps = vec![];
        for c in curves {
            let open = c.is_open();
            let n = if open { cfg.n_open } else { cfg.n_closed | 1 };
            let colloc: Vec<f64> = if open {
                (0..n).map(|j| (PI * (j as f64 + 0.5) / n as f64).cos()).collect()
            } else {
                (0..n).map(|j| TAU * j as f64 / n as f64).collect()
            };
            let colloc_pts: Vec<C64> = colloc.iter().map(|s| c.point(*s)).collect();
            let (sp, _) = nodes(open, 512);
            let samples: Vec<C64> = sp.iter().map(|s| c.point(*s)).collect();
            let mut arclen: f64 = samples.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            if !open {
                arclen += (samples[0] - samples[samples.len() - 1]).norm();
            }
            if samples.iter().any(|p| !(p.im > 0.0)) {
                return Err(Error::Domain("boundary curve must lie in the upper half-plane".into()));
            }
            comps.push(Comp { curve: c, open, n, colloc, colloc_pts, base_m: (4 * n).max(128), arclen, samples });
        }
        let mut offsets = vec![0];
        for c in &comps {
            offsets.push(offsets.last().unwrap() + c.n);
        }
        let size = *offsets.last().unwrap();
        let mut dom = BieDomain {
            comps,
            offsets,
            size,
            lu_dirichlet: Arc::new(DMatrix::<f64>::identity(1, 1).lu()),
            lu_er: Arc::new(DMatrix::<f64>::identity(1, 1).lu()),
        };
        let a = dom.assemble();
        let nc = dom.comps.len();
        let mut e = DMatrix::zeros(size + nc, size + nc);
        e.view_mut((0, 0), (size, size)).copy_from(&a);
        for k in 0..nc {
            for i in dom.offsets[k]..dom.offsets[k + 1] {
                e[(i, size + k)] = -1.0;
            }
            let col = dom.offsets[k];
            e[(size + k, col)] = if dom.comps[k].open { PI } else { TAU };
        }
        dom.lu_dirichlet = Arc::new(a.lu());
        dom.lu_er = Arc::new(e.lu());
        Ok(dom)
    }

    /// Boundary-integral discretisation of a half-plane domain without hull.
    pub fn from_domain(domain: &Domain, cfg: BieConfig) -> Result<Self> {
        match domain {
            Domain::Annulus { .. } => {
                Err(Error::InvalidArgument("the boundary-integral backend covers half-plane domains".into()))
            }
            _ => {
                if domain.hull().is_some() {
                    return Err(Error::InvalidArgument(
                        "the boundary-integral backend needs a domain without attached hull".into(),
                    ));
                }
                Self::new(domain.holes().iter().map(Curve::from_hole).collect(), cfg)
            }
        }
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    pub fn curve(&self, k: usize) -> &Curve {
        &self.comps[k].curve
    }

    /// Real single-layer row at target `z` for source component `k`:
    /// `(1/pi) int [log|z - conj g| - log|z - g|] basis_n`. `on` is the
    /// collocation index when `z` is a collocation point of `k`.
    fn row(&self, k: usize, z: C64, on: Option<usize>, out: &mut [f64]) {
        let c = &self.comps[k];
        let n = c.n;
        match c.curve {
            Curve::Segment { a, b } => {
                let m = (a + b) * 0.5;
                let h = (b - a) * 0.5;
                let (dm, _) = segment_moments((z - m) / h, n, true);
                let (im, _) = segment_moments((z - m.conj()) / h.conj(), n, true);
                for j in 0..n {
                    out[j] = (im[j].re - dm[j].re) / PI;
                }
            }
            Curve::Circle { c: ctr, r } => {
                let (dm, _) = circle_moments(z - ctr, r, n, 1.0, true);
                let (im, _) = circle_moments(z - ctr.conj(), r, n, -1.0, true);
                for j in 0..n {
                    out[j] = (im[j].re - dm[j].re) / PI;
                }
            }
            _ => match on {
                Some(i) => self.self_row(k, i, out),
                None => {
                    let m = self.eval_m(k, z);
                    let (sp, w) = nodes(c.open, m);
                    let mut b = vec![0.0; n];
                    out[..n].iter_mut().for_each(|v| *v = 0.0);
                    for s in sp {
                        let g = c.curve.point(s);
                        let kern = ((z - g.conj()).norm() / (z - g).norm()).ln();
                        basis(c.open, n, s, &mut b);
                        for j in 0..n {
                            out[j] += w * kern * b[j];
                        }
                    }
                    out[..n].iter_mut().for_each(|v| *v /= PI);
                }
            },
        }
    }

    fn self_row(&self, k: usize, i: usize, out: &mut [f64]) {
        let c = &self.comps[k];
        let n = c.n;
        let s0 = c.colloc[i];
        let z = c.colloc_pts[i];
        let m = c.base_m;
        let (sp, w) = nodes(c.open, m);
        let mut b = vec![0.0; n];
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        for s in sp {
            let g = c.curve.point(s);
            let sing = if c.open { (s0 - s).abs().ln() } else { (2.0 * (0.5 * (s0 - s)).sin()).abs().ln() };
            let smooth = (z - g.conj()).norm().ln() - ((z - g).norm().ln() - sing);
            basis(c.open, n, s, &mut b);
            for j in 0..n {
                out[j] += w * smooth * b[j];
            }
        }
        // Subtract the exact moments of the logarithmic singularity.
        if c.open {
            out[0] -= -PI * 2f64.ln();
            let mut t = vec![0.0; n];
            basis(true, n, s0, &mut t);
            for j in 1..n {
                out[j] -= -PI / j as f64 * t[j];
            }
        } else {
            let mut t = vec![0.0; n];
            basis(false, n, s0, &mut t);
            for j in 1..n {
                let mode = j.div_ceil(2);
                out[j] -= -PI / mode as f64 * t[j];
            }
        }
        out[..n].iter_mut().for_each(|v| *v /= PI);
    }

    /// Quadrature size for off-curve evaluation at `z` near component `k`.
    fn eval_m(&self, k: usize, z: C64) -> usize {
        let c = &self.comps[k];
        let d = c.samples.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min);
        let want = (12.0 * c.arclen / d.max(1e-12)).ceil() as usize;
        want.clamp(c.base_m, 20000)
    }

    fn assemble(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.size, self.size);
        let mut buf = vec![0.0; self.comps.iter().map(|c| c.n).max().unwrap_or(0)];
        for (j, cj) in self.comps.iter().enumerate() {
            for (i, z) in cj.colloc_pts.iter().enumerate() {
                let r = self.offsets[j] + i;
                for k in 0..self.comps.len() {
                    let on = if k == j { Some(i) } else { None };
                    self.row(k, *z, on, &mut buf);
                    for n in 0..self.comps[k].n {
                        a[(r, self.offsets[k] + n)] = buf[n];
                    }
                }
            }
        }
        a
    }

    fn rhs(&self, data: &dyn Fn(usize, C64) -> f64) -> DVector<f64> {
        let mut b = DVector::zeros(self.size);
        for (k, c) in self.comps.iter().enumerate() {
            for (i, z) in c.colloc_pts.iter().enumerate() {
                b[self.offsets[k] + i] = data(k, *z);
            }
        }
        b
    }

    /// Solves for `u` with `u = data(k, z)` on component `k`.
    pub fn solve_dirichlet(&self, data: &dyn Fn(usize, C64) -> f64) -> Result<Layer> {
        let b = self.rhs(data);
        let x = self
            .lu_dirichlet
            .solve(&b)
            .ok_or_else(|| Error::Singular("boundary-integral matrix is singular".into()))?;
        Ok(Layer { coeffs: x.iter().copied().collect(), constants: vec![0.0; self.comps.len()] })
    }

    /// Solves for `u` with `u = data(k, z) + c_k` on component `k` and total
    /// charge `charges[k]` (flux away from the component `-2 charges[k]`).
    pub fn solve_er(&self, data: &dyn Fn(usize, C64) -> f64, charges: &[f64]) -> Result<Layer> {
        let nc = self.comps.len();
        if charges.len() != nc {
            return Err(Error::InvalidArgument("one charge per component is required".into()));
        }
        let b0 = self.rhs(data);
        let mut b = DVector::zeros(self.size + nc);
        b.rows_mut(0, self.size).copy_from(&b0);
        for k in 0..nc {
            b[self.size + k] = charges[k];
        }
        let x = self.lu_er.solve(&b).ok_or_else(|| Error::Singular("boundary-integral matrix is singular".into()))?;
        Ok(Layer {
            coeffs: x.rows(0, self.size).iter().copied().collect(),
            constants: x.rows(self.size, nc).iter().copied().collect(),
        })
    }

    /// Layer potential at `z`.
    pub fn u(&self, layer: &Layer, z: C64) -> f64 {
        let mut buf = vec![0.0; self.comps.iter().map(|c| c.n).max().unwrap_or(0)];
        let mut s = 0.0;
        for k in 0..self.comps.len() {
            self.row(k, z, None, &mut buf);
            let a = &layer.coeffs[self.offsets[k]..self.offsets[k + 1]];
            s += a.iter().zip(&buf).map(|(x, y)| x * y).sum::<f64>();
        }
        s
    }

    /// Complex potential `F` with `Im F = u` and `F(infinity) = 0`, and its
    /// derivative. Charged components make `Re F` jump across a cut leaving
    /// the component to the left.
    pub fn complex(&self, layer: &Layer, z: C64) -> (C64, C64) {
        let mut f = C64::new(0.0, 0.0);
        let mut df = C64::new(0.0, 0.0);
        let i_pi = C64::new(0.0, 1.0 / PI);
        for (k, c) in self.comps.iter().enumerate() {
            let a = &layer.coeffs[self.offsets[k]..self.offsets[k + 1]];
            let n = c.n;
            match c.curve {
                Curve::Segment { a: p, b: q } => {
                    let m = (p + q) * 0.5;
                    let h = (q - p) * 0.5;
                    let (dm, dd) = segment_moments((z - m) / h, n, true);
                    let (im, id) = segment_moments((z - m.conj()) / h.conj(), n, true);
                    // log(z - g) = log h + log(zeta - s).
                    for j in 0..n {
                        let mut t = im[j] - dm[j];
                        if j == 0 {
                            t += (h.conj().ln() - h.ln()) * PI;
                        }
                        f += i_pi * t * a[j];
                        df += i_pi * (id[j] / h.conj() - dd[j] / h) * a[j];
                    }
                }
                Curve::Circle { c: ctr, r } => {
                    let (dm, dd) = circle_moments(z - ctr, r, n, 1.0, true);
                    let (im, id) = circle_moments(z - ctr.conj(), r, n, -1.0, true);
                    for j in 0..n {
                        f += i_pi * (im[j] - dm[j]) * a[j];
                        df += i_pi * (id[j] - dd[j]) * a[j];
                    }
                }
                _ => {
                    let m = self.eval_m(k, z);
                    let (sp, w) = nodes(c.open, m);
                    let mut b = vec![0.0; n];
                    let mut prev_d: Option<f64> = None;
                    let mut prev_i: Option<f64> = None;
                    for s in sp {
                        let g = c.curve.point(s);
                        basis(c.open, n, s, &mut b);
                        let mu: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                        let ld = unwrap_log(z - g, &mut prev_d);
                        let li = unwrap_log(z - g.conj(), &mut prev_i);
                        f += i_pi * (li - ld) * (w * mu);
                        df += i_pi * ((z - g.conj()).inv() - (z - g).inv()) * (w * mu);
                    }
                }
            }
        }
        (f, df)
    }

    /// Total charge of component `k`.
    pub fn charge(&self, layer: &Layer, k: usize) -> f64 {
        let a0 = layer.coeffs[self.offsets[k]];
        if self.comps[k].open {
            PI * a0
        } else {
            TAU * a0
        }
    }

    /// `sum_k int Im g_k mu_k`, the coefficient in `F(z) ~ -(2/pi) S / z`.
    pub fn im_moment(&self, layer: &Layer) -> f64 {
        let mut s = 0.0;
        for (k, c) in self.comps.iter().enumerate() {
            let a = &layer.coeffs[self.offsets[k]..self.offsets[k + 1]];
            let (sp, w) = nodes(c.open, c.base_m);
            let mut b = vec![0.0; c.n];
            for p in sp {
                basis(c.open, c.n, p, &mut b);
                let mu: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                s += w * c.curve.point(p).im * mu;
            }
        }
        s
    }

    /// Density per unit parameter of component `k` at parameter `s`
    /// (including the endpoint weight for open arcs).
    pub fn density(&self, layer: &Layer, k: usize, s: f64) -> f64 {
        let c = &self.comps[k];
        let a = &layer.coeffs[self.offsets[k]..self.offsets[k + 1]];
        let mut b = vec![0.0; c.n];
        basis(c.open, c.n, s, &mut b);
        let mu: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        if c.open {
            mu / (1.0 - s * s).max(1e-300).sqrt()
        } else {
            mu
        }
    }

    /// Largest collocation residual of `layer` against the data, a check on
    /// the discretisation.
    pub fn collocation_residual(&self, layer: &Layer, data: &dyn Fn(usize, C64) -> f64) -> f64 {
        let mut r: f64 = 0.0;
        for (k, c) in self.comps.iter().enumerate() {
            for (i, s) in c.colloc.iter().enumerate() {
                // Midpoints between collocation nodes probe off-node accuracy.
                let s2 = if c.open {
                    let t = (PI * (i as f64 + 1.0) / c.n as f64).cos();
                    if i + 1 < c.n {
                        t
                    } else {
                        *s
                    }
                } else {
                    s + PI / c.n as f64
                };
                let g = c.curve.point(s2);
                let nrm = c.curve.deriv(s2);
                let off = C64::new(-nrm.im, nrm.re) / nrm.norm() * 1e-7;
                let u = 0.5 * (self.u(layer, g + off) + self.u(layer, g - off));
                r = r.max((u - data(k, g) - layer.constants[k]).abs());
            }
        }
        r
    }
}

/// Logarithm of `w` continued from the previous value along a curve.
fn unwrap_log(w: C64, prev: &mut Option<f64>) -> C64 {
    let mut a = w.arg();
    if let Some(p) = *prev {
        let k = ((p - a) / TAU).round();
        a += k * TAU;
    }
    *prev = Some(a);
    C64::new(w.norm().ln(), a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    /// Harmonic measure of the disk `|z - ic| <= r` in the upper half-plane
    /// from the Moebius map onto an annulus.
    fn disk_h1(c: f64, r: f64, z: C64) -> f64 {
        let b = (c * c - r * r).sqrt();
        let t = |w: C64| (w - C64::new(0.0, b)) / (w + C64::new(0.0, b));
        let rho0 = t(C64::new(0.0, c - r)).norm();
        t(z).norm().ln() / rho0.ln()
    }

    #[test]
    fn disk_harmonic_measure() {
        let dom = BieDomain::new(vec![Curve::Circle { c: C64::new(0.0, 2.0), r: 1.0 }], BieConfig::default()).unwrap();
        let l = dom.solve_dirichlet(&|_, _| 1.0).unwrap();
        for z in [C64::new(0.5, 0.3), C64::new(3.0, 2.0), C64::new(-0.2, 3.5)] {
            let e = disk_h1(2.0, 1.0, z);
            assert!((dom.u(&l, z) - e).abs() < 1e-12, "{} {}", dom.u(&l, z), e);
        }
    }

    #[test]
    fn loop_matches_circle() {
        let circ = Curve::Circle { c: C64::new(0.3, 2.0), r: 0.7 };
        let lp = Curve::Loop(FourierCurve::from_fn(|t| C64::new(0.3, 2.0) + C64::from_polar(0.7, t), 64));
        let a = BieDomain::new(vec![circ], BieConfig::default()).unwrap();
        let b = BieDomain::new(vec![lp], BieConfig::default()).unwrap();
        let la = a.solve_dirichlet(&|_, z| z.re).unwrap();
        let lb = b.solve_dirichlet(&|_, z| z.re).unwrap();
        for z in [C64::new(0.5, 0.3), C64::new(2.0, 2.0), C64::new(0.3, 2.75)] {
            assert!((a.u(&la, z) - b.u(&lb, z)).abs() < 1e-10);
            let (fa, da) = a.complex(&la, z);
            let (fb, db) = b.complex(&lb, z);
            assert!((fa - fb).norm() < 1e-9, "{fa} {fb}");
            assert!((da - db).norm() < 1e-9);
        }
    }

    #[test]
    fn arc_matches_segment() {
        let s = Slit::new(1.0, -1.0, 1.5).unwrap();
        let seg = Curve::Segment { a: s.left(), b: s.right() };
        let arc = Curve::Arc(ChebCurve::from_fn(|t| seg.point(t), 8));
        let a = BieDomain::new(vec![seg], BieConfig::default()).unwrap();
        let b = BieDomain::new(vec![arc], BieConfig::default()).unwrap();
        let data = |_: usize, z: C64| -z.im / ((z.re - 0.3).powi(2) + z.im * z.im) / PI;
        let la = a.solve_er(&data, &[0.0]).unwrap();
        let lb = b.solve_er(&data, &[0.0]).unwrap();
        assert!((la.constants[0] - lb.constants[0]).abs() < 1e-9);
        for z in [C64::new(0.5, 0.3), C64::new(2.0, 2.0), C64::new(0.0, 1.05)] {
            let (fa, da) = a.complex(&la, z);
            let (fb, db) = b.complex(&lb, z);
            assert!((fa - fb).norm() < 1e-8, "{z} {fa} {fb}");
            assert!((da - db).norm() < 1e-7, "{z} {da} {db}");
        }
    }

    #[test]
    fn complex_potential_is_analytic_and_consistent() {
        let dom = BieDomain::new(
            vec![
                Curve::Segment { a: C64::new(-1.0, 1.0), b: C64::new(1.0, 1.0) },
                Curve::Circle { c: C64::new(3.0, 1.5), r: 0.5 },
            ],
            BieConfig::default(),
        )
        .unwrap();
        let l = dom.solve_er(&|_, z| -z.im, &[0.0, 0.0]).unwrap();
        let z = C64::new(0.4, 2.3);
        let (f, df) = dom.complex(&l, z);
        assert!((f.im - dom.u(&l, z)).abs() < 1e-12);
        let h = 1e-5;
        let (fp, _) = dom.complex(&l, z + h);
        let (fm, _) = dom.complex(&l, z - h);
        assert!(((fp - fm) / (2.0 * h) - df).norm() < 1e-7);
        // Far field: F ~ -(2/pi) S / z.
        let y = 1e6;
        let (ff, _) = dom.complex(&l, C64::new(0.0, y));
        let s = dom.im_moment(&l);
        assert!((ff * C64::new(0.0, y) + 2.0 / PI * s).norm() < 1e-5);
    }

    #[test]
    fn charged_layer_flux() {
        // A charged disk hole: flux of u away from it equals -2 q.
        let dom = BieDomain::new(vec![Curve::Circle { c: C64::new(0.0, 2.0), r: 0.5 }], BieConfig::default()).unwrap();
        let l = dom.solve_er(&|_, _| 0.0, &[1.0]).unwrap();
        let rr = 0.8;
        let m = 400;
        let mut flux = 0.0;
        for k in 0..m {
            let t = TAU * (k as f64 + 0.5) / m as f64;
            let e = C64::from_polar(1.0, t);
            let z = C64::new(0.0, 2.0) + e * rr;
            let (_, df) = dom.complex(&l, z);
            // grad u = (Im F', Re F') for u = Im F.
            let g = C64::new(df.im, df.re);
            flux += (g.re * e.re + g.im * e.im) * rr * TAU / m as f64;
        }
        assert!((flux + 2.0).abs() < 1e-9, "{flux}");
    }
}
