//! Harmonic conjugation and the canonical conformal maps: the complex ER
//! Poisson kernel, the normalizing map `phi_D` onto a chordal standard
//! domain, hull maps `h_A^D`, and the exponential maps built from ER Green's
//! functions.
//!
//! Backends: `analytic` (zero holes, annulus), `bie`/`chain` (the boundary
//! integral solver) and `grid` (finite differences with path conjugation).

pub mod conjugate;
mod grid;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brownian::GridConfig;
use crate::geometry::{Domain, Hole, Hull};
use crate::kernels::{
    circle_average, er_solver, grid_config, grid_green_er, grid_green_er_hole, grid_pk_er, infinity_radius,
    is_plain_halfplane, pk_er_infinity, Backend, BieConfig, Curve, ErSolver, KernelEstimate,
};
use crate::loewner::HullMap;
use crate::{Error, Result, C64};

pub use conjugate::{auto_path, conjugate, period, FnHarmonic, GridHarmonic, HarmonicEvaluator};
pub use grid::{grid_phi_correction, GridAnalytic};

/// Interpolation order for hole images under conformal maps.
const IMAGE_POINTS: usize = 256;

type MapFn = Arc<dyn Fn(C64) -> Result<C64> + Send + Sync>;

/// Which canonical map a result holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Chordal,
    Bilateral,
    Standard,
    Phi,
    Hull,
}

/// How the free constants of a map were fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub kind: MapKind,
    pub backend: String,
    pub rule: String,
}

/// A conformal map with its diagnostics.
///
/// `levels` holds the constant value on each hole image: the height
/// `Im f` for slit maps and the modulus `|f|` for the exponential maps.
/// `periods` holds the increment, around each hole (counterclockwise), of
/// the conjugate built by the map: `Re f` for slit maps and `v = -arg`
/// part of `-log f` for the exponential maps.
#[derive(Clone)]
pub struct ConformalMapResult {
    f: MapFn,
    pub normalization: Normalization,
    pub levels: Vec<f64>,
    pub periods: Vec<f64>,
    pub cr_residual: f64,
}

impl std::fmt::Debug for ConformalMapResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConformalMapResult")
            .field("normalization", &self.normalization)
            .field("levels", &self.levels)
            .field("periods", &self.periods)
            .field("cr_residual", &self.cr_residual)
            .finish()
    }
}

/// Serializable part of a [`ConformalMapResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub normalization: Normalization,
    pub levels: Vec<f64>,
    pub periods: Vec<f64>,
    pub cr_residual: f64,
}

impl ConformalMapResult {
    pub fn eval(&self, z: C64) -> Result<C64> {
        (self.f)(z)
    }

    pub fn function(&self) -> MapFn {
        self.f.clone()
    }

    pub fn record(&self) -> MapRecord {
        MapRecord {
            normalization: self.normalization.clone(),
            levels: self.levels.clone(),
            periods: self.periods.clone(),
            cr_residual: self.cr_residual,
        }
    }
}

fn backend_name(b: &Backend) -> String {
    match b {
        Backend::Analytic => "analytic",
        Backend::Series { .. } => "series",
        Backend::Bie { .. } => "bie",
        Backend::Chain { .. } => "chain",
        Backend::Grid { .. } => "grid",
        Backend::Mc { .. } => "mc",
    }
    .into()
}

fn unsupported(op: &str, b: &Backend) -> Error {
    Error::InvalidArgument(format!("{op} is not available with backend {b:?} on this domain"))
}

/// Largest relative Cauchy-Riemann defect `|f_y - i f_x| / |f_x|` over the
/// probes, with central differences of step `h`.
pub fn cr_residual(f: &dyn Fn(C64) -> Result<C64>, probes: &[C64], h: f64) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &z in probes {
        let fx = (f(z + h)? - f(z - h)?) / (2.0 * h);
        let fy = (f(z + C64::new(0.0, h))? - f(z - C64::new(0.0, h))?) / (2.0 * h);
        m = m.max((fy - C64::i() * fx).norm() / fx.norm().max(1e-300));
    }
    Ok(m)
}

/// Probe points for the Cauchy-Riemann check, at distance at least `gap`
/// from the boundary.
pub fn probe_points(domain: &Domain, gap: f64) -> Vec<C64> {
    let mut out = vec![];
    let ok = |z: C64| domain.contains(z) && domain.dist_boundary(z).map(|d| d >= gap).unwrap_or(false);
    match domain {
        Domain::Annulus { r } => {
            for k in 0..12 {
                let z = C64::from_polar(0.5 * (1.0 + r), std::f64::consts::TAU * (k as f64 + 0.25) / 12.0);
                if ok(z) {
                    out.push(z);
                }
            }
        }
        _ => {
            let rr = 1.2 * domain.hole_extent() + 0.5;
            for rad in [rr, 0.6 * rr, 1.8 * rr] {
                for k in 0..8 {
                    let z = C64::from_polar(rad, PI * (k as f64 + 0.5) / 8.0);
                    if ok(z) {
                        out.push(z);
                    }
                }
            }
        }
    }
    out
}

/// Counterclockwise rectangle around hole `k` (1-based) that separates it
/// from the other holes and the real line.
pub fn hole_loop(domain: &Domain, k: usize) -> Result<Vec<C64>> {
    let holes = domain.holes();
    let h = holes.get(k.wrapping_sub(1)).ok_or_else(|| Error::InvalidArgument(format!("no hole {k}")))?;
    let (x0, x1, y0, y1) = h.bbox();
    let mut m = 0.5 * y0;
    for (j, o) in holes.iter().enumerate() {
        if j + 1 != k {
            let (a, b, c, d) = o.bbox();
            let gx = (a - x1).max(x0 - b);
            let gy = (c - y1).max(y0 - d);
            m = m.min(0.45 * gx.max(gy));
        }
    }
    if let Some(hull) = domain.hull() {
        m = m.min(0.45 * hull.dist(C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))));
    }
    m = m.min(0.25 * (x1 - x0 + y1 - y0).max(0.2));
    if !(m > 0.0) {
        return Err(Error::Domain(format!("hole {k} cannot be separated by a rectangle")));
    }
    Ok(vec![C64::new(x0 - m, y0 - m), C64::new(x1 + m, y0 - m), C64::new(x1 + m, y1 + m), C64::new(x0 - m, y1 + m)])
}

/// Harmonic evaluator for `Im f` of an analytic `f` with derivative `df`.
fn im_part<'a>(
    domain: &'a Domain,
    f: &'a (dyn Fn(C64) -> (C64, C64) + Sync),
) -> FnHarmonic<impl Fn(C64) -> Result<f64> + Sync + 'a, impl Fn(C64) -> Result<C64> + Sync + 'a> {
    FnHarmonic {
        value: move |z: C64| Ok(f(z).0.im),
        gradient: move |z: C64| {
            let d = f(z).1;
            Ok(C64::new(d.im, d.re))
        },
        domain: domain.clone(),
        singular: vec![],
    }
}

/// Conjugate periods of `Im f` around every hole.
fn periods_of(domain: &Domain, f: &(dyn Fn(C64) -> (C64, C64) + Sync)) -> Result<Vec<f64>> {
    let v = im_part(domain, f);
    (1..=domain.n_holes()).map(|k| period(&v, &hole_loop(domain, k)?)).collect()
}

/// Conjugate periods of a grid harmonic function around every hole.
fn grid_periods(g: &GridAnalytic, scale_sign: f64) -> Result<Vec<f64>> {
    let v = GridHarmonic { sol: Arc::new(g.solution().clone()), scale: scale_sign };
    let d = g.domain();
    (1..=d.n_holes()).map(|k| period(&v, &hole_loop(d, k)?)).collect()
}

fn finish(
    f: MapFn,
    normalization: Normalization,
    levels: Vec<f64>,
    periods: Vec<f64>,
    domain: &Domain,
    step: f64,
) -> Result<ConformalMapResult> {
    let probes = probe_points(domain, 10.0 * step);
    let cr = cr_residual(&*f, &probes, step)?;
    Ok(ConformalMapResult { f, normalization, levels, periods, cr_residual: cr })
}

fn grid_step(h: f64) -> f64 {
    2.0 * h
}

/// Checks `z H(z) -> -pi H^ER(infinity, x)` at the far probe of a grid map.
fn far_probe_check(g: &GridAnalytic, x: f64, pi_h_inf: f64) -> Result<()> {
    let z = g.far_probe;
    let h = -(z - x).inv() + g.eval(z)?;
    let res = (z * h + pi_h_inf).norm();
    if res > 1e-3 {
        return Err(Error::Numerical(format!("complex Poisson kernel far-field mismatch {res:e}")));
    }
    Ok(())
}

/// The complex ER Poisson kernel `H^ER_D(., x)` as a map: `Im = pi H^ER` and
/// `z H -> -pi H^ER(infinity, x)`.
pub fn map_chordal(domain: &Domain, x: f64, backend: &Backend) -> Result<ConformalMapResult> {
    backend.validate()?;
    let norm = |b: &Backend| Normalization {
        kind: MapKind::Chordal,
        backend: backend_name(b),
        rule: format!("Im f = pi H^ER(., {x}); z f(z) -> -pi H^ER(infinity, {x})"),
    };
    if domain.is_annulus() {
        return Err(Error::InvalidArgument("map_chordal needs a half-plane domain".into()));
    }
    if is_plain_halfplane(domain) {
        let f: MapFn = Arc::new(move |z: C64| {
            if !(z.im > 0.0) {
                return Err(Error::outside(z, "upper half-plane"));
            }
            Ok(-(z - x).inv())
        });
        return finish(f, norm(&Backend::Analytic), vec![], vec![], domain, 1e-5);
    }
    match backend {
        Backend::Bie { .. } | Backend::Chain { .. } => {
            let s = Arc::new(er_solver(domain, backend)?);
            let layer = Arc::new(s.er_pk_layer(x)?);
            let levels = layer.constants.iter().map(|c| PI * c).collect();
            let (s2, l2) = (s.clone(), layer.clone());
            let fd = move |z: C64| {
                let (g, dg) = s2.bie().complex(&l2, z);
                (-(z - x).inv() + g * PI, (z - x).powi(-2) + dg * PI)
            };
            let periods = periods_of(domain, &fd)?;
            let d = domain.clone();
            let f: MapFn = Arc::new(move |z: C64| {
                if !d.contains(z) {
                    return Err(Error::outside(z, "domain"));
                }
                Ok(-(z - x).inv() + s.bie().complex(&layer, z).0 * PI)
            });
            finish(f, norm(backend), levels, periods, domain, 1e-5)
        }
        Backend::Grid { h } => {
            let r = infinity_radius(domain, x);
            let sol = grid_pk_er(domain, x, &grid_config(domain, *h, r))?;
            let levels = sol.constants.iter().map(|c| PI * c.unwrap_or(f64::NAN)).collect();
            let g = Arc::new(GridAnalytic::new(sol, PI)?);
            let pi_h_inf = PI * pk_er_infinity(domain, x, backend)?.value;
            far_probe_check(&g, x, pi_h_inf)?;
            let periods = grid_periods(&g, PI)?;
            let g2 = g.clone();
            let f: MapFn = Arc::new(move |z: C64| Ok(-(z - x).inv() + g2.eval(z)?));
            finish(f, norm(backend), levels, periods, domain, grid_step(*h))
        }
        _ => Err(unsupported("map_chordal", backend)),
    }
}

/// `H^ER_D(z, x)` (the complex ER Poisson kernel).
pub fn complex_pk(domain: &Domain, z: C64, x: f64, backend: &Backend) -> Result<C64> {
    if !domain.contains(z) {
        return Err(Error::outside(z, "domain"));
    }
    match backend {
        Backend::Bie { .. } | Backend::Chain { .. } if !is_plain_halfplane(domain) => {
            er_solver(domain, backend)?.complex_pk(z, x)
        }
        _ => map_chordal(domain, x, backend)?.eval(z),
    }
}

/// Curves of the holes' images under `f`.
fn image_curves(holes: &[Hole], f: &dyn Fn(C64) -> Result<C64>) -> Result<Vec<Curve>> {
    let bad = std::cell::RefCell::new(None);
    let g = |z: C64| match f(z) {
        Ok(w) => w,
        Err(e) => {
            bad.borrow_mut().get_or_insert_with(|| e.to_string());
            C64::new(f64::NAN, f64::NAN)
        }
    };
    let curves: Vec<Curve> = holes.iter().map(|h| Curve::from_hole(h).mapped(&g, IMAGE_POINTS)).collect();
    if let Some(e) = bad.into_inner() {
        return Err(Error::Numerical(format!("hole image evaluation failed: {e}")));
    }
    Ok(curves)
}

/// Image of hole `h` under `M(z) = -1/(z - x)`: exact circles for disks.
fn inverted_hole(h: &Hole, x: f64) -> Curve {
    match h {
        Hole::Disk(d) => {
            let c = d.center() - x;
            let den = c.norm_sqr() - d.r * d.r;
            Curve::Circle { c: -c.conj() / den, r: d.r / den.abs() }
        }
        Hole::Slit(_) => Curve::from_hole(h).mapped(&|z| -(z - x).inv(), IMAGE_POINTS),
    }
}

/// `phi_D` via the complex Poisson kernel of the inverted domain:
/// `phi_D(z) = H_{D*}(-1/(z - x), 0) + x - r(D*, 0)` with
/// `D* = M(D)`, `M(z) = -1/(z - x)`.
pub fn phi_map_fn(domain: &Domain, x: f64, backend: &Backend) -> Result<ConformalMapResult> {
    backend.validate()?;
    if domain.is_annulus() || domain.hull().is_some() {
        return Err(Error::InvalidArgument("phi_map needs the half-plane minus holes".into()));
    }
    let norm = |b: &Backend| Normalization {
        kind: MapKind::Phi,
        backend: backend_name(b),
        rule: format!("phi(z) - z -> 0 at infinity; built from base point {x}"),
    };
    let heights_of = |f: &dyn Fn(C64) -> Result<C64>| -> Result<Vec<f64>> {
        domain
            .holes()
            .iter()
            .map(|h| {
                let p = match h {
                    Hole::Slit(s) => s.center() + C64::new(0.0, 1e-9),
                    Hole::Disk(d) => d.center() + C64::new(0.0, d.r * (1.0 + 1e-9)),
                };
                Ok(f(p)?.im)
            })
            .collect()
    };
    if domain.n_holes() == 0 {
        let f: MapFn = Arc::new(|z: C64| Ok(z));
        return finish(f, norm(&Backend::Analytic), vec![], vec![], domain, 1e-5);
    }
    match backend {
        Backend::Bie { n_open, n_closed } | Backend::Chain { n_open, n_closed } => {
            let cfg = BieConfig { n_open: *n_open, n_closed: *n_closed };
            let curves: Vec<Curve> = domain.holes().iter().map(|h| inverted_hole(h, x)).collect();
            let s = Arc::new(ErSolver::from_curves(curves, cfg)?);
            let layer = Arc::new(s.er_pk_layer(0.0)?);
            let r = PI * s.bie().complex(&layer, C64::new(0.0, 0.0)).0.re;
            let d = domain.clone();
            let f: MapFn = Arc::new(move |z: C64| {
                if !d.contains(z) {
                    return Err(Error::outside(z, "domain"));
                }
                let w = -(z - x).inv();
                Ok(-w.inv() + s.bie().complex(&layer, w).0 * PI + x - r)
            });
            let levels = heights_of(&*f)?;
            finish(f, norm(backend), levels, vec![0.0; domain.n_holes()], domain, 1e-5)
        }
        Backend::Grid { h } => {
            let sol = grid_phi_correction(domain, &GridConfig::for_domain(domain, *h))?;
            let levels = sol.constants.iter().map(|c| c.unwrap_or(f64::NAN)).collect();
            let g = Arc::new(GridAnalytic::new(sol, 1.0)?);
            let periods = grid_periods(&g, 1.0)?;
            let f: MapFn = Arc::new(move |z: C64| Ok(z + g.eval(z)?));
            finish(f, norm(backend), levels, periods, domain, grid_step(*h))
        }
        _ => Err(unsupported("phi_map", backend)),
    }
}

/// `phi_D(z)`.
pub fn phi_map(domain: &Domain, z: C64, x: f64, backend: &Backend) -> Result<C64> {
    phi_map_fn(domain, x, backend)?.eval(z)
}

/// `phi_D'(x) = pi H^ER(infinity, x)`.
pub fn phi_prime(domain: &Domain, x: f64, backend: &Backend) -> Result<KernelEstimate> {
    let e = pk_er_infinity(domain, x, backend)?;
    Ok(KernelEstimate { value: PI * e.value, stderr: PI * e.stderr, ..e })
}

/// The hull map `h_A^D = phi_{g_A(D \ A)} o g_A` with its capacities.
#[derive(Debug, Clone)]
pub struct HullMapEr {
    pub map: ConformalMapResult,
    /// `hcap(A)`.
    pub hcap: f64,
    /// `hcap^ER(A)` in `D`: the `1/z` coefficient of `h_A^D`.
    pub hcap_er: f64,
    /// `g_A(tip)` for curve hulls.
    pub u: Option<f64>,
    /// `phi(g_A(tip))`: the tip image under `h_A^D` (not available on the
    /// grid route).
    pub u_tilde: Option<f64>,
    /// `phi'(g_A(tip))` (not available on the grid route).
    pub phi_prime: Option<f64>,
}

impl HullMapEr {
    pub fn eval(&self, z: C64) -> Result<C64> {
        self.map.eval(z)
    }
}

/// Builds `h_A^D`. The `bie` route maps the holes by `g_A` and normalizes
/// the image domain; the `grid` route solves for `Im h - Im z` on `D \ A`.
pub fn hull_map_er(domain: &Domain, hull: &Hull, backend: &Backend) -> Result<HullMapEr> {
    backend.validate()?;
    if domain.is_annulus() || domain.hull().is_some() {
        return Err(Error::InvalidArgument("hull maps need the half-plane minus holes".into()));
    }
    let dh = domain.with_hull(Some(hull.clone()))?;
    let norm = |b: &Backend| Normalization {
        kind: MapKind::Hull,
        backend: backend_name(b),
        rule: "h(z) - z -> 0 at infinity".into(),
    };
    let g = Arc::new(HullMap::new(hull)?);
    let hcap = g.hcap();
    if domain.n_holes() == 0 {
        let d = dh.clone();
        let g2 = g.clone();
        let f: MapFn = Arc::new(move |z: C64| {
            if !d.contains(z) {
                return Err(Error::outside(z, "domain minus hull"));
            }
            g2.eval(z)
        });
        let map = finish(f, norm(&Backend::Analytic), vec![], vec![], &dh, 1e-5)?;
        let u = g.tip_image().or_else(|| hull_base(hull));
        return Ok(HullMapEr { map, hcap, hcap_er: hcap, u, u_tilde: u, phi_prime: u.map(|_| 1.0) });
    }
    match backend {
        Backend::Bie { n_open, n_closed } | Backend::Chain { n_open, n_closed } => {
            let cfg = BieConfig { n_open: *n_open, n_closed: *n_closed };
            let g2 = g.clone();
            let curves = image_curves(&domain.holes(), &move |z| g2.eval(z))?;
            let s = Arc::new(ErSolver::from_curves(curves, cfg)?);
            let layer = Arc::new(s.phi_raw_layer()?);
            let hcap_er = hcap - 2.0 / PI * s.bie().im_moment(&layer);
            let levels = layer.constants.clone();
            let u = g.tip_image().or_else(|| hull_base(hull));
            let at_tip = u.map(|x| s.bie().complex(&layer, C64::new(x, 0.0)));
            let u_tilde = u.zip(at_tip).map(|(x, (f, _))| x + f.re);
            let phi_prime = at_tip.map(|(_, df)| 1.0 + df.re);
            let d = dh.clone();
            let f: MapFn = Arc::new(move |z: C64| {
                if !d.contains(z) {
                    return Err(Error::outside(z, "domain minus hull"));
                }
                let w = g.eval(z)?;
                Ok(w + s.bie().complex(&layer, w).0)
            });
            let map = finish(f, norm(backend), levels, vec![0.0; domain.n_holes()], &dh, 1e-5)?;
            Ok(HullMapEr { map, hcap, hcap_er, u, u_tilde, phi_prime })
        }
        Backend::Grid { h } => {
            let sol = grid_phi_correction(&dh, &GridConfig::for_domain(&dh, *h))?;
            let levels = sol.constants.iter().map(|c| c.unwrap_or(f64::NAN)).collect();
            let r = 2.0 * dh.hole_extent().max(0.5);
            let hcap_er = -circle_average(&|z| sol.eval(z), r, 1e-7)?;
            let ga = Arc::new(GridAnalytic::new(sol, 1.0)?);
            let f: MapFn = Arc::new(move |z: C64| Ok(z + ga.eval(z)?));
            let map = finish(f, norm(backend), levels, vec![0.0; domain.n_holes()], &dh, grid_step(*h))?;
            Ok(HullMapEr { map, hcap, hcap_er, u: g.tip_image(), u_tilde: None, phi_prime: None })
        }
        _ => Err(unsupported("h_hull_map", backend)),
    }
}

/// Base point of an empty curve hull.
fn hull_base(hull: &Hull) -> Option<f64> {
    match hull {
        Hull::Polyline { points } if points.len() == 1 => Some(points[0].re),
        _ => None,
    }
}

/// `h_A^D(z)`.
pub fn h_hull_map(domain: &Domain, hull: &Hull, z: C64, backend: &Backend) -> Result<C64> {
    hull_map_er(domain, hull, backend)?.eval(z)
}

/// `f = exp(-(u + iv))` with `u = pi G^ER(A_i, .)`: `|f| = 1` on `A0` and
/// `f -> 1` at the rightmost boundary point of `A0` (infinity for half-plane
/// domains, `z = r` for the annulus).
pub fn map_bilateral(domain: &Domain, i: usize, backend: &Backend) -> Result<ConformalMapResult> {
    backend.validate()?;
    if i == 0 || i > domain.n_holes() {
        return Err(Error::InvalidArgument(format!("hole index {i} out of range")));
    }
    let norm = |b: &Backend| Normalization {
        kind: MapKind::Bilateral,
        backend: backend_name(b),
        rule: format!("u = pi G^ER(A_{i}, .); f = 1 at the rightmost point of A0"),
    };
    if let Domain::Annulus { r } = *domain {
        let d = domain.clone();
        let f: MapFn = Arc::new(move |z: C64| {
            if !d.contains(z) {
                return Err(Error::outside(z, "annulus"));
            }
            Ok(z / r)
        });
        return finish(f, norm(&Backend::Analytic), vec![1.0 / r], vec![-2.0 * PI], domain, 1e-5);
    }
    match backend {
        Backend::Bie { .. } | Backend::Chain { .. } => {
            let s = Arc::new(er_solver(domain, backend)?);
            let layer = s.hole_layer(i)?.clone();
            let levels = layer.constants.iter().map(|c| (-PI * c).exp()).collect();
            let layer = Arc::new(layer);
            let (s2, l2) = (s.clone(), layer.clone());
            let fd = move |z: C64| {
                let (g, dg) = s2.bie().complex(&l2, z);
                (g * PI, dg * PI)
            };
            let periods = periods_of(domain, &fd)?.into_iter().map(|p| -p).collect();
            let d = domain.clone();
            let f: MapFn = Arc::new(move |z: C64| {
                if !d.contains(z) {
                    return Err(Error::outside(z, "domain"));
                }
                Ok((C64::i() * PI * s.bie().complex(&layer, z).0).exp())
            });
            finish(f, norm(backend), levels, periods, domain, 1e-5)
        }
        Backend::Grid { h } => {
            let sol = grid_green_er_hole(domain, i, &GridConfig::for_domain(domain, *h))?;
            let levels = sol.constants.iter().map(|c| (-PI * c.unwrap_or(f64::NAN)).exp()).collect();
            let g = Arc::new(GridAnalytic::new(sol, 1.0)?);
            let periods = grid_periods(&g, PI)?.into_iter().map(|p| -p).collect();
            let f: MapFn = Arc::new(move |z: C64| Ok((C64::i() * PI * g.eval(z)?).exp()));
            finish(f, norm(backend), levels, periods, domain, grid_step(*h))
        }
        _ => Err(unsupported("map_bilateral", backend)),
    }
}

/// `f = exp(-(u + iv))` with `u = pi G^ER(z0, .)`: `f(z0) = 0`, `|f| = 1` on
/// `A0`, `f -> 1` at infinity.
pub fn map_standard(domain: &Domain, z0: C64, backend: &Backend) -> Result<ConformalMapResult> {
    backend.validate()?;
    if !domain.contains(z0) {
        return Err(Error::outside(z0, "domain"));
    }
    if domain.is_annulus() {
        return Err(Error::InvalidArgument("map_standard needs a half-plane domain".into()));
    }
    let norm = |b: &Backend| Normalization {
        kind: MapKind::Standard,
        backend: backend_name(b),
        rule: format!("u = pi G^ER({z0}, .); f -> 1 at infinity"),
    };
    let mobius = move |z: C64| (z - z0) / (z - z0.conj());
    let d = domain.clone();
    let inside = move |z: C64| if d.contains(z) { Ok(()) } else { Err(Error::outside(z, "domain")) };
    if is_plain_halfplane(domain) {
        let f: MapFn = Arc::new(move |z: C64| inside(z).map(|_| mobius(z)));
        return finish(f, norm(&Backend::Analytic), vec![], vec![], domain, 1e-5);
    }
    match backend {
        Backend::Bie { .. } | Backend::Chain { .. } => {
            let s = Arc::new(er_solver(domain, backend)?);
            let layer = Arc::new(s.green_er_layer(z0)?);
            let levels = layer.constants.iter().map(|c| (-PI * c).exp()).collect();
            let (s2, l2) = (s.clone(), layer.clone());
            let fd = move |z: C64| {
                let (g, dg) = s2.bie().complex(&l2, z);
                (g * PI, dg * PI)
            };
            let periods = periods_of(domain, &fd)?.into_iter().map(|p| -p).collect();
            let f: MapFn = Arc::new(move |z: C64| {
                inside(z)?;
                Ok(mobius(z) * (C64::i() * PI * s.bie().complex(&layer, z).0).exp())
            });
            finish(f, norm(backend), levels, periods, domain, 1e-5)
        }
        Backend::Grid { h } => {
            let sol = grid_green_er(domain, z0, &GridConfig::for_domain(domain, *h))?;
            let levels = sol.constants.iter().map(|c| (-PI * c.unwrap_or(f64::NAN)).exp()).collect();
            let g = Arc::new(GridAnalytic::new(sol, 1.0)?);
            let periods = grid_periods(&g, PI)?.into_iter().map(|p| -p).collect();
            let f: MapFn = Arc::new(move |z: C64| Ok(mobius(z) * (C64::i() * PI * g.eval(z)?).exp()));
            finish(f, norm(backend), levels, periods, domain, grid_step(*h))
        }
        _ => Err(unsupported("map_standard", backend)),
    }
}

/// Solves the grid problem of `phi` for a domain with a polyline hull; used
/// as the independent route of the Loewner composition check.
pub fn grid_hull_phi(domain_with_hull: &Domain, h: f64) -> Result<GridAnalytic> {
    let sol = grid_phi_correction(domain_with_hull, &GridConfig::for_domain(domain_with_hull, h))?;
    GridAnalytic::new(sol, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Disk, Slit};

    fn one_slit() -> Domain {
        Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap()
    }

    fn slit_disk() -> Domain {
        Domain::HalfplaneHoles {
            holes: vec![Hole::Slit(Slit::new(1.0, -1.5, -0.5).unwrap()), Hole::Disk(Disk { cx: 1.0, cy: 1.2, r: 0.4 })],
            hull: None,
        }
    }

    #[test]
    fn zero_holes_closed_forms() {
        let d = Domain::halfplane();
        let f = map_chordal(&d, 0.0, &Backend::bie()).unwrap();
        assert!((f.eval(C64::i()).unwrap() - C64::i()).norm() < 1e-15);
        assert!(f.cr_residual < 1e-8);
        let s = map_standard(&d, C64::i(), &Backend::bie()).unwrap();
        assert!((s.eval(C64::new(0.0, 2.0)).unwrap().norm() - 1.0 / 3.0).abs() < 1e-15);
        assert!(s.eval(C64::i()).unwrap().norm() < 1e-15);
    }

    #[test]
    fn complex_pk_bie_properties() {
        let d = slit_disk();
        let f = map_chordal(&d, 0.2, &Backend::bie()).unwrap();
        assert!(f.cr_residual < 1e-8, "{}", f.cr_residual);
        assert!(f.periods.iter().all(|p| p.abs() < 1e-6), "{:?}", f.periods);
        let s = er_solver(&d, &Backend::bie()).unwrap();
        let z = C64::new(0.3, 2.0);
        assert!((f.eval(z).unwrap().im - PI * s.pk_er(z, 0.2).unwrap()).abs() < 1e-10);
        for eps in [1e-2, 1e-3] {
            let w = C64::new(0.2, eps);
            let v = (w - 0.2) * f.eval(w).unwrap();
            assert!((v + 1.0).norm() < 2.0 * eps, "{eps}: {v}");
        }
        let y = 1e4;
        let zf = C64::new(0.0, y);
        assert!((zf * f.eval(zf).unwrap() + PI * s.pk_er_infinity(0.2).unwrap()).norm() < 1e-3);
    }

    #[test]
    fn phi_identity_and_base_point_independence() {
        let d = one_slit();
        let f = phi_map_fn(&d, 0.0, &Backend::bie()).unwrap();
        assert!((f.eval(C64::new(0.0, 2.0)).unwrap() - C64::new(0.0, 2.0)).norm() < 1e-8);
        let d2 = slit_disk();
        let a = phi_map_fn(&d2, 0.0, &Backend::bie()).unwrap();
        let b = phi_map_fn(&d2, 1.0, &Backend::bie()).unwrap();
        let direct = ErSolver::new(&d2, BieConfig::default()).unwrap();
        let p = direct.phi_layer().unwrap();
        for k in 0..20 {
            let z = C64::new(-3.0 + 0.3 * k as f64, 0.3 + 0.15 * k as f64);
            if !d2.contains(z) || d2.dist_boundary(z).unwrap() < 0.05 {
                continue;
            }
            let (u, v) = (a.eval(z).unwrap(), b.eval(z).unwrap());
            assert!((u - v).norm() < 1e-6, "{z}: {u} {v}");
            assert!((u - p.eval(z)).norm() < 1e-6);
        }
        let pp = phi_prime(&d2, 3.0, &Backend::bie()).unwrap();
        assert!(pp.value > 0.0);
        let h = 1e-4;
        let fd =
            (a.eval(C64::new(3.0 + h, 1e-12)).unwrap().re - a.eval(C64::new(3.0 - h, 1e-12)).unwrap().re) / (2.0 * h);
        assert!((fd - pp.value).abs() < 1e-5, "{fd} {}", pp.value);
    }

    #[test]
    fn hull_map_reduces_to_classical_and_normalizes() {
        let hull = Hull::VerticalSlit { x: 0.0, height: 0.5 };
        let h0 = hull_map_er(&Domain::halfplane(), &hull, &Backend::bie()).unwrap();
        let z = C64::new(0.3, 0.7);
        assert!((h0.eval(z).unwrap() - (z * z + 0.25).sqrt()).norm() < 1e-14);
        let d = Domain::chordal(vec![Slit::new(1.0, 1.0, 2.0).unwrap()]).unwrap();
        let h = hull_map_er(&d, &hull, &Backend::bie()).unwrap();
        let y = 1e3;
        let zz = C64::new(0.0, y);
        assert!((h.eval(zz).unwrap() - zz).norm() < 1e-3);
        assert!(((h.eval(zz).unwrap() - zz) * zz - h.hcap_er).norm() < 1e-5);
        assert!(h.hcap_er > 0.0 && (h.hcap_er / h.hcap - 1.0).abs() < 0.05, "{}", h.hcap_er);
        let empty = hull_map_er(&d, &Hull::Polyline { points: vec![C64::new(0.0, 0.0)] }, &Backend::bie()).unwrap();
        assert!((empty.eval(C64::new(0.5, 2.0)).unwrap() - C64::new(0.5, 2.0)).norm() < 1e-8);
    }

    #[test]
    fn bilateral_and_standard_maps() {
        let ann = Domain::Annulus { r: 3.0 };
        let f = map_bilateral(&ann, 1, &Backend::Analytic).unwrap();
        assert!((f.eval(C64::new(0.0, 2.0)).unwrap().norm() - 2.0 / 3.0).abs() < 1e-15);
        let d = slit_disk();
        let b = map_bilateral(&d, 2, &Backend::bie()).unwrap();
        assert!((b.periods[1] + 2.0 * PI).abs() < 1e-6 && b.periods[0].abs() < 1e-6, "{:?}", b.periods);
        for x in [-5.0, 0.0, 0.7, 4.0] {
            assert!((b.eval(C64::new(x, 1e-9)).unwrap().norm() - 1.0).abs() < 1e-6);
        }
        // Winding along the real line.
        let mut arg = 0.0;
        let xs: Vec<f64> = (0..=4000).map(|k| (PI * (k as f64 / 4000.0 - 0.5) * 0.999).tan() * 3.0).collect();
        let mut prev = b.eval(C64::new(xs[0], 1e-9)).unwrap();
        for x in &xs[1..] {
            let cur = b.eval(C64::new(*x, 1e-9)).unwrap();
            arg += (cur / prev).arg();
            prev = cur;
        }
        assert!((arg / (2.0 * PI) - 1.0).abs() < 1e-2, "{arg}");
        let z0 = C64::new(0.2, 0.5);
        let s = map_standard(&d, z0, &Backend::bie()).unwrap();
        assert!(s.eval(z0 + 1e-9).unwrap().norm() < 1e-6);
        assert!(s.periods.iter().all(|p| p.abs() < 1e-6));
        for k in 0..100 {
            let z = C64::new(-4.0 + 0.08 * k as f64, 0.05 + 0.04 * k as f64);
            if d.contains(z) {
                assert!(s.eval(z).unwrap().norm() < 1.0);
            }
        }
    }

    #[test]
    fn grid_maps_agree_with_bie() {
        let d = one_slit();
        let g = map_chordal(&d, 0.0, &Backend::Grid { h: 0.04 }).unwrap();
        let b = map_chordal(&d, 0.0, &Backend::bie()).unwrap();
        for z in [C64::new(0.0, 2.0), C64::new(1.5, 0.5), C64::new(-0.3, 0.5)] {
            let (u, v) = (g.eval(z).unwrap(), b.eval(z).unwrap());
            assert!((u - v).norm() < 2e-2, "{z}: {u} {v}");
        }
        let lv = g.levels[0];
        assert!((lv - b.levels[0]).abs() < 1e-2);
        assert!(g.periods[0].abs() < 1e-2, "{:?}", g.periods);
    }
}
