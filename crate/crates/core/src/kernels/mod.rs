//! Deterministic and composed evaluators for the ER Poisson kernel and the
//! ER Green's function.
//!
//! Every evaluator returns a [`KernelEstimate`] tagged with the method that
//! produced it. Backends:
//!
//! * `analytic`: closed forms (zero holes, annulus).
//! * `series`: the annulus series with a rigorous tail bound in `stderr`.
//! * `bie`: direct solves with the boundary-integral solver.
//! * `chain`: the `(I - Q)^{-1}` assembly from single-transition quantities,
//!   themselves computed with the boundary-integral solver.
//! * `grid`: the finite-difference solver.
//! * `mc`: ERBM simulation; densities are averages over a bin or cell of
//!   half-width `width`.

pub mod annulus;
pub mod bie;
pub mod solver;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::brownian::{
    green_halfplane, grid_harmonic, harmonic_measure_grid, pk_halfplane, BoundaryProblem, Cell, GridConfig,
    GridSolution, RngStream,
};
use crate::erbm::{erbm_hitting_density, occupation_density, ErbmState, EtaConfig, Sampler};
use crate::geometry::{BoundaryId, Domain};
use crate::numerics::gauss_legendre;
use crate::stats::{Estimate, MeanAcc};
use crate::{Error, Result, C64};

pub use annulus::{green_er_annulus_hole, pk_er_annulus, pk_er_annulus_domain, pk_er_annulus_hole, SeriesValue};
pub use bie::{BieConfig, BieDomain, ChebCurve, Curve, FourierCurve, Layer};
pub use solver::{ErSolver, PhiMap};

/// How a kernel value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Series,
    Chain,
    Mc,
    Grid,
    Bie,
}

/// A kernel value with its uncertainty: the Monte Carlo standard error, the
/// series tail bound, or zero for deterministic solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub n_samples: u64,
}

impl KernelEstimate {
    pub fn exact(value: f64, method: Method) -> Self {
        KernelEstimate { value, stderr: 0.0, method, n_samples: 0 }
    }

    pub fn mc(e: Estimate, n: u64) -> Self {
        KernelEstimate { value: e.value, stderr: e.stderr, method: Method::Mc, n_samples: n }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { value: self.value, stderr: self.stderr }
    }

    /// Number of combined standard errors separating two values.
    pub fn z_score(&self, other: &KernelEstimate) -> f64 {
        self.estimate().z_score(&other.estimate())
    }
}

/// Kernel backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    Analytic,
    Series { tol: f64 },
    Bie { n_open: usize, n_closed: usize },
    Chain { n_open: usize, n_closed: usize },
    Grid { h: f64 },
    Mc { n: u64, seed: u64, width: f64 },
}

impl Backend {
    pub fn bie() -> Self {
        let c = BieConfig::default();
        Backend::Bie { n_open: c.n_open, n_closed: c.n_closed }
    }

    pub(crate) fn bie_config(&self) -> Option<BieConfig> {
        match *self {
            Backend::Bie { n_open, n_closed } | Backend::Chain { n_open, n_closed } => {
                Some(BieConfig { n_open, n_closed })
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match *self {
            Backend::Series { tol } => !(tol > 0.0),
            Backend::Bie { n_open, n_closed } | Backend::Chain { n_open, n_closed } => n_open < 4 || n_closed < 5,
            Backend::Grid { h } => !(h > 0.0),
            Backend::Mc { n, width, .. } => n == 0 || !(width > 0.0),
            Backend::Analytic => false,
        };
        if bad {
            return Err(Error::Config(format!("invalid backend parameters {self:?}")));
        }
        Ok(())
    }
}

fn unsupported(op: &str, b: &Backend) -> Error {
    Error::InvalidArgument(format!("{op} is not available with backend {b:?} on this domain"))
}

pub(crate) fn is_plain_halfplane(domain: &Domain) -> bool {
    !domain.is_annulus() && domain.n_holes() == 0 && domain.hull().is_none()
}

pub(crate) fn er_solver(domain: &Domain, b: &Backend) -> Result<ErSolver> {
    ErSolver::new(domain, b.bie_config().expect("bie backend"))
}

fn mc_parts(b: &Backend) -> (u64, RngStream, f64) {
    match *b {
        Backend::Mc { n, seed, width } => (n, RngStream::new(seed, 0), width),
        _ => unreachable!(),
    }
}

/// Density on `A0` at `x` from the ER hitting histogram of one bin.
fn mc_density(domain: &Domain, start: ErbmState, x: f64, b: &Backend, label: &str) -> Result<KernelEstimate> {
    let (n, stream, width) = mc_parts(b);
    let sampler = Sampler::for_domain(domain)?;
    let h = erbm_hitting_density(&sampler, start, &[x - width, x + width], stream.derive(label), n)?;
    let (d, se) = h.density(0);
    Ok(KernelEstimate::mc(Estimate { value: d, stderr: se }, n))
}

/// Boundary Poisson kernel `H_dD(A_i, x)` at a real point `x`.
pub fn boundary_pk(domain: &Domain, i: usize, x: f64, backend: &Backend) -> Result<KernelEstimate> {
    backend.validate()?;
    match backend {
        Backend::Bie { .. } | Backend::Chain { .. } if !domain.is_annulus() => {
            Ok(KernelEstimate::exact(er_solver(domain, backend)?.boundary_pk(i, x)?, Method::Bie))
        }
        Backend::Grid { h } if !domain.is_annulus() => {
            if i == 0 || i > domain.n_holes() {
                return Err(Error::InvalidArgument(format!("hole index {i} out of range")));
            }
            let sol = harmonic_measure_grid(domain, i, &grid_config(domain, *h, 0.0))?;
            let u1 = sol.eval(C64::new(x, *h))?;
            let u2 = sol.eval(C64::new(x, 2.0 * h))?;
            Ok(KernelEstimate::exact((4.0 * u1 - u2) / (2.0 * h), Method::Grid))
        }
        _ => Err(unsupported("boundary_pk", backend)),
    }
}

/// Excursion measure `E(A_i, A_j)` between distinct components (0 is `A0`).
pub fn excursion_measure(domain: &Domain, i: usize, j: usize, backend: &Backend) -> Result<KernelEstimate> {
    backend.validate()?;
    match backend {
        Backend::Bie { .. } | Backend::Chain { .. } if !domain.is_annulus() => {
            Ok(KernelEstimate::exact(er_solver(domain, backend)?.excursion(i, j)?, Method::Bie))
        }
        _ => Err(unsupported("excursion_measure", backend)),
    }
}

/// Densities `T_i` sampled on a quadrature grid of the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TDensity {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[i][k] = T_{i+1}(nodes[k])`.
    pub values: Vec<Vec<f64>>,
}

impl TDensity {
    /// Samples `T_i` for every hole on `x = c + s tan(u)` with `m`
    /// Gauss-Legendre nodes in `u`.
    pub fn new(solver: &ErSolver, c: f64, s: f64, m: usize) -> Result<Self> {
        let q = gauss_legendre(m);
        let half = std::f64::consts::FRAC_PI_2;
        let mut nodes = vec![];
        let mut weights = vec![];
        for &(t, w) in q.iter() {
            let u = half * t;
            nodes.push(c + s * u.tan());
            weights.push(w * half * s / (u.cos() * u.cos()));
        }
        let mut values = vec![];
        for i in 1..=solver.n_holes() {
            values.push(nodes.iter().map(|x| solver.t_density(i, *x)).collect::<Result<Vec<_>>>()?);
        }
        Ok(TDensity { nodes, weights, values })
    }

    /// `int T_i`, the probability that the loop-erased chain moves from hole
    /// `i` to `A0`.
    pub fn integral(&self, i: usize) -> f64 {
        self.values[i - 1].iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// `H^ER(A_i, x)` for every hole.
pub fn pk_er_holes(domain: &Domain, x: f64, backend: &Backend) -> Result<Vec<KernelEstimate>> {
    backend.validate()?;
    match (domain, backend) {
        (Domain::Annulus { r }, Backend::Analytic | Backend::Series { .. }) => {
            Ok(vec![KernelEstimate::exact(pk_er_annulus_hole(*r), Method::Analytic)])
        }
        (d, Backend::Chain { .. } | Backend::Bie { .. }) if !d.is_annulus() => Ok(er_solver(d, backend)?
            .pk_er_holes(x)?
            .into_iter()
            .map(|v| KernelEstimate::exact(v, Method::Chain))
            .collect()),
        (d, Backend::Mc { .. }) => (1..=d.n_holes())
            .map(|i| mc_density(d, ErbmState::Hole { i }, x, backend, &format!("pk-hole-{i}")))
            .collect(),
        _ => Err(unsupported("pk_er_holes", backend)),
    }
}

/// `H^ER(A_i, x)` from a Monte Carlo boundary chain: loop-erased transition
/// probabilities and the density of the first `A0` hit in `[x - width, x +
/// width]`, assembled with `(I - Q)^{-1}`. The standard error comes from
/// `batches` independent batches.
pub fn pk_er_holes_mc_chain(
    domain: &Domain,
    x: f64,
    width: f64,
    n_transitions: u64,
    stream: RngStream,
) -> Result<Vec<KernelEstimate>> {
    const BATCHES: u64 = 16;
    let sampler = Sampler::for_domain(domain)?;
    let n = domain.n_holes();
    if n == 0 {
        return Err(Error::InvalidArgument("the chain needs at least one hole".into()));
    }
    let per = (n_transitions / BATCHES).max(1);
    // tallies[batch][i] = (counts to each component, hits of the bin)
    let mut tallies = vec![vec![(vec![0u64; n + 1], 0u64); n]; BATCHES as usize];
    for i in 1..=n {
        let s = stream.derive(&format!("mc-chain-{i}"));
        let parts = crate::parallel::map_ranges(per * BATCHES, |range| -> Result<Vec<(usize, bool, u64)>> {
            let mut out = vec![];
            for p in range {
                let (j, pt) = sampler.transition(i, &mut s.path(p).rng())?;
                out.push((j, j == 0 && (pt.re - x).abs() < width, p / per));
            }
            Ok(out)
        });
        for part in parts {
            for (j, hit, b) in part? {
                let t = &mut tallies[b as usize][i - 1];
                t.0[j] += 1;
                if hit {
                    t.1 += 1;
                }
            }
        }
    }
    let assemble = |t: &[(Vec<u64>, u64)]| -> Result<Vec<f64>> {
        let tot: u64 = t[0].0.iter().sum();
        let mut q = nalgebra::DMatrix::zeros(n, n);
        let mut tv = nalgebra::DVector::zeros(n);
        for i in 0..n {
            let stay = t[i].0[i + 1] as f64;
            let leave = tot as f64 - stay;
            for j in 0..n {
                if j != i {
                    q[(i, j)] = t[i].0[j + 1] as f64 / leave;
                }
            }
            tv[i] = t[i].1 as f64 / leave / (2.0 * width);
        }
        let f = crate::erbm::fundamental_matrix(&q)?;
        Ok((f * tv).iter().copied().collect())
    };
    let mut all = vec![(vec![0u64; n + 1], 0u64); n];
    let mut accs = vec![MeanAcc::default(); n];
    for b in &tallies {
        for (a, t) in all.iter_mut().zip(b) {
            for (x, y) in a.0.iter_mut().zip(&t.0) {
                *x += y;
            }
            a.1 += t.1;
        }
        for (acc, v) in accs.iter_mut().zip(assemble(b)?) {
            acc.push(v);
        }
    }
    let full = assemble(&all)?;
    Ok(full
        .into_iter()
        .zip(accs)
        .map(|(v, a)| KernelEstimate { value: v, stderr: a.stderr(), method: Method::Chain, n_samples: per * BATCHES })
        .collect())
}

/// Grid configuration whose core box also covers the disk of radius `r`.
pub(crate) fn grid_config(domain: &Domain, h: f64, r: f64) -> GridConfig {
    let cfg = GridConfig::for_domain(domain, h);
    if r > 0.0 && !domain.is_annulus() {
        let c = cfg.core;
        let m = 1.2 * r;
        cfg.with_core([c[0].min(-m), c[1].max(m), 0.0, c[3].max(m)])
    } else {
        cfg
    }
}

/// Grid solution of `v = H^ER(., x) - H_H(., x)`.
pub fn grid_pk_er(domain: &Domain, x: f64, cfg: &GridConfig) -> Result<GridSolution> {
    let data = move |id: BoundaryId, z: C64| match id {
        BoundaryId::A0 if z.im <= 0.0 => 0.0,
        _ => -pk_halfplane(z, x).unwrap_or(0.0),
    };
    let far = |_z: C64| 0.0;
    let problem = BoundaryProblem { data: &data, far: &far, er_flux: vec![Some(0.0); domain.n_holes()] };
    grid_harmonic(domain, &problem, cfg)
}

/// Grid solution of `v = G^ER(., w) - G_H(., w)`.
pub fn grid_green_er(domain: &Domain, w: C64, cfg: &GridConfig) -> Result<GridSolution> {
    let data = move |id: BoundaryId, z: C64| match id {
        BoundaryId::A0 if z.im <= 0.0 => 0.0,
        _ => -green_halfplane(z, w).unwrap_or(0.0),
    };
    let far = |_z: C64| 0.0;
    let problem = BoundaryProblem { data: &data, far: &far, er_flux: vec![Some(0.0); domain.n_holes()] };
    grid_harmonic(domain, &problem, cfg)
}

/// Grid solution of `G^ER(A_i, .)`: zero on `A0`, unknown constants on the
/// holes, flux 2 into hole `i` and 0 into the others.
pub fn grid_green_er_hole(domain: &Domain, i: usize, cfg: &GridConfig) -> Result<GridSolution> {
    let data = |_: BoundaryId, _: C64| 0.0;
    let far = |_z: C64| 0.0;
    let problem = BoundaryProblem {
        data: &data,
        far: &far,
        er_flux: (1..=domain.n_holes()).map(|k| Some(if k == i { 2.0 } else { 0.0 })).collect(),
    };
    grid_harmonic(domain, &problem, cfg)
}

/// ER Poisson kernel `H^ER(z, x)`, or its bin average for `mc`.
pub fn pk_er(domain: &Domain, z: C64, x: f64, backend: &Backend) -> Result<KernelEstimate> {
    backend.validate()?;
    if !domain.contains(z) {
        return Err(Error::outside(z, "domain"));
    }
    match (domain, backend) {
        (d, Backend::Analytic) if is_plain_halfplane(d) => {
            Ok(KernelEstimate::exact(pk_halfplane(z, x)?, Method::Analytic))
        }
        (Domain::Annulus { r }, Backend::Analytic) => {
            let v = pk_er_annulus_domain(*r, z, x, 1e-13)?;
            Ok(KernelEstimate::exact(v.value, Method::Analytic))
        }
        (Domain::Annulus { r }, Backend::Series { tol }) => {
            let v = pk_er_annulus_domain(*r, z, x, *tol)?;
            Ok(KernelEstimate { value: v.value, stderr: v.tail, method: Method::Series, n_samples: v.terms as u64 })
        }
        (d, Backend::Bie { .. }) if !d.is_annulus() => {
            Ok(KernelEstimate::exact(er_solver(d, backend)?.pk_er(z, x)?, Method::Bie))
        }
        (d, Backend::Chain { .. }) if !d.is_annulus() => {
            Ok(KernelEstimate::exact(er_solver(d, backend)?.pk_er_decomposed(z, x)?, Method::Chain))
        }
        (d, Backend::Grid { h }) if !d.is_annulus() => {
            let sol = grid_pk_er(d, x, &grid_config(d, *h, z.norm()))?;
            Ok(KernelEstimate::exact(pk_halfplane(z, x)? + sol.eval(z)?, Method::Grid))
        }
        (d, Backend::Mc { .. }) => mc_density(d, ErbmState::interior(z), x, backend, "pk-er"),
        _ => Err(unsupported("pk_er", backend)),
    }
}

/// Radius of the circle used for `H^ER(infinity, x)`: twice the hole
/// extent, and beyond `|x|`.
pub fn infinity_radius(domain: &Domain, x: f64) -> f64 {
    2.0 * domain.hole_extent().max(x.abs()).max(0.5)
}

/// `(2R/pi) int_0^pi f(R e^{i theta}) sin(theta) d theta` by composite
/// Gauss-Legendre with 64 nodes per pi, doubled until the change falls below
/// `1e-8` relative or `atol` absolute.
pub fn circle_average(f: &dyn Fn(C64) -> Result<f64>, r: f64, atol: f64) -> Result<f64> {
    let eval = |panels: usize| -> Result<f64> {
        let q = gauss_legendre(64);
        let mut s = 0.0;
        let w = PI / panels as f64;
        for p in 0..panels {
            for &(t, wt) in q.iter() {
                let th = w * (p as f64 + 0.5 + 0.5 * t);
                s += wt * 0.5 * w * f(C64::from_polar(r, th))? * th.sin();
            }
        }
        Ok(2.0 * r / PI * s)
    };
    let mut prev = eval(1)?;
    for k in 1..8 {
        let cur = eval(1 << k)?;
        if (cur - prev).abs() <= (1e-8 * cur.abs()).max(atol) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numerical("circle quadrature did not converge".into()))
}

/// `H^ER(infinity, x) = lim_{y -> inf} y H^ER(iy, x)`.
pub fn pk_er_infinity(domain: &Domain, x: f64, backend: &Backend) -> Result<KernelEstimate> {
    backend.validate()?;
    if domain.is_annulus() {
        return Err(Error::InvalidArgument("H^ER(infinity, .) needs a half-plane domain".into()));
    }
    let r = infinity_radius(domain, x);
    match backend {
        Backend::Analytic if is_plain_halfplane(domain) => Ok(KernelEstimate::exact(1.0 / PI, Method::Analytic)),
        Backend::Bie { .. } | Backend::Chain { .. } => {
            Ok(KernelEstimate::exact(er_solver(domain, backend)?.pk_er_infinity(x)?, Method::Bie))
        }
        Backend::Grid { h } => {
            let sol = grid_pk_er(domain, x, &grid_config(domain, *h, r))?;
            // The half-plane part contributes exactly 1 / pi; the bilinear
            // interpolant limits the attainable quadrature accuracy.
            let v = circle_average(&|z| sol.eval(z), r, 1e-7)?;
            Ok(KernelEstimate::exact(1.0 / PI + v, Method::Grid))
        }
        Backend::Mc { n, seed, width } => {
            let sampler = Sampler::for_domain(domain)?;
            let e = pk_er_infinity_mc(&sampler, x, *width, r, RngStream::new(*seed, 0).derive("pk-inf"), *n)?;
            Ok(KernelEstimate::mc(e, *n))
        }
        _ => Err(unsupported("pk_er_infinity", backend)),
    }
}

/// Circle-average estimator of `H^ER(infinity, x)` averaged over
/// `[x - width, x + width]`, with stratified angles.
pub fn pk_er_infinity_mc(sampler: &Sampler, x: f64, width: f64, r: f64, stream: RngStream, n: u64) -> Result<Estimate> {
    use rand::Rng;
    let parts = crate::parallel::map_ranges(n, |range| -> Result<MeanAcc> {
        let mut acc = MeanAcc::default();
        for p in range {
            let mut rng = stream.path(p).rng();
            let th = PI * (p as f64 + rng.random::<f64>()) / n as f64;
            let z = C64::from_polar(r, th);
            let (exit, _) = sampler.run(ErbmState::interior(z), &mut rng, None, None)?;
            let hit = exit.im == 0.0 && (exit.re - x).abs() < width;
            acc.push(if hit { 2.0 * r * th.sin() / (2.0 * width) } else { 0.0 });
        }
        Ok(acc)
    });
    let mut acc = MeanAcc::default();
    for p in parts {
        acc.merge(&p?);
    }
    Ok(acc.estimate())
}

/// ER Green's function from an interior point or a hole state.
pub fn green_er(domain: &Domain, start: ErbmState, w: C64, backend: &Backend) -> Result<KernelEstimate> {
    backend.validate()?;
    start.validate(domain)?;
    if !domain.contains(w) {
        return Err(Error::outside(w, "domain"));
    }
    if let ErbmState::Interior { z } = start {
        if z == w {
            return Err(Error::InvalidArgument("Green's function is singular at w = start".into()));
        }
    }
    match (domain, start, backend) {
        (d, ErbmState::Interior { z }, Backend::Analytic) if is_plain_halfplane(d) => {
            Ok(KernelEstimate::exact(green_halfplane(z, w)?, Method::Analytic))
        }
        (Domain::Annulus { r }, ErbmState::Hole { .. }, Backend::Analytic | Backend::Series { .. }) => {
            Ok(KernelEstimate::exact(green_er_annulus_hole(*r, w)?, Method::Analytic))
        }
        (d, s, Backend::Bie { .. }) if !d.is_annulus() => {
            let sv = er_solver(d, backend)?;
            let v = match s {
                ErbmState::Interior { z } => sv.green_er(z, w)?,
                ErbmState::Hole { i } => sv.green_er_hole(i, w)?,
                ErbmState::Killed => 0.0,
            };
            Ok(KernelEstimate::exact(v, Method::Bie))
        }
        (d, s, Backend::Chain { .. }) if !d.is_annulus() => {
            let sv = er_solver(d, backend)?;
            let eta = EtaConfig::default();
            let v = match s {
                ErbmState::Interior { z } => {
                    let mut acc = sv.green(z, w)?;
                    for i in 1..=sv.n_holes() {
                        acc += sv.harmonic_measure(i, z)? * sv.green_er_hole_chain(i, w, &eta)?;
                    }
                    acc
                }
                ErbmState::Hole { i } => sv.green_er_hole_chain(i, w, &eta)?,
                ErbmState::Killed => 0.0,
            };
            Ok(KernelEstimate::exact(v, Method::Chain))
        }
        (d, s, Backend::Grid { h }) if !d.is_annulus() => {
            let cfg = grid_config(d, *h, w.norm());
            let v = match s {
                ErbmState::Interior { z } => green_halfplane(z, w)? + grid_green_er(d, w, &cfg)?.eval(z)?,
                ErbmState::Hole { i } => grid_green_er_hole(d, i, &cfg)?.eval(w)?,
                ErbmState::Killed => 0.0,
            };
            Ok(KernelEstimate::exact(v, Method::Grid))
        }
        (d, s, Backend::Mc { n, seed, width }) => {
            let sampler = Sampler::for_domain(d)?;
            let cells = [Cell::Disk { center: w, r: *width }];
            let e = occupation_density(&sampler, s, &cells, RngStream::new(*seed, 0).derive("green"), *n)?;
            Ok(KernelEstimate::mc(e[0], *n))
        }
        _ => Err(unsupported("green_er", backend)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    fn one_slit() -> Domain {
        Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn zero_holes_are_exact() {
        let d = Domain::halfplane();
        let z = C64::new(0.3, 0.7);
        let a = pk_er(&d, z, 0.1, &Backend::Analytic).unwrap();
        assert_eq!(a.value, pk_halfplane(z, 0.1).unwrap());
        assert_eq!(a.stderr, 0.0);
        let g = green_er(&d, ErbmState::interior(z), C64::new(0.0, 2.0), &Backend::Analytic).unwrap();
        assert_eq!(g.value, green_halfplane(z, C64::new(0.0, 2.0)).unwrap());
        assert_eq!(pk_er_infinity(&d, 3.0, &Backend::Analytic).unwrap().value, 1.0 / PI);
    }

    #[test]
    fn annulus_hole_values() {
        let d = Domain::Annulus { r: std::f64::consts::E };
        let w = C64::from_polar(0.5f64.exp(), 0.7);
        let g = green_er(&d, ErbmState::Hole { i: 1 }, w, &Backend::Analytic).unwrap();
        assert!((g.value - 1.0 / (2.0 * PI)).abs() < 1e-14);
        let h = pk_er_holes(&d, 0.0, &Backend::Analytic).unwrap();
        assert!((h[0].value * 2.0 * PI * std::f64::consts::E - 1.0).abs() < 1e-14);
    }

    #[test]
    fn grid_and_bie_agree() {
        let d = one_slit();
        let z = C64::new(0.4, 1.8);
        let a = pk_er(&d, z, 0.2, &Backend::bie()).unwrap();
        let b = pk_er(&d, z, 0.2, &Backend::Grid { h: 0.05 }).unwrap();
        let c = pk_er(&d, z, 0.2, &Backend::Chain { n_open: 48, n_closed: 49 }).unwrap();
        assert!((a.value - b.value).abs() < 2e-3, "{} {}", a.value, b.value);
        assert!((a.value - c.value).abs() < 1e-10);
        let gi = pk_er_infinity(&d, 0.2, &Backend::Grid { h: 0.05 }).unwrap();
        assert!((gi.value * PI - 1.0).abs() < 1e-2, "{}", gi.value * PI);
        let w = C64::new(0.5, 0.5);
        let ga = green_er(&d, ErbmState::Hole { i: 1 }, w, &Backend::bie()).unwrap();
        let gb = green_er(&d, ErbmState::Hole { i: 1 }, w, &Backend::Grid { h: 0.05 }).unwrap();
        assert!((ga.value - gb.value).abs() < 5e-3, "{} {}", ga.value, gb.value);
    }

    #[test]
    fn t_density_integrates_to_exit_probability() {
        let d = one_slit();
        let s = ErSolver::new(&d, BieConfig::default()).unwrap();
        let t = TDensity::new(&s, 0.0, 2.0, 400).unwrap();
        assert!((t.integral(1) - s.q0(1).unwrap()).abs() < 1e-8);
        assert!(t.values[0].iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn boundary_pk_grid_matches_bie() {
        let d = one_slit();
        let a = boundary_pk(&d, 1, 0.3, &Backend::bie()).unwrap();
        let b = boundary_pk(&d, 1, 0.3, &Backend::Grid { h: 0.025 }).unwrap();
        assert!((a.value - b.value).abs() < 0.02 * a.value, "{} {}", a.value, b.value);
    }
}
