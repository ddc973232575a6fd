//! Excursion-reflected Brownian motion: excursion exits from holes, full path
//! simulation on the enlarged state space, the induced boundary Markov chain
//! and Monte Carlo estimators of ER hitting and occupation densities.
//!
//! A path runs as Brownian motion until it hits the killing boundary `A0` or
//! a hole `A_i`. From a hole it re-enters the domain on the curve `eta_i`,
//! the image of the circle `|zeta| = rho` in the hole's disk coordinates,
//! with the normalised excursion law. In disk coordinates that law is the
//! uniform distribution on the circle.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::brownian::rng::{gaussian_step, unit_circle, RngStream};
use crate::brownian::sampler::{run_exit, Cell, Occupation, Region, StepPolicy};
use crate::brownian::Histogram;
use crate::geometry::{BoundaryId, Domain, Hole};
use crate::numerics::gauss_legendre;
use crate::stats::{Estimate, MeanAcc};
use crate::{Error, Result, C64};

/// State of the process on the enlarged state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ErbmState {
    Interior {
        z: C64,
    },
    /// Hole `A_i`, numbered from 1.
    Hole {
        i: usize,
    },
    Killed,
}

impl ErbmState {
    pub fn interior(z: C64) -> Self {
        ErbmState::Interior { z }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        match self {
            ErbmState::Interior { z } => {
                if !domain.contains(*z) {
                    return Err(Error::outside(*z, "ERBM start must be interior"));
                }
            }
            ErbmState::Hole { i } => {
                if *i == 0 || *i > domain.n_holes() {
                    return Err(Error::InvalidArgument(format!("hole index {i} out of range")));
                }
            }
            ErbmState::Killed => return Err(Error::InvalidArgument("cannot start in the killed state".into())),
        }
        Ok(())
    }
}

/// How a path leaves a hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExcursionMode {
    /// Uniform angle on the `rho`-circle in disk coordinates.
    Exact,
    /// Brownian motion released from `|zeta| = 1 + eps_rel` and run to the
    /// `rho`-circle, re-released on every return to the hole.
    Released { eps_rel: f64 },
}

/// Excursion curves `eta_i`: circles of radius `rho` in disk coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaConfig {
    pub rho: f64,
    pub mode: ExcursionMode,
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig { rho: 1.5, mode: ExcursionMode::Exact }
    }
}

impl EtaConfig {
    pub fn new(rho: f64) -> Self {
        EtaConfig { rho, ..Default::default() }
    }

    /// Checks that each `eta_i` and the region it encloses around `A_i` stay
    /// inside the domain and away from the other holes.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must exceed 1, got {}", self.rho)));
        }
        if let ExcursionMode::Released { eps_rel } = self.mode {
            if !(eps_rel > 0.0 && 1.0 + eps_rel < self.rho) {
                return Err(Error::InvalidArgument("eps_rel must lie in (0, rho - 1)".into()));
            }
        }
        let holes = domain.holes();
        let m = 256;
        for (k, h) in holes.iter().enumerate() {
            for s in 0..m {
                let zeta = C64::from_polar(self.rho, TAU * s as f64 / m as f64);
                let z = h.from_disk(zeta);
                if !domain.contains(z) {
                    return Err(Error::InvalidArgument(format!("eta around hole {} leaves the domain", k + 1)));
                }
            }
            for (j, g) in holes.iter().enumerate() {
                if j == k {
                    continue;
                }
                for s in 0..m {
                    let p = g.from_disk(C64::from_polar(1.0, TAU * s as f64 / m as f64));
                    if h.to_disk(p).map(|w| w.norm() <= self.rho).unwrap_or(true) {
                        return Err(Error::InvalidArgument(format!(
                            "eta around hole {} encloses part of hole {}",
                            k + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Samples the re-entry point on `eta_i` of an excursion from hole `i`.
pub fn excursion_exit<R: Rng + ?Sized>(hole: &Hole, eta: &EtaConfig, rng: &mut R) -> Result<C64> {
    let zeta = match eta.mode {
        ExcursionMode::Exact => unit_circle(rng) * eta.rho,
        ExcursionMode::Released { eps_rel } => released_exit(eta.rho, eps_rel, rng)?,
    };
    Ok(hole.from_disk(zeta))
}

fn released_exit<R: Rng + ?Sized>(rho: f64, eps_rel: f64, rng: &mut R) -> Result<C64> {
    let ann = Region::new(&Domain::Annulus { r: rho });
    let mut policy = StepPolicy::for_scale(1.0);
    policy.eps_hit = 0.01 * eps_rel;
    policy.eps_wos = 0.1 * eps_rel;
    policy.dt_euler = (0.25 * policy.eps_wos).powi(2);
    loop {
        let z0 = unit_circle(rng) * (1.0 + eps_rel);
        let (p, id, _) = run_exit(&ann, z0, &policy, rng, None)?;
        if id == BoundaryId::A0 {
            return Ok(p);
        }
    }
}

/// Public entry: samples an excursion exit for hole `i` of `domain`.
pub fn sample_excursion_exit(domain: &Domain, i: usize, eta: &EtaConfig, stream: RngStream) -> Result<C64> {
    let holes = domain.holes();
    let h =
        holes.get(i.wrapping_sub(1)).ok_or_else(|| Error::InvalidArgument(format!("hole index {i} out of range")))?;
    excursion_exit(h, eta, &mut stream.rng())
}

/// Kind of a recorded path event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Brownian segment ended on a hole.
    InteriorExit,
    /// Excursion from a hole ended on its `eta` curve.
    Excursion,
    /// Path reached `A0`.
    Killed,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::InteriorExit => "interior_exit",
            EventKind::Excursion => "excursion",
            EventKind::Killed => "killed",
        }
    }
}

/// One boundary event of an ERBM path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub point: C64,
    /// 0 for `A0`, `i` for hole `A_i`.
    pub boundary: usize,
}

/// An event-compressed ERBM path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErbmPath {
    pub events: Vec<Event>,
    /// Exit point on `A0`.
    pub exit: C64,
    /// Holes visited, in order.
    pub hole_visits: Vec<usize>,
    pub occupation: Option<Vec<f64>>,
}

/// Precomputed sampling context shared by all paths of one estimator.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub region: Region,
    pub holes: Vec<Hole>,
    pub eta: EtaConfig,
    pub policy: StepPolicy,
    /// `eta_terms[k][c]`: expected weighted occupation of cell `c` during one
    /// excursion from hole `k + 1` to its `eta` curve.
    eta_terms: Vec<Vec<f64>>,
    domain: Domain,
}

impl Sampler {
    pub fn new(domain: &Domain, eta: EtaConfig, policy: StepPolicy) -> Result<Self> {
        domain.validate()?;
        policy.validate()?;
        if domain.n_holes() > 0 {
            eta.validate(domain)?;
        }
        Ok(Sampler {
            region: Region::new(domain),
            holes: domain.holes(),
            eta,
            policy,
            eta_terms: vec![],
            domain: domain.clone(),
        })
    }

    pub fn for_domain(domain: &Domain) -> Result<Self> {
        Self::new(domain, EtaConfig::default(), StepPolicy::for_domain(domain))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Prepares the analytic occupation terms for the given cells.
    pub fn with_cells(mut self, cells: &[Cell]) -> Result<Self> {
        if !cells.is_empty() && self.eta.mode != ExcursionMode::Exact && !self.holes.is_empty() {
            return Err(Error::InvalidArgument("occupation estimates need the exact excursion mode".into()));
        }
        self.eta_terms = (0..self.holes.len())
            .map(|k| cells.iter().map(|c| eta_occupation(c, k, &self.holes, self.eta.rho)).collect())
            .collect();
        Ok(self)
    }

    /// Runs one path from `start` until it is killed.
    pub fn run<R: Rng + ?Sized>(
        &self,
        start: ErbmState,
        rng: &mut R,
        mut occ: Option<&mut Occupation>,
        mut events: Option<&mut Vec<Event>>,
    ) -> Result<(C64, Vec<usize>)> {
        let mut state = start;
        let mut visits = vec![];
        loop {
            match state {
                ErbmState::Interior { z } => {
                    let (p, id, _) = run_exit(&self.region, z, &self.policy, rng, occ.as_deref_mut())?;
                    match id {
                        BoundaryId::A0 => {
                            if let Some(ev) = events.as_deref_mut() {
                                ev.push(Event { kind: EventKind::Killed, point: p, boundary: 0 });
                            }
                            return Ok((p, visits));
                        }
                        BoundaryId::Hole(i, _) => {
                            if let Some(ev) = events.as_deref_mut() {
                                ev.push(Event { kind: EventKind::InteriorExit, point: p, boundary: i });
                            }
                            state = ErbmState::Hole { i };
                        }
                    }
                }
                ErbmState::Hole { i } => {
                    visits.push(i);
                    if let Some(o) = occ.as_deref_mut() {
                        for (c, v) in self.eta_terms[i - 1].iter().enumerate() {
                            o.add(c, *v);
                        }
                    }
                    let z = excursion_exit(&self.holes[i - 1], &self.eta, rng)?;
                    if let Some(ev) = events.as_deref_mut() {
                        ev.push(Event { kind: EventKind::Excursion, point: z, boundary: i });
                    }
                    state = ErbmState::Interior { z };
                }
                ErbmState::Killed => unreachable!(),
            }
        }
    }

    /// One transition of the boundary chain from hole `i`: the boundary
    /// component reached after the excursion, and the point reached.
    pub fn transition<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<(usize, C64)> {
        let z = excursion_exit(&self.holes[i - 1], &self.eta, rng)?;
        let (p, id, _) = run_exit(&self.region, z, &self.policy, rng, None)?;
        Ok((id.index(), p))
    }
}

/// Green's function of the region between a hole and its `eta` curve with
/// the hole collapsed to a point, in disk coordinates: `(log rho - log|zeta|)/pi`.
fn eta_green(rho: f64, m: f64) -> f64 {
    if m >= rho {
        0.0
    } else {
        (rho.ln() - m.ln()) / PI
    }
}

/// Expected weighted occupation of `cell` during one excursion from hole
/// `k` (0-based) to its `eta` curve.
fn eta_occupation(cell: &Cell, k: usize, holes: &[Hole], rho: f64) -> f64 {
    let h = &holes[k];
    let prim = |s: f64| s * s * (rho.ln() - s.ln() + 0.5);
    match *cell {
        Cell::Ring { hole, r_lo, r_hi } if hole == k + 1 => {
            let hi = r_hi.min(rho);
            if hi <= r_lo {
                0.0
            } else {
                prim(hi) - prim(r_lo.max(1.0))
            }
        }
        Cell::Ring { hole, r_lo, r_hi } => {
            let g = &holes[hole - 1];
            let q = gauss_legendre(48);
            let mut s = 0.0;
            for &(xr, wr) in q.iter() {
                let r = 0.5 * (r_lo + r_hi) + 0.5 * (r_hi - r_lo) * xr;
                for m in 0..96 {
                    let zeta = C64::from_polar(r, TAU * (m as f64 + 0.5) / 96.0);
                    let z = g.from_disk(zeta);
                    if let Ok(w) = h.to_disk(z) {
                        s += wr * r * eta_green(rho, w.norm());
                    }
                }
            }
            s * 0.5 * (r_hi - r_lo) * TAU / 96.0
        }
        Cell::Disk { center, r } => {
            let q = gauss_legendre(48);
            let mut s = 0.0;
            for &(xr, wr) in q.iter() {
                let rr = 0.5 * r * (1.0 + xr);
                for m in 0..96 {
                    let z = center + C64::from_polar(rr, TAU * (m as f64 + 0.5) / 96.0);
                    if let Ok(w) = h.to_disk(z) {
                        s += wr * rr * eta_green(rho, w.norm());
                    }
                }
            }
            s * 0.5 * r * TAU / 96.0
        }
        Cell::Rect { x0, x1, y0, y1 } => {
            let q = gauss_legendre(48);
            let mut s = 0.0;
            for &(xa, wa) in q.iter() {
                for &(xb, wb) in q.iter() {
                    let z = C64::new(0.5 * (x0 + x1) + 0.5 * (x1 - x0) * xa, 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * xb);
                    if let Ok(w) = h.to_disk(z) {
                        s += wa * wb * eta_green(rho, w.norm());
                    }
                }
            }
            s * 0.25 * (x1 - x0) * (y1 - y0)
        }
    }
}

/// Simulates one ERBM path from `start`.
pub fn sample_erbm(
    domain: &Domain,
    start: ErbmState,
    eta: &EtaConfig,
    policy: &StepPolicy,
    stream: RngStream,
    cells: Option<&[Cell]>,
) -> Result<ErbmPath> {
    start.validate(domain)?;
    let sampler = Sampler::new(domain, *eta, *policy)?.with_cells(cells.unwrap_or(&[]))?;
    let mut occ = cells.map(|c| Occupation::new(c, domain));
    let mut events = vec![];
    let mut rng = stream.rng();
    let (exit, hole_visits) = sampler.run(start, &mut rng, occ.as_mut(), Some(&mut events))?;
    Ok(ErbmPath { events, exit, hole_visits, occupation: occ.map(|o| o.path) })
}

/// Coordinate of a point of `A0` used for hitting densities: arc length.
/// On the real line this is `x`; on the annulus' outer circle it is `r`
/// times the angle in `(-pi, pi]`. Hull points have no coordinate.
pub fn boundary_coordinate(domain: &Domain, p: C64) -> Option<f64> {
    match domain {
        Domain::Annulus { r } => Some(r * p.arg()),
        _ => {
            if p.im == 0.0 {
                Some(p.re)
            } else {
                None
            }
        }
    }
}

/// Estimates the ER hitting density on `A0` per unit arc length from
/// `start`, binned by the arc-length coordinate.
pub fn erbm_hitting_density(
    sampler: &Sampler,
    start: ErbmState,
    edges: &[f64],
    stream: RngStream,
    n: u64,
) -> Result<Histogram> {
    start.validate(sampler.domain())?;
    let parts = crate::parallel::map_ranges(n, |range| -> Result<Histogram> {
        let mut h = Histogram::new(edges.to_vec());
        for p in range {
            let mut rng = stream.path(p).rng();
            let (exit, _) = sampler.run(start, &mut rng, None, None)?;
            h.record(boundary_coordinate(sampler.domain(), exit));
        }
        Ok(h)
    });
    let mut total = Histogram::new(edges.to_vec());
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

/// Harmonic measure of arcs of `A0` for ERBM from `start`: the probability of
/// exiting through each `[lo, hi)` (arc-length coordinate), with stderr.
pub fn erbm_arc_measure(
    sampler: &Sampler,
    start: ErbmState,
    arcs: &[(f64, f64)],
    stream: RngStream,
    n: u64,
) -> Result<Vec<Estimate>> {
    start.validate(sampler.domain())?;
    let parts = crate::parallel::map_ranges(n, |range| -> Result<Vec<u64>> {
        let mut c = vec![0u64; arcs.len()];
        for p in range {
            let mut rng = stream.path(p).rng();
            let (exit, _) = sampler.run(start, &mut rng, None, None)?;
            if let Some(s) = boundary_coordinate(sampler.domain(), exit) {
                for (k, (lo, hi)) in arcs.iter().enumerate() {
                    if s >= *lo && s < *hi {
                        c[k] += 1;
                    }
                }
            }
        }
        Ok(c)
    });
    let mut tot = vec![0u64; arcs.len()];
    for p in parts {
        for (a, b) in tot.iter_mut().zip(p?) {
            *a += b;
        }
    }
    Ok(tot.iter().map(|k| crate::stats::proportion(*k, n)).collect())
}

/// Mean occupation time per unit (weighted) area of each cell: the cell
/// average of the ER Green's function from `start`.
pub fn occupation_density(
    sampler: &Sampler,
    start: ErbmState,
    cells: &[Cell],
    stream: RngStream,
    n: u64,
) -> Result<Vec<Estimate>> {
    start.validate(sampler.domain())?;
    let sampler = sampler.clone().with_cells(cells)?;
    let parts = crate::parallel::map_ranges(n, |range| -> Result<Vec<MeanAcc>> {
        let mut acc = vec![MeanAcc::default(); cells.len()];
        let mut occ = Occupation::new(cells, sampler.domain());
        for p in range {
            occ.reset();
            let mut rng = stream.path(p).rng();
            sampler.run(start, &mut rng, Some(&mut occ), None)?;
            for (a, v) in acc.iter_mut().zip(&occ.path) {
                a.push(*v);
            }
        }
        Ok(acc)
    });
    let mut acc = vec![MeanAcc::default(); cells.len()];
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p?) {
            a.merge(&b);
        }
    }
    Ok(acc.iter().zip(cells).map(|(a, c)| a.estimate().scale(1.0 / c.area())).collect())
}

/// Estimated boundary Markov chain over `{A0, A1, .., An}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryChain {
    pub n: usize,
    /// `(n+1) x (n+1)` transition matrix; row 0 is absorbing.
    pub p: Vec<Vec<f64>>,
    /// `n x n` loop-erased transitions between holes.
    pub q: Vec<Vec<f64>>,
    /// `(I - Q)^{-1}`.
    pub fundamental: Vec<Vec<f64>>,
    /// Transition tallies per starting hole.
    pub counts: Vec<Vec<u64>>,
    /// Transitions simulated per hole.
    pub transitions: u64,
}

impl BoundaryChain {
    /// Builds the chain from tallies `counts[i][j]` of transitions from hole
    /// `i + 1` to component `j`.
    pub fn from_counts(counts: Vec<Vec<u64>>, transitions: u64) -> Result<Self> {
        let n = counts.len();
        let mut p = vec![vec![0.0; n + 1]; n + 1];
        p[0][0] = 1.0;
        for i in 0..n {
            for j in 0..=n {
                p[i + 1][j] = counts[i][j] as f64 / transitions as f64;
            }
        }
        let q = loop_erase(&p)?;
        let f = fundamental_matrix(&DMatrix::from_fn(n, n, |i, j| q[i][j]))?;
        Ok(BoundaryChain {
            n,
            p,
            q,
            fundamental: (0..n).map(|i| (0..n).map(|j| f[(i, j)]).collect()).collect(),
            counts,
            transitions,
        })
    }

    /// `q_ij` with its binomial stderr.
    pub fn q_estimate(&self, i: usize, j: usize) -> Estimate {
        let c = &self.counts[i - 1];
        let stay = c[i];
        let m = self.transitions - stay;
        crate::stats::proportion(c[j], m.max(1))
    }

    /// Probability that the loop-erased chain leaves hole `i` for `A0`.
    pub fn q0(&self, i: usize) -> f64 {
        let pii = self.p[i][i];
        self.p[i][0] / (1.0 - pii)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "p": self.p,
            "q": self.q,
            "fundamental": self.fundamental,
            "n": self.n,
        })
    }
}

/// `q_ij = p_ij / (1 - p_ii)` for holes `i != j`, `q_ii = 0`.
pub fn loop_erase(p: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = p.len() - 1;
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        let pii = p[i + 1][i + 1];
        if pii >= 1.0 - 1e-9 {
            return Err(Error::Numerical(format!("hole {} returns to itself with probability {pii}", i + 1)));
        }
        for j in 0..n {
            if i != j {
                q[i][j] = p[i + 1][j + 1] / (1.0 - pii);
            }
        }
    }
    Ok(q)
}

/// Solves `(I - Q) X = I`.
pub fn fundamental_matrix(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::InvalidArgument("Q must be square".into()));
    }
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let v = q[(i, j)];
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument("Q entries must be nonnegative".into()));
            }
            if i == j && v != 0.0 {
                return Err(Error::InvalidArgument("Q must have zero diagonal".into()));
            }
            row += v;
        }
        if row >= 1.0 - 1e-9 {
            return Err(Error::Numerical(format!(
                "row {} of Q sums to {row}: the chain must reach A0 from every hole",
                i + 1
            )));
        }
    }
    let a = DMatrix::identity(n, n) - q;
    a.lu().try_inverse().ok_or_else(|| Error::Singular("I - Q is singular".into()))
}

/// Partial Neumann sum `I + Q + .. + Q^k`.
pub fn neumann_sum(q: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = q.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut s = term.clone();
    for _ in 0..k {
        term = &term * q;
        s += &term;
    }
    s
}

/// Simulates `n_transitions` transitions from every hole and assembles the
/// chain.
pub fn estimate_chain(sampler: &Sampler, stream: RngStream, n_transitions: u64) -> Result<BoundaryChain> {
    let n = sampler.holes.len();
    if n == 0 {
        return Err(Error::InvalidArgument("the chain needs at least one hole".into()));
    }
    let mut counts = vec![vec![0u64; n + 1]; n];
    for i in 1..=n {
        let s = stream.derive(&format!("chain-{i}"));
        let parts = crate::parallel::map_ranges(n_transitions, |range| -> Result<Vec<u64>> {
            let mut c = vec![0u64; n + 1];
            for p in range {
                let (j, _) = sampler.transition(i, &mut s.path(p).rng())?;
                c[j] += 1;
            }
            Ok(c)
        });
        for part in parts {
            for (a, b) in counts[i - 1].iter_mut().zip(part?) {
                *a += b;
            }
        }
    }
    BoundaryChain::from_counts(counts, n_transitions)
}

/// Two sides of the semigroup identity with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Combined standard error of `lhs - rhs`.
    pub sigma: f64,
}

/// Process run by [`euler_exterior`].
#[derive(Debug, Clone, Copy, PartialEq)]
enum Exterior {
    Erbm,
    /// Reflected at the unit circle; also reports whether the unit disk was
    /// ever entered, which kills the plain motion.
    Reflected,
}

/// Euler scheme in `C \ D` with radial reflection at the unit circle.
fn euler_exterior<R: Rng + ?Sized>(z0: C64, t: f64, dt: f64, kind: Exterior, rng: &mut R) -> (C64, bool) {
    let steps = (t / dt).round() as usize;
    let mut z = z0;
    let mut hit = false;
    for _ in 0..steps {
        z += gaussian_step(rng, dt);
        let m = z.norm();
        if m < 1.0 {
            hit = true;
            let r = (2.0 - m).max(1.0);
            z = match kind {
                Exterior::Erbm => unit_circle(rng) * r,
                Exterior::Reflected => {
                    if m > 0.0 {
                        z * (r / m)
                    } else {
                        C64::new(r, 0.0)
                    }
                }
            };
        }
    }
    (z, hit)
}

/// Checks `E f(X_t) = E fbar(Y_t) + E[(f - fbar)(B_t); t < T]` in the
/// exterior of the unit disk, with `X` ERBM, `Y` reflected Brownian motion,
/// `B` Brownian motion killed on the disk and `fbar` the angular average.
pub fn semigroup_check(
    f: &(dyn Fn(C64) -> f64 + Sync),
    z0: C64,
    t: f64,
    dt: f64,
    stream: RngStream,
    n: u64,
) -> Result<SemigroupReport> {
    if !(z0.norm() > 1.0) {
        return Err(Error::outside(z0, "semigroup start must satisfy |z| > 1"));
    }
    let fbar = |r: f64| {
        let m = 64;
        (0..m).map(|k| f(C64::from_polar(r, TAU * k as f64 / m as f64))).sum::<f64>() / m as f64
    };
    let ls = stream.derive("erbm");
    let rs = stream.derive("reflected");
    let parts = crate::parallel::map_ranges(n, |range| {
        let mut l = MeanAcc::default();
        let mut r = MeanAcc::default();
        for p in range {
            let (x, _) = euler_exterior(z0, t, dt, Exterior::Erbm, &mut ls.path(p).rng());
            l.push(f(x));
            let (y, hit) = euler_exterior(z0, t, dt, Exterior::Reflected, &mut rs.path(p).rng());
            let fb = fbar(y.norm());
            r.push(fb + if hit { 0.0 } else { f(y) - fb });
        }
        (l, r)
    });
    let mut l = MeanAcc::default();
    let mut r = MeanAcc::default();
    for (a, b) in parts {
        l.merge(&a);
        r.merge(&b);
    }
    let (lhs, rhs) = (l.estimate(), r.estimate());
    Ok(SemigroupReport { lhs, rhs, sigma: (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    #[test]
    fn fundamental_two_by_two() {
        let a = 0.3;
        let q = DMatrix::from_row_slice(2, 2, &[0.0, a, a, 0.0]);
        let f = fundamental_matrix(&q).unwrap();
        let e = DMatrix::from_row_slice(2, 2, &[1.0, a, a, 1.0]) / (1.0 - a * a);
        assert!((f - e).abs().max() < 1e-12);
    }

    #[test]
    fn fundamental_zero_and_neumann() {
        let f = fundamental_matrix(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(f, DMatrix::identity(3, 3));
        let q = DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.3, 0.1, 0.0, 0.4, 0.25, 0.25, 0.0]);
        let f = fundamental_matrix(&q).unwrap();
        assert!((neumann_sum(&q, 50) - &f).abs().max() < 1e-8);
        let mut prev = 0.0;
        for k in [1, 2, 5, 10] {
            let s = neumann_sum(&q, k)[(0, 0)];
            assert!(s >= prev && s <= f[(0, 0)] + 1e-15);
            prev = s;
        }
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(fundamental_matrix(&bad).is_err());
    }

    #[test]
    fn one_hole_chain_is_trivial() {
        let d = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let s = Sampler::for_domain(&d).unwrap();
        let c = estimate_chain(&s, RngStream::new(1, 0), 2000).unwrap();
        assert_eq!(c.q, vec![vec![0.0]]);
        assert_eq!(c.fundamental, vec![vec![1.0]]);
        let sum: f64 = c.p[1].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_holes_matches_brownian_sampler() {
        let d = Domain::halfplane();
        let s = Sampler::for_domain(&d).unwrap();
        let st = RngStream::new(4, 2);
        let (x, v) = s.run(ErbmState::interior(C64::i()), &mut st.rng(), None, None).unwrap();
        let b = crate::brownian::sample_bm_exit(&d, C64::i(), &s.policy, st, None).unwrap();
        assert_eq!(x, b.point);
        assert!(v.is_empty());
    }

    #[test]
    fn hole_start_records_excursion_first() {
        let d = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let p = sample_erbm(
            &d,
            ErbmState::Hole { i: 1 },
            &EtaConfig::default(),
            &StepPolicy::for_domain(&d),
            RngStream::new(9, 9),
            None,
        )
        .unwrap();
        assert_eq!(p.events[0].kind, EventKind::Excursion);
        assert_eq!(p.events.last().unwrap().kind, EventKind::Killed);
    }

    #[test]
    fn eta_validation_rejects_overlap() {
        let d = Domain::chordal(vec![Slit::new(0.3, -1.0, 1.0).unwrap()]).unwrap();
        assert!(EtaConfig::new(1.5).validate(&d).is_err());
        assert!(EtaConfig::new(1.2).validate(&d).is_ok());
    }

    #[test]
    fn eta_ring_term_matches_annulus_green() {
        // Ring 1 < |zeta| < rho: integral of (log rho - log s)/pi over it.
        let holes = vec![Hole::Disk(crate::geometry::Disk { cx: 0.0, cy: 0.0, r: 1.0 })];
        let rho = 1.5f64;
        let exact = rho * rho / 2.0 - 0.5 - rho.ln();
        let v = eta_occupation(&Cell::Ring { hole: 1, r_lo: 1.0, r_hi: 2.0 }, 0, &holes, rho);
        assert!((v - exact).abs() < 1e-12, "{v} {exact}");
        let d = eta_occupation(&Cell::Disk { center: C64::new(1.25, 0.0), r: 0.2 }, 0, &holes, rho);
        let mid = eta_green(rho, 1.25) * PI * 0.04;
        assert!((d - mid).abs() / mid < 0.02, "{d} {mid}");
    }
}
