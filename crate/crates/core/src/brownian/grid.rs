//! Finite-difference Laplace solver on a nonuniform tensor mesh.
//!
//! Slits, the vertical-slit hull and the real axis are aligned with mesh
//! lines; circles and polylines cut stencil arms (Shortley-Weller). A hole in
//! ER mode carries an unknown constant boundary value together with a discrete
//! flux equation, so the same solver produces harmonic measures, Poisson
//! kernels and ER-harmonic functions.

use serde::{Deserialize, Serialize};

use crate::geometry::{dist_to_segment, segment_intersection, BoundaryId, Domain, Hole, Hull};
use crate::sparse::{bicgstab, CsrBuilder, Ilu0};
use crate::{Error, Result, C64};

/// Mesh parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Spacing in the core box.
    pub h: f64,
    /// Core box `[x0, x1] x [y0, y1]` meshed with spacing `h`.
    pub core: [f64; 4],
    /// Half-width and height of the truncated half-plane.
    pub far: f64,
    /// Geometric growth of the spacing outside the core.
    pub growth: f64,
}

impl GridConfig {
    /// A core box enclosing every hole and hull with margin, truncated at
    /// `1e4`.
    pub fn for_domain(domain: &Domain, h: f64) -> Self {
        match domain {
            Domain::Annulus { r } => GridConfig { h, core: [-r, *r, -r, *r], far: *r, growth: 1.0 },
            _ => {
                let mut x0: f64 = -1.0;
                let mut x1: f64 = 1.0;
                let mut y1: f64 = 1.0;
                for hole in domain.holes() {
                    let (a, b, _, d) = hole.bbox();
                    x0 = x0.min(a);
                    x1 = x1.max(b);
                    y1 = y1.max(d);
                }
                if let Some(hull) = domain.hull() {
                    for (a, b) in hull.segments() {
                        x0 = x0.min(a.re).min(b.re);
                        x1 = x1.max(a.re).max(b.re);
                        y1 = y1.max(a.im).max(b.im);
                    }
                }
                let m = 0.5 * (x1 - x0).max(y1);
                GridConfig { h, core: [x0 - m, x1 + m, 0.0, y1 + m], far: 1e4, growth: 1.08 }
            }
        }
    }

    pub fn with_core(mut self, core: [f64; 4]) -> Self {
        self.core = core;
        self
    }
}

/// Boundary data for [`grid_harmonic`].
pub struct BoundaryProblem<'a> {
    /// Value on the killing boundary and holes. For ER holes this is the part
    /// added to the unknown constant.
    pub data: &'a (dyn Fn(BoundaryId, C64) -> f64 + Sync),
    /// Value on the truncation box.
    pub far: &'a (dyn Fn(C64) -> f64 + Sync),
    /// Per hole: `None` for Dirichlet data, `Some(flux)` for an unknown
    /// constant with prescribed flux of `u` into the hole.
    pub er_flux: Vec<Option<f64>>,
}

/// Mesh line coordinates: uniform nodes in `[lo, hi]` merged with the special
/// values, then geometric growth out to `[lo_far, hi_far]`.
fn axis(lo: f64, hi: f64, h: f64, specials: &[f64], lo_far: f64, hi_far: f64, growth: f64) -> Vec<f64> {
    let mut sp: Vec<f64> = specials.iter().copied().filter(|s| *s >= lo && *s <= hi).collect();
    sp.push(lo);
    sp.push(hi);
    sp.sort_by(f64::total_cmp);
    sp.dedup();
    let mut core: Vec<f64> = sp.clone();
    let k0 = (lo / h).ceil() as i64;
    let k1 = (hi / h).floor() as i64;
    for k in k0..=k1 {
        let x = k as f64 * h;
        let near = sp.iter().any(|s| (s - x).abs() < 0.3 * h);
        if !near {
            core.push(x);
        }
    }
    core.sort_by(f64::total_cmp);
    let mut left = vec![];
    let mut x = lo;
    let mut step = h;
    while x > lo_far {
        step *= growth;
        x -= step;
        if x - lo_far < 0.5 * step {
            x = lo_far;
        }
        left.push(x);
    }
    let mut right = vec![];
    let mut x = hi;
    let mut step = h;
    while x < hi_far {
        step *= growth;
        x += step;
        if hi_far - x < 0.5 * step {
            x = hi_far;
        }
        right.push(x);
    }
    left.reverse();
    left.extend(core);
    left.extend(right);
    left
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Interior(usize),
    /// Fixed value.
    Fixed,
    /// Node on ER hole `k` (0-based) with data offset.
    Er(usize),
}

/// A piece of boundary a stencil arm can cut.
#[derive(Debug, Clone, Copy)]
enum Cut {
    Circle { c: C64, r: f64, inside_is_boundary: bool, id: BoundaryId },
    Segment { a: C64, b: C64, id: BoundaryId },
}

/// Solution of a grid Laplace problem with bilinear evaluation.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Nodal values, row-major with `x` fastest.
    pub values: Vec<f64>,
    interior: Vec<bool>,
    grad: Vec<C64>,
    /// Constants of the ER holes, `None` for Dirichlet holes.
    pub constants: Vec<Option<f64>>,
    /// Relative residual of the linear solve.
    pub residual: f64,
    domain: Domain,
}

impl GridSolution {
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }

    fn locate(&self, z: C64) -> Result<(usize, usize, f64, f64)> {
        let nx = self.xs.len();
        let ny = self.ys.len();
        if !(z.re >= self.xs[0] && z.re <= self.xs[nx - 1] && z.im >= self.ys[0] && z.im <= self.ys[ny - 1]) {
            return Err(Error::outside(z, "outside the grid box"));
        }
        let i = (self.xs.partition_point(|&x| x <= z.re).max(1) - 1).min(nx - 2);
        let j = (self.ys.partition_point(|&y| y <= z.im).max(1) - 1).min(ny - 2);
        let s = (z.re - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        let t = (z.im - self.ys[j]) / (self.ys[j + 1] - self.ys[j]);
        Ok((i, j, s, t))
    }

    /// Bilinear interpolant at `z`.
    pub fn eval(&self, z: C64) -> Result<f64> {
        if !self.domain.contains(z) {
            return Err(Error::outside(z, "grid evaluation needs an interior point"));
        }
        let (i, j, s, t) = self.locate(z)?;
        let v = |a, b| self.values[self.idx(a, b)];
        Ok((1.0 - s) * (1.0 - t) * v(i, j)
            + s * (1.0 - t) * v(i + 1, j)
            + (1.0 - s) * t * v(i, j + 1)
            + s * t * v(i + 1, j + 1))
    }

    /// Gradient `(u_x, u_y)` packed as a complex number.
    pub fn gradient(&self, z: C64) -> Result<C64> {
        if !self.domain.contains(z) {
            return Err(Error::outside(z, "grid gradient needs an interior point"));
        }
        let (i, j, s, t) = self.locate(z)?;
        let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        if corners.iter().all(|&(a, b)| self.interior[self.idx(a, b)]) {
            let g = |a, b| self.grad[self.idx(a, b)];
            return Ok(g(i, j) * ((1.0 - s) * (1.0 - t))
                + g(i + 1, j) * (s * (1.0 - t))
                + g(i, j + 1) * ((1.0 - s) * t)
                + g(i + 1, j + 1) * (s * t));
        }
        let v = |a, b| self.values[self.idx(a, b)];
        let hx = self.xs[i + 1] - self.xs[i];
        let hy = self.ys[j + 1] - self.ys[j];
        let ux = ((1.0 - t) * (v(i + 1, j) - v(i, j)) + t * (v(i + 1, j + 1) - v(i, j + 1))) / hx;
        let uy = ((1.0 - s) * (v(i, j + 1) - v(i, j)) + s * (v(i + 1, j + 1) - v(i + 1, j))) / hy;
        Ok(C64::new(ux, uy))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Smallest mesh spacing.
    pub fn min_spacing(&self) -> f64 {
        let m = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        m(&self.xs).min(m(&self.ys))
    }
}

fn component_separation(domain: &Domain) -> f64 {
    let holes = domain.holes();
    let mut sep = f64::INFINITY;
    if let Domain::Annulus { r } = domain {
        return r - 1.0;
    }
    for (k, h) in holes.iter().enumerate() {
        let (_, _, y0, _) = h.bbox();
        sep = sep.min(y0);
        for g in &holes[k + 1..] {
            let d = sample_boundary(g).iter().map(|p| h.dist(*p)).fold(f64::INFINITY, f64::min);
            sep = sep.min(d);
        }
        if let Some(hull) = domain.hull() {
            let d = sample_boundary(h).iter().map(|p| hull.dist(*p)).fold(f64::INFINITY, f64::min);
            sep = sep.min(d);
        }
    }
    sep
}

fn sample_boundary(h: &Hole) -> Vec<C64> {
    (0..400)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / 400.0;
            h.from_disk(C64::from_polar(1.0, th))
        })
        .collect()
}

/// Solves the Laplace equation on `domain` with the given boundary data.
pub fn grid_harmonic(domain: &Domain, problem: &BoundaryProblem, cfg: &GridConfig) -> Result<GridSolution> {
    domain.validate()?;
    let holes = domain.holes();
    if problem.er_flux.len() != holes.len() {
        return Err(Error::InvalidArgument("er_flux needs one entry per hole".into()));
    }
    let h = cfg.h;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("mesh size must be positive".into()));
    }
    if component_separation(domain) < 4.0 * h {
        return Err(Error::InvalidArgument(format!(
            "mesh size {h} does not resolve the minimum boundary separation with 4 cells"
        )));
    }
    let annulus = match domain {
        Domain::Annulus { r } => Some(*r),
        _ => None,
    };
    let hull = domain.hull().cloned();
    let mut sx = vec![];
    let mut sy = vec![];
    for hole in &holes {
        if let Hole::Slit(s) = hole {
            sx.push(s.x1);
            sx.push(s.x2);
            sy.push(s.y);
        }
    }
    if let Some(Hull::VerticalSlit { x, height }) = &hull {
        sx.push(*x);
        sy.push(*height);
    }
    let [cx0, cx1, cy0, cy1] = cfg.core;
    let (xs, ys) = match annulus {
        Some(r) => (axis(-r, r, h, &[0.0], -r, r, 1.0), axis(-r, r, h, &[0.0], -r, r, 1.0)),
        None => {
            (axis(cx0, cx1, h, &sx, -cfg.far, cfg.far, cfg.growth), axis(cy0, cy1, h, &sy, 0.0, cfg.far, cfg.growth))
        }
    };
    let nx = xs.len();
    let ny = ys.len();
    let at = |i: usize, j: usize| C64::new(xs[i], ys[j]);

    let mut cuts: Vec<Cut> = vec![];
    if let Some(r) = annulus {
        cuts.push(Cut::Circle { c: C64::new(0.0, 0.0), r, inside_is_boundary: false, id: BoundaryId::A0 });
        cuts.push(Cut::Circle {
            c: C64::new(0.0, 0.0),
            r: 1.0,
            inside_is_boundary: true,
            id: BoundaryId::Hole(1, None),
        });
    }
    for (k, hole) in holes.iter().enumerate() {
        if let (Hole::Disk(d), None) = (hole, annulus) {
            cuts.push(Cut::Circle {
                c: d.center(),
                r: d.r,
                inside_is_boundary: true,
                id: BoundaryId::Hole(k + 1, None),
            });
        }
    }
    match &hull {
        Some(Hull::HalfDisk { x, radius }) => {
            cuts.push(Cut::Circle { c: C64::new(*x, 0.0), r: *radius, inside_is_boundary: true, id: BoundaryId::A0 })
        }
        Some(Hull::Polyline { points }) => {
            for w in points.windows(2) {
                cuts.push(Cut::Segment { a: w[0], b: w[1], id: BoundaryId::A0 });
            }
        }
        _ => {}
    }

    // Classify nodes.
    let n_nodes = nx * ny;
    let mut kind = vec![Node::Fixed; n_nodes];
    let mut fixed = vec![0.0; n_nodes];
    let mut er_off = vec![0.0; n_nodes];
    let mut n_int = 0usize;
    let er_index = |id: BoundaryId| -> Option<usize> {
        match id {
            BoundaryId::Hole(k, _) if problem.er_flux[k - 1].is_some() => Some(k - 1),
            _ => None,
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            let z = at(i, j);
            let id = j * nx + i;
            let on: Option<(BoundaryId, C64)> = match annulus {
                Some(r) => {
                    let m = z.norm();
                    if m >= r {
                        Some((BoundaryId::A0, if m > 0.0 { z * (r / m) } else { z }))
                    } else if m <= 1.0 {
                        Some((BoundaryId::Hole(1, None), if m > 0.0 { z / m } else { C64::new(1.0, 0.0) }))
                    } else {
                        None
                    }
                }
                None => {
                    if j == 0 {
                        Some((BoundaryId::A0, z))
                    } else if i == 0 || i == nx - 1 || j == ny - 1 {
                        fixed[id] = (problem.far)(z);
                        kind[id] = Node::Fixed;
                        continue;
                    } else {
                        let mut found = None;
                        if let Some(hl) = &hull {
                            if hl.covers(z) || hl.dist(z) < 1e-12 * h {
                                found = Some((BoundaryId::A0, hl.project(z)));
                            }
                        }
                        if found.is_none() {
                            for (k, hole) in holes.iter().enumerate() {
                                if hole.covers(z) {
                                    let p = match hole {
                                        Hole::Slit(_) => z,
                                        Hole::Disk(d) => {
                                            let w = z - d.center();
                                            let n = w.norm();
                                            if n > 0.0 {
                                                d.center() + w * (d.r / n)
                                            } else {
                                                d.center() + d.r
                                            }
                                        }
                                    };
                                    found = Some((BoundaryId::Hole(k + 1, None), p));
                                    break;
                                }
                            }
                        }
                        found
                    }
                }
            };
            match on {
                Some((bid, p)) => {
                    let v = (problem.data)(bid, p);
                    if let Some(k) = er_index(bid) {
                        kind[id] = Node::Er(k);
                        er_off[id] = v;
                    } else {
                        kind[id] = Node::Fixed;
                        fixed[id] = v;
                    }
                }
                None => {
                    kind[id] = Node::Interior(n_int);
                    n_int += 1;
                }
            }
        }
    }
    let er_holes: Vec<usize> = (0..holes.len()).filter(|k| problem.er_flux[*k].is_some()).collect();
    let er_col: Vec<Option<usize>> =
        (0..holes.len()).map(|k| er_holes.iter().position(|e| *e == k).map(|p| n_int + p)).collect();
    let n = n_int + er_holes.len();

    // One stencil arm: length, and either a node neighbour or a cut point.
    #[derive(Clone, Copy)]
    enum Arm {
        Node(usize),
        Cut(C64, BoundaryId),
    }
    let cut_arm = |p: C64, q: C64| -> Option<(f64, C64, BoundaryId)> {
        let mut best: Option<(f64, C64, BoundaryId)> = None;
        for c in &cuts {
            let t = match *c {
                Cut::Circle { c, r, inside_is_boundary, id } => {
                    let inside_q = (q - c).norm() <= r;
                    let hit = if inside_is_boundary { inside_q } else { !inside_q || (q - c).norm() >= r };
                    if !hit {
                        continue;
                    }
                    let d = q - p;
                    let f = p - c;
                    let a = d.norm_sqr();
                    let b = 2.0 * (f.re * d.re + f.im * d.im);
                    let cc = f.norm_sqr() - r * r;
                    let disc = (b * b - 4.0 * a * cc).max(0.0).sqrt();
                    let t = if inside_is_boundary { (-b - disc) / (2.0 * a) } else { (-b + disc) / (2.0 * a) };
                    (t.clamp(0.0, 1.0), id)
                }
                Cut::Segment { a, b, id } => {
                    if dist_to_segment(p, a, b).0 > (q - p).norm() {
                        continue;
                    }
                    match segment_intersection(p, q, a, b) {
                        Some(t) => (t, id),
                        None => continue,
                    }
                }
            };
            let (t, id) = t;
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, p + (q - p) * t, id));
            }
        }
        best
    };

    let mut arms: Vec<[(f64, Arm); 4]> = Vec::with_capacity(n_int);
    let mut int_nodes: Vec<usize> = Vec::with_capacity(n_int);
    for j in 0..ny {
        for i in 0..nx {
            let id = j * nx + i;
            if !matches!(kind[id], Node::Interior(_)) {
                continue;
            }
            let p = at(i, j);
            let nbrs = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)];
            let mut a = [(0.0, Arm::Node(0)); 4];
            for (d, &(ii, jj)) in nbrs.iter().enumerate() {
                let q = at(ii, jj);
                let len = (q - p).norm();
                a[d] = match cut_arm(p, q) {
                    Some((t, b, bid)) if t < 1.0 => ((t * len).max(1e-9 * h), Arm::Cut(b, bid)),
                    _ => (len, Arm::Node(jj * nx + ii)),
                };
            }
            arms.push(a);
            int_nodes.push(id);
        }
    }

    // Assemble area-weighted equations.
    let mut bld = CsrBuilder::new();
    let mut rhs = vec![0.0; n];
    let mut er_rows: Vec<Vec<(usize, f64)>> = vec![vec![]; er_holes.len()];
    let mut er_rhs: Vec<f64> = er_holes.iter().map(|k| problem.er_flux[*k].unwrap()).collect();
    let mut er_diag = vec![0.0; er_holes.len()];
    for (row, a) in arms.iter().enumerate() {
        let (le, lw, ln, ls) = (a[0].0, a[1].0, a[2].0, a[3].0);
        let faces = [0.5 * (ln + ls), 0.5 * (ln + ls), 0.5 * (le + lw), 0.5 * (le + lw)];
        let mut diag = 0.0;
        for d in 0..4 {
            let coef = faces[d] / a[d].0;
            diag += coef;
            let (bval, ercol, erk): (Option<f64>, Option<usize>, Option<usize>) = match a[d].1 {
                Arm::Node(q) => match kind[q] {
                    Node::Interior(c) => {
                        bld.add(c, coef);
                        (None, None, None)
                    }
                    Node::Fixed => (Some(fixed[q]), None, None),
                    Node::Er(k) => (Some(er_off[q]), er_col[k], Some(k)),
                },
                Arm::Cut(b, bid) => {
                    let v = (problem.data)(bid, b);
                    match er_index(bid) {
                        Some(k) => (Some(v), er_col[k], Some(k)),
                        None => (Some(v), None, None),
                    }
                }
            };
            if let Some(v) = bval {
                rhs[row] -= coef * v;
                if let (Some(c), Some(k)) = (ercol, erk) {
                    bld.add(c, coef);
                    let e = c - n_int;
                    let _ = k;
                    er_rows[e].push((row, -coef));
                    er_diag[e] += coef;
                    er_rhs[e] -= coef * v;
                }
            }
        }
        bld.add(row, -diag);
        bld.end_row();
    }
    for e in 0..er_holes.len() {
        for &(c, v) in &er_rows[e] {
            bld.add(c, v);
        }
        bld.add(n_int + e, er_diag[e]);
        bld.end_row();
        rhs[n_int + e] = er_rhs[e];
    }
    let a = bld.build();
    let m = Ilu0::new(&a)?;
    let mut x = vec![0.0; n];
    let residual = bicgstab(&a, &m, &rhs, &mut x, 1e-14, 1e-10, 20_000)?;

    let constants: Vec<Option<f64>> = (0..holes.len()).map(|k| er_col[k].map(|c| x[c])).collect();
    let mut values = vec![0.0; n_nodes];
    let mut interior = vec![false; n_nodes];
    for id in 0..n_nodes {
        values[id] = match kind[id] {
            Node::Interior(c) => {
                interior[id] = true;
                x[c]
            }
            Node::Fixed => fixed[id],
            Node::Er(k) => er_off[id] + constants[k].unwrap(),
        };
    }
    let mut grad = vec![C64::new(f64::NAN, f64::NAN); n_nodes];
    for (row, a) in arms.iter().enumerate() {
        let id = int_nodes[row];
        let up = values[id];
        let val = |arm: &Arm| -> f64 {
            match *arm {
                Arm::Node(q) => values[q],
                Arm::Cut(b, bid) => {
                    let v = (problem.data)(bid, b);
                    match er_index(bid) {
                        Some(k) => v + constants[k].unwrap(),
                        None => v,
                    }
                }
            }
        };
        let d3 =
            |lp: f64, lm: f64, vp: f64, vm: f64| lm / (lp * (lp + lm)) * (vp - up) + lp / (lm * (lp + lm)) * (up - vm);
        let gx = d3(a[0].0, a[1].0, val(&a[0].1), val(&a[1].1));
        let gy = d3(a[2].0, a[3].0, val(&a[2].1), val(&a[3].1));
        grad[id] = C64::new(gx, gy);
    }
    Ok(GridSolution { xs, ys, values, interior, grad, constants, residual, domain: domain.clone() })
}

/// Harmonic measure of every hole in Dirichlet mode: `h_k` for hole `k`.
pub fn harmonic_measure_grid(domain: &Domain, k: usize, cfg: &GridConfig) -> Result<GridSolution> {
    let data = move |id: BoundaryId, _z: C64| if id.index() == k { 1.0 } else { 0.0 };
    let far = |_z: C64| 0.0;
    let problem = BoundaryProblem { data: &data, far: &far, er_flux: vec![None; domain.n_holes()] };
    grid_harmonic(domain, &problem, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slit;

    #[test]
    fn constant_data_gives_constant_field() {
        let d = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let data = |_: BoundaryId, _: C64| 2.5;
        let far = |_: C64| 2.5;
        let p = BoundaryProblem { data: &data, far: &far, er_flux: vec![None] };
        let cfg = GridConfig::for_domain(&d, 0.1);
        let s = grid_harmonic(&d, &p, &cfg).unwrap();
        assert!(s.residual < 1e-10);
        for z in [C64::new(0.3, 0.5), C64::new(-2.0, 2.0), C64::new(0.0, 1.5)] {
            assert!((s.eval(z).unwrap() - 2.5).abs() < 1e-8, "{} {}", s.eval(z).unwrap(), s.residual);
        }
    }

    #[test]
    fn linear_data_is_reproduced() {
        let d = Domain::halfplane();
        let data = |_: BoundaryId, z: C64| z.im;
        let far = |z: C64| z.im;
        let p = BoundaryProblem { data: &data, far: &far, er_flux: vec![] };
        let cfg = GridConfig { h: 0.1, core: [-2.0, 2.0, 0.0, 2.0], far: 50.0, growth: 1.2 };
        let s = grid_harmonic(&d, &p, &cfg).unwrap();
        for z in [C64::new(0.3, 0.5), C64::new(-1.0, 1.7)] {
            assert!((s.eval(z).unwrap() - z.im).abs() < 1e-8);
        }
    }

    #[test]
    fn annulus_harmonic_measure_converges_at_second_order() {
        let r = 3.0;
        let d = Domain::Annulus { r };
        let probe = [C64::new(1.5, 0.2), C64::new(-0.4, 2.1), C64::new(0.0, -1.3)];
        let mut errs = vec![];
        let hs = [0.1, 0.05];
        for h in hs {
            let s = harmonic_measure_grid(&d, 1, &GridConfig::for_domain(&d, h)).unwrap();
            let e = probe
                .iter()
                .map(|z| (s.eval(*z).unwrap() - super::super::analytic::annulus_h1(r, *z)).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[1] < 2e-3, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn er_constant_satisfies_zero_flux() {
        // A disk hole far from everything in ER mode with data 0 and zero
        // flux: the solution is identically 0 when the outer data vanish.
        let d =
            Domain::from_json(r#"{"type":"halfplane_holes","holes":[{"type":"disk","cx":0,"cy":2,"r":0.5}]}"#).unwrap();
        let data = |_: BoundaryId, _: C64| 0.0;
        let far = |_: C64| 0.0;
        let p = BoundaryProblem { data: &data, far: &far, er_flux: vec![Some(0.0)] };
        let s = grid_harmonic(&d, &p, &GridConfig::for_domain(&d, 0.05)).unwrap();
        assert!(s.constants[0].unwrap().abs() < 1e-9);
    }

    #[test]
    fn rejects_unresolved_mesh() {
        let d = Domain::chordal(vec![Slit::new(0.1, -1.0, 1.0).unwrap()]).unwrap();
        assert!(harmonic_measure_grid(&d, 1, &GridConfig::for_domain(&d, 0.05)).is_err());
    }
}
