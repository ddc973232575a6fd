//! ER potential theory of a half-plane domain from the boundary-integral
//! solver: harmonic measures, excursion measures, the loop-erased boundary
//! chain, and the ER Poisson kernel and Green's function by direct solves and
//! by chain decomposition.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use super::bie::{BieConfig, BieDomain, Curve, Layer};
use crate::brownian::{green_halfplane, pk_halfplane};
use crate::erbm::{fundamental_matrix, EtaConfig};
use crate::geometry::{Domain, Hole};
use crate::{Error, Result, C64};

/// Points on the `eta` curves used for excursion averages.
const ETA_POINTS: usize = 256;

/// Deterministic ER kernels of the upper half-plane minus holes.
#[derive(Debug, Clone)]
pub struct ErSolver {
    bie: BieDomain,
    holes: Option<Vec<Hole>>,
    /// Harmonic measure layers `h_i`.
    h: Vec<Layer>,
    /// Unit-charge ER layers: `V_i = G^ER(A_i, .)`.
    v: Vec<Layer>,
    /// `charges[(i, k)]`: charge of component `k` in the layer of `h_i`.
    charges: DMatrix<f64>,
}

impl ErSolver {
    /// Solver for a half-plane domain without attached hull.
    pub fn new(domain: &Domain, cfg: BieConfig) -> Result<Self> {
        domain.validate()?;
        let bie = BieDomain::from_domain(domain, cfg)?;
        let mut s = Self::build(bie)?;
        s.holes = Some(domain.holes());
        Ok(s)
    }

    /// Solver for the upper half-plane minus arbitrary curves. Operations
    /// that need the hole transport maps are unavailable.
    pub fn from_curves(curves: Vec<Curve>, cfg: BieConfig) -> Result<Self> {
        Self::build(BieDomain::new(curves, cfg)?)
    }

    fn build(bie: BieDomain) -> Result<Self> {
        let n = bie.n_components();
        let mut h = vec![];
        let mut v = vec![];
        let mut charges = DMatrix::zeros(n, n);
        for i in 0..n {
            let l = bie.solve_dirichlet(&|k, _| if k == i { 1.0 } else { 0.0 })?;
            for k in 0..n {
                charges[(i, k)] = bie.charge(&l, k);
            }
            h.push(l);
            let mut q = vec![0.0; n];
            q[i] = 1.0;
            v.push(bie.solve_er(&|_, _| 0.0, &q)?);
        }
        Ok(ErSolver { bie, holes: None, h, v, charges })
    }

    pub fn n_holes(&self) -> usize {
        self.bie.n_components()
    }

    pub fn bie(&self) -> &BieDomain {
        &self.bie
    }

    fn hole_index(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.n_holes() {
            return Err(Error::InvalidArgument(format!("hole index {i} out of range")));
        }
        Ok(i - 1)
    }

    fn check_point(&self, z: C64) -> Result<()> {
        if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::outside(z, "upper half-plane"));
        }
        if let Some(hs) = &self.holes {
            if hs.iter().any(|h| h.covers(z)) {
                return Err(Error::outside(z, "domain"));
            }
        }
        Ok(())
    }

    /// Harmonic measure of hole `i` (1-based) from `z`; `i = 0` is `A0`.
    pub fn harmonic_measure(&self, i: usize, z: C64) -> Result<f64> {
        self.check_point(z)?;
        if i == 0 {
            let s: f64 = self.h.iter().map(|l| self.bie.u(l, z)).sum();
            return Ok(1.0 - s);
        }
        Ok(self.bie.u(&self.h[self.hole_index(i)?], z))
    }

    /// Excursion measure between boundary components `i != j` (0 is `A0`).
    pub fn excursion(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::InvalidArgument("excursion measure needs distinct components".into()));
        }
        if i > self.n_holes() || j > self.n_holes() {
            return Err(Error::InvalidArgument("component index out of range".into()));
        }
        let (a, b) = if i == 0 { (j, 0) } else { (i, j) };
        let r = a - 1;
        Ok(if b == 0 {
            2.0 * self.charges.row(r).sum()
        } else {
            -(self.charges[(r, b - 1)] + self.charges[(b - 1, r)])
        })
    }

    /// Total excursion measure out of hole `i`: `sum_{j != i} E(A_i, A_j)`.
    pub fn excursion_total(&self, i: usize) -> Result<f64> {
        let r = self.hole_index(i)?;
        Ok(2.0 * self.charges[(r, r)])
    }

    /// Boundary Poisson kernel `H_dD(A_i, x)`: the normal derivative of the
    /// harmonic measure of hole `i` at the real point `x`.
    pub fn boundary_pk(&self, i: usize, x: f64) -> Result<f64> {
        let r = self.hole_index(i)?;
        Ok(self.bie.complex(&self.h[r], C64::new(x, 0.0)).1.re)
    }

    /// Density on `A0` of the first other component reached from hole `i`.
    pub fn t_density(&self, i: usize, x: f64) -> Result<f64> {
        Ok(self.boundary_pk(i, x)? / self.excursion_total(i)?)
    }

    /// Loop-erased transition matrix between holes.
    pub fn q_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.n_holes();
        let mut q = DMatrix::zeros(n, n);
        for i in 1..=n {
            let tot = self.excursion_total(i)?;
            for j in 1..=n {
                if i != j {
                    q[(i - 1, j - 1)] = self.excursion(i, j)? / tot;
                }
            }
        }
        Ok(q)
    }

    /// Probability that the loop-erased chain moves from hole `i` to `A0`.
    pub fn q0(&self, i: usize) -> Result<f64> {
        Ok(self.excursion(i, 0)? / self.excursion_total(i)?)
    }

    /// `H^ER(A_i, x)` for all holes via `(I - Q)^{-1} T(x)`.
    pub fn pk_er_holes(&self, x: f64) -> Result<Vec<f64>> {
        let n = self.n_holes();
        let f = fundamental_matrix(&self.q_matrix()?)?;
        let mut t = DVector::zeros(n);
        for i in 1..=n {
            t[i - 1] = self.t_density(i, x)?;
        }
        Ok((f * t).iter().copied().collect())
    }

    /// Poisson kernel `H_D(z, x)` of Brownian motion killed on all holes.
    pub fn pk(&self, z: C64, x: f64) -> Result<f64> {
        self.check_point(z)?;
        let l = self.bie.solve_dirichlet(&|_, g| -pk_halfplane(g, x).unwrap_or(0.0))?;
        Ok(pk_halfplane(z, x)? + self.bie.u(&l, z))
    }

    pub(crate) fn er_pk_layer(&self, x: f64) -> Result<Layer> {
        let n = self.n_holes();
        self.bie.solve_er(&|_, g| -pk_halfplane(g, x).unwrap_or(0.0), &vec![0.0; n])
    }

    /// ER Poisson kernel `H^ER(z, x)` from a direct ER solve.
    pub fn pk_er(&self, z: C64, x: f64) -> Result<f64> {
        self.check_point(z)?;
        let l = self.er_pk_layer(x)?;
        Ok(pk_halfplane(z, x)? + self.bie.u(&l, z))
    }

    /// `H^ER(A_i, x)` as the hole constants of the direct ER solve.
    pub fn pk_er_holes_direct(&self, x: f64) -> Result<Vec<f64>> {
        Ok(self.er_pk_layer(x)?.constants)
    }

    /// ER Poisson kernel from the decomposition
    /// `H_D(z, x) + sum_i h_i(z) H^ER(A_i, x)` with the chain hole values.
    pub fn pk_er_decomposed(&self, z: C64, x: f64) -> Result<f64> {
        let hv = self.pk_er_holes(x)?;
        let mut s = self.pk(z, x)?;
        for (i, v) in hv.iter().enumerate() {
            s += self.harmonic_measure(i + 1, z)? * v;
        }
        Ok(s)
    }

    /// `H^ER(infinity, x)` from the far field of the ER solve.
    pub fn pk_er_infinity(&self, x: f64) -> Result<f64> {
        let l = self.er_pk_layer(x)?;
        Ok((1.0 + 2.0 * self.bie.im_moment(&l)) / PI)
    }

    /// Complex ER Poisson kernel `-1/(z - x) + pi F(z)` with imaginary part
    /// `pi H^ER(z, x)` and `z H -> -pi H^ER(infinity, x)`.
    pub fn complex_pk(&self, z: C64, x: f64) -> Result<C64> {
        self.check_point(z)?;
        let l = self.er_pk_layer(x)?;
        let (f, _) = self.bie.complex(&l, z);
        Ok(-(z - x).inv() + f * PI)
    }

    /// [`ErSolver::complex_pk`] at many points from one solve. Points on the
    /// holes are accepted, which evaluates the continuous extension there
    /// (used for slit endpoints).
    pub fn complex_pk_many(&self, zs: &[C64], x: f64) -> Result<Vec<C64>> {
        for z in zs {
            if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::outside(*z, "upper half-plane"));
            }
        }
        let l = self.er_pk_layer(x)?;
        Ok(zs.iter().map(|z| -(z - x).inv() + self.bie.complex(&l, *z).0 * PI).collect())
    }

    /// The constant `r(D, x) = lim_{z -> x} H(z, x) + 1/(z - x)`.
    pub fn r_const(&self, x: f64) -> Result<f64> {
        let l = self.er_pk_layer(x)?;
        Ok(PI * self.bie.complex(&l, C64::new(x, 0.0)).0.re)
    }

    /// Green's function `G_D(z, w)` of Brownian motion killed on all holes.
    pub fn green(&self, z: C64, w: C64) -> Result<f64> {
        self.check_point(z)?;
        self.check_point(w)?;
        let l = self.bie.solve_dirichlet(&|_, g| -green_halfplane(g, w).unwrap_or(0.0))?;
        Ok(green_halfplane(z, w)? + self.bie.u(&l, z))
    }

    pub(crate) fn green_er_layer(&self, w: C64) -> Result<Layer> {
        let n = self.n_holes();
        self.bie.solve_er(&|_, g| -green_halfplane(g, w).unwrap_or(0.0), &vec![0.0; n])
    }

    /// ER Green's function `G^ER(z, w)` from a direct ER solve.
    pub fn green_er(&self, z: C64, w: C64) -> Result<f64> {
        self.check_point(z)?;
        self.check_point(w)?;
        let l = self.green_er_layer(w)?;
        Ok(green_halfplane(z, w)? + self.bie.u(&l, z))
    }

    /// `G^ER(A_i, w)` as the hole constant of the direct solve in `w`.
    pub fn green_er_hole_direct(&self, i: usize, w: C64) -> Result<f64> {
        self.check_point(w)?;
        let r = self.hole_index(i)?;
        Ok(self.green_er_layer(w)?.constants[r])
    }

    /// `G^ER(A_i, w)` as the unit-charge ER potential of hole `i`.
    pub fn green_er_hole(&self, i: usize, w: C64) -> Result<f64> {
        self.check_point(w)?;
        let r = self.hole_index(i)?;
        Ok(self.bie.u(&self.v[r], w))
    }

    /// Gradient of `G^ER(A_i, .)` at `w` as a complex number.
    pub fn green_er_hole_gradient(&self, i: usize, w: C64) -> Result<C64> {
        let r = self.hole_index(i)?;
        let (_, d) = self.bie.complex(&self.v[r], w);
        Ok(C64::new(d.im, d.re))
    }

    /// Complex potential of `G^ER(A_i, .)`; its real part has period `-2`
    /// (times the loop orientation) around hole `i`.
    pub fn green_er_hole_complex(&self, i: usize, w: C64) -> Result<(C64, C64)> {
        let r = self.hole_index(i)?;
        Ok(self.bie.complex(&self.v[r], w))
    }

    /// Unit-charge layer of hole `i` (1-based).
    pub(crate) fn hole_layer(&self, i: usize) -> Result<&Layer> {
        Ok(&self.v[self.hole_index(i)?])
    }

    /// Layer of `phi_D - z`.
    pub(crate) fn phi_raw_layer(&self) -> Result<Layer> {
        let n = self.n_holes();
        self.bie.solve_er(&|_, g| -g.im, &vec![0.0; n])
    }

    /// Complex potential of the direct ER Green's function layer for pole `w`
    /// (without the half-plane part).
    pub fn green_er_layer_complex(&self, w: C64) -> Result<impl Fn(C64) -> (C64, C64) + '_> {
        let l = self.green_er_layer(w)?;
        Ok(move |z| self.bie.complex(&l, z))
    }

    fn eta_points(&self, i: usize, eta: &EtaConfig) -> Result<Vec<C64>> {
        let hs = self
            .holes
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("excursion averages need holes with transport maps".into()))?;
        let h = &hs[self.hole_index(i)?];
        Ok((0..ETA_POINTS)
            .map(|k| h.from_disk(C64::from_polar(eta.rho, TAU * (k as f64 + 0.5) / ETA_POINTS as f64)))
            .collect())
    }

    /// Transition matrix of the boundary chain with excursions started on
    /// the `eta` curves: row 0 is `A0` (absorbing), rows `1..=n` holes.
    pub fn eta_transitions(&self, eta: &EtaConfig) -> Result<DMatrix<f64>> {
        let n = self.n_holes();
        let mut p = DMatrix::zeros(n + 1, n + 1);
        p[(0, 0)] = 1.0;
        for i in 1..=n {
            let pts = self.eta_points(i, eta)?;
            let mut tot = 0.0;
            for j in 1..=n {
                let v: f64 = pts.iter().map(|z| self.bie.u(&self.h[j - 1], *z)).sum::<f64>() / pts.len() as f64;
                p[(i, j)] = v;
                tot += v;
            }
            p[(i, 0)] = 1.0 - tot;
        }
        Ok(p)
    }

    /// `G^ER(A_i, w)` from the chain: `((I - Q)^{-1} D T^G(w))_i` with the
    /// one-cycle occupation density `T^G`.
    pub fn green_er_hole_chain(&self, i: usize, w: C64, eta: &EtaConfig) -> Result<f64> {
        self.check_point(w)?;
        let n = self.n_holes();
        let r = self.hole_index(i)?;
        let p = self.eta_transitions(eta)?;
        let hs = self.holes.as_ref().expect("eta_transitions checked holes");
        let gl = self.bie.solve_dirichlet(&|_, g| -green_halfplane(g, w).unwrap_or(0.0))?;
        let mut tg = DVector::zeros(n);
        for k in 1..=n {
            let pts = self.eta_points(k, eta)?;
            let avg: f64 = pts.iter().map(|z| green_halfplane(*z, w).unwrap_or(0.0) + self.bie.u(&gl, *z)).sum::<f64>()
                / pts.len() as f64;
            let inner = match hs[k - 1].to_disk(w) {
                Ok(zeta) if zeta.norm() < eta.rho => (eta.rho.ln() - zeta.norm().ln()) / PI,
                _ => 0.0,
            };
            tg[k - 1] = avg + inner;
        }
        let mut q = DMatrix::zeros(n, n);
        let mut d = DMatrix::zeros(n, n);
        for a in 0..n {
            let stay = p[(a + 1, a + 1)];
            d[(a, a)] = 1.0 / (1.0 - stay);
            for b in 0..n {
                if a != b {
                    q[(a, b)] = p[(a + 1, b + 1)] / (1.0 - stay);
                }
            }
        }
        let f = fundamental_matrix(&q)?;
        Ok((f * d * tg)[r])
    }

    /// ER Green's function from an interior point via the decomposition
    /// `G_D(z, w) + sum_i h_i(z) G^ER(A_i, w)`.
    pub fn green_er_decomposed(&self, z: C64, w: C64) -> Result<f64> {
        let mut s = self.green(z, w)?;
        for i in 1..=self.n_holes() {
            s += self.harmonic_measure(i, z)? * self.green_er_hole(i, w)?;
        }
        Ok(s)
    }

    /// The map `phi_D` onto a chordal standard domain: `z + F(z)` where
    /// `Im F = -Im z + c_k` on hole `k` with zero charges.
    pub fn phi_layer(&self) -> Result<PhiMap<'_>> {
        Ok(PhiMap { solver: self, layer: self.phi_raw_layer()? })
    }
}

/// The normalising map `phi_D` of a solved domain.
#[derive(Debug, Clone)]
pub struct PhiMap<'a> {
    solver: &'a ErSolver,
    layer: Layer,
}

impl PhiMap<'_> {
    pub fn eval(&self, z: C64) -> C64 {
        z + self.solver.bie.complex(&self.layer, z).0
    }

    pub fn derivative(&self, z: C64) -> C64 {
        C64::new(1.0, 0.0) + self.solver.bie.complex(&self.layer, z).1
    }

    /// Heights of the image slits.
    pub fn heights(&self) -> Vec<f64> {
        self.layer.constants.clone()
    }

    /// `hcap^ER - hcap` of the domain's holes: the coefficient of `1/z` in
    /// `phi(z) - z` is `-(2/pi) sum int Im g mu`.
    pub fn capacity_shift(&self) -> f64 {
        -2.0 / PI * self.solver.bie.im_moment(&self.layer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Disk, Slit};
    use crate::numerics::integrate_real_line;

    fn two_holes() -> Domain {
        Domain::HalfplaneHoles {
            holes: vec![Hole::Slit(Slit::new(1.0, -1.0, 0.5).unwrap()), Hole::Disk(Disk { cx: 2.0, cy: 1.5, r: 0.5 })],
            hull: None,
        }
    }

    #[test]
    fn excursion_measure_matches_boundary_quadrature() {
        let s = ErSolver::new(&two_holes(), BieConfig::default()).unwrap();
        for i in 1..=2 {
            let q = integrate_real_line(|x| s.boundary_pk(i, x).unwrap(), 0.5, 2.0, 1e-11).unwrap();
            assert!((q - s.excursion(i, 0).unwrap()).abs() < 1e-8, "{q}");
        }
        let a = s.excursion(1, 2).unwrap();
        assert!(a > 0.0);
        assert!((s.charges[(0, 1)] - s.charges[(1, 0)]).abs() < 1e-8);
        let tot = s.excursion(1, 0).unwrap() + a;
        assert!((tot - s.excursion_total(1).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn er_kernel_routes_agree() {
        let s = ErSolver::new(&two_holes(), BieConfig::default()).unwrap();
        let x = 0.3;
        let direct = s.pk_er_holes_direct(x).unwrap();
        let chain = s.pk_er_holes(x).unwrap();
        for (a, b) in direct.iter().zip(&chain) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        let z = C64::new(0.2, 2.5);
        let a = s.pk_er(z, x).unwrap();
        let b = s.pk_er_decomposed(z, x).unwrap();
        assert!((a - b).abs() < 1e-9);
        // H^ER(z, .) is a probability density on the real line.
        let m = integrate_real_line(|x| s.pk_er(z, x).unwrap(), 0.0, 3.0, 1e-9).unwrap();
        assert!((m - 1.0).abs() < 1e-7, "{m}");
    }

    #[test]
    fn green_routes_agree() {
        let s = ErSolver::new(&two_holes(), BieConfig::default()).unwrap();
        let eta = EtaConfig::new(1.2);
        let w = C64::new(0.7, 2.2);
        let a = s.green_er_hole(1, w).unwrap();
        let b = s.green_er_hole_direct(1, w).unwrap();
        let c = s.green_er_hole_chain(1, w, &eta).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} {b}");
        assert!((a - c).abs() < 1e-7, "{a} {c}");
        let z = C64::new(-0.5, 0.4);
        let g1 = s.green_er(z, w).unwrap();
        let g2 = s.green_er(w, z).unwrap();
        let g3 = s.green_er_decomposed(z, w).unwrap();
        assert!((g1 - g2).abs() < 1e-9);
        assert!((g1 - g3).abs() < 1e-9);
    }

    #[test]
    fn phi_is_identity_on_chordal_standard() {
        let d = Domain::chordal(vec![Slit::new(1.0, -1.0, 1.0).unwrap()]).unwrap();
        let s = ErSolver::new(&d, BieConfig::default()).unwrap();
        let phi = s.phi_layer().unwrap();
        assert!((phi.eval(C64::new(0.0, 2.0)) - C64::new(0.0, 2.0)).norm() < 1e-12);
        assert!((s.pk_er_infinity(0.4).unwrap() * PI - 1.0).abs() < 1e-12);
        // phi'(x) = pi H^ER(infinity, x) on a disk domain.
        let s = ErSolver::new(&two_holes(), BieConfig::default()).unwrap();
        let phi = s.phi_layer().unwrap();
        for x in [-2.0, 0.0, 1.7] {
            let a = phi.derivative(C64::new(x, 0.0)).re;
            let b = PI * s.pk_er_infinity(x).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn complex_pk_normalisation() {
        let s = ErSolver::new(&two_holes(), BieConfig::default()).unwrap();
        let x = -0.4;
        let y = 1e5;
        let z = C64::new(0.0, y);
        let h = s.complex_pk(z, x).unwrap();
        assert!((h * z + PI * s.pk_er_infinity(x).unwrap()).norm() < 1e-4);
        let zz = C64::new(0.7, 2.1);
        assert!((s.complex_pk(zz, x).unwrap().im - PI * s.pk_er(zz, x).unwrap()).abs() < 1e-12);
        // (z - x) H -> -1 near x.
        let e = 1e-3;
        let near = s.complex_pk(C64::new(x, e), x).unwrap() * C64::new(0.0, e);
        assert!((near + 1.0).norm() < 1e-2);
        let r = s.r_const(x).unwrap();
        let v = s.complex_pk(C64::new(x, e), x).unwrap() + C64::new(0.0, e).inv();
        assert!((v.re - r).abs() < 1e-2, "{v} {r}");
    }
}
