//! Analytic functions `F = U + iV` from a grid solution `V` whose conjugate
//! vanishes at infinity: `U` is pinned to 0 at a far probe `iY` (where
//! `F = O(1/Y)` is purely imaginary to `O(1/Y^2)`) and carried to a hub above
//! the holes, from which every evaluation is routed.

use std::sync::Arc;

use super::conjugate::{auto_path, conjugate, GridHarmonic};
use crate::brownian::{grid_harmonic, BoundaryProblem, GridConfig, GridSolution};
use crate::geometry::{BoundaryId, Domain};
use crate::{Error, Result, C64};

#[derive(Clone)]
pub struct GridAnalytic {
    v: GridHarmonic,
    hub: C64,
    hub_re: f64,
    clearance: f64,
    pub far_probe: C64,
}

impl GridAnalytic {
    /// `scale * (U + iV)` for the grid solution `V`.
    pub fn new(sol: GridSolution, scale: f64) -> Result<Self> {
        let v = GridHarmonic { sol: Arc::new(sol), scale };
        let domain = v.sol.domain().clone();
        if domain.is_annulus() {
            return Err(Error::InvalidArgument("grid conjugation supports half-plane domains".into()));
        }
        let h = v.sol.min_spacing();
        let top = v.sol.ys.iter().copied().fold(0.0, f64::max);
        let y = (1e3 * domain.scale()).min(0.5 * top);
        let far_probe = C64::new(0.0, y);
        let hub = C64::new(0.0, (domain.hole_extent() * 1.5).max(2.0) + 10.0 * h);
        let hub_re = conjugate(&v, far_probe, 0.0, hub, &[far_probe, hub])?;
        Ok(GridAnalytic { v, hub, hub_re, clearance: 5.0 * h, far_probe })
    }

    pub fn domain(&self) -> &Domain {
        self.v.sol.domain()
    }

    pub fn solution(&self) -> &GridSolution {
        &self.v.sol
    }

    /// `scale * (U + iV)` at `z`.
    pub fn eval(&self, z: C64) -> Result<C64> {
        self.eval_from(z, self.hub, self.hub_re)
    }

    /// Evaluation with the conjugate carried from another base point.
    pub fn eval_from(&self, z: C64, base: C64, base_re: f64) -> Result<C64> {
        let path = auto_path(self.domain(), base, z, self.clearance)?;
        let re = conjugate(&self.v, base, base_re, z, &path)?;
        Ok(C64::new(re, self.v.sol.eval(z)? * self.v.scale))
    }

    pub fn hub(&self) -> (C64, f64) {
        (self.hub, self.hub_re)
    }
}

/// Grid solution of `Im phi - Im z` on `domain` (including an attached
/// hull): `-Im z` on the hull and on the holes up to zero-flux constants, 0 on
/// the real line.
pub fn grid_phi_correction(domain: &Domain, cfg: &GridConfig) -> Result<GridSolution> {
    let data = |id: BoundaryId, z: C64| match id {
        BoundaryId::A0 if z.im <= 0.0 => 0.0,
        _ => -z.im,
    };
    let far = |_z: C64| 0.0;
    let problem = BoundaryProblem { data: &data, far: &far, er_flux: vec![Some(0.0); domain.n_holes()] };
    grid_harmonic(domain, &problem, cfg)
}
