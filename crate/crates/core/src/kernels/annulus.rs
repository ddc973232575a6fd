//! Closed forms on the annulus.
//!
//! The series kernel is stated in the frame `e^{-r} < |z| < 1` with the hole
//! the inner circle. [`Domain::Annulus`](crate::geometry::Domain) uses the
//! frame `1 < |z| < r`, related by `z -> z / r`.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

/// Value of the series kernel and the bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail: f64,
    pub terms: usize,
}

/// ER Poisson kernel of `{e^{-r} < |z| < 1}` with the inner circle a hole,
/// at `z` and the boundary point `e^{i phi0}`, per unit arc length.
pub fn pk_er_annulus(r: f64, z: C64, phi0: f64, tol: f64) -> Result<SeriesValue> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("annulus parameter {r} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let m = z.norm();
    if !(m > (-r).exp() && m < 1.0) {
        return Err(Error::outside(z, "annulus"));
    }
    let y = -m.ln();
    let mut x = z.arg() - phi0;
    x -= (x / (2.0 * PI)).round() * 2.0 * PI;
    let sy = (PI * y / r).sin();
    let cy = (PI * y / r).cos();
    let term = |k: i64| {
        let a = PI * (x + 2.0 * PI * k as f64) / r;
        sy / (2.0 * r * (a.cosh() - cy))
    };
    // For |k| > K every argument exceeds pi (2 pi K + pi) / r >= ln 4, where
    // cosh(a) - cos >= e^a / 4, so the tail is dominated by a geometric sum.
    let ratio = (-2.0 * PI * PI / r).exp();
    let bound = |kk: i64| {
        let a = PI * (2.0 * PI * kk as f64 + PI) / r;
        if a < 4f64.ln() {
            f64::INFINITY
        } else {
            2.0 * 4.0 * sy / (2.0 * r) * (-a).exp() / (1.0 - ratio)
        }
    };
    let mut kk: i64 = 0;
    while bound(kk) >= tol {
        kk += 1;
        if kk > 10_000 {
            return Err(Error::Numerical(format!("series tolerance {tol} not reachable within 10^4 terms")));
        }
    }
    let mut v = y / (2.0 * PI * r);
    for k in -kk..=kk {
        v += term(k);
    }
    Ok(SeriesValue { value: v, tail: bound(kk), terms: (2 * kk + 1) as usize })
}

/// ER Poisson kernel of `A_{1,R} = {1 < |z| < R}` at the outer boundary point
/// with arc-length coordinate `s` (angle `s / R`), per unit arc length.
pub fn pk_er_annulus_domain(big_r: f64, z: C64, s: f64, tol: f64) -> Result<SeriesValue> {
    if !(big_r > 1.0) {
        return Err(Error::InvalidArgument("annulus radius must exceed 1".into()));
    }
    let v = pk_er_annulus(big_r.ln(), z / big_r, s / big_r, tol * big_r)?;
    Ok(SeriesValue { value: v.value / big_r, tail: v.tail / big_r, terms: v.terms })
}

/// ER Green's function of `A_{1,R}` from the hole: `(log R - log|w|) / pi`.
pub fn green_er_annulus_hole(big_r: f64, w: C64) -> Result<f64> {
    let m = w.norm();
    if !(m > 1.0 && m < big_r) {
        return Err(Error::outside(w, "annulus"));
    }
    Ok((big_r.ln() - m.ln()) / PI)
}

/// ER hitting density of the outer circle of `A_{1,R}` from the hole, per
/// unit arc length: uniform by rotation invariance.
pub fn pk_er_annulus_hole(big_r: f64) -> f64 {
    1.0 / (2.0 * PI * big_r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_value() {
        let z = C64::new(0.0, 0.0) + (-0.5f64).exp();
        let v = pk_er_annulus(1.0, z, 0.0, 1e-12).unwrap();
        let explicit = 0.5 / (2.0 * PI) + 0.5 + 2.0 / (2.0 * (2.0 * PI * PI).cosh());
        assert!((v.value - explicit).abs() < 1e-12);
        assert!((v.value - 0.5795775).abs() < 5e-8);
        assert!(v.tail < 1e-12);
    }

    #[test]
    fn integrates_to_one() {
        // Total ER hitting mass of the outer circle is 1 from every point.
        let z = C64::from_polar(0.6, 0.4);
        let n = 4000;
        let mut s = 0.0;
        for k in 0..n {
            let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            s += pk_er_annulus(1.5, z, phi, 1e-14).unwrap().value;
        }
        assert!((s * 2.0 * PI / n as f64 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rotation_invariance() {
        let a = pk_er_annulus(2.0, C64::from_polar(0.5, 0.3), 0.1, 1e-13).unwrap();
        let b = pk_er_annulus(2.0, C64::from_polar(0.5, 1.3), 1.1, 1e-13).unwrap();
        assert!((a.value - b.value).abs() < 1e-13);
    }

    #[test]
    fn tail_bound_is_rigorous() {
        // Compare a truncated sum against a much longer one.
        let z = C64::from_polar(0.3, 2.0);
        let loose = pk_er_annulus(5.0, z, 0.0, 1e-4).unwrap();
        let tight = pk_er_annulus(5.0, z, 0.0, 1e-15).unwrap();
        assert!((loose.value - tight.value).abs() <= loose.tail);
        assert!(pk_er_annulus(1e5, z, 0.0, 1e-12).is_err());
    }
}
