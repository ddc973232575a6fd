//! Closed-form kernels and Green's functions of the half-plane, the disk and
//! the half-strip.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

/// Poisson kernel of the upper half-plane, `Im z / (pi |z - x|^2)`.
pub fn pk_halfplane(z: C64, x: f64) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(Error::outside(z, "pk_halfplane needs Im z > 0"));
    }
    Ok(z.im / (PI * (z - x).norm_sqr()))
}

/// `lim y H(x + iy, x)` as `y` grows, which is `1/pi` for every `x`.
pub fn pk_halfplane_infinity(_x: f64) -> f64 {
    1.0 / PI
}

/// Boundary Poisson kernel of the upper half-plane, `1 / (pi (x - x')^2)`.
pub fn pk_boundary_halfplane(x: f64, xp: f64) -> Result<f64> {
    if x == xp {
        return Err(Error::Singular("boundary Poisson kernel at coincident points".into()));
    }
    Ok(1.0 / (PI * (x - xp).powi(2)))
}

/// Poisson kernel of the half-strip-like region `{0 < Im z < r}` seen from
/// the boundary point 0 of the lower edge.
pub fn pk_halfstrip(r: f64, z: C64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("strip width {r} must be positive")));
    }
    if !(z.im > 0.0 && z.im < r) {
        return Err(Error::outside(z, "pk_halfstrip needs 0 < Im z < r"));
    }
    let a = PI * z.im / r;
    let b = PI * z.re / r;
    Ok(a.sin() / (2.0 * r * (b.cosh() - a.cos())))
}

/// Green's function of the upper half-plane,
/// `(1/pi) log(|z - conj w| / |z - w|)`.
pub fn green_halfplane(z: C64, w: C64) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(Error::outside(z, "green_halfplane needs Im z > 0"));
    }
    if !(w.im > 0.0) {
        return Err(Error::outside(w, "green_halfplane needs Im w > 0"));
    }
    if z == w {
        return Err(Error::Singular("green_halfplane at z = w".into()));
    }
    Ok((z - w.conj()).norm_sqr().ln() / (2.0 * PI) - (z - w).norm_sqr().ln() / (2.0 * PI))
}

/// Green's function of the disk of radius `r` with pole at 0,
/// `(log r - log |z|) / pi`.
pub fn green_disk(r: f64, z: C64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("disk radius {r} must be positive")));
    }
    let m = z.norm();
    if m == 0.0 {
        return Err(Error::Singular("green_disk at the pole".into()));
    }
    if m >= r {
        return Err(Error::outside(z, "green_disk needs |z| < r"));
    }
    Ok((r.ln() - m.ln()) / PI)
}

/// Poisson kernel of the upper half-plane minus the closed disk of radius
/// `eps` at 0, at the boundary point `eps e^{i theta}`.
pub fn pk_halfplane_minus_disk(eps: f64, z: C64, theta: f64) -> Result<f64> {
    if !(z.im > 0.0 && z.norm() > eps) {
        return Err(Error::outside(z, "point must lie in H minus the closed eps-disk"));
    }
    let g = z + eps * eps / z;
    Ok(2.0 * theta.sin() * pk_halfplane(g, 2.0 * eps * theta.cos())?)
}

/// Harmonic measure of the unit circle in the annulus `1 < |z| < r`,
/// `log(r / |z|) / log r`.
pub fn annulus_h1(r: f64, z: C64) -> f64 {
    (r / z.norm()).ln() / r.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pk_halfplane_examples() {
        assert!((pk_halfplane(C64::i(), 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((pk_halfplane(C64::new(1.0, 1.0), 0.0).unwrap() - 0.5 / PI).abs() < 1e-15);
        assert!(pk_halfplane(C64::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn pk_halfplane_infinity_is_the_limit() {
        let y = 1e6;
        let v = y * pk_halfplane(C64::new(100.0, y), 100.0).unwrap();
        assert!((v - pk_halfplane_infinity(100.0)).abs() * PI < 1e-6);
    }

    #[test]
    fn pk_halfstrip_examples() {
        assert!((pk_halfstrip(1.0, C64::new(0.0, 0.5)).unwrap() - 0.5).abs() < 1e-15);
        let a = pk_halfstrip(1.0, C64::new(0.7, 0.3)).unwrap();
        let b = pk_halfstrip(1.0, C64::new(-0.7, 0.3)).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(pk_halfstrip(1.0, C64::new(0.5, 1e-9)).unwrap() < 1e-8);
    }

    #[test]
    fn green_examples() {
        let g = green_halfplane(C64::new(0.0, 2.0), C64::i()).unwrap();
        assert!((g - 9f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert!(green_halfplane(C64::i(), C64::i()).is_err());
        let d = green_disk(2.0, C64::new(1.0, 0.0)).unwrap();
        assert!((d - 2f64.ln() / PI).abs() < 1e-15);
        assert!(green_disk(2.0, C64::new(0.0, 0.0)).is_err());
        assert!(green_disk(2.0, C64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn half_disk_kernel_approaches_twice_sine() {
        let z = C64::new(0.3, 1.0);
        let theta = 1.1;
        let mut errs = vec![];
        let eps = [0.1, 0.05, 0.025];
        for e in eps {
            let v = pk_halfplane_minus_disk(e, z, theta).unwrap();
            let base = 2.0 * pk_halfplane(z, 0.0).unwrap() * theta.sin();
            errs.push((v / base - 1.0).abs());
        }
        let s = crate::stats::slope(&eps.map(f64::ln), &errs.iter().map(|e| e.ln()).collect::<Vec<_>>());
        assert!(s > 0.9, "slope {s}");
    }
}
