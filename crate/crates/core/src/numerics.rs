//! Quadrature and extrapolation helpers.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;

use crate::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1], cached by degree.
pub fn gauss_legendre(n: usize) -> Arc<[(f64, f64)]> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<[(f64, f64)]>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
            rule.as_node_weight_pairs().iter().copied().collect()
        })
        .clone()
}

/// Gauss-Legendre quadrature of `f` over [a, b] with `n` nodes.
pub fn gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Composite Gauss-Legendre quadrature with `panels` equal panels.
pub fn gl_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            gl(&f, lo, lo + h, n)
        })
        .sum()
}

/// Composite Gauss-Legendre with 64 nodes per panel, starting from panels of
/// length at most pi and doubling until the relative change is below `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut panels = ((b - a).abs() / std::f64::consts::PI).ceil().max(1.0) as usize;
    let mut prev = gl_composite(&f, a, b, panels, 64);
    for _ in 0..10 {
        panels *= 2;
        let next = gl_composite(&f, a, b, panels, 64);
        if (next - prev).abs() <= tol * next.abs().max(1e-300) || (next - prev).abs() < 1e-300 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!("quadrature on [{a}, {b}] did not reach relative tolerance {tol}")))
}

/// Integral of `f` over the real line, via x = c + s tan(u).
pub fn integrate_real_line(f: impl Fn(f64) -> f64, c: f64, s: f64, tol: f64) -> Result<f64> {
    let half = std::f64::consts::FRAC_PI_2;
    integrate(
        |u| {
            let cu = u.cos();
            if cu.abs() < 1e-300 {
                return 0.0;
            }
            f(c + s * u.tan()) * s / (cu * cu)
        },
        -half,
        half,
        tol,
    )
}

/// Richardson extrapolation of values computed at step sizes h, h/2, h/4, ...
/// for an error expansion in powers h^p, h^(p+1), ...
pub fn richardson(values: &[f64], p: u32) -> f64 {
    let mut t = values.to_vec();
    let mut order = p;
    while t.len() > 1 {
        let f = 2f64.powi(order as i32);
        t = t.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
        order += 1;
    }
    t[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomial_exactly() {
        let v = gl(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0, 4);
        assert!((v - (256.0 / 8.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn integrate_real_line_cauchy_density() {
        let v = integrate_real_line(|x| 1.0 / (std::f64::consts::PI * (1.0 + x * x)), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn richardson_removes_linear_and_quadratic_terms() {
        let f = |h: f64| 2.0 + 3.0 * h + 5.0 * h * h;
        let v = richardson(&[f(0.1), f(0.05), f(0.025)], 1);
        assert!((v - 2.0).abs() < 1e-12);
    }
}
