//! Property tests for symmetries of the kernels, Green's functions and
//! capacities.

use erbm::brownian::analytic::{green_halfplane, pk_halfplane};
use erbm::brownian::rng::RngStream;
use erbm::capacity::{hcap, hcap_er, CapMethod};
use erbm::geometry::{Domain, Hull, Slit};
use erbm::kernels::annulus::pk_er_annulus;
use erbm::kernels::{pk_er, Backend};
use erbm::C64;
use proptest::prelude::*;

fn stream() -> RngStream {
    RngStream::new(0, 0)
}

proptest! {
    #[test]
    fn halfplane_kernel_scales_and_translates(
        x in -3.0..3.0f64, y in 0.05..3.0f64, s in -3.0..3.0f64, r in 0.2..5.0f64, a in -2.0..2.0f64,
    ) {
        let h = pk_halfplane(C64::new(x, y), s).unwrap();
        prop_assert!(h > 0.0);
        let scaled = pk_halfplane(C64::new(r * x, r * y), r * s).unwrap();
        prop_assert!((scaled * r - h).abs() <= 1e-12 * h);
        let moved = pk_halfplane(C64::new(x + a, y), s + a).unwrap();
        prop_assert!((moved - h).abs() <= 1e-12 * h);
    }

    #[test]
    fn halfplane_green_is_symmetric_and_positive(
        x in -3.0..3.0f64, y in 0.05..3.0f64, u in -3.0..3.0f64, v in 0.05..3.0f64,
    ) {
        prop_assume!((x - u).hypot(y - v) > 1e-3);
        let (z, w) = (C64::new(x, y), C64::new(u, v));
        let g = green_halfplane(z, w).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!((g - green_halfplane(w, z).unwrap()).abs() <= 1e-12 * g.max(1.0));
    }

    #[test]
    fn annulus_kernel_is_rotation_invariant(
        r in 0.3..3.0f64, t in 0.05..0.95f64, arg in -3.0..3.0f64, phi in -3.0..3.0f64, alpha in -3.0..3.0f64,
    ) {
        let m = (-r * t).exp();
        let a = pk_er_annulus(r, C64::from_polar(m, arg), phi, 1e-13).unwrap().value;
        let b = pk_er_annulus(r, C64::from_polar(m, arg + alpha), phi + alpha, 1e-13).unwrap().value;
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-3));
    }

    #[test]
    fn halfplane_capacity_scales_quadratically(x in -2.0..2.0f64, h in 0.05..3.0f64, r in 0.2..4.0f64) {
        for hull in [Hull::VerticalSlit { x, height: h }, Hull::HalfDisk { x, radius: h }] {
            let scaled = match hull {
                Hull::VerticalSlit { .. } => Hull::VerticalSlit { x: r * x, height: r * h },
                _ => Hull::HalfDisk { x: r * x, radius: r * h },
            };
            let a = hcap(&hull, CapMethod::ClosedForm, stream()).unwrap().value;
            let b = hcap(&scaled, CapMethod::ClosedForm, stream()).unwrap().value;
            prop_assert!(a > 0.0);
            prop_assert!((b - r * r * a).abs() <= 1e-12 * b);
        }
        let slit = hcap(&Hull::VerticalSlit { x, height: h }, CapMethod::ClosedForm, stream()).unwrap().value;
        prop_assert!((slit - h * h / 2.0).abs() <= 1e-12 * slit);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn er_kernel_commutes_with_horizontal_shift(
        a in -2.0..2.0f64, x in -1.5..1.5f64, zx in -1.5..1.5f64, zy in 0.2..0.8f64,
    ) {
        let slit = |dx: f64| Domain::chordal(vec![Slit::new(1.0, -0.5 + dx, 0.7 + dx).unwrap()]).unwrap();
        let z = C64::new(zx, zy);
        let h = pk_er(&slit(0.0), z, x, &Backend::bie()).unwrap().value;
        let moved = pk_er(&slit(a), z + a, x + a, &Backend::bie()).unwrap().value;
        prop_assert!(h > 0.0);
        prop_assert!((h - moved).abs() <= 1e-8 * h.max(1e-2));
    }

    #[test]
    fn er_capacity_commutes_with_horizontal_shift(h in 0.05..0.5f64, x in -0.5..0.5f64, a in -2.0..2.0f64) {
        let domain = |dx: f64| Domain::chordal(vec![Slit::new(1.0, -1.0 + dx, 1.0 + dx).unwrap()]).unwrap();
        let er = hcap_er(&domain(0.0), &Hull::VerticalSlit { x, height: h }, CapMethod::Bie, stream()).unwrap().value;
        let moved =
            hcap_er(&domain(a), &Hull::VerticalSlit { x: x + a, height: h }, CapMethod::Bie, stream()).unwrap().value;
        prop_assert!(er > 0.0);
        prop_assert!((er - moved).abs() <= 1e-8 * er);
    }
}
