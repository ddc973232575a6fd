//! The classical chordal Loewner flow `g' = a'(t) / (g - U_t)`.

use super::{
    CapacitySchedule, DrivingFunction, Flow, PointStatus, SolverOptions, TrackedPoint, Trajectory, TrajectoryRow,
};
use crate::{Error, Result, C64};

fn check_points(points: &[C64]) -> Result<()> {
    for z in points {
        if !(z.im >= 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Outside { re: z.re, im: z.im, what: "closed upper half-plane".into() });
        }
    }
    Ok(())
}

/// Integrates the classical chordal Loewner equation for each tracked point
/// on `[0, t_end]`.
pub fn solve_classical(
    driving: &DrivingFunction,
    schedule: &CapacitySchedule,
    points: &[C64],
    t_end: f64,
    opts: SolverOptions,
) -> Result<Trajectory> {
    check_points(points)?;
    let flow = Flow { driving, schedule, opts };
    let exempt = vec![false; points.len()];
    let mut rows = Vec::new();
    let mut field = |_t: f64, rate: f64, u: f64, z: &[C64], alive: &[bool]| -> Result<Vec<C64>> {
        Ok(z.iter().zip(alive).map(|(w, l)| if *l { C64::from(rate) / (w - u) } else { C64::new(0.0, 0.0) }).collect())
    };
    let mut record = |t: f64, z: &[C64], s: &[PointStatus]| {
        for (id, (w, st)) in z.iter().zip(s).enumerate() {
            rows.push(TrajectoryRow { t, id, z: *w, status: *st });
        }
    };
    let (z, status) = flow.run(points, &exempt, t_end, &mut field, &mut record)?;
    let final_state =
        z.into_iter().zip(status).enumerate().map(|(id, (z, status))| TrackedPoint { id, z, status }).collect();
    Ok(Trajectory { rows, final_state, t: t_end })
}

/// `g_t'(z) = exp(-int_0^t a'(s) ds / (g_s(z) - U_s)^2)`, integrated along
/// with `g_t(z)`. Returns `(g_t(z), g_t'(z))`.
pub fn classical_derivative(
    driving: &DrivingFunction,
    schedule: &CapacitySchedule,
    z: C64,
    t: f64,
    opts: SolverOptions,
) -> Result<(C64, C64)> {
    check_points(&[z])?;
    let flow = Flow { driving, schedule, opts };
    let mut field = |_t: f64, rate: f64, u: f64, s: &[C64], _alive: &[bool]| -> Result<Vec<C64>> {
        let d = s[0] - u;
        Ok(vec![C64::from(rate) / d, -C64::from(rate) / (d * d)])
    };
    let (s, status) = flow.run(&[z, C64::new(0.0, 0.0)], &[false, true], t, &mut field, &mut |_, _, _| {})?;
    if let PointStatus::Swallowed { t: ts } = status[0] {
        return Err(Error::InvalidArgument(format!("point swallowed at t = {ts} before t = {t}")));
    }
    Ok((s[0], s[1].exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn straight(t_end: f64) -> (DrivingFunction, CapacitySchedule) {
        (DrivingFunction::constant(0.0, t_end), CapacitySchedule::linear(2.0, t_end).unwrap())
    }

    #[test]
    fn constant_driving_matches_closed_form() {
        let (u, a) = straight(1.0);
        let tr =
            solve_classical(&u, &a, &[C64::new(0.0, 3.0), C64::new(0.7, 0.2)], 1.0, SolverOptions::new(1e-4)).unwrap();
        let g = tr.final_state[0].z;
        assert!((g - C64::new(0.0, 5f64.sqrt())).norm() < 1e-6);
        let z = C64::new(0.7, 0.2);
        let exact = (z * z + 4.0).sqrt();
        assert!((tr.final_state[1].z - exact).norm() < 1e-6);
    }

    #[test]
    fn swallowing_time() {
        let (u, a) = straight(1.5);
        let tr = solve_classical(&u, &a, &[C64::new(0.0, 2.0)], 1.5, SolverOptions::new(1e-4)).unwrap();
        match tr.final_state[0].status {
            PointStatus::Swallowed { t } => assert!((t - 1.0).abs() < 1e-4, "t_sw = {t}"),
            s => panic!("not swallowed: {s:?}"),
        }
        let mut seen = false;
        for r in tr.rows.iter() {
            if seen {
                assert_ne!(r.status, PointStatus::Alive);
            }
            seen |= r.status != PointStatus::Alive;
        }
    }

    #[test]
    fn zero_capacity_is_identity() {
        let u = DrivingFunction::new(vec![0.0, 1.0], vec![0.0, 3.0]).unwrap();
        let a = CapacitySchedule::linear(0.0, 1.0).unwrap();
        let z = C64::new(0.3, 0.4);
        let tr = solve_classical(&u, &a, &[z], 1.0, SolverOptions::new(0.01)).unwrap();
        assert_eq!(tr.final_state[0].z, z);
        let (_, d) = classical_derivative(&u, &a, z, 0.0, SolverOptions::new(0.01)).unwrap();
        assert_eq!(d, C64::new(1.0, 0.0));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let u = DrivingFunction::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.4, -0.2]).unwrap();
        let a = CapacitySchedule::linear(2.0, 1.0).unwrap();
        let opts = SolverOptions::new(1e-3);
        let z = C64::new(0.5, 1.0);
        let (_, d) = classical_derivative(&u, &a, z, 1.0, opts).unwrap();
        let h = 1e-4;
        let g = |w: C64| solve_classical(&u, &a, &[w], 1.0, opts).unwrap().final_state[0].z;
        let fd = (g(z + h) - g(z - h)) / (2.0 * h);
        assert!((d - fd).norm() < 1e-5, "{d} vs {fd}");
    }

    #[test]
    fn derivative_on_real_line_is_below_one() {
        let (u, a) = straight(1.0);
        let r = 2.0;
        for x in [6.5, 8.0, 12.0, 20.0] {
            let (_, d) = classical_derivative(&u, &a, C64::new(x, 0.0), 1.0, SolverOptions::new(1e-3)).unwrap();
            assert!(d.re <= 1.0 + 1e-12 && d.re >= 1.0 - 4.0 * r * r / (x * x));
        }
    }

    #[test]
    fn semigroup() {
        let u = DrivingFunction::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.3, 0.1]).unwrap();
        let a = CapacitySchedule::linear(2.0, 1.0).unwrap();
        let opts = SolverOptions::new(1e-3);
        let z = C64::new(-0.4, 0.8);
        let full = solve_classical(&u, &a, &[z], 1.0, opts).unwrap().final_state[0].z;
        let half = solve_classical(&u, &a, &[z], 0.5, opts).unwrap().final_state[0].z;
        let shift =
            |d: &DrivingFunction, s: f64| DrivingFunction::new(vec![0.0, 0.5], vec![d.eval(s), d.eval(1.0)]).unwrap();
        let a2 = CapacitySchedule::linear(2.0, 0.5).unwrap();
        let rest = solve_classical(&shift(&u, 0.5), &a2, &[half], 0.5, opts).unwrap().final_state[0].z;
        assert!((full - rest).norm() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hydrodynamic_normalization(u1 in -1.0f64..1.0, rate in 0.0f64..3.0) {
            let u = DrivingFunction::new(vec![0.0, 1.0], vec![0.0, u1]).unwrap();
            let a = CapacitySchedule::linear(rate, 1.0).unwrap();
            let y = 1e3;
            let z = C64::new(0.0, y);
            let g = solve_classical(&u, &a, &[z], 1.0, SolverOptions::new(0.05)).unwrap().final_state[0].z;
            prop_assert!((g - z - C64::from(rate) / z).norm() <= 10.0 / (y * y));
        }
    }
}
