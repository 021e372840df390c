use proptest::prelude::*;
use solitonforge::radial_soliton::{f_poly, phi_at, soliton_residual, solve_excess, solve_profile};
use solitonforge::Grid;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // F_n(s) = s^{n-1} - (n-1) F_{n-1}(s), from d/ds [F e^s] = s^{n-1} e^s
    #[test]
    fn f_recurrence(n in 2u32..=8, s in -5.0f64..80.0) {
        let lhs = f_poly(n, s);
        let rhs = s.powi(n as i32 - 1) - (n as f64 - 1.0) * f_poly(n - 1, s);
        let scale = s.abs().max(1.0).powi(n as i32 - 1) * (1..n).product::<u32>() as f64;
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
    }

    #[test]
    fn f_derivative_identity(n in 1u32..=6, s in 0.5f64..40.0) {
        // F' + F = s^{n-1}, with F' by a central difference
        let h = 1e-4 * s;
        let d = (f_poly(n, s + h) - f_poly(n, s - h)) / (2.0 * h);
        let target = s.powi(n as i32 - 1);
        prop_assert!((d + f_poly(n, s) - target).abs() <= 1e-6 * target.max(1.0) * (1..n.max(2)).product::<u32>() as f64);
    }

    #[test]
    fn defining_equation_holds(n in 1u32..=4, a in 0.0f64..2.0, t in -15.0f64..25.0) {
        let (phi, _) = phi_at(n, a, t).unwrap();
        let nf = n as f64;
        let lhs = f_poly(n, phi) * phi.exp();
        let rhs = (nf * t).exp() / nf + f_poly(n, a) * a.exp();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * ((nf * t).exp() / nf + 1.0));
    }

    #[test]
    fn family_is_monotone(n in 1u32..=4, a in 0.0f64..1.0, da in 1e-3f64..0.5, t in -10.0f64..20.0, dt in 1e-2f64..2.0) {
        let (p, pt) = phi_at(n, a, t).unwrap();
        let (pa, _) = phi_at(n, a + da, t).unwrap();
        let (ptt, _) = phi_at(n, a, t + dt).unwrap();
        prop_assert!(p > a);
        // the a-dependence fades like e^{a-φ} and drops below rounding at large t
        prop_assert!(pa >= p * (1.0 - 4.0 * f64::EPSILON));
        if t < 0.0 {
            prop_assert!(pa > p);
        }
        prop_assert!(ptt > p);
        prop_assert!(pt > 0.0 && pt <= n as f64);
    }

    #[test]
    fn excess_is_positive(n in 1u32..=8, a in 0.0f64..3.0, t in -30.0f64..60.0) {
        let eta = solve_excess(n, a, t).unwrap();
        prop_assert!(eta > 0.0 && eta.is_finite());
    }

    #[test]
    fn profiles_keep_their_invariants(n in 1u32..=3, a in 0.0f64..1.0, lo in -20.0f64..0.0, len in 1.0f64..40.0) {
        let g = Grid::new(lo, lo + len, 1.0 / 32.0).unwrap();
        let p = solve_profile(n, a, &g).unwrap();
        prop_assert!(p.check_invariants().is_ok());
        let s = soliton_residual(&p.metric(), n).unwrap();
        let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(hi - lo < 1e-11, "spread {}", hi - lo);
    }
}
