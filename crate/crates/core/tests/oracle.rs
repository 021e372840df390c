//! High-precision oracles for the Cao family.

use num_bigint::BigInt;
use solitonforge::radial_soliton::{phi_at, solve_excess};

/// Fixed point with `BITS` fractional bits.
const BITS: u32 = 256;

fn one() -> BigInt {
    BigInt::from(1) << BITS
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> BITS
}

/// `e^x` for fixed-point `x`: Taylor at `x / 2^12`, then twelve squarings.
fn exp_fixed(x: &BigInt) -> BigInt {
    let k = 12;
    let y: BigInt = x >> k;
    let mut term = one();
    let mut sum = one();
    for i in 1..80u32 {
        term = mul(&term, &y) / i;
        sum += &term;
    }
    for _ in 0..k {
        sum = mul(&sum, &sum);
    }
    sum
}

fn from_f64(v: f64) -> BigInt {
    // exact for the dyadic values used here
    let scaled = v * 2f64.powi(60);
    BigInt::from(scaled as i128) << (BITS - 60)
}

fn to_f64(v: &BigInt) -> f64 {
    let top: BigInt = v >> (BITS - 64);
    let top: i128 = top.try_into().expect("fits");
    top as f64 / 2f64.powi(64)
}

/// Bisection for `(φ - 1) e^φ = e^{2t}/2 - 1`, the `n = 2`, `a = 0` member.
fn bisect_n2(t: f64) -> f64 {
    let target = (exp_fixed(&(from_f64(2.0 * t))) >> 1) - one();
    let (mut lo, mut hi) = (from_f64(1.0), from_f64(2.0 * t));
    for _ in 0..200 {
        let mid: BigInt = (&lo + &hi) >> 1;
        let val = mul(&(&mid - one()), &exp_fixed(&mid));
        if val < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    to_f64(&lo)
}

/// From a 50-digit root of the defining equation.
const PHI_N2_T20: f64 = 35.758430667711320741626067635027571107746582331699;
const PHI_N3_T20: f64 = 51.073985719739483299052440961255032251274191040068;
const PHI_N2_A025_TM3: f64 = 0.25382426181577352753668890336308569559410414773017;

#[test]
fn bisection_reproduces_the_frozen_value() {
    let b = bisect_n2(20.0);
    assert!((b - PHI_N2_T20).abs() < 1e-14, "{b}");
}

#[test]
fn cao_at_t20_matches_the_bisection() {
    let b = bisect_n2(20.0);
    let (phi, _) = phi_at(2, 0.0, 20.0).unwrap();
    assert!((phi - b).abs() < 1e-8);
    assert!((phi - PHI_N2_T20).abs() < 1e-13 * PHI_N2_T20, "{phi}");
}

#[test]
fn other_frozen_values() {
    let (phi, _) = phi_at(3, 0.0, 20.0).unwrap();
    assert!((phi - PHI_N3_T20).abs() < 1e-13 * PHI_N3_T20, "{phi}");
    let eta = solve_excess(2, 0.25, -3.0).unwrap();
    let exact_eta = PHI_N2_A025_TM3 - 0.25;
    assert!((eta - exact_eta).abs() < 1e-12 * exact_eta, "{eta} vs {exact_eta}");
}

#[test]
fn bisection_tracks_the_solver_along_t() {
    for t in [1.0, 5.0, 12.0, 30.0] {
        let (phi, _) = phi_at(2, 0.0, t).unwrap();
        let b = bisect_n2(t);
        assert!((phi - b).abs() < 1e-13 * b, "t={t}: {phi} vs {b}");
    }
}
