use solitonforge::radial_soliton::{ball_volume, phi_at, solve_profile};
use solitonforge::Grid;

#[test]
fn ball_volume_grows_like_t_to_the_n() {
    let g = Grid::new(-10.0, 400.0, 1.0 / 16.0).unwrap();
    let p = solve_profile(2, 0.0, &g).unwrap();
    let ratios: Vec<f64> = (0..=14)
        .map(|k| {
            let t = 50.0 * 8f64.powf(k as f64 / 14.0);
            ball_volume(&p, t).unwrap() / (t * t)
        })
        .collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(lo > 0.0 && hi / lo < 1.5, "{ratios:?}");
}

#[test]
fn small_members_approach_the_bubble() {
    // φ_a(s + log a)/a → (1 + e^{ns})^{1/n} on a fixed window
    let n = 2u32;
    let nf = n as f64;
    let mut prev = f64::INFINITY;
    for a in [0.1, 0.01, 0.001] {
        let sup = (0..=60)
            .map(|k| {
                let s = -3.0 + 0.1 * k as f64;
                let (phi, _) = phi_at(n, a, s + f64::ln(a)).unwrap();
                let bubble = (1.0 + (nf * s).exp()).powf(1.0 / nf);
                (phi / a / bubble - 1.0).abs()
            })
            .fold(0.0, f64::max);
        // the correction is O(a)
        assert!(sup < prev / 5.0, "a={a}: {sup} vs {prev}");
        prev = sup;
    }
    assert!(prev < 1e-2, "{prev}");
}

#[test]
fn phi_t_is_consistent_with_differences() {
    // central differences of φ against the algebraic φ_t, error O(h²)
    let err = |h: f64| {
        let g = Grid::new(-6.0, 12.0, h).unwrap();
        let p = solve_profile(2, 0.25, &g).unwrap();
        let (phi, pt) = (p.phi(), p.phi_t());
        (1..phi.len() - 1).map(|i| ((phi[i + 1] - phi[i - 1]) / (2.0 * h) - pt[i]).abs()).fold(0.0, f64::max)
    };
    let ratio = err(1.0 / 16.0) / err(1.0 / 32.0);
    assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
}
