//! Worked values with hand-derived or independently computed oracles.

use votermix::analysis::{star_bound_time, star_lower_bound, wilson_formula, wilson_lower_bound, WilsonBoundInput};
use votermix::channels::upsilon_alpha;
use votermix::exact::{dgm_limit, hypercube_tv_exact, stationary_of, t_mix_exact, tv};
use votermix::star::{project_distribution, reduced_generator, reduced_stationary, t_mix_from_ones, tv_from_all_ones, ReducedState};
use votermix::stationary::stationary_distribution;
use votermix::{ConfigGenerator, ProbabilityVector, RateKernel};

/// Stationary law of a small site chain by Gaussian elimination on
/// `pi Q = 0`, `sum pi = 1`.
fn dense_stationary(k: &RateKernel) -> Vec<f64> {
    let n = k.n_sites();
    let mut a = vec![vec![0.0; n + 1]; n];
    for y in 0..n {
        for x in 0..n {
            a[y][x] = if x == y { -k.exit_rate(x) } else { k.rate(x, y) };
        }
    }
    // Replace the last balance equation by normalization.
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

fn erf(x: f64) -> f64 {
    // Maclaurin series; plenty for |x| < 1.
    let mut term = x;
    let mut sum = x;
    for k in 1..60 {
        term *= -x * x / k as f64;
        sum += term / (2 * k + 1) as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

#[test]
fn star_stationary_law() {
    let k = RateKernel::star(4).unwrap();
    let info = stationary_distribution(&k).unwrap();
    let dense = dense_stationary(&k);
    assert!((info.pi[0] - 0.5).abs() < 1e-12);
    for x in 1..=4 {
        assert!((info.pi[x] - 0.125).abs() < 1e-12);
    }
    for x in 0..5 {
        assert!((info.pi[x] - dense[x]).abs() < 1e-12);
    }
    assert!((info.rho - 4.0).abs() < 1e-9);
}

#[test]
fn complete_and_file_kernels() {
    let k = RateKernel::complete(3).unwrap();
    for x in 0..3 {
        for y in 0..3 {
            assert_eq!(k.rate(x, y), if x == y { 0.0 } else { 0.5 });
        }
    }
    let k = RateKernel::parse("sites 2\nrate 0 1 2.0\n").unwrap();
    assert_eq!(k.q_max(), 2.0);
    assert_eq!(k.rate(0, 1), 2.0);
    assert_eq!(k.rate(1, 0), 0.0);
    assert!(RateKernel::parse("sites 2\nrate 0 5 1.0\n").is_err());
    let broken = RateKernel::from_rates(4, [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap();
    assert!(stationary_distribution(&broken).is_err());
}

#[test]
fn single_site_solutions() {
    let k = RateKernel::from_rates(1, []).unwrap();
    let g = ConfigGenerator::new(&k).unwrap();
    for t in [0.3, 1.0, 2.5] {
        let law = g.evolve(&ProbabilityVector::point_mass(2, 1), t).unwrap();
        assert!((law.as_slice()[1] - 0.5 * (1.0 + (-t as f64).exp())).abs() < 1e-12);
        assert!((hypercube_tv_exact(1, t) - (-t as f64).exp()).abs() < 1e-14);
    }
    assert!((t_mix_exact(&k, 0.25).unwrap() - 2f64.ln()).abs() <= 1e-4);
    assert_eq!(hypercube_tv_exact(7, 0.0), 1.0);
}

#[test]
fn tv_arithmetic() {
    let p = ProbabilityVector::new(vec![0.7, 0.3]).unwrap();
    let r = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
    assert!((tv(&p, &r).unwrap() - 0.2).abs() < 1e-15);
    let a = ProbabilityVector::point_mass(4, 0);
    let b = ProbabilityVector::point_mass(4, 3);
    assert_eq!(tv(&a, &b).unwrap(), 1.0);
    assert!(tv(&a, &ProbabilityVector::uniform(3)).is_err());
}

#[test]
fn dgm_limit_values() {
    // The integral is 2 erf(e^{-alpha} / sqrt 8).
    for alpha in [0.0, 0.5, 1.0, 2.0, 4.0] {
        assert!((dgm_limit(alpha) - 2.0 * erf((-alpha as f64).exp() / 8f64.sqrt())).abs() < 1e-10);
    }
    assert!((dgm_limit(0.0) - 0.765_849_845).abs() < 1e-8);
    let n = 1024;
    assert!(hypercube_tv_exact(n, 0.5 * (n as f64).ln() + 4.0) <= dgm_limit(4.0) + 0.02);
}

#[test]
fn bound_formulas() {
    let e4 = 4f64.exp();
    assert!((wilson_formula(0.0, 1.0, 2.0) - 0.7 * e4 / (16.0 + 0.7 * e4)).abs() < 1e-15);
    assert!((wilson_formula(0.0, 1.0, 2.0) - 0.7049).abs() < 1e-4);
    assert!((wilson_formula(1.0, 1.0, 2.0) - 0.374).abs() < 5e-4);
    assert!(wilson_formula(1.0, 1.0, 400.0) == 1.0);
    assert!(wilson_formula(1.0, 1e9, 2.0) < 1e-15);
    let ok = WilsonBoundInput { n_sites: 1 << 20, q_max: 1.0, rho: 1.0, alpha: 2.0 };
    assert_eq!(wilson_lower_bound(ok).unwrap(), wilson_formula(1.0, 1.0, 2.0));
    assert!(wilson_lower_bound(WilsonBoundInput { alpha: 0.5, ..ok }).is_err());
    assert!(wilson_lower_bound(WilsonBoundInput { n_sites: 256, ..ok }).is_err());
    assert!((star_lower_bound(0.0) - 1.0 / 49.0).abs() < 1e-15);
    assert!((star_lower_bound(48f64.ln()) - 0.5).abs() < 1e-15);
    assert!(star_bound_time(6, 6f64.ln()).is_err());
    assert!(star_bound_time(2, 0.0).is_err());
}

#[test]
fn channel_weights() {
    assert!((upsilon_alpha(0.25, 0.25, 0.25).unwrap() - 0.8).abs() < 1e-15);
    for t1 in [0.1, 0.3, 0.45] {
        let g1: f64 = 1.0 - 2.0 * t1;
        assert!((upsilon_alpha(0.5, t1, 0.49).unwrap() - (1.0 - g1 * g1)).abs() < 1e-15);
    }
    assert!(upsilon_alpha(0.2, 0.499_999, 0.5 - 1e-7).unwrap() > 0.999);
    assert!(upsilon_alpha(0.2, 0.3, 0.1).is_err());
    assert!(upsilon_alpha(0.6, 0.1, 0.2).is_err());
}

#[test]
fn reduced_rate_table() {
    let n = 10;
    let g = reduced_generator(n).unwrap();
    let s = |center: u8, k| ReducedState { center: center == 1, k };
    let r = |a, b| g.rate(a, b);
    for k in 0..=n {
        let kf = k as f64;
        let nf = n as f64;
        assert_eq!(r(s(0, k), s(1, k)), 0.5 + kf / nf);
        assert_eq!(r(s(1, k), s(0, k)), 0.5 + (nf - kf) / nf);
        if k < n {
            assert_eq!(r(s(0, k), s(0, k + 1)), (nf - kf) / 2.0);
            assert_eq!(r(s(1, k), s(1, k + 1)), 3.0 * (nf - kf) / 2.0);
        }
        if k > 0 {
            assert_eq!(r(s(0, k), s(0, k - 1)), 3.0 * kf / 2.0);
            assert_eq!(r(s(1, k), s(1, k - 1)), kf / 2.0);
        }
    }
    assert_eq!(g.exit_rate(s(1, n)), n as f64 / 2.0 + 0.5);
    assert_eq!(g.exit_rate(s(0, 0)), n as f64 / 2.0 + 0.5);
}

#[test]
fn reduced_chain_lifts_for_two_leaves() {
    let full = ConfigGenerator::new(&RateKernel::star(2).unwrap()).unwrap();
    let pi_full = stationary_of(&full);
    let red = reduced_generator(2).unwrap();
    let pi_red = reduced_stationary(&red);
    assert!(tv(&project_distribution(&pi_full, 2).unwrap(), &pi_red).unwrap() <= 1e-9);
    for t in [0.5, 1.0, 2.0] {
        let law = full.evolve(&ProbabilityVector::point_mass(8, 7), t).unwrap();
        assert!((tv(&law, &pi_full).unwrap() - tv_from_all_ones(2, t).unwrap()).abs() <= 1e-9);
    }
    assert!(tv_from_all_ones(5000, 0.0).unwrap() > 0.99);
}

#[test]
fn star_mixing_from_all_ones_is_bounded() {
    let times: Vec<f64> = [100, 1000, 10_000].iter().map(|&n| t_mix_from_ones(n, 0.25).unwrap()).collect();
    let (lo, hi) = times.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    assert!(hi - lo <= 0.25 * hi, "{times:?}");
    let t16 = t_mix_from_ones(1000, 1.0 / 16.0).unwrap();
    assert!(t16 / times[1] <= 4.0 && t16 > times[1]);
}
