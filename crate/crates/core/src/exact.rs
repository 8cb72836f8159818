//! Exact laws of the noisy voter process on `{0,1}^S` for small `|S|`.
//!
//! State encoding: site `i` occupies bit `i`, so a configuration `eta` has
//! index `sum_i eta(i) 2^i`. Site `x` flips at rate
//! `1/2 + sum_{y != x} q(x,y) 1{eta(y) != eta(x)}`.

use std::io::Write;

use rayon::prelude::*;

use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::kernel::RateKernel;
use crate::uniformize::{self, MarkovGenerator};

/// Largest site count for which the configuration generator is built.
pub const MAX_EXACT_SITES: usize = 20;
/// Largest site count for which `d(t)` enumerates every initial state.
pub const MAX_PROFILE_SITES: usize = 12;
const MASS_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-12;

/// A probability law over an enumerated finite state space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidArgument("probabilities must be finite and >= 0".into()));
        }
        let mass: f64 = values.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!("probabilities sum to {mass}")));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!((values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Self(values)
    }

    pub fn point_mass(len: usize, index: usize) -> Self {
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        Self(v)
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    /// Empirical law of `indices` over `0..len`.
    pub fn empirical<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut counts = vec![0.0; len];
        let mut total = 0.0;
        for i in indices {
            counts[i] += 1.0;
            total += 1.0;
        }
        counts.iter_mut().for_each(|c| *c /= total);
        Self(counts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn tv(&self, other: &Self) -> Result<f64> {
        tv(self, other)
    }

    /// CSV `state_index,probability`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["state_index", "probability"]);
        for (i, p) in self.0.iter().enumerate() {
            t.push(vec![i.to_string(), fmt_f64(*p)]);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        Ok(self.to_table().write_to(w)?)
    }
}

/// Total variation distance `(1/2) sum |p - r|`.
pub fn tv(p: &ProbabilityVector, r: &ProbabilityVector) -> Result<f64> {
    if p.len() != r.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: r.len() });
    }
    Ok(tv_slices(&p.0, &r.0))
}

pub(crate) fn tv_slices(p: &[f64], r: &[f64]) -> f64 {
    0.5 * p.iter().zip(r).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Generator of the noisy voter process on `2^n` configurations.
#[derive(Clone, Debug)]
pub struct ConfigGenerator {
    n_sites: usize,
    // flip[state * n_sites + site]
    flip: Vec<f64>,
    exit: Vec<f64>,
    lambda: f64,
}

impl ConfigGenerator {
    pub fn new(kernel: &RateKernel) -> Result<Self> {
        let n = kernel.n_sites();
        if n > MAX_EXACT_SITES {
            return Err(Error::Capacity(format!(
                "exact configuration solver supports at most {MAX_EXACT_SITES} sites, got {n}"
            )));
        }
        let states = 1usize << n;
        let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|x| kernel.out_rates(x).collect()).collect();
        let mut flip = vec![0.0; states * n];
        let mut exit = vec![0.0; states];
        for s in 0..states {
            let mut total = 0.0;
            for (x, row) in rows.iter().enumerate() {
                let bx = (s >> x) & 1;
                let disagree: f64 = row
                    .iter()
                    .filter(|(y, _)| (s >> y) & 1 != bx)
                    .map(|(_, r)| r)
                    .sum();
                let rate = 0.5 + disagree;
                flip[s * n + x] = rate;
                total += rate;
            }
            exit[s] = total;
        }
        Ok(Self::from_parts(n, flip, exit, n as f64 * (1.0 + kernel.q_max())))
    }

    pub(crate) fn from_parts(n_sites: usize, flip: Vec<f64>, exit: Vec<f64>, lambda: f64) -> Self {
        debug_assert!(exit.iter().all(|&e| e <= lambda));
        Self { n_sites, flip, exit, lambda }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `2^n_sites`.
    pub fn n_states(&self) -> usize {
        self.exit.len()
    }

    /// Rate at which `site` flips in configuration `state`.
    pub fn flip_rate(&self, state: usize, site: usize) -> f64 {
        self.flip[state * self.n_sites + site]
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        self.exit[state]
    }

    /// Generator entry `G(from, to)`.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return -self.exit[from];
        }
        let diff = from ^ to;
        if diff.is_power_of_two() {
            self.flip_rate(from, diff.trailing_zeros() as usize)
        } else {
            0.0
        }
    }

    pub fn evolve(&self, initial: &ProbabilityVector, t: f64) -> Result<ProbabilityVector> {
        evolve(self, initial, t)
    }

    pub fn stationary(&self) -> ProbabilityVector {
        stationary_of(self)
    }
}

impl MarkovGenerator for ConfigGenerator {
    fn n_states(&self) -> usize {
        self.exit.len()
    }

    fn uniformization_rate(&self) -> f64 {
        self.lambda
    }

    fn uniformized_step(&self, p: &[f64], out: &mut [f64]) {
        let n = self.n_sites;
        let inv = 1.0 / self.lambda;
        for (s, o) in out.iter_mut().enumerate() {
            *o = p[s] * (1.0 - self.exit[s] * inv);
        }
        for (s, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let m = mass * inv;
            let rates = &self.flip[s * n..(s + 1) * n];
            for (x, &r) in rates.iter().enumerate() {
                out[s ^ (1 << x)] += m * r;
            }
        }
    }
}

pub fn build_config_generator(kernel: &RateKernel) -> Result<ConfigGenerator> {
    ConfigGenerator::new(kernel)
}

/// `initial · exp(tG)` by uniformization.
pub fn evolve(gen: &ConfigGenerator, initial: &ProbabilityVector, t: f64) -> Result<ProbabilityVector> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    if initial.len() != gen.n_states() {
        return Err(Error::LengthMismatch { left: initial.len(), right: gen.n_states() });
    }
    Ok(ProbabilityVector(uniformize::evolve(gen, &initial.0, t)))
}

/// The unique stationary law `mu_inf`, by running the uniformized chain
/// from the uniform law until `||mu G||_inf <= 1e-12`.
pub fn stationary_of(gen: &ConfigGenerator) -> ProbabilityVector {
    let states = gen.n_states();
    let mut p = vec![1.0 / states as f64; states];
    // Every pair of laws contracts at least like n e^{-t}.
    let mut step = 1.0 + (gen.n_sites as f64).ln().max(0.0);
    for _ in 0..200 {
        if gen.residual(&p) <= STATIONARY_TOL {
            break;
        }
        p = uniformize::evolve(gen, &p, step);
        step = 4.0;
    }
    ProbabilityVector(p)
}

/// One point of a `d(t)` profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DPoint {
    pub t: f64,
    /// `max_eta || mu^eta_t - mu_inf ||`
    pub d: f64,
    /// `max_{eta1, eta2} || mu^eta1_t - mu^eta2_t ||`
    pub dbar: f64,
}

fn check_profile_capacity(kernel: &RateKernel) -> Result<()> {
    if kernel.n_sites() > MAX_PROFILE_SITES {
        return Err(Error::Capacity(format!(
            "d(t) enumerates 2^n initial states; at most {MAX_PROFILE_SITES} sites supported, got {}",
            kernel.n_sites()
        )));
    }
    Ok(())
}

fn max_tv_to(dists: &[Vec<f64>], target: &[f64]) -> f64 {
    dists
        .par_iter()
        .map(|d| tv_slices(d, target))
        .reduce(|| 0.0, f64::max)
}

fn max_pairwise_tv(dists: &[Vec<f64>]) -> f64 {
    (0..dists.len())
        .into_par_iter()
        .map(|i| {
            dists[i + 1..]
                .iter()
                .map(|d| tv_slices(&dists[i], d))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn advance(gen: &ConfigGenerator, dists: &mut [Vec<f64>], dt: f64) {
    if dt > 0.0 {
        dists.par_iter_mut().for_each(|d| *d = uniformize::evolve(gen, d, dt));
    }
}

fn point_masses(states: usize) -> Vec<Vec<f64>> {
    (0..states).map(|s| ProbabilityVector::point_mass(states, s).0).collect()
}

/// `d(t)` and `dbar(t)` on `t_grid` (any order), maximizing over all `2^n`
/// initial configurations.
pub fn d_profile(kernel: &RateKernel, t_grid: &[f64]) -> Result<Vec<DPoint>> {
    check_profile_capacity(kernel)?;
    if let Some(&bad) = t_grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::InvalidArgument(format!("grid time {bad} is not >= 0")));
    }
    let gen = ConfigGenerator::new(kernel)?;
    let pi = stationary_of(&gen);
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));

    let mut dists = point_masses(gen.n_states());
    let mut now = 0.0;
    let mut out = vec![DPoint { t: 0.0, d: 0.0, dbar: 0.0 }; t_grid.len()];
    for i in order {
        let t = t_grid[i];
        advance(&gen, &mut dists, t - now);
        now = t;
        out[i] = DPoint {
            t,
            d: max_tv_to(&dists, pi.as_slice()),
            dbar: max_pairwise_tv(&dists),
        };
    }
    Ok(out)
}

/// CSV `t,d,dbar`.
pub fn d_profile_table(points: &[DPoint]) -> Table {
    let mut table = Table::new(&["t", "d", "dbar"]);
    for p in points {
        table.push(vec![fmt_f64(p.t), fmt_f64(p.d), fmt_f64(p.dbar)]);
    }
    table
}

/// Absolute time tolerance of [`t_mix_exact`].
pub const TMIX_TOL: f64 = 1e-4;

/// `t_mix(eps) = inf{t : d(t) <= eps}` by bisection, using that `d` is
/// non-increasing. The bracket grows geometrically from `[0, 1]`.
pub fn t_mix_exact(kernel: &RateKernel, eps: f64) -> Result<f64> {
    check_profile_capacity(kernel)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1), got {eps}")));
    }
    let gen = ConfigGenerator::new(kernel)?;
    let pi = stationary_of(&gen);
    let d_of = |dists: &[Vec<f64>]| max_tv_to(dists, pi.as_slice());

    let mut lo_dists = point_masses(gen.n_states());
    if d_of(&lo_dists) <= eps {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let mut trial = lo_dists.clone();
        advance(&gen, &mut trial, hi - lo);
        if d_of(&trial) <= eps {
            break;
        }
        lo = hi;
        lo_dists = trial;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidArgument("mixing time bracket diverged".into()));
        }
    }
    while hi - lo > TMIX_TOL {
        let mid = 0.5 * (lo + hi);
        let mut trial = lo_dists.clone();
        advance(&gen, &mut trial, mid - lo);
        if d_of(&trial) <= eps {
            hi = mid;
        } else {
            lo = mid;
            lo_dists = trial;
        }
    }
    Ok(hi)
}

/// TV between the time-`t` laws of the `q ≡ 0` system (independent
/// per-site rerandomization at rate 1) started from all-ones and
/// all-zeros. Each site keeps its start with probability
/// `p = (1 + e^{-t})/2`, so this is the TV between `Bin(n, p)` and
/// `Bin(n, 1 - p)`, summed in log space in `O(n)`.
pub fn hypercube_tv_exact(n: usize, t: f64) -> f64 {
    assert!(t >= 0.0, "negative time {t}");
    if n == 0 {
        return 0.0;
    }
    let decay = (-t).exp();
    if decay >= 1.0 {
        return 1.0;
    }
    let ln_p = (0.5 * (1.0 + decay)).ln();
    let ln_q = (-0.5 * (-t).exp_m1()).ln();
    let nf = n as f64;
    let mut ln_binom = 0.0;
    let mut sum = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        if k > 0 {
            ln_binom += (nf - kf + 1.0).ln() - kf.ln();
        }
        let a = (ln_binom + kf * ln_p + (nf - kf) * ln_q).exp();
        let b = (ln_binom + kf * ln_q + (nf - kf) * ln_p).exp();
        sum += (a - b).abs();
    }
    (0.5 * sum).min(1.0)
}

/// `(4/sqrt(pi)) ∫_0^{e^{-alpha}/sqrt(8)} e^{-x^2} dx` by adaptive Simpson
/// quadrature (absolute error well below 1e-10).
pub fn dgm_limit(alpha: f64) -> f64 {
    let upper = (-alpha).exp() / 8f64.sqrt();
    if upper == 0.0 {
        return 0.0;
    }
    let f = |x: f64| (-x * x).exp();
    4.0 / std::f64::consts::PI.sqrt() * adaptive_simpson(&f, 0.0, upper, 1e-13, 50)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
