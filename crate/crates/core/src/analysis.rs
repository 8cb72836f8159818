//! Closed-form mixing bounds and Monte Carlo lower-bound estimation.
//!
//! Lower bounds on TV are estimated by pushing both laws through a real
//! statistic and measuring the TV of the binned images. TV never grows
//! under a pushforward or under binning, so the estimate targets a lower
//! bound on the true distance (up to sampling error).

use rand::Rng;
use rayon::prelude::*;

use crate::config::SpinConfiguration;
use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::exact::hypercube_tv_exact;
use crate::graphical::{perfect_stationary_sample, sample_config_at};
use crate::kernel::RateKernel;
use crate::rng::{derive_seed, rng_from, StreamKind};
use crate::stationary::stationary_distribution;

/// Fewest samples per law accepted by [`projected_tv_estimate`].
pub const MIN_SAMPLES: usize = 1000;
/// Statistics with at most this many distinct values are binned exactly.
pub const EXACT_BIN_LIMIT: usize = 4096;
/// Number of equal-width bins otherwise.
pub const WIDTH_BINS: usize = 256;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Inputs of the all-ones lower bound at time `(1/2) ln n - alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilsonBoundInput {
    pub n_sites: usize,
    pub q_max: f64,
    pub rho: f64,
    pub alpha: f64,
}

impl WilsonBoundInput {
    /// `(1/2) ln n - alpha`.
    pub fn t(&self) -> f64 {
        0.5 * (self.n_sites as f64).ln() - self.alpha
    }
}

/// `0.7 e^{2 alpha} / (16 (1 + q_max)^2 rho^2 + 0.7 e^{2 alpha})`, with no
/// validity checks.
pub fn wilson_formula(q_max: f64, rho: f64, alpha: f64) -> f64 {
    let a = 0.7 * (2.0 * alpha).exp();
    let b = 16.0 * (1.0 + q_max).powi(2) * rho * rho;
    if a.is_infinite() {
        return 1.0;
    }
    a / (b + a)
}

/// [`wilson_formula`], valid when `alpha >= 1` and `t >= 1`.
pub fn wilson_lower_bound(input: WilsonBoundInput) -> Result<f64> {
    if !(input.q_max >= 0.0) || !(input.rho >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need q_max >= 0 and rho >= 1, got q_max = {}, rho = {}",
            input.q_max, input.rho
        )));
    }
    if !(input.alpha >= 1.0) {
        return Err(Error::OutOfValidity(format!("alpha = {} < 1", input.alpha)));
    }
    let t = input.t();
    if !(t >= 1.0) {
        return Err(Error::OutOfValidity(format!(
            "t = ln({})/2 - {} = {t} < 1",
            input.n_sites, input.alpha
        )));
    }
    Ok(wilson_formula(input.q_max, input.rho, input.alpha))
}

/// `Phi(eta) = 2 sum_x eta(x) pi(x) - 1`.
pub fn phi_statistic(pi: &[f64], eta: &SpinConfiguration) -> Result<f64> {
    if pi.len() != eta.len() {
        return Err(Error::LengthMismatch { left: pi.len(), right: eta.len() });
    }
    let mass: f64 = pi.iter().zip(eta.iter()).filter(|(_, b)| *b).map(|(p, _)| p).sum();
    Ok(2.0 * mass - 1.0)
}

/// `sum_{x in A} eta(x) - sum_{x in B} eta(x)` for equal-size leaf sets.
pub fn star_phi(a: &[usize], b: &[usize], eta: &SpinConfiguration) -> Result<i64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    for &x in a.iter().chain(b) {
        if x >= eta.len() {
            return Err(Error::SiteOutOfRange { site: x, n_sites: eta.len() });
        }
    }
    let count = |s: &[usize]| s.iter().filter(|&&x| eta.get(x)).count() as i64;
    Ok(count(a) - count(b))
}

/// `e^C / (48 + e^C)`.
pub fn star_lower_bound(c: f64) -> f64 {
    let e = c.exp();
    if e.is_infinite() {
        return 1.0;
    }
    e / (48.0 + e)
}

/// `(1/4)(ln n - C)`, which must be positive, for `n >= 3` leaves.
pub fn star_bound_time(n: usize, c: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("the star bound needs n >= 3 leaves, got {n}")));
    }
    let t = 0.25 * ((n as f64).ln() - c);
    if !(t > 0.0) {
        return Err(Error::OutOfValidity(format!("t = (ln {n} - {c})/4 = {t} is not positive")));
    }
    Ok(t)
}

/// Leaves `1..=n/2` and `n/2+1..=n` of the star (center at site 0).
pub fn star_halves(n: usize) -> (Vec<usize>, Vec<usize>) {
    let h = n / 2;
    ((1..=h).collect(), (h + 1..=2 * h).collect())
}

/// A Monte Carlo lower-bound estimate of TV with its bootstrap stderr.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Samples per law.
    pub n_samples: usize,
    pub n_bins: usize,
    /// Whether every distinct statistic value got its own bin.
    pub exact_bins: bool,
}

fn binned_tv(counts_a: &[u32], counts_b: &[u32], na: f64, nb: f64) -> f64 {
    0.5 * counts_a
        .iter()
        .zip(counts_b)
        .map(|(&a, &b)| (a as f64 / na - b as f64 / nb).abs())
        .sum::<f64>()
}

/// TV between the empirical laws of two samples of a statistic.
pub fn projected_tv_from_values(a: &[f64], b: &[f64], seed: u64) -> Result<TvEstimate> {
    let need = MIN_SAMPLES;
    for len in [a.len(), b.len()] {
        if len < need {
            return Err(Error::InsufficientSamples { got: len, need });
        }
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("statistic values must be finite".into()));
    }
    let mut distinct: Vec<f64> = a.iter().chain(b).copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let exact_bins = distinct.len() <= EXACT_BIN_LIMIT;
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    let n_bins = if exact_bins { distinct.len() } else { WIDTH_BINS };
    let bin = |v: f64| -> usize {
        if exact_bins {
            distinct.partition_point(|&d| d < v)
        } else {
            (((v - lo) / (hi - lo) * WIDTH_BINS as f64) as usize).min(WIDTH_BINS - 1)
        }
    };
    let bins_a: Vec<usize> = a.iter().map(|&v| bin(v)).collect();
    let bins_b: Vec<usize> = b.iter().map(|&v| bin(v)).collect();
    let count = |bins: &mut dyn Iterator<Item = usize>| {
        let mut c = vec![0u32; n_bins];
        bins.for_each(|i| c[i] += 1);
        c
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let estimate = binned_tv(&count(&mut bins_a.iter().copied()), &count(&mut bins_b.iter().copied()), na, nb);

    let mut rng = rng_from(seed, &[StreamKind::Bootstrap as u64]);
    let mut reps = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let ca = count(&mut (0..a.len()).map(|_| bins_a[rng.random_range(0..a.len())]));
        let cb = count(&mut (0..b.len()).map(|_| bins_b[rng.random_range(0..b.len())]));
        reps.push(binned_tv(&ca, &cb, na, nb));
    }
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let var = reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;
    Ok(TvEstimate { estimate, stderr: var.sqrt(), n_samples: a.len().min(b.len()), n_bins, exact_bins })
}

/// Estimate `|| law_A - law_B ||` from below through `statistic`.
///
/// Replica `i` of law A is drawn by `sample_a(s)` with a seed `s` derived
/// from `(seed, 1, i)`; law B likewise with `(seed, 2, i)`.
pub fn projected_tv_estimate<S, A, B>(statistic: S, sample_a: A, sample_b: B, n_samples: usize, seed: u64) -> Result<TvEstimate>
where
    S: Fn(&SpinConfiguration) -> f64 + Sync,
    A: Fn(u64) -> SpinConfiguration + Sync,
    B: Fn(u64) -> SpinConfiguration + Sync,
{
    if n_samples < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { got: n_samples, need: MIN_SAMPLES });
    }
    let draw = |which: u64, sampler: &(dyn Fn(u64) -> SpinConfiguration + Sync)| -> Vec<f64> {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| statistic(&sampler(derive_seed(seed, &[which, i]))))
            .collect()
    };
    let a = draw(1, &sample_a);
    let b = draw(2, &sample_b);
    projected_tv_from_values(&a, &b, seed)
}

/// Kernel families for cutoff profiles, indexed by size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Cycle,
    Star,
    Complete,
}

impl KernelFamily {
    pub fn build(&self, n: usize) -> Result<RateKernel> {
        match self {
            Self::Cycle => RateKernel::cycle(n),
            Self::Star => RateKernel::star(n),
            Self::Complete => RateKernel::complete(n),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cycle => "cycle",
            Self::Star => "star",
            Self::Complete => "complete",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// TV from all-ones at `(1/2) ln n - alpha`, estimated from below.
    Lower,
    /// The hypercube bound at `(1/2) ln n + alpha`, an upper bound on `dbar`.
    Upper,
}

impl Side {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lower => "lower",
            Self::Upper => "upper",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    /// Number of sites `|S|`.
    pub n: usize,
    pub alpha: f64,
    pub side: Side,
    pub estimate: f64,
    pub stderr: f64,
    /// 0 for exact values.
    pub n_samples: usize,
}

/// `d` around `(1/2) ln |S|` on both sides. Offsets `alpha` are in units
/// of the window, which is of order 1 here.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffProfile {
    pub rows: Vec<ProfileRow>,
}

impl CutoffProfile {
    /// CSV `n,alpha,side,estimate,stderr,n_samples`.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["n", "alpha", "side", "estimate", "stderr", "n_samples"]);
        for r in &self.rows {
            table.push(vec![
                r.n.to_string(),
                fmt_f64(r.alpha),
                r.side.name().into(),
                fmt_f64(r.estimate),
                fmt_f64(r.stderr),
                r.n_samples.to_string(),
            ]);
        }
        table
    }
}

/// Lower-side estimate for one kernel: projected `Phi` TV between the law
/// at `t` from all-ones and exact stationary samples.
pub fn all_ones_phi_estimate(kernel: &RateKernel, t: f64, n_samples: usize, seed: u64) -> Result<TvEstimate> {
    let pi = stationary_distribution(kernel)?.pi;
    let ones = SpinConfiguration::ones(kernel.n_sites());
    projected_tv_estimate(
        |eta| phi_statistic(&pi, eta).expect("lengths match"),
        |s| sample_config_at(kernel, &ones, t, s),
        |s| perfect_stationary_sample(kernel, s),
        n_samples,
        seed,
    )
}

/// Lower estimate on the `n`-star (`n` even): projected TV, through
/// [`star_phi`] on [`star_halves`], between the law at
/// `(1/4)(ln n - C)` from the configuration that is 1 exactly on the first
/// half of the leaves and exact stationary samples.
pub fn star_half_phi_estimate(n: usize, c: f64, n_samples: usize, seed: u64) -> Result<TvEstimate> {
    if n % 2 != 0 {
        return Err(Error::InvalidSize(format!("the star statistic needs an even leaf count, got {n}")));
    }
    let t = star_bound_time(n, c)?;
    let kernel = RateKernel::star(n)?;
    let (a, b) = star_halves(n);
    let mut start = SpinConfiguration::zeros(n + 1);
    for &x in &a {
        start.set(x, true);
    }
    projected_tv_estimate(
        |eta| star_phi(&a, &b, eta).expect("leaf sets fit") as f64,
        |s| sample_config_at(&kernel, &start, t, s),
        |s| perfect_stationary_sample(&kernel, s),
        n_samples,
        seed,
    )
}

/// Profile of a family over `sizes` (family parameters) and `alphas`.
/// Lower-side rows are omitted when `(1/2) ln |S| - alpha < 0`.
pub fn cutoff_profile(
    family: KernelFamily,
    sizes: &[usize],
    alphas: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CutoffProfile> {
    let mut rows = Vec::new();
    for &size in sizes {
        let kernel = family.build(size)?;
        let n = kernel.n_sites();
        for &alpha in alphas {
            let t = 0.5 * (n as f64).ln() - alpha;
            if t >= 0.0 {
                let est = all_ones_phi_estimate(&kernel, t, n_samples, derive_seed(seed, &[size as u64, alpha.to_bits()]))?;
                rows.push(ProfileRow { n, alpha, side: Side::Lower, estimate: est.estimate, stderr: est.stderr, n_samples });
            }
            let upper = hypercube_tv_exact(n, 0.5 * (n as f64).ln() + alpha);
            rows.push(ProfileRow { n, alpha, side: Side::Upper, estimate: upper, stderr: 0.0, n_samples: 0 });
        }
    }
    Ok(CutoffProfile { rows })
}

/// CSV `quantity,value`.
pub fn bounds_table(entries: &[(String, f64)]) -> Table {
    let mut table = Table::new(&["quantity", "value"]);
    for (name, v) in entries {
        table.push(vec![name.clone(), fmt_f64(*v)]);
    }
    table
}
