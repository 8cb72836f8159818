//! The n-star projected onto (center bit, number of leaves in state 1).
//!
//! On the star (center `0`, leaves `1..=n`, `q(center, leaf) = 1/n`,
//! `q(leaf, center) = 1`) the pair `(c, k)` is itself a Markov chain:
//!
//! | from    | to        | rate            |
//! |---------|-----------|-----------------|
//! | (0, k)  | (1, k)    | 1/2 + k/n       |
//! | (0, k)  | (0, k+1)  | (n-k)/2         |
//! | (0, k)  | (0, k-1)  | 3k/2            |
//! | (1, k)  | (0, k)    | 1/2 + (n-k)/n   |
//! | (1, k)  | (1, k+1)  | 3(n-k)/2        |
//! | (1, k)  | (1, k-1)  | k/2             |
//!
//! States are indexed `c * (n + 1) + k`. Given `(c, k)`, the full law
//! from all-ones is uniform over the leaf sets of size `k`, and so is the
//! stationary law, which makes the full-system TV from all-ones equal to
//! the TV of the reduced chain from `(1, n)`.

use crate::config::SpinConfiguration;
use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::exact::{tv_slices, ProbabilityVector};
use crate::uniformize::{self, MarkovGenerator};

/// Absolute time tolerance of [`t_mix_from_ones`].
pub const TMIX_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ReducedState {
    pub center: bool,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedGenerator {
    n: usize,
    /// Per state (natural index): stay, center-flip, up and down
    /// probabilities of one uniformized step.
    stay: Vec<f64>,
    flip: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
}

pub fn reduced_generator(n: usize) -> Result<ReducedGenerator> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("the star needs n >= 2 leaves, got {n}")));
    }
    if n % 2 == 1 {
        log::warn!("reduced star chain with odd n = {n}; the star results concern even n");
    }
    let mut gen = ReducedGenerator { n, stay: Vec::new(), flip: Vec::new(), up: Vec::new(), down: Vec::new() };
    let inv = 1.0 / gen.uniformization_rate();
    for c in [false, true] {
        for k in 0..=n {
            let [flip, up, down] = gen.moves(c, k);
            gen.stay.push(1.0 - (flip + up + down) * inv);
            gen.flip.push(flip * inv);
            gen.up.push(up * inv);
            gen.down.push(down * inv);
        }
    }
    Ok(gen)
}

impl ReducedGenerator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index(&self, s: ReducedState) -> usize {
        usize::from(s.center) * (self.n + 1) + s.k
    }

    pub fn state(&self, index: usize) -> ReducedState {
        ReducedState { center: index > self.n, k: index % (self.n + 1) }
    }

    /// `[(center flip), (k + 1), (k - 1)]` rates out of `(c, k)`.
    fn moves(&self, c: bool, k: usize) -> [f64; 3] {
        let nf = self.n as f64;
        let kf = k as f64;
        let free = nf - kf;
        if c {
            [0.5 + free / nf, 1.5 * free, 0.5 * kf]
        } else {
            [0.5 + kf / nf, 0.5 * free, 1.5 * kf]
        }
    }

    /// Rate from `from` to `to` (`from != to`).
    pub fn rate(&self, from: ReducedState, to: ReducedState) -> f64 {
        let [flip, up, down] = self.moves(from.center, from.k);
        if from.k == to.k && from.center != to.center {
            flip
        } else if from.center == to.center && to.k == from.k + 1 {
            up
        } else if from.center == to.center && to.k + 1 == from.k {
            down
        } else {
            0.0
        }
    }

    pub fn exit_rate(&self, s: ReducedState) -> f64 {
        self.moves(s.center, s.k).iter().sum()
    }

    /// Generator entry `G(from, to)` by index, diagonal included.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        let (a, b) = (self.state(from), self.state(to));
        if from == to {
            -self.exit_rate(a)
        } else {
            self.rate(a, b)
        }
    }

    /// Point mass at `(1, n)`, the image of all-ones.
    pub fn all_ones(&self) -> ProbabilityVector {
        ProbabilityVector::point_mass(self.n_states(), self.index(ReducedState { center: true, k: self.n }))
    }
}

impl MarkovGenerator for ReducedGenerator {
    fn n_states(&self) -> usize {
        2 * (self.n + 1)
    }

    fn uniformization_rate(&self) -> f64 {
        1.5 * self.n as f64 + 1.5
    }

    fn uniformized_step(&self, p: &[f64], out: &mut [f64]) {
        let m = self.n + 1;
        for (c, other) in [(0, m), (m, 0)] {
            let o = &mut out[c..c + m];
            let pc = &p[c..c + m];
            let po = &p[other..other + m];
            let (stay, flip) = (&self.stay[c..c + m], &self.flip[other..other + m]);
            let (up, down) = (&self.up[c..c + m], &self.down[c..c + m]);
            for k in 0..m {
                o[k] = pc[k] * stay[k] + po[k] * flip[k];
            }
            for k in 1..m {
                o[k] += pc[k - 1] * up[k - 1];
                o[k - 1] += pc[k] * down[k];
            }
        }
    }
}

pub fn reduced_evolve(gen: &ReducedGenerator, initial: &ProbabilityVector, t: f64) -> Result<ProbabilityVector> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    if initial.len() != gen.n_states() {
        return Err(Error::LengthMismatch { left: initial.len(), right: gen.n_states() });
    }
    Ok(ProbabilityVector::from_raw(uniformize::evolve(gen, initial.as_slice(), t)))
}

/// Stationary law by Grassmann-Taksar-Heyman state reduction. In the
/// interleaved order `2k + c` every transition moves at most two places,
/// so the reduction stays inside a band of half-width 2 and costs `O(n)`.
pub fn reduced_stationary(gen: &ReducedGenerator) -> ProbabilityVector {
    const B: usize = 2;
    const W: usize = 2 * B + 1;
    let n = gen.n;
    let size = gen.n_states();
    let natural = |j: usize| (j % 2) * (n + 1) + j / 2;
    // band[i][j - i + B] holds the rate from interleaved state i to j.
    let mut band = vec![[0.0f64; W]; size];
    for i in 0..size {
        for j in i.saturating_sub(B)..(i + B + 1).min(size) {
            if i != j {
                band[i][j + B - i] = gen.entry(natural(i), natural(j));
            }
        }
    }
    for m in (1..size).rev() {
        let lo = m.saturating_sub(B);
        let s: f64 = (lo..m).map(|j| band[m][j + B - m]).sum();
        for i in lo..m {
            band[i][m + B - i] /= s;
        }
        for i in lo..m {
            let a = band[i][m + B - i];
            if a == 0.0 {
                continue;
            }
            for j in lo..m {
                if i != j {
                    band[i][j + B - i] += a * band[m][j + B - m];
                }
            }
        }
    }
    let mut pi = vec![0.0; size];
    pi[0] = 1.0;
    for j in 1..size {
        pi[j] = (j.saturating_sub(B)..j).map(|i| pi[i] * band[i][j + B - i]).sum();
        if pi[j] > 1e200 {
            pi[..=j].iter_mut().for_each(|x| *x *= 1e-200);
        }
    }
    let total: f64 = pi.iter().sum();
    let mut out = vec![0.0; size];
    for (j, p) in pi.into_iter().enumerate() {
        out[natural(j)] = p / total;
    }
    ProbabilityVector::from_raw(out)
}

/// `|| P^t((1,n), .) - pi ||` for the reduced chain, equal to the TV of the
/// full star system from all-ones.
pub fn tv_from_all_ones(n: usize, t: f64) -> Result<f64> {
    Ok(tv_curve(n, &[t])?[0])
}

/// [`tv_from_all_ones`] on a grid of times (any order), evolving once.
pub fn tv_curve(n: usize, times: &[f64]) -> Result<Vec<f64>> {
    let gen = reduced_generator(n)?;
    if let Some(&bad) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {bad}")));
    }
    let pi = reduced_stationary(&gen);
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut p = gen.all_ones().into_vec();
    let mut now = 0.0;
    let mut out = vec![0.0; times.len()];
    for i in order {
        p = uniformize::evolve(&gen, &p, times[i] - now);
        now = times[i];
        out[i] = tv_slices(&p, pi.as_slice());
    }
    Ok(out)
}

/// First time the TV from all-ones drops to `eps`, to within
/// [`TMIX_TOL`]. The bracket grows geometrically from `[0, 1]`; bisection
/// restarts from the stored law at the lower end.
pub fn t_mix_from_ones(n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1), got {eps}")));
    }
    let gen = reduced_generator(n)?;
    let pi = reduced_stationary(&gen);
    let tv = |p: &[f64]| tv_slices(p, pi.as_slice());
    let mut lo_law = gen.all_ones().into_vec();
    if tv(&lo_law) <= eps {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        let trial = uniformize::evolve(&gen, &lo_law, hi - lo);
        if tv(&trial) <= eps {
            break;
        }
        lo = hi;
        lo_law = trial;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidArgument("mixing time bracket diverged".into()));
        }
    }
    while hi - lo > TMIX_TOL {
        let mid = 0.5 * (lo + hi);
        let trial = uniformize::evolve(&gen, &lo_law, mid - lo);
        if tv(&trial) <= eps {
            hi = mid;
        } else {
            lo = mid;
            lo_law = trial;
        }
    }
    Ok(hi)
}

/// Reduced index of a star configuration (center at site 0).
pub fn project(eta: &SpinConfiguration) -> usize {
    let n = eta.len() - 1;
    let k = eta.count_ones() - usize::from(eta.get(0));
    usize::from(eta.get(0)) * (n + 1) + k
}

/// Image of a law on `{0,1}^{n+1}` (state index encoding) under [`project`].
pub fn project_distribution(full: &ProbabilityVector, n: usize) -> Result<ProbabilityVector> {
    if full.len() != 1 << (n + 1) {
        return Err(Error::LengthMismatch { left: full.len(), right: 1 << (n + 1) });
    }
    let mut out = vec![0.0; 2 * (n + 1)];
    for (s, &p) in full.as_slice().iter().enumerate() {
        let c = s & 1;
        let k = (s >> 1).count_ones() as usize;
        out[c * (n + 1) + k] += p;
    }
    Ok(ProbabilityVector::from_raw(out))
}

/// CSV `n,t,tv`.
pub fn curve_table(n: usize, times: &[f64], tvs: &[f64]) -> Table {
    let mut table = Table::new(&["n", "t", "tv"]);
    for (t, v) in times.iter().zip(tvs) {
        table.push(vec![n.to_string(), fmt_f64(*t), fmt_f64(*v)]);
    }
    table
}
