//! The graphical (Harris) construction of the noisy voter process.
//!
//! Each site `x` carries two independent Poisson streams: voting times of
//! rate `q(x)`, each with a target `W ~ q(x, ·)/q(x)`, and rerandomization
//! times of rate 1, each with a fair bit `Z`. At a voting time `η(x)` copies
//! `η(W)`; at a rerandomization `η(x)` becomes `Z`.
//!
//! Streams are keyed by `(seed, site, kind)` and are generated backward
//! from the horizon: the k-th event of a stream sits at backward time
//! `u_k` (forward time `t - u_k`). The lazy dual sampler
//! [`sample_config_at`] draws exactly the same numbers, so for a given
//! seed it returns the same configuration as
//! `forward_run(&sample_events(..), ..)`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use smallvec::SmallVec;

use crate::config::SpinConfiguration;
use crate::csv::{fmt_f64, Table};
use crate::error::Result;
use crate::kernel::RateKernel;
use crate::rng::{stream_rng, StreamKind, StreamRng};
use crate::sumtree::SumTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VotingEvent {
    pub time: f64,
    pub target: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rerandomization {
    pub time: f64,
    pub bit: bool,
}

/// One realization of every Poisson stream on `(0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphicalEvents {
    horizon: f64,
    seed: u64,
    voting: Vec<Vec<VotingEvent>>,
    rerandomizations: Vec<Vec<Rerandomization>>,
}

#[inline]
fn gap<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

fn voting_stream(kernel: &RateKernel, x: usize, t: f64, seed: u64) -> Vec<VotingEvent> {
    let rate = kernel.exit_rate(x);
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut rng = stream_rng(seed, x, StreamKind::Voting);
    let mut u = 0.0;
    loop {
        u += gap(&mut rng, rate);
        if u >= t {
            break;
        }
        let target = kernel.sample_target(x, &mut rng);
        out.push(VotingEvent { time: t - u, target });
    }
    out.reverse();
    out
}

fn rerandomization_stream(x: usize, t: f64, seed: u64) -> Vec<Rerandomization> {
    let mut rng = stream_rng(seed, x, StreamKind::Rerandomization);
    let mut out = Vec::new();
    let mut u = 0.0;
    loop {
        u += gap(&mut rng, 1.0);
        if u >= t {
            break;
        }
        out.push(Rerandomization { time: t - u, bit: rng.random() });
    }
    out.reverse();
    out
}

/// Draw the graphical events of `kernel` on `(0, t]`.
pub fn sample_events(kernel: &RateKernel, t: f64, seed: u64) -> GraphicalEvents {
    assert!(t >= 0.0, "negative horizon {t}");
    let n = kernel.n_sites();
    let mut ev = GraphicalEvents {
        horizon: t,
        seed,
        voting: (0..n).map(|x| voting_stream(kernel, x, t, seed)).collect(),
        rerandomizations: (0..n).map(|x| rerandomization_stream(x, t, seed)).collect(),
    };
    ev.break_ties();
    ev
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Vote,
    Rerandomize,
}

impl GraphicalEvents {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_sites(&self) -> usize {
        self.voting.len()
    }

    /// Voting events at `x`, increasing in time.
    pub fn voting(&self, x: usize) -> &[VotingEvent] {
        &self.voting[x]
    }

    /// Rerandomization events at `x`, increasing in time.
    pub fn rerandomizations(&self, x: usize) -> &[Rerandomization] {
        &self.rerandomizations[x]
    }

    pub fn total_voting_events(&self) -> usize {
        self.voting.iter().map(Vec::len).sum()
    }

    /// Same voting events, fresh rerandomization streams drawn under `seed`.
    /// Sampling these for many seeds gives the law of the process
    /// conditioned on the voting arrows (and hence on the dual paths).
    pub fn with_resampled_rerandomizations(&self, seed: u64) -> Self {
        let mut ev = Self {
            horizon: self.horizon,
            seed: self.seed,
            voting: self.voting.clone(),
            rerandomizations: (0..self.n_sites())
                .map(|x| rerandomization_stream(x, self.horizon, seed))
                .collect(),
        };
        ev.break_ties();
        ev
    }

    fn all_events(&self) -> Vec<(f64, usize, Kind, usize)> {
        let mut all = Vec::with_capacity(
            self.total_voting_events() + self.rerandomizations.iter().map(Vec::len).sum::<usize>(),
        );
        for x in 0..self.n_sites() {
            all.extend(self.voting[x].iter().enumerate().map(|(i, e)| (e.time, x, Kind::Vote, i)));
            all.extend(
                self.rerandomizations[x]
                    .iter()
                    .enumerate()
                    .map(|(i, e)| (e.time, x, Kind::Rerandomize, i)),
            );
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
        all
    }

    /// Re-draw the later of any two events sharing a timestamp.
    fn break_ties(&mut self) {
        loop {
            let all = self.all_events();
            let Some(w) = all.windows(2).find(|w| w[0].0 == w[1].0) else {
                return;
            };
            let (_, x, kind, i) = w[1];
            let mut rng = stream_rng(self.seed ^ (i as u64).rotate_left(17), x, StreamKind::Tie);
            let t = self.horizon * rng.random::<f64>();
            match kind {
                Kind::Vote => {
                    self.voting[x][i].time = t;
                    self.voting[x].sort_by(|a, b| a.time.total_cmp(&b.time));
                }
                Kind::Rerandomize => {
                    self.rerandomizations[x][i].time = t;
                    self.rerandomizations[x].sort_by(|a, b| a.time.total_cmp(&b.time));
                }
            }
        }
    }

    /// CSV `site,kind,time,aux`; `aux` is the voting target or the bit.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["site", "kind", "time", "aux"]);
        for (t, x, kind, i) in self.all_events() {
            let (name, aux) = match kind {
                Kind::Vote => ("vote", self.voting[x][i].target),
                Kind::Rerandomize => ("rerandomize", self.rerandomizations[x][i].bit as usize),
            };
            table.push(vec![x.to_string(), name.into(), fmt_f64(t), aux.to_string()]);
        }
        table
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        Ok(self.to_table().write_to(w)?)
    }
}

/// Run the graphical construction forward from `eta0` to the horizon.
pub fn forward_run(events: &GraphicalEvents, eta0: &SpinConfiguration) -> SpinConfiguration {
    assert_eq!(eta0.len(), events.n_sites());
    let mut eta = eta0.clone();
    for (_, x, kind, i) in events.all_events() {
        match kind {
            Kind::Vote => {
                let v = eta.get(events.voting[x][i].target);
                eta.set(x, v);
            }
            Kind::Rerandomize => eta.set(x, events.rerandomizations[x][i].bit),
        }
    }
    eta
}

/// Simulate the flip rates directly with competing exponential clocks.
pub fn gillespie_run(kernel: &RateKernel, eta0: &SpinConfiguration, t: f64, seed: u64) -> SpinConfiguration {
    assert!(t >= 0.0, "negative time {t}");
    let n = kernel.n_sites();
    assert_eq!(eta0.len(), n);
    let mut eta = eta0.clone();
    // disagree[x] = sum_y q(x,y) 1{eta(y) != eta(x)}
    let mut disagree: Vec<f64> = (0..n)
        .map(|x| {
            kernel
                .out_rates(x)
                .filter(|&(y, _)| eta.get(y) != eta.get(x))
                .map(|(_, r)| r)
                .sum()
        })
        .collect();
    let rates: Vec<f64> = disagree.iter().map(|d| 0.5 + d).collect();
    let mut tree = SumTree::new(&rates);
    let mut rng = stream_rng(seed, 0, StreamKind::Gillespie);
    let mut now = 0.0;
    loop {
        now += gap(&mut rng, tree.total());
        if now > t {
            return eta;
        }
        let x = tree.find(rng.random::<f64>() * tree.total()).min(n - 1);
        eta.flip(x);
        disagree[x] = (kernel.exit_rate(x) - disagree[x]).max(0.0);
        tree.set(x, 0.5 + disagree[x]);
        let vx = eta.get(x);
        for &z in kernel.in_neighbors(x) {
            let r = kernel.rate(z, x);
            if eta.get(z) != vx {
                disagree[z] += r;
            } else {
                disagree[z] = (disagree[z] - r).max(0.0);
            }
            tree.set(z, 0.5 + disagree[z]);
        }
    }
}

/// Lazily generated backward stream: event k at backward time `u_k`.
struct BackwardStream<P> {
    rng: StreamRng,
    rate: f64,
    last: f64,
    events: SmallVec<[(f64, P); 4]>,
}

impl<P: Copy> BackwardStream<P> {
    fn new(rng: StreamRng, rate: f64) -> Self {
        Self { rng, rate, last: 0.0, events: SmallVec::new() }
    }

    /// Index of the first event with backward time strictly after `u`.
    fn next_after<F: FnMut(&mut StreamRng) -> P>(&mut self, u: f64, mut payload: F) -> Option<usize> {
        if self.rate <= 0.0 {
            return None;
        }
        while self.last <= u {
            self.last += gap(&mut self.rng, self.rate);
            let p = payload(&mut self.rng);
            self.events.push((self.last, p));
        }
        Some(self.events.partition_point(|e| e.0 <= u))
    }
}

struct SiteStreams {
    // (target, cached outcome of the lineage that jumps here)
    voting: BackwardStream<(u32, Option<bool>)>,
    rerandomization: BackwardStream<bool>,
}

/// Backward tracing of every lineage through lazily drawn events.
struct LazyDual<'a> {
    kernel: &'a RateKernel,
    seed: u64,
    sites: Vec<Option<SiteStreams>>,
}

impl<'a> LazyDual<'a> {
    fn new(kernel: &'a RateKernel, seed: u64) -> Self {
        let mut sites = Vec::with_capacity(kernel.n_sites());
        sites.resize_with(kernel.n_sites(), || None);
        Self { kernel, seed, sites }
    }

    fn streams(&mut self, x: usize) -> &mut SiteStreams {
        let (kernel, seed) = (self.kernel, self.seed);
        self.sites[x].get_or_insert_with(|| SiteStreams {
            voting: BackwardStream::new(stream_rng(seed, x, StreamKind::Voting), kernel.exit_rate(x)),
            rerandomization: BackwardStream::new(stream_rng(seed, x, StreamKind::Rerandomization), 1.0),
        })
    }

    /// Value at backward time 0 of the lineage started at `x`. Lineages
    /// that reach backward time `floor` without a rerandomization read
    /// `fallback` at their position.
    fn trace(&mut self, x: usize, floor: f64, fallback: Option<&SpinConfiguration>) -> bool {
        let kernel = self.kernel;
        let mut site = x;
        let mut u = 0.0;
        let mut jumps: SmallVec<[(usize, usize); 16]> = SmallVec::new();
        let value = loop {
            let s = self.streams(site);
            let vi = s
                .voting
                .next_after(u, |rng| (kernel.sample_target(site, rng) as u32, None));
            let ri = s.rerandomization.next_after(u, |rng| rng.random()).expect("rate 1");
            let (r_time, bit) = s.rerandomization.events[ri];
            let vote = vi.map(|i| (i, s.voting.events[i]));
            let vote_first = matches!(vote, Some((_, (vt, _))) if vt < r_time);
            let next_time = if vote_first { vote.unwrap().1 .0 } else { r_time };
            if next_time >= floor {
                break fallback.expect("finite floor needs a fallback").get(site);
            }
            if !vote_first {
                break bit;
            }
            let (i, (vt, (target, cached))) = vote.unwrap();
            if let Some(b) = cached {
                break b;
            }
            jumps.push((site, i));
            site = target as usize;
            u = vt;
        };
        for (s, i) in jumps {
            if let Some(st) = self.sites[s].as_mut() {
                st.voting.events[i].1 .1 = Some(value);
            }
        }
        value
    }
}

/// Exact sample of `eta_t` started from `eta0`, evaluated through the dual
/// lineages without materializing the whole graphical construction. Uses
/// the same streams as [`sample_events`] under the same seed.
pub fn sample_config_at(kernel: &RateKernel, eta0: &SpinConfiguration, t: f64, seed: u64) -> SpinConfiguration {
    assert!(t >= 0.0, "negative time {t}");
    assert_eq!(eta0.len(), kernel.n_sites());
    if t == 0.0 {
        return eta0.clone();
    }
    let mut dual = LazyDual::new(kernel, seed);
    let mut out = SpinConfiguration::zeros(kernel.n_sites());
    for x in 0..kernel.n_sites() {
        if dual.trace(x, t, Some(eta0)) {
            out.set(x, true);
        }
    }
    out
}

/// Exact sample from the stationary law `mu_inf`.
///
/// Lineages are traced backward from time 0 into the past until each one
/// meets a rerandomization mark; from then on the configuration at time 0
/// no longer depends on anything earlier. Event streams are extended on
/// demand, so every lineage sees one consistent realization on however long
/// a stretch of the past it needs.
pub fn perfect_stationary_sample(kernel: &RateKernel, seed: u64) -> SpinConfiguration {
    let mut dual = LazyDual::new(kernel, seed);
    let mut out = SpinConfiguration::zeros(kernel.n_sites());
    for x in 0..kernel.n_sites() {
        if dual.trace(x, f64::INFINITY, None) {
            out.set(x, true);
        }
    }
    out
}
