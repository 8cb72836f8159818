//! Voting mechanisms `(S, q)`: sparse continuous-time rate kernels on the
//! dense site set `0..n`.
//!
//! Text format accepted by [`RateKernel::parse`]:
//!
//! ```text
//! # comment
//! sites 3
//! rate 0 1 0.5
//! rate 1 2 2.0
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for the stored exit-rate bookkeeping.
const EXIT_RATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RateKernel {
    n_sites: usize,
    // CSR over outgoing rates, targets sorted within a row.
    offsets: Vec<usize>,
    targets: Vec<usize>,
    rates: Vec<f64>,
    // Running sums of `rates` within each row, for target sampling.
    cumulative: Vec<f64>,
    exit: Vec<f64>,
    q_max: f64,
    // CSR over incoming rates (sources only).
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
}

impl RateKernel {
    /// Build a kernel from `(from, to, rate)` triples. Zero rates are
    /// accepted and dropped.
    pub fn from_rates<I>(n_sites: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n_sites == 0 {
            return Err(Error::InvalidSize("a kernel needs at least one site".into()));
        }
        let mut map = BTreeMap::new();
        for (from, to, rate) in entries {
            for site in [from, to] {
                if site >= n_sites {
                    return Err(Error::SiteOutOfRange { site, n_sites });
                }
            }
            if from == to {
                return Err(Error::SelfRate(from));
            }
            if !rate.is_finite() || rate < 0.0 {
                return Err(Error::InvalidRate { from, to, rate });
            }
            if map.insert((from, to), rate).is_some() {
                return Err(Error::DuplicateRate(from, to));
            }
        }
        Ok(Self::assemble(n_sites, map))
    }

    fn assemble(n_sites: usize, map: BTreeMap<(usize, usize), f64>) -> Self {
        let mut offsets = vec![0; n_sites + 1];
        let mut targets = Vec::with_capacity(map.len());
        let mut rates = Vec::with_capacity(map.len());
        let mut in_degree = vec![0usize; n_sites];
        for (&(from, to), &rate) in map.iter().filter(|(_, &r)| r > 0.0) {
            offsets[from + 1] += 1;
            targets.push(to);
            rates.push(rate);
            in_degree[to] += 1;
        }
        for x in 0..n_sites {
            offsets[x + 1] += offsets[x];
        }
        let mut cumulative = Vec::with_capacity(rates.len());
        let mut exit = vec![0.0; n_sites];
        for x in 0..n_sites {
            let mut acc = 0.0;
            for &r in &rates[offsets[x]..offsets[x + 1]] {
                acc += r;
                cumulative.push(acc);
            }
            exit[x] = acc;
        }
        let q_max = exit.iter().copied().fold(0.0, f64::max);

        let mut in_offsets = vec![0; n_sites + 1];
        for x in 0..n_sites {
            in_offsets[x + 1] = in_offsets[x] + in_degree[x];
        }
        let mut fill = in_offsets.clone();
        let mut in_sources = vec![0; targets.len()];
        for x in 0..n_sites {
            for &y in &targets[offsets[x]..offsets[x + 1]] {
                in_sources[fill[y]] = x;
                fill[y] += 1;
            }
        }

        let k = Self {
            n_sites,
            offsets,
            targets,
            rates,
            cumulative,
            exit,
            q_max,
            in_offsets,
            in_sources,
        };
        debug_assert!(k.check_invariants());
        k
    }

    fn check_invariants(&self) -> bool {
        (0..self.n_sites).all(|x| {
            let s: f64 = self.out_rates(x).map(|(_, r)| r).sum();
            (s - self.exit[x]).abs() <= EXIT_RATE_TOL && self.exit[x] <= self.q_max
        })
    }

    /// Rate-1 random walk on the cycle `Z/nZ`: `q(x, x±1) = 1/2`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidSize(format!("cycle needs n >= 3, got {n}")));
        }
        Self::from_rates(
            n,
            (0..n).flat_map(|x| [(x, (x + 1) % n, 0.5), (x, (x + n - 1) % n, 0.5)]),
        )
    }

    /// Rate-1 random walk on the `n`-star. The center is site 0 and the
    /// leaves are sites `1..=n`.
    pub fn star(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("star needs n >= 2 leaves, got {n}")));
        }
        let leaf_rate = 1.0 / n as f64;
        Self::from_rates(
            n + 1,
            (1..=n).flat_map(|leaf| [(0, leaf, leaf_rate), (leaf, 0, 1.0)]),
        )
    }

    /// Rate-1 random walk on the complete graph `K_n`.
    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("complete graph needs n >= 2, got {n}")));
        }
        let r = 1.0 / (n - 1) as f64;
        Self::from_rates(
            n,
            (0..n).flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y, r))),
        )
    }

    /// Kernel with every rate multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(Error::InvalidArgument(format!("scale factor {factor}")));
        }
        Self::from_rates(self.n_sites, self.entries().map(|(x, y, r)| (x, y, r * factor)))
    }

    /// Relabel sites: old site `x` becomes `perm[x]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_sites {
            return Err(Error::LengthMismatch { left: perm.len(), right: self.n_sites });
        }
        let mut seen = vec![false; self.n_sites];
        for &p in perm {
            if p >= self.n_sites || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        Self::from_rates(self.n_sites, self.entries().map(|(x, y, r)| (perm[x], perm[y], r)))
    }

    /// Random kernel on `n` sites: a directed cycle (so the kernel is
    /// irreducible) plus extra edges with probability `density`, all rates
    /// uniform in `[0.1, 2]`.
    pub fn random_irreducible<R: Rng>(n: usize, density: f64, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("random kernel needs n >= 2, got {n}")));
        }
        let mut entries = Vec::new();
        for x in 0..n {
            for y in 0..n {
                if x == y {
                    continue;
                }
                if y == (x + 1) % n || rng.random::<f64>() < density {
                    entries.push((x, y, rng.random_range(0.1..2.0)));
                }
            }
        }
        Self::from_rates(n, entries)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n_sites: Option<usize> = None;
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "sites" => {
                    if n_sites.is_some() {
                        return Err(err("repeated `sites` line".into()));
                    }
                    if fields.len() != 2 {
                        return Err(err("expected `sites <n>`".into()));
                    }
                    let n: usize = fields[1]
                        .parse()
                        .map_err(|_| err(format!("bad site count `{}`", fields[1])))?;
                    if n == 0 {
                        return Err(err("site count must be positive".into()));
                    }
                    n_sites = Some(n);
                }
                "rate" => {
                    let n = n_sites.ok_or_else(|| err("`rate` before `sites`".into()))?;
                    if fields.len() != 4 {
                        return Err(err("expected `rate <x> <y> <value>`".into()));
                    }
                    let site = |s: &str| -> Result<usize> {
                        let v: usize = s.parse().map_err(|_| err(format!("bad site `{s}`")))?;
                        if v >= n {
                            return Err(err(format!("site {v} out of range for {n} sites")));
                        }
                        Ok(v)
                    };
                    let (x, y) = (site(fields[1])?, site(fields[2])?);
                    let rate: f64 = fields[3]
                        .parse()
                        .map_err(|_| err(format!("bad rate `{}`", fields[3])))?;
                    if x == y {
                        return Err(err(format!("self-rate ({x}, {x})")));
                    }
                    if !rate.is_finite() || rate < 0.0 {
                        return Err(err(format!("negative or non-finite rate {rate}")));
                    }
                    if map.insert((x, y), rate).is_some() {
                        return Err(err(format!("duplicate entry ({x}, {y})")));
                    }
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        let n = n_sites.ok_or(Error::Parse { line: 0, message: "missing `sites` line".into() })?;
        Ok(Self::assemble(n, map))
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Serialize in the text format read by [`RateKernel::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("sites {}\n", self.n_sites);
        for (x, y, r) in self.entries() {
            s.push_str(&format!("rate {x} {y} {r:?}\n"));
        }
        s
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    /// `q(x) = sum over y of q(x, y)`.
    #[inline]
    pub fn exit_rate(&self, x: usize) -> f64 {
        self.exit[x]
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        let row = &self.targets[self.offsets[x]..self.offsets[x + 1]];
        match row.binary_search(&y) {
            Ok(i) => self.rates[self.offsets[x] + i],
            Err(_) => 0.0,
        }
    }

    /// Positive rates out of `x`, targets in increasing order.
    pub fn out_rates(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.targets[r.clone()].iter().copied().zip(self.rates[r].iter().copied())
    }

    /// Sites `z` with `q(z, y) > 0`.
    pub fn in_neighbors(&self, y: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[y]..self.in_offsets[y + 1]]
    }

    /// All stored `(x, y, q(x, y))` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_sites).flat_map(move |x| self.out_rates(x).map(move |(y, r)| (x, y, r)))
    }

    pub fn n_entries(&self) -> usize {
        self.targets.len()
    }

    /// Draw `W` with `P(W = y) = q(x, y) / q(x)`. Requires `q(x) > 0`.
    pub fn sample_target<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let (lo, hi) = (self.offsets[x], self.offsets[x + 1]);
        debug_assert!(hi > lo, "site {x} has no outgoing rate");
        let u = rng.random::<f64>() * self.exit[x];
        let i = self.cumulative[lo..hi].partition_point(|&c| c <= u);
        self.targets[lo + i.min(hi - lo - 1)]
    }

    /// Strong connectivity of the positive-rate digraph.
    pub fn is_irreducible(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.n_sites];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                let next: Vec<usize> = if forward {
                    self.out_rates(x).map(|(y, _)| y).collect()
                } else {
                    self.in_neighbors(x).to_vec()
                };
                for y in next {
                    if !std::mem::replace(&mut seen[y], true) {
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}
