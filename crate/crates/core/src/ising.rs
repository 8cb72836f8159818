//! Heat-bath Ising dynamics on the cycle and its noisy voter time change.
//!
//! Spin `sigma(x)` flips at rate `1 / (1 + exp(2 beta sigma(x) (sigma(x-1) +
//! sigma(x+1))))`. This is the noisy voter model on the cycle with
//! `q(x, x +- 1) = (e^{4 beta} - 1)/4`, run at speed
//! `theta = 2 / (1 + e^{4 beta})`. Spins map to bits as `+1 <-> 1`,
//! `-1 <-> 0`, so both generators live on the same state indices.

use rayon::prelude::*;

use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::exact::ConfigGenerator;
use crate::kernel::RateKernel;

pub const MAX_ISING_SITES: usize = 14;
pub const MAX_EQUIVALENCE_SITES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsingCycleParams {
    pub n: usize,
    pub beta: f64,
}

impl IsingCycleParams {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidSize(format!("the cycle needs n >= 3, got {n}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self { n, beta })
    }

    /// `(e^{4 beta} - 1) / 4`.
    pub fn voter_rate(&self) -> f64 {
        0.25 * (4.0 * self.beta).exp_m1()
    }

    /// `2 / (1 + e^{4 beta})`.
    pub fn theta_scale(&self) -> f64 {
        2.0 / (1.0 + (4.0 * self.beta).exp())
    }
}

/// Single-spin flip rates of the heat-bath dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingGenerator {
    params: IsingCycleParams,
    /// `flip[state * n + x]`.
    flip: Vec<f64>,
}

fn spin(state: usize, x: usize) -> f64 {
    if state >> x & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn ising_generator(n: usize, beta: f64) -> Result<IsingGenerator> {
    let params = IsingCycleParams::new(n, beta)?;
    if n > MAX_ISING_SITES {
        return Err(Error::Capacity(format!("Ising generator supports at most {MAX_ISING_SITES} sites, got {n}")));
    }
    let mut flip = Vec::with_capacity(n << n);
    for state in 0..1usize << n {
        for x in 0..n {
            let field = spin(state, (x + n - 1) % n) + spin(state, (x + 1) % n);
            flip.push(1.0 / (1.0 + (2.0 * beta * spin(state, x) * field).exp()));
        }
    }
    Ok(IsingGenerator { params, flip })
}

impl IsingGenerator {
    pub fn params(&self) -> IsingCycleParams {
        self.params
    }

    pub fn n_states(&self) -> usize {
        1 << self.params.n
    }

    pub fn flip_rate(&self, state: usize, x: usize) -> f64 {
        self.flip[state * self.params.n + x]
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        let n = self.params.n;
        self.flip[state * n..(state + 1) * n].iter().sum()
    }

    /// Generator entry `G(from, to)`, diagonal included.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        let diff = from ^ to;
        if diff == 0 {
            -self.exit_rate(from)
        } else if diff.is_power_of_two() {
            self.flip_rate(from, diff.trailing_zeros() as usize)
        } else {
            0.0
        }
    }

    /// Max over states and sites of the detailed-balance defect
    /// `|pi(s) r(s -> s^x) - pi(s^x) r(s^x -> s)| / (pi(s) r(s -> s^x))`
    /// for `pi(s) ~ exp(beta sum_x s(x) s(x+1))`.
    pub fn detailed_balance_defect(&self) -> f64 {
        let n = self.params.n;
        let beta = self.params.beta;
        let energy = |s: usize| (0..n).map(|x| spin(s, x) * spin(s, (x + 1) % n)).sum::<f64>();
        let mut worst: f64 = 0.0;
        for s in 0..self.n_states() {
            for x in 0..n {
                let t = s ^ (1 << x);
                let lhs = self.flip_rate(s, x);
                let rhs = (beta * (energy(t) - energy(s))).exp() * self.flip_rate(t, x);
                worst = worst.max((lhs - rhs).abs() / lhs);
            }
        }
        worst
    }
}

/// The noisy voter kernel on the cycle with rate `(e^{4 beta} - 1)/4` each way.
pub fn voter_kernel(params: IsingCycleParams) -> Result<RateKernel> {
    let n = params.n;
    let r = params.voter_rate();
    RateKernel::from_rates(n, (0..n).flat_map(|x| [(x, (x + 1) % n, r), (x, (x + n - 1) % n, r)]))
}

/// `max |theta G_voter - G_ising|` over all generator entries. Both are
/// single-flip generators, so comparing every flip rate and every diagonal
/// covers all entries.
pub fn verify_equivalence(n: usize, beta: f64) -> Result<f64> {
    let params = IsingCycleParams::new(n, beta)?;
    if n > MAX_EQUIVALENCE_SITES {
        return Err(Error::Capacity(format!(
            "equivalence check supports at most {MAX_EQUIVALENCE_SITES} sites, got {n}"
        )));
    }
    let ising = ising_generator(n, beta)?;
    let voter = ConfigGenerator::new(&voter_kernel(params)?)?;
    let theta = params.theta_scale();
    let worst = (0..ising.n_states())
        .into_par_iter()
        .map(|s| {
            let mut w = (theta * voter.exit_rate(s) - ising.exit_rate(s)).abs();
            for x in 0..n {
                w = w.max((theta * voter.flip_rate(s, x) - ising.flip_rate(s, x)).abs());
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// [`verify_equivalence`] over a grid; rows ordered by `n`, then `beta`.
pub fn equivalence_grid(ns: &[usize], betas: &[f64]) -> Result<Vec<(usize, f64, f64)>> {
    let mut rows = Vec::with_capacity(ns.len() * betas.len());
    for &n in ns {
        for &beta in betas {
            rows.push((n, beta, verify_equivalence(n, beta)?));
        }
    }
    Ok(rows)
}

/// CSV `n,beta,discrepancy`.
pub fn equivalence_table(rows: &[(usize, f64, f64)]) -> Table {
    let mut table = Table::new(&["n", "beta", "discrepancy"]);
    for &(n, beta, d) in rows {
        table.push(vec![n.to_string(), fmt_f64(beta), fmt_f64(d)]);
    }
    table
}
