//! Stationary laws of the site chain `(S, q)` and the ratio `rho`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::RateKernel;

/// Largest kernel solved by dense LU; bigger ones use power iteration.
pub const DENSE_LIMIT: usize = 512;
const RESIDUAL_TOL: f64 = 1e-10;
const POWER_MAX_SWEEPS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryInfo {
    pub pi: Vec<f64>,
    pub pi_max: f64,
    pub pi_min: f64,
    /// `pi_max / pi_min`; infinite when `pi` has a zero entry.
    pub rho: f64,
}

impl StationaryInfo {
    fn from_pi(pi: Vec<f64>) -> Self {
        let pi_max = pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pi_min = pi.iter().copied().fold(f64::INFINITY, f64::min);
        let rho = if pi_min > 0.0 { pi_max / pi_min } else { f64::INFINITY };
        Self { pi, pi_max, pi_min, rho }
    }
}

/// `max_y |(pi Q)(y)|` for the site generator `Q(x,y) = q(x,y)`,
/// `Q(x,x) = -q(x)`.
pub fn residual(kernel: &RateKernel, pi: &[f64]) -> f64 {
    let mut flow = vec![0.0; kernel.n_sites()];
    for (x, y, r) in kernel.entries() {
        flow[y] += pi[x] * r;
        flow[x] -= pi[x] * r;
    }
    flow.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Unique stationary law of an irreducible kernel.
pub fn stationary_distribution(kernel: &RateKernel) -> Result<StationaryInfo> {
    if !kernel.is_irreducible() {
        return Err(Error::UnsupportedReducible);
    }
    let n = kernel.n_sites();
    if n == 1 {
        return Ok(StationaryInfo::from_pi(vec![1.0]));
    }
    let pi = if n <= DENSE_LIMIT {
        dense_solve(kernel)
    } else {
        match power_iteration(kernel) {
            Some(pi) => pi,
            None => {
                log::warn!("power iteration did not converge on {n} sites; using dense LU");
                dense_solve(kernel)
            }
        }
    };
    Ok(StationaryInfo::from_pi(pi))
}

/// Accept a caller-supplied stationary law (the only route for reducible
/// kernels) after checking it.
pub fn stationary_from_supplied(kernel: &RateKernel, pi: Vec<f64>) -> Result<StationaryInfo> {
    if pi.len() != kernel.n_sites() {
        return Err(Error::LengthMismatch { left: pi.len(), right: kernel.n_sites() });
    }
    if pi.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidArgument("distribution has negative entries".into()));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("distribution sums to {total}")));
    }
    let r = residual(kernel, &pi);
    if r > RESIDUAL_TOL {
        return Err(Error::NotStationary(r));
    }
    Ok(StationaryInfo::from_pi(pi))
}

fn normalize(mut pi: Vec<f64>) -> Vec<f64> {
    for p in pi.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    pi
}

fn dense_solve(kernel: &RateKernel) -> Vec<f64> {
    let n = kernel.n_sites();
    // Rows 0..n-1 of Q^T pi = 0, last row replaced by sum(pi) = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (x, y, r) in kernel.entries() {
        a[(y, x)] += r;
        a[(x, x)] -= r;
    }
    for x in 0..n {
        a[(n - 1, x)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let sol = a.lu().solve(&b).expect("irreducible generator gives a nonsingular system");
    normalize(sol.iter().copied().collect())
}

fn power_iteration(kernel: &RateKernel) -> Option<Vec<f64>> {
    let n = kernel.n_sites();
    // Lazy uniformized chain I + Q / (2 q_max).
    let lambda = 2.0 * kernel.q_max();
    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for sweep in 0..POWER_MAX_SWEEPS {
        next.copy_from_slice(&p);
        for (x, y, r) in kernel.entries() {
            let m = p[x] * r / lambda;
            next[y] += m;
            next[x] -= m;
        }
        std::mem::swap(&mut p, &mut next);
        if sweep % 32 == 0 && residual(kernel, &p) <= 1e-3 * RESIDUAL_TOL {
            return Some(normalize(p));
        }
    }
    None
}
