//! Transient laws of finite CTMCs by uniformization.
//!
//! With `Λ` at least the largest exit rate, `P = I + G/Λ` is stochastic and
//! `p exp(tG) = sum_k e^{-Λt} (Λt)^k / k! · p P^k`. Long horizons are cut
//! into chunks with `Λ·dt <= CHUNK_LAMBDA` so the leading weight `e^{-Λ dt}`
//! never underflows; each chunk's Poisson series is truncated once the
//! remaining weight drops below [`TAIL_MASS`].

/// Poisson tail left out of each chunk.
pub const TAIL_MASS: f64 = 1e-13;
const CHUNK_LAMBDA: f64 = 600.0;

/// A CTMC generator that can apply one uniformized step.
pub trait MarkovGenerator {
    fn n_states(&self) -> usize;

    /// `Λ`, no smaller than any exit rate.
    fn uniformization_rate(&self) -> f64;

    /// `out = p (I + G/Λ)`; `out` is fully overwritten.
    fn uniformized_step(&self, p: &[f64], out: &mut [f64]);

    /// `max_j |(p G)_j|`.
    fn residual(&self, p: &[f64]) -> f64 {
        let mut out = vec![0.0; p.len()];
        self.uniformized_step(p, &mut out);
        let lambda = self.uniformization_rate();
        out.iter()
            .zip(p)
            .fold(0.0, |m, (a, b)| m.max((lambda * (a - b)).abs()))
    }
}

/// `initial · exp(tG)`, renormalized to unit mass. `t` must be `>= 0`.
pub fn evolve<G: MarkovGenerator + ?Sized>(gen: &G, initial: &[f64], t: f64) -> Vec<f64> {
    assert!(t >= 0.0, "negative time {t}");
    assert_eq!(initial.len(), gen.n_states());
    let lambda = gen.uniformization_rate();
    let mut p = initial.to_vec();
    if t == 0.0 || lambda == 0.0 {
        return p;
    }
    let total = lambda * t;
    let chunks = (total / CHUNK_LAMBDA).ceil().max(1.0) as usize;
    let chunk = total / chunks as f64;
    let mut v = vec![0.0; p.len()];
    let mut w = vec![0.0; p.len()];
    let mut acc = vec![0.0; p.len()];
    for _ in 0..chunks {
        poisson_series(gen, &p, chunk, &mut v, &mut w, &mut acc);
        std::mem::swap(&mut p, &mut acc);
    }
    renormalize(&mut p);
    p
}

fn poisson_series<G: MarkovGenerator + ?Sized>(
    gen: &G,
    p: &[f64],
    lambda_t: f64,
    v: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
    acc: &mut [f64],
) {
    v.copy_from_slice(p);
    let mut weight = (-lambda_t).exp();
    let mut cumulative = weight;
    for (a, x) in acc.iter_mut().zip(v.iter()) {
        *a = weight * x;
    }
    // Hard stop well past the mean, in case rounding keeps `cumulative`
    // just under the threshold.
    let max_terms = (lambda_t + 40.0 * lambda_t.sqrt() + 60.0) as usize;
    let mut k = 0usize;
    while 1.0 - cumulative > TAIL_MASS && k < max_terms {
        gen.uniformized_step(v, scratch);
        std::mem::swap(v, scratch);
        k += 1;
        weight *= lambda_t / k as f64;
        cumulative += weight;
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += weight * x;
        }
    }
}

pub(crate) fn renormalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-state chain 0 -> 1 at rate a, 1 -> 0 at rate b.
    struct TwoState {
        a: f64,
        b: f64,
    }

    impl MarkovGenerator for TwoState {
        fn n_states(&self) -> usize {
            2
        }
        fn uniformization_rate(&self) -> f64 {
            self.a.max(self.b)
        }
        fn uniformized_step(&self, p: &[f64], out: &mut [f64]) {
            let l = self.uniformization_rate();
            out[0] = p[0] * (1.0 - self.a / l) + p[1] * self.b / l;
            out[1] = p[1] * (1.0 - self.b / l) + p[0] * self.a / l;
        }
    }

    #[test]
    fn matches_closed_form() {
        let g = TwoState { a: 2.0, b: 0.5 };
        for &t in &[0.0, 0.01, 0.3, 1.0, 7.0, 400.0] {
            let p = evolve(&g, &[1.0, 0.0], t);
            let s = g.a + g.b;
            let exact = g.b / s + g.a / s * (-s * t).exp();
            assert!((p[0] - exact).abs() < 1e-12, "t={t}: {} vs {exact}", p[0]);
        }
    }

    #[test]
    fn stiff_long_horizon() {
        // Λt = 1e5 spans hundreds of chunks.
        let g = TwoState { a: 1e4, b: 1e4 };
        let p = evolve(&g, &[1.0, 0.0], 10.0);
        assert!((p[0] - 0.5).abs() < 1e-10);
        assert!(g.residual(&p) < 1e-6);
    }
}
