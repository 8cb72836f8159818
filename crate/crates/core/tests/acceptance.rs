//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every criterion reports
//! PASS or FAIL even when an earlier one fails. Numeric arguments select
//! criteria: `cargo test --test acceptance -- 3 6`.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use votermix::analysis::{
    all_ones_phi_estimate, phi_statistic, star_bound_time, star_half_phi_estimate, star_halves, star_lower_bound,
    wilson_formula, TvEstimate,
};
use votermix::channels::channel_grid_check;
use votermix::csv::{fmt_f64, Table};
use votermix::dual::{dual_sample_config, sample_dual};
use votermix::exact::{dgm_limit, hypercube_tv_exact, stationary_of, tv};
use votermix::graphical::{forward_run, gillespie_run, sample_events};
use votermix::ising::equivalence_grid;
use votermix::rng::{derive_seed, replica_seed, rng_from};
use votermix::star::{project_distribution, reduced_evolve, reduced_generator, tv_curve};
use votermix::stationary::stationary_distribution;
use votermix::{ConfigGenerator, ProbabilityVector, RateKernel, SpinConfiguration};

const SEED: u64 = 20_140_509;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn exact_law(gen: &ConfigGenerator, start: usize, t: f64) -> ProbabilityVector {
    gen.evolve(&ProbabilityVector::point_mass(gen.n_states(), start), t).unwrap()
}

fn random_kernel(n: usize, which: u64) -> RateKernel {
    RateKernel::random_irreducible(n, 0.6, &mut rng_from(SEED, &[0xACCE, n as u64, which])).unwrap()
}

// 1. E_eta[Phi(eta_t)] = e^{-t} Phi(eta), exactly.
fn eigen_decay() -> Outcome {
    let kernels = [
        ("cycle 5", RateKernel::cycle(5).unwrap()),
        ("star 4", RateKernel::star(4).unwrap()),
        ("random 5", random_kernel(5, 1)),
    ];
    let mut worst: f64 = 0.0;
    for (_, k) in &kernels {
        let pi = stationary_distribution(k).unwrap().pi;
        let gen = ConfigGenerator::new(k).unwrap();
        let n = k.n_sites();
        let phi: Vec<f64> = (0..1u64 << n)
            .map(|s| phi_statistic(&pi, &SpinConfiguration::from_index(s, n)).unwrap())
            .collect();
        for start in 0..gen.n_states() {
            for t in [0.1, 0.5, 1.0, 2.0] {
                let law = exact_law(&gen, start, t);
                let mean: f64 = law.as_slice().iter().zip(&phi).map(|(p, f)| p * f).sum();
                worst = worst.max((mean - (-t as f64).exp() * phi[start]).abs());
            }
        }
    }
    outcome(worst <= 1e-8, format!("max |E Phi(eta_t) - e^-t Phi(eta)| = {worst:.3e} (tol 1e-8)"))
}

/// The fixed three-site kernel with mixed rates.
fn mixed_kernel() -> RateKernel {
    RateKernel::from_rates(3, [(0, 1, 0.7), (1, 0, 1.9), (1, 2, 0.4), (2, 0, 2.5), (0, 2, 0.15)]).unwrap()
}

fn simulator_tvs(seed: u64, n_samples: usize) -> Table {
    let k = mixed_kernel();
    let t = 1.0;
    let start = SpinConfiguration::from_index(0b101, 3);
    let exact = exact_law(&ConfigGenerator::new(&k).unwrap(), 0b101, t);
    let mut table = Table::new(&["method", "tv", "n_samples"]);
    type Draw<'a> = Box<dyn Fn(u64) -> SpinConfiguration + Sync + 'a>;
    let methods: [(&str, Draw); 3] = [
        ("forward", Box::new(|s| forward_run(&sample_events(&k, t, s), &start))),
        ("gillespie", Box::new(|s| gillespie_run(&k, &start, t, s))),
        ("dual", Box::new(|s| dual_sample_config(&sample_dual(&k, t, s), &start))),
    ];
    for (m, (name, draw)) in methods.iter().enumerate() {
        let indices: Vec<usize> = (0..n_samples as u64)
            .into_par_iter()
            .map(|i| draw(replica_seed(derive_seed(seed, &[m as u64]), i)).index() as usize)
            .collect();
        let emp = ProbabilityVector::empirical(8, indices);
        table.push(vec![name.to_string(), fmt_f64(tv(&emp, &exact).unwrap()), n_samples.to_string()]);
    }
    table
}

// 2. Forward, Gillespie and dual laws agree with the exact law.
fn simulator_agreement() -> Outcome {
    let table = simulator_tvs(SEED, 200_000);
    let mut detail = String::new();
    let mut pass = true;
    for row in table.rows() {
        let d: f64 = row[1].parse().unwrap();
        pass &= d <= 0.01;
        let _ = write!(detail, "{} tv {:.4}; ", row[0], d);
    }
    outcome(pass, format!("{detail}tol 0.01 at N = 2e5"))
}

// 3. Exact pairwise TV never exceeds the hypercube comparison.
fn hypercube_comparison() -> Outcome {
    let mut battery = vec![
        RateKernel::cycle(3).unwrap(),
        RateKernel::cycle(4).unwrap(),
        RateKernel::star(2).unwrap(),
        RateKernel::star(3).unwrap(),
        RateKernel::complete(2).unwrap(),
        RateKernel::complete(3).unwrap(),
        RateKernel::complete(4).unwrap(),
        mixed_kernel(),
        RateKernel::cycle(4).unwrap().scaled(25.0).unwrap(),
    ];
    for which in 0..4 {
        battery.push(random_kernel(2 + which as usize % 3, 10 + which));
        battery.push(random_kernel(4, 20 + which));
    }
    let times = [0.1, 0.25, 0.5, 1.0, 2.0, 4.0];
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    for k in &battery {
        let gen = ConfigGenerator::new(k).unwrap();
        let n = k.n_sites();
        for &t in &times {
            let laws: Vec<ProbabilityVector> = (0..gen.n_states()).map(|s| exact_law(&gen, s, t)).collect();
            let bound = hypercube_tv_exact(n, t);
            for a in 0..laws.len() {
                for b in 0..laws.len() {
                    worst = worst.max(tv(&laws[a], &laws[b]).unwrap() - bound);
                    pairs += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("{} kernels, {pairs} (pair, t) cases; max excess over hypercube {worst:.3e} (tol 1e-10)", battery.len()),
    )
}

fn estimate_table(est: &TvEstimate) -> Table {
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["estimate".into(), fmt_f64(est.estimate)]);
    table.push(vec!["stderr".into(), fmt_f64(est.stderr)]);
    table.push(vec!["n_samples".into(), est.n_samples.to_string()]);
    table.push(vec!["n_bins".into(), est.n_bins.to_string()]);
    table
}

fn wilson_run(seed: u64) -> TvEstimate {
    let k = RateKernel::cycle(256).unwrap();
    let t = 0.5 * 256f64.ln() - 2.0;
    all_ones_phi_estimate(&k, t, 100_000, seed).unwrap()
}

// 4. The lower bound formula on the 256-cycle and its Monte Carlo realization.
fn wilson_realized() -> Outcome {
    let formula = wilson_formula(1.0, 1.0, 2.0);
    let est = wilson_run(SEED);
    let pass = (formula - 0.374).abs() < 5e-4 && est.estimate >= 0.33;
    outcome(
        pass,
        format!(
            "formula {formula:.6} (expect ~0.374); MC estimate {:.4} +- {:.4} (need >= 0.33)",
            est.estimate, est.stderr
        ),
    )
}

// 5. Upper side of the window against the DGM limit.
fn dgm_window() -> Outcome {
    let n = 10_000usize;
    let mut pass = true;
    let mut detail = String::new();
    for alpha in [0.0, 1.0, 2.0, 4.0] {
        let exact = hypercube_tv_exact(n, 0.5 * (n as f64).ln() + alpha);
        let limit = dgm_limit(alpha);
        let gap = (exact - limit).abs();
        pass &= gap <= 0.02;
        let _ = write!(detail, "a={alpha}: exact {exact:.4} vs {limit:.4} (gap {gap:.4}); ");
    }
    outcome(pass, format!("{detail}tol 0.02"))
}

// 6. The two-leaf channel is exact on the label grid.
fn channel_exactness() -> Outcome {
    let report = channel_grid_check(5).unwrap();
    let max = report.max_discrepancy();
    let alphas = report.alphas_in_unit_interval();
    outcome(
        max <= 1e-12 && alphas && report.rows.len() == 125,
        format!("{} triples; max discrepancy {max:.3e}; alpha in [0,1]: {alphas}", report.rows.len()),
    )
}

fn star_mc(seed: u64) -> TvEstimate {
    star_half_phi_estimate(10_000, 4.0, 10_000, seed).unwrap()
}

// 7. The star: fast from all-ones, slow from half the leaves.
fn star_anomaly() -> Outcome {
    let mut detail = String::new();
    // (a)
    let mut pass_a = true;
    for n in [100, 1000, 10_000] {
        let d = tv_curve(n, &[10.0]).unwrap()[0];
        pass_a &= d <= 0.25;
        let _ = write!(detail, "(a) n={n} tv(10)={d:.2e}; ");
    }
    // (b)
    let times = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut lift: f64 = 0.0;
    for n in 2..=8 {
        let full = ConfigGenerator::new(&RateKernel::star(n).unwrap()).unwrap();
        let reduced = reduced_generator(n).unwrap();
        for &t in &times {
            let f = project_distribution(&exact_law(&full, full.n_states() - 1, t), n).unwrap();
            let r = reduced_evolve(&reduced, &reduced.all_ones(), t).unwrap();
            for (x, y) in f.as_slice().iter().zip(r.as_slice()) {
                lift = lift.max((x - y).abs());
            }
        }
    }
    let pass_b = lift <= 1e-9;
    let _ = write!(detail, "(b) lift gap {lift:.2e}; ");
    // (c)
    let n = 6;
    let full = ConfigGenerator::new(&RateKernel::star(n).unwrap()).unwrap();
    let pi = stationary_of(&full);
    let (a, _) = star_halves(n);
    let half: usize = a.iter().map(|&x| 1 << x).sum();
    let mut slack = f64::INFINITY;
    for c in [-4.0, -2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 1.75] {
        let t = star_bound_time(n, c).unwrap();
        for center in [0, 1] {
            let d = tv(&exact_law(&full, half | center, t), &pi).unwrap();
            slack = slack.min(d - (star_lower_bound(c) - 1e-9));
        }
    }
    let pass_c = slack >= 0.0;
    let _ = write!(detail, "(c) min slack {slack:.4}; ");
    // (d)
    let est = star_mc(SEED);
    let pass_d = est.estimate >= 0.48;
    let _ = write!(
        detail,
        "(d) MC {:.4} +- {:.4} vs formula {:.4} (need >= 0.48)",
        est.estimate,
        est.stderr,
        star_lower_bound(4.0)
    );
    outcome(pass_a && pass_b && pass_c && pass_d, detail)
}

// 8. Ising heat bath equals the time-changed voter generator.
fn ising_equivalence() -> Outcome {
    let ns: Vec<usize> = (3..=10).collect();
    let rows = equivalence_grid(&ns, &[0.0, 0.25, 0.5, 1.0, 2.0]).unwrap();
    let max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    outcome(max <= 1e-12, format!("{} grid points; max discrepancy {max:.3e} (tol 1e-12)", rows.len()))
}

fn cli_csv(args: &[&str]) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let mut argv = vec!["votermix", "--out", path.to_str().unwrap()];
    argv.extend_from_slice(args);
    assert_eq!(votermix::cli::run(argv), 0, "votermix {args:?}");
    std::fs::read(&path).unwrap()
}

// 9. Same seed, same bytes.
fn reproducibility() -> Outcome {
    let mut runs: Vec<(&str, Box<dyn Fn() -> Vec<u8>>)> = vec![
        ("simulators", Box::new(|| simulator_tvs(SEED, 200_000).to_csv_string().into_bytes())),
        ("wilson", Box::new(|| estimate_table(&wilson_run(SEED)).to_csv_string().into_bytes())),
        ("star", Box::new(|| estimate_table(&star_mc(SEED)).to_csv_string().into_bytes())),
    ];
    for (name, args) in [
        ("cli simulate", &["--seed", "7", "simulate", "--cycle", "12", "--t", "0.8", "--samples", "5000"][..]),
        ("cli gillespie", &["--seed", "7", "simulate", "--star", "6", "--method", "gillespie", "--samples", "3000"]),
        ("cli stationary", &["--seed", "7", "simulate", "--complete", "9", "--method", "stationary", "--samples", "3000"]),
        ("cli dual-check", &["--seed", "3", "dual-check", "--cycle", "5", "--samples", "20000"]),
        ("cli cutoff-profile", &["--seed", "5", "cutoff-profile", "--sizes", "16,32", "--samples", "2000"]),
    ] {
        runs.push((name, Box::new(move || cli_csv(args))));
    }
    let mut differing = Vec::new();
    for (name, run) in &runs {
        if run() != run() {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} seeded runs repeated byte-identically", runs.len())
        } else {
            format!("differing runs: {}", differing.join(", "))
        },
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    type Criterion = (u32, fn() -> Outcome, Duration);
    let criteria: [Criterion; 9] = [
        (1, eigen_decay, Duration::from_secs(10)),
        (2, simulator_agreement, Duration::from_secs(60)),
        (3, hypercube_comparison, Duration::from_secs(30)),
        (4, wilson_realized, Duration::from_secs(120)),
        (5, dgm_window, Duration::from_secs(5)),
        (6, channel_exactness, Duration::from_secs(5)),
        (7, star_anomaly, Duration::from_secs(300)),
        (8, ising_equivalence, Duration::from_secs(30)),
        (9, reproducibility, Duration::from_secs(600)),
    ];
    let mut failed = Vec::new();
    for (id, check, budget) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        println!(
            "criterion {id}: {} | {} | {:.1}s (budget {}s{})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} failed: {:?}", failed.len(), failed);
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
