//! The `votermix` command line.
//!
//! Every subcommand writes one CSV table (to `--out`, or to stdout) and a
//! one-line summary (to stdout when `--out` is given, else to stderr).
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors or a
//! failed check.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::analysis::{
    all_ones_phi_estimate, bounds_table, cutoff_profile, star_bound_time, star_lower_bound, wilson_formula,
    wilson_lower_bound, KernelFamily, WilsonBoundInput,
};
use crate::channels::channel_grid_check;
use crate::config::SpinConfiguration;
use crate::csv::{fmt_f64, Table};
use crate::dual::{dual_sample_config, sample_dual};
use crate::error::{Error, Result};
use crate::exact::{
    d_profile, d_profile_table, dgm_limit, evolve, hypercube_tv_exact, stationary_of, t_mix_exact,
    ConfigGenerator, ProbabilityVector, MAX_PROFILE_SITES,
};
use crate::graphical::{forward_run, gillespie_run, perfect_stationary_sample, sample_config_at, sample_events};
use crate::ising::{equivalence_grid, equivalence_table};
use crate::kernel::RateKernel;
use crate::rng::replica_seed;
use crate::star::{curve_table, t_mix_from_ones, tv_curve};

const CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "votermix", version, about = "Noisy voter models: exact laws, simulation and mixing bounds")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV table here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Exactly one kernel source.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct KernelArgs {
    /// Rate-1 walk on the cycle of N sites.
    #[arg(long, value_name = "N")]
    pub cycle: Option<usize>,
    /// Rate-1 walk on the star with N leaves (center is site 0).
    #[arg(long, value_name = "N")]
    pub star: Option<usize>,
    /// Rate-1 walk on the complete graph of N sites.
    #[arg(long, value_name = "N")]
    pub complete: Option<usize>,
    /// Kernel file: `sites N` then `rate X Y VALUE` lines.
    #[arg(long, value_name = "PATH")]
    pub kernel: Option<PathBuf>,
}

impl KernelArgs {
    pub fn build(&self) -> Result<RateKernel> {
        match (self.cycle, self.star, self.complete, &self.kernel) {
            (Some(n), ..) => RateKernel::cycle(n),
            (_, Some(n), ..) => RateKernel::star(n),
            (_, _, Some(n), _) => RateKernel::complete(n),
            (_, _, _, Some(path)) => RateKernel::from_file(path),
            _ => Err(Error::InvalidArgument("no kernel given".into())),
        }
    }
}

/// Initial configuration: `ones`, `zeros`, or a state index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    Ones,
    Zeros,
    Index(u64),
}

impl FromStr for Start {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ones" => Ok(Self::Ones),
            "zeros" => Ok(Self::Zeros),
            _ => s
                .parse()
                .map(Self::Index)
                .map_err(|_| format!("expected `ones`, `zeros` or a state index, got {s:?}")),
        }
    }
}

impl Start {
    pub fn config(&self, n_sites: usize) -> Result<SpinConfiguration> {
        match *self {
            Self::Ones => Ok(SpinConfiguration::ones(n_sites)),
            Self::Zeros => Ok(SpinConfiguration::zeros(n_sites)),
            Self::Index(i) => {
                if n_sites > 63 || i >> n_sites != 0 {
                    return Err(Error::InvalidArgument(format!("state index {i} does not fit {n_sites} sites")));
                }
                Ok(SpinConfiguration::from_index(i, n_sites))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Graphical construction run forward.
    Forward,
    /// Competing exponential clocks.
    Gillespie,
    /// Duality formula on the full backward trace.
    Dual,
    /// Lazily traced dual lineages (same streams as `forward`).
    Lazy,
    /// Exact stationary samples (ignores --t and --start).
    Stationary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Cycle,
    Star,
    Complete,
}

impl From<Family> for KernelFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Cycle => KernelFamily::Cycle,
            Family::Star => KernelFamily::Star,
            Family::Complete => KernelFamily::Complete,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact laws for small systems: stationary law, d(t) profile or t_mix.
    Exact {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Report t_mix(EPS) (CSV `epsilon,t_mix`).
        #[arg(long, value_name = "EPS")]
        tmix: Option<f64>,
        /// Comma-separated times for a d(t) profile (CSV `t,d,dbar`).
        #[arg(long, value_delimiter = ',', value_name = "T,..")]
        times: Vec<f64>,
    },
    /// Sample eta_t (CSV `replica,state_index,ones`).
    Simulate {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_enum, default_value_t = Method::Lazy)]
        method: Method,
        #[arg(long, default_value = "ones")]
        start: Start,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Compare simulators with the exact law (CSV `method,tv,n_samples`).
    DualCheck {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value = "ones")]
        start: Start,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Both sides of the cutoff window (CSV `n,alpha,side,estimate,stderr,n_samples`).
    CutoffProfile {
        #[arg(long, value_enum, default_value_t = Family::Cycle)]
        family: Family,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4")]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Star mixing from all-ones via the reduced chain (CSV `n,t,tv`).
    Star {
        /// Comma-separated leaf counts.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,5,10")]
        times: Vec<f64>,
        /// Report t_mix(EPS) from all-ones instead (CSV `n,epsilon,t_mix`).
        #[arg(long, value_name = "EPS")]
        tmix: Option<f64>,
    },
    /// Exhaustive check of the two-leaf channel on a label grid.
    ChannelCheck {
        /// Labels k/(2G) for k = 1..G.
        #[arg(long, default_value_t = 5)]
        grid: usize,
    },
    /// Generator-level check of the Ising / noisy voter correspondence.
    IsingCheck {
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,1,2")]
        betas: Vec<f64>,
    },
    /// Closed-form bounds (CSV `quantity,value`).
    Bounds {
        /// Number of sites.
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        q_max: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Also report the star bound with this C (n = number of leaves).
        #[arg(long)]
        star_c: Option<f64>,
    },
}

struct Output {
    table: Table,
    summary: String,
    ok: bool,
}

impl Output {
    fn new(table: Table, summary: String) -> Self {
        Self { table, summary, ok: true }
    }
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Run a parsed command. Returns whether its check (if any) passed.
pub fn execute(cli: &Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_err() {
            log::warn!("thread pool already initialized; --threads ignored");
        }
    }
    let out = dispatch(&cli.command, cli.seed)?;
    match &cli.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            out.table.write_to(&mut w)?;
            w.flush()?;
            println!("{}", out.summary);
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            out.table.write_to(&mut lock)?;
            lock.flush()?;
            eprintln!("{}", out.summary);
        }
    }
    Ok(out.ok)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("--samples must be >= 1".into()));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn dispatch(command: &Command, seed: u64) -> Result<Output> {
    match command {
        Command::Exact { kernel, tmix, times } => exact(&kernel.build()?, *tmix, times),
        Command::Simulate { kernel, t, method, start, samples } => {
            simulate(&kernel.build()?, *t, *method, *start, *samples, seed)
        }
        Command::DualCheck { kernel, t, start, samples } => dual_check(&kernel.build()?, *t, *start, *samples, seed),
        Command::CutoffProfile { family, sizes, alphas, samples } => {
            let prof = cutoff_profile((*family).into(), sizes, alphas, *samples, seed)?;
            let summary = format!("{} profile rows for the {} family", prof.rows.len(), KernelFamily::from(*family).name());
            Ok(Output::new(prof.to_table(), summary))
        }
        Command::Star { n, times, tmix } => star(n, times, *tmix),
        Command::ChannelCheck { grid } => {
            let report = channel_grid_check(*grid)?;
            let max = report.max_discrepancy();
            let alphas_ok = report.alphas_in_unit_interval();
            let mut out = Output::new(
                report.to_table(),
                format!(
                    "channel grid {grid}^3: max discrepancy {}, alpha in [0,1]: {}",
                    fmt_f64(max),
                    if alphas_ok { "yes" } else { "no" }
                ),
            );
            out.ok = max <= CHECK_TOL && alphas_ok;
            Ok(out)
        }
        Command::IsingCheck { n_min, n_max, betas } => {
            if n_min > n_max {
                return Err(Error::InvalidArgument(format!("--n-min {n_min} exceeds --n-max {n_max}")));
            }
            let ns: Vec<usize> = (*n_min..=*n_max).collect();
            let rows = equivalence_grid(&ns, betas)?;
            let max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
            let mut out = Output::new(
                equivalence_table(&rows),
                format!("Ising equivalence over {} grid points: max discrepancy {}", rows.len(), fmt_f64(max)),
            );
            out.ok = max <= CHECK_TOL;
            Ok(out)
        }
        Command::Bounds { n, q_max, rho, alpha, star_c } => bounds(*n, *q_max, *rho, *alpha, *star_c),
    }
}

fn exact(kernel: &RateKernel, tmix: Option<f64>, times: &[f64]) -> Result<Output> {
    let n = kernel.n_sites();
    if let Some(eps) = tmix {
        let t = t_mix_exact(kernel, eps)?;
        let mut table = Table::new(&["epsilon", "t_mix"]);
        table.push(vec![fmt_f64(eps), fmt_f64(t)]);
        return Ok(Output::new(table, format!("t_mix({}) = {} ({n} sites)", fmt_f64(eps), fmt_f64(t))));
    }
    if !times.is_empty() {
        let points = d_profile(kernel, times)?;
        let last = points.last().expect("nonempty grid");
        return Ok(Output::new(
            d_profile_table(&points),
            format!("d(t) on {} times; d({}) = {}", points.len(), fmt_f64(last.t), fmt_f64(last.d)),
        ));
    }
    let gen = ConfigGenerator::new(kernel)?;
    let pi = stationary_of(&gen);
    let max = pi.as_slice().iter().copied().fold(0.0, f64::max);
    Ok(Output::new(
        pi.to_table(),
        format!("stationary law on {} states; largest mass {}", pi.len(), fmt_f64(max)),
    ))
}

fn draw(kernel: &RateKernel, t: f64, method: Method, eta0: &SpinConfiguration, seed: u64) -> SpinConfiguration {
    match method {
        Method::Forward => forward_run(&sample_events(kernel, t, seed), eta0),
        Method::Gillespie => gillespie_run(kernel, eta0, t, seed),
        Method::Dual => dual_sample_config(&sample_dual(kernel, t, seed), eta0),
        Method::Lazy => sample_config_at(kernel, eta0, t, seed),
        Method::Stationary => perfect_stationary_sample(kernel, seed),
    }
}

fn draw_batch(kernel: &RateKernel, t: f64, method: Method, eta0: &SpinConfiguration, samples: usize, seed: u64) -> Vec<SpinConfiguration> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| draw(kernel, t, method, eta0, replica_seed(seed, i)))
        .collect()
}

fn simulate(kernel: &RateKernel, t: f64, method: Method, start: Start, samples: usize, seed: u64) -> Result<Output> {
    check_time(t)?;
    check_samples(samples)?;
    let n = kernel.n_sites();
    let eta0 = start.config(n)?;
    let batch = draw_batch(kernel, t, method, &eta0, samples, seed);
    let mut table = Table::new(&["replica", "state_index", "ones"]);
    let mut total_ones = 0usize;
    for (i, eta) in batch.iter().enumerate() {
        let ones = eta.count_ones();
        total_ones += ones;
        let index = if n <= 63 { eta.index().to_string() } else { String::new() };
        table.push(vec![i.to_string(), index, ones.to_string()]);
    }
    let density = total_ones as f64 / (samples * n) as f64;
    Ok(Output::new(table, format!("{samples} samples on {n} sites; mean density of ones {}", fmt_f64(density))))
}

fn dual_check(kernel: &RateKernel, t: f64, start: Start, samples: usize, seed: u64) -> Result<Output> {
    check_time(t)?;
    check_samples(samples)?;
    let n = kernel.n_sites();
    if n > MAX_PROFILE_SITES {
        return Err(Error::Capacity(format!("dual-check supports at most {MAX_PROFILE_SITES} sites, got {n}")));
    }
    let eta0 = start.config(n)?;
    let gen = ConfigGenerator::new(kernel)?;
    let exact = evolve(&gen, &ProbabilityVector::point_mass(gen.n_states(), eta0.index() as usize), t)?;
    let mut table = Table::new(&["method", "tv", "n_samples"]);
    let mut worst: f64 = 0.0;
    for (name, method) in [("forward", Method::Forward), ("gillespie", Method::Gillespie), ("dual", Method::Dual)] {
        let batch = draw_batch(kernel, t, method, &eta0, samples, seed);
        let law = ProbabilityVector::empirical(gen.n_states(), batch.iter().map(|e| e.index() as usize));
        let tv = law.tv(&exact)?;
        worst = worst.max(tv);
        table.push(vec![name.into(), fmt_f64(tv), samples.to_string()]);
    }
    Ok(Output::new(table, format!("max TV to the exact law at t = {}: {}", fmt_f64(t), fmt_f64(worst))))
}

fn star(ns: &[usize], times: &[f64], tmix: Option<f64>) -> Result<Output> {
    if let Some(eps) = tmix {
        let mut table = Table::new(&["n", "epsilon", "t_mix"]);
        let mut parts = Vec::new();
        for &n in ns {
            let t = t_mix_from_ones(n, eps)?;
            table.push(vec![n.to_string(), fmt_f64(eps), fmt_f64(t)]);
            parts.push(format!("n={n}: {}", fmt_f64(t)));
        }
        return Ok(Output::new(table, format!("t_mix({}) from all-ones: {}", fmt_f64(eps), parts.join(", "))));
    }
    let mut table = Table::new(&["n", "t", "tv"]);
    for &n in ns {
        let tvs = tv_curve(n, times)?;
        for row in curve_table(n, times, &tvs).rows() {
            table.push(row.clone());
        }
    }
    Ok(Output::new(table, format!("TV from all-ones for {} star sizes at {} times", ns.len(), times.len())))
}

fn bounds(n: usize, q_max: f64, rho: f64, alpha: f64, star_c: Option<f64>) -> Result<Output> {
    if n == 0 {
        return Err(Error::InvalidSize("--n must be >= 1".into()));
    }
    let input = WilsonBoundInput { n_sites: n, q_max, rho, alpha };
    let mut entries = vec![
        ("t_lower".to_string(), input.t()),
        ("wilson_formula".to_string(), wilson_formula(q_max, rho, alpha)),
    ];
    let validity = match wilson_lower_bound(input) {
        Ok(v) => {
            entries.push(("wilson_lower_bound".into(), v));
            "valid".to_string()
        }
        Err(e) => format!("outside validity ({e})"),
    };
    let t_upper = 0.5 * (n as f64).ln() + alpha;
    entries.push(("t_upper".into(), t_upper));
    entries.push(("hypercube_tv".into(), hypercube_tv_exact(n, t_upper)));
    entries.push(("dgm_limit".into(), dgm_limit(alpha)));
    if let Some(c) = star_c {
        entries.push(("star_time".into(), star_bound_time(n, c)?));
        entries.push(("star_lower_bound".into(), star_lower_bound(c)));
    }
    let summary = format!(
        "lower bound formula {} at t = {} ({validity})",
        fmt_f64(wilson_formula(q_max, rho, alpha)),
        fmt_f64(input.t())
    );
    Ok(Output::new(bounds_table(&entries), summary))
}

/// The all-ones lower-side estimate for a kernel, for scripting.
pub fn lower_side_estimate(kernel: &RateKernel, alpha: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let t = 0.5 * (kernel.n_sites() as f64).ln() - alpha;
    check_time(t)?;
    let est = all_ones_phi_estimate(kernel, t, samples, seed)?;
    Ok((est.estimate, est.stderr))
}
