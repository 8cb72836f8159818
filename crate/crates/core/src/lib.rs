//! Noisy voter models on arbitrary finite Markov kernels.
//!
//! A voting mechanism `(S, q)` is a continuous-time Markov rate kernel on a
//! finite site set. The noisy voter model built on it lives on `{0,1}^S`:
//! site `x` copies site `y` at rate `q(x, y)` and, independently, every site
//! is replaced by a fair coin at rate 1.
//!
//! The crate is split along the objects one needs to study mixing of these
//! systems:
//!
//! * [`kernel`] and [`stationary`]: voting mechanisms, their stationary laws
//!   and the summaries `q_max` and `rho`.
//! * [`exact`]: exact transient laws on `{0,1}^S` for small `|S|`, total
//!   variation, `d(t)`, mixing times and the hypercube comparison law.
//! * [`graphical`]: the Poisson graphical construction, a Gillespie
//!   simulator and exact stationary sampling.
//! * [`dual`]: coalescing backward lineages, the coalescence forest and the
//!   tree-indexed description of the time-`t` law.
//! * [`channels`]: noisy trees, stringy trees and the two-leaf channel.
//! * [`analysis`]: lower/upper bound formulas and Monte Carlo TV estimation.
//! * [`star`]: the reduced chain of the star graph.
//! * [`ising`]: the heat-bath Ising model on the cycle and its voter form.
//! * [`cli`]: the `votermix` command line.

pub mod analysis;
pub mod channels;
pub mod cli;
pub mod config;
pub mod csv;
pub mod dual;
pub mod error;
pub mod exact;
pub mod graphical;
pub mod ising;
pub mod kernel;
pub mod rng;
pub mod star;
pub mod stationary;
pub mod uniformize;

mod sumtree;

pub use config::SpinConfiguration;
pub use error::{Error, Result};
pub use exact::{ConfigGenerator, ProbabilityVector};
pub use kernel::RateKernel;
pub use stationary::StationaryInfo;
