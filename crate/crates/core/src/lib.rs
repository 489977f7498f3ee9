//! Markov couplings for SDEs driven by multiplicative pure-jump Lévy noise:
//! the coupling kernel, generator quadrature, a thinning simulator, rate
//! certificates and the experiment harness behind the `levycoupling` binary.

// `!(a > b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments, clippy::needless_range_loop, clippy::type_complexity)]

pub mod cli_harness;
pub mod coefficient_field;
pub mod coupling_kernel;
pub mod error;
pub mod generator_quadrature;
pub mod grid;
pub mod levy_model;
pub mod linalg;
pub mod quadrature;
pub mod rate_analysis;
pub mod sde_simulator;
pub mod stats;
pub mod test_functions;
