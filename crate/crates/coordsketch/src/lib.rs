//! Coordinator-model sampling and entrywise function-sum protocols,
//! composable lp-sensitivity sketches, and neighborhood propagation over a
//! simulated message-passing substrate with exact communication accounting.
//!
//! The crate is organized around three layers:
//!
//! * [`randomness`] and [`comm`] provide the shared seeded randomness and
//!   the round-structured substrate every protocol runs on;
//! * [`sampler`] and [`fsum`] implement the coordinator-model protocols:
//!   one-round sampling from additively-defined distributions and the
//!   two-round sum/moment estimation machinery built on shared exponential
//!   variates, together with the higher-order correlation reduction;
//! * [`sketch`] and [`congest`] implement composable sensitivity sketches
//!   (create / solve / merge) and their delta-round propagation over
//!   arbitrary graph topologies, with regression and low-rank solvers on
//!   top.
//!
//! The `coordsketch` binary drives experiments; see the crate examples for
//! one runnable program per capability.

pub mod comm;
pub mod congest;
pub mod experiment;
pub mod fsum;
pub mod randomness;
pub mod sampler;
pub mod sketch;
