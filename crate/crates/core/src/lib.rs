//! Solver for joint order batching, batch assignment and sequencing, and
//! picker routing in rectangular parallel-aisle warehouses, with restocking
//! of returned products folded into regular picking routes and customer
//! orders allowed to split across batches at a cost.
//!
//! The main entry points are [`alns::run`] for the adaptive large
//! neighborhood search, [`bench::bm1`] / [`bench::bm2`] for the constructive
//! benchmarks and [`mip::brute_force_oracle`] for exact answers on tiny
//! instances.

pub mod alns;
pub mod bench;
pub mod error;
pub mod instance;
pub mod mip;
pub mod routing;
pub mod solution;
pub mod warehouse;

pub use error::{Error, Result};
pub use instance::{generate, GenSpec, Instance, InstanceParams, LineId};
pub use solution::{check_feasibility, evaluate, CostBreakdown, Solution};
pub use warehouse::{Location, WarehouseLayout};
