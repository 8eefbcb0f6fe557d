//! Finite-integration electrothermal solver on a Cartesian grid.
//!
//! Potentials and temperatures live on the nodes of a uniform primal grid.
//! Edge conductances come from the quarter dual facets of the (up to four)
//! cells around each edge, node heat capacities from the eighth volumes of
//! the adjacent cells. Bondwires are lumped two-node elements whose
//! conductance depends on the relative elongation `δ` through the total
//! length `ℓ_min / (1 − δ)`.
//!
//! Each time step solves the stationary current problem at the current
//! temperatures, deposits the Joule heat, and takes one implicit-Euler heat
//! step; the two are iterated until the wire temperatures settle.
//!
//! ```
//! use etuq::fit::{bondwire_conductances, desk::gold};
//!
//! let (g_el, _) = bondwire_conductances(&gold(), 7.85e-9, 1e-3, 0.0, 293.0).unwrap();
//! assert!((g_el - 4.1e7 * 7.85e-9 / 1e-3).abs() < 1e-9);
//! ```

pub mod desk;
mod electric;
mod grid;
mod model;
pub mod sparse;
mod thermal;
mod transient;

pub use electric::{bondwire_conductances, total_length, ElectricSystem, ELECTRIC_RESIDUAL};
pub use grid::{CartesianGrid, Edge};
pub use model::{Bondwire, EtConfig, EtModel, Material, ModelDef, Pad, Region, SCHEMA_VERSION, STEFAN_BOLTZMANN};
pub use thermal::{StepInfo, ThermalWorkspace};
pub use transient::{extract_qoi, Trace, Transient, TransientStats, ELONGATION_SUPPORT};
