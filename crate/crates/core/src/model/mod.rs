//! Electrochemical cell model: mesh, material functions, implicit solver and
//! profile-driven simulation.

mod band;
mod cell;
mod kinetics;
mod mesh;
mod ocp;
mod trace;

pub use band::{solve_tridiagonal, BandMatrix};
pub use cell::{Cell, CellState, SolverOptions, StepInfo};
pub use kinetics::{
    butler_volmer_flux, butler_volmer_flux_with, electrolyte_conductivity, exchange_current,
    TransferCoefficients,
};
pub use mesh::{Mesh, MeshSpec, Region};
pub use ocp::{OcpCurve, OcpSet};
pub use trace::{run_profile, simulate, SimOptions, VoltageTrace};
