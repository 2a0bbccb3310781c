//! Forward model of the embedded vacancy sensor: Stark-shifted optical
//! resonances, the spin-3/2 ground-state Hamiltonian with its microwave
//! response, and a phenomenological linewidth response to the local
//! charge environment.

mod linewidth;
mod ple;
mod spin;
mod stark;

pub use linewidth::{linewidth_response, LinewidthModel};
pub use ple::{ple_spectrum, PleModel};
pub use spin::{ground_state_hamiltonian, odmr_spectrum, OdmrSpectrum, SpinModel};
pub use stark::{stark_shift, StarkParams};
