//! Exact density-matrix engine: Hamiltonians on the full spin space, the
//! polarization-cycle channel, protocols and sampled pure-state trajectories.

pub mod channel;
pub mod chebyshev;
pub mod hamiltonian;
pub mod protocol;
pub mod sampled;

pub use channel::{mean_polarization, per_site_polarization, polarization_cycle, thermal_state, ControlReset, CycleChannel, SpectralHamiltonian};
pub use hamiltonian::{build_chain_hamiltonian, build_hbn_hamiltonian, ChainParams, HbnEffectiveParams, LocalOp, SpinHamiltonian, EXACT_DIM_CAP};
pub use protocol::{run_density_protocol, short_time_trajectory, ExactModel};
pub use sampled::{sampled_thermal_protocol, InitialEnsemble, SampleMode, SampledModel, SampledOptions};
