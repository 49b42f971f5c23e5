//! Shared fixtures for the kernel benchmarks.

use ccphase_core::{assemble, build_basis, DeviceSpec, HamiltonianSet, TruncatedBasis};

/// Basis and Hamiltonian of the default device.
pub fn default_device() -> (DeviceSpec, TruncatedBasis, HamiltonianSet) {
    let spec = DeviceSpec::default();
    let basis = build_basis(&spec).expect("default device is valid");
    let h = assemble(&spec, &basis).expect("default device assembles");
    (spec, basis, h)
}
