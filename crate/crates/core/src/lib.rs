//! Numerical lab for the scattering-control approach to the acoustic inverse
//! problem: forward waves on a grid, outside-only control iterations, harmonic
//! reconstruction of the speed, and wave-packet interface location.

pub mod energy_projections;
pub mod grid;
pub mod harmonic_recon;
pub mod interface_recovery;
pub mod medium_geometry;
pub mod ray_oracle;
pub mod scattering_control;
pub mod wave_core;
pub mod wave_packets;
