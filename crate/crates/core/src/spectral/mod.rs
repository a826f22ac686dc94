//! Periodic-grid substrate: samples, the unitary transform, Riesz
//! multipliers and Lebesgue / mixed space-time norms.
//!
//! Convention: `f̂(ξ) = (2π)^{-1/2} ∫ e^{-ixξ} f(x) dx` on the grid
//! `x_i = -L/2 + iL/n` with modes `ξ_m = 2πm/L`, `m ∈ [-n/2, n/2)`.

mod exponent;
pub mod fft;
mod field;
mod grid;
pub mod quadrature;
mod spectrum;

pub use exponent::Exponent;
pub use field::{mixed_spacetime_norm, uniform_grid, MixedNormSpec, NormOrder, SpaceTimeField};
pub use grid::{
    fractional_derivative, inverse_transform, lebesgue_norm, transform, weighted_norm, wrap_horizon, Convention,
    FrequencyFunction, GridFunction, Horizon,
};
pub use spectrum::{FnSpectrum, GridSpectrum, Packet, PacketSum, Spectrum, SumSpectrum, Weighted};
