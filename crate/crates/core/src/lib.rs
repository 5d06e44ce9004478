//! Performance analysis of uplink power-domain NOMA over free-space optical
//! links with gamma-gamma scintillation.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`] and [`quadrature`]: real-order Bessel K and adaptive
//!   Gauss–Kronrod integration on finite and semi-infinite intervals.
//! - [`channel`]: Beers–Lambert path loss, gamma-gamma densities for the
//!   intensity `I` and for `h = I²`, and the compositional sampler.
//! - [`order_stats`]: densities and sampling of the descending-ordered `h`.
//! - [`link`]: power back-off plan, SIC decode order, NOMA and TDMA rates.
//! - [`analysis`]: quadrature evaluation of outage, coverage and ergodic
//!   sum rate.
//! - [`monte_carlo`]: chunked, seed-reproducible simulation of the same
//!   quantities from physical channel draws.

pub mod analysis;
pub mod channel;
mod error;
pub mod link;
pub mod monte_carlo;
pub mod order_stats;
pub mod quadrature;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
