//! Geometric and temporal Lagrangian descriptors for one-degree-of-freedom
//! Hamiltonian systems.
//!
//! The geometric descriptor `ℓ(E)` is the total arc length of the level curve
//! `H(q, p) = E`. It is continuous in `E`, maximal on separatrices and its
//! derivative diverges there, so maps of `ℓ(E(q, p))` and of its gradient
//! norm outline the separatrices of the phase portrait without integrating
//! any trajectory.

pub mod ell;
pub mod io;
pub mod maps;
pub mod model;
pub mod quadrature;
pub mod rates;
pub mod roots;
pub mod temporal;

pub use ell::{dell_de, ell, f_lambda, landscape, Landscape, LdError};
pub use maps::{b_map, ell_map, energy_map, temporal_map, EllMode, GridMap, GridSpec, MapError, Quantity};
pub use model::{
    DomainInterval, EndpointKind, EnergyDomain, HamiltonianModel, MechanicalSystem, ModelError,
    ModelId, Truncation,
};
pub use quadrature::{arclength_interval, polyline_oracle, IntervalLength, QuadratureConfig, QuadratureError, Scheme};
pub use rates::{fit_power_law, rate_report, sample_rates, Critical, RateFit, RateReport, RateSample, Side};
pub use temporal::{temporal_ld, vector_field, IntegratorConfig, TemporalError, TemporalLd};
