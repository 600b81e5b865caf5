//! Micro-macro solver for the 1D linear kinetic equation
//!
//! ```text
//! eps df/dt + v df/dx = (1/eps) L f,    x in [0,1], v in [-1,1],
//! ```
//!
//! with velocity measure dmu = dv/2 and collision operator
//! L f(v) = (1/2) Integral sigma(v,w) (f(w) - f(v)) dw. As eps -> 0 the
//! density rho = <f> approaches the heat equation rho_t = kappa rho_xx with
//! kappa = -<v L^+(v)>.
//!
//! The decomposition f = rhobar(x) E + g uses position-dependent half ranges
//! V_-(x) = { v : omega(x,v) < 0 }, omega(x,v) = (2x-1) v - x (1-x), so that
//! rhobar absorbs the incoming trace at each wall and g carries the rest.
//! Two coupled schemes are built on it: a naive one that leaves the boundary
//! layer to the grid, and a layer-matched one (LMe) that carries extra
//! full-range node unknowns at the walls closed by a flux-balance multiplier.
//!
//! Module map:
//! - [`vquad`]: Gauss-Legendre velocity grid, brackets, half-range masks.
//! - [`collision`]: cross sections, discrete L, pseudo-inverse, kappa.
//! - [`grid_state`]: staggered spatial grid, boundary data, state vector.
//! - [`scheme_naive`]: micro-macro stepper without boundary unknowns.
//! - [`scheme_lme`]: layer-matched stepper and its limit multiplier/kernels.
//! - [`reference`]: explicit kinetic and explicit diffusion reference runs.
//! - [`chandrasekhar`]: H-function solves and boundary kernels K0..K3,
//!   Ksigma and its rational approximation.
//! - [`runner`]: experiment configs, report assembly, sweeps, comparisons.

pub mod chandrasekhar;
pub mod collision;
pub mod error;
pub mod grid_state;
pub mod reference;
pub mod runner;
pub mod scheme_lme;
pub mod scheme_naive;
pub mod vquad;

pub use error::{Error, Result};
