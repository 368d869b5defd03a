//! Characteristic webs of diagonal hydrodynamic-type systems
//! `R^i_t = λ^i(R) R^i_x`.
//!
//! The crate answers one question from several directions: does a system have
//! linearizable characteristic webs on all of its solutions?
//!
//! * [`system`] evaluates the pointwise conditions on the speeds
//!   (semi-Hamiltonian, linear degeneracy, cross-ratios, the four-index
//!   relation and the `p, q` parametrization of `a_ij`).
//! * [`connection`] builds the gl(2)-valued connection forms, checks flatness
//!   and transports conservation-law coefficients to construct the reciprocal
//!   transformation that decouples the system into Hopf equations.
//! * [`generator`] produces families with known answers.
//! * [`hopf`] solves uncoupled Hopf systems by characteristics and pushes the
//!   solutions through reciprocal transformations.
//! * [`web`] runs the Hénaut test on sampled webs and measures straightness
//!   of leaves.
//! * [`io`] reads and writes the JSON, CSV and SVG files.
//!
//! Sign convention, shared everywhere: family `i` characteristics satisfy
//! `dx + λ^i dt = 0`, i.e. `dx/dt = -λ^i`, and are the integral curves of
//! `V_i = ∂_t - λ^i ∂_x`.

pub mod connection;
pub mod expr;
pub mod generator;
pub mod hopf;
pub mod io;
pub mod system;
pub mod web;
