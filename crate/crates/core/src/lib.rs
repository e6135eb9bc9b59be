//! Sub-Riemannian calculus on Carnot groups.
//!
//! A Carnot group is a simply connected nilpotent Lie group whose Lie algebra
//! splits into layers `V_1 ⊕ … ⊕ V_r` with `[V_1, V_i] = V_{i+1}`. This crate
//! builds the whole computational stack on top of that structure:
//!
//! - [`algebra`] — stratified Lie algebras given by exact rational structure
//!   constants: bracket, BCH group law (Dynkin series, exact at step `r`),
//!   dilations, gauge pseudo-norm, left-invariant frame and the dilation
//!   generator as differential operators.
//! - [`symfield`] — exact sparse multivariate polynomials over ℚ and
//!   first-order differential operators with polynomial coefficients.
//! - [`hcalc`] — horizontal gradient/Hessian, Δ_H, Δ_{H,∞}, the elementary
//!   symmetric operators F_r, H_r-convexity tests, and the pointwise
//!   Bochner-type identities checked symbolically.
//! - [`hypersurface`] — level-set geometry of ∂Ω: angle function, horizontal
//!   normal, characteristic set, H-mean curvature, starlikeness.
//! - [`quad`] — deterministic seeded Monte Carlo for volume, Riemannian
//!   surface, and H-perimeter integrals (thin-shell co-area estimator),
//!   plus exact ball moments and a smooth bump field.
//! - [`verify`] — the identity/inequality harness: assembles every term of
//!   the integral identities, computes residuals with error bars, renders
//!   verdict reports.
//!
//! All symbolic computation is exact over the rationals; floating point
//! enters only through quadrature and pointwise spectral evaluations.

pub mod algebra;
pub mod hcalc;
pub mod hypersurface;
pub mod quad;
pub mod rational;
pub mod suites;
pub mod symfield;
pub mod verify;


pub use algebra::{GroupElement, StratifiedLieAlgebra};
pub use symfield::{DiffOperator, ScalarField};
