//! Affine factor model for a stock with a doubly stochastic default time.
//!
//! The state is `X = (v, Y, L)`: square-root factors `v`, real factors `Y`
//! and the log pre-default stock price `L` as the last component. Transforms
//! `E[exp(-int (r + lambda)) exp(z^T X_T)]` come from the Riccati system,
//! solved numerically for any admissible model or in closed form for the
//! Heston jump-to-default model. On top of them sit survival probabilities,
//! bonds, recovery legs, CDS spreads, Fourier option prices and a Monte Carlo
//! simulator that serves as an independent oracle.

pub mod affine;
pub mod credit;
pub mod error;
pub mod fourier;
pub mod heston;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod montecarlo;
pub mod ode;
pub mod quadrature;
pub mod riccati;

pub use affine::{validate_admissibility, AffineModelParams, Clause, SpecAffine, ValidationReport, Violation};
pub use credit::{
    cds_quote, cds_spread, defaultable_bond, parity_residual, pure_recovery_value, riskfree_bond,
    survival_probability, zero_recovery_value, Backend, CdsQuote, CdsSchedule, PayoffBundle, PricingContext,
};
pub use error::{Error, Result};
pub use fourier::{
    call_price, implied_vol, put_price, surface, survival_distribution, DampingConfig, OptionKind, SurfaceMethod,
    SurfaceRow,
};
pub use heston::{HestonJtdParams, HestonPremium, HestonTransform};
pub use io::{build_context, ModelDocument, PremiumDocument};
pub use linalg::Matrix;
pub use measures::{apply_measure_change, verify_drift_condition, QModelParams, ResidualReport, RiskPremiumSpec};
pub use montecarlo::{estimate, simulate, Estimate, Functional, PathBatch, Scheme, SimConfig, SimMeasure};
pub use ode::OdeTolerance;
pub use quadrature::QuadratureConfig;
pub use riccati::{AffineTransform, MeasureFlavor, NumericTransform, RiccatiSolution, C64};
