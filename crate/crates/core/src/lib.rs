//! Nonnegative spline smoothing in Bernstein–Bézier form.
//!
//! A spline of degree `d` on knots `ξ_0 < … < ξ_m` is stored as one vector
//! of `dm + 1` Bernstein coefficients. Fitting minimises
//! `‖y − Ab‖² + λ bᵀQb` subject to `C²` continuity, optionally with the
//! spline kept nonnegative:
//!
//! ```
//! use nnspline::data::generate_data;
//! use nnspline::smoothers::{fit_cutting_plane, FitConfig};
//!
//! let data = generate_data(10, 7);
//! let partition = data.knot_partition().unwrap();
//! let fit = fit_cutting_plane(&data, &partition, &FitConfig::new(3, 1.0 / 250.0)).unwrap();
//! assert!(fit.grid_min(1000) >= 0.0);
//! ```

pub mod assembly;
pub mod bezier;
pub mod convexity;
pub mod data;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod polyroots;
pub mod qp;
pub mod smoothers;
pub mod sparse;

pub use assembly::{CutSet, ProblemMatrices};
pub use bezier::{LocalPolynomial, Partition, SplineCoefficients};
pub use data::Dataset;
pub use error::{Result, SplineError};
pub use smoothers::{FitConfig, FitResult, Method, Termination};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/splines.md")]
    mod splines {}
    #[doc = include_str!("../../../book/src/assembly.md")]
    mod assembly {}
    #[doc = include_str!("../../../book/src/piece-minimisation.md")]
    mod piece_minimisation {}
    #[doc = include_str!("../../../book/src/qp.md")]
    mod qp {}
    #[doc = include_str!("../../../book/src/cutting-plane.md")]
    mod cutting_plane {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
