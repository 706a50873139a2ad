//! Numerical tools for stochastic inverse problems: recovering the law of an
//! input vector `Z` from the law of a quantity of interest `Q(Z)`.
//!
//! The crate covers contour disintegration with a uniform ansatz for the
//! product map `Q = Z1 Z2`, maximum-entropy fits, grid-based Bayesian
//! inference with pushforward likelihoods, and Karhunen-Loeve inversion of
//! one-dimensional random fields.

pub mod contour;
pub mod density;
pub mod error;
pub mod fields;
pub mod grid;
pub mod inference;
pub mod io;
pub mod maxent;
mod par;
pub mod product;
pub mod quad;
pub mod sampling;

pub use density::{histogram_to_pdf, l1_distance, sup_distance, GriddedPdf1D, GriddedPdf2D, MeasureTag, Tabulated};
pub use error::{Error, Result};
pub use grid::{Grid1D, Grid2D, Interval, Rect};
pub use product::{ForwardMap, Law, Marginal, ScaledLaw};
pub use sampling::{rejection_sample_2d, SampleSet};
