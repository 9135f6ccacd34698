//! Functional mean-variance portfolio optimization.
//!
//! A portfolio rule is a map from the return history to a weight vector. The
//! crate estimates the ensemble objective of such a rule by bootstrap
//! resampling and improves it by projected functional gradient ascent,
//! starting from a plug-in (constant-moment) solution.

pub mod constraint;
pub mod error;
pub mod experiments;
pub mod funopt;
pub mod objective;
pub mod panel;
pub mod resample;
pub mod rng;
pub mod solvers;
pub mod stats;
pub mod tsmodel;

pub use constraint::{is_feasible, project, project_hyperplane, ConstraintSet};
pub use error::{Error, Result};
pub use objective::ObjectiveSpec;
pub use panel::ReturnPanel;
pub use tsmodel::{fit_ar1, simulate, ConditionalMoments, GeneratorConfig, MomentModel, Setting};
