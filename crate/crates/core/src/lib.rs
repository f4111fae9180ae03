//! Estimation of linear properties of spatial fields from distributed
//! sensors: placement certification, estimator synthesis, error analysis,
//! and resource allocation.

pub mod allocation;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod maps;
pub mod model;
pub mod multiindex;
pub mod placement;
pub mod scenario;

pub use error::{Error, Result};
pub use estimators::{
    Basis, EstimationContext, Estimator, InterpolationMethod, Method, TargetSpec,
};
pub use linalg::{SystemMatrix, Weights};
pub use model::{Field, LinearField, ModelFunction, ModelSpec, Polynomial};
pub use multiindex::{LowerSet, MultiIndex};
pub use placement::{PointSet, Relabeling};
pub use scenario::{load_scenario, Scenario};
