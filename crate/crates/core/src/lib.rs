//! Numerical verification of Kähler immersions into Euclidean space.
//!
//! The crate evaluates charted immersions through third-order jets and
//! derives from them the induced metric, the second fundamental form and its
//! type decomposition, curvature via the structure equations, the real and
//! complex Gauss maps, the associated family of pluriminimal immersions and
//! the flag-manifold linear algebra used to describe twistor lifts.
//!
//! Every check produces a scalar residual that is classified against one of
//! three tolerance tiers, see [`status`].

pub mod chart;
pub mod error;
pub mod exec;
pub mod family;
pub mod fixtures;
pub mod flags;
pub mod forms;
pub mod gauss;
pub mod kaehler;
pub mod linalg;
pub mod local;
pub mod pipeline;
pub mod status;

pub use chart::{ChartedImmersion, ComplexTangent, DomainBox, Grid, Jet3, JetMode, TypeTag};
pub use error::{Error, Result};
pub use exec::Exec;
pub use local::LocalGeometry;
pub use status::{Status, Tier, Tolerances};
