//! Consistent minimal displacement of branching random walks.
//!
//! The crate computes the large-deviation constants of a `b`-ary branching
//! random walk (tilt parameters, speeds, tilted variance and the offset
//! constant `l0`), builds the Euler barrier curve and its closed form,
//! and checks those constants against exact tree search and Monte Carlo
//! simulation on reproducible, counter-based random trees.
//!
//! Module map:
//!
//! - [`dist`]: step laws, log-MGF, tilting, centering, inverse-transform sampling
//! - [`ldtool`]: rate function, `λ±`, and the [`ldtool::LdProfile`]
//! - [`barrier`]: Euler recursion, closed-form curve, crossing index, variational solver
//! - [`brw`]: exact offset by branch-and-bound and barrier/window population counts
//! - [`mogulskii`]: tube regions, `H₂`, Monte Carlo stay probabilities
//! - [`harness`]: configuration, experiment orchestration and CSV output

pub mod barrier;
pub mod brw;
pub mod counter;
pub mod dist;
pub mod harness;
pub mod ldtool;
pub mod mogulskii;

pub use barrier::{BarrierCurve, BarrierError, Crossing, VariationalSolution};
pub use brw::{BrwError, CountResult, OffsetResult, TreeRandomness};
pub use dist::{DistError, DistKind, StepDistribution};
pub use ldtool::{LdError, LdProfile, TiltSide};
pub use mogulskii::{MogulskiiError, StayEstimate, TubeRegion};
