//! Numerical laboratory for matrix-weighted dyadic harmonic analysis.
//!
//! The crate models matrix weights on a discretized torus, builds shifted
//! dyadic lattices with exact integer cell geometry, and measures the
//! quantities that drive two-weight commutator estimates: Muckenhoupt
//! characteristics, reducing matrices, matrix BMO norms, Orlicz bump
//! constants, sparse stopping families, and weighted operator norms of
//! singular integrals and their commutators. The `lab` module packages
//! these into reproducible experiment suites with machine-readable
//! reports.

pub mod blocktrick;
pub mod bmo;
pub mod dyadic;
pub mod error;
pub mod field;
pub mod grid;
pub mod lab;
pub mod linalg;
pub mod norms;
pub mod operators;
pub mod orlicz;
pub mod weights;

pub use blocktrick::{ApTriangleReport, BlockField, PhiIdentityReport};
pub use bmo::{BmoForm, BmoReport, SupQuantity, TildeOrientation};
pub use dyadic::{CubeFamily, CubeId, DyadicCube, DyadicLattice, Shift, SparseFamily};
pub use error::{Error, Result};
pub use field::{MatrixField, VectorField};
pub use grid::{CellSet, GridSpec};
pub use lab::{load_config, run_all, run_suite, write_report, ExperimentConfig, ExperimentReport, Verdict};
pub use norms::{LinearOp, NormEstimate, NormMode};
pub use operators::{CarlesonSequence, CzoKind, HaarSystem};
pub use orlicz::{BumpReport, YoungFunction};
pub use weights::{MatrixWeight, ReducingPair, WeightKind};
