//! Reconstruction of complete azimuth-elevation signal-level maps from
//! sparse, trajectory-shaped antenna measurements.
//!
//! Ground stations record the received signal level only along the pointing
//! trajectories of past satellite contacts. This crate fills in the rest of
//! the sky by treating the measurements as fixed data and solving the Laplace
//! equation over the unmeasured directions, with boundary rules that match
//! the geometry of the pointing domain: azimuth is periodic, the horizon is a
//! no-flux boundary, and looking past the zenith continues at the opposite
//! azimuth. The completed map renders as a greyscale sky image for reception
//! quality assessment.
//!
//! Pipeline: [`ingest`] parses and rasterizes measurements, [`operator`] and
//! [`solver`] solve the sparse linear system with conjugate gradients,
//! [`render`] produces PGM/PNG images, and [`archive`] carries intermediate
//! results between stages. Runs are bitwise reproducible across worker
//! counts thanks to the exact reductions in [`reduce`].

pub mod archive;
pub mod exec;
pub mod field;
pub mod grid;
pub mod ingest;
pub mod operator;
pub mod reduce;
pub mod render;
pub mod solver;

pub use archive::{read_archive, write_archive, Archive, ArchiveError};
pub use exec::Parallelism;
pub use field::{FieldError, InpaintingMask, SignalField};
pub use grid::{AngularGrid, Direction, GridError, PixelIndex};
pub use ingest::{
    bin_record, parse_records, power_to_dbm, rasterize, rasterize_with_stats, Accumulator,
    IngestError, LineError, MeasurementRecord, ParseError, ParseOutcome, RasterStats,
};
pub use operator::{
    max_abs_laplacian_unknown, DenseMatrix, LaplacianStencil, OperatorError, DENSE_ORACLE_LIMIT,
};
pub use reduce::{fast_dot, repro_dot, repro_sum, ReproAcc};
pub use render::{
    to_greyscale, write_pgm, write_png, GreyImage, GreyscaleMode, GreyscaleParams, RenderError,
};
pub use solver::{cg_solve, solve_reduced, SolveError, SolveReport, SolverConfig};
