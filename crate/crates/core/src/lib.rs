//! Evolutionary image transition.
//!
//! A (1+1) evolutionary algorithm moves an image from a start picture to a
//! target picture one accepted mutation at a time. Fitness is the number of
//! pixels already showing the target, which makes the process a OneMax
//! instance; [`onemax`] contains the matching bitstring harness.

pub mod engine;
pub mod error;
pub mod imaging;
pub mod mutation;
pub mod onemax;
pub mod raster;
pub mod rng;
pub mod state;

pub use engine::{run, step, FrameEvent, FrameSink, FrameTag, MilestoneEvent, NullSink, RunConfig, RunReport, StepOutcome, Termination};
pub use error::{Error, Result};
pub use mutation::{
    AsymmetricParams, GeometricOp, GeometryOptions, Interleave, MutationDelta, Mutator, OperatorKind, OperatorSpec,
    RegionSize,
};
pub use raster::{PixelCoord, Raster, Rgb};
pub use rng::RngStream;
pub use state::{build_state, CellState, TransitionState};
