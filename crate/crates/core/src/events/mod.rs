//! Event ingestion, frame standardization and the compressed event datacube.

mod cube;
mod frames;
mod stream;
mod trajectory;

pub use cube::{build_compressed_cube, pixel_event_trajectory, CompressedCube};
pub use frames::{
    standardize_frames, Frame, FrameSequence, LogFrames, DEFAULT_STANDARDIZE_EPSILON,
};
pub use stream::{
    parse_event_file, parse_events, write_event_file, Event, EventStream, Polarity,
};
pub use trajectory::Trajectory;
