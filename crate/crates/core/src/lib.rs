#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod events;
pub mod imaging;
pub mod io;
pub mod kernelfn;
pub mod lowerlevel;
pub mod pipeline;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
