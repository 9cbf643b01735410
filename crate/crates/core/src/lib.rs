pub mod bench;
pub mod cells;
pub mod cli;
pub mod error;
pub mod geo3d;
pub mod fuse;
pub mod ground;
pub mod map;
pub mod pipeline;
pub mod radar;
pub mod radarstereo;
pub mod rng;
pub mod sim;
pub mod textio;

pub use error::{Error, Result};
