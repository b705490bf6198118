pub mod error;
pub mod fixtures;
pub mod cli;
pub mod closedloop;
pub mod datagen;
pub mod formats;
pub mod informativity;
pub mod matops;
pub mod netgraph;
pub mod plant;
pub mod synthesis;

pub use error::{Condition, Error, Result};
