#![allow(clippy::excessive_precision)]

pub mod error;
pub mod estimators;
pub mod models;
pub mod numerics;
pub mod sensitivity;
pub mod closedform;
pub mod cli;

pub use error::{Axis, Error, Result};
pub use estimators::{estimate, Dataset, FunctionalId, OuterMap, Transform};
pub use models::{Law, Link, ModelSpec};
pub use sensitivity::{McEstimate, Point};
