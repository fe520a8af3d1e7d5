//! Highway roadmap planning for robots built from ellipsoids, moving among
//! superquadric obstacles inside superquadric arenas.

pub mod bridge;
pub mod cli;
pub mod cslice;
pub mod enclosure;
pub mod env;
pub mod error;
pub mod geom;
pub mod minkowski;
pub mod oracle;
pub mod planner;
pub mod robot;

pub use error::{HrmError, Result};
