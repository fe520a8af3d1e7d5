use crate::error::{HrmError, Result};
use crate::geom::{Dim, Superquadric};

/// Static workspace: arenas the robot must stay inside and obstacles it
/// must avoid.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub dim: Dim,
    pub arenas: Vec<Superquadric>,
    pub obstacles: Vec<Superquadric>,
}

impl Environment {
    pub fn new(dim: Dim, arenas: Vec<Superquadric>, obstacles: Vec<Superquadric>) -> Result<Self> {
        if arenas.is_empty() {
            return Err(HrmError::InvalidArgument("at least one arena is required".into()));
        }
        if arenas.iter().chain(&obstacles).any(|s| s.dim != dim) {
            return Err(HrmError::InvalidArgument("body dimension differs from scene dimension".into()));
        }
        Ok(Environment { dim, arenas, obstacles })
    }

    /// Geometric mean of the semi-axes of the first arena. Used to weigh
    /// rotational against translational distance.
    pub fn characteristic_radius(&self) -> f64 {
        let axes = self.arenas[0].axes();
        axes.iter().product::<f64>().powf(1.0 / axes.len() as f64)
    }
}
