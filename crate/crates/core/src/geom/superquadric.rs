use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use super::{Dim, Pose, Vec3};
use crate::error::{HrmError, Result};

pub const EXPONENT_MIN: f64 = 0.1;
pub const EXPONENT_MAX: f64 = 1.9;

/// Coordinates closer to zero than this are nudged away from the axis
/// planes before evaluating gradients.
const AXIS_CLAMP: f64 = 1e-12;

/// `sgn(x) |x|^p`.
#[inline]
pub fn spow(x: f64, p: f64) -> f64 {
    if x < 0.0 {
        -(-x).powf(p)
    } else {
        x.powf(p)
    }
}

#[inline]
fn clamp_off_axis(x: f64) -> f64 {
    if x.abs() < AXIS_CLAMP {
        if x < 0.0 {
            -AXIS_CLAMP
        } else {
            AXIS_CLAMP
        }
    } else {
        x
    }
}

/// Clamp an exponent into the strictly convex range, warning when it moves.
pub fn clamp_exponent(eps: f64) -> f64 {
    let c = eps.clamp(EXPONENT_MIN, EXPONENT_MAX);
    if c != eps {
        log::warn!("superquadric exponent {eps} clamped to {c}");
    }
    c
}

/// A point on a body surface with its surface parameters and outward
/// gradient, both in the body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub point: Vec3,
    /// `(theta)` in 2D, `(eta, omega)` in 3D; unused entries are zero.
    pub param: [f64; 2],
    pub gradient: Vec3,
}

/// Parametric sampling grid with facet connectivity.
#[derive(Clone, Debug)]
pub struct SurfaceGrid {
    pub samples: Vec<SurfaceSample>,
    /// Outward-oriented triangles (3D) or consecutive edges (2D) as index
    /// lists.
    pub facets: Vec<Vec<usize>>,
}

/// Superellipse (2D) or superquadric (3D) with a pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superquadric {
    pub dim: Dim,
    semi_axes: Vec3,
    /// `[eps]` (2D, second entry mirrors the first) or `[eps1, eps2]` (3D).
    exponents: [f64; 2],
    pub pose: Pose,
}

impl Superquadric {
    pub fn new(dim: Dim, semi_axes: Vec3, exponents: [f64; 2], pose: Pose) -> Result<Self> {
        let mut axes = semi_axes;
        if dim == Dim::Two {
            axes.z = 0.0;
        }
        for k in 0..dim.n() {
            if !(axes[k].is_finite() && axes[k] > 0.0) {
                return Err(HrmError::InvalidArgument(format!(
                    "superquadric semi-axes must be positive, got {:?}",
                    &axes.as_slice()[..dim.n()]
                )));
            }
        }
        if exponents.iter().any(|e| !e.is_finite()) {
            return Err(HrmError::InvalidArgument(
                "superquadric exponents must be finite".into(),
            ));
        }
        let exponents = match dim {
            Dim::Two => {
                let e = clamp_exponent(exponents[0]);
                [e, e]
            }
            Dim::Three => [clamp_exponent(exponents[0]), clamp_exponent(exponents[1])],
        };
        Ok(Superquadric {
            dim,
            semi_axes: axes,
            exponents,
            pose,
        })
    }

    pub fn planar(a: f64, b: f64, eps: f64, pose: Pose) -> Result<Self> {
        Superquadric::new(Dim::Two, Vec3::new(a, b, 0.0), [eps, eps], pose)
    }

    pub fn spatial(axes: [f64; 3], eps: [f64; 2], pose: Pose) -> Result<Self> {
        Superquadric::new(Dim::Three, Vec3::from(axes), eps, pose)
    }

    pub fn semi_axes(&self) -> &Vec3 {
        &self.semi_axes
    }

    pub fn axes(&self) -> &[f64] {
        &self.semi_axes.as_slice()[..self.dim.n()]
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents[..self.dim.n() - 1]
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn min_semi_axis(&self) -> f64 {
        self.axes().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_semi_axis(&self) -> f64 {
        self.axes().iter().cloned().fold(0.0, f64::max)
    }

    /// Radius of a ball about the center containing the body.
    pub fn bounding_radius(&self) -> f64 {
        self.axes().iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Implicit function in the body frame.
    pub fn implicit(&self, x: &Vec3) -> Result<f64> {
        if !(x.x.is_finite() && x.y.is_finite() && x.z.is_finite()) {
            return Err(HrmError::InvalidArgument(format!(
                "non-finite point {x:?}"
            )));
        }
        Ok(self.implicit_unchecked(x))
    }

    pub(crate) fn implicit_unchecked(&self, x: &Vec3) -> f64 {
        let a = &self.semi_axes;
        match self.dim {
            Dim::Two => {
                let n = 2.0 / self.exponents[0];
                (x.x / a.x).abs().powf(n) + (x.y / a.y).abs().powf(n)
            }
            Dim::Three => {
                let [e1, e2] = self.exponents;
                let s = (x.x / a.x).abs().powf(2.0 / e2) + (x.y / a.y).abs().powf(2.0 / e2);
                s.powf(e2 / e1) + (x.z / a.z).abs().powf(2.0 / e1)
            }
        }
    }

    /// Implicit function at a world-frame point.
    pub fn implicit_world(&self, p: &Vec3) -> f64 {
        self.implicit_unchecked(&self.pose.inverse_transform_point(p))
    }

    /// Analytic gradient of the implicit function in the body frame.
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        let a = &self.semi_axes;
        match self.dim {
            Dim::Two => {
                let n = 2.0 / self.exponents[0];
                let gx = x.x / a.x;
                let gy = x.y / a.y;
                Vec3::new(
                    n * spow(gx, n - 1.0) / a.x,
                    n * spow(gy, n - 1.0) / a.y,
                    0.0,
                )
            }
            Dim::Three => {
                let [e1, e2] = self.exponents;
                let u = clamp_off_axis(x.x) / a.x;
                let v = clamp_off_axis(x.y) / a.y;
                let w = x.z / a.z;
                let s = u.abs().powf(2.0 / e2) + v.abs().powf(2.0 / e2);
                let outer = (2.0 / e1) * s.powf(e2 / e1 - 1.0);
                Vec3::new(
                    outer * spow(u, 2.0 / e2 - 1.0) / a.x,
                    outer * spow(v, 2.0 / e2 - 1.0) / a.y,
                    (2.0 / e1) * spow(w, 2.0 / e1 - 1.0) / a.z,
                )
            }
        }
    }

    /// Body-frame surface point for surface parameters.
    pub fn point_at(&self, param: [f64; 2]) -> Vec3 {
        let a = &self.semi_axes;
        match self.dim {
            Dim::Two => {
                let e = self.exponents[0];
                let t = param[0];
                Vec3::new(a.x * spow(t.cos(), e), a.y * spow(t.sin(), e), 0.0)
            }
            Dim::Three => {
                let [e1, e2] = self.exponents;
                let (eta, omega) = (param[0], param[1]);
                let ce = spow(eta.cos(), e1);
                Vec3::new(
                    a.x * ce * spow(omega.cos(), e2),
                    a.y * ce * spow(omega.sin(), e2),
                    a.z * spow(eta.sin(), e1),
                )
            }
        }
    }

    fn sample(&self, param: [f64; 2]) -> SurfaceSample {
        let point = self.point_at(param);
        SurfaceSample {
            point,
            param,
            gradient: self.gradient(&point),
        }
    }

    /// `n` body-frame surface samples on the parametric grid.
    pub fn surface_points(&self, n: usize) -> Vec<SurfaceSample> {
        self.surface_grid(n).samples
    }

    /// Parametric grid with connectivity. 2D: `n` angles from `-pi`; 3D: a
    /// latitude/longitude grid with pole points whose total is as close to
    /// `n` as the grid shape allows.
    pub fn surface_grid(&self, n: usize) -> SurfaceGrid {
        match self.dim {
            Dim::Two => {
                let n = n.max(3);
                let samples: Vec<_> = (0..n)
                    .map(|k| self.sample([-PI + 2.0 * PI * k as f64 / n as f64, 0.0]))
                    .collect();
                let facets = (0..n).map(|k| vec![k, (k + 1) % n]).collect();
                SurfaceGrid { samples, facets }
            }
            Dim::Three => {
                let (rings, cols) = sphere_grid_shape(n);
                let mut samples = Vec::with_capacity(rings * cols + 2);
                samples.push(self.sample([-PI / 2.0, 0.0]));
                for i in 0..rings {
                    let eta = -PI / 2.0 + PI * (i + 1) as f64 / (rings + 1) as f64;
                    for j in 0..cols {
                        let omega = -PI + 2.0 * PI * j as f64 / cols as f64;
                        samples.push(self.sample([eta, omega]));
                    }
                }
                samples.push(self.sample([PI / 2.0, 0.0]));
                let facets = sphere_grid_facets(rings, cols);
                SurfaceGrid { samples, facets }
            }
        }
    }

    /// Grid used for discretized boundaries. In 2D, half the angles are
    /// uniform in the parameter and half are chosen so the outward normals
    /// are uniform in angle, which keeps sharp tips of high-exponent curves
    /// covered. 3D uses [`Self::surface_grid`].
    pub fn boundary_grid(&self, n: usize) -> SurfaceGrid {
        if self.dim == Dim::Three {
            return self.surface_grid(n);
        }
        let n = n.max(4);
        let (n_param, n_normal) = (n - n / 2, n / 2);
        let p = 1.0 / (2.0 - self.exponents[0]);
        let (a, b) = (self.semi_axes.x, self.semi_axes.y);
        let mut params: Vec<f64> = (0..n_param)
            .map(|k| -PI + 2.0 * PI * k as f64 / n_param as f64)
            .chain((0..n_normal).map(|k| {
                let psi = -PI + 2.0 * PI * (k as f64 + 0.5) / n_normal as f64;
                spow(b * psi.sin(), p).atan2(spow(a * psi.cos(), p))
            }))
            .collect();
        params.sort_by(f64::total_cmp);
        let samples: Vec<_> = params.iter().map(|&t| self.sample([t, 0.0])).collect();
        let facets = (0..n).map(|k| vec![k, (k + 1) % n]).collect();
        SurfaceGrid { samples, facets }
    }

    /// Enclosed volume (3D) or area (2D).
    pub fn volume(&self) -> f64 {
        let a = &self.semi_axes;
        match self.dim {
            Dim::Two => {
                let e = self.exponents[0];
                4.0 * a.x * a.y * gamma(1.0 + e / 2.0).powi(2) / gamma(1.0 + e)
            }
            Dim::Three => {
                let [e1, e2] = self.exponents;
                2.0 * a.x * a.y * a.z * e1 * e2 * beta(e1 / 2.0 + 1.0, e1) * beta(e2 / 2.0, e2 / 2.0)
            }
        }
    }
}

/// Choose `(rings, columns)` for a 3D grid of about `n` points with roughly
/// twice as many columns as rings.
pub fn sphere_grid_shape(n: usize) -> (usize, usize) {
    let n = n.max(12);
    let inner = n - 2;
    let mut best = (1, inner);
    let mut best_score = (usize::MAX, f64::INFINITY);
    for rings in 1..=inner {
        for cols in [inner / rings, inner / rings + 1] {
            if cols < 3 {
                continue;
            }
            let ratio = cols as f64 / rings as f64;
            if !(1.5..=2.5).contains(&ratio) && inner >= 10 {
                continue;
            }
            let count = rings * cols + 2;
            let score = (count.abs_diff(n), (ratio - 2.0).abs());
            if score.0 < best_score.0 || (score.0 == best_score.0 && score.1 < best_score.1) {
                best = (rings, cols);
                best_score = score;
            }
        }
    }
    best
}

fn sphere_grid_facets(rings: usize, cols: usize) -> Vec<Vec<usize>> {
    let south = 0;
    let north = rings * cols + 1;
    let idx = |i: usize, j: usize| 1 + i * cols + (j % cols);
    let mut facets = Vec::with_capacity(2 * rings * cols);
    for j in 0..cols {
        facets.push(vec![south, idx(0, j + 1), idx(0, j)]);
    }
    for i in 0..rings - 1 {
        for j in 0..cols {
            let (p00, p01) = (idx(i, j), idx(i, j + 1));
            let (p10, p11) = (idx(i + 1, j), idx(i + 1, j + 1));
            facets.push(vec![p00, p01, p11]);
            facets.push(vec![p00, p11, p10]);
        }
    }
    for j in 0..cols {
        facets.push(vec![north, idx(rings - 1, j), idx(rings - 1, j + 1)]);
    }
    facets
}

/// Volume (3D) or area (2D) enclosed by a closed facet mesh of points.
pub fn mesh_volume(dim: Dim, points: &[Vec3], facets: &[Vec<usize>]) -> f64 {
    match dim {
        Dim::Two => {
            let s: f64 = facets
                .iter()
                .map(|f| {
                    let (p, q) = (points[f[0]], points[f[1]]);
                    p.x * q.y - q.x * p.y
                })
                .sum();
            (0.5 * s).abs()
        }
        Dim::Three => {
            let s: f64 = facets
                .iter()
                .map(|f| points[f[0]].dot(&points[f[1]].cross(&points[f[2]])))
                .sum();
            (s / 6.0).abs()
        }
    }
}
