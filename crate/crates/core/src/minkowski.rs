//! Closed-form Minkowski sums and differences between a superquadric and an
//! ellipsoid, discretized into convex polytopes for containment queries.

use std::fmt::Write as _;

use crate::error::{HrmError, Result};
use crate::geom::{Dim, Ellipsoid, Superquadric, Vec3};

/// Default number of boundary vertices per C-boundary.
pub const DEFAULT_VERTICES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// Configurations where the part touches or penetrates an obstacle.
    ObstacleSum,
    /// Configurations keeping the part inside an arena.
    ArenaDifference,
}

/// Half-space `normal . x <= offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec3,
    pub offset: f64,
}

impl HalfSpace {
    #[inline]
    pub fn eval(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Discretized C-obstacle or C-arena expressed relative to the base-part
/// center.
///
/// `samples` are closed-form boundary points with `facets` giving their
/// connectivity (polygon edges in 2D, triangles in 3D). Queries run on the
/// H-representation in `planes`:
///
/// * obstacle sums use the tangent planes at every closed-form sample, a
///   polytope that circumscribes the exact sum;
/// * arena differences use the facets of the polytope inscribed in the arena,
///   each pulled inward by the part's support value, which is the exact
///   erosion of that inscribed polytope and lies inside the true difference.
///
/// Both choices err on the side of declaring configurations unsafe.
#[derive(Clone, Debug)]
pub struct CBoundary {
    pub kind: BoundaryKind,
    pub dim: Dim,
    pub samples: Vec<Vec3>,
    pub facets: Vec<Vec<usize>>,
    pub planes: Vec<HalfSpace>,
    pub source_part: usize,
    pub source_body: usize,
    pub offset: Vec3,
    /// Characteristic length, used to scale tolerances.
    pub scale: f64,
}

/// Tolerance factor on facet planes, relative to the boundary scale.
const CONTAINMENT_TOL: f64 = 1e-9;

fn world_normal(s1: &Superquadric, x1: &Vec3) -> Result<Vec3> {
    let g = s1.gradient(x1);
    let n = g.norm();
    if !(n.is_finite() && n >= 1e-12) {
        return Err(HrmError::DegenerateGeometry(format!(
            "superquadric gradient vanishes at {x1:?}"
        )));
    }
    Ok(s1.pose.transform_vector(&(g / n)))
}

fn check_on_surface(s1: &Superquadric, x1: &Vec3) -> Result<()> {
    let phi = s1.implicit(x1)?;
    if (phi - 1.0).abs() > 1e-6 {
        return Err(HrmError::InvalidArgument(format!(
            "point {x1:?} is not on the superquadric surface (implicit value {phi})"
        )));
    }
    Ok(())
}

/// Point of the Minkowski sum boundary generated by the surface point `x1`
/// of `s1` (body frame). Placing `e2`'s center there makes it externally
/// tangent to `s1`. The result is in the world frame.
pub fn mink_sum_point(s1: &Superquadric, e2: &Ellipsoid, x1: &Vec3) -> Result<Vec3> {
    check_on_surface(s1, x1)?;
    let n = world_normal(s1, x1)?;
    Ok(s1.pose.transform_point(x1) + e2.support_offset(&n))
}

/// Point of the eroded boundary `{p : p + e2 inside s1}` generated by `x1`.
pub fn mink_diff_point(s1: &Superquadric, e2: &Ellipsoid, x1: &Vec3) -> Result<Vec3> {
    check_on_surface(s1, x1)?;
    let n = world_normal(s1, x1)?;
    let p = s1.pose.transform_point(x1) - e2.support_offset(&n);
    // The offset must not carry the center past the opposite side.
    if s1.implicit_world(&p) > 1.0 + 1e-9 || n.dot(&(p - s1.center())) < -1e-9 * s1.bounding_radius() {
        return Err(HrmError::DegenerateGeometry(format!(
            "ellipsoid with semi-axes {:?} does not fit inside the superquadric",
            e2.axes()
        )));
    }
    Ok(p)
}

fn facet_plane(dim: Dim, pts: &[Vec3], facet: &[usize], interior: &Vec3) -> Option<HalfSpace> {
    let normal = match dim {
        Dim::Two => {
            let d = pts[facet[1]] - pts[facet[0]];
            Vec3::new(d.y, -d.x, 0.0)
        }
        Dim::Three => (pts[facet[1]] - pts[facet[0]]).cross(&(pts[facet[2]] - pts[facet[0]])),
    };
    let len = normal.norm();
    if len < 1e-14 {
        return None;
    }
    let mut normal = normal / len;
    let mut offset = normal.dot(&pts[facet[0]]);
    if normal.dot(interior) > offset {
        normal = -normal;
        offset = -offset;
    }
    Some(HalfSpace { normal, offset })
}

impl CBoundary {
    /// Discretized sum boundary of obstacle `s1` and part `e2`, shifted by
    /// `-offset`.
    pub fn obstacle_sum(
        s1: &Superquadric,
        e2: &Ellipsoid,
        offset: &Vec3,
        n_vertices: usize,
        source_part: usize,
        source_body: usize,
    ) -> Result<CBoundary> {
        let grid = s1.boundary_grid(n_vertices);
        let mut samples = Vec::with_capacity(grid.samples.len());
        let mut planes = Vec::with_capacity(grid.samples.len());
        for s in &grid.samples {
            let n = world_normal(s1, &s.point)?;
            let p = s1.pose.transform_point(&s.point) + e2.support_offset(&n) - offset;
            planes.push(HalfSpace {
                normal: n,
                offset: n.dot(&p),
            });
            samples.push(p);
        }
        Ok(CBoundary {
            kind: BoundaryKind::ObstacleSum,
            dim: s1.dim,
            samples,
            facets: grid.facets,
            planes,
            source_part,
            source_body,
            offset: *offset,
            scale: s1.bounding_radius() + e2.max_semi_axis(),
        })
    }

    /// Discretized eroded arena `s1` for part `e2`, shifted by `-offset`.
    pub fn arena_difference(
        s1: &Superquadric,
        e2: &Ellipsoid,
        offset: &Vec3,
        n_vertices: usize,
        source_part: usize,
        source_body: usize,
    ) -> Result<CBoundary> {
        let grid = s1.boundary_grid(n_vertices);
        let world: Vec<Vec3> = grid
            .samples
            .iter()
            .map(|s| s1.pose.transform_point(&s.point))
            .collect();
        let center = s1.center();
        let mut planes = Vec::with_capacity(grid.facets.len());
        for f in &grid.facets {
            if let Some(h) = facet_plane(s1.dim, &world, f, &center) {
                planes.push(HalfSpace {
                    normal: h.normal,
                    offset: h.offset - e2.support(&h.normal) - h.normal.dot(offset),
                });
            }
        }
        let degenerate = || HrmError::ErosionDegenerate {
            part: source_part,
            arena: source_body,
        };
        // Both bodies are centrally symmetric, so a nonempty erosion always
        // contains the shifted arena center.
        let scale = s1.bounding_radius();
        let probe = center - offset;
        if planes.iter().any(|h| h.eval(&probe) > -CONTAINMENT_TOL * scale) {
            return Err(degenerate());
        }
        let mut samples = Vec::with_capacity(grid.samples.len());
        for s in &grid.samples {
            let n = world_normal(s1, &s.point)?;
            samples.push(s1.pose.transform_point(&s.point) - e2.support_offset(&n) - offset);
        }
        Ok(CBoundary {
            kind: BoundaryKind::ArenaDifference,
            dim: s1.dim,
            samples,
            facets: grid.facets,
            planes,
            source_part,
            source_body,
            offset: *offset,
            scale,
        })
    }

    fn tol(&self) -> f64 {
        CONTAINMENT_TOL * self.scale
    }

    /// Inside or on the discretized boundary.
    pub fn contains(&self, p: &Vec3) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    /// Containment in the polytope with every plane moved outward by
    /// `margin` (inward when negative).
    pub fn contains_with_margin(&self, p: &Vec3, margin: f64) -> bool {
        let slack = self.tol() + margin;
        self.planes.iter().all(|h| h.eval(p) <= slack)
    }

    /// Parameter interval of `anchor + s * axis` inside the polytope
    /// (expanded by `margin`), or `None` when it misses or only grazes it.
    pub fn line_interval_with_margin(&self, anchor: &Vec3, axis: &Vec3, margin: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.clip(anchor, axis, f64::NEG_INFINITY, f64::INFINITY, margin)?;
        if hi - lo < self.tol() {
            None
        } else {
            Some((lo, hi))
        }
    }

    /// Parameter interval of the sweep line through `anchor` inside the
    /// boundary. Sweep lines run along `x` in 2D and `z` in 3D.
    pub fn line_interval(&self, anchor: &Vec3) -> Option<(f64, f64)> {
        self.line_interval_with_margin(anchor, &sweep_axis(self.dim), 0.0)
    }

    /// Whether the closed segment `a`-`b` touches the polytope expanded by
    /// `margin`.
    pub fn segment_intersects(&self, a: &Vec3, b: &Vec3, margin: f64) -> bool {
        self.clip(a, &(b - a), 0.0, 1.0, margin).is_some()
    }

    fn clip(&self, origin: &Vec3, dir: &Vec3, mut lo: f64, mut hi: f64, margin: f64) -> Option<(f64, f64)> {
        let slack = self.tol() + margin;
        for h in &self.planes {
            let nd = h.normal.dot(dir);
            let rhs = h.offset + slack - h.normal.dot(origin);
            if nd.abs() < 1e-15 {
                if rhs < 0.0 {
                    return None;
                }
                continue;
            }
            let t = rhs / nd;
            if nd > 0.0 {
                hi = hi.min(t);
            } else {
                lo = lo.max(t);
            }
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }

    /// Indexed-facet text mesh: a header, the counts, vertex lines and facet
    /// lines.
    pub fn to_off(&self) -> String {
        let mut out = String::from("OFF\n");
        let _ = writeln!(out, "{} {} 0", self.samples.len(), self.facets.len());
        for p in &self.samples {
            let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
        }
        for f in &self.facets {
            let idx: Vec<String> = f.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{} {}", f.len(), idx.join(" "));
        }
        out
    }
}

/// Direction of sweep lines.
pub fn sweep_axis(dim: Dim) -> Vec3 {
    match dim {
        Dim::Two => Vec3::x(),
        Dim::Three => Vec3::z(),
    }
}

/// C-boundaries for every (obstacle, part) and (arena, part) pair. Obstacle
/// sums come first, ordered by obstacle then part, followed by the arena
/// differences in the same order.
pub fn build_cobstacles(
    parts: &[(Ellipsoid, Vec3)],
    obstacles: &[Superquadric],
    arenas: &[Superquadric],
    n_vertices: usize,
) -> Result<Vec<CBoundary>> {
    let mut out = Vec::with_capacity(parts.len() * (obstacles.len() + arenas.len()));
    for (j, ob) in obstacles.iter().enumerate() {
        for (i, (e, t)) in parts.iter().enumerate() {
            out.push(CBoundary::obstacle_sum(ob, e, t, n_vertices, i, j)?);
        }
    }
    for (j, ar) in arenas.iter().enumerate() {
        for (i, (e, t)) in parts.iter().enumerate() {
            out.push(CBoundary::arena_difference(ar, e, t, n_vertices, i, j)?);
        }
    }
    Ok(out)
}

/// Whether `p` is in free space with respect to a set of C-boundaries:
/// outside every obstacle sum and inside every arena difference.
pub fn is_free(boundaries: &[CBoundary], p: &Vec3) -> bool {
    boundaries.iter().all(|b| match b.kind {
        BoundaryKind::ObstacleSum => !b.contains(p),
        BoundaryKind::ArenaDifference => b.contains(p),
    })
}
