//! Cross-slice connections validated against C-boundaries of tightly-fitted
//! ellipsoids (the bridge C-slice).

use nalgebra::UnitQuaternion;

use crate::cslice::CSlice;
use crate::enclosure::tfe;
use crate::error::Result;
use crate::geom::{pose_interpolate, rotation_interpolate, wrap_angle, Dim, Ellipsoid, Pose, Superquadric, Vec3};
use crate::minkowski::{build_cobstacles, BoundaryKind, CBoundary};
use crate::robot::{shape_distance, Robot, Shape};

/// Sub-samples per interpolation step used to bound how far part centers
/// stray from the straight chords between steps.
const SUBSTEPS: usize = 16;
/// Allowance on the sampled deviation for the unsampled remainder.
const DEVIATION_SLACK: f64 = 1.25;

/// Default number of interpolation steps for a rotational gap.
pub fn default_n_point(distance: f64) -> usize {
    ((distance / 0.1).ceil() as usize + 1).max(2)
}

/// Edge cost: base translation distance plus `lambda` times the shape
/// distance.
pub fn edge_cost(dim: Dim, a: (&Shape, &Vec3), b: (&Shape, &Vec3), lambda: f64) -> f64 {
    (b.1 - a.1).norm() + lambda * shape_distance(dim, a.0, b.0)
}

/// Slice closest to slice `i` in shape distance; ties go to the lowest id.
pub fn nearest_slice(dim: Dim, i: usize, shapes: &[Shape]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, s) in shapes.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = shape_distance(dim, &shapes[i], s);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best.map(|b| b.0)
}

/// Shapes along the transition from `a` to `b`: geodesic base rotation and
/// linearly interpolated (wrapped) joints.
pub fn interpolate_shapes(a: &Shape, b: &Shape, n: usize) -> Vec<Shape> {
    let n = n.max(2);
    let rots = rotation_interpolate(&a.base_rotation, &b.base_rotation, n);
    rots.into_iter()
        .enumerate()
        .map(|(k, base_rotation)| {
            let tau = k as f64 / (n - 1) as f64;
            let joints = a
                .joints
                .iter()
                .zip(&b.joints)
                .map(|(x, y)| {
                    if k == n - 1 {
                        *y
                    } else {
                        wrap_angle(x + tau * wrap_angle(y - x))
                    }
                })
                .collect();
            Shape {
                base_rotation,
                joints,
            }
        })
        .collect()
}

/// Auxiliary slice for one pair of shapes.
#[derive(Clone, Debug)]
pub struct BridgeSlice {
    pub slice_pair: (usize, usize),
    pub dim: Dim,
    pub n_point: usize,
    pub tfes: Vec<Ellipsoid>,
    /// C-boundaries per part, built around each TFE's own center.
    pub cboundaries: Vec<Vec<CBoundary>>,
    pub interp_rotations: Vec<UnitQuaternion<f64>>,
    pub interp_shapes: Vec<Shape>,
    /// Part-center offsets from the base center, `[step][part]`.
    offsets: Vec<Vec<Vec3>>,
    /// Same on the sub-sampled sequence.
    sub_offsets: Vec<Vec<Vec3>>,
    /// Bound on how far any point of a part leaves the TFE between two
    /// consecutive steps due to rotation, `[step][part]`.
    rot_margin: Vec<Vec<f64>>,
}

impl BridgeSlice {
    pub fn build(
        robot: &Robot,
        from: (usize, &Shape),
        to: (usize, &Shape),
        obstacles: &[Superquadric],
        arenas: &[Superquadric],
        n_point: usize,
        n_vertices: usize,
    ) -> Result<BridgeSlice> {
        let n_point = n_point.max(2);
        let shapes = interpolate_shapes(from.1, to.1, n_point);
        let n_sub = SUBSTEPS * (n_point - 1) + 1;
        let sub_shapes = interpolate_shapes(from.1, to.1, n_sub);

        let mut offsets = Vec::with_capacity(n_point);
        let mut part_rots: Vec<Vec<UnitQuaternion<f64>>> = vec![Vec::with_capacity(n_point); robot.num_parts()];
        let mut part_axes = Vec::new();
        for s in &shapes {
            let fk = robot.forward_kinematics(s)?;
            offsets.push(fk.iter().map(|p| p.offset).collect::<Vec<_>>());
            for p in &fk {
                part_rots[p.index].push(*p.ellipsoid.rotation());
            }
            if part_axes.is_empty() {
                part_axes = fk.iter().map(|p| p.ellipsoid).collect();
            }
        }
        let mut sub_offsets = Vec::with_capacity(n_sub);
        for s in &sub_shapes {
            sub_offsets.push(robot.forward_kinematics(s)?.iter().map(|p| p.offset).collect::<Vec<_>>());
        }

        let tfes = part_axes
            .iter()
            .zip(&part_rots)
            .map(|(e, rots)| tfe(&e.with_center(Vec3::zeros()), rots))
            .collect::<Result<Vec<_>>>()?;

        let mut cboundaries = vec![Vec::new(); tfes.len()];
        for (k, t) in tfes.iter().enumerate() {
            let mut b = build_cobstacles(&[(*t, Vec3::zeros())], obstacles, arenas, n_vertices)?;
            for c in &mut b {
                c.source_part = k;
            }
            cboundaries[k] = b;
        }

        let chains: Vec<Vec<usize>> = (0..robot.num_parts()).map(|k| robot.chain_joints(k)).collect();
        let rigid = robot.is_rigid();
        let mut rot_margin = Vec::with_capacity(n_point - 1);
        for w in shapes.windows(2) {
            let base = w[0].base_rotation.angle_to(&w[1].base_rotation);
            let row = part_axes
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let rho = e.max_semi_axis();
                    if rigid {
                        // The TFE already covers the arc between steps.
                        0.0
                    } else {
                        let joints: f64 = chains[k].iter().map(|&j| wrap_angle(w[1].joints[j] - w[0].joints[j]).abs()).sum();
                        // Path length is at most rho * total angle; a curve
                        // stays within half its length of its chord.
                        0.5 * rho * (base + joints)
                    }
                })
                .collect();
            rot_margin.push(row);
        }

        Ok(BridgeSlice {
            slice_pair: (from.0, to.0),
            dim: robot.dim,
            n_point,
            tfes,
            cboundaries,
            interp_rotations: shapes.iter().map(|s| s.base_rotation).collect(),
            interp_shapes: shapes,
            offsets,
            sub_offsets,
            rot_margin,
        })
    }

    fn point_free(&self, part: usize, p: &Vec3, margin: f64) -> bool {
        self.cboundaries[part].iter().all(|b| match b.kind {
            BoundaryKind::ObstacleSum => !b.contains_with_margin(p, margin),
            BoundaryKind::ArenaDifference => b.contains_with_margin(p, -margin),
        })
    }

    fn chord_free(&self, part: usize, a: &Vec3, b: &Vec3, margin: f64) -> bool {
        self.cboundaries[part]
            .iter()
            .filter(|c| c.kind == BoundaryKind::ObstacleSum)
            .all(|c| !c.segment_intersects(a, b, margin))
    }

    /// Whether the motion between base translations `t1` (at the first
    /// shape) and `t2` (at the last shape) is safe.
    #[allow(clippy::needless_range_loop)]
    pub fn is_transition_valid(&self, t1: &Vec3, t2: &Vec3) -> bool {
        let g1 = Pose::new(self.interp_rotations[0], *t1);
        let g2 = Pose::new(self.interp_rotations[self.n_point - 1], *t2);
        let steps = pose_interpolate(&g1, &g2, self.n_point).poses;
        let n_sub = SUBSTEPS * (self.n_point - 1) + 1;
        let sub = pose_interpolate(&g1, &g2, n_sub).poses;
        let parts = self.tfes.len();

        let center = |s: usize, k: usize| steps[s].translation + self.offsets[s][k];
        let mut margins = vec![vec![0.0; parts]; self.n_point - 1];
        for s in 0..self.n_point - 1 {
            for k in 0..parts {
                let (a, b) = (center(s, k), center(s + 1, k));
                let chord = b - a;
                let len2 = chord.norm_squared();
                let mut dev: f64 = 0.0;
                for i in 1..SUBSTEPS {
                    let q = sub[s * SUBSTEPS + i].translation + self.sub_offsets[s * SUBSTEPS + i][k];
                    let t = if len2 > 0.0 { ((q - a).dot(&chord) / len2).clamp(0.0, 1.0) } else { 0.0 };
                    dev = dev.max((q - (a + chord * t)).norm());
                }
                margins[s][k] = DEVIATION_SLACK * dev + self.rot_margin[s][k];
            }
        }

        for s in 0..self.n_point {
            for k in 0..parts {
                let m_prev = if s > 0 { margins[s - 1][k] } else { 0.0 };
                let m_next = if s + 1 < self.n_point { margins[s][k] } else { 0.0 };
                if !self.point_free(k, &center(s, k), m_prev.max(m_next)) {
                    return false;
                }
                if s + 1 < self.n_point && !self.chord_free(k, &center(s, k), &center(s + 1, k), margins[s][k]) {
                    return false;
                }
            }
        }
        true
    }
}

/// A validated cross-slice edge between local vertex `from` of the first
/// slice and `to` of the second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeEdge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
}

/// Connect vertices of `a` to vertices on the same sweep line of `b`.
#[allow(clippy::too_many_arguments)]
pub fn connect_adjacent_slice(
    a: &CSlice,
    b: &CSlice,
    robot: &Robot,
    obstacles: &[Superquadric],
    arenas: &[Superquadric],
    n_point: Option<usize>,
    n_vertices: usize,
    lambda: f64,
) -> Result<Vec<BridgeEdge>> {
    if a.diagnostic.is_some() || b.diagnostic.is_some() {
        return Ok(Vec::new());
    }
    let n = n_point.unwrap_or_else(|| default_n_point(shape_distance(robot.dim, &a.shape, &b.shape)));
    let bridge = match BridgeSlice::build(robot, (a.id, &a.shape), (b.id, &b.shape), obstacles, arenas, n, n_vertices) {
        Ok(br) => br,
        Err(crate::error::HrmError::ErosionDegenerate { .. }) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(connect_with_bridge(&bridge, a, b, robot.dim, lambda, None))
}

/// Same-line connections validated by a prebuilt bridge. With `level` set,
/// only vertices on lines of that refinement level are considered.
pub fn connect_with_bridge(
    bridge: &BridgeSlice,
    a: &CSlice,
    b: &CSlice,
    dim: Dim,
    lambda: f64,
    level: Option<u8>,
) -> Vec<BridgeEdge> {
    let mut out = Vec::new();
    for (u, vu) in a.vertices.iter().enumerate() {
        let key = a.lines[vu.line].key;
        if level.is_some_and(|l| l != key.level) {
            continue;
        }
        for &v in b.vertices_on(&key) {
            let pv = b.vertices[v].position;
            if bridge.is_transition_valid(&vu.position, &pv) {
                out.push(BridgeEdge {
                    from: u,
                    to: v,
                    cost: edge_cost(dim, (&a.shape, &vu.position), (&b.shape, &pv), lambda),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::planar_rotation;

    fn planar(theta_deg: f64) -> Shape {
        Shape::rigid(planar_rotation(theta_deg.to_radians()))
    }

    #[test]
    fn nearest_slice_by_angle() {
        let shapes = [planar(0.0), planar(10.0), planar(170.0)];
        assert_eq!(nearest_slice(Dim::Two, 0, &shapes), Some(1));
        let shapes = [planar(170.0), planar(0.0), planar(-170.0)];
        assert_eq!(nearest_slice(Dim::Two, 0, &shapes), Some(2));
    }

    #[test]
    fn nearest_slice_ties_go_low() {
        let shapes = [planar(0.0), planar(10.0), planar(-10.0)];
        assert_eq!(nearest_slice(Dim::Two, 0, &shapes), Some(1));
    }

    #[test]
    fn n_point_scales_with_gap() {
        assert_eq!(default_n_point(0.0), 2);
        assert_eq!(default_n_point(0.25), 4);
    }

    #[test]
    fn interpolated_shapes_hit_endpoints() {
        let a = planar(0.0).with_joints(vec![3.0]);
        let b = planar(90.0).with_joints(vec![-3.0]);
        let s = interpolate_shapes(&a, &b, 5);
        assert_eq!(s[0], a);
        assert_eq!(s[4], b);
        // Joint takes the short way through pi.
        assert!(s[2].joints[0].abs() > 3.0);
    }
}
