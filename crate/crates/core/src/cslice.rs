//! One C-slice: C-obstacles at a fixed shape, sweep-line free segments,
//! vertices and intra-slice edges.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HrmError, Result};
use crate::geom::{Dim, Superquadric, Vec3};
use crate::minkowski::{build_cobstacles, sweep_axis, BoundaryKind, CBoundary};
use crate::robot::{PosedPart, Shape};

pub type Interval = (f64, f64);

/// Identifies a sweep line. Level `L` lines form a grid with `2^L` times the
/// initial count per transverse axis; anchors of different levels never
/// coincide. In 2D only `iy` is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineKey {
    pub level: u8,
    pub ix: u32,
    pub iy: u32,
}

/// Global layout of sweep lines, shared by all slices. Lines run along `x`
/// in 2D and along `z` in 3D; anchors sit at cell centers of a grid over
/// the transverse extent of the arena.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub dim: Dim,
    /// Transverse bounds, `[x, y]` entries; the `x` entry is unused in 2D.
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Level-0 line counts per transverse axis (`[1, n]` in 2D).
    pub counts: [usize; 2],
    /// Segments shorter than this are dropped.
    pub min_segment: f64,
}

impl SweepGrid {
    /// Grid over the intersection of the arenas' bounding boxes.
    pub fn for_arenas(dim: Dim, arenas: &[Superquadric], counts: [usize; 2]) -> Result<Self> {
        if arenas.is_empty() {
            return Err(HrmError::InvalidArgument("at least one arena is required".into()));
        }
        let mut lo = Vec3::repeat(f64::NEG_INFINITY);
        let mut hi = Vec3::repeat(f64::INFINITY);
        for a in arenas {
            let (alo, ahi) = bounding_box(a);
            lo = lo.sup(&alo);
            hi = hi.inf(&ahi);
        }
        if (0..dim.n()).any(|k| lo[k] >= hi[k]) {
            return Err(HrmError::DegenerateGeometry("arenas do not overlap".into()));
        }
        let counts = match dim {
            Dim::Two => [1, counts[1].max(1)],
            Dim::Three => [counts[0].max(1), counts[1].max(1)],
        };
        Ok(SweepGrid {
            dim,
            lo: [lo.x, lo.y],
            hi: [hi.x, hi.y],
            counts,
            min_segment: 1e-6 * (hi - lo).norm(),
        })
    }

    fn axes(&self) -> &'static [usize] {
        match self.dim {
            Dim::Two => &[1],
            Dim::Three => &[0, 1],
        }
    }

    pub fn count(&self, level: u8, axis: usize) -> usize {
        self.counts[axis] << level
    }

    pub fn spacing(&self, level: u8, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.count(level, axis) as f64
    }

    pub fn anchor(&self, key: &LineKey) -> Vec3 {
        let mut p = Vec3::zeros();
        for &axis in self.axes() {
            let i = if axis == 0 { key.ix } else { key.iy };
            p[axis] = self.lo[axis] + (i as f64 + 0.5) * self.spacing(key.level, axis);
        }
        p
    }

    /// All keys of one level, row-major.
    pub fn keys(&self, level: u8) -> Vec<LineKey> {
        let nx = if self.dim == Dim::Two { 1 } else { self.count(level, 0) };
        let ny = self.count(level, 1);
        let mut out = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                out.push(LineKey {
                    level,
                    ix: ix as u32,
                    iy: iy as u32,
                });
            }
        }
        out
    }

    /// Neighbors of `key` within the same level with larger index.
    fn forward_neighbors(&self, key: &LineKey) -> Vec<LineKey> {
        let mut out = Vec::with_capacity(2);
        if (key.iy as usize) + 1 < self.count(key.level, 1) {
            out.push(LineKey { iy: key.iy + 1, ..*key });
        }
        if self.dim == Dim::Three && (key.ix as usize) + 1 < self.count(key.level, 0) {
            out.push(LineKey { ix: key.ix + 1, ..*key });
        }
        out
    }

    /// Keys of `level` whose anchors lie within `reach` of `p` along every
    /// transverse axis.
    fn keys_near(&self, level: u8, p: &Vec3, reach: f64) -> Vec<LineKey> {
        let range = |axis: usize| {
            let s = self.spacing(level, axis);
            let n = self.count(level, axis) as i64;
            let from = ((p[axis] - reach - self.lo[axis]) / s - 0.5).ceil() as i64;
            let to = ((p[axis] + reach - self.lo[axis]) / s - 0.5).floor() as i64;
            (from.max(0), to.min(n - 1))
        };
        let (y0, y1) = range(1);
        let (x0, x1) = if self.dim == Dim::Three { range(0) } else { (0, 0) };
        let mut out = Vec::new();
        for ix in x0..=x1 {
            for iy in y0..=y1 {
                out.push(LineKey {
                    level,
                    ix: ix as u32,
                    iy: iy as u32,
                });
            }
        }
        out
    }
}

/// World-frame axis-aligned bounding box of a superquadric.
pub fn bounding_box(s: &Superquadric) -> (Vec3, Vec3) {
    let r = s.pose.rotation_matrix();
    let mut lo = s.center();
    let mut hi = s.center();
    let samples = s.surface_points(400);
    for k in 0..s.dim.n() {
        // Support of the body along +e_k, from dense surface samples plus a
        // sagitta allowance.
        let dir = r.transpose() * Vec3::ith(k, 1.0);
        let h = samples
            .iter()
            .map(|p| p.point.dot(&dir))
            .fold(f64::NEG_INFINITY, f64::max);
        let h = h * 1.001;
        lo[k] -= h;
        hi[k] += h;
    }
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepLine {
    pub key: LineKey,
    pub anchor: Vec3,
    pub segments: Vec<Interval>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceVertex {
    /// Base-center translation.
    pub position: Vec3,
    pub line: usize,
    pub segment: usize,
}

#[derive(Clone, Debug)]
pub struct CSlice {
    pub id: usize,
    pub shape: Shape,
    pub boundaries: Arc<Vec<CBoundary>>,
    pub lines: Vec<SweepLine>,
    pub vertices: Vec<SliceVertex>,
    /// Intra-slice edges as local vertex index pairs.
    pub edges: Vec<(usize, usize)>,
    /// Vertex indices per line.
    pub line_vertices: Vec<Vec<usize>>,
    pub line_index: HashMap<LineKey, usize>,
    /// Finest level built so far.
    pub level: u8,
    /// Set when the slice could not be built (e.g. the robot does not fit).
    pub diagnostic: Option<String>,
}

/// `intersection(arenas) - union(obstacles)`, sorted and disjoint, with
/// pieces shorter than `min_len` dropped.
pub fn free_segments_on_line(arenas: &[Interval], obstacles: &[Interval], min_len: f64) -> Vec<Interval> {
    let Some(mut lo) = arenas.first().map(|a| a.0) else {
        return Vec::new();
    };
    let mut hi = arenas[0].1;
    for a in &arenas[1..] {
        lo = lo.max(a.0);
        hi = hi.min(a.1);
    }
    if lo >= hi {
        return Vec::new();
    }
    let mut obs: Vec<Interval> = obstacles.iter().filter(|o| o.1 > lo && o.0 < hi).cloned().collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cursor = lo;
    for (o0, o1) in obs {
        if o0 > cursor {
            out.push((cursor, o0.min(hi)));
        }
        cursor = cursor.max(o1);
        if cursor >= hi {
            break;
        }
    }
    if cursor < hi {
        out.push((cursor, hi));
    }
    out.retain(|s| s.1 - s.0 >= min_len);
    out
}

fn evaluate_line(boundaries: &[CBoundary], grid: &SweepGrid, key: LineKey) -> SweepLine {
    let anchor = grid.anchor(&key);
    let axis = sweep_axis(grid.dim);
    let mut arenas = Vec::new();
    let mut obstacles = Vec::new();
    for b in boundaries {
        let iv = b.line_interval_with_margin(&anchor, &axis, 0.0);
        match b.kind {
            BoundaryKind::ArenaDifference => match iv {
                Some(iv) => arenas.push(iv),
                None => {
                    return SweepLine {
                        key,
                        anchor,
                        segments: Vec::new(),
                    }
                }
            },
            BoundaryKind::ObstacleSum => obstacles.extend(iv),
        }
    }
    SweepLine {
        key,
        anchor,
        segments: free_segments_on_line(&arenas, &obstacles, grid.min_segment),
    }
}

fn line_point(anchor: &Vec3, axis: &Vec3, s: f64) -> Vec3 {
    anchor + axis * s
}

/// Whether a straight base-center motion between two points of a slice stays
/// outside every obstacle polytope.
pub fn segment_is_free(boundaries: &[CBoundary], a: &Vec3, b: &Vec3) -> bool {
    boundaries
        .iter()
        .filter(|c| c.kind == BoundaryKind::ObstacleSum)
        .all(|c| !c.segment_intersects(a, b, 0.0))
}

/// Midpoint of each segment plus enhancement vertices. `neighbors` lists
/// pairs of adjacent line indices.
pub fn generate_vertices(lines: &[SweepLine], neighbors: &[(usize, usize)], dim: Dim) -> Vec<SliceVertex> {
    let axis = sweep_axis(dim);
    // Parameter positions per (line, segment).
    let mut params: Vec<Vec<Vec<f64>>> = lines
        .iter()
        .map(|l| l.segments.iter().map(|s| vec![0.5 * (s.0 + s.1)]).collect())
        .collect();
    let enhance = |from: usize, to: usize, params: &mut Vec<Vec<Vec<f64>>>| {
        for (k, s) in lines[from].segments.iter().enumerate() {
            let mid = 0.5 * (s.0 + s.1);
            for t in &lines[to].segments {
                let (olo, ohi) = (s.0.max(t.0), s.1.min(t.1));
                if olo > ohi || (mid >= olo && mid <= ohi) {
                    continue;
                }
                let v = mid.clamp(olo, ohi);
                if !params[from][k].iter().any(|p| (p - v).abs() < 1e-12) {
                    params[from][k].push(v);
                }
            }
        }
    };
    for &(a, b) in neighbors {
        enhance(a, b, &mut params);
        enhance(b, a, &mut params);
    }
    let mut out = Vec::new();
    for (li, segs) in params.into_iter().enumerate() {
        for (si, mut ps) in segs.into_iter().enumerate() {
            ps.sort_by(f64::total_cmp);
            for p in ps {
                out.push(SliceVertex {
                    position: line_point(&lines[li].anchor, &axis, p),
                    line: li,
                    segment: si,
                });
            }
        }
    }
    out
}

impl CSlice {
    /// Build the C-boundaries for the parts at this shape and decompose the
    /// slice at `level`.
    #[allow(clippy::too_many_arguments)]
    pub fn construct(
        id: usize,
        shape: Shape,
        parts: &[PosedPart],
        obstacles: &[Superquadric],
        arenas: &[Superquadric],
        grid: &SweepGrid,
        level: u8,
        n_vertices: usize,
    ) -> Result<CSlice> {
        let pairs: Vec<_> = parts.iter().map(|p| (p.ellipsoid, p.offset)).collect();
        let mut slice = CSlice {
            id,
            shape,
            boundaries: Arc::new(Vec::new()),
            lines: Vec::new(),
            vertices: Vec::new(),
            edges: Vec::new(),
            line_vertices: Vec::new(),
            line_index: HashMap::new(),
            level,
            diagnostic: None,
        };
        match build_cobstacles(&pairs, obstacles, arenas, n_vertices) {
            Ok(b) => slice.boundaries = Arc::new(b),
            Err(e @ HrmError::ErosionDegenerate { .. }) => {
                slice.diagnostic = Some(e.to_string());
                return Ok(slice);
            }
            Err(e) => return Err(e),
        }
        slice.add_level(grid, level);
        Ok(slice)
    }

    /// Decompose the slice at `level` using the cached C-boundaries, connect
    /// the new vertices among themselves and to nearby existing vertices.
    /// Returns the index of the first new vertex and of the first new edge.
    pub fn add_level(&mut self, grid: &SweepGrid, level: u8) -> (usize, usize) {
        let first_vertex = self.vertices.len();
        let first_edge = self.edges.len();
        if self.diagnostic.is_some() {
            return (first_vertex, first_edge);
        }
        let keys = grid.keys(level);
        let boundaries = Arc::clone(&self.boundaries);
        let new_lines: Vec<SweepLine> = keys.iter().map(|&k| evaluate_line(&boundaries, grid, k)).collect();

        let first_line = self.lines.len();
        let local: HashMap<LineKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut neighbors = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            for n in grid.forward_neighbors(k) {
                neighbors.push((i, local[&n]));
            }
        }
        let mut verts = generate_vertices(&new_lines, &neighbors, grid.dim);
        for v in &mut verts {
            v.line += first_line;
        }
        for (i, l) in new_lines.into_iter().enumerate() {
            self.line_index.insert(l.key, first_line + i);
            self.lines.push(l);
            self.line_vertices.push(Vec::new());
        }
        for (i, v) in verts.iter().enumerate() {
            self.line_vertices[v.line].push(first_vertex + i);
        }
        self.vertices.extend(verts);

        // Consecutive vertices on one free segment.
        for li in first_line..self.lines.len() {
            let ids = &self.line_vertices[li];
            for w in ids.windows(2) {
                if self.vertices[w[0]].segment == self.vertices[w[1]].segment {
                    self.edges.push((w[0], w[1]));
                }
            }
        }
        // Adjacent lines of the new level.
        for &(a, b) in &neighbors {
            self.connect_lines(first_line + a, first_line + b);
        }
        // Existing vertices on nearby lines of coarser levels.
        if first_vertex > 0 {
            let reach = grid.spacing(level, 1).max(if grid.dim == Dim::Three {
                grid.spacing(level, 0)
            } else {
                0.0
            });
            for li in first_line..self.lines.len() {
                if self.line_vertices[li].is_empty() {
                    continue;
                }
                let anchor = self.lines[li].anchor;
                for old in 0..level {
                    for key in grid.keys_near(old, &anchor, reach) {
                        if let Some(&lj) = self.line_index.get(&key) {
                            self.connect_lines(li, lj);
                        }
                    }
                }
            }
        }
        self.level = self.level.max(level);
        (first_vertex, first_edge)
    }

    fn connect_lines(&mut self, a: usize, b: usize) {
        let boundaries = Arc::clone(&self.boundaries);
        for &u in &self.line_vertices[a] {
            for &v in &self.line_vertices[b] {
                if segment_is_free(&boundaries, &self.vertices[u].position, &self.vertices[v].position) {
                    self.edges.push((u, v));
                }
            }
        }
    }

    /// Vertices lying on the line with `key`.
    pub fn vertices_on(&self, key: &LineKey) -> &[usize] {
        self.line_index
            .get(key)
            .map(|&i| self.line_vertices[i].as_slice())
            .unwrap_or(&[])
    }

    pub fn is_free(&self, p: &Vec3) -> bool {
        self.diagnostic.is_none() && crate::minkowski::is_free(&self.boundaries, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_segments_subtract_obstacles() {
        assert_eq!(
            free_segments_on_line(&[(-5.0, 5.0)], &[(-1.0, 1.0)], 1e-9),
            vec![(-5.0, -1.0), (1.0, 5.0)]
        );
    }

    #[test]
    fn free_segments_intersect_arenas() {
        assert_eq!(free_segments_on_line(&[(-5.0, 5.0), (-4.0, 6.0)], &[], 1e-9), vec![(-4.0, 5.0)]);
        assert!(free_segments_on_line(&[(-5.0, -1.0), (1.0, 6.0)], &[], 1e-9).is_empty());
    }

    #[test]
    fn free_segments_drop_slivers() {
        assert_eq!(free_segments_on_line(&[(0.0, 10.0)], &[(0.0, 9.9999999)], 1e-3), vec![]);
    }

    fn line(iy: u32, segments: Vec<Interval>) -> SweepLine {
        SweepLine {
            key: LineKey { level: 0, ix: 0, iy },
            anchor: Vec3::new(0.0, iy as f64, 0.0),
            segments,
        }
    }

    #[test]
    fn midpoint_vertex() {
        let v = generate_vertices(&[line(0, vec![(1.0, 5.0)])], &[], Dim::Two);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].position.x, 3.0);
    }

    #[test]
    fn enhancement_adds_nearest_overlap_point() {
        let lines = [line(0, vec![(0.0, 10.0)]), line(1, vec![(8.0, 12.0)])];
        let v = generate_vertices(&lines, &[(0, 1)], Dim::Two);
        let on0: Vec<f64> = v.iter().filter(|v| v.line == 0).map(|v| v.position.x).collect();
        assert_eq!(on0, vec![5.0, 8.0]);
        let on1: Vec<f64> = v.iter().filter(|v| v.line == 1).map(|v| v.position.x).collect();
        assert_eq!(on1, vec![10.0]);
    }

    #[test]
    fn no_enhancement_when_midpoint_in_overlap() {
        let lines = [line(0, vec![(0.0, 10.0)]), line(1, vec![(4.0, 6.0)])];
        let v = generate_vertices(&lines, &[(0, 1)], Dim::Two);
        assert_eq!(v.iter().filter(|v| v.line == 0).count(), 1);
    }
}
