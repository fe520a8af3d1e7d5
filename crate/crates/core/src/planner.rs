//! Roadmap construction (HRM and Prob-HRM), refinement, endpoint attachment
//! and graph search.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::time::Instant;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{connect_with_bridge, default_n_point, nearest_slice, BridgeEdge, BridgeSlice};
use crate::cslice::{bounding_box, segment_is_free, CSlice, SweepGrid};
use crate::env::Environment;
use crate::error::{HrmError, Result};
use crate::geom::{canonical_quaternion, planar_rotation, rotation_distance, Dim, Vec3};
use crate::minkowski::{build_cobstacles, is_free, DEFAULT_VERTICES};
use crate::oracle::{ablated_connect_with, direct_check_steps, interpolate_configurations, CollisionOracle, DEFAULT_SURFACE};
use crate::robot::{random_rotation, sample_shape, shape_distance, Configuration, Robot, Shape};

pub const DEFAULT_MAX_TIME: f64 = 60.0;
/// Refinement stops once lines per axis reach `2^DEFAULT_MAX_LEVEL` times
/// the initial count.
pub const DEFAULT_MAX_LEVEL: u8 = 6;
pub const DEFAULT_N_LINE: usize = 10;
pub const DEFAULT_ENDPOINT_SLICES: usize = 3;
/// Prob-HRM refines the roadmap after this many new slices.
pub const SLICES_PER_REFINEMENT: usize = 60;
/// Candidate vertices tried per slice and attachment round.
const ENDPOINT_TRIES: usize = 64;
/// Seed for the extra rotations appended beyond the icosahedral set.
const ORIENTATION_SEED: u64 = 0x5eed;

/// How cross-slice transitions are validated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalPlanner {
    /// Point queries against C-boundaries of tightly-fitted ellipsoids.
    #[default]
    Bridge,
    /// Collision-check every interpolated configuration with the oracle.
    Ablated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    /// Number of orientation samples (HRM).
    pub n_slice: usize,
    /// Initial sweep lines per transverse axis; derived from the scene when
    /// absent.
    pub n_line: Option<[usize; 2]>,
    /// Interpolation steps per transition; scaled with the rotational gap
    /// when absent.
    pub n_point: Option<usize>,
    /// Seconds.
    pub max_time: f64,
    /// Cap on refinement rounds.
    pub max_level: u8,
    pub seed: u64,
    /// Boundary vertices per C-obstacle.
    pub n_vertices: usize,
    pub local_planner: LocalPlanner,
    /// Slices an endpoint tries to attach to.
    pub endpoint_slices: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            n_slice: 60,
            n_line: None,
            n_point: None,
            max_time: DEFAULT_MAX_TIME,
            max_level: DEFAULT_MAX_LEVEL,
            seed: 0,
            n_vertices: DEFAULT_VERTICES,
            local_planner: LocalPlanner::Bridge,
            endpoint_slices: DEFAULT_ENDPOINT_SLICES,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HrmError::InvalidArgument(m.into()));
        if self.n_slice == 0 {
            return bad("n_slice must be at least 1");
        }
        if self.n_line.is_some_and(|n| n.contains(&0)) {
            return bad("n_line entries must be at least 1");
        }
        if self.n_point == Some(0) {
            return bad("n_point must be at least 1");
        }
        if self.max_time.is_nan() || self.max_time <= 0.0 {
            return bad("max_time must be positive");
        }
        if self.n_vertices < 3 || self.endpoint_slices == 0 {
            return bad("n_vertices must be at least 3 and endpoint_slices at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    IntraSlice,
    Bridge,
    Endpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapVertex {
    pub translation: Vec3,
    /// Index into [`Roadmap::shapes`].
    pub shape: usize,
    pub slice: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapEdge {
    pub a: usize,
    pub b: usize,
    pub cost: f64,
    pub kind: EdgeKind,
}

/// Undirected graph of configurations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Roadmap {
    pub shapes: Vec<Shape>,
    pub vertices: Vec<RoadmapVertex>,
    pub edges: Vec<RoadmapEdge>,
    /// Global vertex ids per slice, indexed by slice-local vertex id.
    pub slice_vertices: Vec<Vec<usize>>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Roadmap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_shape(&mut self, shape: Shape) -> usize {
        self.shapes.push(shape);
        self.shapes.len() - 1
    }

    pub fn add_vertex(&mut self, translation: Vec3, shape: usize, slice: Option<usize>) -> usize {
        let id = self.vertices.len();
        self.vertices.push(RoadmapVertex { translation, shape, slice });
        self.adjacency.push(Vec::new());
        if let Some(s) = slice {
            if self.slice_vertices.len() <= s {
                self.slice_vertices.resize(s + 1, Vec::new());
            }
            self.slice_vertices[s].push(id);
        }
        id
    }

    pub fn add_edge(&mut self, a: usize, b: usize, cost: f64, kind: EdgeKind) {
        assert!(a < self.vertices.len() && b < self.vertices.len(), "edge endpoints must exist");
        assert!(cost >= 0.0, "edge cost must be non-negative");
        let id = self.edges.len();
        self.edges.push(RoadmapEdge { a, b, cost, kind });
        self.adjacency[a].push((b, id));
        if a != b {
            self.adjacency[b].push((a, id));
        }
    }

    /// `(neighbor, edge id)` pairs of `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn configuration(&self, v: usize) -> Configuration {
        let vert = &self.vertices[v];
        Configuration {
            shape: self.shapes[vert.shape].clone(),
            translation: vert.translation,
        }
    }

    /// Rebuild adjacency after deserialization.
    pub fn reindex(&mut self) {
        self.adjacency = vec![Vec::new(); self.vertices.len()];
        for (id, e) in self.edges.iter().enumerate() {
            self.adjacency[e.a].push((e.b, id));
            if e.a != e.b {
                self.adjacency[e.b].push((e.a, id));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub vertices: Vec<usize>,
    pub configurations: Vec<Configuration>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Open {
    f: f64,
    v: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* with the Euclidean distance between base translations as heuristic.
pub fn graph_search(roadmap: &Roadmap, start: usize, goal: usize) -> Option<Path> {
    let n = roadmap.vertices.len();
    if start >= n || goal >= n {
        return None;
    }
    let target = roadmap.vertices[goal].translation;
    let h = |v: usize| (roadmap.vertices[v].translation - target).norm();
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[start] = 0.0;
    open.push(Open { f: h(start), v: start });
    while let Some(Open { v, .. }) = open.pop() {
        if closed[v] {
            continue;
        }
        if v == goal {
            break;
        }
        closed[v] = true;
        for &(w, e) in roadmap.neighbors(v) {
            let cand = g[v] + roadmap.edges[e].cost;
            if cand < g[w] {
                g[w] = cand;
                parent[w] = Some((v, e));
                open.push(Open { f: cand + h(w), v: w });
            }
        }
    }
    if !g[goal].is_finite() {
        return None;
    }
    let mut vertices = vec![goal];
    let mut edges = Vec::new();
    let mut v = goal;
    while let Some((p, e)) = parent[v] {
        vertices.push(p);
        edges.push(e);
        v = p;
    }
    vertices.reverse();
    edges.reverse();
    Some(Path {
        configurations: vertices.iter().map(|&v| roadmap.configuration(v)).collect(),
        vertices,
        cost: edges.iter().map(|&e| roadmap.edges[e].cost).sum(),
    })
}

/// The 60 rotations of the icosahedral group as canonical unit quaternions,
/// in a fixed order.
pub fn icosahedral_group() -> Vec<UnitQuaternion<f64>> {
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let mut raw: Vec<[f64; 4]> = Vec::new();
    for k in 0..4 {
        let mut q = [0.0; 4];
        q[k] = 1.0;
        raw.push(q);
    }
    for s in 0..16 {
        raw.push(std::array::from_fn(|k| if s >> k & 1 == 1 { -0.5 } else { 0.5 }));
    }
    // Even permutations of (0, 1, phi, 1/phi) / 2 with all sign choices.
    let base = [0.0, 0.5, 0.5 * phi, 0.5 / phi];
    let even = [
        [0, 1, 2, 3],
        [0, 2, 3, 1],
        [0, 3, 1, 2],
        [1, 0, 3, 2],
        [1, 2, 0, 3],
        [1, 3, 2, 0],
        [2, 0, 1, 3],
        [2, 1, 3, 0],
        [2, 3, 0, 1],
        [3, 0, 2, 1],
        [3, 1, 0, 2],
        [3, 2, 1, 0],
    ];
    for p in even {
        for s in 0..8 {
            let signs = [1.0, if s & 1 == 1 { -1.0 } else { 1.0 }, if s & 2 == 2 { -1.0 } else { 1.0 }, if s & 4 == 4 { -1.0 } else { 1.0 }];
            raw.push(std::array::from_fn(|k| base[p[k]] * signs[p[k]]));
        }
    }
    let mut out: Vec<UnitQuaternion<f64>> = Vec::new();
    for q in raw {
        let u = canonical_quaternion(UnitQuaternion::new_unchecked(Quaternion::new(q[0], q[1], q[2], q[3])));
        if !out.iter().any(|o| rotation_distance(Dim::Three, o, &u) < 1e-9) {
            out.push(u);
        }
    }
    out.sort_by(|a, b| {
        let (ca, cb) = (a.coords, b.coords);
        // Order by rotation angle, then lexicographically.
        cb[3]
            .total_cmp(&ca[3])
            .then(ca[0].total_cmp(&cb[0]))
            .then(ca[1].total_cmp(&cb[1]))
            .then(ca[2].total_cmp(&cb[2]))
    });
    out
}

/// Orientation samples: evenly spaced angles from `-pi` in 2D; in 3D the
/// icosahedral group, thinned by farthest-point selection below 60 and
/// extended with uniform random rotations above.
pub fn sample_orientations(dim: Dim, n_slice: usize) -> Vec<UnitQuaternion<f64>> {
    let n = n_slice.max(1);
    match dim {
        Dim::Two => (0..n)
            .map(|k| planar_rotation(-std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect(),
        Dim::Three => {
            let group = icosahedral_group();
            if n >= group.len() {
                let mut rng = ChaCha8Rng::seed_from_u64(ORIENTATION_SEED);
                let mut out = group;
                while out.len() < n {
                    out.push(random_rotation(Dim::Three, &mut rng));
                }
                return out;
            }
            let mut chosen = vec![0usize];
            let mut dist: Vec<f64> = group.iter().map(|q| rotation_distance(dim, &group[0], q)).collect();
            while chosen.len() < n {
                let mut best = 0;
                for k in 0..group.len() {
                    if dist[k] > dist[best] {
                        best = k;
                    }
                }
                chosen.push(best);
                for k in 0..group.len() {
                    dist[k] = dist[k].min(rotation_distance(dim, &group[best], &group[k]));
                }
            }
            chosen.into_iter().map(|k| group[k]).collect()
        }
    }
}

/// Lines along one direction: `floor((a_dir - max_part) / min_obstacle)`,
/// at least one.
pub fn lines_along(a_dir: f64, max_part: f64, min_obstacle: f64) -> usize {
    let n = ((a_dir - max_part) / min_obstacle).floor();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Initial line counts from the arena half-extents, the largest robot
/// semi-axis and the smallest obstacle semi-axis. `None` without obstacles.
pub fn initial_num_lines(env: &Environment, robot: &Robot) -> Option<[usize; 2]> {
    let min_obs = env.obstacles.iter().map(|o| o.min_semi_axis()).reduce(f64::min)?;
    let (lo, hi) = arena_box(env);
    let max_part = robot.max_semi_axis();
    let along = |k: usize| lines_along(0.5 * (hi[k] - lo[k]), max_part, min_obs);
    Some(match env.dim {
        Dim::Two => [1, along(1)],
        Dim::Three => [along(0), along(1)],
    })
}

fn arena_box(env: &Environment) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::NEG_INFINITY);
    let mut hi = Vec3::repeat(f64::INFINITY);
    for a in &env.arenas {
        let (alo, ahi) = bounding_box(a);
        lo = lo.sup(&alo);
        hi = hi.inf(&ahi);
    }
    if env.dim == Dim::Two {
        lo.z = 0.0;
        hi.z = 0.0;
    }
    (lo, hi)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub graph_time: f64,
    pub search_time: f64,
    pub total_time: f64,
    pub slices: usize,
    pub vertices: usize,
    pub edges: usize,
    pub bridge_edges: usize,
    pub refinement_rounds: usize,
    /// Why planning stopped without a path.
    pub reason: Option<String>,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub roadmap: Roadmap,
    pub path: Option<Path>,
    pub stats: PlanStats,
    /// Start and goal vertex ids in the roadmap.
    pub endpoints: [usize; 2],
    /// Slices as built; empty for the sampling baseline.
    pub slices: Vec<CSlice>,
}

struct EndpointLink {
    slice: usize,
    bridge: Option<BridgeSlice>,
    tried: HashSet<usize>,
}

struct Endpoint {
    vertex: usize,
    config: Configuration,
    links: Vec<EndpointLink>,
}

/// State shared by the planners: roadmap, endpoints and the transition
/// validator.
struct Core<'a> {
    env: &'a Environment,
    robot: &'a Robot,
    params: &'a PlannerParams,
    lambda: f64,
    oracle: Option<CollisionOracle>,
    roadmap: Roadmap,
    endpoints: Vec<Endpoint>,
    started: Instant,
    search_time: f64,
}

impl<'a> Core<'a> {
    fn new(env: &'a Environment, robot: &'a Robot, params: &'a PlannerParams, start: &Configuration, goal: &Configuration) -> Result<Self> {
        params.validate()?;
        if robot.dim != env.dim {
            return Err(HrmError::InvalidArgument("robot and scene dimensions differ".into()));
        }
        let started = Instant::now();
        let checker = CollisionOracle::for_environment(env, DEFAULT_SURFACE);
        let mut roadmap = Roadmap::new();
        let mut endpoints = Vec::new();
        for (name, c) in [("start", start), ("goal", goal)] {
            let shape = robot.normalize_shape(&c.shape)?;
            let config = Configuration {
                shape,
                translation: c.translation,
            };
            if checker.config_collides(robot, &config) {
                return Err(HrmError::InvalidConfiguration(format!("{name} configuration is in collision")));
            }
            let s = roadmap.add_shape(config.shape.clone());
            endpoints.push(Endpoint {
                vertex: roadmap.add_vertex(config.translation, s, None),
                config,
                links: Vec::new(),
            });
        }
        Ok(Core {
            env,
            robot,
            params,
            lambda: env.characteristic_radius(),
            oracle: (params.local_planner == LocalPlanner::Ablated).then_some(checker),
            roadmap,
            endpoints,
            started,
            search_time: 0.0,
        })
    }

    fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn timed_out(&self) -> bool {
        self.elapsed() >= self.params.max_time
    }

    fn n_point(&self, a: &Shape, b: &Shape) -> usize {
        self.params
            .n_point
            .unwrap_or_else(|| default_n_point(shape_distance(self.robot.dim, a, b)))
            .max(2)
    }

    fn build_bridge(&self, a: (usize, &Shape), b: (usize, &Shape)) -> Result<Option<BridgeSlice>> {
        if self.params.local_planner != LocalPlanner::Bridge {
            return Ok(None);
        }
        let n = self.n_point(a.1, b.1);
        match BridgeSlice::build(self.robot, a, b, &self.env.obstacles, &self.env.arenas, n, self.params.n_vertices) {
            Ok(br) => Ok(Some(br)),
            Err(HrmError::ErosionDegenerate { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Validate a single transition between two configurations.
    fn transition_ok(&self, bridge: Option<&BridgeSlice>, from: &Configuration, to: &Configuration) -> bool {
        match (&self.oracle, bridge) {
            (Some(oracle), _) => {
                let n = direct_check_steps(self.robot, from, to, self.n_point(&from.shape, &to.shape));
                interpolate_configurations(from, to, n)
                    .iter()
                    .all(|c| !oracle.config_collides(self.robot, c))
            }
            (None, Some(b)) => b.is_transition_valid(&from.translation, &to.translation),
            (None, None) => false,
        }
    }

    fn edge_cost(&self, a: &Configuration, b: &Configuration) -> f64 {
        (b.translation - a.translation).norm() + self.lambda * shape_distance(self.robot.dim, &a.shape, &b.shape)
    }

    /// Try to connect each endpoint to its nearest slices.
    fn attach_endpoints(&mut self, slice_shapes: &[Shape], usable: &[bool]) -> Result<()> {
        for e in 0..self.endpoints.len() {
            let shape = self.endpoints[e].config.shape.clone();
            let mut order: Vec<usize> = (0..slice_shapes.len()).filter(|&s| usable[s]).collect();
            order.sort_by(|&x, &y| {
                shape_distance(self.robot.dim, &shape, &slice_shapes[x])
                    .total_cmp(&shape_distance(self.robot.dim, &shape, &slice_shapes[y]))
                    .then(x.cmp(&y))
            });
            order.truncate(self.params.endpoint_slices);
            for s in order {
                let link = match self.endpoints[e].links.iter().position(|l| l.slice == s) {
                    Some(k) => k,
                    None => {
                        let bridge = self.build_bridge((usize::MAX, &shape), (s, &slice_shapes[s]))?;
                        self.endpoints[e].links.push(EndpointLink {
                            slice: s,
                            bridge,
                            tried: HashSet::new(),
                        });
                        self.endpoints[e].links.len() - 1
                    }
                };
                self.attach_to_slice(e, link);
            }
        }
        Ok(())
    }

    fn attach_to_slice(&mut self, e: usize, link: usize) {
        let ep = &self.endpoints[e];
        let s = ep.links[link].slice;
        let Some(ids) = self.roadmap.slice_vertices.get(s) else {
            return;
        };
        let t = ep.config.translation;
        let mut cand: Vec<usize> = ids.iter().copied().filter(|v| !ep.links[link].tried.contains(v)).collect();
        cand.sort_by(|&a, &b| {
            (self.roadmap.vertices[a].translation - t)
                .norm_squared()
                .total_cmp(&(self.roadmap.vertices[b].translation - t).norm_squared())
                .then(a.cmp(&b))
        });
        cand.truncate(ENDPOINT_TRIES);
        let mut found = None;
        let mut tried = Vec::new();
        for v in cand {
            tried.push(v);
            let to = self.roadmap.configuration(v);
            if self.transition_ok(ep.links[link].bridge.as_ref(), &ep.config, &to) {
                found = Some((v, self.edge_cost(&ep.config, &to)));
                break;
            }
        }
        let vertex = ep.vertex;
        self.endpoints[e].links[link].tried.extend(tried);
        if let Some((v, cost)) = found {
            self.roadmap.add_edge(vertex, v, cost, EdgeKind::Endpoint);
        }
    }

    fn search(&mut self) -> Option<Path> {
        let t = Instant::now();
        let path = graph_search(&self.roadmap, self.endpoints[0].vertex, self.endpoints[1].vertex);
        self.search_time += t.elapsed().as_secs_f64();
        path
    }

    fn finish(self, path: Option<Path>, slice_list: Vec<CSlice>, slices: usize, rounds: usize, reason: Option<String>) -> PlanResult {
        let total = self.elapsed();
        let stats = PlanStats {
            graph_time: total - self.search_time,
            search_time: self.search_time,
            total_time: total,
            slices,
            vertices: self.roadmap.vertices.len(),
            edges: self.roadmap.edges.len(),
            bridge_edges: self.roadmap.edges.iter().filter(|e| e.kind == EdgeKind::Bridge).count(),
            refinement_rounds: rounds,
            reason: if path.is_some() { None } else { reason },
        };
        PlanResult {
            endpoints: [self.endpoints[0].vertex, self.endpoints[1].vertex],
            roadmap: self.roadmap,
            path,
            stats,
            slices: slice_list,
        }
    }
}

/// Slices plus the bookkeeping that maps them into the roadmap.
struct SliceSet {
    grid: SweepGrid,
    slices: Vec<CSlice>,
    pairs: Vec<(usize, usize)>,
    bridges: Vec<Option<BridgeSlice>>,
    /// Roadmap shape index per slice.
    shape_ids: Vec<usize>,
}

impl SliceSet {
    fn shapes(&self) -> Vec<Shape> {
        self.slices.iter().map(|s| s.shape.clone()).collect()
    }

    fn usable(&self) -> Vec<bool> {
        self.slices.iter().map(|s| s.diagnostic.is_none()).collect()
    }

    /// Copy vertices and intra-slice edges from `first_vertex` and
    /// `first_edge` on into the roadmap.
    fn sync(&mut self, core: &mut Core, i: usize, first_vertex: usize, first_edge: usize) {
        let slice = &self.slices[i];
        if core.roadmap.slice_vertices.len() <= i {
            core.roadmap.slice_vertices.resize(i + 1, Vec::new());
        }
        if self.shape_ids.len() <= i {
            self.shape_ids.resize(i + 1, usize::MAX);
        }
        if self.shape_ids[i] == usize::MAX {
            self.shape_ids[i] = core.roadmap.add_shape(slice.shape.clone());
        }
        let shape = self.shape_ids[i];
        for v in &slice.vertices[first_vertex..] {
            core.roadmap.add_vertex(v.position, shape, Some(i));
        }
        for &(a, b) in &slice.edges[first_edge..] {
            let ids = &core.roadmap.slice_vertices[i];
            let (ga, gb) = (ids[a], ids[b]);
            let cost = (slice.vertices[b].position - slice.vertices[a].position).norm();
            core.roadmap.add_edge(ga, gb, cost, EdgeKind::IntraSlice);
        }
    }

    fn pair_edges(&self, core: &Core, p: usize, level: Option<u8>) -> Vec<BridgeEdge> {
        let (i, j) = self.pairs[p];
        let (a, b) = (&self.slices[i], &self.slices[j]);
        if a.diagnostic.is_some() || b.diagnostic.is_some() {
            return Vec::new();
        }
        match &core.oracle {
            Some(oracle) => ablated_connect_with(oracle, a, b, core.robot, core.n_point(&a.shape, &b.shape), core.lambda, level),
            None => match &self.bridges[p] {
                Some(br) => connect_with_bridge(br, a, b, core.robot.dim, core.lambda, level),
                None => Vec::new(),
            },
        }
    }

    fn connect(&self, core: &mut Core, pairs: &[usize], level: Option<u8>) {
        let results: Vec<Vec<BridgeEdge>> = pairs.par_iter().map(|&p| self.pair_edges(core, p, level)).collect();
        for (&p, edges) in pairs.iter().zip(results) {
            let (i, j) = self.pairs[p];
            for e in edges {
                let (ga, gb) = (core.roadmap.slice_vertices[i][e.from], core.roadmap.slice_vertices[j][e.to]);
                core.roadmap.add_edge(ga, gb, e.cost, EdgeKind::Bridge);
            }
        }
    }

    fn add_pairs(&mut self, core: &Core, new: &[(usize, usize)]) -> Result<Vec<usize>> {
        let built: Vec<Result<Option<BridgeSlice>>> = new
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&self.slices[i], &self.slices[j]);
                if a.diagnostic.is_some() || b.diagnostic.is_some() {
                    return Ok(None);
                }
                core.build_bridge((i, &a.shape), (j, &b.shape))
            })
            .collect();
        let mut ids = Vec::new();
        for (pair, br) in new.iter().zip(built) {
            ids.push(self.pairs.len());
            self.pairs.push(*pair);
            self.bridges.push(br?);
        }
        Ok(ids)
    }

    /// Refine slice `i` to `level`, connect it to already refined partners
    /// and copy the result into the roadmap.
    fn refine_slice(&mut self, core: &mut Core, i: usize, level: u8) {
        let (fv, fe) = self.slices[i].add_level(&self.grid, level);
        self.sync(core, i, fv, fe);
        let ready: Vec<usize> = (0..self.pairs.len())
            .filter(|&p| {
                let (a, b) = self.pairs[p];
                (a == i || b == i) && self.slices[a].level >= level && self.slices[b].level >= level
            })
            .collect();
        self.connect(core, &ready, Some(level));
    }
}

fn grid_for(env: &Environment, robot: &Robot, params: &PlannerParams) -> Result<SweepGrid> {
    let counts = params
        .n_line
        .or_else(|| initial_num_lines(env, robot))
        .unwrap_or([DEFAULT_N_LINE; 2]);
    SweepGrid::for_arenas(env.dim, &env.arenas, counts)
}

fn build_slice(core: &Core, grid: &SweepGrid, id: usize, shape: Shape, upto: u8) -> Result<CSlice> {
    let parts = core.robot.forward_kinematics(&shape)?;
    let mut s = CSlice::construct(
        id,
        shape,
        &parts,
        &core.env.obstacles,
        &core.env.arenas,
        grid,
        0,
        core.params.n_vertices,
    )?;
    for l in 1..=upto {
        s.add_level(grid, l);
    }
    Ok(s)
}

/// Highway RoadMap: a fixed set of orientation slices, each connected to its
/// nearest neighbor, refined by doubling sweep lines until a path is found,
/// time runs out or the line cap is reached.
pub fn plan_hrm(
    env: &Environment,
    robot: &Robot,
    start: &Configuration,
    goal: &Configuration,
    params: &PlannerParams,
) -> Result<PlanResult> {
    let mut core = Core::new(env, robot, params, start, goal)?;
    let grid = grid_for(env, robot, params)?;
    let joints = robot.home_shape().joints;
    let shapes: Vec<Shape> = sample_orientations(env.dim, params.n_slice)
        .into_iter()
        .map(|r| Shape::rigid(r).with_joints(joints.clone()))
        .collect();
    let slices = {
        let core = &core;
        shapes
            .par_iter()
            .enumerate()
            .map(|(i, s)| build_slice(core, &grid, i, s.clone(), 0))
            .collect::<Result<Vec<_>>>()?
    };
    let mut set = SliceSet {
        grid,
        slices,
        pairs: Vec::new(),
        bridges: Vec::new(),
        shape_ids: Vec::new(),
    };
    for i in 0..set.slices.len() {
        set.sync(&mut core, i, 0, 0);
    }
    let mut pairs = BTreeSet::new();
    if shapes.len() > 1 {
        for i in 0..shapes.len() {
            let j = nearest_slice(env.dim, i, &shapes).expect("two or more slices");
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let pairs: Vec<_> = pairs.into_iter().collect();
    let ids = set.add_pairs(&core, &pairs)?;
    set.connect(&mut core, &ids, None);
    let (shapes, usable) = (set.shapes(), set.usable());
    core.attach_endpoints(&shapes, &usable)?;
    if let Some(path) = core.search() {
        let n = set.slices.len();
        return Ok(core.finish(Some(path), set.slices, n, 0, None));
    }

    let mut rounds = 0;
    for level in 1..=params.max_level {
        rounds = level as usize;
        for i in 0..set.slices.len() {
            if core.timed_out() {
                let n = set.slices.len();
                return Ok(core.finish(None, set.slices, n, rounds, Some("time limit reached".into())));
            }
            set.refine_slice(&mut core, i, level);
            core.attach_endpoints(&shapes, &usable)?;
            if let Some(path) = core.search() {
                let n = set.slices.len();
                return Ok(core.finish(Some(path), set.slices, n, rounds, None));
            }
        }
    }
    let n = set.slices.len();
    Ok(core.finish(None, set.slices, n, rounds, Some("sweep line limit reached".into())))
}

/// Probabilistic HRM: slices at randomly sampled shapes, each connected to
/// its nearest existing slice, with a refinement round after every
/// [`SLICES_PER_REFINEMENT`] new slices. The first two slices use the start
/// and goal shapes.
pub fn plan_prob_hrm(
    env: &Environment,
    robot: &Robot,
    start: &Configuration,
    goal: &Configuration,
    params: &PlannerParams,
) -> Result<PlanResult> {
    let mut core = Core::new(env, robot, params, start, goal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut set = SliceSet {
        grid: grid_for(env, robot, params)?,
        slices: Vec::new(),
        pairs: Vec::new(),
        bridges: Vec::new(),
        shape_ids: Vec::new(),
    };
    let seeds = [core.endpoints[0].config.shape.clone(), core.endpoints[1].config.shape.clone()];
    let mut level = 0u8;
    let mut rounds = 0;
    loop {
        if core.timed_out() {
            let n = set.slices.len();
            return Ok(core.finish(None, set.slices, n, rounds, Some("time limit reached".into())));
        }
        let id = set.slices.len();
        let shape = match seeds.get(id) {
            Some(s) => s.clone(),
            None => robot.normalize_shape(&sample_shape(robot, &mut rng))?,
        };
        let slice = build_slice(&core, &set.grid, id, shape, level)?;
        set.slices.push(slice);
        set.sync(&mut core, id, 0, 0);
        if id > 0 {
            let shapes = set.shapes();
            let j = nearest_slice(env.dim, id, &shapes).expect("two or more slices");
            let ids = set.add_pairs(&core, &[(j, id)])?;
            set.connect(&mut core, &ids, None);
        }
        let (shapes, usable) = (set.shapes(), set.usable());
        core.attach_endpoints(&shapes, &usable)?;
        if let Some(path) = core.search() {
            let n = set.slices.len();
            return Ok(core.finish(Some(path), set.slices, n, rounds, None));
        }
        if set.slices.len().is_multiple_of(SLICES_PER_REFINEMENT) && level < params.max_level {
            level += 1;
            rounds += 1;
            for i in 0..set.slices.len() {
                if core.timed_out() {
                    break;
                }
                set.refine_slice(&mut core, i, level);
            }
            core.attach_endpoints(&shapes, &usable)?;
            if let Some(path) = core.search() {
                let n = set.slices.len();
                return Ok(core.finish(Some(path), set.slices, n, rounds, None));
            }
        }
    }
}

/// Baseline that replaces sweep-line vertices with uniformly sampled free
/// translations: the same orientation slices, slice adjacency and transition
/// validation as HRM, with about `budget` vertices in total. Intra-slice
/// edges join each vertex to its `k` nearest neighbors when the straight
/// motion is free.
pub fn plan_uniform_baseline(
    env: &Environment,
    robot: &Robot,
    start: &Configuration,
    goal: &Configuration,
    params: &PlannerParams,
    budget: usize,
    k: usize,
) -> Result<PlanResult> {
    use rand::Rng;
    let mut core = Core::new(env, robot, params, start, goal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let joints = robot.home_shape().joints;
    let shapes: Vec<Shape> = sample_orientations(env.dim, params.n_slice)
        .into_iter()
        .map(|r| Shape::rigid(r).with_joints(joints.clone()))
        .collect();
    let per_slice = budget.div_ceil(shapes.len()).max(1);
    let (lo, hi) = arena_box(env);
    let n = env.dim.n();

    let mut usable = Vec::with_capacity(shapes.len());
    let mut boundaries = Vec::with_capacity(shapes.len());
    for (i, shape) in shapes.iter().enumerate() {
        let parts: Vec<_> = robot.forward_kinematics(shape)?.iter().map(|p| (p.ellipsoid, p.offset)).collect();
        let b = match build_cobstacles(&parts, &env.obstacles, &env.arenas, params.n_vertices) {
            Ok(b) => b,
            Err(HrmError::ErosionDegenerate { .. }) => {
                usable.push(false);
                boundaries.push(Vec::new());
                core.roadmap.slice_vertices.resize(i + 1, Vec::new());
                continue;
            }
            Err(e) => return Err(e),
        };
        let sid = core.roadmap.add_shape(shape.clone());
        let mut pts: Vec<Vec3> = Vec::new();
        let mut attempts = 0;
        while pts.len() < per_slice && attempts < 100 * per_slice {
            attempts += 1;
            let mut p = Vec3::zeros();
            for d in 0..n {
                p[d] = rng.random_range(lo[d]..hi[d]);
            }
            if is_free(&b, &p) {
                pts.push(p);
            }
        }
        core.roadmap.slice_vertices.resize(i + 1, Vec::new());
        for p in &pts {
            core.roadmap.add_vertex(*p, sid, Some(i));
        }
        let ids = core.roadmap.slice_vertices[i].clone();
        for (a, pa) in pts.iter().enumerate() {
            let mut near: Vec<usize> = (0..pts.len()).filter(|&c| c != a).collect();
            near.sort_by(|&x, &y| (pts[x] - pa).norm_squared().total_cmp(&(pts[y] - pa).norm_squared()));
            for &c in near.iter().take(k) {
                if a < c && segment_is_free(&b, pa, &pts[c]) {
                    core.roadmap.add_edge(ids[a], ids[c], (pts[c] - pa).norm(), EdgeKind::IntraSlice);
                }
            }
        }
        usable.push(true);
        boundaries.push(b);
    }

    let mut pairs = BTreeSet::new();
    for i in 0..shapes.len() {
        if let Some(j) = nearest_slice(env.dim, i, &shapes) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    for (i, j) in pairs {
        if !usable[i] || !usable[j] {
            continue;
        }
        let bridge = core.build_bridge((i, &shapes[i]), (j, &shapes[j]))?;
        let (ai, bj) = (core.roadmap.slice_vertices[i].clone(), core.roadmap.slice_vertices[j].clone());
        for &u in &ai {
            let cu = core.roadmap.configuration(u);
            let mut near = bj.clone();
            near.sort_by(|&x, &y| {
                (core.roadmap.vertices[x].translation - cu.translation)
                    .norm_squared()
                    .total_cmp(&(core.roadmap.vertices[y].translation - cu.translation).norm_squared())
            });
            for &v in near.iter().take(k) {
                let cv = core.roadmap.configuration(v);
                if core.transition_ok(bridge.as_ref(), &cu, &cv) {
                    let cost = core.edge_cost(&cu, &cv);
                    core.roadmap.add_edge(u, v, cost, EdgeKind::Bridge);
                }
            }
        }
    }
    core.attach_endpoints(&shapes, &usable)?;
    let path = core.search();
    let slices = shapes.len();
    Ok(core.finish(path, Vec::new(), slices, 0, Some("no path in sampled roadmap".into())))
}
