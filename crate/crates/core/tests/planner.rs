use std::f64::consts::PI;
use std::path::Path;

use hrm_core::cli::scene::{load_scene, Scene};
use hrm_core::env::Environment;
use hrm_core::geom::*;
use hrm_core::oracle::validate_path;
use hrm_core::planner::*;
use hrm_core::robot::{Configuration, Robot, Shape};
use nalgebra::{Quaternion, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(name: &str) -> Scene {
    load_scene(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)).unwrap()
}

fn config(x: f64, y: f64, theta: f64) -> Configuration {
    Configuration {
        shape: Shape::rigid(planar_rotation(theta)),
        translation: Vec3::new(x, y, 0.0),
    }
}

// Plain O(n^2) Dijkstra over an edge list.
fn dijkstra(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[s] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&v| !done[v] && dist[v].is_finite()).min_by(|&a, &b| dist[a].total_cmp(&dist[b])) else {
            break;
        };
        done[u] = true;
        for &(a, b, c) in edges {
            let w = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            dist[w] = dist[w].min(dist[u] + c);
        }
    }
    dist[t].is_finite().then_some(dist[t])
}

fn random_roadmap(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Roadmap, Vec<(usize, usize, f64)>) {
    let mut r = Roadmap::new();
    let shape = r.add_shape(Shape::rigid(UnitQuaternion::identity()));
    for _ in 0..n {
        r.add_vertex(Vec3::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), 0.0), shape, None);
    }
    let mut list = Vec::new();
    for _ in 0..m {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        // Costs never undercut the straight-line distance.
        let c = (r.vertices[a].translation - r.vertices[b].translation).norm() + rng.random_range(0.0..2.0);
        r.add_edge(a, b, c, EdgeKind::IntraSlice);
        list.push((a, b, c));
    }
    (r, list)
}

#[test]
fn search_single_edge_and_triangle() {
    let mut r = Roadmap::new();
    let s = r.add_shape(Shape::rigid(UnitQuaternion::identity()));
    let a = r.add_vertex(Vec3::zeros(), s, None);
    let b = r.add_vertex(Vec3::new(1.0, 0.0, 0.0), s, None);
    r.add_edge(a, b, 1.0, EdgeKind::IntraSlice);
    let p = graph_search(&r, a, b).unwrap();
    assert_eq!(p.vertices, vec![a, b]);
    assert_eq!(p.cost, 1.0);

    let c = r.add_vertex(Vec3::new(0.5, 0.5, 0.0), s, None);
    r.edges.clear();
    r.add_edge(a, c, 1.0, EdgeKind::IntraSlice);
    r.add_edge(c, b, 1.0, EdgeKind::IntraSlice);
    r.add_edge(a, b, 3.0, EdgeKind::IntraSlice);
    r.reindex();
    let p = graph_search(&r, a, b).unwrap();
    assert_eq!(p.vertices, vec![a, c, b]);
    assert_eq!(p.cost, 2.0);
}

#[test]
fn search_disconnected_is_none() {
    let mut r = Roadmap::new();
    let s = r.add_shape(Shape::rigid(UnitQuaternion::identity()));
    let a = r.add_vertex(Vec3::zeros(), s, None);
    let b = r.add_vertex(Vec3::new(1.0, 0.0, 0.0), s, None);
    assert!(graph_search(&r, a, b).is_none());
    assert!(graph_search(&r, a, 7).is_none());
}

#[test]
fn search_matches_dijkstra_on_large_roadmap() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let (r, list) = random_roadmap(&mut rng, 500, 1500);
    for _ in 0..20 {
        let (s, t) = (rng.random_range(0..500), rng.random_range(0..500));
        let expected = dijkstra(500, &list, s, t);
        let got = graph_search(&r, s, t).map(|p| p.cost);
        match (expected, got) {
            (None, None) => {}
            (Some(e), Some(g)) => assert!((e - g).abs() <= 1e-9 * e.max(1.0), "{e} vs {g}"),
            other => panic!("reachability differs: {other:?}"),
        }
    }
}

fn qmul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn same_rotation(a: &[f64; 4], b: &[f64; 4]) -> bool {
    let d: f64 = (0..4).map(|k| a[k] * b[k]).sum();
    (d.abs() - 1.0).abs() < 1e-9
}

#[test]
fn icosahedral_group_is_closed_and_even() {
    let g: Vec<[f64; 4]> = icosahedral_group().iter().map(|q| [q.w, q.i, q.j, q.k]).collect();
    assert_eq!(g.len(), 60);
    assert!(same_rotation(&g[0], &[1.0, 0.0, 0.0, 0.0]));
    for a in &g {
        for b in &g {
            let c = qmul(a, b);
            assert!(g.iter().any(|x| same_rotation(x, &c)), "product leaves the group");
        }
    }
    // Nearest-neighbour geodesic angles are nearly uniform.
    let nn: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(i, a)| {
            g.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| 2.0 * (0..4).map(|k| a[k] * b[k]).sum::<f64>().abs().min(1.0).acos())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = nn.iter().sum::<f64>() / nn.len() as f64;
    let sd = (nn.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / nn.len() as f64).sqrt();
    assert!(sd / mean < 0.2, "coefficient of variation {}", sd / mean);
}

#[test]
fn orientation_samples() {
    let s = sample_orientations(Dim::Two, 8);
    for (k, q) in s.iter().enumerate() {
        let expected = -PI + 2.0 * PI * k as f64 / 8.0;
        assert!(wrap_angle(planar_angle(q) - expected).abs() < 1e-12);
    }
    assert_eq!(sample_orientations(Dim::Three, 60), icosahedral_group());
    let few = sample_orientations(Dim::Three, 12);
    assert_eq!(few.len(), 12);
    for (i, a) in few.iter().enumerate() {
        for b in &few[i + 1..] {
            assert!(rotation_distance(Dim::Three, a, b) > 1e-6);
        }
    }
    let many = sample_orientations(Dim::Three, 75);
    assert_eq!(many.len(), 75);
    assert_eq!(&many[..60], &icosahedral_group()[..]);
    assert_eq!(many, sample_orientations(Dim::Three, 75));
}

#[test]
fn initial_line_formula() {
    assert_eq!(lines_along(10.0, 1.0, 2.0), 4);
    assert_eq!(lines_along(1.0, 2.0, 0.5), 1);
    let s = scene("sparse-2d.toml");
    // Arena half-height 5, largest part semi-axis 0.6, smallest obstacle semi-axis.
    let min_obs = s.env.obstacles.iter().map(|o| o.min_semi_axis()).fold(f64::INFINITY, f64::min);
    let expected = ((5.0 - 0.6) / min_obs).floor() as usize;
    assert_eq!(initial_num_lines(&s.env, &s.robot), Some([1, expected.max(1)]));
    let empty = Environment::new(Dim::Two, s.env.arenas.clone(), vec![]).unwrap();
    assert_eq!(initial_num_lines(&empty, &s.robot), None);
}

fn empty_world() -> (Environment, Robot) {
    let arena = Superquadric::planar(5.0, 5.0, 0.1, Pose::identity()).unwrap();
    let env = Environment::new(Dim::Two, vec![arena], vec![]).unwrap();
    let robot = Robot::multi_body(Ellipsoid::planar(0.4, 0.2, Pose::identity()).unwrap(), &[]).unwrap();
    (env, robot)
}

#[test]
fn empty_scene_solves_without_refinement() {
    let (env, robot) = empty_world();
    let params = PlannerParams {
        n_slice: 8,
        n_line: Some([1, 5]),
        ..PlannerParams::default()
    };
    let r = plan_hrm(&env, &robot, &config(-3.0, -3.0, 0.0), &config(3.0, 3.0, 0.0), &params).unwrap();
    let path = r.path.expect("path");
    assert_eq!(r.stats.refinement_rounds, 0);
    let list: Vec<(usize, usize, f64)> = r.roadmap.edges.iter().map(|e| (e.a, e.b, e.cost)).collect();
    let best = dijkstra(r.roadmap.vertices.len(), &list, r.endpoints[0], r.endpoints[1]).unwrap();
    assert!((best - path.cost).abs() < 1e-9);
    assert!(path.cost >= (6.0f64 * 6.0 * 2.0).sqrt() - 1e-9);
    assert!(validate_path(&path.configurations, &robot, &env, 100).is_valid());
}

#[test]
fn endpoint_on_vertex_gets_zero_cost_edge() {
    let (env, robot) = empty_world();
    let params = PlannerParams {
        n_slice: 4,
        n_line: Some([1, 5]),
        ..PlannerParams::default()
    };
    let goal = config(2.0, 2.0, -PI);
    // Slice 0 is at -pi; put the start on one of its vertices.
    let first = plan_hrm(&env, &robot, &config(0.0, 0.0, -PI), &goal, &params).unwrap();
    let v = first.slices[0].vertices[2].position;
    let r = plan_hrm(&env, &robot, &config(v.x, v.y, -PI), &goal, &params).unwrap();
    let e = r
        .roadmap
        .edges
        .iter()
        .find(|e| e.kind == EdgeKind::Endpoint && (e.a == r.endpoints[0] || e.b == r.endpoints[0]))
        .expect("start attached");
    assert!(e.cost < 1e-12, "cost {}", e.cost);
}

#[test]
fn colliding_endpoint_is_rejected() {
    let s = scene("cluttered-2d.toml");
    let inside = Configuration {
        shape: s.start.shape.clone(),
        translation: s.env.obstacles[0].center(),
    };
    assert!(plan_hrm(&s.env, &s.robot, &inside, &s.goal, &s.params).is_err());
    assert!(plan_prob_hrm(&s.env, &s.robot, &s.start, &inside, &s.params).is_err());
}

// The corridor admits base centres with y in (0.33, 0.43) at theta = 0; the
// first level whose sweep lines land in that band is the number of
// refinement rounds.
#[test]
fn narrow_passage_needs_predicted_rounds() {
    let s = scene("narrow-2d.toml");
    let counts = s.params.n_line.or_else(|| initial_num_lines(&s.env, &s.robot)).unwrap();
    let (lo, hi) = (-3.0, 3.0);
    let predicted = (0..=s.params.max_level)
        .find(|&l| {
            let n = counts[1] << l;
            let h = (hi - lo) / n as f64;
            (0..n).any(|i| {
                let y = lo + (i as f64 + 0.5) * h;
                y > 0.34 && y < 0.42
            })
        })
        .expect("some level crosses the corridor");
    assert!(predicted >= 1);
    let r = plan_hrm(&s.env, &s.robot, &s.start, &s.goal, &s.params).unwrap();
    let path = r.path.expect("path");
    assert_eq!(r.stats.refinement_rounds, predicted as usize);
    assert!(validate_path(&path.configurations, &s.robot, &s.env, 100).is_valid());
}

#[test]
fn refinement_is_monotone() {
    let s = scene("narrow-2d.toml");
    let mut last = (0, 0);
    for level in 0..=2u8 {
        let params = PlannerParams {
            max_level: level,
            ..s.params.clone()
        };
        let r = plan_hrm(&s.env, &s.robot, &s.start, &s.goal, &params).unwrap();
        assert!(r.stats.vertices >= last.0 && r.stats.edges >= last.1);
        last = (r.stats.vertices, r.stats.edges);
        if r.path.is_none() {
            assert_eq!(r.stats.reason.as_deref(), Some("sweep line limit reached"));
        }
    }
}

#[test]
fn time_limit_stops_refinement() {
    let s = scene("narrow-2d.toml");
    let params = PlannerParams {
        max_time: 1e-6,
        ..s.params.clone()
    };
    let r = plan_hrm(&s.env, &s.robot, &s.start, &s.goal, &params).unwrap();
    assert!(r.path.is_none());
    assert_eq!(r.stats.reason.as_deref(), Some("time limit reached"));
}

#[test]
fn hrm_is_deterministic() {
    let s = scene("cluttered-2d.toml");
    let a = plan_hrm(&s.env, &s.robot, &s.start, &s.goal, &s.params).unwrap();
    let b = plan_hrm(&s.env, &s.robot, &s.start, &s.goal, &s.params).unwrap();
    assert_eq!(a.roadmap, b.roadmap);
    assert_eq!(a.path, b.path);
}

#[test]
fn prob_hrm_same_seed_same_result() {
    let s = scene("narrow-2d.toml");
    let params = PlannerParams { seed: 17, ..s.params.clone() };
    let a = plan_prob_hrm(&s.env, &s.robot, &s.start, &s.goal, &params).unwrap();
    let b = plan_prob_hrm(&s.env, &s.robot, &s.start, &s.goal, &params).unwrap();
    assert_eq!(a.roadmap, b.roadmap);
    assert_eq!(a.path, b.path);
    let shapes_a: Vec<_> = a.slices.iter().map(|s| s.shape.clone()).collect();
    let shapes_b: Vec<_> = b.slices.iter().map(|s| s.shape.clone()).collect();
    assert_eq!(shapes_a, shapes_b);
}

#[test]
fn prob_hrm_rigid_sparse_and_snake() {
    for name in ["sparse-2d.toml", "snake-2d.toml"] {
        let s = scene(name);
        let r = plan_prob_hrm(&s.env, &s.robot, &s.start, &s.goal, &s.params).unwrap();
        let path = r.path.unwrap_or_else(|| panic!("{name}: {:?}", r.stats.reason));
        assert!(validate_path(&path.configurations, &s.robot, &s.env, 100).is_valid(), "{name}");
    }
}

// Start and goal orientations far apart force Prob-HRM to sample further
// slices; the result must still be valid.
#[test]
fn prob_hrm_explores_when_endpoint_slices_disagree() {
    let s = scene("narrow-2d.toml");
    let goal = Configuration {
        shape: Shape::rigid(planar_rotation(PI)),
        translation: s.goal.translation,
    };
    let params = PlannerParams { seed: 3, ..s.params.clone() };
    let r = plan_prob_hrm(&s.env, &s.robot, &s.start, &goal, &params).unwrap();
    let path = r.path.expect("path");
    assert!(r.slices.len() >= 2);
    assert!(validate_path(&path.configurations, &s.robot, &s.env, 100).is_valid());
}

#[test]
fn ablated_planner_paths_are_valid() {
    let s = scene("sparse-2d.toml");
    let params = PlannerParams {
        local_planner: LocalPlanner::Ablated,
        ..s.params.clone()
    };
    let r = plan_hrm(&s.env, &s.robot, &s.start, &s.goal, &params).unwrap();
    let path = r.path.expect("path");
    assert!(validate_path(&path.configurations, &s.robot, &s.env, 100).is_valid());
}

#[test]
fn uniform_baseline_respects_budget() {
    let s = scene("sparse-2d.toml");
    let r = plan_uniform_baseline(&s.env, &s.robot, &s.start, &s.goal, &s.params, 480, 8).unwrap();
    assert!(r.stats.vertices <= 480 + s.params.n_slice + 2);
    if let Some(p) = &r.path {
        assert!(validate_path(&p.configurations, &s.robot, &s.env, 100).is_valid());
    }
}

#[test]
fn three_dimensional_hrm() {
    let s = scene("sparse-3d.toml");
    let r = plan_hrm(&s.env, &s.robot, &s.start, &s.goal, &s.params).unwrap();
    let path = r.path.expect("path");
    assert_eq!(r.stats.slices, 60);
    assert!(validate_path(&path.configurations, &s.robot, &s.env, 100).is_valid());
    // A 3D start orientation off the sample set still attaches.
    let start = Configuration {
        shape: Shape::rigid(UnitQuaternion::from_quaternion(Quaternion::new(0.99, 0.1, 0.05, 0.0))),
        translation: s.start.translation,
    };
    let r = plan_hrm(&s.env, &s.robot, &start, &s.goal, &s.params).unwrap();
    let path = r.path.expect("path");
    assert!(validate_path(&path.configurations, &s.robot, &s.env, 100).is_valid());
}

#[test]
fn params_reject_unknown_fields_and_bad_values() {
    assert!(toml::from_str::<PlannerParams>("n_slice = 5\nbogus = 1").is_err());
    let p: PlannerParams = toml::from_str("n_slice = 5\nlocal_planner = \"ablated\"").unwrap();
    assert_eq!(p.n_slice, 5);
    assert_eq!(p.local_planner, LocalPlanner::Ablated);
    assert_eq!(p.max_level, DEFAULT_MAX_LEVEL);
    assert!(PlannerParams { n_slice: 0, ..p.clone() }.validate().is_err());
    assert!(PlannerParams { max_time: 0.0, ..p }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn search_cost_equals_dijkstra(seed in any::<u64>(), n in 2usize..60, m in 0usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, list) = random_roadmap(&mut rng, n, m);
        let got = graph_search(&r, 0, n - 1);
        let expected = dijkstra(n, &list, 0, n - 1);
        prop_assert_eq!(got.is_some(), expected.is_some());
        if let (Some(p), Some(e)) = (got, expected) {
            prop_assert!((p.cost - e).abs() <= 1e-9 * e.max(1.0));
            // The returned vertex sequence follows actual edges.
            for w in p.vertices.windows(2) {
                prop_assert!(r.neighbors(w[0]).iter().any(|&(v, _)| v == w[1]));
            }
        }
    }
}
