//! Result files: path CSV, roadmap JSON, stats and 2D SVG renders.

use std::fmt::Write as _;

use nalgebra::{Quaternion, UnitQuaternion};

use crate::cslice::{bounding_box, CSlice};
use crate::env::Environment;
use crate::error::{HrmError, Result};
use crate::geom::{planar_angle, planar_rotation, Dim, Vec3};
use crate::minkowski::sweep_axis;
use crate::planner::{Path, Roadmap};
use crate::robot::{Configuration, Shape};

/// Column names of `path.csv`: translation, rotation (an angle in 2D, a
/// `w, x, y, z` quaternion in 3D), then one column per joint.
pub fn path_header(dim: Dim, n_joints: usize) -> Vec<String> {
    let mut h: Vec<String> = match dim {
        Dim::Two => ["x", "y", "theta"].iter().map(|s| s.to_string()).collect(),
        Dim::Three => ["x", "y", "z", "qw", "qx", "qy", "qz"].iter().map(|s| s.to_string()).collect(),
    };
    h.extend((0..n_joints).map(|k| format!("joint{k}")));
    h
}

fn config_row(dim: Dim, c: &Configuration) -> Vec<String> {
    let t = &c.translation;
    let q = &c.shape.base_rotation;
    let mut row: Vec<f64> = match dim {
        Dim::Two => vec![t.x, t.y, planar_angle(q)],
        Dim::Three => vec![t.x, t.y, t.z, q.w, q.i, q.j, q.k],
    };
    row.extend(&c.shape.joints);
    row.iter().map(|v| v.to_string()).collect()
}

pub fn path_csv(dim: Dim, path: &[Configuration]) -> Result<String> {
    let n_joints = path.first().map_or(0, |c| c.shape.joints.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| HrmError::Io(e.to_string());
    w.write_record(path_header(dim, n_joints)).map_err(err)?;
    for c in path {
        w.write_record(config_row(dim, c)).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| HrmError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HrmError::Io(e.to_string()))
}

pub fn parse_path_csv(dim: Dim, text: &str) -> Result<Vec<Configuration>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let fixed = match dim {
        Dim::Two => 3,
        Dim::Three => 7,
    };
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| HrmError::Parse(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| HrmError::Parse(format!("row {}: {e}", k + 1)))?;
        if vals.len() < fixed {
            return Err(HrmError::Parse(format!("row {}: expected at least {fixed} columns", k + 1)));
        }
        let (translation, base_rotation) = match dim {
            Dim::Two => (Vec3::new(vals[0], vals[1], 0.0), planar_rotation(vals[2])),
            Dim::Three => (
                Vec3::new(vals[0], vals[1], vals[2]),
                UnitQuaternion::from_quaternion(Quaternion::new(vals[3], vals[4], vals[5], vals[6])),
            ),
        };
        out.push(Configuration {
            shape: Shape {
                base_rotation,
                joints: vals[fixed..].to_vec(),
            },
            translation,
        });
    }
    Ok(out)
}

pub fn roadmap_json(roadmap: &Roadmap) -> Result<String> {
    serde_json::to_string_pretty(roadmap).map_err(|e| HrmError::Io(e.to_string()))
}

struct View {
    lo: Vec3,
    hi: Vec3,
}

impl View {
    fn new(env: &Environment) -> View {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for a in &env.arenas {
            let (alo, ahi) = bounding_box(a);
            lo = lo.inf(&alo);
            hi = hi.sup(&ahi);
        }
        View { lo, hi }
    }

    fn open(&self, out: &mut String) {
        let (w, h) = (self.hi.x - self.lo.x, self.hi.y - self.lo.y);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
            self.lo.x,
            -self.hi.y,
            w,
            h,
            (800.0 * h / w).round()
        );
        let _ = writeln!(out, r#"<g transform="scale(1,-1)" stroke-width="{}">"#, 0.003 * w.max(h));
    }
}

fn points_attr(pts: impl Iterator<Item = Vec3>) -> String {
    pts.map(|p| format!("{},{}", p.x, p.y)).collect::<Vec<_>>().join(" ")
}

/// SVG of one 2D slice: C-obstacle and C-arena boundaries as polygons, one
/// polyline per free segment, one circle per vertex and one line per
/// intra-slice edge.
pub fn slice_svg(env: &Environment, slice: &CSlice) -> String {
    let view = View::new(env);
    let mut out = String::new();
    view.open(&mut out);
    let r = 0.004 * (view.hi - view.lo).norm();
    for b in slice.boundaries.iter() {
        let _ = writeln!(
            out,
            r#"<polygon class="cboundary" fill="none" stroke="gray" points="{}"/>"#,
            points_attr(b.samples.iter().copied())
        );
    }
    let axis = sweep_axis(Dim::Two);
    for line in &slice.lines {
        for s in &line.segments {
            let _ = writeln!(
                out,
                r#"<polyline class="segment" fill="none" stroke="steelblue" points="{}"/>"#,
                points_attr([line.anchor + axis * s.0, line.anchor + axis * s.1].into_iter())
            );
        }
    }
    for &(a, b) in &slice.edges {
        let (p, q) = (slice.vertices[a].position, slice.vertices[b].position);
        let _ = writeln!(
            out,
            r#"<line class="edge" stroke="orange" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            p.x, p.y, q.x, q.y
        );
    }
    for v in &slice.vertices {
        let _ = writeln!(
            out,
            r#"<circle class="vertex" fill="black" cx="{}" cy="{}" r="{r}"/>"#,
            v.position.x, v.position.y
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// SVG of the roadmap projected onto the plane, with the workspace bodies
/// and the path, if any.
pub fn roadmap_svg(env: &Environment, roadmap: &Roadmap, path: Option<&Path>) -> String {
    let view = View::new(env);
    let mut out = String::new();
    view.open(&mut out);
    let r = 0.003 * (view.hi - view.lo).norm();
    for (class, bodies) in [("arena", &env.arenas), ("obstacle", &env.obstacles)] {
        for s in bodies {
            let pts = s.surface_points(120).into_iter().map(|p| s.pose.transform_point(&p.point));
            let fill = if class == "arena" { "none" } else { "lightgray" };
            let _ = writeln!(out, r#"<polygon class="{class}" fill="{fill}" stroke="black" points="{}"/>"#, points_attr(pts));
        }
    }
    for e in &roadmap.edges {
        let (p, q) = (roadmap.vertices[e.a].translation, roadmap.vertices[e.b].translation);
        let _ = writeln!(
            out,
            r#"<line class="edge" stroke="orange" stroke-opacity="0.4" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            p.x, p.y, q.x, q.y
        );
    }
    for v in &roadmap.vertices {
        let _ = writeln!(
            out,
            r#"<circle class="vertex" fill="black" cx="{}" cy="{}" r="{r}"/>"#,
            v.translation.x, v.translation.y
        );
    }
    if let Some(p) = path {
        let d: Vec<String> = p
            .configurations
            .iter()
            .enumerate()
            .map(|(k, c)| format!("{}{},{}", if k == 0 { "M" } else { "L" }, c.translation.x, c.translation.y))
            .collect();
        let _ = writeln!(out, r#"<path class="route" fill="none" stroke="red" d="{}"/>"#, d.join(" "));
    }
    out.push_str("</g>\n</svg>\n");
    out
}
