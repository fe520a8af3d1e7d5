//! Enclosing ellipsoids (MVEE, MVCE, tightly-fitted ellipsoids) and
//! superquadric fitting.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{HrmError, Result};
use crate::geom::{
    planar_angle, planar_rotation, rotation_interpolate, Dim, Ellipsoid, Pose, Superquadric, Vec3,
    EXPONENT_MAX, EXPONENT_MIN,
};

const MVEE_TOL: f64 = 1e-6;
const MVEE_MAX_ITER: usize = 10_000;

/// Minimum-volume enclosing ellipsoid of a point set (Khachiyan's
/// algorithm). Only the first `dim` coordinates of each point are used.
pub fn mvee(dim: Dim, points: &[Vec3]) -> Result<Ellipsoid> {
    let d = dim.n();
    let n = points.len();
    let rank_err = HrmError::RankDeficient { points: n, dim: d };
    if n < d + 1 {
        return Err(rank_err);
    }
    let p = DMatrix::from_fn(d, n, |i, j| points[j][i]);

    let mean = p.column_mean();
    let centered = DMatrix::from_fn(d, n, |i, j| p[(i, j)] - mean[i]);
    let sv = centered.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax <= 0.0 || sv.min() <= 1e-10 * smax {
        return Err(rank_err);
    }

    // Lifted points q_j = (p_j, 1).
    let q = DMatrix::from_fn(d + 1, n, |i, j| if i < d { p[(i, j)] } else { 1.0 });
    let mut u = DVector::from_element(n, 1.0 / n as f64);
    let lifted = (d + 1) as f64;
    for _ in 0..MVEE_MAX_ITER {
        let x = &q * DMatrix::from_diagonal(&u) * q.transpose();
        let Some(xi) = x.try_inverse() else {
            return Err(rank_err);
        };
        let mut best = (0, f64::NEG_INFINITY);
        for j in 0..n {
            let col = q.column(j);
            let m = (col.transpose() * &xi * col)[(0, 0)];
            if m > best.1 {
                best = (j, m);
            }
        }
        let (j, m) = best;
        if (m - lifted) / lifted < MVEE_TOL {
            break;
        }
        let step = (m - lifted) / (lifted * (m - 1.0));
        u *= 1.0 - step;
        u[j] += step;
    }

    let c = &p * &u;
    let cov = &p * DMatrix::from_diagonal(&u) * p.transpose() - &c * c.transpose();
    let Some(cov_inv) = cov.try_inverse() else {
        return Err(rank_err);
    };
    let mut a = cov_inv / d as f64;
    // Rescale so the farthest point lies exactly on the boundary.
    let worst = (0..n)
        .map(|j| {
            let v = p.column(j) - &c;
            (v.transpose() * &a * &v)[(0, 0)]
        })
        .fold(0.0, f64::max);
    a /= worst;
    let mut center = Vec3::zeros();
    for i in 0..d {
        center[i] = c[i];
    }
    Ellipsoid::from_inverse_square(dim, center, &a)
}

/// Minimum-volume ellipsoid concentric with `ea` that encloses both `ea`
/// and `eb` (taken as concentric with `ea`).
pub fn mvce(ea: &Ellipsoid, eb: &Ellipsoid) -> Result<Ellipsoid> {
    let dim = ea.dim;
    let d = dim.n();
    let rb = eb.pose.rotation_matrix().view((0, 0), (d, d)).into_owned();
    let r = eb.min_semi_axis();
    let diag = |f: &dyn Fn(usize) -> f64| {
        DMatrix::from_fn(d, d, |i, j| if i == j { f(i) } else { 0.0 })
    };
    let t = &rb * diag(&|i| r / eb.axes()[i]) * rb.transpose();
    let t_inv = &rb * diag(&|i| eb.axes()[i] / r) * rb.transpose();

    let q = &t_inv * ea.inverse_square_matrix() * &t_inv;
    let q = (&q + q.transpose()) * 0.5;
    let eig = q.symmetric_eigen();
    let mut rot = eig.eigenvectors.clone();
    if rot.determinant() < 0.0 {
        for i in 0..d {
            rot[(i, d - 1)] = -rot[(i, d - 1)];
        }
    }
    let grown = diag(&|i| {
        let a = 1.0 / eig.eigenvalues[i].sqrt();
        a.max(r).powi(-2)
    });
    let m = &t * &rot * grown * rot.transpose() * &t;
    Ellipsoid::from_inverse_square(dim, ea.center(), &m)
}

/// Tightly-fitted ellipsoid: iterated MVCE of `part` (shape only) over a
/// sequence of orientations, centered at `part`'s center.
///
/// The part is assumed to rotate along the geodesic between consecutive
/// orientations. A point of the part then strays from the chord between its
/// sampled positions by at most the arc's sagitta, and the result is scaled
/// up by that amount so it also contains every intermediate orientation.
pub fn tfe(part: &Ellipsoid, rotations: &[UnitQuaternion<f64>]) -> Result<Ellipsoid> {
    let at = |q: &UnitQuaternion<f64>| part.with_pose(Pose::new(*q, part.center()));
    let Some(first) = rotations.first() else {
        return Ok(*part);
    };
    let mut out = at(first);
    for q in &rotations[1..] {
        out = mvce(&out, &at(q))?;
    }
    let step = rotations.windows(2).map(|w| w[0].angle_to(&w[1])).fold(0.0, f64::max);
    let sagitta = part.max_semi_axis() * (1.0 - (0.5 * step).cos());
    if sagitta > 0.0 {
        let scale = 1.0 + sagitta / out.min_semi_axis();
        out = Ellipsoid::new(out.dim, out.semi_axes() * scale, out.pose)?;
    }
    Ok(out)
}

/// TFEs for the parts of a rigid robot rotating from `ri` to `rj` in
/// `n_point` geodesic steps. `parts_at_ri` are posed for base rotation `ri`.
pub fn compute_tfe(
    parts_at_ri: &[Ellipsoid],
    ri: &UnitQuaternion<f64>,
    rj: &UnitQuaternion<f64>,
    n_point: usize,
) -> Result<Vec<Ellipsoid>> {
    let steps = rotation_interpolate(ri, rj, n_point);
    let ri_inv = ri.inverse();
    parts_at_ri
        .iter()
        .map(|part| {
            let local = ri_inv * part.rotation();
            let rots: Vec<_> = steps.iter().map(|r| r * local).collect();
            tfe(part, &rots)
        })
        .collect()
}

/// Relative volume error between a fitted body and ground truth.
pub fn kappa_volume(fit_volume: f64, true_volume: f64) -> f64 {
    (fit_volume - true_volume).abs() / true_volume
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub body: Superquadric,
    /// Mean `|Phi^eps - 1|` over the input points.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted iteration, starting with the
    /// initial iterate.
    pub objective_history: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative objective decrease below which the solver stops.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 300,
            tolerance: 1e-12,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn exponent_of(z: f64) -> f64 {
    EXPONENT_MIN + (EXPONENT_MAX - EXPONENT_MIN) * sigmoid(z)
}

fn exponent_param(eps: f64) -> f64 {
    let s = ((eps - EXPONENT_MIN) / (EXPONENT_MAX - EXPONENT_MIN)).clamp(1e-6, 1.0 - 1e-6);
    (s / (1.0 - s)).ln()
}

/// Unconstrained parameter vector:
/// 2D `[ln a, ln b, z_eps, theta, tx, ty]`,
/// 3D `[ln a, ln b, ln c, z_eps1, z_eps2, rx, ry, rz, tx, ty, tz]`.
fn decode(dim: Dim, x: &DVector<f64>) -> Option<Superquadric> {
    match dim {
        Dim::Two => {
            let e = exponent_of(x[2]);
            let pose = Pose::planar(x[4], x[5], x[3]);
            Superquadric::new(dim, Vec3::new(x[0].exp(), x[1].exp(), 0.0), [e, e], pose).ok()
        }
        Dim::Three => {
            let rot = UnitQuaternion::from_scaled_axis(Vector3::new(x[5], x[6], x[7]));
            let pose = Pose::new(rot, Vec3::new(x[8], x[9], x[10]));
            Superquadric::new(
                dim,
                Vec3::new(x[0].exp(), x[1].exp(), x[2].exp()),
                [exponent_of(x[3]), exponent_of(x[4])],
                pose,
            )
            .ok()
        }
    }
}

/// The same ellipsoid with its body axes relabeled cyclically by `k`.
fn cycle_axes(e: &Ellipsoid, k: usize) -> Result<Ellipsoid> {
    let idx = [k % 3, (k + 1) % 3, (k + 2) % 3];
    let r = e.pose.rotation_matrix();
    let a = e.semi_axes();
    let cols: Vec<Vector3<f64>> = idx.iter().map(|&i| r.column(i).into()).collect();
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&cols)));
    Ellipsoid::new(e.dim, Vec3::new(a[idx[0]], a[idx[1]], a[idx[2]]), Pose::new(rot, e.center()))
}

fn encode(dim: Dim, e: &Ellipsoid, eps: f64) -> DVector<f64> {
    let a = e.semi_axes();
    let t = e.center();
    match dim {
        Dim::Two => DVector::from_vec(vec![
            a.x.ln(),
            a.y.ln(),
            exponent_param(eps),
            planar_angle(e.rotation()),
            t.x,
            t.y,
        ]),
        Dim::Three => {
            let r = e.rotation().scaled_axis();
            DVector::from_vec(vec![
                a.x.ln(),
                a.y.ln(),
                a.z.ln(),
                exponent_param(eps),
                exponent_param(eps),
                r.x,
                r.y,
                r.z,
                t.x,
                t.y,
                t.z,
            ])
        }
    }
}

/// `Phi^eps1 - 1` per point, weighted by the square root of the axis product.
/// Parameters that do not decode to a valid body give infinite residuals.
fn residuals(sq: Option<Superquadric>, points: &[Vec3]) -> DVector<f64> {
    let Some(sq) = sq else {
        return DVector::from_element(points.len(), f64::INFINITY);
    };
    let weight = sq.axes().iter().product::<f64>().sqrt();
    let e1 = sq.exponents()[0];
    DVector::from_iterator(
        points.len(),
        points.iter().map(|p| weight * (sq.implicit_world(p).powf(e1) - 1.0)),
    )
}

fn mean_abs_residual(sq: &Superquadric, points: &[Vec3]) -> f64 {
    let e1 = sq.exponents()[0];
    points
        .iter()
        .map(|p| (sq.implicit_world(p).powf(e1) - 1.0).abs())
        .sum::<f64>()
        / points.len() as f64
}

struct Solve {
    x: DVector<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn levenberg_marquardt(dim: Dim, points: &[Vec3], x0: DVector<f64>, opts: &FitOptions) -> Solve {
    let cost_of = |x: &DVector<f64>| residuals(decode(dim, x), points).norm_squared();
    let mut x = x0;
    let mut r = residuals(decode(dim, &x), points);
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let np = x.len();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut jac = DMatrix::zeros(points.len(), np);
        for k in 0..np {
            let h = 1e-6 * x[k].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (residuals(decode(dim, &xp), points) - residuals(decode(dim, &xm), points))
                / (2.0 * h);
            let col = col.map(|v| if v.is_finite() { v } else { 0.0 });
            jac.set_column(k, &col);
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() < 1e-14 {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for k in 0..np {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &x + &step;
            let trial_cost = cost_of(&trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(1e-300);
                x = trial;
                cost = trial_cost;
                r = residuals(decode(dim, &x), points);
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel < opts.tolerance || step.norm() < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted || cost < 1e-24 {
            converged = true;
        }
        if converged {
            break;
        }
    }
    Solve {
        x,
        cost,
        iterations,
        converged,
        history,
    }
}

/// Fit a superellipse (2D) or superquadric (3D) to boundary points by
/// damped least squares, initialized from the points' MVEE.
pub fn fit(dim: Dim, points: &[Vec3], opts: &FitOptions) -> Result<FitResult> {
    let min_points = match dim {
        Dim::Two => 6,
        Dim::Three => 11,
    };
    if points.len() < min_points {
        return Err(HrmError::InvalidArgument(format!(
            "fitting needs at least {min_points} points, got {}",
            points.len()
        )));
    }
    let init = mvee(dim, points)?;
    // In 3D the body z axis is special (it carries eps1), so every principal
    // axis of the MVEE is tried in that role.
    let starts = match dim {
        Dim::Two => vec![init],
        Dim::Three => (0..3).map(|k| cycle_axes(&init, k)).collect::<Result<Vec<_>>>()?,
    };
    let mut best: Option<Solve> = None;
    for start in &starts {
        for eps in [1.0, 0.5, 1.5] {
            let solve = levenberg_marquardt(dim, points, encode(dim, start, eps), opts);
            if best.as_ref().is_none_or(|b| solve.cost < b.cost) {
                best = Some(solve);
            }
        }
    }
    let best = best.expect("at least one start");
    let body = decode(dim, &best.x).ok_or_else(|| {
        HrmError::DegenerateGeometry("fitted parameters left the valid range".into())
    })?;
    Ok(FitResult {
        residual: mean_abs_residual(&body, points),
        body,
        iterations: best.iterations,
        converged: best.converged,
        objective_history: best.history,
    })
}

pub fn fit_superquadric(points: &[Vec3]) -> Result<FitResult> {
    fit(Dim::Three, points, &FitOptions::default())
}

pub fn fit_superellipse(points: &[Vec3]) -> Result<FitResult> {
    fit(Dim::Two, points, &FitOptions::default())
}

/// Ellipse for a planar angle, convenient in tests and scene setup.
pub fn planar_ellipse(a: f64, b: f64, theta: f64, center: Vec3) -> Result<Ellipsoid> {
    Ellipsoid::planar(a, b, Pose::new(planar_rotation(theta), center))
}
