//! Broken normal geodesics of c⁻²dx²: ray tracing with Snell refraction, the
//! broken exponential map, per-point regularity checks and the directly
//! transmitted symbol |dt⁺|.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::grid::dist;
use crate::medium_geometry::{solve_depth, DomainChain, GeometryError, Shape, SpeedModel};

#[derive(Debug, Error)]
pub enum RayError {
    #[error("ray meets interface {interface} tangentially at {point:?}")]
    TangentialCrossing { interface: usize, point: [f64; 2] },
    #[error("ray left the model domain at {0:?}")]
    LeftDomain([f64; 2]),
    #[error("no normal direction at {0:?}")]
    NoNormal([f64; 2]),
    #[error("path ends in total internal reflection at t = {0}")]
    TirTerminated(f64),
    #[error("crossing angle within 1e-3 of grazing (α = {alpha}, β = {beta})")]
    GrazingAngle { alpha: f64, beta: f64 },
    #[error("no normal geodesic from ∂Ω reaches {0:?}")]
    NoPathFound([f64; 2]),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub interface: usize,
    pub point: [f64; 2],
    pub time: f64,
    /// Angles to the interface normal, upstream and downstream.
    pub alpha: f64,
    pub beta: f64,
    pub c_up: f64,
    pub c_down: f64,
}

impl Crossing {
    /// |sin α / c_up − sin β / c_down|.
    pub fn snell_residual(&self) -> f64 {
        (self.alpha.sin() / self.c_up - self.beta.sin() / self.c_down).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    /// (point, travel time), starting at p.
    pub vertices: Vec<([f64; 2], f64)>,
    /// Unit direction leaving each vertex but the last.
    pub segments: Vec<[f64; 2]>,
    pub crossings: Vec<Crossing>,
    /// Time of a total internal reflection that cut the path short.
    pub tir_at: Option<f64>,
}

impl RayPath {
    pub fn end(&self) -> ([f64; 2], f64) {
        *self.vertices.last().unwrap()
    }

    /// Position at travel time t (linear between vertices).
    pub fn at(&self, t: f64) -> [f64; 2] {
        let v = &self.vertices;
        let i = v
            .partition_point(|(_, s)| *s <= t)
            .clamp(1, v.len().max(2) - 1);
        if v.len() == 1 {
            return v[0].0;
        }
        let ((a, ta), (b, tb)) = (v[i - 1], v[i]);
        let f = if tb > ta {
            ((t - ta) / (tb - ta)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    }

    /// Closest approach to y: (distance, travel time).
    pub fn closest_approach(&self, y: [f64; 2]) -> (f64, f64) {
        let mut best = (dist(self.vertices[0].0, y), self.vertices[0].1);
        for w in self.vertices.windows(2) {
            let ((a, ta), (b, tb)) = (w[0], w[1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let l2 = d[0] * d[0] + d[1] * d[1];
            let s = if l2 > 0.0 {
                (((y[0] - a[0]) * d[0] + (y[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = [a[0] + s * d[0], a[1] + s * d[1]];
            let e = dist(q, y);
            if e < best.0 {
                best = (e, ta + s * (tb - ta));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// RK4 step in travel time inside regions of variable speed.
    pub step: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { step: 1e-3 }
    }
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

struct Tracer<'a> {
    model: &'a SpeedModel,
    opts: TraceOptions,
}

impl Tracer<'_> {
    fn region_at(&self, x: [f64; 2]) -> Result<usize, RayError> {
        if !self.model.in_bounds(x) {
            return Err(RayError::LeftDomain(x));
        }
        self.model.region_id(x).ok_or(RayError::LeftDomain(x))
    }

    fn grad(&self, r: usize, x: [f64; 2]) -> [f64; 2] {
        let e = 1e-6;
        let f = |p: [f64; 2]| self.model.region_speed(r, p);
        [
            (f([x[0] + e, x[1]]) - f([x[0] - e, x[1]])) / (2.0 * e),
            if self.model.dim == 2 {
                (f([x[0], x[1] + e]) - f([x[0], x[1] - e])) / (2.0 * e)
            } else {
                0.0
            },
        ]
    }

    /// One RK4 step of dx/dt = c²q, dq/dt = −∇c/c in region r.
    fn rk4(&self, r: usize, x: [f64; 2], q: [f64; 2], dt: f64) -> ([f64; 2], [f64; 2]) {
        let rhs = |x: [f64; 2], q: [f64; 2]| {
            let c = self.model.region_speed(r, x);
            let g = self.grad(r, x);
            ([c * c * q[0], c * c * q[1]], [-g[0] / c, -g[1] / c])
        };
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let (k1x, k1q) = rhs(x, q);
        let (k2x, k2q) = rhs(add(x, k1x, dt / 2.0), add(q, k1q, dt / 2.0));
        let (k3x, k3q) = rhs(add(x, k2x, dt / 2.0), add(q, k2q, dt / 2.0));
        let (k4x, k4q) = rhs(add(x, k3x, dt), add(q, k3q, dt));
        let nx = [
            x[0] + dt / 6.0 * (k1x[0] + 2.0 * k2x[0] + 2.0 * k3x[0] + k4x[0]),
            x[1] + dt / 6.0 * (k1x[1] + 2.0 * k2x[1] + 2.0 * k3x[1] + k4x[1]),
        ];
        let nq = [
            q[0] + dt / 6.0 * (k1q[0] + 2.0 * k2q[0] + 2.0 * k3q[0] + k4q[0]),
            q[1] + dt / 6.0 * (k1q[1] + 2.0 * k2q[1] + 2.0 * k3q[1] + k4q[1]),
        ];
        // keep |q| = 1/c against drift
        let c = self.model.region_speed(r, nx);
        let s = 1.0 / (c * nq[0].hypot(nq[1]));
        (nx, [nq[0] * s, nq[1] * s])
    }

    fn first_hit(
        &self,
        a: [f64; 2],
        b: [f64; 2],
    ) -> Option<(usize, crate::medium_geometry::model::SegmentHit)> {
        self.model
            .interfaces
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.first_hit(a, b).map(|h| (i, h)))
            .min_by(|x, y| x.1.t.total_cmp(&y.1.t))
    }

    fn trace(&self, p: [f64; 2], dir: [f64; 2], t_max: f64) -> Result<RayPath, RayError> {
        let mut x = p;
        let mut r = self.region_at([p[0] + 1e-9 * dir[0], p[1] + 1e-9 * dir[1]])?;
        let c0 = self.model.region_speed(r, p);
        let mut q = [dir[0] / c0, dir[1] / c0];
        let mut t = 0.0;
        let mut path = RayPath {
            vertices: vec![(p, 0.0)],
            segments: Vec::new(),
            crossings: Vec::new(),
            tir_at: None,
        };
        let constant = |r: usize| self.model.regions[r].speed.is_const();
        while t < t_max * (1.0 - 1e-14) {
            let left = t_max - t;
            let dt = if constant(r) {
                left
            } else {
                self.opts.step.min(left)
            };
            let (mut nx, mut nq) = if constant(r) {
                let c = self.model.region_speed(r, x);
                ([x[0] + c * c * q[0] * dt, x[1] + c * c * q[1] * dt], q)
            } else {
                self.rk4(r, x, q, dt)
            };
            let mut nt = t + dt;
            if let Some((i, hit)) = self.first_hit(x, nx) {
                // advance only up to the interface; a chord fraction maps to a time fraction
                let mut ht = dt * hit.t;
                let mut hp = hit.point;
                if !constant(r) {
                    // one re-integration to land on the interface along the curved ray
                    let (rx, _) = self.rk4(r, x, q, ht);
                    if let Some((_, h2)) =
                        self.first_hit(x, [2.0 * rx[0] - x[0], 2.0 * rx[1] - x[1]])
                    {
                        ht *= 2.0 * h2.t;
                        hp = h2.point;
                    }
                }
                let (_, qh) = if constant(r) {
                    (hp, q)
                } else {
                    self.rk4(r, x, q, ht)
                };
                let dir_in = unit(qh);
                let mut n = unit(hit.normal);
                if dot(n, dir_in) < 0.0 {
                    n = [-n[0], -n[1]];
                }
                let cos_a = dot(n, dir_in).min(1.0);
                if cos_a < 1e-9 {
                    return Err(RayError::TangentialCrossing {
                        interface: i,
                        point: hp,
                    });
                }
                let alpha = cos_a.acos();
                let c_up = self.model.region_speed(r, hp);
                let probe = [hp[0] + 1e-9 * n[0], hp[1] + 1e-9 * n[1]];
                let r2 = self.region_at(probe)?;
                let c_down = self.model.region_speed(r2, hp);
                path.segments.push(unit([hp[0] - x[0], hp[1] - x[1]]));
                path.vertices.push((hp, t + ht));
                let tang = [qh[0] - dot(qh, n) * n[0], qh[1] - dot(qh, n) * n[1]];
                let qt2 = dot(tang, tang);
                let qn2 = 1.0 / (c_down * c_down) - qt2;
                if qn2 <= 0.0 {
                    path.tir_at = Some(t + ht);
                    return Ok(path);
                }
                let qn = qn2.sqrt();
                let beta = (tang[0].hypot(tang[1]) * c_down).min(1.0).asin();
                path.crossings.push(Crossing {
                    interface: i,
                    point: hp,
                    time: t + ht,
                    alpha,
                    beta,
                    c_up,
                    c_down,
                });
                q = [tang[0] + qn * n[0], tang[1] + qn * n[1]];
                x = probe;
                r = r2;
                t += ht;
                continue;
            }
            if !self.model.in_bounds(nx) {
                return Err(RayError::LeftDomain(nx));
            }
            path.segments.push(unit([nx[0] - x[0], nx[1] - x[1]]));
            path.vertices.push((nx, nt));
            std::mem::swap(&mut x, &mut nx);
            std::mem::swap(&mut q, &mut nq);
            std::mem::swap(&mut t, &mut nt);
        }
        Ok(path)
    }
}

/// Inward unit normal of Ω at p.
pub fn inward_normal(omega: &Shape, p: [f64; 2], dim: usize) -> Result<[f64; 2], RayError> {
    let n = omega.outward_normal(p);
    let n = if dim == 1 { [n[0].signum(), 0.0] } else { n };
    if n[0] == 0.0 && n[1] == 0.0 {
        return Err(RayError::NoNormal(p));
    }
    Ok(unit([-n[0], -n[1]]))
}

/// exp_∂Ω(p, ·) up to travel time t_max.
pub fn trace_normal_geodesic(
    model: &SpeedModel,
    omega: &Shape,
    p: [f64; 2],
    t_max: f64,
    opts: TraceOptions,
) -> Result<RayPath, RayError> {
    let dir = inward_normal(omega, p, model.dim)?;
    Tracer { model, opts }.trace(p, dir, t_max)
}

/// Ray from an arbitrary point and direction.
pub fn trace_ray(
    model: &SpeedModel,
    x: [f64; 2],
    dir: [f64; 2],
    t_max: f64,
    opts: TraceOptions,
) -> Result<RayPath, RayError> {
    Tracer { model, opts }.trace(x, unit(dir), t_max)
}

pub fn broken_exponential(
    model: &SpeedModel,
    omega: &Shape,
    p: [f64; 2],
    t: f64,
) -> Result<[f64; 2], RayError> {
    let path = trace_normal_geodesic(model, omega, p, t, TraceOptions::default())?;
    if let Some(at) = path.tir_at {
        return Err(RayError::TirTerminated(at));
    }
    Ok(path.end().0)
}

/// |dt⁺| = Π 2√(cot α cot β)/(cot α + cot β), with the normal-incidence limit
/// 2√(c_up c_down)/(c_up + c_down).
pub fn dt_symbol(path: &RayPath) -> Result<f64, RayError> {
    if let Some(at) = path.tir_at {
        return Err(RayError::TirTerminated(at));
    }
    let mut prod = 1.0;
    for c in &path.crossings {
        if FRAC_PI_2 - c.alpha < 1e-3 || FRAC_PI_2 - c.beta < 1e-3 {
            return Err(RayError::GrazingAngle {
                alpha: c.alpha,
                beta: c.beta,
            });
        }
        prod *= if c.alpha < 1e-6 {
            2.0 * (c.c_up * c.c_down).sqrt() / (c.c_up + c.c_down)
        } else {
            let (ca, cb) = (1.0 / c.alpha.tan(), 1.0 / c.beta.tan());
            2.0 * (ca * cb).sqrt() / (ca + cb)
        };
    }
    Ok(prod)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    Regular,
    Focal,
    Multipath,
    DemiTangent,
    OnInterface,
}

impl Regularity {
    pub fn name(self) -> &'static str {
        match self {
            Regularity::Regular => "regular",
            Regularity::Focal => "focal",
            Regularity::Multipath => "multipath",
            Regularity::DemiTangent => "demi-tangent",
            Regularity::OnInterface => "on-interface",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub kind: Regularity,
    /// Travel-time distance to ∂Ω along the best normal geodesic.
    pub depth: f64,
    /// Fast-marching depth for comparison.
    pub depth_fmm: f64,
    /// Boundary points and arrival times of the minimizing geodesics found.
    pub minimizers: Vec<([f64; 2], f64)>,
    /// Raw Jacobian determinant of exp_∂Ω at the minimizer, and its scale.
    pub jacobian: f64,
    pub jacobian_scale: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RegularityOptions {
    pub samples: usize,
    /// Closest-approach tolerance for a ray to count as reaching y.
    pub hit_tol: f64,
    pub time_tol: f64,
    pub grazing_tol: f64,
    pub focal_tol: f64,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            samples: 720,
            hit_tol: 1e-6,
            time_tol: 1e-4,
            grazing_tol: 1e-3,
            focal_tol: 1e-6,
        }
    }
}

/// Closed boundary parametrised by s ∈ [0, 1).
fn boundary_param(omega: &Shape, y: [f64; 2]) -> Box<dyn Fn(f64) -> [f64; 2] + '_> {
    use std::f64::consts::TAU;
    match omega {
        Shape::Disk { center, radius } => {
            let (c, r) = (*center, *radius);
            Box::new(move |s| [c[0] + r * (TAU * s).cos(), c[1] + r * (TAU * s).sin()])
        }
        Shape::Rect { lo, hi } => {
            let v = vec![*lo, [hi[0], lo[1]], *hi, [lo[0], hi[1]]];
            Box::new(move |s| on_polygon(&v, s))
        }
        Shape::Polygon { vertices } => {
            let v = vertices.clone();
            Box::new(move |s| on_polygon(&v, s))
        }
        other => {
            // star-shaped about y: first sign change of the sdf along each direction
            let reach = 1e3;
            Box::new(move |s| {
                let d = [(TAU * s).cos(), (TAU * s).sin()];
                let at = |l: f64| [y[0] + l * d[0], y[1] + l * d[1]];
                let (mut a, mut step) = (0.0, 1e-3);
                while other.sdf(at(a + step)) > 0.0 && a < reach {
                    a += step;
                    step *= 1.5;
                }
                let mut b = a + step;
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if other.sdf(at(m)) > 0.0 {
                        a = m
                    } else {
                        b = m
                    }
                }
                at(0.5 * (a + b))
            })
        }
    }
}

fn on_polygon(v: &[[f64; 2]], s: f64) -> [f64; 2] {
    let n = v.len();
    let lens: Vec<f64> = (0..n).map(|i| dist(v[i], v[(i + 1) % n])).collect();
    let total: f64 = lens.iter().sum();
    let mut l = s.rem_euclid(1.0) * total;
    for i in 0..n {
        if l <= lens[i] || i == n - 1 {
            let f = (l / lens[i]).min(1.0);
            let (a, b) = (v[i], v[(i + 1) % n]);
            return [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])];
        }
        l -= lens[i];
    }
    v[0]
}

/// Classifies y by shooting normal geodesics from sampled boundary points,
/// refining each candidate by golden-section search on the boundary parameter.
pub fn regularity_check(
    model: &SpeedModel,
    chain: &DomainChain,
    y: [f64; 2],
    opts: RegularityOptions,
) -> Result<RegularityReport, RayError> {
    let omega = &chain.omega;
    let h = chain.grid.h;
    let depth_fmm = solve_depth(model, &chain.grid, omega)?.at(y);
    let on_iface = model.interfaces.iter().any(|f| f.distance(y) < 0.5 * h);
    let param = boundary_param(omega, y);
    let topts = TraceOptions::default();
    let miss = |s: f64, t_max: f64| -> (f64, f64) {
        match trace_normal_geodesic(model, omega, param(s), t_max, topts) {
            Ok(p) if p.tir_at.is_none() => p.closest_approach(y),
            Ok(p) => {
                let (d, t) = p.closest_approach(y);
                if t < p.tir_at.unwrap() - 1e-9 {
                    (d, t)
                } else {
                    (f64::INFINITY, f64::INFINITY)
                }
            }
            Err(_) => (f64::INFINITY, f64::INFINITY),
        }
    };
    let n = opts.samples.max(8);
    let ss: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let mut found: Vec<(f64, [f64; 2], f64)> = Vec::new();
    // creeping minimizers can leave every normal geodesic much longer than the depth
    let mut t_max = 1.5 * depth_fmm.max(h) + 4.0 * h / model.c_min;
    for _ in 0..4 {
        let ms: Vec<(f64, f64)> = ss.iter().map(|&s| miss(s, t_max)).collect();
        for i in 0..n {
            let (a, b, c) = (ms[(i + n - 1) % n].0, ms[i].0, ms[(i + 1) % n].0);
            if !(b.is_finite() && b <= a && b <= c) {
                continue;
            }
            // golden section on [s_{i−1}, s_{i+1}]
            let (mut lo, mut hi) = (ss[i] - 1.0 / n as f64, ss[i] + 1.0 / n as f64);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = hi - g * (hi - lo);
            let mut x2 = lo + g * (hi - lo);
            let (mut f1, mut f2) = (miss(x1, t_max).0, miss(x2, t_max).0);
            for _ in 0..60 {
                if f1 < f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - g * (hi - lo);
                    f1 = miss(x1, t_max).0;
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g * (hi - lo);
                    f2 = miss(x2, t_max).0;
                }
            }
            let s = 0.5 * (lo + hi);
            let (d, t) = miss(s, t_max);
            if d <= opts.hit_tol.max(1e-9) {
                found.push((s.rem_euclid(1.0), param(s), t));
            }
        }
        if !found.is_empty() {
            break;
        }
        t_max *= 2.0;
    }
    if found.is_empty() {
        if on_iface {
            return Ok(RegularityReport {
                kind: Regularity::OnInterface,
                depth: f64::NAN,
                depth_fmm,
                minimizers: Vec::new(),
                jacobian: f64::NAN,
                jacobian_scale: f64::NAN,
            });
        }
        return Err(RayError::NoPathFound(y));
    }
    let t_min = found.iter().map(|f| f.2).fold(f64::INFINITY, f64::min);
    let mut mins: Vec<&(f64, [f64; 2], f64)> = found
        .iter()
        .filter(|f| f.2 <= t_min + opts.time_tol)
        .collect();
    mins.sort_by(|a, b| a.0.total_cmp(&b.0));
    mins.dedup_by(|a, b| dist(a.1, b.1) < 1e-6);
    let (s0, p0, t0) = *mins[0];
    let minimizers = mins.iter().map(|m| (m.1, m.2)).collect();
    // Jacobian of (s, T) ↦ exp(p(s), T)
    let ds = 1e-5;
    let e = |s: f64, t: f64| broken_exponential(model, omega, param(s), t);
    let (jac, scale) = match (
        e(s0 + ds, t0),
        e(s0 - ds, t0),
        e(s0, t0 + 1e-5),
        e(s0, t0 - 1e-5),
    ) {
        (Ok(a), Ok(b), Ok(c), Ok(d)) => {
            let xs = [(a[0] - b[0]) / (2.0 * ds), (a[1] - b[1]) / (2.0 * ds)];
            let xt = [(c[0] - d[0]) / 2e-5, (c[1] - d[1]) / 2e-5];
            let ps = dist(param(s0 + ds), param(s0 - ds)) / (2.0 * ds);
            (
                (xs[0] * xt[1] - xs[1] * xt[0]).abs(),
                ps * xt[0].hypot(xt[1]),
            )
        }
        _ => (0.0, 1.0),
    };
    let far_apart = mins.iter().any(|m| dist(m.1, p0) > 5.0 * h);
    let path = trace_normal_geodesic(model, omega, p0, t0, topts)?;
    let grazes = path
        .crossings
        .iter()
        .any(|c| FRAC_PI_2 - c.alpha < opts.grazing_tol || FRAC_PI_2 - c.beta < opts.grazing_tol);
    // a creeping minimizer along Γ beats every transmitted normal geodesic
    let creeping = depth_fmm < t0 - (3.0 * h / model.c_min).max(0.02 * t0);
    let kind = if on_iface {
        Regularity::OnInterface
    } else if far_apart {
        Regularity::Multipath
    } else if grazes || creeping {
        Regularity::DemiTangent
    } else if model.dim == 2 && jac < opts.focal_tol * scale {
        Regularity::Focal
    } else {
        Regularity::Regular
    };
    Ok(RegularityReport {
        kind,
        depth: t0,
        depth_fmm,
        minimizers,
        jacobian: jac,
        jacobian_scale: scale,
    })
}
