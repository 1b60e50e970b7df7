//! Piecewise-smooth speed models: regions with closed-form speeds, plus the
//! interface curves that separate them.

use exmex::prelude::*;
use serde::{Deserialize, Serialize};

use super::shape::{segment_distance, Shape};
use super::GeometryError;
use crate::grid::{dist, Grid};

/// Tolerance used when deciding region membership of points on an interface.
const ON_BOUNDARY: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum SpeedFn {
    Const(f64),
    Expr {
        src: String,
        ex: FlatEx<f64>,
        slots: Vec<usize>,
    },
}

impl SpeedFn {
    pub fn parse(src: &str) -> Result<Self, GeometryError> {
        if let Ok(v) = src.trim().parse::<f64>() {
            return Ok(SpeedFn::Const(v));
        }
        let ex = exmex::parse::<f64>(src)
            .map_err(|e| GeometryError::Config(format!("speed expression '{src}': {e}")))?;
        let mut slots = Vec::new();
        for name in ex.var_names() {
            match name.as_str() {
                "x" => slots.push(0),
                "y" => slots.push(1),
                other => {
                    return Err(GeometryError::Config(format!(
                        "speed expression '{src}': unknown variable '{other}' (use x, y)"
                    )))
                }
            }
        }
        Ok(SpeedFn::Expr {
            src: src.to_string(),
            ex,
            slots,
        })
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            SpeedFn::Const(c) => *c,
            SpeedFn::Expr { ex, slots, .. } => {
                let mut args = [0.0; 2];
                for (a, s) in args.iter_mut().zip(slots) {
                    *a = x[*s];
                }
                ex.eval(&args[..slots.len()]).unwrap_or(f64::NAN)
            }
        }
    }

    pub fn source(&self) -> String {
        match self {
            SpeedFn::Const(c) => format!("{c}"),
            SpeedFn::Expr { src, .. } => src.clone(),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, SpeedFn::Const(_))
    }
}

#[derive(Debug, Clone)]
pub struct Region {
    pub name: String,
    pub shape: Shape,
    pub speed: SpeedFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interface {
    /// 1D interface point.
    Point {
        x: f64,
    },
    /// Line `x[axis] = value`.
    Line {
        axis: usize,
        value: f64,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Polyline {
        vertices: Vec<[f64; 2]>,
        #[serde(default)]
        closed: bool,
    },
}

/// One crossing of a straight segment with an interface.
#[derive(Debug, Clone, Copy)]
pub struct SegmentHit {
    /// Fraction along the segment in [0, 1].
    pub t: f64,
    pub point: [f64; 2],
    /// Unit normal of the interface at the hit (orientation arbitrary).
    pub normal: [f64; 2],
}

impl Interface {
    fn segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        match self {
            Interface::Polyline { vertices, closed } => {
                let mut s: Vec<_> = vertices.windows(2).map(|w| (w[0], w[1])).collect();
                if *closed && vertices.len() > 2 {
                    s.push((*vertices.last().unwrap(), vertices[0]));
                }
                s
            }
            _ => Vec::new(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), String> {
        let finite = |p: &[f64; 2]| p[0].is_finite() && p[1].is_finite();
        match self {
            Interface::Point { x } if dim != 1 || !x.is_finite() => {
                Err(format!("point interface {x} in {dim}D"))
            }
            Interface::Line { axis, value } if dim != 2 || *axis > 1 || !value.is_finite() => Err(
                format!("line interface axis {axis} value {value} in {dim}D"),
            ),
            Interface::Circle { center, radius }
                if dim != 2 || !(*radius > 0.0) || !finite(center) =>
            {
                Err(format!("circle interface radius {radius}"))
            }
            Interface::Polyline { vertices, closed } => {
                if dim != 2 || vertices.len() < 2 || (*closed && vertices.len() < 3) {
                    return Err(format!("polyline with {} vertices", vertices.len()));
                }
                if !vertices.iter().all(finite) {
                    return Err("polyline vertex not finite".into());
                }
                if vertices.windows(2).any(|w| dist(w[0], w[1]) == 0.0) {
                    return Err("polyline with repeated vertex".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Distance from a point to the interface.
    pub fn distance(&self, x: [f64; 2]) -> f64 {
        match self {
            Interface::Point { x: p } => (x[0] - p).abs(),
            Interface::Line { axis, value } => (x[*axis] - value).abs(),
            Interface::Circle { center, radius } => (dist(x, *center) - radius).abs(),
            Interface::Polyline { .. } => self
                .segments()
                .iter()
                .map(|(a, b)| segment_distance(*a, *b, x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// First crossing of the open segment a→b (excluding a itself).
    pub fn first_hit(&self, a: [f64; 2], b: [f64; 2]) -> Option<SegmentHit> {
        let d = [b[0] - a[0], b[1] - a[1]];
        let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
        let eps = 1e-12;
        match self {
            Interface::Point { x } => {
                if d[0] == 0.0 {
                    return None;
                }
                let t = (x - a[0]) / d[0];
                (t > eps && t <= 1.0).then(|| SegmentHit {
                    t,
                    point: at(t),
                    normal: [1.0, 0.0],
                })
            }
            Interface::Line { axis, value } => {
                if d[*axis] == 0.0 {
                    return None;
                }
                let t = (value - a[*axis]) / d[*axis];
                let mut n = [0.0; 2];
                n[*axis] = 1.0;
                (t > eps && t <= 1.0).then(|| SegmentHit {
                    t,
                    point: at(t),
                    normal: n,
                })
            }
            Interface::Circle { center, radius } => {
                let f = [a[0] - center[0], a[1] - center[1]];
                let qa = d[0] * d[0] + d[1] * d[1];
                let qb = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let qc = f[0] * f[0] + f[1] * f[1] - radius * radius;
                let disc = qb * qb - 4.0 * qa * qc;
                if qa == 0.0 || disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let mut ts = [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)];
                ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
                ts.into_iter().find(|&t| t > eps && t <= 1.0).map(|t| {
                    let p = at(t);
                    let r = dist(p, *center);
                    SegmentHit {
                        t,
                        point: p,
                        normal: [(p[0] - center[0]) / r, (p[1] - center[1]) / r],
                    }
                })
            }
            Interface::Polyline { .. } => {
                let mut best: Option<SegmentHit> = None;
                for (p, q) in self.segments() {
                    let e = [q[0] - p[0], q[1] - p[1]];
                    let den = d[0] * e[1] - d[1] * e[0];
                    if den == 0.0 {
                        continue;
                    }
                    let w = [p[0] - a[0], p[1] - a[1]];
                    let t = (w[0] * e[1] - w[1] * e[0]) / den;
                    let s = (w[0] * d[1] - w[1] * d[0]) / den;
                    if t > eps
                        && t <= 1.0
                        && (0.0..=1.0).contains(&s)
                        && best.map_or(true, |h| t < h.t)
                    {
                        let l = e[0].hypot(e[1]);
                        best = Some(SegmentHit {
                            t,
                            point: at(t),
                            normal: [-e[1] / l, e[0] / l],
                        });
                    }
                }
                best
            }
        }
    }

    /// Coarse geometric intersection test used to enforce disjointness.
    fn intersects(&self, other: &Interface, probe: f64) -> bool {
        use Interface::*;
        match (self, other) {
            (Point { x: a }, Point { x: b }) => a == b,
            (
                Line {
                    axis: a1,
                    value: v1,
                },
                Line {
                    axis: a2,
                    value: v2,
                },
            ) => a1 != a2 || v1 == v2,
            (Line { axis, value }, Circle { center, radius })
            | (Circle { center, radius }, Line { axis, value }) => {
                (center[*axis] - value).abs() <= *radius
            }
            (
                Circle {
                    center: c1,
                    radius: r1,
                },
                Circle {
                    center: c2,
                    radius: r2,
                },
            ) => {
                let d = dist(*c1, *c2);
                d <= r1 + r2 && d >= (r1 - r2).abs()
            }
            (p @ Polyline { .. }, q) | (q, p @ Polyline { .. }) => {
                // sample the polyline and look for a sign-free close approach
                p.segments().iter().any(|(a, b)| {
                    let n = ((dist(*a, *b) / probe).ceil() as usize).max(1);
                    (0..=n).any(|i| {
                        let t = i as f64 / n as f64;
                        q.distance([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
                            < 0.5 * probe
                    })
                })
            }
            _ => false,
        }
    }
}

/// Sampling box used to validate region coverage and speed bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct SpeedModel {
    pub dim: usize,
    pub regions: Vec<Region>,
    pub interfaces: Vec<Interface>,
    pub c_min: f64,
    pub c_max: f64,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub name: String,
    pub shape: Shape,
    pub speed: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub bounds: Bounds,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    #[serde(default)]
    pub interfaces: Vec<Interface>,
}

impl ModelConfig {
    pub fn from_toml(src: &str) -> Result<Self, GeometryError> {
        toml::from_str(src).map_err(|e| GeometryError::Config(e.to_string()))
    }
}

/// Validates a model description and returns the model.
pub fn build_speed_model(cfg: &ModelConfig) -> Result<SpeedModel, GeometryError> {
    if cfg.dim != 1 && cfg.dim != 2 {
        return Err(GeometryError::Config(format!(
            "dim must be 1 or 2, got {}",
            cfg.dim
        )));
    }
    if !(cfg.c_min > 0.0 && cfg.c_max >= cfg.c_min && cfg.c_max.is_finite()) {
        return Err(GeometryError::Config(format!(
            "bad speed bounds [{}, {}]",
            cfg.c_min, cfg.c_max
        )));
    }
    if cfg.regions.is_empty() {
        return Err(GeometryError::Config("model has no regions".into()));
    }
    let mut regions = Vec::with_capacity(cfg.regions.len());
    for r in &cfg.regions {
        r.shape
            .validate()
            .map_err(|e| GeometryError::Config(format!("region '{}': {e}", r.name)))?;
        regions.push(Region {
            name: r.name.clone(),
            shape: r.shape.clone(),
            speed: SpeedFn::parse(&r.speed)?,
        });
    }
    for (i, f) in cfg.interfaces.iter().enumerate() {
        f.validate(cfg.dim)
            .map_err(|e| GeometryError::MalformedInterface(format!("interface {i}: {e}")))?;
    }
    let span = (cfg.bounds.hi[0] - cfg.bounds.lo[0]).max(cfg.bounds.hi[1] - cfg.bounds.lo[1]);
    for i in 0..cfg.interfaces.len() {
        for j in i + 1..cfg.interfaces.len() {
            if cfg.interfaces[i].intersects(&cfg.interfaces[j], span * 1e-3) {
                return Err(GeometryError::MalformedInterface(format!(
                    "interfaces {i} and {j} intersect"
                )));
            }
        }
    }
    let model = SpeedModel {
        dim: cfg.dim,
        regions,
        interfaces: cfg.interfaces.clone(),
        c_min: cfg.c_min,
        c_max: cfg.c_max,
        bounds: cfg.bounds,
    };
    model.check_partition(if cfg.dim == 1 { 4001 } else { 161 })?;
    Ok(model)
}

impl SpeedModel {
    /// Homogeneous model on a box.
    pub fn constant(dim: usize, c: f64, bounds: Bounds) -> Self {
        SpeedModel {
            dim,
            regions: vec![Region {
                name: "all".into(),
                shape: Shape::All,
                speed: SpeedFn::Const(c),
            }],
            interfaces: Vec::new(),
            c_min: c,
            c_max: c,
            bounds,
        }
    }

    /// Horizontal layers (rows of constant speed) separated at `depths` along `axis`,
    /// listed in decreasing coordinate order: `speeds[0]` lies above `levels[0]`.
    pub fn layered(
        dim: usize,
        axis: usize,
        levels: &[f64],
        speeds: &[f64],
        bounds: Bounds,
    ) -> Result<Self, GeometryError> {
        if speeds.len() != levels.len() + 1 {
            return Err(GeometryError::Config(
                "layered model needs one more speed than level".into(),
            ));
        }
        let mut regions = Vec::new();
        for (k, &c) in speeds.iter().enumerate() {
            let hi = if k == 0 { None } else { Some(levels[k - 1]) };
            let lo = levels.get(k).copied();
            regions.push(RegionConfig {
                name: format!("layer{k}"),
                shape: Shape::Band { axis, lo, hi },
                speed: format!("{c}"),
            });
        }
        let interfaces = levels
            .iter()
            .map(|&v| {
                if dim == 1 {
                    Interface::Point { x: v }
                } else {
                    Interface::Line { axis, value: v }
                }
            })
            .collect();
        let c_min = speeds.iter().copied().fold(f64::INFINITY, f64::min);
        let c_max = speeds.iter().copied().fold(0.0, f64::max);
        build_speed_model(&ModelConfig {
            dim,
            c_min,
            c_max,
            bounds,
            regions,
            interfaces,
        })
    }

    /// `inner` on `region`, `self` elsewhere.
    pub fn spliced(&self, inner: &SpeedModel, region: &Shape) -> SpeedModel {
        let outside = Shape::Complement {
            of: Box::new(region.clone()),
        };
        let clip = |r: &Region, s: &Shape, tag: &str| Region {
            name: format!("{tag}:{}", r.name),
            shape: Shape::Intersection {
                of: vec![r.shape.clone(), s.clone()],
            },
            speed: r.speed.clone(),
        };
        let mut regions: Vec<Region> = self
            .regions
            .iter()
            .map(|r| clip(r, &outside, "outer"))
            .collect();
        regions.extend(inner.regions.iter().map(|r| clip(r, region, "inner")));
        let mut interfaces = self.interfaces.clone();
        interfaces.extend(inner.interfaces.iter().cloned());
        SpeedModel {
            dim: self.dim,
            regions,
            interfaces,
            c_min: self.c_min.min(inner.c_min),
            c_max: self.c_max.max(inner.c_max),
            bounds: self.bounds,
        }
    }

    fn check_partition(&self, n: usize) -> Result<(), GeometryError> {
        let lo = self.bounds.lo;
        let hi = self.bounds.hi;
        let ny = if self.dim == 1 { 1 } else { n };
        for j in 0..ny {
            for i in 0..n {
                // offset samples off the lattice so that axis-aligned interfaces are not hit exactly
                let fx = (i as f64 + 0.5017) / n as f64;
                let fy = (j as f64 + 0.4983) / ny as f64;
                let x = [
                    lo[0] + fx * (hi[0] - lo[0]),
                    if self.dim == 1 {
                        0.0
                    } else {
                        lo[1] + fy * (hi[1] - lo[1])
                    },
                ];
                self.region_id_checked(x)?;
                let c = self.eval_speed(x)?;
                if !(c >= self.c_min * (1.0 - 1e-12) && c <= self.c_max * (1.0 + 1e-12)) {
                    return Err(GeometryError::SpeedOutOfBounds {
                        x,
                        c,
                        c_min: self.c_min,
                        c_max: self.c_max,
                    });
                }
            }
        }
        Ok(())
    }

    fn region_id_checked(&self, x: [f64; 2]) -> Result<usize, GeometryError> {
        let mut inside = self
            .regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.shape.sdf(x) > 1e-9);
        match (inside.next(), inside.next()) {
            (Some((i, _)), None) => Ok(i),
            (Some((a, _)), Some((b, _))) => Err(GeometryError::OverlappingRegions {
                a: self.regions[a].name.clone(),
                b: self.regions[b].name.clone(),
                x,
            }),
            (None, _) => self.region_id(x).ok_or(GeometryError::OutOfDomain(x)),
        }
    }

    /// Region whose interior is deepest at x.
    pub fn region_id(&self, x: [f64; 2]) -> Option<usize> {
        let mut best = None;
        let mut bd = -ON_BOUNDARY;
        for (i, r) in self.regions.iter().enumerate() {
            let d = r.shape.sdf(x);
            if d >= bd {
                bd = d;
                best = Some(i);
            }
        }
        best
    }

    pub fn in_bounds(&self, x: [f64; 2]) -> bool {
        let b = &self.bounds;
        let tol = 1e-9 * (1.0 + (b.hi[0] - b.lo[0]).abs());
        x[0] >= b.lo[0] - tol
            && x[0] <= b.hi[0] + tol
            && (self.dim == 1 || (x[1] >= b.lo[1] - tol && x[1] <= b.hi[1] + tol))
    }

    /// Speed at x; on an interface the smaller one-sided value.
    pub fn eval_speed(&self, x: [f64; 2]) -> Result<f64, GeometryError> {
        if !self.in_bounds(x) {
            return Err(GeometryError::OutOfDomain(x));
        }
        self.speed_unchecked(x).ok_or(GeometryError::OutOfDomain(x))
    }

    pub(crate) fn speed_unchecked(&self, x: [f64; 2]) -> Option<f64> {
        let mut c = f64::INFINITY;
        for r in &self.regions {
            if r.shape.sdf(x) >= -ON_BOUNDARY {
                c = c.min(r.speed.eval(x));
            }
        }
        c.is_finite().then_some(c)
    }

    /// Speed of a specific region's smooth extension.
    pub fn region_speed(&self, region: usize, x: [f64; 2]) -> f64 {
        self.regions[region].speed.eval(x)
    }

    /// Speed at every grid node.
    pub fn speed_field(&self, grid: &Grid) -> Result<Vec<f64>, GeometryError> {
        (0..grid.len())
            .map(|k| self.eval_speed(grid.point(k)))
            .collect()
    }

    /// Dual-cell average of c⁻² at every node, using `q` sub-samples per axis.
    pub fn slowness2_field(&self, grid: &Grid, q: usize) -> Result<Vec<f64>, GeometryError> {
        let h = grid.h;
        let offs: Vec<f64> = (0..q)
            .map(|s| -0.5 * h + (s as f64 + 0.5) * h / q as f64)
            .collect();
        let mut out = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let p = grid.point(k);
            let mut acc = 0.0;
            let mut cnt = 0usize;
            let yoffs: &[f64] = if grid.dim() == 1 { &[0.0] } else { &offs };
            for &dy in yoffs {
                for &dx in &offs {
                    let x = [p[0] + dx, p[1] + dy];
                    let c = self
                        .speed_unchecked(x)
                        .ok_or(GeometryError::OutOfDomain(x))?;
                    acc += 1.0 / (c * c);
                    cnt += 1;
                }
            }
            out.push(acc / cnt as f64);
        }
        Ok(out)
    }

    /// Largest relative variation of c over a ball (sampled), used by packet checks.
    pub fn variation_over_ball(&self, center: [f64; 2], radius: f64) -> f64 {
        let c0 = self.speed_unchecked(center).unwrap_or(f64::NAN);
        let mut worst = 0.0f64;
        let n = 24;
        for a in 0..n {
            for r in 1..=6 {
                let th = 2.0 * std::f64::consts::PI * a as f64 / n as f64;
                let rr = radius * r as f64 / 6.0;
                let x = [center[0] + rr * th.cos(), center[1] + rr * th.sin()];
                if let Some(c) = self.speed_unchecked(x) {
                    worst = worst.max((c - c0).abs() / c0);
                }
            }
        }
        worst
    }
}
