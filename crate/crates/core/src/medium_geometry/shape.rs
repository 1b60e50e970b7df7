//! Analytic regions described by a signed distance (positive inside).

use serde::{Deserialize, Serialize};

use crate::grid::{dist, Grid, Mask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    All,
    /// `lo < x[axis] < hi`; either side may be omitted.
    Band {
        axis: usize,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Rect {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Complement {
        of: Box<Shape>,
    },
    /// Points within `by` outside `of` (sdf shifted by `by`).
    Dilate {
        of: Box<Shape>,
        by: f64,
    },
    Union {
        of: Vec<Shape>,
    },
    Intersection {
        of: Vec<Shape>,
    },
}

impl Shape {
    /// Signed distance, positive inside. Exact for bands, disks, rectangles and
    /// polygons; unions and intersections give the usual max/min bound.
    pub fn sdf(&self, x: [f64; 2]) -> f64 {
        match self {
            Shape::All => f64::INFINITY,
            Shape::Band { axis, lo, hi } => {
                let v = x[*axis];
                let a = lo.map_or(f64::INFINITY, |l| v - l);
                let b = hi.map_or(f64::INFINITY, |h| h - v);
                a.min(b)
            }
            Shape::Disk { center, radius } => radius - dist(x, *center),
            Shape::Rect { lo, hi } => {
                let dx = (lo[0] - x[0]).max(x[0] - hi[0]);
                let dy = (lo[1] - x[1]).max(x[1] - hi[1]);
                if dx <= 0.0 && dy <= 0.0 {
                    -dx.max(dy)
                } else {
                    -(dx.max(0.0).hypot(dy.max(0.0)))
                }
            }
            Shape::Polygon { vertices } => polygon_sdf(vertices, x),
            Shape::Complement { of } => -of.sdf(x),
            Shape::Dilate { of, by } => of.sdf(x) + by,
            Shape::Union { of } => of
                .iter()
                .map(|s| s.sdf(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Shape::Intersection { of } => of.iter().map(|s| s.sdf(x)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.sdf(x) > 0.0
    }

    /// Outward unit normal from the sdf gradient (central differences).
    pub fn outward_normal(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            Shape::Disk { center, radius } if dist(x, *center) > 1e-9 * radius => {
                let r = dist(x, *center);
                return [(x[0] - center[0]) / r, (x[1] - center[1]) / r];
            }
            Shape::Band { axis, lo, hi } => {
                let v = x[*axis];
                let a = lo.map_or(f64::INFINITY, |l| v - l);
                let b = hi.map_or(f64::INFINITY, |h| h - v);
                let mut n = [0.0; 2];
                n[*axis] = if a < b { -1.0 } else { 1.0 };
                return n;
            }
            _ => {}
        }
        let e = 1e-7;
        let gx = self.sdf([x[0] + e, x[1]]) - self.sdf([x[0] - e, x[1]]);
        let gy = self.sdf([x[0], x[1] + e]) - self.sdf([x[0], x[1] - e]);
        let n = gx.hypot(gy);
        if n == 0.0 || !n.is_finite() {
            return [0.0, 0.0];
        }
        [-gx / n, -gy / n]
    }

    pub fn mask(&self, grid: &Grid) -> Mask {
        Mask::from_fn(*grid, |k| self.contains(grid.point(k)))
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Shape::Band { axis, lo, hi } => {
                if *axis > 1 {
                    return Err(format!("band axis {axis}"));
                }
                if let (Some(l), Some(h)) = (lo, hi) {
                    if !(l < h) {
                        return Err(format!("band lo {l} >= hi {h}"));
                    }
                }
                Ok(())
            }
            Shape::Disk { radius, .. } if !(*radius > 0.0) => Err(format!("disk radius {radius}")),
            Shape::Rect { lo, hi } if !(lo[0] < hi[0] && lo[1] < hi[1]) => {
                Err(format!("rect {lo:?} {hi:?}"))
            }
            Shape::Polygon { vertices } if vertices.len() < 3 => {
                Err(format!("polygon with {} vertices", vertices.len()))
            }
            Shape::Complement { of } => of.validate(),
            Shape::Dilate { of, by } => {
                if by.is_finite() {
                    of.validate()
                } else {
                    Err(format!("dilation by {by}"))
                }
            }
            Shape::Union { of } | Shape::Intersection { of } => {
                of.iter().try_for_each(|s| s.validate())
            }
            _ => Ok(()),
        }
    }
}

fn polygon_sdf(v: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let n = v.len();
    let mut d = f64::INFINITY;
    let mut inside = false;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        d = d.min(segment_distance(a, b, x));
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let t = (x[1] - a[1]) / (b[1] - a[1]);
            if x[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    if inside {
        d
    } else {
        -d
    }
}

pub fn segment_distance(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 == 0.0 {
        0.0
    } else {
        (((x[0] - a[0]) * ab[0] + (x[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0)
    };
    dist(x, [a[0] + t * ab[0], a[1] + t * ab[1]])
}
