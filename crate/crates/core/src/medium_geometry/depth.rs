//! Travel-time depth d*_Θ by first-order fast marching on |∇d| = 1/c.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::model::SpeedModel;
use super::shape::Shape;
use super::GeometryError;
use crate::grid::{Field, Grid, Mask};

/// Signed travel-time depth relative to a region: positive inside, negative outside.
#[derive(Debug, Clone)]
pub struct DepthField {
    pub grid: Grid,
    pub values: Field,
    pub theta_ref: Shape,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Unsigned first-arrival times from a set of fixed seed values.
pub fn fast_march(grid: &Grid, slowness: &[f64], seeds: &[(usize, f64)]) -> Field {
    let n = grid.len();
    let mut t = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &(k, v) in seeds {
        if v < t[k] {
            t[k] = v;
        }
    }
    for &(k, _) in seeds {
        done[k] = true;
    }
    for &(k, _) in seeds {
        for nb in grid.neighbors(k) {
            if !done[nb] {
                let v = local_update(grid, &t, slowness[nb], nb);
                if v < t[nb] {
                    t[nb] = v;
                    heap.push(Item(v, nb));
                }
            }
        }
    }
    while let Some(Item(v, k)) = heap.pop() {
        if done[k] || v > t[k] {
            continue;
        }
        done[k] = true;
        for nb in grid.neighbors(k) {
            if !done[nb] {
                let w = local_update(grid, &t, slowness[nb], nb);
                if w < t[nb] {
                    t[nb] = w;
                    heap.push(Item(w, nb));
                }
            }
        }
    }
    t
}

fn local_update(grid: &Grid, t: &[f64], s: f64, k: usize) -> f64 {
    let (i, j) = grid.ij(k);
    let hs = grid.h * s;
    let a = {
        let l = if i > 0 { t[k - 1] } else { f64::INFINITY };
        let r = if i + 1 < grid.nx {
            t[k + 1]
        } else {
            f64::INFINITY
        };
        l.min(r)
    };
    if grid.dim() == 1 {
        return a + hs;
    }
    let b = {
        let d = if j > 0 { t[k - grid.nx] } else { f64::INFINITY };
        let u = if j + 1 < grid.ny {
            t[k + grid.nx]
        } else {
            f64::INFINITY
        };
        d.min(u)
    };
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if !lo.is_finite() {
        return f64::INFINITY;
    }
    if hi - lo >= hs {
        return lo + hs;
    }
    0.5 * (lo + hi + (2.0 * hs * hs - (hi - lo) * (hi - lo)).sqrt())
}

/// Checks that a region and its complement are resolved by the grid.
fn check_resolved(grid: &Grid, region: &Shape) -> Result<Mask, GeometryError> {
    let inside = region.mask(grid);
    let outside = inside.complement();
    let eroded = |m: &Mask| m.minus(&m.complement().dilate(1));
    if inside.count() == 0 || eroded(&eroded(&inside)).count() == 0 {
        return Err(GeometryError::UnresolvedBoundary(
            "region has fewer than 4 cells across".into(),
        ));
    }
    if outside.count() == 0 {
        return Err(GeometryError::UnresolvedBoundary(
            "region covers the whole grid".into(),
        ));
    }
    Ok(inside)
}

/// Fast-marching depth d*_region on the grid, seeded with sdf/c near the boundary.
pub fn solve_depth(
    model: &SpeedModel,
    grid: &Grid,
    region: &Shape,
) -> Result<DepthField, GeometryError> {
    let inside = check_resolved(grid, region)?;
    let c = model.speed_field(grid)?;
    let slowness: Vec<f64> = c.iter().map(|v| 1.0 / v).collect();
    let band = 1.5 * grid.h;
    let mut seeds = Vec::new();
    for k in 0..grid.len() {
        let d = region.sdf(grid.point(k));
        if d.abs() <= band {
            seeds.push((k, d.abs() * slowness[k]));
        }
    }
    let t = fast_march(grid, &slowness, &seeds);
    let values = t
        .iter()
        .enumerate()
        .map(|(k, &v)| if inside.get(k) { v } else { -v })
        .collect();
    Ok(DepthField {
        grid: *grid,
        values,
        theta_ref: region.clone(),
    })
}

impl DepthField {
    /// (Θ_t, Θ_t*) = ({d* > t}, {d* < t}).
    pub fn level_regions(&self, t: f64) -> (Mask, Mask) {
        let above = Mask::from_fn(self.grid, |k| self.values[k] > t);
        let below = Mask::from_fn(self.grid, |k| self.values[k] < t);
        (above, below)
    }

    pub fn max_depth(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn at(&self, x: [f64; 2]) -> f64 {
        self.grid.interpolate(&self.values, x)
    }
}
