//! Uniform Cartesian node grids, masks and the portable binary grid format.
//!
//! A grid stores `nx * ny` nodes in row-major order (`idx = j * nx + i`).
//! One-dimensional grids use `ny == 1`. The outermost node ring is the
//! Dirichlet wall of the computational box.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("bad grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
}

pub type Field = Vec<f64>;

impl Grid {
    pub fn new_1d(x0: f64, x1: f64, cells: usize) -> Result<Self, GridError> {
        if cells < 2 || !(x1 > x0) {
            return Err(GridError::Invalid(format!(
                "1d grid [{x0}, {x1}] with {cells} cells"
            )));
        }
        Ok(Grid {
            nx: cells + 1,
            ny: 1,
            h: (x1 - x0) / cells as f64,
            origin: [x0, 0.0],
        })
    }

    /// Square-celled 2D grid with lower-left corner `origin`.
    pub fn new_2d(origin: [f64; 2], h: f64, cells: [usize; 2]) -> Result<Self, GridError> {
        if cells[0] < 2 || cells[1] < 2 || !(h > 0.0) {
            return Err(GridError::Invalid(format!(
                "2d grid {cells:?} cells, h = {h}"
            )));
        }
        Ok(Grid {
            nx: cells[0] + 1,
            ny: cells[1] + 1,
            h,
            origin,
        })
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    pub fn upper(&self) -> [f64; 2] {
        [
            self.origin[0] + (self.nx - 1) as f64 * self.h,
            self.origin[1] + (self.ny - 1) as f64 * self.h,
        ]
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    #[inline]
    pub fn is_wall(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        i == 0 || i + 1 == self.nx || (self.dim() == 2 && (j == 0 || j + 1 == self.ny))
    }

    /// Neighbour indices of node `k` (2 in 1D, 4 in 2D), skipping out-of-grid ones.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> {
        let (i, j) = self.ij(k);
        let (nx, ny) = (self.nx, self.ny);
        let cand = [
            (i > 0).then(|| k - 1),
            (i + 1 < nx).then(|| k + 1),
            (ny > 1 && j > 0).then(|| k - nx),
            (ny > 1 && j + 1 < ny).then(|| k + nx),
        ];
        cand.into_iter().flatten()
    }

    /// Nearest node to a point, clamped to the grid.
    pub fn nearest(&self, x: [f64; 2]) -> usize {
        let fi = ((x[0] - self.origin[0]) / self.h)
            .round()
            .clamp(0.0, (self.nx - 1) as f64);
        let fj = if self.dim() == 1 {
            0.0
        } else {
            ((x[1] - self.origin[1]) / self.h)
                .round()
                .clamp(0.0, (self.ny - 1) as f64)
        };
        self.idx(fi as usize, fj as usize)
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let u = self.upper();
        let inx = x[0] >= self.origin[0] - 1e-12 && x[0] <= u[0] + 1e-12;
        inx && (self.dim() == 1 || (x[1] >= self.origin[1] - 1e-12 && x[1] <= u[1] + 1e-12))
    }

    pub fn zeros(&self) -> Field {
        vec![0.0; self.len()]
    }

    pub fn from_fn(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        (0..self.len()).map(|k| f(self.point(k))).collect()
    }

    pub fn check_same(&self, other: &Grid) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::Mismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Bilinear (linear in 1D) interpolation of a nodal field.
    pub fn interpolate(&self, f: &[f64], x: [f64; 2]) -> f64 {
        let fx = ((x[0] - self.origin[0]) / self.h).clamp(0.0, (self.nx - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let tx = fx - i as f64;
        if self.dim() == 1 {
            return f[i] * (1.0 - tx) + f[i + 1] * tx;
        }
        let fy = ((x[1] - self.origin[1]) / self.h).clamp(0.0, (self.ny - 1) as f64);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let ty = fy - j as f64;
        let a = f[self.idx(i, j)] * (1.0 - tx) + f[self.idx(i + 1, j)] * tx;
        let b = f[self.idx(i, j + 1)] * (1.0 - tx) + f[self.idx(i + 1, j + 1)] * tx;
        a * (1.0 - ty) + b * ty
    }
}

/// Boolean node mask on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub grid: Grid,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn empty(grid: Grid) -> Self {
        Mask {
            grid,
            bits: vec![false; grid.len()],
        }
    }

    pub fn full(grid: Grid) -> Self {
        Mask {
            grid,
            bits: vec![true; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize) -> bool) -> Self {
        Mask {
            grid,
            bits: (0..grid.len()).map(f).collect(),
        }
    }

    #[inline]
    pub fn get(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Mask {
        Mask {
            grid: self.grid,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn and(&self, o: &Mask) -> Mask {
        Mask {
            grid: self.grid,
            bits: self
                .bits
                .iter()
                .zip(&o.bits)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn or(&self, o: &Mask) -> Mask {
        Mask {
            grid: self.grid,
            bits: self
                .bits
                .iter()
                .zip(&o.bits)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn minus(&self, o: &Mask) -> Mask {
        Mask {
            grid: self.grid,
            bits: self
                .bits
                .iter()
                .zip(&o.bits)
                .map(|(a, b)| *a && !*b)
                .collect(),
        }
    }

    pub fn is_subset_of(&self, o: &Mask) -> bool {
        self.bits.iter().zip(&o.bits).all(|(a, b)| !*a || *b)
    }

    pub fn intersects(&self, o: &Mask) -> bool {
        self.bits.iter().zip(&o.bits).any(|(a, b)| *a && *b)
    }

    /// Nodes not in the mask with at least one neighbour in the mask.
    pub fn outer_layer(&self) -> Mask {
        let g = self.grid;
        Mask::from_fn(g, |k| !self.bits[k] && g.neighbors(k).any(|n| self.bits[n]))
    }

    /// Graph dilation by `layers` neighbour steps.
    pub fn dilate(&self, layers: usize) -> Mask {
        let mut m = self.clone();
        for _ in 0..layers {
            let ring = m.outer_layer();
            m = m.or(&ring);
        }
        m
    }

    /// Largest distance between two mask nodes; exact for small masks, otherwise
    /// taken over the extreme points along 32 directions.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<[f64; 2]> = (0..self.grid.len())
            .filter(|&k| self.bits[k])
            .map(|k| self.grid.point(k))
            .collect();
        if pts.len() < 2 {
            return 0.0;
        }
        let mut best = 0.0f64;
        if pts.len() <= 4000 {
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    best = best.max(dist(pts[a], pts[b]));
                }
            }
            return best;
        }
        let dirs = 32;
        let mut ext = Vec::new();
        for d in 0..dirs {
            let th = std::f64::consts::PI * d as f64 / dirs as f64;
            let (c, s) = (th.cos(), th.sin());
            let key = |p: &[f64; 2]| p[0] * c + p[1] * s;
            let mx = pts
                .iter()
                .copied()
                .fold(pts[0], |a, p| if key(&p) > key(&a) { p } else { a });
            let mn = pts
                .iter()
                .copied()
                .fold(pts[0], |a, p| if key(&p) < key(&a) { p } else { a });
            ext.push(mx);
            ext.push(mn);
        }
        for a in 0..ext.len() {
            for b in a + 1..ext.len() {
                best = best.max(dist(ext[a], ext[b]));
            }
        }
        best
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

const MAGIC: &[u8; 8] = b"SCGRID01";

/// Writes a nodal field: magic, dims (u64 LE x2), spacing, origin (f64 LE), payload f64 LE row-major.
pub fn write_grid<W: Write>(mut w: W, grid: &Grid, data: &[f64]) -> Result<(), GridError> {
    if data.len() != grid.len() {
        return Err(GridError::Mismatch(format!(
            "payload {} for {} nodes",
            data.len(),
            grid.len()
        )));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(grid.nx as u64).to_le_bytes())?;
    w.write_all(&(grid.ny as u64).to_le_bytes())?;
    for v in [grid.h, grid.origin[0], grid.origin[1]] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_grid<R: Read>(mut r: R) -> Result<(Grid, Field), GridError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GridError::Format("magic mismatch".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8], GridError> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let nx = u64::from_le_bytes(next(&mut r)?) as usize;
    let ny = u64::from_le_bytes(next(&mut r)?) as usize;
    let h = f64::from_le_bytes(next(&mut r)?);
    let ox = f64::from_le_bytes(next(&mut r)?);
    let oy = f64::from_le_bytes(next(&mut r)?);
    if nx == 0 || ny == 0 || nx.saturating_mul(ny) > 1 << 32 || !(h > 0.0) {
        return Err(GridError::Format(format!(
            "bad header nx={nx} ny={ny} h={h}"
        )));
    }
    let grid = Grid {
        nx,
        ny,
        h,
        origin: [ox, oy],
    };
    let mut raw = vec![0u8; grid.len() * 8];
    r.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((grid, data))
}

pub fn save_grid(path: &Path, grid: &Grid, data: &[f64]) -> Result<(), GridError> {
    let f = std::fs::File::create(path)?;
    write_grid(io::BufWriter::new(f), grid, data)
}

pub fn load_grid(path: &Path) -> Result<(Grid, Field), GridError> {
    let f = std::fs::File::open(path)?;
    read_grid(io::BufReader::new(f))
}
