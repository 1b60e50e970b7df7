//! Masked discrete Dirichlet solves: conjugate gradients on the potential
//! operator restricted to free nodes, preconditioned by a geometric multigrid
//! V-cycle (2D) or an exact tridiagonal solve (1D) of the graph Laplacian.

use super::ProjectionError;
use crate::grid::Grid;

/// Preconditioner for the masked graph Laplacian G_FF.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Tridiagonal { free: Vec<bool> },
    Multigrid { levels: Vec<Level> },
    Jacobi { diag: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Level {
    nx: usize,
    ny: usize,
    free: Vec<bool>,
}

const COARSEST_SWEEPS: usize = 40;

impl Level {
    fn residual(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        let nx = self.nx;
        for k in 0..x.len() {
            if !self.free[k] {
                r[k] = 0.0;
                continue;
            }
            let (i, j) = (k % nx, k / nx);
            let mut s = 4.0 * x[k];
            if i > 0 && self.free[k - 1] {
                s -= x[k - 1];
            }
            if i + 1 < nx && self.free[k + 1] {
                s -= x[k + 1];
            }
            if j > 0 && self.free[k - nx] {
                s -= x[k - nx];
            }
            if j + 1 < self.ny && self.free[k + nx] {
                s -= x[k + nx];
            }
            r[k] = b[k] - s;
        }
    }

    /// One colour of a red-black Gauss-Seidel sweep.
    fn sweep(&self, x: &mut [f64], b: &[f64], color: usize) {
        let nx = self.nx;
        for j in 0..self.ny {
            let start = (j + color) % 2;
            let mut i = start;
            while i < nx {
                let k = j * nx + i;
                if self.free[k] {
                    let mut s = b[k];
                    if i > 0 && self.free[k - 1] {
                        s += x[k - 1];
                    }
                    if i + 1 < nx && self.free[k + 1] {
                        s += x[k + 1];
                    }
                    if j > 0 && self.free[k - nx] {
                        s += x[k - nx];
                    }
                    if j + 1 < self.ny && self.free[k + nx] {
                        s += x[k + nx];
                    }
                    x[k] = 0.25 * s;
                }
                i += 2;
            }
        }
    }

    fn coarsen(&self) -> Option<Level> {
        if (self.nx - 1) % 2 != 0 || (self.ny - 1) % 2 != 0 || self.nx < 9 || self.ny < 9 {
            return None;
        }
        let (cx, cy) = ((self.nx - 1) / 2 + 1, (self.ny - 1) / 2 + 1);
        let free = (0..cx * cy)
            .map(|k| self.free[(k / cx) * 2 * self.nx + (k % cx) * 2])
            .collect();
        Some(Level {
            nx: cx,
            ny: cy,
            free,
        })
    }
}

fn restrict(f: &Level, c: &Level, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; c.nx * c.ny];
    let nx = f.nx;
    for (kc, o) in out.iter_mut().enumerate() {
        if !c.free[kc] {
            continue;
        }
        let (ic, jc) = (kc % c.nx, kc / c.nx);
        let (i, j) = (2 * ic, 2 * jc);
        let mut s = r[j * nx + i];
        for (di, dj, w) in [
            (-1i64, 0i64, 0.5),
            (1, 0, 0.5),
            (0, -1, 0.5),
            (0, 1, 0.5),
            (-1, -1, 0.25),
            (1, -1, 0.25),
            (-1, 1, 0.25),
            (1, 1, 0.25),
        ] {
            let (ii, jj) = (i as i64 + di, j as i64 + dj);
            if ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < f.ny {
                s += w * r[jj as usize * nx + ii as usize];
            }
        }
        *o = s;
    }
    out
}

fn prolong_add(f: &Level, c: &Level, e: &[f64], x: &mut [f64]) {
    let nx = f.nx;
    for j in 0..f.ny {
        for i in 0..nx {
            let k = j * nx + i;
            if !f.free[k] {
                continue;
            }
            let (ic, jc) = (i / 2, j / 2);
            let at = |a: usize, b: usize| e[b * c.nx + a];
            let v = match (i % 2, j % 2) {
                (0, 0) => at(ic, jc),
                (1, 0) => 0.5 * (at(ic, jc) + at(ic + 1, jc)),
                (0, 1) => 0.5 * (at(ic, jc) + at(ic, jc + 1)),
                _ => 0.25 * (at(ic, jc) + at(ic + 1, jc) + at(ic, jc + 1) + at(ic + 1, jc + 1)),
            };
            x[k] += v;
        }
    }
}

fn vcycle(levels: &[Level], b: &[f64]) -> Vec<f64> {
    let l = &levels[0];
    let mut x = vec![0.0; b.len()];
    if levels.len() == 1 {
        for _ in 0..COARSEST_SWEEPS {
            l.sweep(&mut x, b, 0);
            l.sweep(&mut x, b, 1);
        }
        for _ in 0..COARSEST_SWEEPS {
            l.sweep(&mut x, b, 1);
            l.sweep(&mut x, b, 0);
        }
        return x;
    }
    l.sweep(&mut x, b, 0);
    l.sweep(&mut x, b, 1);
    let mut r = vec![0.0; b.len()];
    l.residual(&x, b, &mut r);
    let bc = restrict(l, &levels[1], &r);
    let ec = vcycle(&levels[1..], &bc);
    prolong_add(l, &levels[1], &ec, &mut x);
    l.sweep(&mut x, b, 1);
    l.sweep(&mut x, b, 0);
    x
}

fn tridiagonal(free: &[bool], b: &[f64]) -> Vec<f64> {
    // Thomas algorithm on 2x_k − x_{k±1}, decoupled at fixed nodes
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut k = 0;
    while k < n {
        if !free[k] {
            k += 1;
            continue;
        }
        let s = k;
        while k < n && free[k] {
            k += 1;
        }
        let e = k;
        for i in s..e {
            let (a, c) = (
                if i > s { -1.0 } else { 0.0 },
                if i + 1 < e { -1.0 } else { 0.0 },
            );
            let denom = 2.0 - a * if i > s { cp[i - 1] } else { 0.0 };
            cp[i] = c / denom;
            dp[i] = (b[i] - a * if i > s { dp[i - 1] } else { 0.0 }) / denom;
        }
        for i in (s..e).rev() {
            x[i] = dp[i] - if i + 1 < e { cp[i] * x[i + 1] } else { 0.0 };
        }
    }
    x
}

impl Preconditioner {
    pub fn build(grid: &Grid, free: &[bool]) -> Self {
        if grid.dim() == 1 {
            return Preconditioner::Tridiagonal {
                free: free.to_vec(),
            };
        }
        let mut levels = vec![Level {
            nx: grid.nx,
            ny: grid.ny,
            free: free.to_vec(),
        }];
        while let Some(c) = levels.last().unwrap().coarsen() {
            levels.push(c);
        }
        Preconditioner::Multigrid { levels }
    }

    pub fn jacobi(grid: &Grid, free: &[bool]) -> Self {
        let d = 2.0 * grid.dim() as f64;
        Preconditioner::Jacobi {
            diag: free.iter().map(|&f| if f { d } else { 0.0 }).collect(),
        }
    }

    /// Approximately solves G_FF z = r (r zero off F).
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Tridiagonal { free } => tridiagonal(free, r),
            Preconditioner::Multigrid { levels } => vcycle(levels, r),
            Preconditioner::Jacobi { diag } => r
                .iter()
                .zip(diag)
                .map(|(v, d)| if *d > 0.0 { v / d } else { 0.0 })
                .collect(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Preconditioner::Multigrid { levels } => levels.len(),
            _ => 1,
        }
    }
}

/// Outcome of a PCG solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Preconditioned CG for an SPD operator on the free nodes. `apply_op` maps a
/// full-grid vector supported on F to the operator applied and restricted to F.
pub fn pcg(
    apply_op: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats), ProjectionError> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                rel_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply_op(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(ProjectionError::SolverDivergence(format!(
                "non-positive curvature {pap} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    rel_residual: rel,
                },
            ));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    Err(ProjectionError::SolverDivergence(format!(
        "no convergence after {max_iter} iterations (residual {rel:.3e})"
    )))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
