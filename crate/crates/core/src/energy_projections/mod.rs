//! Energy-orthogonal cut-offs π̄_t, π*_t via harmonic extension (Dirichlet principle).
//!
//! With I = nodes of Θ_t, B = nodes outside Θ_t within two grid steps of I (the
//! reach of the potential stencil) and F = the remaining interior nodes,
//! π̄ keeps h0 on I ∪ B, fills F with the extension that is harmonic for the
//! potential form, and keeps h1 on I only; π* = 1 − π̄. The two ranges are
//! exactly orthogonal and π* reads nothing inside Θ_t.

pub mod laplace;

use thiserror::Error;

pub use laplace::{pcg, Preconditioner, SolveStats};

use crate::grid::{Field, Mask};
use crate::wave_core::{CauchyPair, WaveError, WaveSolver};

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITER: usize = 800;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("harmonic extension solver failed: {0}")]
    SolverDivergence(String),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

#[derive(Debug, Clone)]
pub struct ProjectionContext<'a> {
    solver: &'a WaveSolver,
    inside: Mask,
    trace: Mask,
    free: Vec<bool>,
    precond: Preconditioner,
    tol: f64,
}

impl<'a> ProjectionContext<'a> {
    pub fn new(solver: &'a WaveSolver, inside: Mask, tol: f64) -> Self {
        let g = solver.grid();
        let trace = inside.dilate(2).minus(&inside);
        let free: Vec<bool> = (0..g.len())
            .map(|k| !g.is_wall(k) && !inside.get(k) && !trace.get(k))
            .collect();
        let precond = Preconditioner::build(&g, &free);
        ProjectionContext {
            solver,
            inside,
            trace,
            free,
            precond,
            tol,
        }
    }

    /// Same context, preconditioned by the diagonal only (slow; independent check).
    pub fn with_jacobi(mut self) -> Self {
        self.precond = Preconditioner::jacobi(&self.solver.grid(), &self.free);
        self
    }

    pub fn inside(&self) -> &Mask {
        &self.inside
    }

    /// The two-node trace layer outside Θ_t on which π̄ keeps h0.
    pub fn trace_layer(&self) -> &Mask {
        &self.trace
    }

    pub fn free_nodes(&self) -> &[bool] {
        &self.free
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn solver(&self) -> &WaveSolver {
        self.solver
    }

    /// Extension of h0|_{I ∪ B} that is harmonic for the potential form on F, zero on ∂Υ.
    pub fn extend(&self, h0: &[f64]) -> Result<(Field, SolveStats), ProjectionError> {
        let g = self.solver.grid();
        let n = g.len();
        let z: Vec<f64> = (0..n)
            .map(|k| if self.trace.get(k) { h0[k] } else { 0.0 })
            .collect();
        let mut az = vec![0.0; n];
        self.solver.apply_potential(&z, &mut az);
        let b: Vec<f64> = (0..n)
            .map(|k| if self.free[k] { -az[k] } else { 0.0 })
            .collect();
        let free = &self.free;
        let solver = self.solver;
        let op = move |p: &[f64], out: &mut [f64]| {
            solver.apply_potential(p, out);
            for k in 0..out.len() {
                if !free[k] {
                    out[k] = 0.0;
                }
            }
        };
        let scale = 1.0 / g.h.powi(g.dim() as i32 - 2);
        let pre = |r: &[f64]| {
            let mut z = self.precond.apply(r);
            for v in &mut z {
                *v *= scale;
            }
            z
        };
        let (x, stats) = pcg(&op, &pre, &b, self.tol, MAX_ITER)?;
        let mut phi = x;
        for k in 0..n {
            if self.inside.get(k) || self.trace.get(k) {
                phi[k] = h0[k];
            }
        }
        Ok((phi, stats))
    }

    pub fn harmonic_extension(&self, h0: &[f64]) -> Result<Field, ProjectionError> {
        Ok(self.extend(h0)?.0)
    }

    /// π̄_t h.
    pub fn project_inside(&self, h: &CauchyPair) -> Result<CauchyPair, ProjectionError> {
        let phi = self.harmonic_extension(&h.h0)?;
        let h1 = (0..h.grid.len())
            .map(|k| if self.inside.get(k) { h.h1[k] } else { 0.0 })
            .collect();
        Ok(CauchyPair::new(h.grid, phi, h1))
    }

    /// π*_t h; depends only on h outside Θ_t.
    pub fn project_outside(&self, h: &CauchyPair) -> Result<CauchyPair, ProjectionError> {
        let g = h.grid;
        let phi = self.harmonic_extension(&h.h0)?;
        let h0 = (0..g.len())
            .map(|k| if self.free[k] { h.h0[k] - phi[k] } else { 0.0 })
            .collect();
        let h1 = (0..g.len())
            .map(|k| {
                if self.inside.get(k) || g.is_wall(k) {
                    0.0
                } else {
                    h.h1[k]
                }
            })
            .collect();
        Ok(CauchyPair::new(g, h0, h1))
    }
}

/// π_C, realized as the identity (exact on data supported in Θ).
pub fn project_data_space(h: &CauchyPair, theta: &Mask) -> CauchyPair {
    let outside = theta.complement();
    let n = h.nonzero_count_on(&outside);
    if n > 0 {
        log::warn!(
            "π_C applied as identity to data with {n} nonzero nodes outside Θ (approximation)"
        );
    }
    h.clone()
}
