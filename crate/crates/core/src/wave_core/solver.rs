//! Velocity-Verlet time stepping of c⁻²u_tt = Δu on a node grid with zero
//! Dirichlet walls, and the discrete energy form it conserves.
//!
//! The mass at each node is the dual-cell average of c⁻², the stiffness is the
//! constant-coefficient 5-point (3-point in 1D) graph Laplacian. The conserved
//! quadratic of the scheme,
//!
//!   ⟨f, g⟩ = h^{d-2} [ Σ_edges Δf0·Δg0 − Σ_i θ_i (G f0)_i (G g0)_i ] + h^d Σ_i m_i f1_i g1_i,
//!
//! with θ_i = dt²/(4 h² m_i), is used as the energy inner product, so R_s is
//! unitary and exactly reversible up to round-off.

use super::cauchy::CauchyPair;
use super::WaveError;
use crate::grid::{Field, Grid, Mask};
use crate::medium_geometry::SpeedModel;

pub const CFL_1D: f64 = 0.9;
pub const CFL_2D: f64 = 0.5;

/// Sub-samples per axis for the dual-cell average of c⁻², by dimension.
const MASS_SUBSAMPLES: [usize; 2] = [32, 8];

#[derive(Debug, Clone)]
pub struct WaveSolver {
    grid: Grid,
    dt: f64,
    c_max: f64,
    mass: Field,
    coef: Field,
    theta: Field,
}

impl WaveSolver {
    pub fn cfl_limit(grid: &Grid, c_max: f64) -> f64 {
        let k = if grid.dim() == 1 { CFL_1D } else { CFL_2D };
        k * grid.h / c_max
    }

    pub fn new(model: &SpeedModel, grid: Grid, dt: f64) -> Result<Self, WaveError> {
        if model.dim != grid.dim() {
            return Err(WaveError::GridMismatch(format!(
                "{}D model on {}D grid",
                model.dim,
                grid.dim()
            )));
        }
        let limit = Self::cfl_limit(&grid, model.c_max);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(WaveError::CflViolation { dt, limit });
        }
        let mass = model.slowness2_field(&grid, MASS_SUBSAMPLES[grid.dim() - 1])?;
        let h2 = grid.h * grid.h;
        let mut coef = vec![0.0; grid.len()];
        let mut theta = vec![0.0; grid.len()];
        for k in 0..grid.len() {
            if !grid.is_wall(k) {
                coef[k] = 1.0 / (mass[k] * h2);
                theta[k] = dt * dt / (4.0 * h2 * mass[k]);
            }
        }
        Ok(WaveSolver {
            grid,
            dt,
            c_max: model.c_max,
            mass,
            coef,
            theta,
        })
    }

    /// Largest stable step that divides `base` evenly.
    pub fn dividing(model: &SpeedModel, grid: Grid, base: f64) -> Result<Self, WaveError> {
        let limit = Self::cfl_limit(&grid, model.c_max);
        let n = (base.abs() / limit * (1.0 - 1e-12)).ceil().max(1.0);
        Self::new(model, grid, base.abs() / n)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Nodal c⁻² (dual-cell average).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Number of steps for duration |s|; s must be a whole multiple of dt.
    pub fn steps_for(&self, s: f64) -> Result<usize, WaveError> {
        let n = s.abs() / self.dt;
        let r = n.round();
        if (n - r).abs() > 1e-7 * n.max(1.0) {
            return Err(WaveError::StepMismatch { s, dt: self.dt });
        }
        Ok(r as usize)
    }

    /// Rounds a duration to the nearest whole number of steps.
    pub fn snap(&self, s: f64) -> f64 {
        (s / self.dt).round() * self.dt
    }

    /// (G u)_k = 2d·u_k − Σ neighbours on interior nodes, zero on walls.
    pub fn graph_laplacian(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let nx = g.nx;
        if g.dim() == 1 {
            out[0] = 0.0;
            out[nx - 1] = 0.0;
            for i in 1..nx - 1 {
                out[i] = 2.0 * u[i] - u[i - 1] - u[i + 1];
            }
            return;
        }
        let ny = g.ny;
        out[..nx].fill(0.0);
        out[(ny - 1) * nx..].fill(0.0);
        for j in 1..ny - 1 {
            let r = j * nx;
            let (up, mid, dn) = (&u[r + nx..r + 2 * nx], &u[r..r + nx], &u[r - nx..r]);
            let o = &mut out[r..r + nx];
            o[0] = 0.0;
            o[nx - 1] = 0.0;
            for i in 1..nx - 1 {
                o[i] = 4.0 * mid[i] - mid[i - 1] - mid[i + 1] - up[i] - dn[i];
            }
        }
    }

    fn accel(&self, u: &[f64], a: &mut [f64]) {
        self.graph_laplacian(u, a);
        for (x, c) in a.iter_mut().zip(&self.coef) {
            *x *= -c;
        }
    }

    /// R_s. Negative s runs the same scheme with −dt, which inverts it.
    pub fn propagate(&self, h: &CauchyPair, s: f64) -> Result<CauchyPair, WaveError> {
        self.propagate_with(h, s, |_, _| {})
    }

    /// R_s with a callback after every step (and once for step 0).
    pub fn propagate_with(
        &self,
        h: &CauchyPair,
        s: f64,
        mut on_step: impl FnMut(usize, &CauchyPair),
    ) -> Result<CauchyPair, WaveError> {
        self.grid
            .check_same(&h.grid)
            .map_err(|e| WaveError::GridMismatch(e.to_string()))?;
        let n = self.steps_for(s)?;
        let dt = if s < 0.0 { -self.dt } else { self.dt };
        let mut st = h.clone();
        for k in 0..self.grid.len() {
            if self.grid.is_wall(k) {
                st.h0[k] = 0.0;
                st.h1[k] = 0.0;
            }
        }
        on_step(0, &st);
        if n == 0 {
            return Ok(st);
        }
        let half = 0.5 * dt;
        let mut a = vec![0.0; self.grid.len()];
        self.accel(&st.h0, &mut a);
        for step in 1..=n {
            for ((u, v), acc) in st.h0.iter_mut().zip(st.h1.iter_mut()).zip(&a) {
                *v += half * acc;
                *u += dt * *v;
            }
            self.accel(&st.h0, &mut a);
            for (v, acc) in st.h1.iter_mut().zip(&a) {
                *v += half * acc;
            }
            on_step(step, &st);
        }
        Ok(st)
    }

    fn edge_sum(&self, f: &[f64], g: &[f64], w: Option<&Mask>) -> f64 {
        let gr = &self.grid;
        let nx = gr.nx;
        let inw = |k: usize| w.map_or(true, |m| m.get(k));
        let mut acc = 0.0;
        for j in 0..gr.ny {
            for i in 0..nx - 1 {
                let k = j * nx + i;
                if inw(k) && inw(k + 1) {
                    acc += (f[k + 1] - f[k]) * (g[k + 1] - g[k]);
                }
            }
        }
        if gr.dim() == 2 {
            for j in 0..gr.ny - 1 {
                for i in 0..nx {
                    let k = j * nx + i;
                    if inw(k) && inw(k + nx) {
                        acc += (f[k + nx] - f[k]) * (g[k + nx] - g[k]);
                    }
                }
            }
        }
        acc
    }

    fn potential(&self, f: &[f64], g: &[f64], w: Option<&Mask>) -> f64 {
        let n = self.grid.len();
        let mut gf = vec![0.0; n];
        self.graph_laplacian(f, &mut gf);
        let corr: f64 = if std::ptr::eq(f, g) {
            (0..n)
                .filter(|&k| w.map_or(true, |m| m.get(k)))
                .map(|k| self.theta[k] * gf[k] * gf[k])
                .sum()
        } else {
            let mut gg = vec![0.0; n];
            self.graph_laplacian(g, &mut gg);
            (0..n)
                .filter(|&k| w.map_or(true, |m| m.get(k)))
                .map(|k| self.theta[k] * gf[k] * gg[k])
                .sum()
        };
        self.grid.h.powi(self.grid.dim() as i32 - 2) * (self.edge_sum(f, g, w) - corr)
    }

    fn kinetic(&self, f: &[f64], g: &[f64], w: Option<&Mask>) -> f64 {
        let s: f64 = (0..self.grid.len())
            .filter(|&k| w.map_or(true, |m| m.get(k)))
            .map(|k| self.mass[k] * f[k] * g[k])
            .sum();
        s * self.grid.cell_volume()
    }

    /// Energy inner product over Υ.
    pub fn inner(&self, f: &CauchyPair, g: &CauchyPair) -> f64 {
        self.potential(&f.h0, &g.h0, None) + self.kinetic(&f.h1, &g.h1, None)
    }

    /// Energy inner product with the density restricted to W (edges with both
    /// endpoints in W, nodes in W).
    pub fn inner_on(&self, f: &CauchyPair, g: &CauchyPair, w: &Mask) -> f64 {
        self.potential(&f.h0, &g.h0, Some(w)) + self.kinetic(&f.h1, &g.h1, Some(w))
    }

    pub fn norm(&self, h: &CauchyPair) -> f64 {
        self.inner(h, h).max(0.0).sqrt()
    }

    pub fn energy(&self, h: &CauchyPair) -> f64 {
        self.inner(h, h)
    }

    /// E_W(h).
    pub fn energy_on(&self, h: &CauchyPair, w: &Mask) -> f64 {
        self.inner_on(h, h, w)
    }

    /// KE_W(h) = ∫_W c⁻² |h1|².
    pub fn kinetic_on(&self, h: &CauchyPair, w: &Mask) -> f64 {
        self.kinetic(&h.h1, &h.h1, Some(w))
    }

    pub fn kinetic_total(&self, h: &CauchyPair) -> f64 {
        self.kinetic(&h.h1, &h.h1, None)
    }

    /// Potential part of the form, ⟨(f0,0),(g0,0)⟩.
    pub fn potential_form(&self, f0: &[f64], g0: &[f64]) -> f64 {
        self.potential(f0, g0, None)
    }

    /// Trapezoidal energy ∫|∇h0|² + c⁻²|h1|² without the step correction.
    pub fn plain_energy(&self, h: &CauchyPair) -> f64 {
        self.grid.h.powi(self.grid.dim() as i32 - 2) * self.edge_sum(&h.h0, &h.h0, None)
            + self.kinetic_total(h)
    }

    /// Applies the (self-adjoint) potential operator A = h^{d-2}(G − G Θ G) to u.
    pub fn apply_potential(&self, u: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        let mut gu = vec![0.0; n];
        self.graph_laplacian(u, &mut gu);
        for k in 0..n {
            gu[k] *= self.theta[k];
        }
        self.graph_laplacian(&gu, out);
        let mut g2 = vec![0.0; n];
        self.graph_laplacian(u, &mut g2);
        let s = self.grid.h.powi(self.grid.dim() as i32 - 2);
        for k in 0..n {
            out[k] = s * (g2[k] - out[k]);
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}
