//! The outside measurement operator and its firewall.

use std::sync::Arc;

use super::cauchy::CauchyPair;
use super::solver::WaveSolver;
use super::WaveError;
use crate::grid::{Grid, Mask};

/// Value stored at hidden nodes; any arithmetic that touches it is poisoned.
pub const SENTINEL: f64 = f64::NAN;

/// Wavefield frames restricted to Ω^c. Interior values are replaced by a NaN
/// sentinel at construction and every accessor refuses interior nodes.
#[derive(Debug, Clone)]
pub struct OutsideView {
    grid: Grid,
    omega: Arc<Mask>,
    times: Vec<f64>,
    frames: Vec<(Vec<f64>, Vec<f64>)>,
}

impl OutsideView {
    pub(crate) fn from_frames(omega: Arc<Mask>, times: Vec<f64>, frames: Vec<CauchyPair>) -> Self {
        let grid = omega.grid;
        let frames = frames
            .into_iter()
            .map(|mut f| {
                for k in 0..grid.len() {
                    if omega.get(k) {
                        f.h0[k] = SENTINEL;
                        f.h1[k] = SENTINEL;
                    }
                }
                (f.h0, f.h1)
            })
            .collect();
        OutsideView {
            grid,
            omega,
            times,
            frames,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn hidden(&self) -> &Mask {
        &self.omega
    }

    /// (u, ∂t u) at node k of a frame.
    pub fn get(&self, frame: usize, k: usize) -> Result<(f64, f64), WaveError> {
        if self.omega.get(k) {
            return Err(WaveError::AccessViolation {
                node: k,
                point: self.grid.point(k),
            });
        }
        let (u, v) = &self.frames[frame];
        Ok((u[k], v[k]))
    }

    /// Cauchy data of a frame on `region` (zero elsewhere); `region` must avoid Ω.
    pub fn restrict(&self, frame: usize, region: &Mask) -> Result<CauchyPair, WaveError> {
        if let Some(k) = (0..self.grid.len()).find(|&k| region.get(k) && self.omega.get(k)) {
            return Err(WaveError::AccessViolation {
                node: k,
                point: self.grid.point(k),
            });
        }
        let (u, v) = &self.frames[frame];
        let pick = |f: &Vec<f64>| {
            (0..self.grid.len())
                .map(|k| if region.get(k) { f[k] } else { 0.0 })
                .collect()
        };
        Ok(CauchyPair::new(self.grid, pick(u), pick(v)))
    }

    pub fn last(&self) -> usize {
        self.frames.len() - 1
    }

    /// E_W of a frame for some W ⊂ Ω^c, using only visible values.
    pub fn energy_on(&self, solver: &WaveSolver, frame: usize, w: &Mask) -> Result<f64, WaveError> {
        // the local energy density at W needs neighbours of W, which must also be visible
        let support = w.dilate(1);
        let data = self.restrict(frame, &support)?;
        Ok(solver.energy_on(&data, w))
    }
}

/// 𝓕: runs the solver on exterior data and returns the masked view at `horizon`.
pub fn observe(
    solver: &WaveSolver,
    omega: &Arc<Mask>,
    h: &CauchyPair,
    horizon: f64,
) -> Result<OutsideView, WaveError> {
    observe_series(solver, omega, h, horizon, 0)
}

/// Same as `observe`, also keeping every `every`-th step (0: final frame only).
pub fn observe_series(
    solver: &WaveSolver,
    omega: &Arc<Mask>,
    h: &CauchyPair,
    horizon: f64,
    every: usize,
) -> Result<OutsideView, WaveError> {
    let n = h.nonzero_count_on(omega);
    if n > 0 {
        return Err(WaveError::SupportViolation { nodes: n });
    }
    let mut times = Vec::new();
    let mut frames = Vec::new();
    let dt = solver.dt() * horizon.signum();
    let end = solver.propagate_with(h, horizon, |step, state| {
        if every > 0 && step % every == 0 {
            times.push(step as f64 * dt);
            frames.push(state.clone());
        }
    })?;
    let steps = solver.steps_for(horizon)?;
    if every == 0 || steps % every != 0 {
        times.push(horizon);
        frames.push(end);
    }
    Ok(OutsideView::from_frames(omega.clone(), times, frames))
}
