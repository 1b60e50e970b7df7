//! The scattering control series h_{k+1} = h_0 + π*Rπ*R h_k with R = ν∘R_{2T},
//! the almost direct transmission it isolates, and the energy diagnostics.
//!
//! In outside-only mode every wavefield is obtained through `observe`, and only
//! its restriction to Θᶜ is read. π* needs nothing else, so both modes run the
//! same arithmetic and give identical iterates.

use std::sync::Arc;

use thiserror::Error;

use crate::energy_projections::{ProjectionContext, ProjectionError, DEFAULT_TOL};
use crate::grid::Mask;
use crate::medium_geometry::{solve_depth, DomainChain, GeometryError, SpeedModel};
use crate::wave_core::{observe, CauchyPair, WaveError, WaveSolver};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("T = {t} outside the admissible range (0, {max})")]
    TOutOfRange { t: f64, max: f64 },
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    GlassBox,
    Outside,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::GlassBox => "glassbox",
            Mode::Outside => "outside",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ControlOptions {
    /// Number of series terms after h_0.
    pub k: usize,
    /// Stop once the relative decrement of ‖π̄Rh_k‖ falls below this.
    pub stop_rel: Option<f64>,
    pub mode: Mode,
    pub tol: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions {
            k: 8,
            stop_rel: Some(1e-4),
            mode: Mode::GlassBox,
            tol: DEFAULT_TOL,
        }
    }
}

/// Diagnostics of one evaluated iterate h_k.
#[derive(Debug, Clone)]
pub struct IterateStats {
    /// ‖π̄Rh_k‖.
    pub norm: f64,
    pub hk_energy: f64,
    /// ‖π*Rh_k‖².
    pub exterior_projected: f64,
    /// E_{Θᶜ}(R_{2T}h_k).
    pub exterior_energy: f64,
    /// Potential energy of the harmonic extension of the ∂Θ trace of R_{2T}h_k, on Θᶜ.
    pub extension_energy: f64,
    /// max |h_k − h_0| on Θ.
    pub control_on_theta: f64,
    pub pcg_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ControlRun {
    pub h0: CauchyPair,
    pub t: f64,
    pub mode: Mode,
    pub iterates: Vec<CauchyPair>,
    pub stats: Vec<IterateStats>,
    /// π̄R_{2T}h_k, kept in glass-box mode only.
    pub interior: Vec<CauchyPair>,
    /// π*Rh_k, outside-computable.
    pub exterior: Vec<CauchyPair>,
    pub stopped_early: bool,
}

impl ControlRun {
    pub fn norms(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.norm).collect()
    }

    pub fn last(&self) -> &CauchyPair {
        self.iterates.last().expect("run has h_0")
    }

    /// SURROGATE outside-only estimate of KE(h_DT) from iterate k:
    /// ½(‖h_k‖² − E_{Θᶜ}(R_{2T}h_k) − PE_ext(k)), the ½ being equipartition.
    pub fn ke_surrogate(&self, k: usize) -> f64 {
        let s = &self.stats[k];
        0.5 * (s.hk_energy - s.exterior_energy - s.extension_energy)
    }

    /// ‖π̄R_{2T}h_{k+1} − π̄R_{2T}h_k‖ (glass-box runs).
    pub fn increments(&self, solver: &WaveSolver) -> Vec<f64> {
        self.interior
            .windows(2)
            .map(|w| solver.norm(&w[1].sub(&w[0])))
            .collect()
    }
}

/// Admissible T: below ½ diam Θ in travel time (bounded via c_max) and within the chain's sizing.
pub fn check_t(chain: &DomainChain, c_max: f64, t: f64) -> Result<(), ControlError> {
    let half = 0.5 * chain.theta_mask().diameter() / c_max;
    if t > 0.0 && t < half && t <= chain.t_max * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(ControlError::TOutOfRange {
            t,
            max: half.min(chain.t_max),
        })
    }
}

pub struct ScatteringControl<'a> {
    solver: &'a WaveSolver,
    omega: Arc<Mask>,
    theta: Mask,
    outside_theta: Mask,
    ctx: ProjectionContext<'a>,
    t: f64,
}

impl<'a> ScatteringControl<'a> {
    pub fn new(
        solver: &'a WaveSolver,
        chain: &DomainChain,
        t: f64,
        tol: f64,
    ) -> Result<Self, ControlError> {
        check_t(chain, solver.c_max(), t)?;
        solver.steps_for(2.0 * t)?;
        let masks = chain.masks();
        let ctx = ProjectionContext::new(solver, masks.theta.clone(), tol);
        Ok(ScatteringControl {
            solver,
            omega: Arc::new(masks.omega),
            outside_theta: masks.theta.complement(),
            theta: masks.theta,
            ctx,
            t,
        })
    }

    pub fn context(&self) -> &ProjectionContext<'a> {
        &self.ctx
    }

    pub fn theta(&self) -> &Mask {
        &self.theta
    }

    /// R h = ν R_{2T} h, returned as (full field if glass-box, restriction to Θᶜ).
    fn reflect(
        &self,
        h: &CauchyPair,
        mode: Mode,
    ) -> Result<(Option<CauchyPair>, CauchyPair), ControlError> {
        match mode {
            Mode::GlassBox => {
                let mut r = self.solver.propagate(h, 2.0 * self.t)?;
                r.time_reverse_in_place();
                let out = r.restricted(&self.outside_theta);
                Ok((Some(r), out))
            }
            Mode::Outside => {
                let view = observe(self.solver, &self.omega, h, 2.0 * self.t)?;
                let mut out = view.restrict(view.last(), &self.outside_theta)?;
                out.time_reverse_in_place();
                Ok((None, out))
            }
        }
    }

    /// π*R h, plus the stats that come for free.
    fn step(
        &self,
        h: &CauchyPair,
        mode: Mode,
    ) -> Result<(CauchyPair, Option<CauchyPair>, f64, f64, usize), ControlError> {
        let (full, out) = self.reflect(h, mode)?;
        let (phi, stats) = self.ctx.extend(&out.h0)?;
        let g = h.grid;
        let free = self.ctx.free_nodes();
        let h0 = (0..g.len())
            .map(|k| if free[k] { out.h0[k] - phi[k] } else { 0.0 })
            .collect();
        let h1 = (0..g.len())
            .map(|k| {
                if self.theta.get(k) || g.is_wall(k) {
                    0.0
                } else {
                    out.h1[k]
                }
            })
            .collect();
        let projected = CauchyPair::new(g, h0, h1);
        let exterior = self.solver.energy_on(&out, &self.outside_theta);
        let ext = CauchyPair::new(g, phi, g.zeros()).restricted(&self.outside_theta);
        let ext_energy = self.solver.energy_on(&ext, &self.outside_theta);
        let interior = full.map(|f| {
            let mut r = f.sub(&projected);
            // π̄ν = νπ̄, so undo the reversal to store π̄R_{2T}h
            r.time_reverse_in_place();
            r
        });
        Ok((projected, interior, exterior, ext_energy, stats.iterations))
    }

    pub fn iterate(
        &self,
        h0: &CauchyPair,
        opts: &ControlOptions,
    ) -> Result<ControlRun, ControlError> {
        if opts.mode == Mode::Outside {
            let n = h0.nonzero_count_on(&self.omega);
            if n > 0 {
                return Err(WaveError::SupportViolation { nodes: n }.into());
            }
        }
        let mut run = ControlRun {
            h0: h0.clone(),
            t: self.t,
            mode: opts.mode,
            iterates: vec![h0.clone()],
            stats: Vec::new(),
            interior: Vec::new(),
            exterior: Vec::new(),
            stopped_early: false,
        };
        let mut k = 0;
        loop {
            let hk = run.iterates[k].clone();
            let (p, interior, exterior, ext_energy, iters) = self.step(&hk, opts.mode)?;
            let hk_energy = self.solver.energy(&hk);
            let projected = self.solver.energy(&p);
            let norm = match &interior {
                Some(i) => self.solver.norm(i),
                None => (hk_energy - projected).max(0.0).sqrt(),
            };
            if let Some(i) = interior {
                run.interior.push(i);
            }
            let control_on_theta = hk.sub(h0).max_abs_on(&self.theta);
            run.stats.push(IterateStats {
                norm,
                hk_energy,
                exterior_projected: projected,
                exterior_energy: exterior,
                extension_energy: ext_energy,
                control_on_theta,
                pcg_iterations: iters,
            });
            log::debug!("k={k} ‖π̄Rh_k‖={norm:.6e} ‖h_k‖²={hk_energy:.6e}");
            if k >= 1 {
                if let Some(rel) = opts.stop_rel {
                    let prev = run.stats[k - 1].norm;
                    if prev > 0.0 && (prev - norm) / prev < rel {
                        run.stopped_early = k < opts.k;
                        run.exterior.push(p);
                        break;
                    }
                }
            }
            if k == opts.k {
                run.exterior.push(p);
                break;
            }
            let (q, _, _, _, _) = self.step(&p, opts.mode)?;
            run.exterior.push(p);
            run.iterates.push(h0.add(&q));
            k += 1;
        }
        Ok(run)
    }

    /// R_{−T}π̄R_{2T}h_k for every iterate; glass-box by nature.
    pub fn adt_recovered(&self, run: &ControlRun) -> Result<Vec<CauchyPair>, ControlError> {
        let mut out = Vec::with_capacity(run.iterates.len());
        for (k, h) in run.iterates.iter().enumerate().take(run.stats.len()) {
            let pb = match run.interior.get(k) {
                Some(i) => i.clone(),
                None => {
                    let r = self.solver.propagate(h, 2.0 * self.t)?;
                    let p = self.ctx.project_outside(&r.time_reverse())?.time_reverse();
                    r.sub(&p)
                }
            };
            out.push(self.solver.propagate(&pb, -self.t)?);
        }
        Ok(out)
    }
}

pub fn iterate(
    solver: &WaveSolver,
    chain: &DomainChain,
    h0: &CauchyPair,
    t: f64,
    opts: &ControlOptions,
) -> Result<ControlRun, ControlError> {
    ScatteringControl::new(solver, chain, t, opts.tol)?.iterate(h0, opts)
}

/// h_DT = π̄_T R_T h_0, with Θ_T taken from the true depth field.
pub fn adt_ground_truth(
    model: &SpeedModel,
    solver: &WaveSolver,
    chain: &DomainChain,
    h0: &CauchyPair,
    t: f64,
    tol: f64,
) -> Result<CauchyPair, ControlError> {
    check_t(chain, solver.c_max(), t)?;
    let depth = solve_depth(model, &chain.grid, &chain.theta)?;
    let (theta_t, _) = depth.level_regions(t);
    let ctx = ProjectionContext::new(solver, theta_t, tol);
    let r = solver.propagate(h0, t)?;
    Ok(ctx.project_inside(&r)?)
}

#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub norm_limit: f64,
    pub adt_norm: Option<f64>,
    pub adt_energy: Option<f64>,
    pub adt_kinetic: Option<f64>,
    /// Outside-only kinetic-energy estimate; a surrogate, not an exact formula.
    pub ke_surrogate: f64,
    pub relative_gap: Option<f64>,
}

pub fn energy_report(
    run: &ControlRun,
    solver: &WaveSolver,
    truth: Option<&CauchyPair>,
) -> EnergyReport {
    let norm_limit = run.stats.last().map_or(0.0, |s| s.norm);
    let ke_surrogate = if run.stats.is_empty() {
        0.0
    } else {
        run.ke_surrogate(run.stats.len() - 1)
    };
    let adt_norm = truth.map(|h| solver.norm(h));
    let gap = adt_norm.map(|n| {
        if n > 0.0 {
            (norm_limit - n).abs() / n
        } else {
            norm_limit
        }
    });
    EnergyReport {
        norm_limit,
        adt_norm,
        adt_energy: truth.map(|h| solver.energy(h)),
        adt_kinetic: truth.map(|h| solver.kinetic_total(h)),
        ke_surrogate,
        relative_gap: gap,
    }
}
