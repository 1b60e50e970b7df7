//! Harmonic inner products κ(g, f) of the almost direct transmission, the
//! coordinate chart Φ(p, T) they give, speed recovery c = |∂Φ/∂T|, and
//! redatuming to a smaller obstacle.
//!
//! For harmonic f, (−Tf, f) and (Tf, f) are Cauchy data of the same solution
//! f·(t − T)... at times 0 and 2T, so
//!
//!   ⟨π̄_T R_T h_0, (0, f)⟩ = lim_k ⟨h_k, (−Tf, f)⟩ − ⟨π*R_{2T}h_k, (Tf, f)⟩,
//!
//! and every term on the right is available outside Ω.

use thiserror::Error;

use crate::energy_projections::project_data_space;
use crate::grid::{Field, Grid};
use crate::medium_geometry::{shrink_sequence, DomainChain, GeometryError, Shape, SpeedModel};
use crate::scattering_control::{
    adt_ground_truth, ControlError, ControlOptions, ControlRun, ScatteringControl,
};
use crate::wave_core::{observe, CauchyPair, OutsideView, WaveError, WaveSolver};

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("probe is not discretely harmonic (residual {residual:e})")]
    NotHarmonic { residual: f64 },
    #[error("harmonic pairing does not settle: Cauchy differences {diffs:?}")]
    NonConvergent { diffs: Vec<f64> },
    #[error("κ(·, 1) = {value:e} is below 1e-10 of its scale {scale:e}")]
    DenominatorNearZero { value: f64, scale: f64 },
    #[error("need at least 3 increasing T samples, got {0}")]
    InsufficientSamples(usize),
    #[error("speed missing on Ω∖Ω̃ ({0} nodes)")]
    SpeedMissing(usize),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// Default smoothing width of the indicator 1_{Θ^(j)∖Ω}, in cells.
pub const INDICATOR_CELLS: f64 = 2.0;

/// 1_{outer∖Ω} with a C¹ ramp over `cells` grid cells on the inner side of its boundary.
pub fn smoothed_indicator(grid: &Grid, outer: &Shape, omega: &Shape, cells: f64) -> Field {
    let w = cells * grid.h;
    grid.from_fn(|x| {
        let d = outer.sdf(x).min(-omega.sdf(x));
        if d <= 0.0 {
            0.0
        } else if d >= w {
            1.0
        } else {
            let s = d / w;
            s * s * (3.0 - 2.0 * s)
        }
    })
}

/// Checks G f = 0 at every interior node, relative to max|f|.
pub fn check_harmonic(solver: &WaveSolver, f: &[f64]) -> Result<(), ReconError> {
    let mut gf = vec![0.0; f.len()];
    solver.graph_laplacian(f, &mut gf);
    let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let residual = gf.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
    if residual > 1e-8 {
        return Err(ReconError::NotHarmonic { residual });
    }
    Ok(())
}

/// Constant and coordinate probes 1, x (and y in 2D).
pub fn coordinate_probes(grid: &Grid) -> Vec<Field> {
    let mut v = vec![vec![1.0; grid.len()], grid.from_fn(|p| p[0])];
    if grid.dim() == 2 {
        v.push(grid.from_fn(|p| p[1]));
    }
    v
}

#[derive(Debug, Clone)]
pub struct KappaResult {
    /// Final bracket per probe.
    pub values: Vec<f64>,
    /// brackets[probe][k].
    pub brackets: Vec<Vec<f64>>,
    pub run_norms: Vec<f64>,
    /// h^d Σ m g: the pairing of h_0 with (0, 1), used as a scale.
    pub scale: f64,
}

/// Probe Cauchy data (R_{−T}(0, f), R_T(0, f)). Away from ∂Υ these are
/// (∓Tf, f); near the walls they carry the Dirichlet correction, which never
/// reaches Θ within time T and so depends on c outside Θ only.
pub fn probe_pair(
    solver: &WaveSolver,
    f: &[f64],
    t: f64,
) -> Result<(CauchyPair, CauchyPair), ReconError> {
    let g = solver.grid();
    let mut f = f.to_vec();
    for (k, v) in f.iter_mut().enumerate() {
        if g.is_wall(k) {
            *v = 0.0;
        }
    }
    let base = CauchyPair::new(g, g.zeros(), f);
    Ok((solver.propagate(&base, -t)?, solver.propagate(&base, t)?))
}

/// The bracket ⟨h_k, R_{−T}(0,f)⟩ − ⟨π*R_{2T}h_k, R_T(0,f)⟩ along a finished run.
pub fn lemma_brackets(
    solver: &WaveSolver,
    run: &ControlRun,
    early: &CauchyPair,
    late: &CauchyPair,
) -> Vec<f64> {
    run.iterates
        .iter()
        .zip(&run.exterior)
        .map(|(hk, ext)| solver.inner(hk, early) - solver.inner(&ext.time_reverse(), late))
        .collect()
}

fn check_settled(b: &[f64], scale: f64) -> Result<(), ReconError> {
    let diffs: Vec<f64> = b.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let n = diffs.len();
    if n >= 3 && diffs[n - 1] > diffs[0].max(1e-12 * scale) && diffs[n - 1] > diffs[n - 2] {
        return Err(ReconError::NonConvergent { diffs });
    }
    Ok(())
}

/// κ(g, f) for several harmonic probes f, from one scattering control run on
/// h_0 = (0, π_C g) with Θ = `chain.theta`.
pub fn kappa_probes(
    solver: &WaveSolver,
    chain: &DomainChain,
    g: &Field,
    probes: &[Field],
    t: f64,
    opts: &ControlOptions,
) -> Result<KappaResult, ReconError> {
    for f in probes {
        check_harmonic(solver, f)?;
    }
    let grid = chain.grid;
    let h0 = project_data_space(
        &CauchyPair::new(grid, grid.zeros(), g.clone()),
        &chain.theta_mask(),
    );
    let scale = solver
        .inner(
            &h0,
            &CauchyPair::new(grid, grid.zeros(), vec![1.0; grid.len()]),
        )
        .abs();
    let run = ScatteringControl::new(solver, chain, t, opts.tol)?.iterate(&h0, opts)?;
    let mut brackets = Vec::with_capacity(probes.len());
    for f in probes {
        let (early, late) = probe_pair(solver, f, t)?;
        brackets.push(lemma_brackets(solver, &run, &early, &late));
    }
    for b in &brackets {
        check_settled(b, scale)?;
    }
    Ok(KappaResult {
        values: brackets.iter().map(|b| *b.last().unwrap()).collect(),
        brackets,
        run_norms: run.norms(),
        scale,
    })
}

pub fn kappa(
    solver: &WaveSolver,
    chain: &DomainChain,
    g: &Field,
    f: &Field,
    t: f64,
    opts: &ControlOptions,
) -> Result<f64, ReconError> {
    Ok(kappa_probes(solver, chain, g, std::slice::from_ref(f), t, opts)?.values[0])
}

/// Glass-box value ⟨π̄_T R_T (0, g), (0, f)⟩ from the true depth field.
pub fn kappa_direct(
    model: &SpeedModel,
    solver: &WaveSolver,
    chain: &DomainChain,
    g: &Field,
    f: &Field,
    t: f64,
    tol: f64,
) -> Result<f64, ReconError> {
    let grid = chain.grid;
    let h0 = CauchyPair::new(grid, grid.zeros(), g.clone());
    let adt = adt_ground_truth(model, solver, chain, &h0, t, tol)?;
    Ok(solver.inner(&adt, &CauchyPair::new(grid, grid.zeros(), f.clone())))
}

#[derive(Debug, Clone)]
pub struct PointEstimate {
    pub p: [f64; 2],
    pub t: f64,
    pub y: [f64; 2],
    /// κ-ratio estimate for each j = 1..j_max.
    pub per_j: Vec<[f64; 2]>,
    pub denominators: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Φ(p, T) from the κ-ratios over the shrinking family Θ^(j) at p.
pub fn reconstruct_point(
    solver: &WaveSolver,
    chain: &DomainChain,
    p: [f64; 2],
    t: f64,
    eps1: f64,
    j_max: usize,
    opts: &ControlOptions,
) -> Result<PointEstimate, ReconError> {
    let grid = chain.grid;
    let thetas = shrink_sequence(chain, p, eps1, j_max)?;
    let probes = coordinate_probes(&grid);
    let t = solver.snap(t);
    let mut per_j = Vec::new();
    let mut denominators = Vec::new();
    let mut eps = Vec::new();
    for (j, theta) in thetas.iter().enumerate() {
        let cj = chain.with_probe_theta(theta.clone())?;
        let g = smoothed_indicator(&grid, theta, &chain.omega, INDICATOR_CELLS);
        let k = kappa_probes(solver, &cj, &g, &probes, t, opts)?;
        let den = k.values[0];
        if !(den.abs() >= 1e-10 * k.scale) || k.scale == 0.0 {
            return Err(ReconError::DenominatorNearZero {
                value: den,
                scale: k.scale,
            });
        }
        let y = [
            k.values[1] / den,
            if grid.dim() == 2 {
                k.values[2] / den
            } else {
                0.0
            },
        ];
        log::debug!("p={p:?} T={t} j={} y={y:?} κ(·,1)={den:.4e}", j + 1);
        per_j.push(y);
        denominators.push(den);
        eps.push(crate::medium_geometry::bump_radius(eps1, j + 1));
    }
    Ok(PointEstimate {
        p,
        t,
        y: *per_j.last().unwrap(),
        per_j,
        denominators,
        eps,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SpeedSample {
    pub t: f64,
    pub y: [f64; 2],
    pub c_est: f64,
    /// Outside [c_min, c_max] widened by the slack.
    pub out_of_bounds: bool,
}

/// c_est = |∂Φ/∂T| by centred differences (one-sided at the ends).
pub fn reconstruct_speed(
    chart: &[(f64, [f64; 2])],
    c_min: f64,
    c_max: f64,
    slack: f64,
) -> Result<Vec<SpeedSample>, ReconError> {
    let n = chart.len();
    if n < 3 || chart.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(ReconError::InsufficientSamples(n));
    }
    let d = |a: &(f64, [f64; 2]), b: &(f64, [f64; 2])| crate::grid::dist(a.1, b.1) / (b.0 - a.0);
    Ok((0..n)
        .map(|i| {
            let c_est = if i == 0 {
                d(&chart[0], &chart[1])
            } else if i == n - 1 {
                d(&chart[n - 2], &chart[n - 1])
            } else {
                crate::grid::dist(chart[i - 1].1, chart[i + 1].1)
                    / (chart[i + 1].0 - chart[i - 1].0)
            };
            let out_of_bounds = !(c_est >= c_min * (1.0 - slack) && c_est <= c_max * (1.0 + slack));
            SpeedSample {
                t: chart[i].0,
                y: chart[i].1,
                c_est,
                out_of_bounds,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct JumpEstimate {
    /// Travel-time depth of the crossing.
    pub t: f64,
    pub y: [f64; 2],
    pub c_above: f64,
    pub c_below: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Locates a single speed jump along a chart from its interval speeds
/// |Φ_{i+1} − Φ_i|/ΔT. The interval with the crossing mixes the two plateau
/// speeds linearly, which fixes the crossing time inside it.
pub fn locate_speed_jump(chart: &[(f64, [f64; 2])]) -> Option<JumpEstimate> {
    if chart.len() < 4 {
        return None;
    }
    let iv: Vec<f64> = chart
        .windows(2)
        .map(|w| crate::grid::dist(w[0].1, w[1].1) / (w[1].0 - w[0].0))
        .collect();
    // split point maximizing the contrast between the medians on either side
    let mut best: Option<(f64, usize)> = None;
    for s in 1..iv.len() {
        let mut a: Vec<f64> = iv[..s].to_vec();
        let mut b: Vec<f64> = iv[s..].to_vec();
        let c = (median(&mut a) - median(&mut b)).abs();
        if best.map_or(true, |(bc, _)| c > bc) {
            best = Some((c, s));
        }
    }
    let (_, s) = best?;
    // the mixed interval is whichever neighbour of the split lies further from its plateau
    let mut above: Vec<f64> = iv[..s].to_vec();
    let mut below: Vec<f64> = iv[s..].to_vec();
    let (c1, c2) = (median(&mut above), median(&mut below));
    if (c2 - c1).abs() < 1e-12 {
        return None;
    }
    let cand = |i: usize| ((iv[i] - c1) / (c2 - c1)).clamp(0.0, 1.0);
    let dev = |i: usize| {
        let f = cand(i);
        f.min(1.0 - f)
    };
    let i = if s >= 1 && dev(s - 1) > dev(s) {
        s - 1
    } else {
        s
    };
    let (t0, t1) = (chart[i].0, chart[i + 1].0);
    // iv = (c1 (t* − t0) + c2 (t1 − t*)) / (t1 − t0)
    let frac = ((c2 - iv[i]) / (c2 - c1)).clamp(0.0, 1.0);
    let ts = t0 + frac * (t1 - t0);
    let (a, b) = (chart[i].1, chart[i + 1].1);
    let len = crate::grid::dist(a, b).max(1e-300);
    let along = c1 * (ts - t0) / len;
    let y = [a[0] + along * (b[0] - a[0]), a[1] + along * (b[1] - a[1])];
    Some(JumpEstimate {
        t: ts,
        y,
        c_above: c1,
        c_below: c2,
    })
}

/// The lab stand-in for the redatumed measurement operator of a smaller obstacle:
/// speed `outer` on Ωᶜ, the supplied (reconstructed) speed on Ω∖Ω̃, and the
/// physical medium on Ω̃.
#[derive(Debug, Clone)]
pub struct Redatumed {
    pub model: SpeedModel,
    pub solver: WaveSolver,
    pub omega_tilde: Shape,
}

impl Redatumed {
    pub fn observe(&self, h: &CauchyPair, horizon: f64) -> Result<OutsideView, ReconError> {
        let m = std::sync::Arc::new(self.omega_tilde.mask(&self.solver.grid()));
        Ok(observe(&self.solver, &m, h, horizon)?)
    }
}

pub fn redatum(
    outer: &SpeedModel,
    supplied: Option<&SpeedModel>,
    physical: &SpeedModel,
    omega: &Shape,
    omega_tilde: &Shape,
    grid: Grid,
    dt_base: f64,
) -> Result<Redatumed, ReconError> {
    let ring = omega.mask(&grid).minus(&omega_tilde.mask(&grid));
    let inner = match supplied {
        Some(s) => s.spliced(physical, omega_tilde),
        None if ring.count() == 0 => physical.clone(),
        None => return Err(ReconError::SpeedMissing(ring.count())),
    };
    let model = outer.spliced(&inner, omega);
    let solver = WaveSolver::dividing(&model, grid, dt_base)?;
    Ok(Redatumed {
        model,
        solver,
        omega_tilde: omega_tilde.clone(),
    })
}
