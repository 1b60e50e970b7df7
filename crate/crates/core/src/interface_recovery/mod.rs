//! Interface location by wave-packet energy tracking: launch a packet at the
//! backward-traced normal covector, measure the kinetic energy that reaches
//! depth T + ε, extrapolate in 1/λ, and find the jumps of the T-profile.

use thiserror::Error;

use crate::grid::{Grid, Mask};
use crate::medium_geometry::{solve_depth, DomainChain, GeometryError, Shape, SpeedModel};
use crate::ray_oracle::{inward_normal, trace_ray, RayError, TraceOptions};
use crate::scattering_control::{ControlError, ControlOptions, Mode, ScatteringControl};
use crate::wave_core::{WaveError, WaveSolver};
use crate::wave_packets::{packet_cauchy_data, PacketData, PacketError, PacketSpec, MAX_LAMBDA_H};

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("caustic in the 2ε collar near {at:?} (Jacobian {jacobian:.3e})")]
    CausticInCollar { at: [f64; 2], jacobian: f64 },
    #[error("extrapolation residual {residual:.3e} exceeds 20% of the jump threshold {threshold:.3e}")]
    NoisyProfile { residual: f64, threshold: f64 },
    #[error("bad scan: {0}")]
    BadScan(String),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ray(#[from] RayError),
}

/// Θ = Ω_{−2ε} and the launch covector (p*, ν*) = γ'(−ε).
#[derive(Debug, Clone)]
pub struct ProbeSetup {
    pub p: [f64; 2],
    pub eps: f64,
    pub omega: Shape,
    pub theta: Shape,
    pub p_star: [f64; 2],
    pub nu_star: [f64; 2],
    pub c_collar: f64,
    /// Nodes where the fast-marching 2ε-dilation and `theta` disagree.
    pub theta_mismatch: usize,
    /// Smallest normalised Jacobian of the outward normal flow over the collar.
    pub collar_jacobian: f64,
}

impl ProbeSetup {
    /// Θ∖Ω̄ on a grid: where packet data may live.
    pub fn launch_region(&self, grid: &Grid) -> Mask {
        self.theta.mask(grid).minus(&self.omega.mask(grid).dilate(1))
    }
}

/// Boundary point nearest x, by Newton steps along the sdf gradient.
fn project_to_boundary(omega: &Shape, x: [f64; 2]) -> [f64; 2] {
    let mut q = x;
    for _ in 0..30 {
        let d = omega.sdf(q);
        let n = omega.outward_normal(q);
        q = [q[0] + d * n[0], q[1] + d * n[1]];
        if d.abs() < 1e-13 {
            break;
        }
    }
    q
}

const CAUSTIC_JACOBIAN: f64 = 0.05;

/// Builds Θ and the launch covector at p, checking that outward normal
/// geodesics from ∂Ω ∩ B(p, reach) do not focus within travel time 2ε.
pub fn setup_probe(
    model: &SpeedModel,
    grid: &Grid,
    omega: &Shape,
    p: [f64; 2],
    eps: f64,
    reach: f64,
) -> Result<ProbeSetup, RecoveryError> {
    if !(eps > 0.0) {
        return Err(RecoveryError::BadScan(format!("ε must be positive, got {eps}")));
    }
    let h = grid.h;
    if omega.sdf(p).abs() > 1e-6 * (1.0 + p[0].abs() + p[1].abs()) + 1e-3 * h {
        return Err(GeometryError::PNotOnBoundary(p).into());
    }
    let opts = TraceOptions::default();
    let n_in = inward_normal(omega, p, model.dim)?;
    let back = trace_ray(model, p, [-n_in[0], -n_in[1]], eps, opts)?;
    if let Some(at) = back.tir_at {
        return Err(RayError::TirTerminated(at).into());
    }
    let (p_star, _) = back.end();
    let d_end = *back.segments.last().unwrap_or(&[-n_in[0], -n_in[1]]);
    let nu_star = [-d_end[0], -d_end[1]];
    let c_collar = model.eval_speed(p_star)?;

    let mut collar_jacobian = f64::INFINITY;
    if model.dim == 2 {
        let tan = [-n_in[1], n_in[0]];
        let m = 24usize;
        let mut base = Vec::with_capacity(2 * m + 1);
        for i in 0..=2 * m {
            let s = reach * (i as f64 / m as f64 - 1.0);
            base.push(project_to_boundary(omega, [p[0] + s * tan[0], p[1] + s * tan[1]]));
        }
        let mut ends = Vec::with_capacity(base.len());
        for &q in &base {
            let ni = inward_normal(omega, q, 2)?;
            let path = trace_ray(model, q, [-ni[0], -ni[1]], 2.0 * eps, opts)?;
            ends.push(path.end().0);
        }
        for i in 0..base.len() - 1 {
            let dq = [base[i + 1][0] - base[i][0], base[i + 1][1] - base[i][1]];
            let l = dq[0].hypot(dq[1]);
            if l < 1e-12 {
                continue;
            }
            let t = [dq[0] / l, dq[1] / l];
            let de = [ends[i + 1][0] - ends[i][0], ends[i + 1][1] - ends[i][1]];
            let j = (de[0] * t[0] + de[1] * t[1]) / l;
            collar_jacobian = collar_jacobian.min(j);
            if j < CAUSTIC_JACOBIAN {
                return Err(RecoveryError::CausticInCollar {
                    at: base[i],
                    jacobian: j,
                });
            }
        }
    }

    let theta = Shape::Dilate {
        of: Box::new(omega.clone()),
        by: 2.0 * eps * c_collar,
    };
    let d = solve_depth(model, grid, omega)?;
    let fmm = Mask::from_fn(*grid, |k| d.values[k] > -2.0 * eps);
    let shape = theta.mask(grid);
    let theta_mismatch = (0..grid.len())
        .filter(|&k| fmm.get(k) != shape.get(k))
        .count();
    Ok(ProbeSetup {
        p,
        eps,
        omega: omega.clone(),
        theta,
        p_star,
        nu_star,
        c_collar,
        theta_mismatch,
        collar_jacobian,
    })
}

/// Largest |d*_Θ − (d*_Ω + 2ε)| over the nodes of Ω within `radius` of p.
pub fn collar_identity_error(
    model: &SpeedModel,
    grid: &Grid,
    probe: &ProbeSetup,
    radius: f64,
) -> Result<f64, RecoveryError> {
    let dt = solve_depth(model, grid, &probe.theta)?;
    let dw = solve_depth(model, grid, &probe.omega)?;
    Ok((0..grid.len())
        .filter(|&k| dw.values[k] > 0.0 && crate::grid::dist(grid.point(k), probe.p) < radius)
        .map(|k| (dt.values[k] - dw.values[k] - 2.0 * probe.eps).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy)]
pub struct KeOptions {
    pub mode: Mode,
    /// Control iterations for the outside-only surrogate.
    pub k: usize,
    pub tol: f64,
    /// In outside mode, also record the glass-box value.
    pub with_truth: bool,
}

impl Default for KeOptions {
    fn default() -> Self {
        KeOptions {
            mode: Mode::GlassBox,
            k: 6,
            tol: crate::energy_projections::DEFAULT_TOL,
            with_truth: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeSample {
    /// Requested depth T, and the step-snapped T + ε actually run.
    pub t: f64,
    pub t_run: f64,
    pub lambda: f64,
    pub launch_ke: f64,
    pub ke_glass: Option<f64>,
    pub ke_surrogate: Option<f64>,
}

impl KeSample {
    /// KE normalised by the launch KE, preferring the mode's own value.
    pub fn ratio(&self, mode: Mode) -> f64 {
        let v = match mode {
            Mode::GlassBox => self.ke_glass.or(self.ke_surrogate),
            Mode::Outside => self.ke_surrogate.or(self.ke_glass),
        };
        v.unwrap_or(f64::NAN) / self.launch_ke
    }
}

/// The packet h_{0,λ} for a probe on a grid.
pub fn probe_packet(
    model: &SpeedModel,
    grid: &Grid,
    probe: &ProbeSetup,
    lambda: f64,
) -> Result<PacketData, RecoveryError> {
    let spec = PacketSpec::new(lambda, probe.p_star, probe.nu_star)?;
    Ok(packet_cauchy_data(model, grid, &spec, &probe.launch_region(grid))?)
}

/// KE_{Θ_{T+ε}}(R_{T+ε}h_{0,λ}) for every T in `ts`.
///
/// Glass-box values come from one forward run with a snapshot per T. The
/// outside-only surrogate runs scattering control at T + ε through `chain`
/// (which must be built on the same grid with Θ = `probe.theta`).
pub fn measure_ke(
    model: &SpeedModel,
    grid: &Grid,
    probe: &ProbeSetup,
    ts: &[f64],
    lambda: f64,
    chain: Option<&DomainChain>,
    opts: &KeOptions,
) -> Result<Vec<KeSample>, RecoveryError> {
    if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.is_empty() {
        return Err(RecoveryError::BadScan("T samples must increase".into()));
    }
    let packet = probe_packet(model, grid, probe, lambda)?;
    let horizon = ts[ts.len() - 1] + probe.eps;
    let solver = WaveSolver::dividing(model, *grid, horizon)?;
    // half the conserved energy: the KE a forward wave settles to under the scheme
    let launch_ke = 0.5 * packet.energy(&solver);
    let mut out: Vec<KeSample> = ts
        .iter()
        .map(|&t| KeSample {
            t,
            t_run: solver.snap(t + probe.eps),
            lambda,
            launch_ke,
            ke_glass: None,
            ke_surrogate: None,
        })
        .collect();

    if opts.mode == Mode::GlassBox || opts.with_truth {
        let depth = solve_depth(model, grid, &probe.theta)?;
        let steps: Vec<usize> = out
            .iter()
            .map(|s| (s.t_run / solver.dt()).round() as usize)
            .collect();
        let regions: Vec<Mask> = out.iter().map(|s| depth.level_regions(s.t_run).0).collect();
        let mut ke = vec![0.0; out.len()];
        for part in [&packet.re, &packet.im] {
            solver.propagate_with(part, solver.snap(horizon), |n, st| {
                for (i, &m) in steps.iter().enumerate() {
                    if m == n {
                        ke[i] += solver.kinetic_on(st, &regions[i]);
                    }
                }
            })?;
        }
        for (s, v) in out.iter_mut().zip(ke) {
            s.ke_glass = Some(v);
        }
    }

    if opts.mode == Mode::Outside {
        let chain = chain.ok_or_else(|| {
            RecoveryError::BadScan("outside-only KE needs a domain chain".into())
        })?;
        for s in out.iter_mut() {
            let sv = WaveSolver::dividing(model, *grid, 2.0 * s.t_run)?;
            let sc = ScatteringControl::new(&sv, chain, s.t_run, opts.tol)?;
            let copts = ControlOptions {
                k: opts.k,
                stop_rel: None,
                mode: Mode::Outside,
                tol: opts.tol,
            };
            let mut v = 0.0;
            for part in [&packet.re, &packet.im] {
                let run = sc.iterate(part, &copts)?;
                v += run.ke_surrogate(run.stats.len() - 1);
            }
            s.ke_surrogate = Some(v);
        }
    }
    Ok(out)
}

/// Extrapolates samples (λ_i, v_i) to 1/λ → 0 with a least-squares line in
/// 1/λ; the residual is the largest misfit of that line. Two samples give the
/// plain two-point Richardson value with zero residual.
pub fn richardson(samples: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(l, v)| (1.0 / l, v)).collect();
    let n = pts.len() as f64;
    match pts.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (pts[0].1, 0.0),
        _ => {
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let slope = sxy / sxx;
            let icept = my - slope * mx;
            let misfit = pts
                .iter()
                .map(|p| (p.1 - icept - slope * p.0).abs())
                .fold(0.0, f64::max);
            (icept, misfit)
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectorOptions {
    /// Samples per side of the moving-median window.
    pub window: usize,
    /// Jump threshold in units of the noise level.
    pub threshold_sigma: f64,
    /// Lower bound on the noise level, in |dt⁺|² units.
    pub noise_floor: f64,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        DetectorOptions {
            window: 5,
            threshold_sigma: 3.0,
            noise_floor: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    /// Where the profile crosses the mid level between the two plateau medians.
    pub t_detected: f64,
    /// t_detected − ε/2: reflected energy stays inside Θ_{T+ε} until T = t + ε/2.
    pub t: f64,
    pub before: f64,
    pub after: f64,
    /// after / before: the transmission factor |dt⁺|² of this interface.
    pub magnitude: f64,
    pub score: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut w: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if w.is_empty() {
        return f64::NAN;
    }
    w.sort_by(f64::total_cmp);
    let n = w.len();
    if n % 2 == 1 {
        w[n / 2]
    } else {
        0.5 * (w[n / 2 - 1] + w[n / 2])
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub jumps: Vec<Jump>,
    pub sigma: f64,
    pub threshold: f64,
    /// Edge score at each gap between consecutive samples.
    pub scores: Vec<f64>,
}

/// Two-sided moving-median edge detector on a sampled profile.
///
/// The noise level is the robust (MAD) scale of first differences over the
/// leading `window` samples, floored at `noise_floor`.
pub fn detect_jumps(ts: &[f64], prof: &[f64], eps: f64, opts: &DetectorOptions) -> Detection {
    let n = prof.len();
    let w = opts.window.max(1);
    let lead = (w + 1).min(n);
    let diffs: Vec<f64> = prof[..lead].windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let sigma = (1.4826 * median(&diffs) / std::f64::consts::SQRT_2)
        .max(opts.noise_floor)
        .max(0.0);
    let sigma = if sigma.is_finite() { sigma } else { opts.noise_floor };
    let threshold = opts.threshold_sigma * sigma;
    let mut scores = vec![0.0; n.saturating_sub(1)];
    let mut sides = vec![(f64::NAN, f64::NAN); n.saturating_sub(1)];
    for g in 0..n.saturating_sub(1) {
        let l = &prof[(g + 1).saturating_sub(w)..=g];
        let r = &prof[g + 1..(g + 1 + w).min(n)];
        let (ml, mr) = (median(l), median(r));
        scores[g] = mr - ml;
        sides[g] = (ml, mr);
    }
    let mut jumps = Vec::new();
    let mut g = 0;
    while g < scores.len() {
        if scores[g].abs() <= threshold || !scores[g].is_finite() {
            g += 1;
            continue;
        }
        let sign = scores[g].signum();
        let start = g;
        while g < scores.len() && scores[g].abs() > threshold && scores[g].signum() == sign {
            g += 1;
        }
        let run = start..g;
        let best = run
            .clone()
            .max_by(|&a, &b| scores[a].abs().total_cmp(&scores[b].abs()))
            .unwrap();
        let (before, after) = sides[best];
        let mid = 0.5 * (before + after);
        // first crossing of the mid level inside the run's span of samples
        let lo = run.start;
        let hi = (run.end).min(n - 1);
        let mut t_cross = 0.5 * (ts[best] + ts[best + 1]);
        for i in lo..hi {
            let (a, b) = (prof[i] - mid, prof[i + 1] - mid);
            if a == 0.0 {
                t_cross = ts[i];
                break;
            }
            if a.signum() != b.signum() {
                t_cross = ts[i] + (ts[i + 1] - ts[i]) * a / (a - b);
                break;
            }
        }
        jumps.push(Jump {
            t_detected: t_cross,
            t: t_cross - 0.5 * eps,
            before,
            after,
            magnitude: after / before,
            score: scores[best],
        });
    }
    Detection {
        jumps,
        sigma,
        threshold,
        scores,
    }
}

/// Default λh for scan grids; finer than the packet's hard limit 0.25 so
/// sub-cell interface placement stays below the detector's noise floor.
pub const SCAN_LAMBDA_H: f64 = 0.125;
pub const DEFAULT_LAMBDAS: [f64; 3] = [8.0, 16.0, 32.0];

/// Computational box for a scan; each λ gets h = lambda_h / λ.
#[derive(Debug, Clone, Copy)]
pub struct ScanBox {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub lambda_h: f64,
}

impl ScanBox {
    pub fn grid_for(&self, lambda: f64) -> Result<Grid, RecoveryError> {
        let h = self.lambda_h.min(MAX_LAMBDA_H) / lambda;
        let cells = |a: f64, b: f64| ((b - a) / h).ceil() as usize;
        let g = if self.dim == 1 {
            Grid::new_1d(self.lo[0], self.hi[0], cells(self.lo[0], self.hi[0]))
        } else {
            Grid::new_2d(
                self.lo,
                h,
                [cells(self.lo[0], self.hi[0]), cells(self.lo[1], self.hi[1])],
            )
        };
        g.map_err(|e| RecoveryError::BadScan(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub t_grid: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub eps: f64,
    /// Half-length of the boundary stretch checked for collar caustics.
    pub reach: f64,
    pub ke: KeOptions,
    pub detector: DetectorOptions,
}

#[derive(Debug, Clone)]
pub struct EnergyScan {
    pub p: [f64; 2],
    pub t_samples: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub eps: f64,
    /// table[λ index][T index].
    pub table: Vec<Vec<KeSample>>,
    pub dt_estimates: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Estimates outside [0, 1.1].
    pub flagged: Vec<bool>,
    pub mode: Mode,
}

impl EnergyScan {
    pub fn ratios(&self, li: usize) -> Vec<f64> {
        self.table[li].iter().map(|s| s.ratio(self.mode)).collect()
    }
}

/// A boundary-normal-coordinate record (p, T) of a located interface.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceRecord {
    pub p: [f64; 2],
    pub depth: f64,
    pub transmission: f64,
    /// 1 − transmission: the energy fraction lost to reflection.
    pub reflection_loss: f64,
    /// Product of the transmission factors up to and including this one.
    pub cumulative: f64,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub probe: ProbeSetup,
    pub scan: EnergyScan,
    pub detection: Detection,
    pub interfaces: Vec<InterfaceRecord>,
    /// Largest extrapolation residual away from detected jumps.
    pub plateau_residual: f64,
    /// Largest profile variation within a plateau (between jumps).
    pub plateau_variation: f64,
    /// Whether the extrapolated profile is non-increasing up to the noise level.
    pub monotone: bool,
}

/// Full interface scan along the normal ray from p.
///
/// `chain_for` supplies the outside-mode domain chain on each λ-grid.
pub fn scan_and_locate(
    model: &SpeedModel,
    omega: &Shape,
    p: [f64; 2],
    bx: &ScanBox,
    cfg: &ScanConfig,
    chain_for: Option<&dyn Fn(&Grid, &ProbeSetup) -> Result<DomainChain, RecoveryError>>,
) -> Result<ScanResult, RecoveryError> {
    if cfg.lambdas.is_empty() || cfg.t_grid.len() < 3 {
        return Err(RecoveryError::BadScan(
            "need at least one λ and three T samples".into(),
        ));
    }
    let mut table = Vec::with_capacity(cfg.lambdas.len());
    let mut probe = None;
    for &lam in &cfg.lambdas {
        let grid = bx.grid_for(lam)?;
        let pr = setup_probe(model, &grid, omega, p, cfg.eps, cfg.reach)?;
        let chain = match (cfg.ke.mode, chain_for) {
            (Mode::Outside, Some(f)) => Some(f(&grid, &pr)?),
            _ => None,
        };
        log::info!("scan λ = {lam}: grid {}×{}", grid.nx, grid.ny);
        table.push(measure_ke(
            model,
            &grid,
            &pr,
            &cfg.t_grid,
            lam,
            chain.as_ref(),
            &cfg.ke,
        )?);
        probe.get_or_insert(pr);
    }
    let probe = probe.unwrap();
    let nt = cfg.t_grid.len();
    let mut dt_estimates = Vec::with_capacity(nt);
    let mut residuals = Vec::with_capacity(nt);
    for i in 0..nt {
        let pts: Vec<(f64, f64)> = cfg
            .lambdas
            .iter()
            .enumerate()
            .map(|(li, &l)| (l, table[li][i].ratio(cfg.ke.mode)))
            .collect();
        let (v, r) = richardson(&pts);
        dt_estimates.push(v);
        residuals.push(r);
    }
    let flagged: Vec<bool> = dt_estimates
        .iter()
        .map(|&v| !(0.0..=1.1).contains(&v))
        .collect();
    let detection = detect_jumps(&cfg.t_grid, &dt_estimates, cfg.eps, &cfg.detector);

    // Plateaus: split at the detected crossings and keep the samples where
    // every λ is locally flat (range over ±window/2 samples within the noise
    // level). Coarse λ leave a plateau first, and there extrapolation is not
    // trustworthy.
    let raw: Vec<Vec<f64>> = (0..cfg.lambdas.len())
        .map(|li| table[li].iter().map(|s| s.ratio(cfg.ke.mode)).collect())
        .collect();
    let mut cuts: Vec<usize> = detection
        .jumps
        .iter()
        .map(|j| cfg.t_grid.partition_point(|&t| t < j.t_detected))
        .collect();
    cuts.insert(0, 0);
    cuts.push(nt);
    let half = cfg.detector.window / 2;
    let mut plateau = vec![false; nt];
    let mut levels = Vec::with_capacity(cuts.len() - 1);
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        for i in a..b {
            let (l, u) = (i.saturating_sub(half).max(a), (i + half + 1).min(b));
            plateau[i] = raw.iter().all(|r| {
                let w = &r[l..u];
                let hi = w.iter().copied().fold(f64::MIN, f64::max);
                let lo = w.iter().copied().fold(f64::MAX, f64::min);
                hi - lo <= detection.sigma
            });
        }
        let kept: Vec<f64> = (a..b).filter(|&i| plateau[i]).map(|i| dt_estimates[i]).collect();
        levels.push(if kept.is_empty() { f64::NAN } else { median(&kept) });
    }
    let plateau_residual = (0..nt)
        .filter(|&i| plateau[i])
        .map(|i| residuals[i])
        .fold(0.0, f64::max);
    if plateau_residual > 0.2 * detection.threshold {
        return Err(RecoveryError::NoisyProfile {
            residual: plateau_residual,
            threshold: detection.threshold,
        });
    }
    let mut plateau_variation = 0.0f64;
    for seg in cuts.windows(2) {
        let vals: Vec<f64> = (seg[0]..seg[1])
            .filter(|&i| plateau[i])
            .map(|i| dt_estimates[i])
            .collect();
        if let (Some(a), Some(b)) = (
            vals.iter().copied().reduce(f64::max),
            vals.iter().copied().reduce(f64::min),
        ) {
            plateau_variation = plateau_variation.max(a - b);
        }
    }
    // plateau levels replace the detector's windowed medians when available
    let mut detection = detection;
    for (k, j) in detection.jumps.iter_mut().enumerate() {
        let (b, a) = (levels[k], levels[k + 1]);
        if b.is_finite() && a.is_finite() {
            j.before = b;
            j.after = a;
            j.magnitude = a / b;
        }
    }
    let monotone = dt_estimates
        .windows(2)
        .all(|p| p[1] <= p[0] + detection.threshold);

    let mut cumulative = 1.0;
    let interfaces = detection
        .jumps
        .iter()
        .filter(|j| j.score < 0.0)
        .map(|j| {
            cumulative *= j.magnitude;
            InterfaceRecord {
                p,
                depth: j.t,
                transmission: j.magnitude,
                reflection_loss: 1.0 - j.magnitude,
                cumulative,
            }
        })
        .collect();

    Ok(ScanResult {
        probe,
        scan: EnergyScan {
            p,
            t_samples: cfg.t_grid.clone(),
            lambdas: cfg.lambdas.clone(),
            eps: cfg.eps,
            table,
            dt_estimates,
            residuals,
            flagged,
            mode: cfg.ke.mode,
        },
        detection,
        interfaces,
        plateau_residual,
        plateau_variation,
        monotone,
    })
}
