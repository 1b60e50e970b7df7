use std::path::Path;

use rayon::prelude::*;

use sclab::energy_projections::DEFAULT_TOL;
use sclab::grid::Grid;
use sclab::harmonic_recon::{locate_speed_jump, reconstruct_point, reconstruct_speed};
use sclab::interface_recovery::{
    scan_and_locate, DetectorOptions, KeOptions, ProbeSetup, RecoveryError, ScanBox, ScanConfig,
    DEFAULT_LAMBDAS, SCAN_LAMBDA_H,
};
use sclab::medium_geometry::{build_speed_model, DomainChain, SpeedModel};
use sclab::ray_oracle::{dt_symbol, regularity_check, trace_ray, RegularityOptions, TraceOptions};
use sclab::scattering_control::{
    adt_ground_truth, energy_report, ControlOptions, Mode, ScatteringControl,
};
use sclab::wave_core::{CauchyPair, WaveSolver};

use crate::config::{require, ExperimentConfig, InitialSpec, RunInfo};
use crate::output::{Csv, Outputs};
use crate::CliError;

pub struct Ctx<'a> {
    pub out: &'a Path,
    pub mode: Mode,
    pub workers: usize,
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn num_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn model_of(cfg: &ExperimentConfig) -> Result<SpeedModel, CliError> {
    build_speed_model(cfg.model_config()).map_err(cfg_err)
}

fn grid_of(cfg: &ExperimentConfig, model: &SpeedModel) -> Result<Grid, CliError> {
    let g = require(&cfg.grid, "grid")?.build()?;
    if g.dim() != model.dim {
        return Err(CliError::Config(format!(
            "{}D grid for a {}D model",
            g.dim(),
            model.dim
        )));
    }
    Ok(g)
}

/// Fixed dt from the config (checked against CFL), else the largest stable
/// divisor of `base`; the chosen dt is written back for the manifest.
fn solver_of(
    cfg: &mut ExperimentConfig,
    model: &SpeedModel,
    grid: Grid,
    base: f64,
) -> Result<WaveSolver, CliError> {
    let s = match cfg.dt {
        Some(dt) => WaveSolver::new(model, grid, dt),
        None => WaveSolver::dividing(model, grid, base),
    }
    .map_err(cfg_err)?;
    cfg.dt = Some(s.dt());
    Ok(s)
}

fn chain_of(cfg: &ExperimentConfig, model: &SpeedModel, grid: Grid) -> Result<DomainChain, CliError> {
    let c = require(&cfg.chain, "chain")?;
    DomainChain::new(model, grid, c.omega.clone(), c.theta.clone(), c.t_max).map_err(cfg_err)
}

fn initial_data(model: &SpeedModel, grid: &Grid, init: &InitialSpec) -> Result<CauchyPair, CliError> {
    if !(init.radius > 0.0) {
        return Err(CliError::Config("initial.radius must be positive".into()));
    }
    let w = init.radius;
    let a = init.amplitude;
    let mut h0 = grid.zeros();
    let mut h1 = grid.zeros();
    let dir = match init.direction {
        Some(d) => {
            let n = d[0].hypot(d[1]);
            if !(n > 0.0) {
                return Err(CliError::Config("initial.direction must be nonzero".into()));
            }
            Some([d[0] / n, d[1] / n])
        }
        None => None,
    };
    for k in 0..grid.len() {
        if grid.is_wall(k) {
            continue;
        }
        let x = grid.point(k);
        let d = [x[0] - init.center[0], x[1] - init.center[1]];
        let r = d[0].hypot(d[1]);
        if r >= w {
            continue;
        }
        let u = std::f64::consts::FRAC_PI_2 * r / w;
        h0[k] = a * u.cos().powi(4);
        if let (Some(e), true) = (dir, r > 0.0) {
            // radial derivative of cos⁴, projected on e
            let dr = -4.0 * a * u.cos().powi(3) * u.sin() * std::f64::consts::FRAC_PI_2 / w;
            let de = dr * (d[0] * e[0] + d[1] * e[1]) / r;
            h1[k] = -model.eval_speed(x).map_err(cfg_err)? * de;
        }
    }
    Ok(CauchyPair::new(*grid, h0, h1))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))
}

fn run_info(command: &str, ctx: &Ctx) -> RunInfo {
    RunInfo {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: ctx.mode.name().into(),
        workers: ctx.workers,
        outputs: Vec::new(),
    }
}

pub fn forward(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let model = model_of(&cfg)?;
    let grid = grid_of(&cfg, &model)?;
    let spec = require(&cfg.forward, "forward")?.clone();
    let solver = solver_of(&mut cfg, &model, grid, spec.t_final)?;
    let n = solver.steps_for(spec.t_final).map_err(cfg_err)?;
    let mut snap_steps = Vec::new();
    for &t in &spec.snapshots {
        if !(0.0..=spec.t_final).contains(&t) {
            return Err(CliError::Config(format!("snapshot time {t} outside [0, t_final]")));
        }
        snap_steps.push(solver.steps_for(t).map_err(cfg_err)?);
    }
    let h0 = initial_data(&model, &grid, &spec.initial)?;
    log::info!("forward: {} steps of dt = {}", n, solver.dt());

    let mut energy = Csv::new(&["step", "t", "energy", "kinetic"]);
    let mut snaps: Vec<(usize, CauchyPair)> = Vec::new();
    solver
        .propagate_with(&h0, spec.t_final, |step, st| {
            energy.row(vec![
                step.into(),
                (step as f64 * solver.dt()).into(),
                solver.energy(st).into(),
                solver.kinetic_total(st).into(),
            ]);
            for (i, &m) in snap_steps.iter().enumerate() {
                if m == step {
                    snaps.push((i, st.clone()));
                }
            }
        })
        .map_err(num_err)?;
    snaps.sort_by_key(|s| s.0);

    let mut out = Outputs::new(ctx.out)?;
    out.csv("energy.csv", &energy)?;
    let mut index = Csv::new(&["index", "step", "t", "file"]);
    for (i, st) in &snaps {
        let name = format!("snapshot_{i:04}.bin");
        out.binary(&name, &[&st.h0, &st.h1])?;
        index.row(vec![
            (*i).into(),
            snap_steps[*i].into(),
            (snap_steps[*i] as f64 * solver.dt()).into(),
            name.as_str().into(),
        ]);
    }
    out.csv("snapshots.csv", &index)?;
    out.manifest(&cfg, run_info("forward", ctx))
}

pub fn control(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let model = model_of(&cfg)?;
    let grid = grid_of(&cfg, &model)?;
    let chain = chain_of(&cfg, &model, grid)?;
    let spec = require(&cfg.control, "control")?.clone();
    let solver = solver_of(&mut cfg, &model, grid, 2.0 * spec.t)?;
    let tol = spec.tol.unwrap_or(DEFAULT_TOL);
    let sc = ScatteringControl::new(&solver, &chain, spec.t, tol).map_err(cfg_err)?;
    let h0 = initial_data(&model, &grid, &spec.initial)?;
    if ctx.mode == Mode::Outside {
        let n = h0.nonzero_count_on(&chain.omega_mask());
        if n > 0 {
            return Err(CliError::Config(format!(
                "SupportViolation: initial data is nonzero at {n} nodes inside Ω"
            )));
        }
    }
    let opts = ControlOptions {
        k: spec.k,
        stop_rel: spec.stop_rel,
        mode: ctx.mode,
        tol,
    };
    if let Some(c) = cfg.control.as_mut() {
        c.tol = Some(tol);
    }
    let run = sc.iterate(&h0, &opts).map_err(num_err)?;
    let truth = match ctx.mode {
        Mode::GlassBox => {
            Some(adt_ground_truth(&model, &solver, &chain, &h0, spec.t, tol).map_err(num_err)?)
        }
        Mode::Outside => None,
    };
    let rep = energy_report(&run, &solver, truth.as_ref());

    let mut norms = Csv::new(&[
        "k",
        "norm",
        "hk_energy",
        "exterior_projected",
        "exterior_energy",
        "extension_energy",
        "ke_surrogate",
        "pcg_iterations",
    ]);
    for (k, s) in run.stats.iter().enumerate() {
        norms.row(vec![
            k.into(),
            s.norm.into(),
            s.hk_energy.into(),
            s.exterior_projected.into(),
            s.exterior_energy.into(),
            s.extension_energy.into(),
            run.ke_surrogate(k).into(),
            s.pcg_iterations.into(),
        ]);
    }
    let mut report = Csv::new(&["quantity", "value"]);
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    for (name, v) in [
        ("norm_limit", rep.norm_limit),
        ("adt_norm", opt(rep.adt_norm)),
        ("adt_energy", opt(rep.adt_energy)),
        ("adt_kinetic", opt(rep.adt_kinetic)),
        ("ke_surrogate", rep.ke_surrogate),
        ("relative_gap", opt(rep.relative_gap)),
    ] {
        report.row(vec![name.into(), v.into()]);
    }
    let mut out = Outputs::new(ctx.out)?;
    out.csv("norms.csv", &norms)?;
    out.csv("report.csv", &report)?;
    let last = run.last();
    out.binary("h_last.bin", &[&last.h0, &last.h1])?;
    out.manifest(&cfg, run_info("control", ctx))
}

pub fn reconstruct(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let model = model_of(&cfg)?;
    let grid = grid_of(&cfg, &model)?;
    let chain = chain_of(&cfg, &model, grid)?;
    let spec = require(&cfg.reconstruct, "reconstruct")?.clone();
    if spec.t_samples.len() < 3 || spec.t_samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Config(
            "reconstruct.t_samples: need at least three increasing times".into(),
        ));
    }
    if spec.points.is_empty() || spec.j_max == 0 {
        return Err(CliError::Config("reconstruct: need points and j_max ≥ 1".into()));
    }
    let solver = solver_of(&mut cfg, &model, grid, spec.t_samples[0])?;
    let tol = spec.tol.unwrap_or(DEFAULT_TOL);
    let slack = spec.slack.unwrap_or(0.1);
    if let Some(r) = cfg.reconstruct.as_mut() {
        r.tol = Some(tol);
        r.slack = Some(slack);
    }
    let opts = ControlOptions {
        k: spec.k,
        stop_rel: None,
        mode: ctx.mode,
        tol,
    };
    let cells: Vec<(usize, f64)> = (0..spec.points.len())
        .flat_map(|i| spec.t_samples.iter().map(move |&t| (i, t)))
        .collect();
    let est = pool(ctx.workers)?.install(|| {
        cells
            .par_iter()
            .map(|&(i, t)| {
                reconstruct_point(&solver, &chain, spec.points[i], t, spec.eps1, spec.j_max, &opts)
            })
            .collect::<Result<Vec<_>, _>>()
    });
    let est = est.map_err(num_err)?;

    let mc = cfg.model_config();
    let mut chart_csv = Csv::new(&["p_index", "t", "y0", "y1", "c_est", "residual", "out_of_bounds"]);
    let mut jumps = Csv::new(&["p_index", "t", "y0", "y1", "c_above", "c_below"]);
    let nt = spec.t_samples.len();
    for i in 0..spec.points.len() {
        let mine = &est[i * nt..(i + 1) * nt];
        let chart: Vec<(f64, [f64; 2])> = mine.iter().map(|e| (e.t, e.y)).collect();
        let speeds = reconstruct_speed(&chart, mc.c_min, mc.c_max, slack).map_err(num_err)?;
        for (e, s) in mine.iter().zip(&speeds) {
            let res = match e.per_j.len() {
                0 | 1 => 0.0,
                n => sclab::grid::dist(e.per_j[n - 1], e.per_j[n - 2]),
            };
            chart_csv.row(vec![
                i.into(),
                s.t.into(),
                s.y[0].into(),
                s.y[1].into(),
                s.c_est.into(),
                res.into(),
                s.out_of_bounds.into(),
            ]);
        }
        if let Some(j) = locate_speed_jump(&chart) {
            jumps.row(vec![
                i.into(),
                j.t.into(),
                j.y[0].into(),
                j.y[1].into(),
                j.c_above.into(),
                j.c_below.into(),
            ]);
        }
    }
    let mut out = Outputs::new(ctx.out)?;
    out.csv("chart.csv", &chart_csv)?;
    out.csv("speed_jumps.csv", &jumps)?;
    out.manifest(&cfg, run_info("reconstruct-speed", ctx))
}

pub fn locate(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let model = model_of(&cfg)?;
    let spec = require(&cfg.locate, "locate")?.clone();
    if !(spec.t_step > 0.0 && spec.t_stop > spec.t_start && spec.t_start > 0.0) {
        return Err(CliError::Config(
            "locate: need 0 < t_start < t_stop and t_step > 0".into(),
        ));
    }
    let nt = ((spec.t_stop - spec.t_start) / spec.t_step + 1e-9).floor() as usize;
    let t_grid: Vec<f64> = (0..=nt).map(|i| spec.t_start + i as f64 * spec.t_step).collect();
    let lambdas = spec.lambdas.clone().unwrap_or(DEFAULT_LAMBDAS.to_vec());
    let d = DetectorOptions::default();
    let detector = DetectorOptions {
        window: spec.window.unwrap_or(d.window),
        threshold_sigma: spec.threshold_sigma.unwrap_or(d.threshold_sigma),
        noise_floor: spec.noise_floor.unwrap_or(d.noise_floor),
    };
    let kd = KeOptions::default();
    let ke = KeOptions {
        mode: ctx.mode,
        k: spec.k.unwrap_or(kd.k),
        tol: spec.tol.unwrap_or(kd.tol),
        with_truth: false,
    };
    let bx = ScanBox {
        dim: model.dim,
        lo: spec.scan_box.lo,
        hi: spec.scan_box.hi,
        lambda_h: spec.scan_box.lambda_h.unwrap_or(SCAN_LAMBDA_H),
    };
    let reach = spec.reach.unwrap_or(0.5);
    let chain_omega = spec.chain_omega.clone().unwrap_or(spec.omega.clone());
    if let Some(l) = cfg.locate.as_mut() {
        l.lambdas = Some(lambdas.clone());
        l.window = Some(detector.window);
        l.threshold_sigma = Some(detector.threshold_sigma);
        l.noise_floor = Some(detector.noise_floor);
        l.k = Some(ke.k);
        l.tol = Some(ke.tol);
        l.reach = Some(reach);
        l.scan_box.lambda_h = Some(bx.lambda_h);
        l.chain_omega = Some(chain_omega.clone());
    }
    // the coarsest grid must exist and hold the probe before any compute
    for &lam in &lambdas {
        bx.grid_for(lam).map_err(cfg_err)?;
    }
    let scfg = ScanConfig {
        t_grid: t_grid.clone(),
        lambdas: lambdas.clone(),
        eps: spec.eps,
        reach,
        ke,
        detector,
    };
    let t_max = spec.t_stop + spec.eps;
    let chain_for = |g: &Grid, pr: &ProbeSetup| -> Result<DomainChain, RecoveryError> {
        Ok(DomainChain::new(&model, *g, chain_omega.clone(), pr.theta.clone(), t_max)?)
    };
    let results = pool(ctx.workers)?.install(|| {
        spec.points
            .par_iter()
            .map(|&p| {
                let f: Option<&dyn Fn(&Grid, &ProbeSetup) -> Result<DomainChain, RecoveryError>> =
                    match ctx.mode {
                        Mode::Outside => Some(&chain_for),
                        Mode::GlassBox => None,
                    };
                scan_and_locate(&model, &spec.omega, p, &bx, &scfg, f)
            })
            .collect::<Vec<_>>()
    });

    let mut scan = Csv::new(&[
        "p_index", "t", "lambda", "ke", "launch_ke", "ratio", "dt2", "residual", "flagged", "jump",
    ]);
    let mut ifaces = Csv::new(&["p_index", "depth", "transmission", "reflection_loss", "cumulative"]);
    for (i, r) in results.into_iter().enumerate() {
        let r = r.map_err(|e| match e {
            RecoveryError::Packet(_) | RecoveryError::BadScan(_) | RecoveryError::Geometry(_) => {
                cfg_err(e)
            }
            other => num_err(other),
        })?;
        let jump_at: Vec<usize> = r
            .detection
            .jumps
            .iter()
            .map(|j| {
                (0..t_grid.len())
                    .min_by(|&a, &b| {
                        (t_grid[a] - j.t_detected)
                            .abs()
                            .total_cmp(&(t_grid[b] - j.t_detected).abs())
                    })
                    .unwrap()
            })
            .collect();
        for (ti, &t) in t_grid.iter().enumerate() {
            for (li, &lam) in lambdas.iter().enumerate() {
                let s = &r.scan.table[li][ti];
                let ke_v = match ctx.mode {
                    Mode::GlassBox => s.ke_glass,
                    Mode::Outside => s.ke_surrogate,
                }
                .unwrap_or(f64::NAN);
                scan.row(vec![
                    i.into(),
                    t.into(),
                    lam.into(),
                    ke_v.into(),
                    s.launch_ke.into(),
                    s.ratio(ctx.mode).into(),
                    r.scan.dt_estimates[ti].into(),
                    r.scan.residuals[ti].into(),
                    r.scan.flagged[ti].into(),
                    jump_at.contains(&ti).into(),
                ]);
            }
        }
        for f in &r.interfaces {
            ifaces.row(vec![
                i.into(),
                f.depth.into(),
                f.transmission.into(),
                f.reflection_loss.into(),
                f.cumulative.into(),
            ]);
        }
    }
    let mut out = Outputs::new(ctx.out)?;
    out.csv("scan.csv", &scan)?;
    out.csv("interfaces.csv", &ifaces)?;
    out.manifest(&cfg, run_info("locate-interfaces", ctx))
}

pub fn trace(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let model = model_of(&cfg)?;
    let spec = require(&cfg.trace, "trace")?.clone();
    let topts = TraceOptions {
        step: spec.step.unwrap_or(TraceOptions::default().step),
    };
    if let Some(t) = cfg.trace.as_mut() {
        t.step = Some(topts.step);
    }
    let path = trace_ray(&model, spec.x, spec.direction, spec.t_max, topts).map_err(num_err)?;
    let mut ray = Csv::new(&["vertex", "t", "x0", "x1"]);
    for (i, (p, t)) in path.vertices.iter().enumerate() {
        ray.row(vec![i.into(), (*t).into(), p[0].into(), p[1].into()]);
    }
    let mut cross = Csv::new(&[
        "interface", "t", "x0", "x1", "alpha", "beta", "c_up", "c_down", "snell_residual",
    ]);
    for c in &path.crossings {
        cross.row(vec![
            c.interface.into(),
            c.time.into(),
            c.point[0].into(),
            c.point[1].into(),
            c.alpha.into(),
            c.beta.into(),
            c.c_up.into(),
            c.c_down.into(),
            c.snell_residual().into(),
        ]);
    }
    let mut summary = Csv::new(&["quantity", "value"]);
    let (end, t_end) = path.end();
    summary.row(vec!["t_end".into(), t_end.into()]);
    summary.row(vec!["x0_end".into(), end[0].into()]);
    summary.row(vec!["x1_end".into(), end[1].into()]);
    summary.row(vec!["tir_at".into(), path.tir_at.unwrap_or(f64::NAN).into()]);
    summary.row(vec![
        "dt_symbol".into(),
        dt_symbol(&path).unwrap_or(f64::NAN).into(),
    ]);
    let mut out = Outputs::new(ctx.out)?;
    out.csv("ray.csv", &ray)?;
    out.csv("crossings.csv", &cross)?;
    out.csv("summary.csv", &summary)?;
    out.manifest(&cfg, run_info("trace-ray", ctx))
}

pub fn regularity(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let model = model_of(&cfg)?;
    let grid = grid_of(&cfg, &model)?;
    let chain = chain_of(&cfg, &model, grid)?;
    let spec = require(&cfg.regularity, "regularity")?.clone();
    let d = RegularityOptions::default();
    let opts = RegularityOptions {
        samples: spec.samples.unwrap_or(d.samples),
        hit_tol: spec.hit_tol.unwrap_or(d.hit_tol),
        time_tol: spec.time_tol.unwrap_or(d.time_tol),
        grazing_tol: spec.grazing_tol.unwrap_or(d.grazing_tol),
        focal_tol: spec.focal_tol.unwrap_or(d.focal_tol),
    };
    if let Some(r) = cfg.regularity.as_mut() {
        r.samples = Some(opts.samples);
        r.hit_tol = Some(opts.hit_tol);
        r.time_tol = Some(opts.time_tol);
        r.grazing_tol = Some(opts.grazing_tol);
        r.focal_tol = Some(opts.focal_tol);
    }
    let reps = pool(ctx.workers)?.install(|| {
        spec.points
            .par_iter()
            .map(|&y| regularity_check(&model, &chain, y, opts))
            .collect::<Result<Vec<_>, _>>()
    });
    let reps = reps.map_err(num_err)?;
    let mut csv = Csv::new(&[
        "index", "y0", "y1", "kind", "depth", "depth_fmm", "jacobian", "jacobian_scale", "minimizers",
    ]);
    for (i, (y, r)) in spec.points.iter().zip(&reps).enumerate() {
        csv.row(vec![
            i.into(),
            y[0].into(),
            y[1].into(),
            r.kind.name().into(),
            r.depth.into(),
            r.depth_fmm.into(),
            r.jacobian.into(),
            r.jacobian_scale.into(),
            r.minimizers.len().into(),
        ]);
    }
    let mut out = Outputs::new(ctx.out)?;
    out.csv("regularity.csv", &csv)?;
    out.manifest(&cfg, run_info("check-regularity", ctx))
}
