use std::sync::Arc;

use sclab::grid::{Grid, Mask};
use sclab::harmonic_recon::{
    check_harmonic, coordinate_probes, kappa, kappa_direct, kappa_probes, locate_speed_jump,
    reconstruct_point, reconstruct_speed, redatum, smoothed_indicator, ReconError,
};
use sclab::medium_geometry::{
    shrink_sequence, solve_depth, Bounds, DomainChain, Shape, SpeedModel,
};
use sclab::scattering_control::ControlOptions;
use sclab::wave_core::{observe, CauchyPair, WaveSolver};

fn opts(k: usize) -> ControlOptions {
    ControlOptions {
        k,
        stop_rel: None,
        ..ControlOptions::default()
    }
}

struct Setup {
    model: SpeedModel,
    solver: WaveSolver,
    chain: DomainChain,
}

/// c = 1 left of x = 0.5 and 2 to the right; Ω = (0.3, 2.7), Θ = (0, 3).
fn line_two_layer() -> Setup {
    let b = Bounds {
        lo: [-2.0, 0.0],
        hi: [5.5, 0.0],
    };
    let model = SpeedModel::layered(1, 0, &[0.5], &[2.0, 1.0], b).unwrap();
    let g = Grid::new_1d(-2.0, 5.5, 3750).unwrap();
    let solver = WaveSolver::dividing(&model, g, 0.025).unwrap();
    let chain = DomainChain::new(
        &model,
        g,
        Shape::Band {
            axis: 0,
            lo: Some(0.3),
            hi: Some(2.7),
        },
        Shape::Band {
            axis: 0,
            lo: Some(0.0),
            hi: Some(3.0),
        },
        0.6,
    )
    .unwrap();
    Setup {
        model,
        solver,
        chain,
    }
}

fn disk_homogeneous() -> Setup {
    let b = Bounds {
        lo: [-2.125, -2.125],
        hi: [2.125, 2.125],
    };
    let model = SpeedModel::constant(2, 1.0, b);
    let g = Grid::new_2d([-2.125, -2.125], 1.0 / 64.0, [272, 272]).unwrap();
    let solver = WaveSolver::dividing(&model, g, 0.05).unwrap();
    let chain = DomainChain::new(
        &model,
        g,
        Shape::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        },
        Shape::Disk {
            center: [0.0, 0.0],
            radius: 1.15,
        },
        0.45,
    )
    .unwrap();
    Setup {
        model,
        solver,
        chain,
    }
}

#[test]
fn probes_pass_harmonic_check_and_quadratics_fail() {
    let g = Grid::new_2d([-1.0, -1.0], 1.0 / 32.0, [64, 64]).unwrap();
    let b = Bounds {
        lo: [-1.0, -1.0],
        hi: [1.0, 1.0],
    };
    let s = WaveSolver::dividing(&SpeedModel::constant(2, 1.0, b), g, 0.1).unwrap();
    for f in coordinate_probes(&g) {
        check_harmonic(&s, &f).unwrap();
    }
    check_harmonic(
        &s,
        &g.from_fn(|p| p[0] * p[0] - p[1] * p[1] + 3.0 * p[0] * p[1]),
    )
    .unwrap();
    let bad = g.from_fn(|p| p[0] * p[0]);
    assert!(matches!(
        check_harmonic(&s, &bad),
        Err(ReconError::NotHarmonic { .. })
    ));
}

#[test]
fn kappa_matches_direct_pairing_and_is_linear() {
    let s = line_two_layer();
    let g = s.solver.grid();
    let p = [0.3, 0.0];
    let theta = shrink_sequence(&s.chain, p, 0.2, 2).unwrap().pop().unwrap();
    let cj = s.chain.with_probe_theta(theta.clone()).unwrap();
    let gi = smoothed_indicator(&g, &theta, &s.chain.omega, 2.0);
    for t in [0.1, 0.3] {
        let probes = coordinate_probes(&g);
        let k = kappa_probes(&s.solver, &cj, &gi, &probes, t, &opts(8)).unwrap();
        for (f, got) in probes.iter().zip(&k.values) {
            let want = kappa_direct(&s.model, &s.solver, &cj, &gi, f, t, 1e-10).unwrap();
            eprintln!("T={t}: κ {got:.6e} direct {want:.6e}");
            assert!((got - want).abs() <= 0.02 * want.abs(), "{got} vs {want}");
        }
        let mix: Vec<f64> = probes[0]
            .iter()
            .zip(&probes[1])
            .map(|(a, b)| 2.0 * a - 0.5 * b)
            .collect();
        let lin = kappa(&s.solver, &cj, &gi, &mix, t, &opts(8)).unwrap();
        let want = 2.0 * k.values[0] - 0.5 * k.values[1];
        assert!((lin - want).abs() <= 1e-10 * k.scale);
    }
    let zero = kappa(
        &s.solver,
        &cj,
        &g.zeros(),
        &vec![1.0; g.len()],
        0.3,
        &opts(3),
    )
    .unwrap();
    assert_eq!(zero, 0.0);
}

#[test]
fn line_chart_recovers_both_speeds_and_the_interface() {
    let s = line_two_layer();
    let h = s.solver.grid().h;
    let ts: Vec<f64> = (1..=16).map(|i| 0.025 * i as f64).collect();
    let mut chart = Vec::new();
    for &t in &ts {
        let est = reconstruct_point(&s.solver, &s.chain, [0.3, 0.0], t, 0.2, 2, &opts(8)).unwrap();
        chart.push((est.t, est.y));
    }
    let speeds = reconstruct_speed(&chart, 1.0, 2.0, 0.1).unwrap();
    for c in &speeds {
        eprintln!("T={:.3} y={:.4} c={:.4}", c.t, c.y[0], c.c_est);
    }
    // away from the transition (T ≈ 0.2) and the ends
    for c in &speeds[1..speeds.len() - 1] {
        if c.t < 0.15 {
            assert!((c.c_est - 1.0).abs() < 0.05, "{c:?}");
        } else if c.t > 0.3 {
            assert!((c.c_est - 2.0).abs() < 0.1, "{c:?}");
        }
    }
    let jump = locate_speed_jump(&chart).unwrap();
    eprintln!("jump {jump:?}");
    assert!((jump.y[0] - 0.5).abs() <= 3.0 * h.max(0.5 * 0.025));
    assert!((jump.c_above - 1.0).abs() < 0.07 && (jump.c_below - 2.0).abs() < 0.14);
}

#[test]
fn disk_point_follows_the_straight_normal_ray() {
    let s = disk_homogeneous();
    let g = s.solver.grid();
    let (eps1, j_max) = (0.4, 2);
    let t = 0.3;
    let est = reconstruct_point(&s.solver, &s.chain, [1.0, 0.0], t, eps1, j_max, &opts(8)).unwrap();
    eprintln!("y per j {:?}", est.per_j);
    let eps_j = est.eps[j_max - 1];
    let err = ((est.y[0] - (1.0 - t)).powi(2) + est.y[1].powi(2)).sqrt();
    assert!(err <= 2.0 * g.h + eps_j, "{:?}", est.y);
    // successive members of the family agree to within the shrinkage radius
    let d = ((est.per_j[1][0] - est.per_j[0][0]).powi(2)
        + (est.per_j[1][1] - est.per_j[0][1]).powi(2))
    .sqrt();
    assert!(d <= est.eps[0] + 3.0 * g.h);

    let thetas = shrink_sequence(&s.chain, [1.0, 0.0], eps1, j_max).unwrap();
    let omega_t = solve_depth(&s.model, &g, &s.chain.omega)
        .unwrap()
        .level_regions(t)
        .0;
    for (j, theta) in thetas.iter().enumerate() {
        let cj = s.chain.with_probe_theta(theta.clone()).unwrap();
        let gi = smoothed_indicator(&g, theta, &s.chain.omega, 2.0);
        // the outside-computable ratio against the glass-box one
        let probes = coordinate_probes(&g);
        let direct: Vec<f64> = probes
            .iter()
            .map(|f| kappa_direct(&s.model, &s.solver, &cj, &gi, f, t, 1e-10).unwrap())
            .collect();
        let rx = direct[1] / direct[0];
        assert!(
            (est.per_j[j][0] - rx).abs() < 0.01,
            "j={j}: {} vs {rx}",
            est.per_j[j][0]
        );
        // sandwich: the ratio is an average of x over the ADT support
        let theta_t = solve_depth(&s.model, &g, theta).unwrap().level_regions(t).0;
        let shell = theta_t.minus(&omega_t);
        let xs: Vec<f64> = (0..g.len())
            .filter(|&k| shell.get(k))
            .map(|k| g.point(k)[0])
            .collect();
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        assert!(rx >= lo - g.h && rx <= hi + g.h, "{rx} not in [{lo}, {hi}]");
        eprintln!(
            "j={}: shell diameter {:.3}, ε_j {:.3}",
            j + 1,
            shell.diameter(),
            est.eps[j]
        );
        assert!(shell.diameter() <= 3.0 * est.eps[j]);
    }
}

#[test]
fn small_t_collapses_to_the_boundary_point() {
    let s = disk_homogeneous();
    let t = 2.0 * s.solver.dt();
    let est = reconstruct_point(&s.solver, &s.chain, [1.0, 0.0], t, 0.4, 2, &opts(4)).unwrap();
    let bump = 0.25 * est.eps[1];
    assert!(
        (est.y[0] - 1.0).abs() <= bump + 2.0 * s.solver.grid().h,
        "{:?}",
        est.y
    );
    assert!(est.y[1].abs() < 1e-8);
}

#[test]
fn speed_from_synthetic_charts() {
    let lin: Vec<(f64, [f64; 2])> = (0..6)
        .map(|i| (0.1 * i as f64, [1.0 - 0.1 * i as f64, 0.0]))
        .collect();
    for s in reconstruct_speed(&lin, 0.5, 2.0, 0.0).unwrap() {
        assert!((s.c_est - 1.0).abs() < 1e-12 && !s.out_of_bounds);
    }
    let flat: Vec<(f64, [f64; 2])> = (0..4).map(|i| (0.1 * i as f64, [0.5, 0.5])).collect();
    assert!(reconstruct_speed(&flat, 0.5, 2.0, 0.1)
        .unwrap()
        .iter()
        .all(|s| s.c_est == 0.0 && s.out_of_bounds));
    assert!(matches!(
        reconstruct_speed(&lin[..2], 0.5, 2.0, 0.1),
        Err(ReconError::InsufficientSamples(2))
    ));
    let mut back = lin.clone();
    back.swap(1, 2);
    assert!(reconstruct_speed(&back, 0.5, 2.0, 0.1).is_err());
    // piecewise-linear chart with a kink inside one interval
    let kinked: Vec<(f64, [f64; 2])> = (0..10)
        .map(|i| {
            let t = 0.1 * i as f64;
            let y = if t <= 0.43 {
                t
            } else {
                0.43 + 1.5 * (t - 0.43)
            };
            (t, [0.0, y])
        })
        .collect();
    let j = locate_speed_jump(&kinked).unwrap();
    assert!(
        (j.t - 0.43).abs() < 1e-9 && (j.y[1] - 0.43).abs() < 1e-9,
        "{j:?}"
    );
}

#[test]
fn redatum_reproduces_the_plain_solver() {
    let b = Bounds {
        lo: [-1.5, -1.5],
        hi: [1.5, 1.5],
    };
    let model = SpeedModel::layered(2, 1, &[0.2], &[1.0, 1.5], b).unwrap();
    let g = Grid::new_2d([-1.5, -1.5], 1.0 / 32.0, [96, 96]).unwrap();
    let omega = Shape::Disk {
        center: [0.0, 0.0],
        radius: 0.8,
    };
    let small = Shape::Disk {
        center: [0.0, 0.0],
        radius: 0.5,
    };
    let h = CauchyPair::new(
        g,
        g.zeros(),
        g.from_fn(|x| (-40.0 * ((x[0] - 1.0).powi(2) + x[1] * x[1])).exp()),
    )
    .restricted(&omega.mask(&g).complement());
    // Ω̃ = Ω: nothing to supply, identical to observing the true medium
    let same = redatum(&model, None, &model, &omega, &omega, g, 0.5).unwrap();
    let plain = WaveSolver::dividing(&model, g, 0.5).unwrap();
    let a = same.observe(&h, 0.5).unwrap();
    let b2 = observe(&plain, &Arc::new(omega.mask(&g)), &h, 0.5).unwrap();
    let out = omega.mask(&g).complement();
    assert_eq!(
        a.restrict(a.last(), &out).unwrap(),
        b2.restrict(b2.last(), &out).unwrap()
    );
    // exact speed supplied on the ring: same medium, so the unmasked field outside Ω̃ matches
    let r = redatum(&model, Some(&model), &model, &omega, &small, g, 0.5).unwrap();
    let v = r.observe(&h, 0.5).unwrap();
    let full = plain.propagate(&h, 0.5).unwrap();
    let vis = small.mask(&g).complement();
    assert_eq!(v.restrict(v.last(), &vis).unwrap(), full.restricted(&vis));
    assert!(matches!(
        redatum(&model, None, &model, &omega, &small, g, 0.5),
        Err(ReconError::SpeedMissing(_))
    ));
    let _ = Mask::empty(g);
}
