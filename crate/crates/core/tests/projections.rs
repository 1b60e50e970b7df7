use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sclab::energy_projections::{project_data_space, ProjectionContext, DEFAULT_TOL};
use sclab::grid::{Grid, Mask};
use sclab::medium_geometry::{Bounds, Shape, SpeedModel};
use sclab::wave_core::{CauchyPair, WaveSolver};

fn setup(cells: usize) -> (WaveSolver, Mask) {
    let b = Bounds {
        lo: [-1.0, -1.0],
        hi: [1.0, 1.0],
    };
    let m = SpeedModel::layered(2, 1, &[0.1], &[1.0, 1.5], b).unwrap();
    let g = Grid::new_2d([-1.0, -1.0], 2.0 / cells as f64, [cells, cells]).unwrap();
    let solver = WaveSolver::dividing(&m, g, 0.25).unwrap();
    let inside = Shape::Disk {
        center: [0.05, -0.02],
        radius: 0.4,
    }
    .mask(&g);
    (solver, inside)
}

fn random_pair(g: Grid, rng: &mut ChaCha8Rng) -> CauchyPair {
    // smooth random field: a few random Gaussians plus node noise
    let mut h0 = g.zeros();
    let mut h1 = g.zeros();
    for _ in 0..6 {
        let (cx, cy, s, a, b): (f64, f64, f64, f64, f64) = (
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(0.05..0.3),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        for k in 0..g.len() {
            let p = g.point(k);
            let e = (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / (2.0 * s * s)).exp();
            h0[k] += a * e;
            h1[k] += b * e;
        }
    }
    for k in 0..g.len() {
        h0[k] += 0.05 * rng.gen_range(-1.0..1.0);
        h1[k] += 0.05 * rng.gen_range(-1.0..1.0);
        if g.is_wall(k) {
            h0[k] = 0.0;
            h1[k] = 0.0;
        }
    }
    CauchyPair::new(g, h0, h1)
}

#[test]
fn projection_algebra_on_random_pairs() {
    let (solver, inside) = setup(64);
    let ctx = ProjectionContext::new(&solver, inside, DEFAULT_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = 10.0 * DEFAULT_TOL;
    let (mut w_idem, mut w_adj, mut w_orth) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let f = random_pair(solver.grid(), &mut rng);
        let g = random_pair(solver.grid(), &mut rng);
        let (nf, ng) = (solver.norm(&f), solver.norm(&g));
        let pf = ctx.project_inside(&f).unwrap();
        let sf = ctx.project_outside(&f).unwrap();
        let pg = ctx.project_inside(&g).unwrap();
        let sg = ctx.project_outside(&g).unwrap();
        let ppf = ctx.project_inside(&pf).unwrap();
        let ssf = ctx.project_outside(&sf).unwrap();
        w_idem = w_idem.max(solver.norm(&ppf.sub(&pf)) / solver.norm(&pf));
        w_idem = w_idem.max(solver.norm(&ssf.sub(&sf)) / solver.norm(&sf));
        w_adj = w_adj.max((solver.inner(&pf, &g) - solver.inner(&f, &pg)).abs() / (nf * ng));
        w_adj = w_adj.max((solver.inner(&sf, &g) - solver.inner(&f, &sg)).abs() / (nf * ng));
        w_orth = w_orth.max(solver.inner(&pf, &sg).abs() / (nf * ng));
        let sum = pf.add(&sf);
        assert!(sum.sub(&f).max_abs() <= 1e-12 * f.max_abs());
        let bessel = solver.energy(&pf) + solver.energy(&sf);
        assert!(bessel <= solver.energy(&f) * (1.0 + 1e-9));
    }
    eprintln!("idempotence {w_idem:.2e}, self-adjointness {w_adj:.2e}, orthogonality {w_orth:.2e}");
    assert!(w_idem <= tol && w_adj <= tol && w_orth <= tol);
}

#[test]
fn multigrid_matches_dense_and_jacobi_solves() {
    let (solver, inside) = setup(16);
    let g = solver.grid();
    let ctx = ProjectionContext::new(&solver, inside.clone(), 1e-13);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_pair(g, &mut rng);
    let phi = ctx.harmonic_extension(&h.h0).unwrap();
    // dense oracle: assemble A on the free nodes column by column
    let free: Vec<usize> = (0..g.len()).filter(|&k| ctx.free_nodes()[k]).collect();
    let n = free.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut e = g.zeros();
    let mut col = g.zeros();
    for (c, &k) in free.iter().enumerate() {
        e[k] = 1.0;
        solver.apply_potential(&e, &mut col);
        for (r, &kr) in free.iter().enumerate() {
            a[(r, c)] = col[kr];
        }
        e[k] = 0.0;
    }
    let fixed: Vec<f64> = (0..g.len())
        .map(|k| {
            if ctx.trace_layer().get(k) {
                h.h0[k]
            } else {
                0.0
            }
        })
        .collect();
    solver.apply_potential(&fixed, &mut col);
    let rhs = DVector::from_iterator(n, free.iter().map(|&k| -col[k]));
    let x = a.cholesky().expect("SPD").solve(&rhs);
    let err = free
        .iter()
        .enumerate()
        .map(|(r, &k)| (x[r] - phi[k]).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-9, "dense vs multigrid {err}");

    let (solver, inside) = setup(64);
    let h = random_pair(solver.grid(), &mut rng);
    let mg = ProjectionContext::new(&solver, inside.clone(), 1e-12);
    let jac = ProjectionContext::new(&solver, inside, 1e-12).with_jacobi();
    let (a, sa) = mg.extend(&h.h0).unwrap();
    let (b, sb) = jac.extend(&h.h0).unwrap();
    let diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    eprintln!(
        "iterations: multigrid {} jacobi {}",
        sa.iterations, sb.iterations
    );
    assert!(diff < 1e-8, "{diff}");
    assert!(sa.iterations < sb.iterations);
}

#[test]
fn extension_basics() {
    let (solver, inside) = setup(64);
    let g = solver.grid();
    let ctx = ProjectionContext::new(&solver, inside, DEFAULT_TOL);
    let zero = ctx.harmonic_extension(&g.zeros()).unwrap();
    assert!(zero.iter().all(|v| *v == 0.0));
    // constant trace: values stay within [0, 1] up to the small non-M-matrix part of the form
    let ones: Vec<f64> = (0..g.len())
        .map(|k| if g.is_wall(k) { 0.0 } else { 1.0 })
        .collect();
    let phi = ctx.harmonic_extension(&ones).unwrap();
    let (lo, hi) = phi
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    eprintln!("constant-trace extension range [{lo:.3e}, {hi:.6}]");
    assert!(lo >= -1e-2 && hi <= 1.0 + 1e-2);
    // data supported deep inside with zero trace is fixed by π̄ and killed by π*
    let deep = Shape::Disk {
        center: [0.05, -0.02],
        radius: 0.25,
    }
    .mask(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = random_pair(g, &mut rng).restricted(&deep);
    let p = ctx.project_inside(&h).unwrap();
    assert!(p.sub(&h).max_abs() < 1e-12);
    assert!(ctx.project_outside(&h).unwrap().max_abs() < 1e-12);
    // data outside with zero trace: π̄ kills it
    let far = Shape::Disk {
        center: [0.05, -0.02],
        radius: 0.6,
    }
    .mask(&g)
    .complement();
    let h = random_pair(g, &mut rng).restricted(&far);
    assert!(ctx.project_inside(&h).unwrap().max_abs() < 1e-12);
    // π_C is the identity
    assert_eq!(project_data_space(&h, ctx.inside()), h);
}

#[test]
fn affine_trace_extension_converges_under_refinement() {
    // the same continuous problem on grids h and h/2 should agree to O(h)
    let sample = |cells: usize| {
        let (solver, inside) = setup(cells);
        let g = solver.grid();
        let ctx = ProjectionContext::new(&solver, inside, DEFAULT_TOL);
        let x1 = g.from_fn(|p| p[0]);
        let (phi, stats) = ctx.extend(&x1).unwrap();
        assert!(stats.rel_residual <= DEFAULT_TOL);
        [[0.6, 0.0], [0.0, 0.7], [-0.5, -0.5], [0.8, 0.8]].map(|p| g.interpolate(&phi, p))
    };
    let a = sample(64);
    let b = sample(128);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 0.05, "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn projections_sum_to_identity_and_stay_local(seed in 0u64..1_000_000) {
        let (solver, inside) = setup(32);
        let ctx = ProjectionContext::new(&solver, inside.clone(), DEFAULT_TOL);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_pair(solver.grid(), &mut rng);
        let s = ctx.project_outside(&h).unwrap();
        let p = ctx.project_inside(&h).unwrap();
        prop_assert!(s.max_abs_on(&inside) == 0.0);
        prop_assert!(p.add(&s).sub(&h).max_abs() <= 1e-12 * h.max_abs());
        // π* ignores whatever lies inside Θ_t
        let outside_only = h.restricted(&inside.complement());
        prop_assert_eq!(ctx.project_outside(&outside_only).unwrap(), s);
    }
}
