use sclab::grid::Grid;
use sclab::medium_geometry::{Bounds, SpeedModel};
use sclab::wave_core::{CauchyPair, WaveSolver};

fn gauss(x: f64, x0: f64, s: f64) -> f64 {
    (-(x - x0) * (x - x0) / (2.0 * s * s)).exp()
}

fn dgauss(x: f64, x0: f64, s: f64) -> f64 {
    -(x - x0) / (s * s) * gauss(x, x0, s)
}

fn line_model(c: f64) -> SpeedModel {
    SpeedModel::constant(
        1,
        c,
        Bounds {
            lo: [-0.1, 0.0],
            hi: [1.1, 0.0],
        },
    )
}

#[test]
fn dalembert_translation_after_one_crossing() {
    let g = Grid::new_1d(0.0, 1.0, 256).unwrap();
    let solver = WaveSolver::dividing(&line_model(1.0), g, 1.0).unwrap();
    let s = 0.05;
    let h = CauchyPair::new(
        g,
        g.from_fn(|p| gauss(p[0], 0.25, s)),
        g.from_fn(|p| -dgauss(p[0], 0.25, s)),
    );
    let out = solver.propagate(&h, 1.0).unwrap();
    // right-mover reflected once, inverted, at the Dirichlet wall x = 1
    let exact = g.from_fn(|p| gauss(p[0] - 1.0, 0.25, s) - gauss(1.0 - p[0], 0.25, s));
    let num: f64 = out
        .h0
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let den: f64 = exact.iter().map(|b| b * b).sum();
    let rel = (num / den).sqrt();
    eprintln!("d'Alembert L2 rel error {rel:.3e}, dt {}", solver.dt());
    assert!(rel <= 0.01);
}

#[test]
fn conserved_energy_and_reversibility() {
    let g = Grid::new_1d(0.0, 1.0, 256).unwrap();
    let solver = WaveSolver::dividing(&line_model(1.0), g, 1.0).unwrap();
    let h = CauchyPair::new(
        g,
        g.from_fn(|p| gauss(p[0], 0.4, 0.03)),
        g.from_fn(|p| 0.3 * gauss(p[0], 0.6, 0.02)),
    );
    let e0 = solver.energy(&h);
    let p0 = solver.plain_energy(&h);
    let mut worst: f64 = 0.0;
    let mut worst_plain: f64 = 0.0;
    let s = 1000.0 * solver.dt();
    let end = solver
        .propagate_with(&h, s, |_, st| {
            worst = worst.max((solver.energy(st) - e0).abs() / e0);
            worst_plain = worst_plain.max((solver.plain_energy(st) - p0).abs() / p0);
        })
        .unwrap();
    eprintln!("drift: conserved form {worst:.3e}, trapezoidal {worst_plain:.3e}");
    assert!(worst <= 1e-6);
    let back = solver.propagate(&end, -s).unwrap();
    let err = solver.norm(&back.sub(&h)) / solver.norm(&h);
    eprintln!("reversibility {err:.3e}");
    assert!(err <= 1e-8);
}

#[test]
fn two_d_energy_with_interface() {
    let b = Bounds {
        lo: [-1.0, -1.0],
        hi: [1.0, 1.0],
    };
    let m = SpeedModel::layered(2, 1, &[0.1], &[1.0, 1.5], b).unwrap();
    let g = Grid::new_2d([-1.0, -1.0], 1.0 / 64.0, [128, 128]).unwrap();
    let solver = WaveSolver::dividing(&m, g, 0.5).unwrap();
    let h = CauchyPair::new(
        g,
        g.from_fn(|p| gauss(p[0], 0.0, 0.08) * gauss(p[1], 0.3, 0.08)),
        g.zeros(),
    );
    let e0 = solver.energy(&h);
    let p0 = solver.plain_energy(&h);
    let mut worst: f64 = 0.0;
    let mut worst_plain: f64 = 0.0;
    solver
        .propagate_with(&h, 0.5, |_, st| {
            worst = worst.max((solver.energy(st) - e0).abs() / e0);
            worst_plain = worst_plain.max((solver.plain_energy(st) - p0).abs() / p0);
        })
        .unwrap();
    eprintln!("2d drift: conserved {worst:.3e}, trapezoidal {worst_plain:.3e}");
    assert!(worst <= 1e-10);
}
