//! Parabolic wave packets: the standard packet, its dilates placed at a
//! covector, smooth spatial cutoffs, and one-directional Cauchy data from the
//! frozen-coefficient half-wave splitting.
//!
//! The standard packet has Fourier transform A·ψ((ξ₁ − 2.25)/0.75)·ψ(ξ₂/0.75)
//! with ψ(t) = exp(1 − 1/(1 − t²)), so it factors as a(x₁)b(x₂) and is
//! evaluated pointwise by quadrature of the one-dimensional profile.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use thiserror::Error;

use crate::grid::{Field, Grid, Mask};
use crate::medium_geometry::{GeometryError, SpeedModel};
use crate::wave_core::{CauchyPair, WaveError, WaveSolver};

#[derive(Debug, Error)]
pub enum PacketError {
    #[error("λ = {lambda} is not resolved by h = {h}: need λh ≤ {limit}")]
    UnresolvedFrequency { lambda: f64, h: f64, limit: f64 },
    #[error("cutoff of radius {radius} at {center:?} leaves the computational box")]
    CutoffClipped { center: [f64; 2], radius: f64 },
    #[error("packet cutoff reaches {nodes} nodes outside the allowed launch region")]
    SupportViolation { nodes: usize },
    #[error("packet direction must be a nonzero vector, got {0:?}")]
    BadDirection([f64; 2]),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// Frequency box of the standard packet: ξ₁ ∈ [XI1_LO, XI1_HI], |ξ_⊥| ≤ XI_PERP.
pub const XI1_LO: f64 = 1.5;
pub const XI1_HI: f64 = 3.0;
pub const XI_PERP: f64 = 0.75;
/// Exponent correction in r(λ) = r₀ λ^(−1/2 + EPS_EXP).
pub const EPS_EXP: f64 = 0.1;
/// Calibrated once: ∫_{U_λ}|φ_λ|² = 0.956, 0.972, 0.981 at λ = 8, 16, 32.
pub const R0_DEFAULT: f64 = 3.6;
/// U′ radius relative to U.
pub const CUTOFF_OUTER: f64 = 1.5;
/// Largest admissible λh.
pub const MAX_LAMBDA_H: f64 = 0.25;
/// Relative variation of c over the cutoff above which freezing is flagged.
pub const FROZEN_TOL: f64 = 0.01;

const QUAD_NODES: usize = 160;

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// C^∞ step: 0 for u ≤ 0, 1 for u ≥ 1.
pub fn smooth_step(u: f64) -> f64 {
    let f = |v: f64| if v <= 0.0 { 0.0 } else { (-1.0 / v).exp() };
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        f(u) / (f(u) + f(1.0 - u))
    }
}

/// The standard packet φ with ‖φ‖_{L²(ℝⁿ)} = 1.
#[derive(Debug, Clone)]
pub struct StandardPacket {
    pub dim: usize,
    amp: f64,
    nodes: Vec<(f64, f64)>,
}

impl StandardPacket {
    pub fn new(dim: usize) -> Self {
        // midpoint rule on (0, 1); ψ is flat to all orders at ±1, so this is spectrally accurate
        let dt = 1.0 / QUAD_NODES as f64;
        let nodes: Vec<(f64, f64)> = (0..QUAD_NODES)
            .map(|i| {
                let t = (i as f64 + 0.5) * dt;
                (t, 2.0 * bump(t) * dt)
            })
            .collect();
        let psi2: f64 = nodes.iter().map(|&(t, w)| w * bump(t)).sum();
        // ‖a‖² = (XI_PERP/2π)∫ψ² per axis
        let per_axis = XI_PERP / TAU * psi2;
        StandardPacket {
            dim,
            amp: per_axis.powf(-0.5 * dim as f64),
            nodes,
        }
    }

    /// Ψ(k) = ∫_{−1}^{1} ψ(t) e^{ikt} dt (real and even). Past the quadrature's
    /// alias-free range |Ψ| is below 1e-13 and is returned as zero.
    fn big_psi(&self, k: f64) -> f64 {
        if k.abs() > 0.4 * TAU * QUAD_NODES as f64 {
            return 0.0;
        }
        self.nodes.iter().map(|&(t, w)| w * (k * t).cos()).sum()
    }

    fn profile(&self, s: f64) -> f64 {
        XI_PERP / TAU * self.big_psi(XI_PERP * s)
    }

    /// φ(y) in the packet frame.
    pub fn eval(&self, y: [f64; 2]) -> Complex64 {
        let mid = 0.5 * (XI1_LO + XI1_HI);
        let a = self.profile(y[0]) * Complex64::from_polar(1.0, mid * y[0]);
        let b = if self.dim == 1 { 1.0 } else { self.profile(y[1]) };
        a * (self.amp * b)
    }

    /// φ̂(ξ).
    pub fn fourier(&self, xi: [f64; 2]) -> f64 {
        let mid = 0.5 * (XI1_LO + XI1_HI);
        let half = 0.5 * (XI1_HI - XI1_LO);
        let a = bump((xi[0] - mid) / half);
        let b = if self.dim == 1 {
            1.0
        } else {
            bump(xi[1] / XI_PERP)
        };
        self.amp * a * b
    }
}

/// Angular DFT frequency of index m on an axis of n nodes.
fn dft_freq(m: usize, n: usize, h: f64) -> f64 {
    let mm = if m <= n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    };
    TAU * mm / (n as f64 * h)
}

/// In-place 2D (or 1D when ny = 1) DFT of a row-major field, unnormalised.
pub fn fft2(data: &mut [Complex64], nx: usize, ny: usize, dir: FftDirection) {
    let mut planner = FftPlanner::new();
    let fx = planner.plan_fft(nx, dir);
    for row in data.chunks_mut(nx) {
        fx.process(row);
    }
    if ny > 1 {
        let fy = planner.plan_fft(ny, dir);
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            fy.process(&mut col);
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
    }
}

/// The standard packet centred at the origin, built on the grid's DFT
/// frequencies, inverse transformed and normalised to discrete unit L² norm.
pub fn standard_packet(grid: &Grid) -> Vec<Complex64> {
    let sp = StandardPacket::new(grid.dim());
    let (nx, ny) = (grid.nx, grid.ny);
    let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let xi = [
                dft_freq(i, nx, grid.h),
                if ny > 1 { dft_freq(j, ny, grid.h) } else { 0.0 },
            ];
            let phase = xi[0] * grid.origin[0] + xi[1] * grid.origin[1];
            data[j * nx + i] = Complex64::from_polar(sp.fourier(xi), phase);
        }
    }
    fft2(&mut data, nx, ny, FftDirection::Inverse);
    let norm = l2_norm(grid, &data);
    for v in &mut data {
        *v /= norm;
    }
    data
}

/// Discrete L² norm h^d Σ|f|².
pub fn l2_norm(grid: &Grid, f: &[Complex64]) -> f64 {
    (f.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_volume()).sqrt()
}

/// Fraction of the discrete Fourier mass of f on frequencies with ξ·e < cut.
pub fn fourier_mass_below(grid: &Grid, f: &[Complex64], e: [f64; 2], cut: f64) -> f64 {
    let mut data = f.to_vec();
    fft2(&mut data, grid.nx, grid.ny, FftDirection::Forward);
    let (mut lo, mut tot) = (0.0, 0.0);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let xi = [
                dft_freq(i, grid.nx, grid.h),
                if grid.ny > 1 {
                    dft_freq(j, grid.ny, grid.h)
                } else {
                    0.0
                },
            ];
            let m = data[j * grid.nx + i].norm_sqr();
            tot += m;
            if xi[0] * e[0] + xi[1] * e[1] < cut {
                lo += m;
            }
        }
    }
    lo / tot
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    pub lambda: f64,
    pub center: [f64; 2],
    /// Unit covector direction ξ.
    pub direction: [f64; 2],
    pub r0: f64,
    pub eps_exp: f64,
}

impl PacketSpec {
    pub fn new(lambda: f64, center: [f64; 2], direction: [f64; 2]) -> Result<Self, PacketError> {
        let n = direction[0].hypot(direction[1]);
        if !(n > 0.0) || !n.is_finite() {
            return Err(PacketError::BadDirection(direction));
        }
        Ok(PacketSpec {
            lambda,
            center,
            direction: [direction[0] / n, direction[1] / n],
            r0: R0_DEFAULT,
            eps_exp: EPS_EXP,
        })
    }

    /// r(λ), the radius of U_μ.
    pub fn cutoff_radius(&self) -> f64 {
        self.r0 * self.lambda.powf(-0.5 + self.eps_exp)
    }

    /// Radius of U′_μ, outside which ρ_μ vanishes.
    pub fn support_radius(&self) -> f64 {
        CUTOFF_OUTER * self.cutoff_radius()
    }

    /// M_{x,ξ}: the packet frame (along ξ, along ξ^⊥) of a point.
    pub fn frame(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let e = self.direction;
        [d[0] * e[0] + d[1] * e[1], -d[0] * e[1] + d[1] * e[0]]
    }

    /// ρ_μ(x): 1 on U_μ, 0 off U′_μ, C^∞ in between.
    pub fn cutoff(&self, x: [f64; 2]) -> f64 {
        let r = self.cutoff_radius();
        let y = self.frame(x);
        let d = y[0].hypot(y[1]);
        smooth_step((CUTOFF_OUTER * r - d) / ((CUTOFF_OUTER - 1.0) * r))
    }
}

/// φ_μ and ρ_μ sampled on a grid.
#[derive(Debug, Clone)]
pub struct PlacedPacket {
    pub grid: Grid,
    pub spec: PacketSpec,
    pub phi: Vec<Complex64>,
    pub rho: Field,
}

impl PlacedPacket {
    /// ρ_μφ_μ.
    pub fn cut(&self) -> Vec<Complex64> {
        self.phi.iter().zip(&self.rho).map(|(p, r)| p * r).collect()
    }
}

pub fn check_resolved(spec: &PacketSpec, grid: &Grid) -> Result<(), PacketError> {
    if spec.lambda * grid.h > MAX_LAMBDA_H * (1.0 + 1e-12) || !(spec.lambda > 0.0) {
        return Err(PacketError::UnresolvedFrequency {
            lambda: spec.lambda,
            h: grid.h,
            limit: MAX_LAMBDA_H,
        });
    }
    Ok(())
}

/// φ_{λ,x,ξ} = λ^{(n+1)/4} φ(λy₁, √λ y₂) with y = M_{x,ξ}(x), and its cutoff.
/// Values are only computed where `full` is set or ρ_μ > 0.
pub fn dilate_place_with(
    phi: &StandardPacket,
    spec: &PacketSpec,
    grid: &Grid,
    full: bool,
) -> Result<PlacedPacket, PacketError> {
    check_resolved(spec, grid)?;
    let rs = spec.support_radius();
    let (lo, hi) = (grid.origin, grid.upper());
    let c = spec.center;
    let inside = |a: f64, l: f64, u: f64| a - rs > l + grid.h && a + rs < u - grid.h;
    if !inside(c[0], lo[0], hi[0]) || (grid.dim() == 2 && !inside(c[1], lo[1], hi[1])) {
        return Err(PacketError::CutoffClipped {
            center: c,
            radius: rs,
        });
    }
    let lam = spec.lambda;
    let n = grid.dim() as f64;
    let amp = lam.powf((n + 1.0) / 4.0);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut rho = grid.zeros();
    let dir = if grid.dim() == 1 {
        [spec.direction[0].signum(), 0.0]
    } else {
        spec.direction
    };
    let spec1 = PacketSpec {
        direction: dir,
        ..*spec
    };
    for k in 0..grid.len() {
        let x = grid.point(k);
        let r = spec1.cutoff(x);
        rho[k] = r;
        if full || r > 0.0 {
            let y = spec1.frame(x);
            out[k] = amp * phi.eval([lam * y[0], lam.sqrt() * y[1]]);
        }
    }
    Ok(PlacedPacket {
        grid: *grid,
        spec: spec1,
        phi: out,
        rho,
    })
}

pub fn dilate_place(
    phi: &StandardPacket,
    spec: &PacketSpec,
    grid: &Grid,
) -> Result<PlacedPacket, PacketError> {
    dilate_place_with(phi, spec, grid, true)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacketWarning {
    /// c varies by more than FROZEN_TOL over supp ρ_μ.
    FrozenCoefficient { variation: f64 },
}

/// Complex Cauchy data h = re + i·im of a packet launch.
#[derive(Debug, Clone)]
pub struct PacketData {
    pub spec: PacketSpec,
    pub re: CauchyPair,
    pub im: CauchyPair,
    pub c_frozen: f64,
    pub frozen_variation: f64,
    /// Relative L² mass of −icB⁻¹ρφ dropped by restricting to the launch region.
    pub truncated: f64,
    pub warnings: Vec<PacketWarning>,
}

impl PacketData {
    pub fn energy(&self, solver: &WaveSolver) -> f64 {
        solver.energy(&self.re) + solver.energy(&self.im)
    }

    pub fn kinetic(&self, solver: &WaveSolver) -> f64 {
        solver.kinetic_total(&self.re) + solver.kinetic_total(&self.im)
    }

    pub fn propagate(&self, solver: &WaveSolver, s: f64) -> Result<(CauchyPair, CauchyPair), WaveError> {
        Ok((solver.propagate(&self.re, s)?, solver.propagate(&self.im, s)?))
    }
}

/// h_{0,λ} = Λ(g₊, 0) with g₊ = −i c B⁻¹(ρ_μφ_μ), B frozen to c(x*)|ξ|.
///
/// The forward half-wave solves (∂_t + iB)u₊ = 0, so h = (g₊, −iBg₊) =
/// (−i|ξ|⁻¹(ρφ)^∨, −c(x*)ρφ): it moves along +ξ. Data are restricted to
/// `allowed` (typically Θ∖Ω̄) and the ρ_μ support must lie inside it.
pub fn packet_cauchy_data(
    model: &SpeedModel,
    grid: &Grid,
    spec: &PacketSpec,
    allowed: &Mask,
) -> Result<PacketData, PacketError> {
    let phi = StandardPacket::new(grid.dim());
    let placed = dilate_place_with(&phi, spec, grid, false)?;
    let outside = (0..grid.len())
        .filter(|&k| placed.rho[k] > 0.0 && (!allowed.get(k) || grid.is_wall(k)))
        .count();
    if outside > 0 {
        return Err(PacketError::SupportViolation { nodes: outside });
    }
    let c = model.eval_speed(spec.center)?;
    let variation = model.variation_over_ball(spec.center, spec.support_radius());
    let mut warnings = Vec::new();
    if variation > FROZEN_TOL {
        log::warn!("c varies by {variation:.3e} over the packet cutoff; frozen B is inaccurate");
        warnings.push(PacketWarning::FrozenCoefficient { variation });
    }
    let v = placed.cut();
    let mut g = v.clone();
    fft2(&mut g, grid.nx, grid.ny, FftDirection::Forward);
    let scale = 1.0 / grid.len() as f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let xi = [
                dft_freq(i, grid.nx, grid.h),
                if grid.ny > 1 {
                    dft_freq(j, grid.ny, grid.h)
                } else {
                    0.0
                },
            ];
            // grid symbol of √(−Δ_h), so the pair is equipartitioned for the scheme
            let a = (2.0 / grid.h * (0.5 * xi[0] * grid.h).sin())
                .hypot(2.0 / grid.h * (0.5 * xi[1] * grid.h).sin());
            let k = j * grid.nx + i;
            // −i|ξ|_h⁻¹, with the DFT normalisation folded in
            g[k] = if a > 0.0 {
                g[k] * Complex64::new(0.0, -scale / a)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    fft2(&mut g, grid.nx, grid.ny, FftDirection::Inverse);
    let total: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    let mut dropped = 0.0;
    let (mut re0, mut im0) = (grid.zeros(), grid.zeros());
    let (mut re1, mut im1) = (grid.zeros(), grid.zeros());
    for k in 0..grid.len() {
        if allowed.get(k) && !grid.is_wall(k) {
            re0[k] = g[k].re;
            im0[k] = g[k].im;
            re1[k] = -c * v[k].re;
            im1[k] = -c * v[k].im;
        } else {
            dropped += g[k].norm_sqr();
        }
    }
    Ok(PacketData {
        spec: placed.spec,
        re: CauchyPair::new(*grid, re0, re1),
        im: CauchyPair::new(*grid, im0, im1),
        c_frozen: c,
        frozen_variation: variation,
        truncated: if total > 0.0 { (dropped / total).sqrt() } else { 0.0 },
        warnings,
    })
}

/// Second moments of a density about its centroid, along and across ξ.
pub fn second_moments(grid: &Grid, density: &[f64], direction: [f64; 2]) -> ([f64; 2], f64, f64) {
    let m: f64 = density.iter().sum();
    let mut c = [0.0, 0.0];
    for k in 0..grid.len() {
        let x = grid.point(k);
        c[0] += density[k] * x[0];
        c[1] += density[k] * x[1];
    }
    c = [c[0] / m, c[1] / m];
    let (mut along, mut across) = (0.0, 0.0);
    for k in 0..grid.len() {
        let x = grid.point(k);
        let d = [x[0] - c[0], x[1] - c[1]];
        let a = d[0] * direction[0] + d[1] * direction[1];
        let b = -d[0] * direction[1] + d[1] * direction[0];
        along += density[k] * a * a;
        across += density[k] * b * b;
    }
    (c, (along / m).sqrt(), (across / m).sqrt())
}

/// Kinetic-energy density c⁻²|h₁|² of a complex field, nodewise.
pub fn kinetic_density(solver: &WaveSolver, re: &CauchyPair, im: &CauchyPair) -> Field {
    let m = solver.mass();
    (0..re.grid.len())
        .map(|k| m[k] * (re.h1[k] * re.h1[k] + im.h1[k] * im.h1[k]))
        .collect()
}

/// A packet's expected position after travel time t in a homogeneous medium.
pub fn ray_point(spec: &PacketSpec, c: f64, t: f64) -> [f64; 2] {
    [
        spec.center[0] + c * t * spec.direction[0],
        spec.center[1] + c * t * spec.direction[1],
    ]
}
