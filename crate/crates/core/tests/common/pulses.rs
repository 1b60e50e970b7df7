//! Exact 1D pulse bookkeeping in a piecewise-constant medium.
//!
//! For c⁻²u_tt = u_xx with continuous u and u_x, a wave written in the
//! travel-time coordinate τ(x) = ∫ dx/c keeps its shape; crossing from speed a
//! into speed b it splits into a transmitted copy (factor 2b/(a+b)) and a
//! reflected copy (factor (b−a)/(a+b)). A state is a list of such pulses.

use sclab::grid::Grid;
use sclab::wave_core::CauchyPair;

#[derive(Debug, Clone)]
pub struct Layers {
    /// Interface positions, increasing.
    pub x: Vec<f64>,
    /// Speeds, one more than interfaces; speeds[0] left of x[0].
    pub c: Vec<f64>,
}

impl Layers {
    pub fn tau(&self, x: f64) -> f64 {
        let mut t = 0.0;
        let mut left = 0.0f64;
        // τ(0) = 0 by convention
        if x >= 0.0 {
            for (i, &xi) in self.x.iter().enumerate() {
                if xi <= left {
                    continue;
                }
                if x <= xi {
                    return t + (x - left) / self.c[i];
                }
                t += (xi - left) / self.c[i];
                left = xi;
            }
            t + (x - left) / self.c[self.x.len()]
        } else {
            // only the first layer extends to the left of 0 in our layouts
            assert!(self.x.first().map_or(true, |&x0| x0 > 0.0));
            x / self.c[0]
        }
    }

    pub fn tau_interfaces(&self) -> Vec<f64> {
        self.x.iter().map(|&x| self.tau(x)).collect()
    }

    fn layer_of_tau(&self, s: f64, taus: &[f64]) -> usize {
        taus.iter().filter(|&&t| s > t).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Pulse {
    /// τ-position of the centre.
    pub s: f64,
    /// +1 right-going, −1 left-going.
    pub dir: f64,
    pub amp: f64,
}

/// Smooth compact bump of half-width w (in τ) and its derivative.
pub fn bump(sig: f64, w: f64) -> (f64, f64) {
    if sig.abs() >= w {
        return (0.0, 0.0);
    }
    let a = std::f64::consts::FRAC_PI_2 * sig / w;
    let c = a.cos();
    let d = -4.0 * c.powi(3) * a.sin() * std::f64::consts::FRAC_PI_2 / w;
    (c.powi(4), d)
}

#[derive(Debug, Clone)]
pub struct PulseState {
    pub pulses: Vec<Pulse>,
}

impl PulseState {
    pub fn single(s: f64, dir: f64, amp: f64) -> Self {
        PulseState {
            pulses: vec![Pulse { s, dir, amp }],
        }
    }

    pub fn propagate(&self, layers: &Layers, t: f64) -> PulseState {
        let taus = layers.tau_interfaces();
        let mut out = Vec::new();
        let mut work: Vec<(Pulse, f64)> = self.pulses.iter().map(|p| (*p, t)).collect();
        while let Some((p, left)) = work.pop() {
            if p.amp.abs() < 1e-14 {
                continue;
            }
            // next interface in the travel direction
            let next = taus
                .iter()
                .copied()
                .filter(|&ti| {
                    if p.dir > 0.0 {
                        ti > p.s + 1e-12
                    } else {
                        ti < p.s - 1e-12
                    }
                })
                .min_by(|a, b| (a - p.s).abs().total_cmp(&(b - p.s).abs()));
            match next {
                Some(ti) if (ti - p.s).abs() < left => {
                    let dtime = (ti - p.s).abs();
                    let from = layers.layer_of_tau(p.s, &taus);
                    let to = if p.dir > 0.0 { from + 1 } else { from - 1 };
                    let (a, b) = (layers.c[from], layers.c[to]);
                    let tr = 2.0 * b / (a + b);
                    let rf = (b - a) / (a + b);
                    let rest = left - dtime;
                    work.push((
                        Pulse {
                            s: ti + p.dir * 1e-13,
                            dir: p.dir,
                            amp: p.amp * tr,
                        },
                        rest,
                    ));
                    work.push((
                        Pulse {
                            s: ti - p.dir * 1e-13,
                            dir: -p.dir,
                            amp: p.amp * rf,
                        },
                        rest,
                    ));
                }
                _ => out.push(Pulse {
                    s: p.s + p.dir * left,
                    ..p
                }),
            }
        }
        PulseState { pulses: out }
    }

    pub fn reversed(&self) -> PulseState {
        PulseState {
            pulses: self
                .pulses
                .iter()
                .map(|p| Pulse { dir: -p.dir, ..*p })
                .collect(),
        }
    }

    /// Pulses whose centre satisfies the predicate.
    pub fn keep(&self, f: impl Fn(f64) -> bool) -> PulseState {
        PulseState {
            pulses: self.pulses.iter().copied().filter(|p| f(p.s)).collect(),
        }
    }

    pub fn plus(&self, o: &PulseState) -> PulseState {
        PulseState {
            pulses: self.pulses.iter().chain(&o.pulses).copied().collect(),
        }
    }

    /// Merges coincident pulses travelling the same way.
    pub fn merged(&self) -> PulseState {
        let mut out: Vec<Pulse> = Vec::new();
        for p in &self.pulses {
            match out
                .iter_mut()
                .find(|q| q.dir == p.dir && (q.s - p.s).abs() < 1e-9)
            {
                Some(q) => q.amp += p.amp,
                None => out.push(*p),
            }
        }
        PulseState { pulses: out }
    }

    /// Closest approach of any pulse centre to the given τ-points.
    pub fn clearance(&self, points: &[f64]) -> f64 {
        self.pulses
            .iter()
            .filter(|p| p.amp.abs() > 1e-3)
            .flat_map(|p| points.iter().map(move |q| (p.s - q).abs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn render(&self, layers: &Layers, grid: &Grid, w: f64) -> CauchyPair {
        let mut u = grid.zeros();
        let mut v = grid.zeros();
        for k in 0..grid.len() {
            if grid.is_wall(k) {
                continue;
            }
            let tk = layers.tau(grid.point(k)[0]);
            for p in &self.pulses {
                let (f, df) = bump(tk - p.s, w);
                u[k] += p.amp * f;
                // u = a f(τ − s − dir t) ⇒ u_t = −dir a f'
                v[k] -= p.dir * p.amp * df;
            }
        }
        CauchyPair::new(*grid, u, v)
    }
}

/// The scattering control series in pulse form with Θ = (0, x_theta) in x.
pub fn control_series(
    layers: &Layers,
    h0: &PulseState,
    t: f64,
    theta_hi: f64,
    k: usize,
) -> Vec<PulseState> {
    let th = layers.tau(theta_hi);
    let outside = |s: f64| s < 0.0 || s > th;
    let pi_star_r = |h: &PulseState| {
        h.propagate(layers, 2.0 * t)
            .reversed()
            .keep(outside)
            .merged()
    };
    let mut out = vec![h0.clone()];
    for _ in 0..k {
        let last = out.last().unwrap();
        let next = h0.plus(&pi_star_r(&pi_star_r(last))).merged();
        out.push(next);
    }
    out
}
