//! The nested domains Ω ⊂ Θ ⊂ Υ on a grid, and the shrinking family Θ^(j).

use super::depth::{solve_depth, DepthField};
use super::model::SpeedModel;
use super::shape::Shape;
use super::GeometryError;
use crate::grid::{Grid, Mask};

/// Ω ⊂ Θ ⊂ Υ where Υ is the open box spanned by the grid (its wall ring excluded).
#[derive(Debug, Clone)]
pub struct DomainChain {
    pub grid: Grid,
    pub omega: Shape,
    pub theta: Shape,
    pub t_max: f64,
}

#[derive(Debug, Clone)]
pub struct ChainMasks {
    pub omega: Mask,
    pub theta: Mask,
}

impl DomainChain {
    /// Builds and checks the chain: Ω̄ ⊂ Θ, Θ̄ away from ∂Υ, and the travel-time
    /// distance from ∂Υ to Θ̄ larger than 2·t_max.
    pub fn new(
        model: &SpeedModel,
        grid: Grid,
        omega: Shape,
        theta: Shape,
        t_max: f64,
    ) -> Result<Self, GeometryError> {
        let chain = DomainChain {
            grid,
            omega,
            theta,
            t_max,
        };
        chain.check(model)?;
        Ok(chain)
    }

    /// Same as `new` but without the Υ-sizing check (used for deliberately small boxes).
    pub fn new_unsized(
        grid: Grid,
        omega: Shape,
        theta: Shape,
        t_max: f64,
    ) -> Result<Self, GeometryError> {
        let chain = DomainChain {
            grid,
            omega,
            theta,
            t_max,
        };
        chain.check_containment()?;
        Ok(chain)
    }

    /// The chain with Θ replaced by a member of the shrinking family. Θ^(j)
    /// touches ∂Ω away from the bump, so only Ω ⊆ Θ^(j) ⊆ Θ is required; the
    /// Υ sizing of `self` carries over.
    pub fn with_probe_theta(&self, theta_j: Shape) -> Result<Self, GeometryError> {
        let tj = theta_j.mask(&self.grid);
        if !self.omega_mask().is_subset_of(&tj) || !tj.is_subset_of(&self.theta_mask()) {
            return Err(GeometryError::Containment("need Ω ⊆ Θ^(j) ⊆ Θ".into()));
        }
        Ok(DomainChain {
            theta: theta_j,
            ..self.clone()
        })
    }

    pub fn masks(&self) -> ChainMasks {
        ChainMasks {
            omega: self.omega.mask(&self.grid),
            theta: self.theta.mask(&self.grid),
        }
    }

    pub fn omega_mask(&self) -> Mask {
        self.omega.mask(&self.grid)
    }

    pub fn theta_mask(&self) -> Mask {
        self.theta.mask(&self.grid)
    }

    fn check_containment(&self) -> Result<(), GeometryError> {
        let m = self.masks();
        if m.omega.count() == 0 {
            return Err(GeometryError::Containment("Ω is empty on the grid".into()));
        }
        if !m.omega.dilate(1).is_subset_of(&m.theta) {
            return Err(GeometryError::Containment(
                "closure of Ω not inside Θ".into(),
            ));
        }
        let theta_closure = m.theta.dilate(1);
        if (0..self.grid.len()).any(|k| self.grid.is_wall(k) && theta_closure.get(k)) {
            return Err(GeometryError::Containment("closure of Θ touches ∂Υ".into()));
        }
        Ok(())
    }

    fn check(&self, model: &SpeedModel) -> Result<(), GeometryError> {
        self.check_containment()?;
        let d = solve_depth(model, &self.grid, &self.theta)?;
        let margin = self.wall_margin(&d);
        if !(margin > 2.0 * self.t_max) {
            return Err(GeometryError::UpsilonTooSmall {
                margin,
                need: 2.0 * self.t_max,
            });
        }
        Ok(())
    }

    /// Travel time from ∂Υ to Θ̄, measured with Θ's depth field.
    pub fn wall_margin(&self, depth: &DepthField) -> f64 {
        (0..self.grid.len())
            .filter(|&k| self.grid.is_wall(k))
            .map(|k| -depth.values[k])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Lateral radius ε_j = ε₁·2^{1−j} of the j-th bump.
pub fn bump_radius(eps1: f64, j: usize) -> f64 {
    eps1 * 0.5f64.powi(j as i32 - 1)
}

/// Height of the j-th bump above ∂Ω relative to its lateral radius.
pub const BUMP_ASPECT: f64 = 0.25;

/// The bump added to Ω at p: points within height ε_j/4 outside Ω and within
/// lateral radius ε_j of p.
pub fn bump_shape(omega: &Shape, p: [f64; 2], eps: f64) -> Shape {
    Shape::Intersection {
        of: vec![
            Shape::Dilate {
                of: Box::new(omega.clone()),
                by: BUMP_ASPECT * eps,
            },
            Shape::Disk {
                center: p,
                radius: eps,
            },
        ],
    }
}

/// Θ^(1) ⊃ … ⊃ Θ^(j_max) ⊃ Ω pinched to a shrinking flat bump around p.
pub fn shrink_sequence(
    chain: &DomainChain,
    p: [f64; 2],
    eps1: f64,
    j_max: usize,
) -> Result<Vec<Shape>, GeometryError> {
    let h = chain.grid.h;
    if chain.omega.sdf(p).abs() > 1e-6 * (1.0 + p[0].abs() + p[1].abs()) + 1e-3 * h {
        return Err(GeometryError::PNotOnBoundary(p));
    }
    let mut out = Vec::with_capacity(j_max);
    let mut prev: Option<Mask> = None;
    for j in 1..=j_max {
        let eps = bump_radius(eps1, j);
        if eps < 3.0 * h || BUMP_ASPECT * eps < 2.0 * h {
            return Err(GeometryError::GridTooCoarse { eps, h });
        }
        let s = Shape::Union {
            of: vec![chain.omega.clone(), bump_shape(&chain.omega, p, eps)],
        };
        let m = s.mask(&chain.grid);
        if let Some(pm) = &prev {
            if !m.is_subset_of(pm) {
                return Err(GeometryError::Containment(format!("Θ^({j}) not nested")));
            }
        }
        prev = Some(m);
        out.push(s);
    }
    Ok(out)
}
