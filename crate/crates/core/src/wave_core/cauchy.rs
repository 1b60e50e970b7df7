//! Cauchy data (h0, h1) on a grid.

use crate::grid::{Field, Grid, Mask};

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPair {
    pub grid: Grid,
    pub h0: Field,
    pub h1: Field,
}

impl CauchyPair {
    pub fn zeros(grid: Grid) -> Self {
        CauchyPair {
            grid,
            h0: grid.zeros(),
            h1: grid.zeros(),
        }
    }

    pub fn new(grid: Grid, h0: Field, h1: Field) -> Self {
        assert_eq!(h0.len(), grid.len());
        assert_eq!(h1.len(), grid.len());
        CauchyPair { grid, h0, h1 }
    }

    /// ν: (f0, f1) ↦ (f0, −f1).
    pub fn time_reverse(&self) -> Self {
        CauchyPair {
            grid: self.grid,
            h0: self.h0.clone(),
            h1: self.h1.iter().map(|v| -v).collect(),
        }
    }

    pub fn time_reverse_in_place(&mut self) {
        for v in &mut self.h1 {
            *v = -*v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        CauchyPair {
            grid: self.grid,
            h0: self.h0.iter().map(|v| a * v).collect(),
            h1: self.h1.iter().map(|v| a * v).collect(),
        }
    }

    /// self += a·other.
    pub fn axpy(&mut self, a: f64, other: &CauchyPair) {
        for (x, y) in self.h0.iter_mut().zip(&other.h0) {
            *x += a * y;
        }
        for (x, y) in self.h1.iter_mut().zip(&other.h1) {
            *x += a * y;
        }
    }

    pub fn add(&self, other: &CauchyPair) -> Self {
        let mut s = self.clone();
        s.axpy(1.0, other);
        s
    }

    pub fn sub(&self, other: &CauchyPair) -> Self {
        let mut s = self.clone();
        s.axpy(-1.0, other);
        s
    }

    /// Zeroes both components outside the mask.
    pub fn restricted(&self, m: &Mask) -> Self {
        let keep = |f: &Field| {
            f.iter()
                .enumerate()
                .map(|(k, v)| if m.get(k) { *v } else { 0.0 })
                .collect()
        };
        CauchyPair {
            grid: self.grid,
            h0: keep(&self.h0),
            h1: keep(&self.h1),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.h0
            .iter()
            .chain(&self.h1)
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Largest |value| over mask nodes.
    pub fn max_abs_on(&self, m: &Mask) -> f64 {
        (0..self.grid.len())
            .filter(|&k| m.get(k))
            .fold(0.0f64, |a, k| a.max(self.h0[k].abs()).max(self.h1[k].abs()))
    }

    /// Nodes inside the mask where either component is nonzero.
    pub fn nonzero_count_on(&self, m: &Mask) -> usize {
        (0..self.grid.len())
            .filter(|&k| m.get(k) && (self.h0[k] != 0.0 || self.h1[k] != 0.0))
            .count()
    }
}
