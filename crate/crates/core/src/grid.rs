//! Grids on the torus `T^n` and on the channel `[-L, L] x T^{n-1}`.
//!
//! Fields are stored row-major with `x1` slowest: index
//! `i1 * (n2 * n3) + i2 * n3 + i3`. Missing directions have one point, so
//! every field is a stack of `n1` contiguous transverse rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Index arithmetic for a three-level row-major block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Layout {
    pub fn row_len(&self) -> usize {
        self.n2 * self.n3
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n2 + i2) * self.n3 + i3
    }
}

fn check_points(points: &[usize], what: &str) -> Result<()> {
    if points.iter().any(|&m| m == 0) {
        return Err(Error::InvalidArgument(format!("{what}: every direction needs >= 1 point")));
    }
    Ok(())
}

/// Uniform periodic grid on the unit torus `[0, 1)^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    points: Vec<usize>,
}

impl TorusGrid {
    pub fn new(points: Vec<usize>) -> Result<Self> {
        if points.is_empty() || points.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "torus dimension must be 1..={MAX_DIM}, got {}",
                points.len()
            )));
        }
        check_points(&points, "torus grid")?;
        Ok(Self { points })
    }

    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        Self::new(vec![m; n])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn layout(&self) -> Layout {
        let p = |d: usize| self.points.get(d).copied().unwrap_or(1);
        Layout { n1: p(0), n2: p(1), n3: p(2) }
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, d: usize) -> f64 {
        1.0 / self.points[d] as f64
    }

    /// Spacings for all three storage directions (unused ones are 1).
    pub fn spacings3(&self) -> [f64; 3] {
        let mut h = [1.0; 3];
        for (d, hd) in h.iter_mut().enumerate().take(self.dim()) {
            *hd = self.spacing(d);
        }
        h
    }

    pub fn coord(&self, d: usize, i: usize) -> f64 {
        i as f64 * self.spacing(d)
    }

    /// Quadrature weight of one grid point (uniform, sums to 1).
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Grid with the same transverse points and a single `x1` point, for
    /// perturbations that do not depend on `x1`.
    pub fn collapsed_x1(&self) -> Self {
        let mut points = self.points.clone();
        points[0] = 1;
        Self { points }
    }
}

/// Channel grid: `n1` nodes on `[-L, L]` including both ends, periodic
/// unit-length transverse directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrid {
    pub half_width: f64,
    pub n1: usize,
    pub transverse: Vec<usize>,
}

impl ChannelGrid {
    pub fn new(half_width: f64, n1: usize, transverse: Vec<usize>) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!("L must be positive, got {half_width}")));
        }
        if n1 < 5 {
            return Err(Error::InvalidArgument(format!("need at least 5 x1 nodes, got {n1}")));
        }
        if transverse.len() + 1 > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "channel dimension must be <= {MAX_DIM}"
            )));
        }
        check_points(&transverse, "channel transverse grid")?;
        Ok(Self {
            half_width,
            n1,
            transverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.transverse.len() + 1
    }

    pub fn layout(&self) -> Layout {
        let p = |d: usize| self.transverse.get(d).copied().unwrap_or(1);
        Layout { n1: self.n1, n2: p(0), n3: p(1) }
    }

    pub fn len(&self) -> usize {
        self.layout().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_len(&self) -> usize {
        self.layout().row_len()
    }

    pub fn h1(&self) -> f64 {
        2.0 * self.half_width / (self.n1 - 1) as f64
    }

    pub fn spacings3(&self) -> [f64; 3] {
        let mut h = [1.0; 3];
        h[0] = self.h1();
        for (d, &m) in self.transverse.iter().enumerate() {
            h[d + 1] = 1.0 / m as f64;
        }
        h
    }

    pub fn x1(&self, i: usize) -> f64 {
        if i + 1 == self.n1 {
            self.half_width
        } else {
            -self.half_width + i as f64 * self.h1()
        }
    }

    /// `x1` of ghost row `g` in `-2..0` or `n1..n1+2`.
    pub fn x1_ext(&self, i: isize) -> f64 {
        -self.half_width + i as f64 * self.h1()
    }

    pub fn x1_nodes(&self) -> Vec<f64> {
        (0..self.n1).map(|i| self.x1(i)).collect()
    }

    /// Transverse coordinate `x_{d+2}` of index `i`.
    pub fn transverse_coord(&self, d: usize, i: usize) -> f64 {
        i as f64 / self.transverse[d] as f64
    }

    /// Trapezoid weights in `x1`.
    pub fn x1_weights(&self) -> Vec<f64> {
        let h = self.h1();
        (0..self.n1)
            .map(|i| if i == 0 || i + 1 == self.n1 { 0.5 * h } else { h })
            .collect()
    }

    /// Uniform transverse weight (the transverse torus has measure 1).
    pub fn transverse_weight(&self) -> f64 {
        1.0 / self.row_len() as f64
    }

    /// Torus grid sharing this channel's transverse points, with `n1_cell`
    /// points in `x1`.
    pub fn matching_torus(&self, n1_cell: usize) -> Result<TorusGrid> {
        let mut p = vec![n1_cell];
        p.extend_from_slice(&self.transverse);
        TorusGrid::new(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_weights_sum_to_one() {
        for pts in [vec![64, 64], vec![1, 16], vec![8, 4, 2]] {
            let g = TorusGrid::new(pts).unwrap();
            let s: f64 = (0..g.len()).map(|_| g.weight()).sum();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn channel_nodes_cover_both_ends() {
        let g = ChannelGrid::new(10.0, 21, vec![8]).unwrap();
        assert_eq!(g.x1(0), -10.0);
        assert_eq!(g.x1(20), 10.0);
        assert_eq!(g.h1(), 1.0);
        let w: f64 = g.x1_weights().iter().sum();
        assert!((w - 20.0).abs() < 1e-12);
        let tw: f64 = (0..g.row_len()).map(|_| g.transverse_weight()).sum();
        assert_eq!(tw, 1.0);
    }

    #[test]
    fn layout_index_is_row_major() {
        let l = Layout { n1: 3, n2: 4, n3: 5 };
        assert_eq!(l.index(0, 0, 1), 1);
        assert_eq!(l.index(0, 1, 0), 5);
        assert_eq!(l.index(1, 0, 0), 20);
        assert_eq!(l.index(2, 3, 4), l.len() - 1);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(vec![]).is_err());
        assert!(TorusGrid::new(vec![4, 0]).is_err());
        assert!(ChannelGrid::new(-1.0, 10, vec![4]).is_err());
        assert!(ChannelGrid::new(1.0, 3, vec![4]).is_err());
        assert!(ChannelGrid::new(1.0, 10, vec![4, 4, 4]).is_err());
    }
}
