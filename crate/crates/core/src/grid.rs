use crate::error::{Error, Result};

/// Minimum number of nodes a grid may carry.
pub const MIN_NODES: usize = 16;

/// Default spacing in log-radius.
pub const DEFAULT_H: f64 = 1.0 / 128.0;

/// Uniform grid in the log-radius variable `t = 2 log r`.
///
/// Nodes are generated as `t_min + i * h`, so grids whose end points are
/// multiples of `h` nest exactly under halving of `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    t_min: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    /// Builds a grid starting at `t_min` with spacing `h`, extended so that the
    /// last node is the first one at or beyond `t_max`.
    pub fn new(t_min: f64, t_max: f64, h: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && h.is_finite()) {
            return Err(Error::Grid("non-finite grid parameter".into()));
        }
        if !(t_min < t_max) {
            return Err(Error::Grid(format!("t_min = {t_min} must be < t_max = {t_max}")));
        }
        if !(h > 0.0) {
            return Err(Error::Grid(format!("h = {h} must be positive")));
        }
        let intervals = ((t_max - t_min) / h - 1e-9).ceil().max(1.0) as usize;
        if intervals + 1 < MIN_NODES {
            return Err(Error::Grid(format!("grid has {} nodes, at least {MIN_NODES} required", intervals + 1)));
        }
        let nodes = (0..=intervals).map(|i| t_min + i as f64 * h).collect();
        Ok(Self { t_min, h, nodes })
    }

    /// Same as [`Grid::new`] but with `t_min` snapped down to a multiple of
    /// `align`, which keeps refinement sequences nested.
    pub fn aligned(t_min: f64, t_max: f64, h: f64, align: f64) -> Result<Self> {
        let snapped = (t_min / align).floor() * align;
        Self::new(snapped, t_max, h)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().expect("grid is never empty")
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max()
    }

    /// Index of the node closest to `t` (clamped to the grid).
    pub fn nearest(&self, t: f64) -> usize {
        let i = ((t - self.t_min) / self.h).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }

    /// The grid with half the spacing over the same interval.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.t_min, self.t_max(), self.h / 2.0)
    }

    /// Sub-grid of nodes in `[a, b]`, same spacing.
    pub fn window(&self, a: f64, b: f64) -> Result<Self> {
        let i0 = ((a - self.t_min) / self.h - 1e-9).ceil().max(0.0) as usize;
        let i1 = (((b - self.t_min) / self.h + 1e-9).floor() as usize).min(self.len() - 1);
        if i1 <= i0 {
            return Err(Error::Grid(format!("window [{a}, {b}] is empty")));
        }
        Self::new(self.nodes[i0], self.nodes[i1], self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_uniform() {
        let g = Grid::new(-20.0, 40.0, DEFAULT_H).unwrap();
        assert_eq!(g.len(), 60 * 128 + 1);
        assert_eq!(g.t_max(), 40.0);
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - g.h()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::new(1.0, 0.0, 0.1).is_err());
        assert!(Grid::new(0.0, 1.0, -0.1).is_err());
        assert!(Grid::new(0.0, 1.0, 0.1).is_err()); // 11 nodes < 16
        assert!(Grid::new(0.0, f64::NAN, 0.01).is_err());
    }

    #[test]
    fn refinement_nests() {
        let g = Grid::aligned(-17.21, 10.0, 1.0 / 128.0, 0.125).unwrap();
        let f = g.refined().unwrap();
        assert_eq!(f.len(), 2 * g.len() - 1);
        for (i, t) in g.nodes().iter().enumerate() {
            assert_eq!(*t, f.nodes()[2 * i]);
        }
    }
}
