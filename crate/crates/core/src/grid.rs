//! Uniform staggered grid on `(0, L)`.
//!
//! Nodes sit at `j*dx` for `j = 0..=N`, cells (midpoints) at `(j + 1/2)*dx`
//! for `j = 0..N`. Node fields use trapezoid weights, cell fields midpoint
//! weights; under these weights the node→cell difference and the cell→node
//! difference are negative adjoints of each other.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredGrid<T> {
    n_cells: usize,
    length: T,
    dx: T,
    node_coords: Vec<T>,
    cell_coords: Vec<T>,
}

impl<T: Real> StaggeredGrid<T> {
    pub fn new(length: T, n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::GridTooCoarse(n_cells));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::NonPositiveParameter("L"));
        }
        let n = T::from_count(n_cells);
        let dx = length / n;
        let mut node_coords: Vec<T> = (0..=n_cells).map(|j| T::from_count(j) * length / n).collect();
        // pin the right end exactly
        node_coords[n_cells] = length;
        let half = T::lit(0.5);
        let cell_coords = (0..n_cells).map(|j| (T::from_count(j) + half) * length / n).collect();
        Ok(Self { n_cells, length, dx, node_coords, cell_coords })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }
    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }
    pub fn dx(&self) -> T {
        self.dx
    }
    pub fn length(&self) -> T {
        self.length
    }
    pub fn node_coords(&self) -> &[T] {
        &self.node_coords
    }
    pub fn cell_coords(&self) -> &[T] {
        &self.cell_coords
    }
    pub fn interior_coords(&self) -> &[T] {
        &self.node_coords[1..self.n_cells]
    }

    /// Trapezoid weight of node `j`.
    pub fn node_weight(&self, j: usize) -> T {
        if j == 0 || j == self.n_cells {
            self.dx * T::lit(0.5)
        } else {
            self.dx
        }
    }

    /// Samples `f` at the cell midpoints.
    pub fn sample_cells(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.cell_coords.iter().map(|&x| f(x)).collect()
    }

    /// Samples `f` at all nodes.
    pub fn sample_nodes(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.node_coords.iter().map(|&x| f(x)).collect()
    }

    /// Samples `f` at the interior nodes (boundary values are implicit zeros).
    pub fn sample_interior(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.interior_coords().iter().map(|&x| f(x)).collect()
    }
}
