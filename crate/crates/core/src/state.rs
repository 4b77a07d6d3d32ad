//! State vector `y = (v_x, θ, η, v̇, θ̇, η̇)` stored as one flat vector with
//! contiguous blocks `y1 | y2 | y3 | y4 | y5 | y6`.
//!
//! | block | field | grid            | length  |
//! |-------|-------|-----------------|---------|
//! | y1    | v_x   | cells           | N       |
//! | y2    | θ     | interior nodes  | N − 1   |
//! | y3    | η     | cells           | N       |
//! | y4    | v̇     | nodes           | N + 1   |
//! | y5    | θ̇     | interior nodes  | N − 1   |
//! | y6    | η̇     | cells           | N       |

use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stencil;

/// The six field blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Strain,
    Theta,
    Eta,
    Velocity,
    ThetaRate,
    EtaRate,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Strain,
        Field::Theta,
        Field::Eta,
        Field::Velocity,
        Field::ThetaRate,
        Field::EtaRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Strain => "y1",
            Field::Theta => "y2",
            Field::Eta => "y3",
            Field::Velocity => "y4",
            Field::ThetaRate => "y5",
            Field::EtaRate => "y6",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn is_mechanical(self) -> bool {
        matches!(self, Field::Strain | Field::Velocity)
    }
}

/// Offsets of the blocks for a grid with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    n: usize,
}

impl Layout {
    pub fn new(n_cells: usize) -> Self {
        Self { n: n_cells }
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn len(&self, field: Field) -> usize {
        match field {
            Field::Strain | Field::Eta | Field::EtaRate => self.n,
            Field::Theta | Field::ThetaRate => self.n - 1,
            Field::Velocity => self.n + 1,
        }
    }

    pub fn range(&self, field: Field) -> Range<usize> {
        let n = self.n;
        match field {
            Field::Strain => 0..n,
            Field::Theta => n..2 * n - 1,
            Field::Eta => 2 * n - 1..3 * n - 1,
            Field::Velocity => 3 * n - 1..4 * n,
            Field::ThetaRate => 4 * n..5 * n - 1,
            Field::EtaRate => 5 * n - 1..6 * n - 1,
        }
    }

    /// Full state dimension `2(N−1) + 3N + (N+1)`.
    pub fn dim(&self) -> usize {
        6 * self.n - 1
    }

    /// Dimension of the gauge-reduced coordinates `(y1, y2, y4, y5)`.
    pub fn reduced_dim(&self) -> usize {
        4 * self.n - 1
    }

    /// Range of `field` inside the reduced coordinates. `None` for the
    /// dependent blocks y3, y6.
    pub fn reduced_range(&self, field: Field) -> Option<Range<usize>> {
        let n = self.n;
        match field {
            Field::Strain => Some(0..n),
            Field::Theta => Some(n..2 * n - 1),
            Field::Velocity => Some(2 * n - 1..3 * n),
            Field::ThetaRate => Some(3 * n..4 * n - 1),
            Field::Eta | Field::EtaRate => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    layout: Layout,
    data: DVector<T>,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(n_cells: usize) -> Self {
        let layout = Layout::new(n_cells);
        Self { layout, data: DVector::zeros(layout.dim()) }
    }

    pub fn from_vector(n_cells: usize, data: DVector<T>) -> Result<Self> {
        let layout = Layout::new(n_cells);
        if data.len() != layout.dim() {
            return Err(Error::DimensionMismatch { field: "state", expected: layout.dim(), found: data.len() });
        }
        Ok(Self { layout, data })
    }

    /// Builds a state from all six fields, checking their lengths.
    pub fn from_fields(n_cells: usize, fields: [&[T]; 6]) -> Result<Self> {
        let mut s = Self::zeros(n_cells);
        for (field, values) in Field::ALL.into_iter().zip(fields) {
            s.set(field, values)?;
        }
        Ok(s)
    }

    /// Builds a state on the gauge manifold from the independent fields:
    /// `y3 := xi·grad(y2)`, `y6 := xi·grad(y5)`.
    pub fn constrained(
        n_cells: usize,
        xi: T,
        dx: T,
        strain: &[T],
        theta: &[T],
        velocity: &[T],
        theta_rate: &[T],
    ) -> Result<Self> {
        let mut s = Self::zeros(n_cells);
        s.set(Field::Strain, strain)?;
        s.set(Field::Theta, theta)?;
        s.set(Field::Velocity, velocity)?;
        s.set(Field::ThetaRate, theta_rate)?;
        s.project_gauge(xi, dx);
        Ok(s)
    }

    /// Overwrites y3 and y6 so that both gauge residuals vanish.
    pub fn project_gauge(&mut self, xi: T, dx: T) {
        for (src, dst) in [(Field::Theta, Field::Eta), (Field::ThetaRate, Field::EtaRate)] {
            let g = stencil::grad_interior(self.field(src), dx);
            let range = self.layout.range(dst);
            for (slot, v) in self.data.as_mut_slice()[range].iter_mut().zip(g) {
                *slot = xi * v;
            }
        }
    }

    pub fn set(&mut self, field: Field, values: &[T]) -> Result<()> {
        let expected = self.layout.len(field);
        if values.len() != expected {
            return Err(Error::DimensionMismatch { field: field.name(), expected, found: values.len() });
        }
        let range = self.layout.range(field);
        self.data.as_mut_slice()[range].copy_from_slice(values);
        Ok(())
    }

    pub fn field(&self, field: Field) -> &[T] {
        &self.data.as_slice()[self.layout.range(field)]
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n_cells(&self) -> usize {
        self.layout.n
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<T> {
        self.data
    }
}

/// Relative gauge residual `‖y3 − xi·grad(y2)‖ / max(‖y3‖, ‖xi·grad(y2)‖)`;
/// zero when both fields vanish.
pub fn relative_gauge_residual<T: Real>(theta: &[T], eta: &[T], xi: T, dx: T) -> T {
    let g = stencil::grad_interior(theta, dx);
    let mut res = T::zero();
    let mut n_eta = T::zero();
    let mut n_grad = T::zero();
    for (e, gv) in eta.iter().zip(g) {
        let target = xi * gv;
        res += (*e - target) * (*e - target);
        n_eta += *e * *e;
        n_grad += target * target;
    }
    let denom = n_eta.max(n_grad);
    if denom > T::zero() {
        (res / denom).sqrt()
    } else {
        res.sqrt()
    }
}
