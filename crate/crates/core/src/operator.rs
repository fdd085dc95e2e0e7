//! Boundary-aware discrete Laplacian and the inpainting system operator.
//!
//! The five-point stencil uses the neighbor rules of [`AngularGrid::neighbor`]
//! (periodic azimuth, horizon reflection, zenith half-turn), so the operator
//! needs no ghost storage. Production application is matrix-free; a dense
//! assembly built cell-for-cell from `neighbor()` exists as a test oracle for
//! small grids.
//!
//! Every output pixel is computed by the same fixed expression regardless of
//! which boundary branch supplied the neighbor values. Together with the
//! reductions in [`crate::reduce`] this makes solver output commute bitwise
//! with cyclic column shifts.

use thiserror::Error;

use crate::exec::Parallelism;
use crate::field::{InpaintingMask, SignalField};
use crate::grid::AngularGrid;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest pixel count the dense assembly oracle accepts.
pub const DENSE_ORACLE_LIMIT: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("dense assembly is an oracle for small instances: {n} pixels exceeds the limit of {limit}")]
    DenseOracleLimit { n: usize, limit: usize },
}

/// Five-point Laplacian coefficients on an [`AngularGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianStencil {
    grid: AngularGrid,
    inv_h_theta_sq: f64,
    inv_h_phi_sq: f64,
}

impl LaplacianStencil {
    /// Stencil with the grid's own angular spacings.
    pub fn new(grid: AngularGrid) -> Self {
        Self {
            grid,
            inv_h_theta_sq: 1.0 / (grid.h_theta() * grid.h_theta()),
            inv_h_phi_sq: 1.0 / (grid.h_phi() * grid.h_phi()),
        }
    }

    /// Stencil with explicit spacings; the grid still fixes the topology.
    pub fn with_spacings(grid: AngularGrid, h_theta: f64, h_phi: f64) -> Result<Self, OperatorError> {
        for h in [h_theta, h_phi] {
            if !(h.is_finite() && h > 0.0) {
                return Err(OperatorError::BadSpacing(h));
            }
        }
        Ok(Self {
            grid,
            inv_h_theta_sq: 1.0 / (h_theta * h_theta),
            inv_h_phi_sq: 1.0 / (h_phi * h_phi),
        })
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn inv_h_theta_sq(&self) -> f64 {
        self.inv_h_theta_sq
    }

    pub fn inv_h_phi_sq(&self) -> f64 {
        self.inv_h_phi_sq
    }

    /// Discrete Laplacian of `u`.
    ///
    /// Panics if `u` lives on a different grid.
    pub fn apply(&self, u: &SignalField) -> SignalField {
        self.apply_with(u, &Parallelism::Sequential)
    }

    /// Discrete Laplacian, computed on the given execution context.
    pub fn apply_with(&self, u: &SignalField, exec: &Parallelism) -> SignalField {
        assert_eq!(u.grid(), &self.grid, "field grid does not match stencil grid");
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(u.values(), &mut out, exec);
        SignalField::from_values(self.grid, out).expect("sized above")
    }

    /// The inpainting system operator: row `p` of the result is `u(p)` where
    /// the mask is known and `-(laplacian u)(p)` elsewhere.
    ///
    /// Panics on grid mismatch.
    pub fn apply_system(&self, mask: &InpaintingMask, u: &SignalField) -> SignalField {
        self.apply_system_with(mask, u, &Parallelism::Sequential)
    }

    pub fn apply_system_with(
        &self,
        mask: &InpaintingMask,
        u: &SignalField,
        exec: &Parallelism,
    ) -> SignalField {
        assert_eq!(u.grid(), &self.grid, "field grid does not match stencil grid");
        assert_eq!(mask.grid(), &self.grid, "mask grid does not match stencil grid");
        let mut out = vec![0.0; self.grid.len()];
        self.restricted_into(mask.flags(), u.values(), &mut out, -1.0, exec);
        for (o, (&v, &k)) in out.iter_mut().zip(u.values().iter().zip(mask.flags())) {
            if k {
                *o = v;
            }
        }
        SignalField::from_values(self.grid, out).expect("sized above")
    }

    /// Writes the full Laplacian of `src` into `dst`.
    pub(crate) fn apply_into(&self, src: &[f64], dst: &mut [f64], exec: &Parallelism) {
        self.rows_into(None, src, dst, 1.0, exec);
    }

    /// Writes `sign * (laplacian src)` at unknown pixels and 0 at known ones.
    pub(crate) fn restricted_into(
        &self,
        known: &[bool],
        src: &[f64],
        dst: &mut [f64],
        sign: f64,
        exec: &Parallelism,
    ) {
        self.rows_into(Some(known), src, dst, sign, exec);
    }

    fn rows_into(
        &self,
        known: Option<&[bool]>,
        src: &[f64],
        dst: &mut [f64],
        sign: f64,
        exec: &Parallelism,
    ) {
        let w = self.grid.width();
        let h = self.grid.height();
        debug_assert_eq!(src.len(), w * h);
        debug_assert_eq!(dst.len(), w * h);
        let row_kernel = |i: usize, out: &mut [f64]| {
            let row = &src[i * w..(i + 1) * w];
            let down = if i == 0 { row } else { &src[(i - 1) * w..i * w] };
            let krow = known.map(|k| &k[i * w..(i + 1) * w]);
            if i + 1 == h {
                let half = w / 2;
                self.row_stencil(out, row, down, krow, sign, |j| {
                    let ju = j + half;
                    row[if ju >= w { ju - w } else { ju }]
                });
            } else {
                let up = &src[(i + 1) * w..(i + 2) * w];
                self.row_stencil(out, row, down, krow, sign, |j| up[j]);
            }
        };
        match exec {
            Parallelism::Sequential => {
                for (i, out) in dst.chunks_mut(w).enumerate() {
                    row_kernel(i, out);
                }
            }
            #[cfg(feature = "parallel")]
            Parallelism::Pool(pool) => pool.install(|| {
                dst.par_chunks_mut(w)
                    .enumerate()
                    .for_each(|(i, out)| row_kernel(i, out));
            }),
        }
    }

    #[inline]
    fn row_stencil(
        &self,
        out: &mut [f64],
        row: &[f64],
        down: &[f64],
        known: Option<&[bool]>,
        sign: f64,
        up_at: impl Fn(usize) -> f64,
    ) {
        let w = row.len();
        let iht = self.inv_h_theta_sq;
        let ihp = self.inv_h_phi_sq;
        for j in 0..w {
            if let Some(k) = known {
                if k[j] {
                    out[j] = 0.0;
                    continue;
                }
            }
            let c = row[j];
            let left = row[if j == 0 { w - 1 } else { j - 1 }];
            let right = row[if j + 1 == w { 0 } else { j + 1 }];
            // One fixed expression for every pixel; boundary handling only
            // changes which cells feed it.
            let lap = (up_at(j) - 2.0 * c + down[j]) * iht + (right - 2.0 * c + left) * ihp;
            out[j] = sign * lap;
        }
    }

    /// Explicit dense system matrix, rows as in [`Self::apply_system`],
    /// assembled entry by entry from [`AngularGrid::neighbor`]. Test oracle
    /// for small instances only.
    pub fn assemble_dense(&self, mask: &InpaintingMask) -> Result<DenseMatrix, OperatorError> {
        assert_eq!(mask.grid(), &self.grid, "mask grid does not match stencil grid");
        let n = self.grid.len();
        if n > DENSE_ORACLE_LIMIT {
            return Err(OperatorError::DenseOracleLimit {
                n,
                limit: DENSE_ORACLE_LIMIT,
            });
        }
        let mut m = DenseMatrix::zeros(n);
        for lin in 0..n {
            let p = self.grid.pixel(lin);
            if mask.is_known(p) {
                m.add(lin, lin, 1.0);
                continue;
            }
            // Row of -A: the Laplacian row built from the neighbor map,
            // negated. Reflected neighbors accumulate onto the diagonal.
            use crate::grid::Direction::*;
            for (dir, coef) in [
                (Up, self.inv_h_theta_sq),
                (Down, self.inv_h_theta_sq),
                (Left, self.inv_h_phi_sq),
                (Right, self.inv_h_phi_sq),
            ] {
                let q = self.grid.neighbor(p, dir);
                m.add(lin, self.grid.linear(q), -coef);
            }
            m.add(lin, lin, 2.0 * (self.inv_h_theta_sq + self.inv_h_phi_sq));
        }
        Ok(m)
    }
}

/// Minimal row-major dense matrix for the assembly oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Largest absolute Laplacian over unknown pixels; the harmonicity
/// diagnostic for solved fields.
pub fn max_abs_laplacian_unknown(
    st: &LaplacianStencil,
    mask: &InpaintingMask,
    u: &SignalField,
) -> f64 {
    let lap = st.apply(u);
    lap.values()
        .iter()
        .zip(mask.flags())
        .filter(|(_, &k)| !k)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max)
}
