//! Conjugate-gradient solution of the inpainting system.
//!
//! The full system matrix has identity rows at known pixels, so the solve is
//! reduced to the unknown pixels, where the restricted negated Laplacian is
//! symmetric positive definite once at least one pixel is known. Vectors stay
//! full-size with zeros pinned at known pixels; that keeps indexing trivial
//! and changes none of the inner products (exact accumulation ignores zeros).
//!
//! The iteration actually solves for the deviation from the mean of the known
//! data. That shift costs one vector addition and makes constant known data
//! exact with a zero starting residual, instead of burning iterations on a
//! solution the boundary rules already force.

use thiserror::Error;

use crate::exec::Parallelism;
#[cfg(feature = "parallel")]
use crate::exec::CHUNK;
use crate::field::{InpaintingMask, SignalField};
use crate::operator::LaplacianStencil;
use crate::reduce::{fast_dot, repro_dot, repro_sum};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no known pixels: the system is singular (constants are in the nullspace)")]
    SingularSystem,
    #[error("known pixel {index} holds a non-finite value")]
    NonFiniteInput { index: usize },
    #[error("numerical breakdown in iteration {iteration}: non-positive or non-finite inner product")]
    NumericalBreakdown { iteration: usize },
}

/// Conjugate-gradient controls.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative residual threshold: iterate until ||r|| <= epsilon * ||r0||.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub workers: usize,
    /// Use the order-invariant reductions of [`crate::reduce`]. On by
    /// default; runs are then bitwise reproducible across worker counts.
    pub deterministic_reductions: bool,
    /// Keep the per-iteration residual norms in the report.
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_iterations: 100_000,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            deterministic_reductions: true,
            record_history: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SolveError::InvalidConfig("epsilon must be in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig("max_iterations must be at least 1"));
        }
        if self.workers == 0 {
            return Err(SolveError::InvalidConfig("workers must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of one conjugate-gradient run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_residual_norm: f64,
    pub final_residual_norm: f64,
    pub converged: bool,
    /// L2 residual norms, starting with the initial residual, when
    /// [`SolverConfig::record_history`] is set.
    pub residual_history: Option<Vec<f64>>,
}

/// Conjugate gradients for a symmetric positive-definite operator, from the
/// zero start vector.
///
/// `apply` must write `A * input` into its second argument. Terminates when
/// the residual norm falls to `epsilon` times the initial one (immediately,
/// with zero iterations, for `b = 0`) or when `max_iterations` is exhausted;
/// the latter reports `converged = false` rather than failing.
pub fn cg_solve<F>(apply: F, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport), SolveError>
where
    F: Fn(&[f64], &mut [f64]),
{
    cfg.validate()?;
    let exec = Parallelism::from_workers(cfg.workers);
    cg_solve_with(apply, b, cfg, &exec)
}

pub(crate) fn cg_solve_with<F>(
    apply: F,
    b: &[f64],
    cfg: &SolverConfig,
    exec: &Parallelism,
) -> Result<(Vec<f64>, SolveReport), SolveError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dot = |x: &[f64], y: &[f64]| {
        if cfg.deterministic_reductions {
            repro_dot(exec, x, y)
        } else {
            fast_dot(exec, x, y)
        }
    };

    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut w = vec![0.0; n];

    let mut rr = dot(&r, &r);
    if !rr.is_finite() {
        return Err(SolveError::NumericalBreakdown { iteration: 0 });
    }
    let r0 = rr.sqrt();
    let mut history = cfg.record_history.then(|| vec![r0]);

    if r0 == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                initial_residual_norm: 0.0,
                final_residual_norm: 0.0,
                converged: true,
                residual_history: history,
            },
        ));
    }

    let threshold = cfg.epsilon * r0;
    let mut iterations = 0;
    let mut residual = r0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        apply(&p, &mut w);
        let pw = dot(&p, &w);
        if !pw.is_finite() || pw <= 0.0 {
            return Err(SolveError::NumericalBreakdown {
                iteration: iterations + 1,
            });
        }
        let alpha = rr / pw;
        axpy(exec, &mut x, alpha, &p);
        axpy(exec, &mut r, -alpha, &w);
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(SolveError::NumericalBreakdown {
                iteration: iterations + 1,
            });
        }
        iterations += 1;
        residual = rr_new.sqrt();
        if let Some(h) = history.as_mut() {
            h.push(residual);
        }
        if residual <= threshold {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        xpay(exec, &mut p, beta, &r);
        rr = rr_new;
    }

    Ok((
        x,
        SolveReport {
            iterations,
            initial_residual_norm: r0,
            final_residual_norm: residual,
            converged,
            residual_history: history,
        },
    ))
}

/// Solves the inpainting system for the unknown pixels.
///
/// Known pixels of the result carry `f` bitwise and never enter the
/// iteration; unknown pixels satisfy the restricted Laplace system driven by
/// the known data. Non-convergence within the iteration budget is reported,
/// not raised: the partial field is still returned.
pub fn solve_reduced(
    st: &LaplacianStencil,
    mask: &InpaintingMask,
    f: &SignalField,
    cfg: &SolverConfig,
) -> Result<(SignalField, SolveReport), SolveError> {
    assert_eq!(f.grid(), st.grid(), "field grid does not match stencil grid");
    assert_eq!(mask.grid(), st.grid(), "mask grid does not match stencil grid");
    cfg.validate()?;

    let grid = *st.grid();
    let n = grid.len();
    let known = mask.flags();
    let vals = f.values();

    let known_count = mask.count_known();
    if known_count == 0 {
        return Err(SolveError::SingularSystem);
    }
    for (i, (&v, &k)) in vals.iter().zip(known).enumerate() {
        if k && !v.is_finite() {
            return Err(SolveError::NonFiniteInput { index: i });
        }
    }

    let exec = Parallelism::from_workers(cfg.workers);
    let history = |r0: f64| cfg.record_history.then(|| vec![r0]);

    if known_count == n {
        return Ok((
            f.clone(),
            SolveReport {
                iterations: 0,
                initial_residual_norm: 0.0,
                final_residual_norm: 0.0,
                converged: true,
                residual_history: history(0.0),
            },
        ));
    }

    // Mean of the known data: the constant the solution deviates from.
    // Constant data short-circuits so that the deviation is exactly zero.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&v, &k) in vals.iter().zip(known) {
        if k {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let mean = if lo == hi {
        lo
    } else {
        let sum: f64 = {
            let known_vals: Vec<f64> = vals
                .iter()
                .zip(known)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .collect();
            repro_sum(&exec, &known_vals)
        };
        sum / known_count as f64
    };

    // Right-hand side of the deviation system: the Laplacian of the known
    // deviations extended by zero, restricted to the unknown pixels.
    let mut ext = vec![0.0; n];
    for i in 0..n {
        if known[i] {
            ext[i] = vals[i] - mean;
        }
    }
    let mut b = vec![0.0; n];
    st.restricted_into(known, &ext, &mut b, 1.0, &exec);

    let apply = |v: &[f64], out: &mut [f64]| st.restricted_into(known, v, out, -1.0, &exec);
    let (dev, report) = cg_solve_with(apply, &b, cfg, &exec)?;

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(if known[i] { vals[i] } else { mean + dev[i] });
    }
    Ok((SignalField::from_values(grid, out).expect("sized above"), report))
}

/// `y += a * x`, elementwise; identical results for any execution context.
fn axpy(exec: &Parallelism, y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    match exec {
        Parallelism::Sequential => {
            for (yi, &xi) in y.iter_mut().zip(x) {
                *yi += a * xi;
            }
        }
        #[cfg(feature = "parallel")]
        Parallelism::Pool(pool) => pool.install(|| {
            y.par_chunks_mut(CHUNK)
                .zip(x.par_chunks(CHUNK))
                .for_each(|(cy, cx)| {
                    for (yi, &xi) in cy.iter_mut().zip(cx) {
                        *yi += a * xi;
                    }
                });
        }),
    }
}

/// `p = x + a * p`, elementwise.
fn xpay(exec: &Parallelism, p: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(p.len(), x.len());
    match exec {
        Parallelism::Sequential => {
            for (pi, &xi) in p.iter_mut().zip(x) {
                *pi = xi + a * *pi;
            }
        }
        #[cfg(feature = "parallel")]
        Parallelism::Pool(pool) => pool.install(|| {
            p.par_chunks_mut(CHUNK)
                .zip(x.par_chunks(CHUNK))
                .for_each(|(cp, cx)| {
                    for (pi, &xi) in cp.iter_mut().zip(cx) {
                        *pi = xi + a * *pi;
                    }
                });
        }),
    }
}
