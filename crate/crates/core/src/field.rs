//! Per-pixel value and mask containers shared by the pipeline stages.

use thiserror::Error;

use crate::grid::{AngularGrid, PixelIndex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("value buffer has length {got}, grid needs {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Signal levels in dBm on an [`AngularGrid`], stored row-major.
///
/// Pixels not covered by the companion [`InpaintingMask`] may hold any
/// placeholder value.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalField {
    grid: AngularGrid,
    values: Vec<f64>,
}

impl SignalField {
    pub fn constant(grid: AngularGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: AngularGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, p: PixelIndex) -> f64 {
        self.values[self.grid.linear(p)]
    }
}

/// Binary per-pixel confidence: `true` where the signal level is known.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintingMask {
    grid: AngularGrid,
    known: Vec<bool>,
}

impl InpaintingMask {
    pub fn all_unknown(grid: AngularGrid) -> Self {
        Self {
            grid,
            known: vec![false; grid.len()],
        }
    }

    pub fn all_known(grid: AngularGrid) -> Self {
        Self {
            grid,
            known: vec![true; grid.len()],
        }
    }

    pub fn from_flags(grid: AngularGrid, known: Vec<bool>) -> Result<Self, FieldError> {
        if known.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                expected: grid.len(),
                got: known.len(),
            });
        }
        Ok(Self { grid, known })
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn flags(&self) -> &[bool] {
        &self.known
    }

    #[inline]
    pub fn is_known(&self, p: PixelIndex) -> bool {
        self.known[self.grid.linear(p)]
    }

    pub fn count_known(&self) -> usize {
        self.known.iter().filter(|&&k| k).count()
    }
}
