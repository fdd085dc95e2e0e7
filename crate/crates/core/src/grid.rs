//! Discrete azimuth-elevation grid and boundary-aware neighbor lookup.
//!
//! The sky is discretized as `height` rows of elevation (row 0 at the horizon,
//! row `height - 1` at the zenith) times `width` columns of azimuth. Azimuth is
//! periodic, so there is no duplicated column at 360 degrees. Stepping off the
//! grid is resolved by [`AngularGrid::neighbor`]:
//!
//! * left/right wrap around in azimuth,
//! * below the horizon reflects onto the horizon row itself (no-flux), and
//! * past the zenith lands on the zenith row at the opposite azimuth
//!   (a shift by half the width), since looking "past" straight-up means
//!   looking down the other side of the sky.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid width must be at least 2, got {0}")]
    WidthTooSmall(usize),
    #[error("grid width must be even so the zenith half-turn maps columns to columns, got {0}")]
    OddWidth(usize),
    #[error("grid height must be at least 2, got {0}")]
    HeightTooSmall(usize),
}

/// Stencil step direction. `Up` is toward the zenith (increasing row).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];
}

/// Position of one pixel: `row` indexes elevation from the horizon,
/// `col` indexes azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelIndex {
    pub row: usize,
    pub col: usize,
}

impl PixelIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Regular discretization of the azimuth-elevation rectangle.
///
/// Azimuth covers one full turn in `width` cells of spacing `h_phi`;
/// elevation covers the quarter turn from horizon to zenith inclusive in
/// `height` rows of spacing `h_theta`. Immutable after construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularGrid {
    width: usize,
    height: usize,
    h_phi: f64,
    h_theta: f64,
}

impl AngularGrid {
    /// Builds a grid with `width` azimuth columns and `height` elevation rows.
    ///
    /// `width` must be even: the zenith boundary rule shifts columns by half a
    /// turn, which is only index-exact for even widths.
    pub fn new(width: usize, height: usize) -> Result<Self, GridError> {
        if width < 2 {
            return Err(GridError::WidthTooSmall(width));
        }
        if width % 2 != 0 {
            return Err(GridError::OddWidth(width));
        }
        if height < 2 {
            return Err(GridError::HeightTooSmall(height));
        }
        Ok(Self {
            width,
            height,
            h_phi: 2.0 * PI / width as f64,
            h_theta: (PI / 2.0) / (height - 1) as f64,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false // width, height >= 2
    }

    /// Azimuth spacing in radians.
    pub fn h_phi(&self) -> f64 {
        self.h_phi
    }

    /// Elevation spacing in radians.
    pub fn h_theta(&self) -> f64 {
        self.h_theta
    }

    pub fn contains(&self, p: PixelIndex) -> bool {
        p.row < self.height && p.col < self.width
    }

    /// Row-major flattened index.
    #[inline]
    pub fn linear(&self, p: PixelIndex) -> usize {
        debug_assert!(self.contains(p));
        p.row * self.width + p.col
    }

    #[inline]
    pub fn pixel(&self, linear: usize) -> PixelIndex {
        debug_assert!(linear < self.len());
        PixelIndex::new(linear / self.width, linear % self.width)
    }

    /// The grid cell supplying the stencil neighbor value of `p` in `dir`.
    ///
    /// Interior steps return the adjacent cell. At the boundaries:
    /// left/right wrap periodically, down from the horizon row returns the
    /// cell itself, and up from the zenith row returns the zenith row cell
    /// half a turn away in azimuth. Total on valid inputs.
    #[inline]
    pub fn neighbor(&self, p: PixelIndex, dir: Direction) -> PixelIndex {
        debug_assert!(self.contains(p));
        match dir {
            Direction::Up => {
                if p.row + 1 == self.height {
                    let mut col = p.col + self.width / 2;
                    if col >= self.width {
                        col -= self.width;
                    }
                    PixelIndex::new(p.row, col)
                } else {
                    PixelIndex::new(p.row + 1, p.col)
                }
            }
            Direction::Down => {
                if p.row == 0 {
                    p
                } else {
                    PixelIndex::new(p.row - 1, p.col)
                }
            }
            Direction::Left => {
                if p.col == 0 {
                    PixelIndex::new(p.row, self.width - 1)
                } else {
                    PixelIndex::new(p.row, p.col - 1)
                }
            }
            Direction::Right => {
                if p.col + 1 == self.width {
                    PixelIndex::new(p.row, 0)
                } else {
                    PixelIndex::new(p.row, p.col + 1)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulp(x: f64) -> f64 {
        let next = f64::from_bits(x.to_bits() + 1);
        next - x
    }

    #[test]
    fn construction_rejects_bad_dimensions() {
        assert_eq!(AngularGrid::new(0, 5).unwrap_err(), GridError::WidthTooSmall(0));
        assert_eq!(AngularGrid::new(3, 5).unwrap_err(), GridError::OddWidth(3));
        assert_eq!(AngularGrid::new(4, 1).unwrap_err(), GridError::HeightTooSmall(1));
        assert!(AngularGrid::new(2, 2).is_ok());
    }

    #[test]
    fn spacings_cover_the_angular_ranges() {
        for (w, h) in [(4, 5), (2, 2), (360, 91), (3600, 901)] {
            let g = AngularGrid::new(w, h).unwrap();
            let full_turn = 2.0 * PI;
            let quarter_turn = PI / 2.0;
            assert!((g.h_phi() * w as f64 - full_turn).abs() <= 4.0 * ulp(full_turn));
            assert!((g.h_theta() * (h - 1) as f64 - quarter_turn).abs() <= 4.0 * ulp(quarter_turn));
        }
    }

    #[test]
    fn linear_index_is_row_major() {
        let g = AngularGrid::new(4, 5).unwrap();
        assert_eq!(g.linear(PixelIndex::new(0, 0)), 0);
        assert_eq!(g.linear(PixelIndex::new(2, 3)), 11);
        assert_eq!(g.pixel(11), PixelIndex::new(2, 3));
    }

    #[test]
    fn neighbor_boundary_rules() {
        let g = AngularGrid::new(4, 5).unwrap();
        // Past the zenith: opposite azimuth on the same row.
        assert_eq!(g.neighbor(PixelIndex::new(4, 0), Direction::Up), PixelIndex::new(4, 2));
        // Below the horizon: the cell itself.
        assert_eq!(g.neighbor(PixelIndex::new(0, 1), Direction::Down), PixelIndex::new(0, 1));
        // Azimuth wrap.
        assert_eq!(g.neighbor(PixelIndex::new(2, 3), Direction::Right), PixelIndex::new(2, 0));
        // Plain interior step.
        assert_eq!(g.neighbor(PixelIndex::new(2, 1), Direction::Left), PixelIndex::new(2, 0));
    }

    #[test]
    fn boundary_reflections_are_involutions() {
        for (w, h) in [(4, 5), (2, 2), (6, 3), (8, 4)] {
            let g = AngularGrid::new(w, h).unwrap();
            for col in 0..w {
                let bottom = PixelIndex::new(0, col);
                let d = g.neighbor(bottom, Direction::Down);
                assert_eq!(g.neighbor(d, Direction::Down), bottom);
                let top = PixelIndex::new(h - 1, col);
                let u = g.neighbor(top, Direction::Up);
                // Half-turn twice is a full turn.
                assert_eq!(g.neighbor(u, Direction::Up), top);
            }
        }
    }

    #[test]
    fn every_neighbor_is_a_valid_cell() {
        for (w, h) in [(2, 2), (4, 5), (10, 3)] {
            let g = AngularGrid::new(w, h).unwrap();
            for lin in 0..g.len() {
                let p = g.pixel(lin);
                for dir in Direction::ALL {
                    assert!(g.contains(g.neighbor(p, dir)));
                }
            }
        }
    }
}
