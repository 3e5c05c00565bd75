//! Per-pixel transition state between a start image and a target image.
//!
//! Every pixel is in one of three states: still showing the start value,
//! already showing the target value, or fixed because both images agree
//! there. Fixed pixels take no part in fitness, mutation probabilities or
//! progress fractions.

use crate::error::{Error, Result};
use crate::mutation::MutationDelta;
use crate::raster::{PixelCoord, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    /// Pixel currently shows the start image value.
    Start,
    /// Pixel currently shows the target image value.
    Target,
    /// Start and target agree; the pixel never changes.
    Fixed,
}

impl CellState {
    /// The other mutable state. `Fixed` maps to itself.
    pub fn flipped(self) -> Self {
        match self {
            CellState::Start => CellState::Target,
            CellState::Target => CellState::Start,
            CellState::Fixed => CellState::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionState {
    width: usize,
    height: usize,
    cells: Vec<CellState>,
    count_s: usize,
    count_t: usize,
    mutable_total: usize,
}

/// Builds the initial state: differing pixels start in `Start`, equal ones are `Fixed`.
///
/// Returns [`Error::EmptyMutableSet`] when the two images are identical.
pub fn build_state(start: &Raster, target: &Raster) -> Result<TransitionState> {
    let state = TransitionState::from_rasters(start, target)?;
    if state.mutable_total == 0 {
        return Err(Error::EmptyMutableSet);
    }
    Ok(state)
}

impl TransitionState {
    /// Like [`build_state`] but accepts a pair with no mutable pixels.
    pub fn from_rasters(start: &Raster, target: &Raster) -> Result<Self> {
        start.check_dims(target)?;
        let cells: Vec<CellState> = start
            .pixels()
            .iter()
            .zip(target.pixels())
            .map(|(s, t)| if s == t { CellState::Fixed } else { CellState::Start })
            .collect();
        let mutable_total = cells.iter().filter(|c| **c != CellState::Fixed).count();
        Ok(Self {
            width: start.width(),
            height: start.height(),
            cells,
            count_s: mutable_total,
            count_t: 0,
            mutable_total,
        })
    }

    /// A `width x height` state where every pixel is mutable and in `Start`.
    pub fn all_mutable(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "state must be at least 1x1, got {width}x{height}"
            )));
        }
        let n = width * height;
        Ok(Self {
            width,
            height,
            cells: vec![CellState::Start; n],
            count_s: n,
            count_t: 0,
            mutable_total: n,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn cell(&self, coord: PixelCoord) -> CellState {
        self.cells[self.index(coord)]
    }

    /// |X|_S: mutable pixels still in the start state.
    pub fn count_s(&self) -> usize {
        self.count_s
    }

    /// |X|_T: mutable pixels in the target state.
    pub fn count_t(&self) -> usize {
        self.count_t
    }

    pub fn mutable_total(&self) -> usize {
        self.mutable_total
    }

    /// Number of mutable pixels agreeing with the target.
    pub fn fitness(&self) -> usize {
        self.count_t
    }

    pub fn fraction_complete(&self) -> Result<f64> {
        if self.mutable_total == 0 {
            return Err(Error::EmptyMutableSet);
        }
        Ok(self.count_t as f64 / self.mutable_total as f64)
    }

    pub fn is_complete(&self) -> bool {
        self.count_t == self.mutable_total
    }

    /// The image the state currently represents.
    pub fn render(&self, start: &Raster, target: &Raster) -> Result<Raster> {
        start.check_dims(target)?;
        if start.width() != self.width || start.height() != self.height {
            return Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: start.width(),
                right_height: start.height(),
            });
        }
        let pixels = self
            .cells
            .iter()
            .zip(start.pixels().iter().zip(target.pixels()))
            .map(|(cell, (s, t))| match cell {
                CellState::Start => *s,
                CellState::Target | CellState::Fixed => *t,
            })
            .collect();
        Raster::new(self.width, self.height, pixels)
    }

    /// Sets a mutable cell. Fixed cells and out-of-range values panic.
    pub fn set_cell(&mut self, coord: PixelCoord, value: CellState) {
        let idx = self.index(coord);
        self.set_index(idx, value);
    }

    pub fn apply(&mut self, delta: &MutationDelta) {
        for &(coord, new_state) in &delta.flipped {
            self.set_cell(coord, new_state);
        }
        debug_assert!(self.counts_coherent());
    }

    /// Undoes a delta previously applied to this state.
    pub fn revert(&mut self, delta: &MutationDelta) {
        for &(coord, new_state) in delta.flipped.iter().rev() {
            self.set_cell(coord, new_state.flipped());
        }
        debug_assert!(self.counts_coherent());
    }

    /// Recounts the grid and compares against the cached counts.
    pub fn counts_coherent(&self) -> bool {
        let (mut s, mut t) = (0, 0);
        for cell in &self.cells {
            match cell {
                CellState::Start => s += 1,
                CellState::Target => t += 1,
                CellState::Fixed => {}
            }
        }
        s == self.count_s && t == self.count_t && s + t == self.mutable_total
    }

    pub(crate) fn index(&self, coord: PixelCoord) -> usize {
        assert!(
            coord.row < self.height && coord.col < self.width,
            "{coord:?} outside {}x{}",
            self.width,
            self.height
        );
        coord.row * self.width + coord.col
    }

    pub(crate) fn coord(&self, index: usize) -> PixelCoord {
        PixelCoord::new(index / self.width, index % self.width)
    }

    fn set_index(&mut self, idx: usize, value: CellState) {
        let old = self.cells[idx];
        assert!(old != CellState::Fixed, "fixed cell {idx} cannot change");
        assert!(value != CellState::Fixed, "mutable cell {idx} cannot become fixed");
        if old == value {
            return;
        }
        self.cells[idx] = value;
        if value == CellState::Target {
            self.count_s -= 1;
            self.count_t += 1;
        } else {
            self.count_t -= 1;
            self.count_s += 1;
        }
    }
}
