//! Mutation operators.
//!
//! Per-pixel operators (standard bit and asymmetric) visit the mutable
//! cells in row-major order and take exactly one [`RngStream::unit`] draw
//! per mutable cell. Geometric operators (strip, combined strip, box) take
//! an anchor row, then an anchor column, then (combined strip only) an
//! orientation coin, and by default set every covered cell to the target
//! state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::PixelCoord;
use crate::rng::RngStream;
use crate::state::{CellState, TransitionState};

pub const DEFAULT_C_S: f64 = 100.0;
pub const DEFAULT_C_T: f64 = 50.0;
pub const DEFAULT_STRIP_LENGTH: usize = 180;
pub const DEFAULT_BOX_SIZE: usize = 3;
pub const DEFAULT_H_STRIP: RegionSize = RegionSize { width: 200, height: 40 };
pub const DEFAULT_V_STRIP: RegionSize = RegionSize { width: 1, height: 200 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Standard,
    Asymmetric,
    Strip,
    CombinedStrip,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricParams {
    pub c_s: f64,
    pub c_t: f64,
}

impl Default for AsymmetricParams {
    fn default() -> Self {
        Self {
            c_s: DEFAULT_C_S,
            c_t: DEFAULT_C_T,
        }
    }
}

impl AsymmetricParams {
    pub fn new(c_s: f64, c_t: f64) -> Self {
        Self { c_s, c_t }
    }

    pub fn validate(&self) -> Result<()> {
        // NaN fails both comparisons
        if !(self.c_s >= 1.0 && self.c_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("c_s must be >= 1, got {}", self.c_s)));
        }
        if !(self.c_t >= 1.0 && self.c_t.is_finite()) {
            return Err(Error::InvalidParameter(format!("c_t must be >= 1, got {}", self.c_t)));
        }
        Ok(())
    }

    /// Per-cell flip probability for a cell in `Start`.
    pub fn p_start(&self, count_s: usize) -> f64 {
        clamped_rate(self.c_s, count_s)
    }

    /// Per-cell flip probability for a cell in `Target`.
    pub fn p_target(&self, count_t: usize) -> f64 {
        clamped_rate(self.c_t, count_t)
    }
}

fn clamped_rate(c: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        (c / (2.0 * count as f64)).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionSize {
    pub width: usize,
    pub height: usize,
}

impl RegionSize {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter(format!(
                "{what} must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Geometric operator that a composite run alternates with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GeometricOp {
    Strip { length: usize },
    CombinedStrip { horizontal: RegionSize, vertical: RegionSize },
    Box { size: usize },
}

impl GeometricOp {
    pub fn strip() -> Self {
        GeometricOp::Strip {
            length: DEFAULT_STRIP_LENGTH,
        }
    }

    pub fn combined_strip() -> Self {
        GeometricOp::CombinedStrip {
            horizontal: DEFAULT_H_STRIP,
            vertical: DEFAULT_V_STRIP,
        }
    }

    pub fn boxed() -> Self {
        GeometricOp::Box {
            size: DEFAULT_BOX_SIZE,
        }
    }

    pub fn kind(&self) -> OperatorKind {
        match self {
            GeometricOp::Strip { .. } => OperatorKind::Strip,
            GeometricOp::CombinedStrip { .. } => OperatorKind::CombinedStrip,
            GeometricOp::Box { .. } => OperatorKind::Box,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GeometricOp::Strip { length } => RegionSize::new(1, *length).validate("strip"),
            GeometricOp::CombinedStrip { horizontal, vertical } => {
                horizontal.validate("horizontal strip")?;
                vertical.validate("vertical strip")
            }
            GeometricOp::Box { size } => RegionSize::new(*size, *size).validate("box"),
        }
    }
}

/// Number of asymmetric steps followed by number of partner steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interleave {
    pub asymmetric: u64,
    pub partner: u64,
}

impl Default for Interleave {
    fn default() -> Self {
        Self {
            asymmetric: 1,
            partner: 1,
        }
    }
}

impl Interleave {
    pub fn new(asymmetric: u64, partner: u64) -> Result<Self> {
        if asymmetric == 0 || partner == 0 {
            return Err(Error::InvalidParameter(format!(
                "interleave ratio must be positive, got {asymmetric}:{partner}"
            )));
        }
        Ok(Self { asymmetric, partner })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OperatorSpec {
    Standard,
    Asymmetric(AsymmetricParams),
    Strip { length: usize },
    CombinedStrip { horizontal: RegionSize, vertical: RegionSize },
    Box { size: usize },
    Composite {
        asymmetric: AsymmetricParams,
        partner: GeometricOp,
        ratio: Interleave,
    },
}

impl OperatorSpec {
    pub fn asymmetric() -> Self {
        OperatorSpec::Asymmetric(AsymmetricParams::default())
    }

    pub fn strip() -> Self {
        GeometricOp::strip().into()
    }

    pub fn combined_strip() -> Self {
        GeometricOp::combined_strip().into()
    }

    pub fn boxed() -> Self {
        GeometricOp::boxed().into()
    }

    pub fn composite(partner: GeometricOp) -> Self {
        OperatorSpec::Composite {
            asymmetric: AsymmetricParams::default(),
            partner,
            ratio: Interleave::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::Standard => Ok(()),
            OperatorSpec::Asymmetric(p) => p.validate(),
            OperatorSpec::Strip { length } => GeometricOp::Strip { length: *length }.validate(),
            OperatorSpec::CombinedStrip { horizontal, vertical } => GeometricOp::CombinedStrip {
                horizontal: *horizontal,
                vertical: *vertical,
            }
            .validate(),
            OperatorSpec::Box { size } => GeometricOp::Box { size: *size }.validate(),
            OperatorSpec::Composite {
                asymmetric,
                partner,
                ratio,
            } => {
                asymmetric.validate()?;
                partner.validate()?;
                Interleave::new(ratio.asymmetric, ratio.partner).map(|_| ())
            }
        }
    }

    /// Whether every proposal only moves cells toward the target.
    pub fn is_monotone(&self, geometry: GeometryOptions) -> bool {
        !geometry.toggle
            && matches!(
                self,
                OperatorSpec::Strip { .. } | OperatorSpec::CombinedStrip { .. } | OperatorSpec::Box { .. }
            )
    }
}

impl From<GeometricOp> for OperatorSpec {
    fn from(op: GeometricOp) -> Self {
        match op {
            GeometricOp::Strip { length } => OperatorSpec::Strip { length },
            GeometricOp::CombinedStrip { horizontal, vertical } => {
                OperatorSpec::CombinedStrip { horizontal, vertical }
            }
            GeometricOp::Box { size } => OperatorSpec::Box { size },
        }
    }
}

/// Non-default behaviour switches for the geometric operators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Toggle covered cells instead of setting them to the target.
    pub toggle: bool,
    /// Restrict anchors so the whole region fits inside the image.
    pub fit_anchors: bool,
}

/// The cells a proposal changes, each with its new state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationDelta {
    pub flipped: Vec<(PixelCoord, CellState)>,
    pub proposal_kind: OperatorKind,
}

impl MutationDelta {
    pub fn empty(kind: OperatorKind) -> Self {
        Self {
            flipped: Vec::new(),
            proposal_kind: kind,
        }
    }

    pub fn to_target(&self) -> usize {
        self.flipped.iter().filter(|(_, s)| *s == CellState::Target).count()
    }

    pub fn to_start(&self) -> usize {
        self.flipped.iter().filter(|(_, s)| *s == CellState::Start).count()
    }

    /// Change in fitness if this delta is applied.
    pub fn fitness_gain(&self) -> i64 {
        self.to_target() as i64 - self.to_start() as i64
    }

    pub fn is_empty(&self) -> bool {
        self.flipped.is_empty()
    }
}

/// Which concrete operator a composite run uses at a given generation index.
///
/// Within each block of `asymmetric + partner` generations the first
/// `asymmetric` use asymmetric mutation and the rest use the partner.
pub fn composite_next(generation: u64, partner: OperatorKind, ratio: Interleave) -> OperatorKind {
    let period = ratio.asymmetric + ratio.partner;
    if generation % period < ratio.asymmetric {
        OperatorKind::Asymmetric
    } else {
        partner
    }
}

/// Flips each mutable cell independently with probability `1 / mutable_total`.
pub fn standard_mutation(state: &TransitionState, rng: &mut RngStream) -> MutationDelta {
    let total = state.mutable_total();
    let mut delta = MutationDelta::empty(OperatorKind::Standard);
    if total == 0 {
        return delta;
    }
    let p = 1.0 / total as f64;
    for (idx, cell) in state.cells().iter().enumerate() {
        if *cell == CellState::Fixed {
            continue;
        }
        if rng.bernoulli(p) {
            delta.flipped.push((state.coord(idx), cell.flipped()));
        }
    }
    delta
}

/// Flips start cells with probability `c_s / (2 |X|_S)` and target cells
/// with probability `c_t / (2 |X|_T)`, each clamped to 1.
pub fn asymmetric_mutation(state: &TransitionState, params: AsymmetricParams, rng: &mut RngStream) -> MutationDelta {
    let p_s = params.p_start(state.count_s());
    let p_t = params.p_target(state.count_t());
    let mut delta = MutationDelta::empty(OperatorKind::Asymmetric);
    for (idx, cell) in state.cells().iter().enumerate() {
        let p = match cell {
            CellState::Fixed => continue,
            CellState::Start => p_s,
            CellState::Target => p_t,
        };
        if rng.bernoulli(p) {
            delta.flipped.push((state.coord(idx), cell.flipped()));
        }
    }
    delta
}

/// Vertical strip, one pixel wide, growing downward from a random anchor.
pub fn strip_mutation(
    state: &TransitionState,
    length: usize,
    geometry: GeometryOptions,
    rng: &mut RngStream,
) -> MutationDelta {
    let size = RegionSize::new(1, length);
    let anchor = draw_anchor(state, size, geometry, rng);
    region_delta(state, anchor, size, geometry, OperatorKind::Strip)
}

/// Horizontal or vertical rectangle, chosen by a fair coin.
pub fn combined_strip_mutation(
    state: &TransitionState,
    horizontal: RegionSize,
    vertical: RegionSize,
    geometry: GeometryOptions,
    rng: &mut RngStream,
) -> MutationDelta {
    let (anchor, size) = if geometry.fit_anchors {
        // region size must be known before the anchor range is
        let size = if rng.coin() { horizontal } else { vertical };
        (draw_anchor(state, size, geometry, rng), size)
    } else {
        let anchor = draw_anchor(state, horizontal, geometry, rng);
        let size = if rng.coin() { horizontal } else { vertical };
        (anchor, size)
    };
    region_delta(state, anchor, size, geometry, OperatorKind::CombinedStrip)
}

/// Square block anchored at its top-left corner.
pub fn box_mutation(
    state: &TransitionState,
    size: usize,
    geometry: GeometryOptions,
    rng: &mut RngStream,
) -> MutationDelta {
    let region = RegionSize::new(size, size);
    let anchor = draw_anchor(state, region, geometry, rng);
    region_delta(state, anchor, region, geometry, OperatorKind::Box)
}

/// Delta for a region anchored at `anchor` and clipped to the image.
pub fn region_delta(
    state: &TransitionState,
    anchor: PixelCoord,
    size: RegionSize,
    geometry: GeometryOptions,
    kind: OperatorKind,
) -> MutationDelta {
    let row_end = anchor.row.saturating_add(size.height).min(state.height());
    let col_end = anchor.col.saturating_add(size.width).min(state.width());
    let mut delta = MutationDelta::empty(kind);
    for row in anchor.row..row_end {
        for col in anchor.col..col_end {
            let coord = PixelCoord::new(row, col);
            match (state.cell(coord), geometry.toggle) {
                (CellState::Fixed, _) => {}
                (CellState::Start, _) => delta.flipped.push((coord, CellState::Target)),
                (CellState::Target, true) => delta.flipped.push((coord, CellState::Start)),
                (CellState::Target, false) => {}
            }
        }
    }
    delta
}

fn draw_anchor(state: &TransitionState, size: RegionSize, geometry: GeometryOptions, rng: &mut RngStream) -> PixelCoord {
    let (rows, cols) = if geometry.fit_anchors {
        (
            state.height().saturating_sub(size.height) + 1,
            state.width().saturating_sub(size.width) + 1,
        )
    } else {
        (state.height(), state.width())
    };
    let row = rng.below(rows);
    let col = rng.below(cols);
    PixelCoord::new(row, col)
}

/// An operator spec bound to its geometry options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mutator {
    pub spec: OperatorSpec,
    pub geometry: GeometryOptions,
}

impl Mutator {
    pub fn new(spec: OperatorSpec, geometry: GeometryOptions) -> Self {
        Self { spec, geometry }
    }

    /// Proposes a delta for the step that follows generation `generation`.
    pub fn propose(&self, state: &TransitionState, generation: u64, rng: &mut RngStream) -> MutationDelta {
        match self.spec {
            OperatorSpec::Standard => standard_mutation(state, rng),
            OperatorSpec::Asymmetric(p) => asymmetric_mutation(state, p, rng),
            OperatorSpec::Strip { length } => strip_mutation(state, length, self.geometry, rng),
            OperatorSpec::CombinedStrip { horizontal, vertical } => {
                combined_strip_mutation(state, horizontal, vertical, self.geometry, rng)
            }
            OperatorSpec::Box { size } => box_mutation(state, size, self.geometry, rng),
            OperatorSpec::Composite {
                asymmetric,
                partner,
                ratio,
            } => match composite_next(generation, partner.kind(), ratio) {
                OperatorKind::Asymmetric => asymmetric_mutation(state, asymmetric, rng),
                _ => Mutator::new(partner.into(), self.geometry).propose(state, generation, rng),
            },
        }
    }
}
