//! Sub-cell peak refinement strategies.

use std::sync::Arc;

use crate::registry::{Named, Registry};
use crate::skeleton::GridPoint;
use crate::stack::ChannelView;

/// Maps an NMS peak cell to fractional grid coordinates.
pub trait PeakRefiner: Named + Send + Sync {
    fn refine(&self, channel: ChannelView<'_>, cell: GridPoint) -> (f64, f64);
}

/// Uses the cell center as is.
pub struct NoRefinement;

impl Named for NoRefinement {
    fn name(&self) -> &'static str {
        "none"
    }
}

impl PeakRefiner for NoRefinement {
    fn refine(&self, _channel: ChannelView<'_>, cell: GridPoint) -> (f64, f64) {
        (cell.x as f64, cell.y as f64)
    }
}

/// Shifts a quarter cell toward the larger of the two neighbors on each
/// axis. No shift on ties or when a neighbor is off the grid.
pub struct QuarterOffset;

impl Named for QuarterOffset {
    fn name(&self) -> &'static str {
        "quarter_offset"
    }
}

impl PeakRefiner for QuarterOffset {
    fn refine(&self, channel: ChannelView<'_>, cell: GridPoint) -> (f64, f64) {
        let GridPoint { x, y } = cell;
        let (w, h) = (channel.dims.width, channel.dims.height);
        let shift = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(l), Some(r)) if r > l => 0.25,
            (Some(l), Some(r)) if l > r => -0.25,
            _ => 0.0,
        };
        let left = (x > 0).then(|| channel.get(x - 1, y));
        let right = (x + 1 < w).then(|| channel.get(x + 1, y));
        let up = (y > 0).then(|| channel.get(x, y - 1));
        let down = (y + 1 < h).then(|| channel.get(x, y + 1));
        (x as f64 + shift(left, right), y as f64 + shift(up, down))
    }
}

pub fn refiner_registry() -> Registry<dyn PeakRefiner> {
    let mut reg: Registry<dyn PeakRefiner> = Registry::new("peak refinement");
    reg.register(Arc::new(QuarterOffset)).register(Arc::new(NoRefinement));
    reg
}
