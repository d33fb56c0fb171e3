use serde::{Deserialize, Serialize};

use crate::skeleton::GridPoint;
use crate::stack::ChannelView;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub cell: GridPoint,
    pub score: f64,
}

/// 3×3 non-maximum suppression.
///
/// A cell survives when its value is at least `min_score`, no neighbor is
/// larger, and no equal-valued neighbor precedes it in row-major order.
/// Border cells compare only the neighbors that exist. Output is row-major.
pub fn nms_peaks(channel: ChannelView<'_>, min_score: f64) -> Vec<Peak> {
    let (w, h) = (channel.dims.width, channel.dims.height);
    let mut peaks = Vec::new();
    for y in 0..h {
        'cell: for x in 0..w {
            let v = channel.get(x, y);
            if !(v.is_finite() && v >= min_score) {
                continue;
            }
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) == (x, y) {
                        continue;
                    }
                    let n = channel.get(nx, ny);
                    if n > v || (n == v && (ny, nx) < (y, x)) {
                        continue 'cell;
                    }
                }
            }
            peaks.push(Peak {
                cell: GridPoint { x, y },
                score: v,
            });
        }
    }
    peaks
}
