//! Binary loss masks marking cells with missing annotation.

use serde::{Deserialize, Serialize};

use crate::skeleton::image_to_grid;
use crate::stack::GridDims;
use crate::{Error, Result};

/// Axis-aligned block of cells; clipped to the grid when applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl CellRect {
    /// Cells whose mapped centers fall inside the image box `[x0, x1] × [y0, y1]`.
    pub fn from_image_box(x0: f64, y0: f64, x1: f64, y1: f64, stride: f64) -> Option<Self> {
        let (gx0, gy0) = image_to_grid(x0.min(x1), y0.min(y1), stride);
        let (gx1, gy1) = image_to_grid(x0.max(x1), y0.max(y1), stride);
        let (cx0, cy0) = (gx0.ceil().max(0.0), gy0.ceil().max(0.0));
        let (cx1, cy1) = (gx1.floor(), gy1.floor());
        if cx1 < cx0 || cy1 < cy0 {
            return None;
        }
        Some(Self {
            x: cx0 as usize,
            y: cy0 as usize,
            width: (cx1 - cx0) as usize + 1,
            height: (cy1 - cy0) as usize + 1,
        })
    }
}

/// `W(p)`: 0 where the annotation is missing, 1 elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMap {
    pub dims: GridDims,
    pub data: Vec<u8>,
}

impl MaskMap {
    pub fn ones(dims: GridDims) -> Self {
        Self {
            dims,
            data: vec![1; dims.cells()],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.dims.width + x]
    }

    pub fn zero_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 0).count()
    }

    /// A coarse cell stays annotated only if its whole block is annotated.
    pub fn downsample(&self, factor: usize) -> Result<MaskMap> {
        let GridDims { width, height } = self.dims;
        if factor == 0 || width % factor != 0 || height % factor != 0 {
            return Err(Error::IndivisibleDims {
                width,
                height,
                factor,
            });
        }
        let dims = GridDims::new(width / factor, height / factor);
        let mut out = MaskMap::ones(dims);
        for y in 0..height {
            for x in 0..width {
                if self.get(x, y) == 0 {
                    out.data[(y / factor) * dims.width + x / factor] = 0;
                }
            }
        }
        Ok(out)
    }
}

pub fn build_mask(missing: &[CellRect], dims: GridDims) -> MaskMap {
    let mut mask = MaskMap::ones(dims);
    for r in missing {
        let x1 = (r.x.saturating_add(r.width)).min(dims.width);
        let y1 = (r.y.saturating_add(r.height)).min(dims.height);
        for y in r.y.min(dims.height)..y1 {
            for x in r.x.min(dims.width)..x1 {
                mask.data[y * dims.width + x] = 0;
            }
        }
    }
    mask
}
