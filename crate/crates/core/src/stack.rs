//! Multi-channel heatmap grids.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

impl GridDims {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }
}

/// `channels × height × width` scores, channel-major then row-major.
/// Keypoint channels come first, then body parts.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    pub channels: usize,
    pub dims: GridDims,
    /// Image pixels per cell.
    pub stride: f64,
    pub data: Vec<f64>,
}

impl HeatmapStack {
    pub fn zeros(channels: usize, dims: GridDims, stride: f64) -> Self {
        Self {
            channels,
            dims,
            stride,
            data: vec![0.0; channels * dims.cells()],
        }
    }

    pub fn from_channels(channels: Vec<Vec<f64>>, dims: GridDims, stride: f64) -> Result<Self> {
        let n = channels.len();
        let mut data = Vec::with_capacity(n * dims.cells());
        for (j, c) in channels.into_iter().enumerate() {
            if c.len() != dims.cells() {
                return Err(Error::DimMismatch(format!(
                    "channel {j} has {} values, grid has {}",
                    c.len(),
                    dims.cells()
                )));
            }
            data.extend(c);
        }
        Ok(Self {
            channels: n,
            dims,
            stride,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn channel(&self, j: usize) -> ChannelView<'_> {
        let n = self.dims.cells();
        ChannelView {
            dims: self.dims,
            data: &self.data[j * n..(j + 1) * n],
        }
    }

    pub fn channel_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.dims.cells();
        &mut self.data[j * n..(j + 1) * n]
    }

    #[inline]
    pub fn get(&self, j: usize, x: usize, y: usize) -> f64 {
        self.data[(j * self.dims.height + y) * self.dims.width + x]
    }

    pub fn same_shape(&self, other: &HeatmapStack) -> bool {
        self.channels == other.channels && self.dims == other.dims
    }

    /// Average-pools `factor × factor` blocks; the stride grows by `factor`.
    pub fn downsample(&self, factor: usize) -> Result<HeatmapStack> {
        let GridDims { width, height } = self.dims;
        if factor == 0 || width % factor != 0 || height % factor != 0 {
            return Err(Error::IndivisibleDims {
                width,
                height,
                factor,
            });
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let out_dims = GridDims::new(width / factor, height / factor);
        let mut out = HeatmapStack::zeros(self.channels, out_dims, self.stride * factor as f64);
        let area = (factor * factor) as f64;
        for j in 0..self.channels {
            let src = self.channel(j);
            let dst = out.channel_mut(j);
            for oy in 0..out_dims.height {
                for ox in 0..out_dims.width {
                    let mut sum = 0.0;
                    for y in oy * factor..(oy + 1) * factor {
                        for x in ox * factor..(ox + 1) * factor {
                            sum += src.get(x, y);
                        }
                    }
                    dst[oy * out_dims.width + ox] = sum / area;
                }
            }
        }
        Ok(out)
    }

    /// Full-resolution stack followed by `levels - 1` successive halvings,
    /// each pooled directly from the full-resolution grid.
    pub fn pyramid(&self, levels: usize) -> Result<Vec<HeatmapStack>> {
        (0..levels).map(|i| self.downsample(1 << i)).collect()
    }
}

/// Borrowed single channel.
#[derive(Debug, Clone, Copy)]
pub struct ChannelView<'a> {
    pub dims: GridDims,
    pub data: &'a [f64],
}

impl<'a> ChannelView<'a> {
    pub fn new(dims: GridDims, data: &'a [f64]) -> Self {
        assert_eq!(dims.cells(), data.len(), "channel data does not match dims");
        Self { dims, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.dims.width + x]
    }

    /// Bilinear interpolation at fractional grid coordinates, clamped to the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.dims.width - 1) as f64;
        let max_y = (self.dims.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.dims.width - 1);
        let y1 = (y0 + 1).min(self.dims.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_block_mean() {
        let s = HeatmapStack::from_channels(vec![vec![0.2, 0.4, 0.6, 0.8]], GridDims::new(2, 2), 4.0)
            .unwrap();
        let d = s.downsample(2).unwrap();
        assert_eq!(d.dims, GridDims::new(1, 1));
        assert!((d.data[0] - 0.5).abs() < 1e-15);
        assert_eq!(d.stride, 8.0);
    }

    #[test]
    fn downsample_identity_and_constant() {
        let dims = GridDims::new(8, 4);
        let mut s = HeatmapStack::zeros(2, dims, 4.0);
        s.data.iter_mut().for_each(|v| *v = 0.375);
        assert_eq!(s.downsample(1).unwrap(), s);
        let d = s.downsample(4).unwrap();
        assert!(d.data.iter().all(|&v| v == 0.375));
    }

    #[test]
    fn downsample_indivisible() {
        let s = HeatmapStack::zeros(1, GridDims::new(6, 6), 1.0);
        assert!(matches!(s.downsample(4), Err(Error::IndivisibleDims { factor: 4, .. })));
    }

    #[test]
    fn pyramid_strides() {
        let s = HeatmapStack::zeros(1, GridDims::new(96, 96), 4.0);
        let p = s.pyramid(5).unwrap();
        let strides: Vec<f64> = p.iter().map(|l| l.stride).collect();
        assert_eq!(strides, vec![4.0, 8.0, 16.0, 32.0, 64.0]);
        assert_eq!(p[4].dims, GridDims::new(6, 6));
    }

    #[test]
    fn bilinear_at_nodes_and_midpoints() {
        let data = [0.0, 1.0, 2.0, 3.0];
        let v = ChannelView::new(GridDims::new(2, 2), &data);
        assert_eq!(v.sample_bilinear(1.0, 1.0), 3.0);
        assert_eq!(v.sample_bilinear(0.5, 0.5), 1.5);
        assert_eq!(v.sample_bilinear(-3.0, 0.0), 0.0);
        assert_eq!(v.sample_bilinear(0.5, 0.0), 0.5);
    }
}
