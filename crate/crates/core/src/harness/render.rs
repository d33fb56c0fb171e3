//! Binary PPM (P6) overlays: heatmap intensity plus colored skeletons.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::skeleton::{Pose, SkeletonSpec};
use crate::stack::HeatmapStack;
use crate::Result;

const PALETTE: [[u8; 3]; 6] = [
    [255, 64, 64],
    [64, 255, 64],
    [64, 128, 255],
    [255, 220, 0],
    [255, 0, 255],
    [0, 255, 255],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// RGB, row-major.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height * 3],
        }
    }

    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), rgb: [u8; 3]) {
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, rgb);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_ppm())?;
        w.flush()?;
        Ok(())
    }
}

/// Canvas of `width × height` px. Each pixel shows the max over channels of
/// the cell containing it (nearest-neighbor upscale, clamped to [0, 1]) as
/// gray; each pose's labeled limbs are drawn on top in its palette color.
pub fn render_overlay(
    width: usize,
    height: usize,
    poses: &[Pose],
    stack: Option<&HeatmapStack>,
    spec: &SkeletonSpec,
) -> Image {
    let mut img = Image::black(width, height);
    if let Some(stack) = stack {
        let stride = stack.stride.max(1.0);
        for y in 0..height {
            let cy = (y as f64 / stride).floor() as usize;
            if cy >= stack.dims.height {
                continue;
            }
            for x in 0..width {
                let cx = (x as f64 / stride).floor() as usize;
                if cx >= stack.dims.width {
                    continue;
                }
                let v = (0..stack.channels)
                    .map(|j| stack.get(j, cx, cy))
                    .fold(0.0f64, f64::max)
                    .clamp(0.0, 1.0);
                let g = (v * 255.0).round() as u8;
                img.put(x as i64, y as i64, [g, g, g]);
            }
        }
    }
    for (n, pose) in poses.iter().enumerate() {
        let rgb = PALETTE[n % PALETTE.len()];
        for e in &spec.edges {
            let (Some(a), Some(b)) = (pose.keypoints.get(e.a), pose.keypoints.get(e.b)) else {
                continue;
            };
            if a.is_labeled() && b.is_labeled() {
                let p = (a.x.round() as i64, a.y.round() as i64);
                let q = (b.x.round() as i64, b.y.round() as i64);
                img.line(p, q, rgb);
            }
        }
    }
    img
}
