//! FHM1 heatmap files.
//!
//! Layout (little-endian):
//! - magic: `b"FHM1"`
//! - channels, height, width: u32
//! - stride: f32
//! - data: f32 × channels × height × width, channel-major then row-major

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::stack::{GridDims, HeatmapStack};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FHM1";
const HEADER_LEN: usize = 20;

pub fn write_fhm<W: Write>(mut w: W, stack: &HeatmapStack) -> Result<()> {
    let dim = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
    };
    w.write_all(MAGIC)?;
    w.write_all(&dim(stack.channels, "channel count")?.to_le_bytes())?;
    w.write_all(&dim(stack.dims.height, "height")?.to_le_bytes())?;
    w.write_all(&dim(stack.dims.width, "width")?.to_le_bytes())?;
    w.write_all(&(stack.stride as f32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(stack.data.len() * 4);
    for &v in &stack.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_fhm<R: Read>(mut r: R) -> Result<HeatmapStack> {
    let mut header = [0u8; HEADER_LEN];
    read_exact(&mut r, &mut header, "header")?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &header[0..4])));
    }
    let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let channels = u32_at(4);
    let height = u32_at(8);
    let width = u32_at(12);
    let stride = f32::from_le_bytes(header[16..20].try_into().unwrap()) as f64;
    let count = channels
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 4 {
        return Err(Error::Format(format!(
            "expected {} data bytes, found {}",
            count * 4,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(HeatmapStack {
        channels,
        dims: GridDims::new(width, height),
        stride,
        data,
    })
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub fn save(path: impl AsRef<Path>, stack: &HeatmapStack) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_fhm(&mut w, stack)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<HeatmapStack> {
    read_fhm(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_bytes_exact() {
        let stack =
            HeatmapStack::from_channels(vec![vec![0.5, 1.0], vec![0.25, 0.0]], GridDims::new(2, 1), 4.0)
                .unwrap();
        let mut buf = Vec::new();
        write_fhm(&mut buf, &stack).unwrap();
        let mut expected = b"FHM1".to_vec();
        expected.extend([2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        expected.extend(4.0f32.to_le_bytes());
        for v in [0.5f32, 1.0, 0.25, 0.0] {
            expected.extend(v.to_le_bytes());
        }
        assert_eq!(buf, expected);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(read_fhm(&b"FHM2"[..]), Err(Error::Format(_))));
        let mut buf = Vec::new();
        write_fhm(&mut buf, &HeatmapStack::zeros(1, GridDims::new(3, 3), 1.0)).unwrap();
        assert!(matches!(read_fhm(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        buf[0] = b'X';
        assert!(matches!(read_fhm(&buf[..]), Err(Error::Format(_))));
        buf[0] = b'F';
        buf.push(0);
        assert!(matches!(read_fhm(&buf[..]), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn f32_values_round_trip(
            c in 1usize..4, w in 1usize..6, h in 1usize..6,
            seed in proptest::collection::vec(0.0f32..1.2, 0..200),
        ) {
            let n = c * w * h;
            let data: Vec<f64> = (0..n).map(|i| seed.get(i).copied().unwrap_or(0.0) as f64).collect();
            let stack = HeatmapStack { channels: c, dims: GridDims::new(w, h), stride: 8.0, data };
            let mut buf = Vec::new();
            write_fhm(&mut buf, &stack).unwrap();
            prop_assert_eq!(buf.len(), 20 + 4 * n);
            prop_assert_eq!(read_fhm(&buf[..]).unwrap(), stack);
        }
    }
}
