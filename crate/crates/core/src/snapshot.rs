//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `SNLS` |
//! | 2 | format version (`u16`) |
//! | 2 | dimension `d` (`u16`) |
//! | 4 | nodes per axis `n` (`u32`) |
//! | 4 | flags (`u32`); bit 0 marks an origin block |
//! | 8·d | half-widths `L` per axis (`f64`) |
//! | 8·d | box center per axis, present when flag bit 0 is set |
//! | 8·n^d | values, row-major (`f64`) |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"SNLS";
pub const VERSION: u16 = 1;
const FLAG_ORIGIN: u32 = 1;

pub fn encode(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let d = g.dim();
    let has_origin = g.center()[..d].iter().any(|c| *c != 0.0);
    let mut out = Vec::with_capacity(16 + 16 * d + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u16).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&(if has_origin { FLAG_ORIGIN } else { 0 }).to_le_bytes());
    for _ in 0..d {
        out.extend_from_slice(&g.half_width().to_le_bytes());
    }
    if has_origin {
        for c in &g.center()[..d] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let chunk = self.bytes.get(self.pos..self.pos + N)?;
        self.pos += N;
        chunk.try_into().ok()
    }

    fn f64(&mut self) -> Option<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Field, String> {
    let mut r = Reader { bytes, pos: 0 };
    let short = || "truncated header".to_string();
    if &r.take::<4>().ok_or_else(short)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = u16::from_le_bytes(r.take().ok_or_else(short)?);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let d = u16::from_le_bytes(r.take().ok_or_else(short)?) as usize;
    let n = u32::from_le_bytes(r.take().ok_or_else(short)?) as usize;
    let flags = u32::from_le_bytes(r.take().ok_or_else(short)?);
    if d != 1 && d != 2 {
        return Err(format!("unsupported dimension {d}"));
    }
    let mut widths = Vec::with_capacity(d);
    for _ in 0..d {
        widths.push(r.f64().ok_or_else(short)?);
    }
    if widths.iter().any(|w| *w != widths[0]) {
        return Err("anisotropic boxes are not supported".into());
    }
    let mut center = [0.0; 2];
    if flags & FLAG_ORIGIN != 0 {
        for c in center.iter_mut().take(d) {
            *c = r.f64().ok_or_else(short)?;
        }
    }
    let grid = Grid::centered(d, widths[0], n, center).map_err(|e| e.to_string())?;
    let expected = r.pos + 8 * grid.len();
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes, found {}", bytes.len()));
    }
    let values = bytes[r.pos..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Field::from_values(grid, values).map_err(|e| e.to_string())
}

pub fn write_snapshot(path: &Path, field: &Field) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode(field))?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|reason| Error::Snapshot { path: path.to_path_buf(), reason })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(1, 2.0, 5).unwrap();
        let f = Field::from_fn(g, |x| x[0] + 3.0);
        let b = encode(&f);
        assert_eq!(&b[..4], b"SNLS");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u16::from_le_bytes([b[6], b[7]]), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 0);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 2.0);
        assert_eq!(b.len(), 16 + 8 + 5 * 8);
        assert_eq!(f64::from_le_bytes(b[24 + 8..24 + 16].try_into().unwrap()), 2.0);
    }

    #[test]
    fn round_trip_with_origin() {
        let g = Grid::centered(2, 3.0, 7, [1.5, -2.0]).unwrap();
        let f = Field::from_fn(g, |x| (x[0] * x[1]).sin());
        let back = decode(&encode(&f)).unwrap();
        assert_eq!(back, f);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.snls");
        write_snapshot(&path, &f).unwrap();
        assert_eq!(read_snapshot(&path).unwrap(), f);
    }

    #[test]
    fn rejects_corruption() {
        let g = Grid::new(1, 1.0, 3).unwrap();
        let mut b = encode(&Field::zeros(g));
        assert!(decode(&b[..10]).is_err());
        b.push(0);
        assert!(decode(&b).is_err());
        b[0] = b'X';
        assert!(decode(&b).is_err());
    }
}
