//! Binary snapshots of a nonlinear state.
//!
//! Layout (little endian): `CTL1`, version u32, nx ny nz u32, lx ly lz f64,
//! t f64, ν f64, remap count u64, then per mode index the triple (u¹, u², u³)
//! as (re, im) f64 pairs.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nonlinear::NonlinearState;
use crate::spectral::{Frame, Grid, SpectralVectorField};
use crate::Complex64;

pub const MAGIC: &[u8; 4] = b"CTL1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 24 + 8 + 8 + 8;

pub fn write_checkpoint(state: &NonlinearState, path: impl AsRef<Path>) -> Result<()> {
    let g = state.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + g.len() * 48);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for n in [g.nx, g.ny, g.nz] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in [g.lx, g.ly, g.lz, state.t(), state.nu] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&state.remaps().to_le_bytes());
    for idx in 0..g.len() {
        for c in 0..3 {
            let v = state.u.comps[c][idx];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint {
                path: self.path.to_path_buf(),
                msg: format!("truncated while reading {what} at byte {}", self.pos),
            });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }
}

/// Read a checkpoint; with `expected` set, its grid must match exactly.
pub fn read_checkpoint(path: impl AsRef<Path>, expected: Option<Grid>) -> Result<NonlinearState> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    let bad = |msg: String| Error::Checkpoint {
        path: path.to_path_buf(),
        msg,
    };
    let magic: [u8; 4] = cur.take("magic")?;
    if &magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version} (expected {VERSION})")));
    }
    let (nx, ny, nz) = (cur.u32("nx")? as usize, cur.u32("ny")? as usize, cur.u32("nz")? as usize);
    let (lx, ly, lz) = (cur.f64("lx")?, cur.f64("ly")?, cur.f64("lz")?);
    let t = cur.f64("t")?;
    let nu = cur.f64("nu")?;
    let remaps = u64::from_le_bytes(cur.take("remap count")?);
    let grid = Grid::new(nx, ny, nz, lx, ly, lz).map_err(|e| bad(e.to_string()))?;
    if let Some(e) = expected {
        if (e.nx, e.ny, e.nz) != (nx, ny, nz) || (e.lx, e.ly, e.lz) != (lx, ly, lz) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}x{} on [{}, {}, {}]", e.nx, e.ny, e.nz, e.lx, e.ly, e.lz),
                found: format!("{nx}x{ny}x{nz} on [{lx}, {ly}, {lz}]"),
            });
        }
    }
    let need = HEADER_LEN + grid.len() * 48;
    if bytes.len() < need {
        return Err(bad(format!("truncated: {} of {need} bytes", bytes.len())));
    }
    if bytes.len() > need {
        return Err(bad(format!("{} trailing bytes", bytes.len() - need)));
    }
    let mut u = SpectralVectorField::zeros(grid, Frame::Shearing { remaps }, t);
    for idx in 0..grid.len() {
        for c in 0..3 {
            let re = cur.f64("coefficient")?;
            let im = cur.f64("coefficient")?;
            u.comps[c][idx] = Complex64::new(re, im);
        }
    }
    u.div_free = true;
    Ok(NonlinearState { u, nu })
}
